// Command-line front end: train, eval, ablate, compare, validate-config,
// emit-defaults. Exit codes: 0 success, 2 configuration or input error,
// 3 every seed failed.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "risamec/experiment.hpp"

namespace {

struct CommonOptions {
    std::string config;
    std::string preset;
    std::vector<std::uint64_t> seeds;
    std::string out;
    std::string agent;
    std::optional<int> episodes;
};

void add_common(CLI::App* cmd, CommonOptions& o)
{
    cmd->add_option("--config", o.config, "JSON config merged over the preset")->check(CLI::ExistingFile);
    cmd->add_option("--preset", o.preset, "Base preset")->check(CLI::IsMember({"table1", "table1-750", "desk"}));
    cmd->add_option("--seed", o.seeds, "Seed; repeat for several (replaces the configured list)");
    cmd->add_option("--out", o.out, "Output directory");
    cmd->add_option("--agent", o.agent, "Agent kind")
        ->check(CLI::IsMember({"ddpg", "dql", "ablation-no-ris", "ablation-no-traj", "oracle-phase"}));
    cmd->add_option("--episodes", o.episodes, "Training episodes (override)")->check(CLI::NonNegativeNumber);
}

risamec::ExperimentSpec resolve(const CommonOptions& o)
{
    std::optional<std::string> preset;
    if (!o.preset.empty())
        preset = o.preset;
    auto spec = o.config.empty() ? risamec::resolve_config(nlohmann::json::object(), preset)
                                 : risamec::load_config(o.config, preset);
    if (!o.seeds.empty())
        spec.seeds = o.seeds;
    if (!o.out.empty())
        spec.output_dir = o.out;
    if (!o.agent.empty())
        spec.agent = o.agent;
    if (o.episodes)
        spec.schedule.episodes = *o.episodes;
    spec.validate();
    return spec;
}

int report_run(const risamec::RunResult& r)
{
    for (const auto& s : r.seeds) {
        if (s.ok)
            std::cout << "seed " << s.seed << ": " << s.rows.size() << " episodes\n";
        else
            std::cerr << "seed " << s.seed << " failed: " << s.error << '\n';
    }
    return r.exit_code;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"RIS-assisted aerial MEC secrecy energy efficiency experiments"};
    app.require_subcommand(1);

    CommonOptions train_o, eval_o, ablate_o, validate_o, defaults_o;
    auto* train = app.add_subcommand("train", "Train an agent for every seed and write metrics");
    add_common(train, train_o);

    auto* eval = app.add_subcommand("eval", "Evaluate saved checkpoints without exploration noise");
    add_common(eval, eval_o);
    std::string checkpoint;
    eval->add_option("--checkpoint", checkpoint,
                     "Checkpoint file (default <out>/seed_<s>/checkpoint.bin; single seed only)");

    auto* ablate = app.add_subcommand("ablate", "Train DDPG, then evaluate it with the no-RIS and no-trajectory wrappers");
    add_common(ablate, ablate_o);

    auto* cmp = app.add_subcommand("compare", "Compare summary.json files");
    std::vector<std::string> summaries;
    std::string cmp_out = ".";
    cmp->add_option("summaries", summaries, "summary.json files; the first is the reference")
        ->required()
        ->check(CLI::ExistingFile);
    cmp->add_option("--out", cmp_out, "Directory for compare.csv");

    auto* validate = app.add_subcommand("validate-config", "Check a config and print its hashes");
    add_common(validate, validate_o);

    auto* defaults = app.add_subcommand("emit-defaults", "Print the fully resolved default configuration");
    add_common(defaults, defaults_o);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*train)
            return report_run(risamec::run(resolve(train_o)));

        if (*eval) {
            const auto spec = resolve(eval_o);
            if (!checkpoint.empty() && spec.seeds.size() != 1) {
                std::cerr << "--checkpoint needs exactly one seed\n";
                return 2;
            }
            const std::filesystem::path out(spec.output_dir);
            for (auto seed : spec.seeds) {
                const auto seed_dir = "seed_" + std::to_string(seed);
                const auto ckpt = checkpoint.empty() ? (out / seed_dir / "checkpoint.bin").string() : checkpoint;
                const auto s = risamec::evaluate_checkpoint(spec, seed, ckpt, out / "eval" / seed_dir);
                std::cout << "seed " << seed << ": see " << s["evaluation"]["see"] << " energy fraction "
                          << s["evaluation"]["energy_fraction"] << '\n';
            }
            return 0;
        }

        if (*ablate) {
            const auto r = risamec::ablate(resolve(ablate_o));
            report_run(r.full);
            if (r.exit_code != 0)
                return r.exit_code;
            std::cout << r.comparison.text;
            return 0;
        }

        if (*cmp) {
            std::vector<nlohmann::json> loaded;
            for (const auto& p : summaries)
                loaded.push_back(risamec::read_summary(p));
            const auto c = risamec::compare(loaded, summaries);
            std::filesystem::create_directories(cmp_out);
            std::ofstream os(std::filesystem::path(cmp_out) / "compare.csv");
            risamec::write_compare_csv(os, c);
            std::cout << c.text;
            return 0;
        }

        if (*validate) {
            const auto spec = resolve(validate_o);
            std::cout << "ok\nconfig_hash " << risamec::config_hash(spec) << "\nscenario_hash "
                      << risamec::scenario_hash(spec.scenario) << "\nstate_size " << spec.scenario.state_size()
                      << "\naction_size " << spec.scenario.action_size() << '\n';
            return 0;
        }

        if (*defaults) {
            std::cout << nlohmann::json(resolve(defaults_o)).dump(2) << '\n';
            return 0;
        }
    } catch (const risamec::ConfigError& e) {
        std::cerr << e.what() << '\n';
        return 2;
    } catch (const risamec::CompareError& e) {
        std::cerr << e.what() << '\n';
        return 2;
    } catch (const risamec::CheckpointError& e) {
        std::cerr << e.what() << '\n';
        return 2;
    }
    return 0;
}
