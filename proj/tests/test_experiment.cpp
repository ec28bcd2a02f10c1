#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "risamec/experiment.hpp"

using namespace risamec;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p)
{
    std::ifstream is(p, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

std::string first_line(const fs::path& p)
{
    std::ifstream is(p);
    std::string line;
    std::getline(is, line);
    return line;
}

std::string golden(const std::string& name) { return first_line(fs::path(RISAMEC_GOLDEN_DIR) / (name + ".header")); }

fs::path scratch(const std::string& name)
{
    const auto p = fs::temp_directory_path() / ("risamec_test_" + name);
    fs::remove_all(p);
    return p;
}

ExperimentSpec tiny(const fs::path& out)
{
    auto spec = ExperimentSpec::desk();
    spec.scenario.episode_slots = 10;
    spec.schedule.episodes = 3;
    spec.schedule.eval_every = 2;
    spec.schedule.eval_episodes = 1;
    spec.schedule.block_size = 2;
    spec.seeds = {1, 2};
    spec.output_dir = out.string();
    return spec;
}

} // namespace

TEST(LoadConfig, EmptyConfigIsTableOne)
{
    const auto spec = resolve_config(parse_config_text("   \n"));
    EXPECT_EQ(spec.ddpg.memory_capacity, 1000000u);
    EXPECT_EQ(spec.ddpg.batch_size, 64);
    EXPECT_EQ(spec.ddpg.actor_tau, 1e-3);
    EXPECT_EQ(spec.ddpg.critic_tau, 1e-3);
    EXPECT_EQ(spec.ddpg.actor_lr, 1e-3);
    EXPECT_EQ(spec.ddpg.hidden, (std::vector<int>{80, 40}));
    EXPECT_EQ(spec.scenario.num_elements(), 64);
    EXPECT_EQ(spec.scenario.num_ues, 6);
    EXPECT_EQ(spec.scenario.num_eves, 3);
    EXPECT_EQ(spec.scenario.episode_slots, 200);
    EXPECT_EQ(spec.scenario.initial_energy, 140e3);
    EXPECT_EQ(spec.schedule.episodes, 120000);
    EXPECT_EQ(spec.scenario.power.blade_power, 79.4);
    EXPECT_EQ(spec.scenario.power.induced_power, 89.4);
    EXPECT_EQ(spec.scenario.power.vertical_power, 11.46);
    EXPECT_EQ(config_hash(spec), config_hash(ExperimentSpec::table1()));
}

TEST(LoadConfig, ElementOverrideChangesStateLength)
{
    const auto spec = resolve_config(parse_config_text(R"({"scenario": {"ris": {"num_elements": 32}}})"));
    EXPECT_EQ(spec.scenario.state_size(), 72);
    EXPECT_EQ(spec.scenario.action_size(), 68);
    EXPECT_EQ(spec.scenario.num_ues, 6);
}

TEST(LoadConfig, MisspelledKeyIsNamed)
{
    try {
        resolve_config(parse_config_text(R"({"scenario": {"num_elemnts": 32}})"));
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("num_elemnts"), std::string::npos) << e.what();
    }
}

TEST(LoadConfig, SyntaxErrorCarriesLine)
{
    try {
        parse_config_text("{\n  \"agent\": \"ddpg\",\n  oops\n}", "bad.json");
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("bad.json:3"), std::string::npos) << e.what();
    }
}

TEST(LoadConfig, ValidationListsFields)
{
    try {
        resolve_config(parse_config_text(R"({"seeds": [], "scenario": {"num_ues": 0}})"));
        FAIL() << "expected ConfigError";
    } catch (const ConfigError& e) {
        EXPECT_GE(e.problems().size(), 2u);
    }
    EXPECT_THROW(resolve_config(parse_config_text(R"({"agent": "ppo"})")), ConfigError);
    EXPECT_THROW(resolve_config(parse_config_text(R"({"scenario": {"num_ues": "six"}})")), ConfigError);
    EXPECT_THROW(resolve_config(parse_config_text(R"({"scenario": {"placement": {"policy": "grid"}}})")), ConfigError);
}

TEST(LoadConfig, PresetsAndOverrides)
{
    const auto desk = resolve_config(parse_config_text(R"({"preset": "desk", "seeds": [7]})"));
    EXPECT_EQ(desk.scenario.num_elements(), 8);
    EXPECT_EQ(desk.scenario.num_ues, 2);
    EXPECT_EQ(desk.scenario.num_eves, 1);
    EXPECT_EQ(desk.scenario.episode_slots, 100);
    EXPECT_EQ(desk.schedule.episodes, 500);
    EXPECT_EQ(desk.seeds, (std::vector<std::uint64_t>{7}));
    const auto long_episodes = resolve_config(nlohmann::json::object(), "table1-750");
    EXPECT_EQ(long_episodes.scenario.episode_slots, 750);
    EXPECT_THROW(resolve_config(nlohmann::json::object(), "huge"), ConfigError);
}

TEST(LoadConfig, RoundTripsThroughJson)
{
    const auto spec = ExperimentSpec::desk();
    const auto again = resolve_config(nlohmann::json(spec));
    EXPECT_EQ(nlohmann::json(again), nlohmann::json(spec));
    EXPECT_EQ(config_hash(again), config_hash(spec));
}

TEST(LoadConfig, FileLoading)
{
    const auto dir = scratch("load");
    fs::create_directories(dir);
    std::ofstream(dir / "c.json") << R"({"preset": "desk", "schedule": {"episodes": 4}})";
    const auto spec = load_config((dir / "c.json").string());
    EXPECT_EQ(spec.schedule.episodes, 4);
    EXPECT_EQ(spec.scenario.num_elements(), 8);
    EXPECT_THROW(load_config((dir / "missing.json").string()), ConfigError);
    fs::remove_all(dir);
}

TEST(Hashes, SeedsAndOutputDoNotChangeConfigHash)
{
    auto a = ExperimentSpec::desk();
    auto b = a;
    b.seeds = {9};
    b.output_dir = "elsewhere";
    EXPECT_EQ(config_hash(a), config_hash(b));
    b.scenario.num_ues = 3;
    EXPECT_NE(config_hash(a), config_hash(b));
    EXPECT_NE(scenario_hash(a.scenario), scenario_hash(b.scenario));
    EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
}

TEST(Run, ZeroEpisodesGivesEmptyMetrics)
{
    const auto out = scratch("zero");
    auto spec = tiny(out);
    spec.schedule.episodes = 0;
    spec.schedule.eval_episodes = 0;
    spec.seeds = {1};
    const auto r = run(spec);
    EXPECT_EQ(r.exit_code, 0);
    const auto seed_dir = out / "seed_1";
    EXPECT_EQ(slurp(seed_dir / "episodes.csv"), golden("episodes.csv") + "\n");
    EXPECT_TRUE(fs::exists(seed_dir / "summary.json"));
    EXPECT_TRUE(fs::exists(seed_dir / "checkpoint.bin"));
    EXPECT_TRUE(fs::exists(out / "aggregate.csv"));
    const auto s = read_summary((seed_dir / "summary.json").string());
    EXPECT_EQ(s.at("episodes_completed").get<int>(), 0);
    EXPECT_EQ(s.at("config_hash").get<std::string>(), config_hash(spec));
    fs::remove_all(out);
}

TEST(Run, ArtifactsCarryHashAndSeed)
{
    const auto out = scratch("artifacts");
    const auto spec = tiny(out);
    const auto r = run(spec);
    ASSERT_EQ(r.exit_code, 0);
    const auto hash = config_hash(spec);
    for (std::uint64_t seed : spec.seeds) {
        const auto dir = out / ("seed_" + std::to_string(seed));
        for (const char* f : {"episodes.csv", "eval.csv", "eval_slots.csv"}) {
            std::ifstream is(dir / f);
            std::string line;
            std::getline(is, line);
            int rows = 0;
            while (std::getline(is, line)) {
                ++rows;
                EXPECT_NE(line.find("," + hash + "," + std::to_string(seed)), std::string::npos) << f << ": " << line;
            }
            EXPECT_GT(rows, 0) << f;
        }
        const auto s = read_summary((dir / "summary.json").string());
        EXPECT_EQ(s.at("seed").get<std::uint64_t>(), seed);
        EXPECT_EQ(s.at("episodes_completed").get<int>(), 3);
        EXPECT_EQ(s.at("violations").at("velocity").get<int>(), 0);
        EXPECT_LT(s.at("max_bookkeeping_residual").get<double>(), 1e-9);
    }
    const auto top = read_summary((out / "summary.json").string());
    EXPECT_EQ(top.at("seeds").size(), 2u);
    EXPECT_EQ(top.at("config_hash").get<std::string>(), hash);
    EXPECT_TRUE(fs::exists(out / "config.json"));
    EXPECT_EQ(resolve_config(nlohmann::json::parse(slurp(out / "config.json"))).seeds, spec.seeds);
    fs::remove_all(out);
}

TEST(Run, SameSpecSameCsvBytes)
{
    const auto a = scratch("det_a");
    const auto b = scratch("det_b");
    run(tiny(a));
    run(tiny(b));
    for (const char* f : {"seed_1/episodes.csv", "seed_2/eval_slots.csv", "seed_1/eval.csv", "aggregate.csv"})
        EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST(Run, EveryAgentKindRuns)
{
    for (const char* kind : {"dql", "oracle-phase", "ablation-no-ris", "ablation-no-traj"}) {
        const auto out = scratch(std::string("kind_") + kind);
        auto spec = tiny(out);
        spec.agent = kind;
        spec.seeds = {1};
        const auto r = run(spec);
        EXPECT_EQ(r.exit_code, 0) << kind;
        const auto s = read_summary((out / "seed_1" / "summary.json").string());
        EXPECT_EQ(s.at("agent").get<std::string>(), kind);
        fs::remove_all(out);
    }
}

TEST(Run, AblationSummaryCarriesWrappedHash)
{
    const auto out = scratch("ablation_tag");
    auto spec = tiny(out);
    spec.agent = "ablation-no-ris";
    spec.seeds = {1};
    run(spec);
    const auto s = read_summary((out / "summary.json").string());
    EXPECT_EQ(s.at("agent").get<std::string>(), "ablation-no-ris");
    auto wrapped = spec;
    wrapped.agent = "ddpg";
    EXPECT_EQ(s.at("wrapped_config_hash").get<std::string>(), config_hash(wrapped));
    EXPECT_NE(s.at("wrapped_config_hash").get<std::string>(), s.at("config_hash").get<std::string>());
    fs::remove_all(out);
}

TEST(Run, AllSeedsFailingGivesExitThree)
{
    const auto out = scratch("fail");
    auto spec = tiny(out);
    spec.seeds = {1};
    spec.ddpg.warmup = 8;
    spec.ddpg.batch_size = 8;
    spec.scenario.rf.ref_pathloss = std::numeric_limits<double>::infinity();
    const auto r = run(spec);
    EXPECT_EQ(r.exit_code, 3);
    EXPECT_EQ(read_summary((out / "summary.json").string()).at("failed_seeds").size(), 1u);
    fs::remove_all(out);
}

TEST(Run, ResumedEvaluationMatchesTrainingEvaluation)
{
    const auto out = scratch("eval_ckpt");
    auto spec = tiny(out);
    spec.seeds = {2};
    run(spec);
    const auto train_summary = read_summary((out / "seed_2" / "summary.json").string());
    const auto s = evaluate_checkpoint(spec, 2, (out / "seed_2" / "checkpoint.bin").string(), out / "eval");
    EXPECT_EQ(s.at("evaluation").at("see").get<double>(), train_summary.at("evaluation").at("see").get<double>());
    EXPECT_THROW(evaluate_checkpoint(spec, 2, (out / "nope.bin").string(), out / "eval2"), CheckpointError);
    fs::remove_all(out);
}

TEST(GoldenHeaders, CsvSchemas)
{
    EXPECT_EQ(kEpisodeCsvHeader, golden("episodes.csv"));
    EXPECT_EQ(kEvalCsvHeader, golden("eval.csv"));
    EXPECT_EQ(eval_slot_csv_header(), golden("eval_slots.csv"));
    std::ostringstream agg;
    write_aggregate(agg, {}, 50, "h");
    EXPECT_EQ(agg.str(), golden("aggregate.csv") + "\n");
    std::ostringstream cmp;
    nlohmann::json s = {{"agent", "ddpg"}, {"scenario_hash", "x"}};
    write_compare_csv(cmp, compare({s}, {"a"}));
    EXPECT_EQ(cmp.str().substr(0, cmp.str().find('\n')), golden("compare.csv"));
}

namespace {

nlohmann::json fake_summary(const std::string& agent, double see, double ef, const std::string& scenario = "abc")
{
    return {{"agent", agent},
            {"scenario_hash", scenario},
            {"evaluation", {{"see", see}, {"energy_fraction", ef}}},
            {"final_block", {{"see", see}, {"energy_fraction", ef}}}};
}

} // namespace

TEST(Compare, IdenticalSummariesHaveZeroDeltas)
{
    const auto s = fake_summary("ddpg", 1.5, 0.9);
    const auto c = compare({s, s}, {"a", "b"});
    std::ostringstream os;
    write_compare_csv(os, c);
    std::istringstream in(os.str());
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        std::vector<std::string> cells;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ','))
            cells.push_back(cell);
        ASSERT_EQ(cells.size(), 11u);
        for (std::size_t i = 6; i < 10; ++i)
            EXPECT_EQ(cells[i], "0");
    }
}

TEST(Compare, MismatchedScenarioIsRefused)
{
    EXPECT_THROW(compare({fake_summary("ddpg", 1, 1, "a"), fake_summary("dql", 1, 1, "b")}, {"x", "y"}),
                 CompareError);
    EXPECT_THROW(compare({}, {}), CompareError);
}

TEST(Compare, AblationOrderingVerdict)
{
    const auto c = compare({fake_summary("ddpg", 3, 0.65), fake_summary("ablation-no-ris", 2, 0.55),
                            fake_summary("ablation-no-traj", 1, 0.5)},
                           {"full", "no-ris", "no-traj"});
    ASSERT_EQ(c.verdicts.size(), 2u);
    EXPECT_EQ(c.verdicts[0], "energy fraction: full >= no-RIS: yes, full >= no-traj: yes, no-RIS >= no-traj: yes");
    EXPECT_EQ(c.verdicts[1], "SEE: full >= no-RIS: yes, full >= no-traj: yes, no-RIS >= no-traj: yes");
    const auto d = compare({fake_summary("ddpg", 1, 0.5), fake_summary("dql", 2, 0.5)}, {"ddpg", "dql"});
    ASSERT_EQ(d.verdicts.size(), 1u);
    EXPECT_EQ(d.verdicts[0], "final-block SEE: ddpg >= dql: no");
}

TEST(Compare, UnreadableSummary)
{
    EXPECT_THROW(read_summary("/nonexistent/summary.json"), CompareError);
}

TEST(Workers, EnvironmentCapsThreads)
{
    ::setenv("RIS_AMEC_THREADS", "1", 1);
    EXPECT_EQ(detail::worker_count(8), 1);
    ::setenv("RIS_AMEC_THREADS", "3", 1);
    EXPECT_EQ(detail::worker_count(8), 3);
    EXPECT_EQ(detail::worker_count(2), 2);
    ::unsetenv("RIS_AMEC_THREADS");
    EXPECT_GE(detail::worker_count(8), 1);
}
