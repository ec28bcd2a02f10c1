#pragma once

// Experiment configs, strict config loading, seeded multi-seed runs,
// evaluation, ablation sweeps, and summary comparison.
//
// Output layout of run():
//   <out>/config.json              fully resolved configuration
//   <out>/seed_<s>/episodes.csv    one row per training episode
//   <out>/seed_<s>/eval.csv        one row per evaluation round
//   <out>/seed_<s>/eval_slots.csv  per-slot logs of every evaluation rollout
//   <out>/seed_<s>/summary.json
//   <out>/seed_<s>/checkpoint.bin
//   <out>/aggregate.csv            block means and standard deviations across seeds
//   <out>/summary.json             seed-averaged summary

#include <algorithm>
#include <array>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include "risamec/baselines.hpp"
#include "risamec/checkpoint.hpp"
#include "risamec/stats.hpp"

namespace risamec {

// ---------------------------------------------------------------------------
// JSON mapping

namespace detail {

template <class E, std::size_t N>
void enum_to_json(nlohmann::json& j, E e, const std::array<std::pair<E, const char*>, N>& names)
{
    for (const auto& [v, n] : names)
        if (v == e) {
            j = n;
            return;
        }
    j = nullptr;
}

template <class E, std::size_t N>
void enum_from_json(const nlohmann::json& j, E& e, const std::array<std::pair<E, const char*>, N>& names,
                    const char* what)
{
    if (j.is_string())
        for (const auto& [v, n] : names)
            if (j.get<std::string>() == n) {
                e = v;
                return;
            }
    std::string allowed;
    for (const auto& [v, n] : names)
        allowed += std::string(allowed.empty() ? "" : ", ") + n;
    throw ConfigError({std::string(what) + ": expected one of " + allowed + ", got " + j.dump()});
}

inline constexpr std::array<std::pair<PlacementPolicy, const char*>, 3> kPlacementNames{{
    {PlacementPolicy::UniformPerEpisode, "uniform_per_episode"},
    {PlacementPolicy::UniformFixed, "uniform_fixed"},
    {PlacementPolicy::Fixed, "fixed"},
}};
inline constexpr std::array<std::pair<VerticalPowerMode, const char*>, 2> kVerticalNames{{
    {VerticalPowerMode::ClimbOnly, "climb_only"},
    {VerticalPowerMode::Signed, "signed"},
}};
inline constexpr std::array<std::pair<OptimizerKind, const char*>, 2> kOptimizerNames{{
    {OptimizerKind::Adam, "adam"},
    {OptimizerKind::Sgd, "sgd"},
}};

} // namespace detail

inline void to_json(nlohmann::json& j, PlacementPolicy e) { detail::enum_to_json(j, e, detail::kPlacementNames); }
inline void from_json(const nlohmann::json& j, PlacementPolicy& e)
{
    detail::enum_from_json(j, e, detail::kPlacementNames, "placement.policy");
}
inline void to_json(nlohmann::json& j, VerticalPowerMode e) { detail::enum_to_json(j, e, detail::kVerticalNames); }
inline void from_json(const nlohmann::json& j, VerticalPowerMode& e)
{
    detail::enum_from_json(j, e, detail::kVerticalNames, "power.vertical_mode");
}
inline void to_json(nlohmann::json& j, OptimizerKind e) { detail::enum_to_json(j, e, detail::kOptimizerNames); }
inline void from_json(const nlohmann::json& j, OptimizerKind& e)
{
    detail::enum_from_json(j, e, detail::kOptimizerNames, "optimizer");
}

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(Position3D, x, y, z)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(Placement, policy, layout_seed, ues, eves)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(RisGeometry, position, num_elements, element_spacing)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(RfParams, bandwidth_ue, bandwidth_eve, tx_power_ue, eve_power,
                                                noise_var, noise_var_eve, ref_pathloss, ris_ref_pathloss,
                                                eve_ref_pathloss, carrier_freq)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(LosConstants, env_C, env_B)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(UavPowerParams, blade_power, induced_power, vertical_power,
                                                tip_speed, rotor_induced_velocity, fuselage_drag_ratio,
                                                air_density, rotor_solidity, rotor_disc_area, max_speed,
                                                slot_duration, vertical_mode)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ComputeParams, ue_cpu_rate, amec_cpu_rate, amec_cycle_budget,
                                                switched_capacitance, exponent)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TaskSampling, cycles_per_bit, data_bits_min, data_bits_max,
                                                deadline)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(PenaltyWeights, latency, budget)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ScenarioConfig, area_x, area_y, num_ues, num_eves, episode_slots,
                                                initial_energy, operating_altitude, climb_rate, start_x, start_y,
                                                placement, ris, rf, los, power, compute, tasks, stochastic_los,
                                                binary_offload, ue_mobility, mobility_step, vertical_control,
                                                max_vertical_speed, min_altitude, max_altitude, penalty,
                                                reward_scale)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(NoiseConfig, sigma, decay, floor)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(DdpgConfig, hidden, actor_lr, critic_lr, actor_tau, critic_tau,
                                                discount, batch_size, memory_capacity, warmup, update_every,
                                                hard_target_period, weight_decay, optimizer,
                                                actor_grad_through_target, noise)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(DqlConfig, hidden, learning_rate, tau, discount, batch_size,
                                                memory_capacity, warmup, update_every, weight_decay, optimizer,
                                                epsilon_start, epsilon_end, epsilon_fraction)

// ---------------------------------------------------------------------------
// Experiment config

inline constexpr std::array<const char*, 5> kAgentKinds{"ddpg", "dql", "ablation-no-ris", "ablation-no-traj",
                                                        "oracle-phase"};

struct Schedule {
    int episodes = 120000;
    int eval_every = 0;      // episodes between evaluations; 0 evaluates only after training
    int eval_episodes = 5;   // noise-free rollouts per evaluation
    int checkpoint_every = 0;
    int block_size = 50;     // episodes per aggregate block
};

struct AblationOptions {
    bool random_phases = false;     // no-RIS: one uniform draw per episode instead of zeros
    std::vector<double> hover_point; // no-trajectory: {x, y}; empty means the area centroid
};

struct ExperimentSpec {
    std::string preset = "table1";
    std::string agent = "ddpg";
    ScenarioConfig scenario;
    DdpgConfig ddpg;
    DqlConfig dql;
    Schedule schedule;
    std::vector<std::uint64_t> seeds{1};
    std::uint64_t eval_seed = 1000;
    AblationOptions ablation;
    bool checkpoint_memory = false; // store the replay memory in checkpoints
    std::string output_dir = "runs";

    static ExperimentSpec table1() { return ExperimentSpec{}; }

    /// Laptop-scale preset. The learner settings differ from the full-scale
    /// ones: the UAV starts in a corner, and wider, slower-decaying
    /// exploration is needed for it to leave.
    static ExperimentSpec desk()
    {
        ExperimentSpec s;
        s.preset = "desk";
        s.scenario = ScenarioConfig::desk();
        s.schedule.episodes = 500;
        s.ddpg.noise.sigma = 0.5;
        s.ddpg.noise.decay = 0.995;
        s.ddpg.discount = 0.9;
        s.dql.discount = 0.9;
        s.seeds = {1, 2, 3};
        return s;
    }

    static ExperimentSpec preset_named(const std::string& name)
    {
        if (name == "table1")
            return table1();
        if (name == "desk")
            return desk();
        if (name == "table1-750") {
            auto s = table1();
            s.preset = name;
            s.scenario = ScenarioConfig::table1_750();
            return s;
        }
        throw ConfigError({"unknown preset '" + name + "' (expected table1, table1-750 or desk)"});
    }

    std::vector<std::string> problems() const
    {
        auto bad = scenario.problems();
        auto need = [&bad](bool ok, const std::string& what) {
            if (!ok)
                bad.push_back(what);
        };
        need(std::find(kAgentKinds.begin(), kAgentKinds.end(), agent) != kAgentKinds.end(),
             "agent must be one of ddpg, dql, ablation-no-ris, ablation-no-traj, oracle-phase");
        need(!seeds.empty(), "seeds must not be empty");
        need(!output_dir.empty(), "output_dir must not be empty");
        need(schedule.episodes >= 0, "schedule.episodes must be >= 0");
        need(schedule.eval_every >= 0, "schedule.eval_every must be >= 0");
        need(schedule.eval_episodes >= 0, "schedule.eval_episodes must be >= 0");
        need(schedule.checkpoint_every >= 0, "schedule.checkpoint_every must be >= 0");
        need(schedule.block_size >= 1, "schedule.block_size must be >= 1");
        auto hidden_ok = [](const std::vector<int>& h) {
            return std::all_of(h.begin(), h.end(), [](int n) { return n >= 1; });
        };
        need(hidden_ok(ddpg.hidden), "ddpg.hidden sizes must be >= 1");
        need(ddpg.actor_lr >= 0.0 && ddpg.critic_lr >= 0.0, "ddpg learning rates must be >= 0");
        need(ddpg.actor_tau > 0.0 && ddpg.actor_tau <= 1.0 && ddpg.critic_tau > 0.0 && ddpg.critic_tau <= 1.0,
             "ddpg.actor_tau/critic_tau must lie in (0, 1]");
        need(ddpg.discount >= 0.0 && ddpg.discount <= 1.0, "ddpg.discount must lie in [0, 1]");
        need(ddpg.batch_size >= 1, "ddpg.batch_size must be >= 1");
        need(ddpg.memory_capacity >= static_cast<std::size_t>(std::max(ddpg.batch_size, 1)),
             "ddpg.memory_capacity must be >= batch_size");
        need(ddpg.warmup >= 0 && ddpg.update_every >= 1 && ddpg.hard_target_period >= 0,
             "ddpg.warmup/update_every/hard_target_period out of range");
        need(ddpg.noise.sigma >= 0.0 && ddpg.noise.decay > 0.0 && ddpg.noise.decay <= 1.0 && ddpg.noise.floor >= 0.0,
             "ddpg.noise must have sigma >= 0, decay in (0, 1], floor >= 0");
        need(hidden_ok(dql.hidden), "dql.hidden sizes must be >= 1");
        need(dql.learning_rate >= 0.0, "dql.learning_rate must be >= 0");
        need(dql.tau > 0.0 && dql.tau <= 1.0, "dql.tau must lie in (0, 1]");
        need(dql.discount >= 0.0 && dql.discount <= 1.0, "dql.discount must lie in [0, 1]");
        need(dql.batch_size >= 1, "dql.batch_size must be >= 1");
        need(dql.memory_capacity >= static_cast<std::size_t>(std::max(dql.batch_size, 1)),
             "dql.memory_capacity must be >= batch_size");
        need(dql.warmup >= 0 && dql.update_every >= 1, "dql.warmup/update_every out of range");
        need(dql.epsilon_start >= 0.0 && dql.epsilon_start <= 1.0 && dql.epsilon_end >= 0.0
                 && dql.epsilon_end <= 1.0 && dql.epsilon_fraction >= 0.0,
             "dql epsilon schedule out of range");
        need(ablation.hover_point.empty() || ablation.hover_point.size() == 2,
             "ablation.hover_point must be empty or {x, y}");
        if (ablation.hover_point.size() == 2)
            need(ablation.hover_point[0] >= 0.0 && ablation.hover_point[0] <= scenario.area_x
                     && ablation.hover_point[1] >= 0.0 && ablation.hover_point[1] <= scenario.area_y,
                 "ablation.hover_point must lie inside the area");
        return bad;
    }

    void validate() const
    {
        auto bad = problems();
        if (!bad.empty())
            throw ConfigError(std::move(bad));
    }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(Schedule, episodes, eval_every, eval_episodes, checkpoint_every,
                                                block_size)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(AblationOptions, random_phases, hover_point)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ExperimentSpec, preset, agent, scenario, ddpg, dql, schedule, seeds,
                                                eval_seed, ablation, checkpoint_memory, output_dir)

// ---------------------------------------------------------------------------
// Loading

/// Parses JSON text; syntax errors are reported as source:line:column.
inline nlohmann::json parse_config_text(const std::string& text, const std::string& source = "<config>")
{
    if (std::all_of(text.begin(), text.end(), [](unsigned char c) { return std::isspace(c); }))
        return nlohmann::json::object();
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        std::size_t line = 1, col = 1;
        const std::size_t end = std::min<std::size_t>(e.byte > 0 ? e.byte - 1 : 0, text.size());
        for (std::size_t i = 0; i < end; ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw ConfigError({source + ":" + std::to_string(line) + ":" + std::to_string(col) + ": parse error: "
                           + e.what()});
    }
}

namespace detail {

inline void find_unknown_keys(const nlohmann::json& user, const nlohmann::json& reference, const std::string& path,
                              std::vector<std::string>& bad)
{
    if (!user.is_object() || !reference.is_object())
        return;
    for (const auto& [key, value] : user.items()) {
        const std::string here = path.empty() ? key : path + "." + key;
        if (!reference.contains(key))
            bad.push_back("unknown key '" + here + "'");
        else
            find_unknown_keys(value, reference.at(key), here, bad);
    }
}

} // namespace detail

/// Merges `user` over the chosen preset. The preset comes from `preset_override`,
/// else the "preset" key, else table1. Unknown keys and invalid values are
/// reported together.
inline ExperimentSpec resolve_config(const nlohmann::json& user, std::optional<std::string> preset_override = {})
{
    if (!user.is_object())
        throw ConfigError({"configuration root must be a JSON object"});
    std::string preset = "table1";
    if (preset_override)
        preset = *preset_override;
    else if (user.contains("preset")) {
        if (!user.at("preset").is_string())
            throw ConfigError({"preset must be a string"});
        preset = user.at("preset").get<std::string>();
    }
    const nlohmann::json reference = ExperimentSpec::preset_named(preset);
    std::vector<std::string> bad;
    detail::find_unknown_keys(user, reference, "", bad);
    if (!bad.empty())
        throw ConfigError(std::move(bad));
    nlohmann::json merged = reference;
    merged.update(user, true);
    merged["preset"] = preset;
    ExperimentSpec spec;
    try {
        spec = merged.get<ExperimentSpec>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError({e.what()});
    }
    spec.validate();
    return spec;
}

inline ExperimentSpec load_config(const std::string& path, std::optional<std::string> preset_override = {})
{
    std::ifstream is(path);
    if (!is)
        throw ConfigError({"cannot read config file: " + path});
    std::stringstream ss;
    ss << is.rdbuf();
    return resolve_config(parse_config_text(ss.str(), path), std::move(preset_override));
}

// ---------------------------------------------------------------------------
// Hashes

inline std::string fnv1a_hex(const std::string& s)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// Identifies everything that shapes results except the seed list and the
/// output location.
inline std::string config_hash(const ExperimentSpec& spec)
{
    nlohmann::json j = spec;
    j.erase("seeds");
    j.erase("output_dir");
    return fnv1a_hex(j.dump());
}

inline std::string scenario_hash(const ScenarioConfig& s) { return fnv1a_hex(nlohmann::json(s).dump()); }

inline bool is_ablation(const std::string& kind) { return kind == "ablation-no-ris" || kind == "ablation-no-traj"; }

/// Config hash of the DDPG agent an ablation wraps.
inline std::string wrapped_config_hash(const ExperimentSpec& spec)
{
    auto inner = spec;
    inner.agent = "ddpg";
    return config_hash(inner);
}

inline ScenarioConfig hover_scenario_for(const ExperimentSpec& spec)
{
    if (spec.ablation.hover_point.size() == 2)
        return hover_scenario(spec.scenario, std::pair{spec.ablation.hover_point[0], spec.ablation.hover_point[1]});
    return hover_scenario(spec.scenario);
}

// ---------------------------------------------------------------------------
// Evaluation

inline constexpr const char* kEpisodeCsvHeader =
    "episode,steps,reward_sum,mean_reward,see,energy_fraction,viol_latency,viol_budget,viol_construction,"
    "bookkeeping_residual,config_hash,seed";
inline constexpr const char* kEvalCsvHeader = "after_episode,episodes,see,energy_fraction,reward_sum,config_hash,seed";

inline std::string eval_slot_csv_header() { return std::string("after_episode,") + kSlotCsvHeader; }

struct EpisodeRow {
    int episode = 0;
    int steps = 0;
    double reward_sum = 0.0;
    double mean_reward = 0.0;
    double see = 0.0;
    double energy_fraction = 0.0;
    ConstraintSummary violations;
    double residual = 0.0;
};

inline EpisodeRow episode_row(const EpisodeLog& log, const EpisodeStats& stats)
{
    return {stats.episode,       stats.steps,           stats.reward_sum, stats.mean_reward(), log.see(),
            log.energy_fraction(), constraint_report(log), log.bookkeeping_residual()};
}

inline void write_episode_row(std::ostream& os, const EpisodeRow& r, const std::string& hash, std::uint64_t seed)
{
    char buf[512];
    std::snprintf(buf, sizeof buf, "%d,%d,%.12g,%.12g,%.12g,%.12g,%d,%d,%d,%.6g,", r.episode, r.steps, r.reward_sum,
                  r.mean_reward, r.see, r.energy_fraction, r.violations.latency, r.violations.budget,
                  r.violations.by_construction(), r.residual);
    os << buf << hash << ',' << seed << '\n';
}

struct EvalResult {
    int episodes = 0;
    double see = 0.0;
    double energy_fraction = 0.0;
    double reward_sum = 0.0;
    ConstraintSummary violations;
    double max_residual = 0.0;
    std::vector<EpisodeLog> logs;
};

/// Noise-free rollouts on the shared evaluation seeds episode_seed(eval_seed, k).
inline EvalResult evaluate(const ScenarioConfig& scenario, const Policy& policy, std::uint64_t eval_seed,
                           int episodes)
{
    EvalResult r;
    r.episodes = episodes;
    if (episodes <= 0)
        return r;
    Environment env(scenario);
    for (int k = 0; k < episodes; ++k) {
        auto log = rollout(env, policy, episode_seed(eval_seed, k), k);
        r.see += log.see() / episodes;
        r.energy_fraction += log.energy_fraction() / episodes;
        r.reward_sum += log.reward_sum() / episodes;
        r.violations += constraint_report(log);
        r.max_residual = std::max(r.max_residual, log.bookkeeping_residual());
        r.logs.push_back(std::move(log));
    }
    return r;
}

inline void write_eval_slots(std::ostream& os, const EvalResult& r, int after_episode, const std::string& hash,
                             std::uint64_t seed)
{
    for (const auto& log : r.logs) {
        std::ostringstream rows;
        write_slot_rows(rows, log, hash, seed);
        std::istringstream in(rows.str());
        std::string line;
        while (std::getline(in, line))
            os << after_episode << ',' << line << '\n';
    }
}

inline nlohmann::json violations_json(const ConstraintSummary& v)
{
    return {{"phase", v.phase},   {"velocity", v.velocity}, {"latency", v.latency},
            {"offload", v.offload}, {"budget", v.budget},   {"selection", v.selection}};
}

inline nlohmann::json eval_json(const EvalResult& r)
{
    return {{"episodes", r.episodes}, {"see", r.see}, {"energy_fraction", r.energy_fraction},
            {"reward_sum", r.reward_sum}};
}

// ---------------------------------------------------------------------------
// Runs

struct SeedResult {
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    std::vector<EpisodeRow> rows;
    nlohmann::json summary;
};

struct RunResult {
    std::vector<SeedResult> seeds;
    nlohmann::json summary;
    int exit_code = 0; // 0 success, 3 when every seed failed
};

namespace detail {

inline void save_agent(const std::string& path, DdpgAgent& a, int next, bool mem, const nlohmann::json& extra)
{
    save_checkpoint(path, a, next, mem, extra);
}
inline void save_agent(const std::string& path, DqlAgent& a, int next, bool mem, const nlohmann::json& extra)
{
    save_checkpoint(path, a, next, mem, extra);
}
inline void save_agent(const std::string& path, OraclePhaseAgent& a, int next, bool mem, const nlohmann::json& extra)
{
    save_checkpoint(path, a.inner(), next, mem, extra);
}

inline Policy policy_of(const DdpgAgent& a) { return ddpg_policy(a); }
inline Policy policy_of(const DqlAgent& a) { return dql_policy(a); }
inline Policy policy_of(const OraclePhaseAgent& a) { return oracle_agent_policy(a); }

inline std::ofstream open_out(const std::filesystem::path& p)
{
    std::ofstream os(p, std::ios::binary);
    if (!os)
        throw std::runtime_error("cannot write " + p.string());
    return os;
}

/// Fields shared by per-seed and seed-averaged summaries.
inline nlohmann::json summary_header(const ExperimentSpec& spec)
{
    nlohmann::json s;
    s["agent"] = spec.agent;
    s["preset"] = spec.preset;
    s["config_hash"] = config_hash(spec);
    s["scenario_hash"] = scenario_hash(spec.scenario);
    if (is_ablation(spec.agent))
        s["wrapped_config_hash"] = wrapped_config_hash(spec);
    return s;
}

inline nlohmann::json final_block_json(const std::vector<EpisodeRow>& rows, int block)
{
    const std::size_t n = std::min(rows.size(), static_cast<std::size_t>(block));
    double r = 0.0, see = 0.0, ef = 0.0;
    for (std::size_t i = rows.size() - n; i < rows.size(); ++i) {
        r += rows[i].reward_sum / n;
        see += rows[i].see / n;
        ef += rows[i].energy_fraction / n;
    }
    return {{"episodes", n}, {"reward", r}, {"see", see}, {"energy_fraction", ef}};
}

template <class Agent>
SeedResult train_seed(const ExperimentSpec& spec, Agent& agent, const ScenarioConfig& scenario, std::uint64_t seed,
                      const std::filesystem::path& dir)
{
    const auto t0 = std::chrono::steady_clock::now();
    const std::string hash = config_hash(spec);
    SeedResult out;
    out.seed = seed;
    std::filesystem::create_directories(dir);
    auto episodes = open_out(dir / "episodes.csv");
    auto evals = open_out(dir / "eval.csv");
    auto slots = open_out(dir / "eval_slots.csv");
    episodes << kEpisodeCsvHeader << '\n';
    evals << kEvalCsvHeader << '\n';
    slots << eval_slot_csv_header() << '\n';

    ConstraintSummary violations;
    double max_residual = 0.0;
    EvalResult last_eval;
    auto run_eval = [&](int after) {
        last_eval = evaluate(scenario, policy_of(agent), spec.eval_seed, spec.schedule.eval_episodes);
        violations += last_eval.violations;
        max_residual = std::max(max_residual, last_eval.max_residual);
        char buf[256];
        std::snprintf(buf, sizeof buf, "%d,%d,%.12g,%.12g,%.12g,", after, last_eval.episodes, last_eval.see,
                      last_eval.energy_fraction, last_eval.reward_sum);
        evals << buf << hash << ',' << seed << '\n';
        write_eval_slots(slots, last_eval, after, hash, seed);
    };
    const nlohmann::json extra = {{"agent", spec.agent}, {"config_hash", hash}, {"seed", seed}};
    const auto ckpt = (dir / "checkpoint.bin").string();

    Environment env(scenario);
    const auto report = train_loop(
        env, agent, TrainSchedule{spec.schedule.episodes, spec.schedule.checkpoint_every}, seed, 0,
        [&](const Environment& e, const EpisodeStats& stats) {
            const auto row = episode_row(e.log(), stats);
            violations += row.violations;
            max_residual = std::max(max_residual, row.residual);
            write_episode_row(episodes, row, hash, seed);
            out.rows.push_back(row);
            const int done = stats.episode + 1;
            if (spec.schedule.eval_every > 0 && done % spec.schedule.eval_every == 0
                && done < spec.schedule.episodes)
                run_eval(done);
        },
        [&](int next) { save_agent(ckpt, agent, next, spec.checkpoint_memory, extra); });
    run_eval(report.next_episode);
    save_agent(ckpt, agent, report.next_episode, spec.checkpoint_memory, extra);

    out.ok = !report.diverged;
    out.error = report.error;
    auto& s = out.summary;
    s = summary_header(spec);
    s["seed"] = seed;
    s["episodes_completed"] = report.next_episode;
    s["diverged"] = report.diverged;
    s["error"] = report.error;
    s["final_block"] = final_block_json(out.rows, spec.schedule.block_size);
    s["evaluation"] = eval_json(last_eval);
    s["violations"] = violations_json(violations);
    s["max_bookkeeping_residual"] = max_residual;
    s["wall_time_s"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    open_out(dir / "summary.json") << s.dump(2) << '\n';
    return out;
}

inline SeedResult run_seed(const ExperimentSpec& spec, std::uint64_t seed, const std::filesystem::path& dir)
{
    const auto& sc = spec.scenario;
    if (spec.agent == "dql") {
        DqlAgent agent(sc, spec.dql, seed);
        return train_seed(spec, agent, sc, seed, dir);
    }
    if (spec.agent == "oracle-phase") {
        OraclePhaseAgent agent(sc.state_size(), sc.action_size(), spec.ddpg, seed);
        return train_seed(spec, agent, sc, seed, dir);
    }
    DdpgAgent agent(sc.state_size(), sc.action_size(), spec.ddpg, seed);
    if (spec.agent == "ablation-no-ris") {
        agent.set_override(std::make_shared<NoRisOverride>(sc.num_elements(), spec.ablation.random_phases, seed));
    } else if (spec.agent == "ablation-no-traj") {
        agent.set_override(std::make_shared<NoTrajectoryOverride>(sc.num_elements()));
        return train_seed(spec, agent, hover_scenario_for(spec), seed, dir);
    }
    return train_seed(spec, agent, sc, seed, dir);
}

inline int worker_count(std::size_t jobs)
{
    long n = static_cast<long>(std::thread::hardware_concurrency());
    if (const char* v = std::getenv("RIS_AMEC_THREADS")) {
        char* end = nullptr;
        const long parsed = std::strtol(v, &end, 10);
        if (end != v && parsed > 0)
            n = parsed;
    }
    n = std::max(n, 1L);
    return static_cast<int>(std::min<long>(n, static_cast<long>(jobs)));
}

/// Runs job(i) for i in [0, n) on up to worker_count(n) threads.
template <class Job>
void parallel_for(std::size_t n, Job&& job)
{
    const int workers = worker_count(n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i)
            job(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++)
                job(i);
        });
    for (auto& t : pool)
        t.join();
}

inline std::string seed_dir_name(std::uint64_t seed) { return "seed_" + std::to_string(seed); }

} // namespace detail

/// Block means across seeds: mean and sample standard deviation of each seed's
/// block-mean episode reward, SEE, and energy fraction.
inline void write_aggregate(std::ostream& os, const std::vector<SeedResult>& seeds, int block,
                            const std::string& hash)
{
    os << "block,first_episode,last_episode,seeds,reward_mean,reward_std,see_mean,see_std,energy_fraction_mean,"
          "energy_fraction_std,config_hash\n";
    std::size_t longest = 0;
    for (const auto& s : seeds)
        longest = std::max(longest, s.rows.size());
    const auto b = static_cast<std::size_t>(block);
    for (std::size_t start = 0; start < longest; start += b) {
        std::vector<double> reward, see, ef;
        for (const auto& s : seeds) {
            if (s.rows.size() <= start)
                continue;
            const std::size_t end = std::min(start + b, s.rows.size());
            double r = 0.0, e = 0.0, f = 0.0;
            for (std::size_t i = start; i < end; ++i) {
                r += s.rows[i].reward_sum;
                e += s.rows[i].see;
                f += s.rows[i].energy_fraction;
            }
            const double n = static_cast<double>(end - start);
            reward.push_back(r / n);
            see.push_back(e / n);
            ef.push_back(f / n);
        }
        char buf[512];
        std::snprintf(buf, sizeof buf, "%zu,%zu,%zu,%zu,%.12g,%.12g,%.12g,%.12g,%.12g,%.12g,", start / b, start,
                      std::min(start + b, longest) - 1, reward.size(), stats::mean(reward), stats::stddev(reward),
                      stats::mean(see), stats::stddev(see), stats::mean(ef), stats::stddev(ef));
        os << buf << hash << '\n';
    }
}

/// Averages numeric summary fields over the given per-seed summaries.
inline nlohmann::json average_summaries(nlohmann::json header, const std::vector<nlohmann::json>& per_seed)
{
    auto avg = [&](const char* group, const char* key) {
        double s = 0.0;
        int n = 0;
        for (const auto& p : per_seed)
            if (p.contains(group)) {
                s += p.at(group).at(key).get<double>();
                ++n;
            }
        return n > 0 ? s / n : 0.0;
    };
    nlohmann::json seeds = nlohmann::json::array();
    for (const auto& p : per_seed)
        seeds.push_back(p.at("seed"));
    header["seed"] = nullptr;
    header["seeds"] = seeds;
    for (const char* group : {"final_block", "evaluation"}) {
        if (per_seed.empty() || !per_seed.front().contains(group))
            continue;
        nlohmann::json g;
        for (const auto& [k, v] : per_seed.front().at(group).items())
            g[k] = avg(group, k.c_str());
        header[group] = g;
    }
    ConstraintSummary v;
    double residual = 0.0;
    for (const auto& p : per_seed) {
        if (!p.contains("violations"))
            continue;
        const auto& j = p.at("violations");
        v.phase += j.at("phase").get<int>();
        v.velocity += j.at("velocity").get<int>();
        v.latency += j.at("latency").get<int>();
        v.offload += j.at("offload").get<int>();
        v.budget += j.at("budget").get<int>();
        v.selection += j.at("selection").get<int>();
        residual = std::max(residual, p.value("max_bookkeeping_residual", 0.0));
    }
    header["violations"] = violations_json(v);
    header["max_bookkeeping_residual"] = residual;
    header["per_seed"] = per_seed;
    return header;
}

/// Trains spec.agent for every seed and writes the artifacts listed at the top
/// of this file.
inline RunResult run(const ExperimentSpec& spec)
{
    spec.validate();
    const std::filesystem::path out(spec.output_dir);
    std::filesystem::create_directories(out);
    detail::open_out(out / "config.json") << nlohmann::json(spec).dump(2) << '\n';

    RunResult result;
    result.seeds.resize(spec.seeds.size());
    detail::parallel_for(spec.seeds.size(), [&](std::size_t i) {
        const auto seed = spec.seeds[i];
        try {
            result.seeds[i] = detail::run_seed(spec, seed, out / detail::seed_dir_name(seed));
        } catch (const std::exception& e) {
            result.seeds[i].seed = seed;
            result.seeds[i].ok = false;
            result.seeds[i].error = e.what();
        }
    });

    const std::string hash = config_hash(spec);
    {
        auto os = detail::open_out(out / "aggregate.csv");
        write_aggregate(os, result.seeds, spec.schedule.block_size, hash);
    }
    std::vector<nlohmann::json> per_seed;
    int failures = 0;
    for (const auto& s : result.seeds) {
        if (!s.ok)
            ++failures;
        if (!s.summary.is_null())
            per_seed.push_back(s.summary);
    }
    result.summary = average_summaries(detail::summary_header(spec), per_seed);
    nlohmann::json errors = nlohmann::json::array();
    for (const auto& s : result.seeds)
        if (!s.ok)
            errors.push_back({{"seed", s.seed}, {"error", s.error}});
    result.summary["failed_seeds"] = errors;
    detail::open_out(out / "summary.json") << result.summary.dump(2) << '\n';
    result.exit_code = failures == static_cast<int>(result.seeds.size()) ? 3 : 0;
    return result;
}

// ---------------------------------------------------------------------------
// Evaluation of saved agents

/// Loads the agent stored at `checkpoint`, evaluates it on the shared
/// evaluation seeds, and writes eval_slots.csv and summary.json into `out_dir`.
inline nlohmann::json evaluate_checkpoint(const ExperimentSpec& spec, std::uint64_t seed, const std::string& checkpoint,
                                          const std::filesystem::path& out_dir)
{
    const auto& sc = spec.scenario;
    Policy policy;
    std::shared_ptr<DdpgAgent> ddpg;
    std::shared_ptr<DqlAgent> dql;
    ScenarioConfig scenario = sc;
    if (spec.agent == "dql") {
        dql = std::make_shared<DqlAgent>(sc, spec.dql, seed);
        load_checkpoint(checkpoint, *dql);
        policy = [dql](std::span<const double> s, const Environment& env) { return dql->policy(s, env); };
    } else {
        ddpg = std::make_shared<DdpgAgent>(sc.state_size(), sc.action_size(), spec.ddpg, seed);
        load_checkpoint(checkpoint, *ddpg);
        policy = [ddpg](std::span<const double> s, const Environment&) { return ddpg->policy(s); };
        if (spec.agent == "oracle-phase")
            policy = oracle_phase_policy(policy);
        else if (spec.agent == "ablation-no-ris")
            policy = with_override(policy, std::make_shared<NoRisOverride>(sc.num_elements(),
                                                                           spec.ablation.random_phases, seed));
        else if (spec.agent == "ablation-no-traj") {
            policy = with_override(policy, std::make_shared<NoTrajectoryOverride>(sc.num_elements()));
            scenario = hover_scenario_for(spec);
        }
    }
    const auto r = evaluate(scenario, policy, spec.eval_seed, spec.schedule.eval_episodes);
    const std::string hash = config_hash(spec);
    std::filesystem::create_directories(out_dir);
    {
        auto os = detail::open_out(out_dir / "eval_slots.csv");
        os << eval_slot_csv_header() << '\n';
        write_eval_slots(os, r, -1, hash, seed);
    }
    auto s = detail::summary_header(spec);
    s["seed"] = seed;
    s["checkpoint"] = checkpoint;
    s["evaluation"] = eval_json(r);
    s["violations"] = violations_json(r.violations);
    s["max_bookkeeping_residual"] = r.max_residual;
    detail::open_out(out_dir / "summary.json") << s.dump(2) << '\n';
    return s;
}

// ---------------------------------------------------------------------------
// Comparison

class CompareError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct CompareRow {
    std::string label;
    std::string agent;
    std::string scenario_hash;
    std::optional<double> see_eval, energy_eval, see_final, energy_final;
};

struct Comparison {
    std::vector<CompareRow> rows;
    std::vector<std::string> verdicts;
    std::string text;
};

namespace detail {

inline std::optional<double> field(const nlohmann::json& s, const char* group, const char* key)
{
    if (!s.contains(group) || !s.at(group).is_object() || !s.at(group).contains(key))
        return std::nullopt;
    return s.at(group).at(key).get<double>();
}

inline std::string fmt(std::optional<double> v)
{
    if (!v)
        return "";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", *v);
    return buf;
}

inline std::string delta(std::optional<double> a, std::optional<double> ref)
{
    if (!a || !ref)
        return "";
    return fmt(*a - *ref);
}

inline const CompareRow* find_kind(const std::vector<CompareRow>& rows, const std::string& kind)
{
    for (const auto& r : rows)
        if (r.agent == kind)
            return &r;
    return nullptr;
}

inline std::string yes_no(bool b) { return b ? "yes" : "no"; }

} // namespace detail

/// Side-by-side table of summaries; the first one is the delta reference.
inline Comparison compare(const std::vector<nlohmann::json>& summaries, const std::vector<std::string>& labels)
{
    if (summaries.empty())
        throw CompareError("nothing to compare");
    Comparison c;
    for (std::size_t i = 0; i < summaries.size(); ++i) {
        const auto& s = summaries[i];
        CompareRow r;
        r.label = i < labels.size() ? labels[i] : "summary_" + std::to_string(i);
        r.agent = s.value("agent", "");
        r.scenario_hash = s.value("scenario_hash", "");
        r.see_eval = detail::field(s, "evaluation", "see");
        r.energy_eval = detail::field(s, "evaluation", "energy_fraction");
        r.see_final = detail::field(s, "final_block", "see");
        r.energy_final = detail::field(s, "final_block", "energy_fraction");
        c.rows.push_back(r);
    }
    for (const auto& r : c.rows)
        if (r.scenario_hash != c.rows.front().scenario_hash)
            throw CompareError("refusing to compare: scenario hash of '" + r.label + "' (" + r.scenario_hash
                               + ") differs from '" + c.rows.front().label + "' (" + c.rows.front().scenario_hash
                               + ")");

    const auto* full = detail::find_kind(c.rows, "ddpg");
    const auto* no_ris = detail::find_kind(c.rows, "ablation-no-ris");
    const auto* no_traj = detail::find_kind(c.rows, "ablation-no-traj");
    const auto* dql = detail::find_kind(c.rows, "dql");
    auto ge = [](std::optional<double> a, std::optional<double> b) { return a && b && *a >= *b; };
    if (full && no_ris && no_traj) {
        c.verdicts.push_back("energy fraction: full >= no-RIS: " + detail::yes_no(ge(full->energy_eval, no_ris->energy_eval))
                             + ", full >= no-traj: " + detail::yes_no(ge(full->energy_eval, no_traj->energy_eval))
                             + ", no-RIS >= no-traj: "
                             + detail::yes_no(ge(no_ris->energy_eval, no_traj->energy_eval)));
        c.verdicts.push_back("SEE: full >= no-RIS: " + detail::yes_no(ge(full->see_eval, no_ris->see_eval))
                             + ", full >= no-traj: " + detail::yes_no(ge(full->see_eval, no_traj->see_eval))
                             + ", no-RIS >= no-traj: " + detail::yes_no(ge(no_ris->see_eval, no_traj->see_eval)));
    }
    if (full && dql)
        c.verdicts.push_back("final-block SEE: ddpg >= dql: " + detail::yes_no(ge(full->see_final, dql->see_final)));

    std::ostringstream t;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-24s %-18s %14s %14s %14s %14s\n", "label", "agent", "see_eval", "energy_eval",
                  "see_final", "energy_final");
    t << buf;
    for (const auto& r : c.rows) {
        std::snprintf(buf, sizeof buf, "%-24s %-18s %14s %14s %14s %14s\n", r.label.c_str(), r.agent.c_str(),
                      detail::fmt(r.see_eval).c_str(), detail::fmt(r.energy_eval).c_str(),
                      detail::fmt(r.see_final).c_str(), detail::fmt(r.energy_final).c_str());
        t << buf;
    }
    for (const auto& v : c.verdicts)
        t << v << '\n';
    c.text = t.str();
    return c;
}

inline void write_compare_csv(std::ostream& os, const Comparison& c)
{
    os << "label,agent,see_eval,energy_fraction_eval,see_final_block,energy_fraction_final_block,delta_see_eval,"
          "delta_energy_fraction_eval,delta_see_final_block,delta_energy_fraction_final_block,scenario_hash\n";
    const auto& ref = c.rows.front();
    for (const auto& r : c.rows)
        os << r.label << ',' << r.agent << ',' << detail::fmt(r.see_eval) << ',' << detail::fmt(r.energy_eval) << ','
           << detail::fmt(r.see_final) << ',' << detail::fmt(r.energy_final) << ','
           << detail::delta(r.see_eval, ref.see_eval) << ',' << detail::delta(r.energy_eval, ref.energy_eval) << ','
           << detail::delta(r.see_final, ref.see_final) << ',' << detail::delta(r.energy_final, ref.energy_final)
           << ',' << r.scenario_hash << '\n';
}

inline nlohmann::json read_summary(const std::string& path)
{
    std::ifstream is(path);
    if (!is)
        throw CompareError("cannot read summary: " + path);
    try {
        return nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e) {
        throw CompareError("malformed summary " + path + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Ablation sweep

struct AblationResult {
    RunResult full;
    Comparison comparison;
    int exit_code = 0;
};

/// Trains the full DDPG agent per seed under <out>/full, evaluates it with the
/// no-RIS and no-trajectory wrappers on the same evaluation seeds, and writes
/// <out>/<kind>/..., <out>/compare.csv and <out>/compare.txt.
inline AblationResult ablate(ExperimentSpec spec)
{
    spec.agent = "ddpg";
    const std::filesystem::path out(spec.output_dir);
    auto full_spec = spec;
    full_spec.output_dir = (out / "full").string();
    AblationResult res;
    res.full = run(full_spec);
    if (res.full.exit_code != 0) {
        res.exit_code = res.full.exit_code;
        return res;
    }
    std::vector<nlohmann::json> tops{res.full.summary};
    std::vector<std::string> labels{"full"};
    for (const char* kind : {"ablation-no-ris", "ablation-no-traj"}) {
        auto k = spec;
        k.agent = kind;
        const auto dir = out / kind;
        std::vector<nlohmann::json> per_seed;
        for (const auto& s : res.full.seeds) {
            if (!s.ok)
                continue;
            const auto ckpt = (out / "full" / detail::seed_dir_name(s.seed) / "checkpoint.bin").string();
            per_seed.push_back(evaluate_checkpoint(k, s.seed, ckpt, dir / detail::seed_dir_name(s.seed)));
        }
        auto top = average_summaries(detail::summary_header(k), per_seed);
        detail::open_out(dir / "summary.json") << top.dump(2) << '\n';
        tops.push_back(top);
        labels.emplace_back(kind);
    }
    res.comparison = compare(tops, labels);
    auto os = detail::open_out(out / "compare.csv");
    write_compare_csv(os, res.comparison);
    detail::open_out(out / "compare.txt") << res.comparison.text;
    return res;
}

} // namespace risamec
