#pragma once

// Comparison agents: deep Q-learning over a discretized control table,
// ablation overrides for the DDPG actor, and the analytic phase policy.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <type_traits>
#include <utility>
#include <vector>

#include "risamec/ddpg.hpp"
#include "risamec/env.hpp"

namespace risamec {

/// Noise-free decision rule used during evaluation rollouts.
using Policy = std::function<std::vector<double>(std::span<const double> state, const Environment& env)>;

struct DiscreteAction {
    double speed = 0.0;
    int heading = 0; // 0..7 compass sectors (multiples of pi/4), 8 = stay
    double alpha = 0.0;
    int ue = 0;
    bool aligned_phases = false; // oracle-aligned for the selected UE, else all zero
};

class DiscreteActionTable {
public:
    static constexpr int kHeadings = 9;

    DiscreteActionTable() = default;
    explicit DiscreteActionTable(const ScenarioConfig& cfg) : num_ues_(cfg.num_ues)
    {
        const double vmax = cfg.power.max_speed;
        for (double speed : {0.0, 0.5 * vmax, vmax})
            for (int h = 0; h < kHeadings; ++h)
                for (double alpha : {0.0, 0.5, 1.0})
                    for (int k = 0; k < cfg.num_ues; ++k)
                        for (bool aligned : {true, false})
                            entries_.push_back({h == kHeadings - 1 ? 0.0 : speed, h, alpha, k, aligned});
    }

    std::size_t size() const { return entries_.size(); }
    const DiscreteAction& operator[](std::size_t i) const { return entries_[i]; }

    /// Raw MdpAction for entry i in the current world state.
    std::vector<double> to_action(std::size_t i, const Environment& env) const
    {
        const auto& cfg = env.config();
        const auto& e = entries_.at(i);
        std::vector<double> raw(static_cast<std::size_t>(cfg.action_size()), 0.0);
        const double heading = e.heading == kHeadings - 1 ? 0.0 : e.heading * kPi / 4.0;
        write_controls(raw, cfg, e.speed, heading, e.alpha, e.ue);
        if (e.aligned_phases) {
            const auto c = decode_action(raw, cfg);
            const auto next = env.next_position(c);
            write_phases(raw, phase_alignment_oracle(env.world().ues[static_cast<std::size_t>(e.ue)], cfg.ris,
                                                     next, cfg.rf));
        } else {
            write_phases(raw, std::vector<double>(static_cast<std::size_t>(cfg.num_elements()), 0.0));
        }
        return raw;
    }

private:
    int num_ues_ = 0;
    std::vector<DiscreteAction> entries_;
};

struct DqlConfig {
    std::vector<int> hidden{80, 40};
    double learning_rate = 1e-3;
    double tau = 1e-3;
    double discount = 0.99;
    int batch_size = 64;
    std::size_t memory_capacity = 1000000;
    int warmup = 1000;
    int update_every = 1;
    double weight_decay = 0.0;
    OptimizerKind optimizer = OptimizerKind::Adam;
    double epsilon_start = 1.0;
    double epsilon_end = 0.05;
    double epsilon_fraction = 0.3; // of the scheduled episodes
};

/// Linear epsilon decay over the first `fraction` of training.
inline double epsilon_at(int episode, int total_episodes, const DqlConfig& cfg)
{
    const double span = cfg.epsilon_fraction * total_episodes;
    if (span <= 0.0)
        return cfg.epsilon_end;
    const double t = std::min(episode / span, 1.0);
    return cfg.epsilon_start + t * (cfg.epsilon_end - cfg.epsilon_start);
}

class DqlAgent {
public:
    static constexpr const char* kind = "dql";

    DqlAgent() = default;
    DqlAgent(const ScenarioConfig& scenario, DqlConfig cfg, std::uint64_t seed)
        : cfg_(std::move(cfg)), table_(scenario), rng_(seed),
          memory_(cfg_.memory_capacity, static_cast<std::size_t>(scenario.state_size()), 1)
    {
        std::vector<int> sizes{scenario.state_size()};
        sizes.insert(sizes.end(), cfg_.hidden.begin(), cfg_.hidden.end());
        sizes.push_back(static_cast<int>(table_.size()));
        q_ = Mlp(sizes, OutputActivation::Identity);
        q_.init_uniform(rng_);
        target_ = q_;
        opt_ = Optimizer({cfg_.optimizer, cfg_.learning_rate, 0.9, 0.999, 1e-8, cfg_.weight_decay}, q_.num_params());
        epsilon_ = cfg_.epsilon_start;
    }

    /// Agent over a fixed list of raw actions, for environments without a
    /// control table (the toy environment).
    DqlAgent(int state_dim, std::vector<std::vector<double>> actions, DqlConfig cfg, std::uint64_t seed)
        : cfg_(std::move(cfg)), fixed_(std::move(actions)), rng_(seed),
          memory_(cfg_.memory_capacity, static_cast<std::size_t>(state_dim), 1)
    {
        if (fixed_.empty())
            throw ShapeError("DqlAgent: action list is empty");
        std::vector<int> sizes{state_dim};
        sizes.insert(sizes.end(), cfg_.hidden.begin(), cfg_.hidden.end());
        sizes.push_back(static_cast<int>(fixed_.size()));
        q_ = Mlp(sizes, OutputActivation::Identity);
        q_.init_uniform(rng_);
        target_ = q_;
        opt_ = Optimizer({cfg_.optimizer, cfg_.learning_rate, 0.9, 0.999, 1e-8, cfg_.weight_decay}, q_.num_params());
        epsilon_ = cfg_.epsilon_start;
    }

    std::size_t num_actions() const { return fixed_.empty() ? table_.size() : fixed_.size(); }

    template <class Env>
    std::vector<double> action_for(std::size_t i, const Env& env) const
    {
        if (!fixed_.empty())
            return fixed_.at(i);
        if constexpr (std::is_same_v<Env, Environment>)
            return table_.to_action(i, env);
        else
            throw ShapeError("DqlAgent: no action list for this environment");
    }

    const DiscreteActionTable& table() const { return table_; }
    Mlp& network() { return q_; }
    Mlp& target() { return target_; }
    Optimizer& optimizer() { return opt_; }
    ReplayMemory& memory() { return memory_; }
    std::mt19937_64& rng() { return rng_; }
    const DqlConfig& config() const { return cfg_; }
    double epsilon() const { return epsilon_; }
    void set_epsilon(double e) { epsilon_ = e; }
    long long steps() const { return steps_; }
    void set_steps(long long s) { steps_ = s; }
    long long updates() const { return updates_; }
    void set_updates(long long u) { updates_ = u; }

    std::size_t greedy_index(std::span<const double> state) const
    {
        const auto qv = q_.forward(state);
        return static_cast<std::size_t>(std::max_element(qv.begin(), qv.end()) - qv.begin());
    }

    /// Epsilon-greedy table index.
    std::size_t select_index(std::span<const double> state)
    {
        if (std::uniform_real_distribution<double>(0.0, 1.0)(rng_) < epsilon_)
            return std::uniform_int_distribution<std::size_t>(0, num_actions() - 1)(rng_);
        return greedy_index(state);
    }

    template <class Env>
    std::vector<double> policy(std::span<const double> state, const Env& env) const
    {
        return action_for(greedy_index(state), env);
    }

    void begin_episode(int episode, int total_episodes) { epsilon_ = epsilon_at(episode, total_episodes, cfg_); }

    template <class Env>
    std::vector<double> explore(std::span<const double> state, const Env& env)
    {
        last_index_ = select_index(state);
        return action_for(last_index_, env);
    }

    template <class Env>
    void observe(std::span<const double> state, std::span<const double> /*action*/, double reward,
                 std::span<const double> next_state, bool done, const Env& /*env*/)
    {
        memory_.push({{state.begin(), state.end()}, {static_cast<double>(last_index_)}, reward,
                      {next_state.begin(), next_state.end()}, done});
        ++steps_;
        if (memory_.size() < static_cast<std::size_t>(std::max(cfg_.warmup, cfg_.batch_size)))
            return;
        if (steps_ % std::max(cfg_.update_every, 1) != 0)
            return;
        auto batch = memory_.sample(static_cast<std::size_t>(cfg_.batch_size), rng_);
        if (!batch)
            return;
        update(*batch);
    }

    /// One TD step on the chosen-action outputs; returns the pre-update loss.
    double update(const Batch& batch)
    {
        std::vector<double> grad(q_.num_params(), 0.0);
        const std::size_t n = batch.size;
        const double inv_n = 1.0 / static_cast<double>(n);
        double loss = 0.0;
        const auto s = detail::columns(batch.states, n, batch.state_dim);
        const auto s2 = detail::columns(batch.next_states, n, batch.state_dim);
        Mlp::BatchTape tn, tape;
        const Eigen::MatrixXd next = target_.forward_batch(s2, tn);
        const Eigen::MatrixXd pred = q_.forward_batch(s, tape);
        Eigen::MatrixXd gout = Eigen::MatrixXd::Zero(pred.rows(), pred.cols());
        for (std::size_t i = 0; i < n; ++i) {
            const auto c = static_cast<Eigen::Index>(i);
            double target = batch.rewards[i];
            if (!batch.dones[i])
                target += cfg_.discount * next.col(c).maxCoeff();
            const auto idx = static_cast<Eigen::Index>(batch.action(i)[0]);
            const double err = pred(idx, c) - target;
            loss += err * err * inv_n;
            gout(idx, c) = 2.0 * err * inv_n;
        }
        q_.backward_batch(tape, gout, grad);
        if (!std::isfinite(loss))
            throw DivergenceError("DQL loss is not finite");
        opt_.step(q_.params(), grad);
        soft_update(target_, q_, cfg_.tau);
        ++updates_;
        return loss;
    }

    void end_episode() {}

private:
    DqlConfig cfg_;
    DiscreteActionTable table_;
    std::vector<std::vector<double>> fixed_;
    std::mt19937_64 rng_;
    ReplayMemory memory_;
    Mlp q_;
    Mlp target_;
    Optimizer opt_;
    double epsilon_ = 1.0;
    std::size_t last_index_ = 0;
    long long steps_ = 0;
    long long updates_ = 0;
};

/// RIS left unoptimized: all phases 0, or one uniform random draw per episode.
class NoRisOverride : public ActionOverride {
public:
    NoRisOverride(int num_elements, bool random_phases = false, std::uint64_t seed = 0)
        : phases_(static_cast<std::size_t>(num_elements), 0.0), random_(random_phases), seed_(seed)
    {
    }

    void begin_episode(int episode) override
    {
        if (!random_)
            return;
        std::mt19937_64 g(episode_seed(seed_, episode));
        std::uniform_real_distribution<double> u(0.0, kTwoPi);
        for (double& p : phases_)
            p = u(g);
    }

    void apply(std::span<double> action) const override { write_phases(action, phases_); }

    const std::vector<double>& phases() const { return phases_; }

private:
    std::vector<double> phases_;
    bool random_;
    std::uint64_t seed_;
};

/// UAV kept hovering: the speed entry is pinned to zero. The hover point is
/// the scenario start position (see hover_scenario).
class NoTrajectoryOverride : public ActionOverride {
public:
    explicit NoTrajectoryOverride(int num_elements) : speed_index_(2 * static_cast<std::size_t>(num_elements)) {}

    void apply(std::span<double> action) const override
    {
        action[speed_index_] = -1.0;
        if (action.size() > speed_index_ + 4)
            action[speed_index_ + 4] = 0.0; // no vertical motion either
    }

private:
    std::size_t speed_index_;
};

/// Scenario whose UAV starts (and, under NoTrajectoryOverride, stays) at the
/// given point; defaults to the area centroid.
inline ScenarioConfig hover_scenario(ScenarioConfig cfg, std::optional<std::pair<double, double>> point = {})
{
    const auto p = point.value_or(std::pair{cfg.area_x / 2.0, cfg.area_y / 2.0});
    cfg.start_x = p.first;
    cfg.start_y = p.second;
    return cfg;
}

/// Wraps a policy so that every action carries its own override.
inline Policy with_override(Policy inner, std::shared_ptr<ActionOverride> o)
{
    return [inner = std::move(inner), o = std::move(o)](std::span<const double> s, const Environment& env) {
        if (env.log().slots.empty())
            o->begin_episode(env.log().episode);
        auto a = inner(s, env);
        o->apply(a);
        return a;
    };
}

/// Replaces the RIS entries with the aligned phases for the UE the base action
/// schedules, evaluated at the position the UAV will occupy this slot.
inline Policy oracle_phase_policy(Policy base)
{
    return [base = std::move(base)](std::span<const double> s, const Environment& env) {
        auto a = base(s, env);
        const auto& cfg = env.config();
        const auto c = decode_action(a, cfg);
        const auto next = env.next_position(c);
        write_phases(a, phase_alignment_oracle(env.world().ues[static_cast<std::size_t>(c.selected_ue)], cfg.ris,
                                               next, cfg.rf));
        return a;
    };
}

/// DDPG agent whose phase entries are always replaced by the aligned phases
/// for the UE it schedules, during training and evaluation alike.
class OraclePhaseAgent {
public:
    static constexpr const char* kind = "oracle-phase";

    OraclePhaseAgent(int state_dim, int action_dim, DdpgConfig cfg, std::uint64_t seed)
        : inner_(state_dim, action_dim, std::move(cfg), seed)
    {
    }

    DdpgAgent& inner() { return inner_; }
    const DdpgAgent& inner() const { return inner_; }

    std::vector<double> policy(std::span<const double> state, const Environment& env) const
    {
        auto a = inner_.policy(state);
        align(a, env);
        return a;
    }

    void begin_episode(int episode, int total) { inner_.begin_episode(episode, total); }

    std::vector<double> explore(std::span<const double> state, const Environment& env)
    {
        auto a = inner_.explore(state, env);
        align(a, env);
        return a;
    }

    void observe(std::span<const double> state, std::span<const double> action, double reward,
                 std::span<const double> next_state, bool done, const Environment& env)
    {
        inner_.observe(state, action, reward, next_state, done, env);
    }

    void end_episode() { inner_.end_episode(); }

private:
    static void align(std::vector<double>& a, const Environment& env)
    {
        const auto& cfg = env.config();
        const auto c = decode_action(a, cfg);
        const auto next = env.next_position(c);
        write_phases(a, phase_alignment_oracle(env.world().ues[static_cast<std::size_t>(c.selected_ue)], cfg.ris,
                                               next, cfg.rf));
    }

    DdpgAgent inner_;
};

inline Policy ddpg_policy(const DdpgAgent& agent)
{
    return [&agent](std::span<const double> s, const Environment&) { return agent.policy(s); };
}

inline Policy oracle_agent_policy(const OraclePhaseAgent& agent)
{
    return [&agent](std::span<const double> s, const Environment& env) { return agent.policy(s, env); };
}

inline Policy dql_policy(const DqlAgent& agent)
{
    return [&agent](std::span<const double> s, const Environment& env) { return agent.policy(s, env); };
}

/// One noise-free episode; returns its log.
inline EpisodeLog rollout(Environment& env, const Policy& policy, std::uint64_t seed, int episode = 0)
{
    auto state = env.reset(seed, episode);
    while (!env.done()) {
        auto a = policy(state, env);
        state = env.step(a).next_state;
    }
    return env.log();
}


/// Frozen-geometry check of how close trained DDPG phases get to the aligned
/// optimum. The UAV hovers over a fixed point serving a single UE with no
/// offload, so only the RIS entries influence the reward; the RIS path loss is
/// raised until the cascade dominates the direct link.
struct PhaseHarnessConfig {
    int num_elements = 8;
    int episode_slots = 20;
    int episodes = 500;
    double ris_ref_pathloss = 400.0;
    Position3D ue{200.0, 100.0, 0.0};
    Position3D eve{590.0, 390.0, 0.0};
    std::pair<double, double> hover{260.0, 230.0};
    double min_ratio = 0.8; // learned |cascade| / aligned |cascade|
    DdpgConfig ddpg = [] {
        DdpgConfig c;
        c.discount = 0.0;
        c.warmup = 200;
        c.actor_tau = 1e-2;
        c.critic_tau = 1e-2;
        c.noise.decay = 0.99;
        return c;
    }();
};

struct PhaseHarnessResult {
    double learned_gain = 0.0;
    double oracle_gain = 0.0;
    double random_gain = 0.0; // mean |cascade| over uniform random phases
    double ratio() const { return learned_gain / oracle_gain; }
};

inline PhaseHarnessResult learned_phase_gain(const PhaseHarnessConfig& h, std::uint64_t seed)
{
    auto cfg = ScenarioConfig::desk();
    cfg.ris.num_elements = h.num_elements;
    cfg.num_ues = 1;
    cfg.num_eves = 1;
    cfg.episode_slots = h.episode_slots;
    cfg.placement.policy = PlacementPolicy::Fixed;
    cfg.placement.ues = {h.ue};
    cfg.placement.eves = {h.eve};
    cfg.rf.ris_ref_pathloss = h.ris_ref_pathloss;
    cfg = hover_scenario(cfg, h.hover);

    class PinControls : public ActionOverride {
    public:
        explicit PinControls(std::size_t o) : o_(o) {}
        void apply(std::span<double> a) const override
        {
            a[2 * o_] = -1.0;     // hover
            a[2 * o_ + 2] = -1.0; // no offload
            a[2 * o_ + 3] = -1.0; // UE 0
        }

    private:
        std::size_t o_;
    };

    DdpgAgent agent(cfg.state_size(), cfg.action_size(), h.ddpg, seed);
    agent.set_override(std::make_shared<PinControls>(static_cast<std::size_t>(h.num_elements)));
    Environment env(cfg);
    train_loop(env, agent, TrainSchedule{h.episodes, 0}, seed);
    const auto log = rollout(env, ddpg_policy(agent), episode_seed(seed, h.episodes));

    PhaseHarnessResult r;
    r.learned_gain = log.slots.back().cascade_abs;
    const Position3D uav = log.slots.back().uav;
    RisConfig ris{cfg.ris, phase_alignment_oracle(h.ue, cfg.ris, uav, cfg.rf)};
    r.oracle_gain = std::abs(cascade_gain(h.ue, ris, uav, cfg.rf));
    std::mt19937_64 g(seed);
    std::uniform_real_distribution<double> u(0.0, kTwoPi);
    const int draws = 1000;
    for (int i = 0; i < draws; ++i) {
        for (double& p : ris.phases)
            p = u(g);
        r.random_gain += std::abs(cascade_gain(h.ue, ris, uav, cfg.rf)) / draws;
    }
    return r;
}

} // namespace risamec
