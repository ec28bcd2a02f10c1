#pragma once

// Deep deterministic policy gradient with train/target actor and critic
// networks, uniform replay, and Gaussian exploration.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "risamec/mlp.hpp"
#include "risamec/replay.hpp"

namespace risamec {

struct NoiseConfig {
    double sigma = 0.2;
    double decay = 0.999; // per episode
    double floor = 0.01;
};

class ExplorationNoise {
public:
    ExplorationNoise() = default;
    explicit ExplorationNoise(NoiseConfig cfg) : cfg_(cfg), sigma_(std::max(cfg.sigma, cfg.floor)) {}

    double sigma() const { return sigma_; }
    void set_sigma(double s) { sigma_ = std::max(s, cfg_.floor); }
    const NoiseConfig& config() const { return cfg_; }
    void decay() { sigma_ = std::max(sigma_ * cfg_.decay, cfg_.floor); }

private:
    NoiseConfig cfg_;
    double sigma_ = 0.2;
};

struct DdpgConfig {
    std::vector<int> hidden{80, 40};
    double actor_lr = 1e-3;
    double critic_lr = 1e-3;
    double actor_tau = 1e-3;
    double critic_tau = 1e-3;
    double discount = 0.99;
    int batch_size = 64;
    std::size_t memory_capacity = 1000000;
    int warmup = 1000;
    int update_every = 1;
    int hard_target_period = 0; // > 0: copy targets every N updates instead of soft updates
    double weight_decay = 0.0;
    OptimizerKind optimizer = OptimizerKind::Adam;
    bool actor_grad_through_target = true;
    NoiseConfig noise;
};

struct NetQuartet {
    Mlp actor;
    Mlp actor_target;
    Mlp critic;
    Mlp critic_target;
    Optimizer actor_opt;
    Optimizer critic_opt;
    DdpgConfig cfg;
    long long updates = 0;

    int state_dim() const { return actor.input_size(); }
    int action_dim() const { return actor.output_size(); }

    template <class Rng>
    static NetQuartet make(int state_dim, int action_dim, const DdpgConfig& cfg, Rng& rng)
    {
        auto sizes = [&](int in, int out) {
            std::vector<int> s{in};
            s.insert(s.end(), cfg.hidden.begin(), cfg.hidden.end());
            s.push_back(out);
            return s;
        };
        NetQuartet q;
        q.cfg = cfg;
        q.actor = Mlp(sizes(state_dim, action_dim), OutputActivation::Tanh);
        q.critic = Mlp(sizes(state_dim + action_dim, 1), OutputActivation::Identity);
        q.actor.init_uniform(rng);
        q.critic.init_uniform(rng);
        q.actor_target = q.actor;
        q.critic_target = q.critic;
        q.actor_opt = Optimizer({cfg.optimizer, cfg.actor_lr, 0.9, 0.999, 1e-8, cfg.weight_decay},
                                q.actor.num_params());
        q.critic_opt = Optimizer({cfg.optimizer, cfg.critic_lr, 0.9, 0.999, 1e-8, cfg.weight_decay},
                                 q.critic.num_params());
        return q;
    }
};

inline std::vector<double> concat(std::span<const double> a, std::span<const double> b)
{
    std::vector<double> v(a.begin(), a.end());
    v.insert(v.end(), b.begin(), b.end());
    return v;
}

inline double q_value(const Mlp& critic, std::span<const double> s, std::span<const double> a)
{
    return critic.forward(concat(s, a))[0];
}

struct CriticLoss {
    double loss = 0.0;
    std::vector<double> grad; // d loss / d critic params
};

namespace detail {

// Batch columns: states, actions, next states.
inline Eigen::MatrixXd columns(const std::vector<double>& rows, std::size_t n, std::size_t dim)
{
    return Eigen::Map<const Eigen::MatrixXd>(rows.data(), static_cast<Eigen::Index>(dim),
                                             static_cast<Eigen::Index>(n));
}

inline Eigen::MatrixXd stack(const Eigen::MatrixXd& top, const Eigen::MatrixXd& bottom)
{
    Eigen::MatrixXd m(top.rows() + bottom.rows(), top.cols());
    m << top, bottom;
    return m;
}

} // namespace detail

/// Mean squared TD error against r + discount * Q'(s', mu'(s')); terminal
/// transitions drop the bootstrap term.
inline CriticLoss critic_loss(const NetQuartet& q, const Batch& batch)
{
    if (batch.size == 0)
        throw ShapeError("critic_loss: empty batch");
    CriticLoss out;
    out.grad.assign(q.critic.num_params(), 0.0);
    const std::size_t n = batch.size;
    const double inv_n = 1.0 / static_cast<double>(n);
    const auto s = detail::columns(batch.states, n, batch.state_dim);
    const auto a = detail::columns(batch.actions, n, batch.action_dim);
    const auto s2 = detail::columns(batch.next_states, n, batch.state_dim);

    Mlp::BatchTape t1, t2, tape;
    const Eigen::MatrixXd a2 = q.actor_target.forward_batch(s2, t1);
    const Eigen::MatrixXd q2 = q.critic_target.forward_batch(detail::stack(s2, a2), t2);
    const Eigen::MatrixXd pred = q.critic.forward_batch(detail::stack(s, a), tape);
    Eigen::MatrixXd g(1, static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        const auto c = static_cast<Eigen::Index>(i);
        double target = batch.rewards[i];
        if (!batch.dones[i])
            target += q.cfg.discount * q2(0, c);
        const double err = pred(0, c) - target;
        out.loss += err * err * inv_n;
        g(0, c) = 2.0 * err * inv_n;
    }
    q.critic.backward_batch(tape, g, out.grad);
    return out;
}

/// Returns Q(s, a) and writes dQ/da.
using QGradFn = std::function<double(std::span<const double> state, std::span<const double> action,
                                     std::span<double> dq_da)>;

inline QGradFn critic_q_grad(const Mlp& critic)
{
    return [&critic](std::span<const double> s, std::span<const double> a, std::span<double> dq_da) {
        Mlp::Tape tape;
        const double qv = critic.forward(concat(s, a), tape)[0];
        const double one = 1.0;
        const auto din = critic.backward(tape, std::span<const double>(&one, 1), {});
        std::copy(din.begin() + static_cast<std::ptrdiff_t>(s.size()), din.end(), dq_da.begin());
        return qv;
    };
}

struct ActorObjective {
    double mean_q = 0.0;
    std::vector<double> grad; // d mean_q / d actor params
};

/// Mean Q(s, actor(s)) over the batch states with its chain-rule gradient.
inline ActorObjective actor_objective(const Mlp& actor, const Batch& batch, const QGradFn& qgrad)
{
    ActorObjective out;
    out.grad.assign(actor.num_params(), 0.0);
    const double inv_n = 1.0 / static_cast<double>(batch.size);
    std::vector<double> dq_da(static_cast<std::size_t>(actor.output_size()));
    Mlp::Tape tape;
    for (std::size_t i = 0; i < batch.size; ++i) {
        const auto a = actor.forward(batch.state(i), tape);
        out.mean_q += qgrad(batch.state(i), a, dq_da) * inv_n;
        for (double& g : dq_da)
            g *= inv_n;
        actor.backward(tape, dq_da, out.grad);
    }
    return out;
}

inline ActorObjective actor_objective(const NetQuartet& q, const Batch& batch)
{
    const Mlp& critic = q.cfg.actor_grad_through_target ? q.critic_target : q.critic;
    ActorObjective out;
    out.grad.assign(q.actor.num_params(), 0.0);
    const std::size_t n = batch.size;
    const double inv_n = 1.0 / static_cast<double>(n);
    const auto s = detail::columns(batch.states, n, batch.state_dim);
    Mlp::BatchTape ta, tc;
    const Eigen::MatrixXd a = q.actor.forward_batch(s, ta);
    const Eigen::MatrixXd qv = critic.forward_batch(detail::stack(s, a), tc);
    out.mean_q = qv.sum() * inv_n;
    const Eigen::MatrixXd din = critic.backward_batch(tc, Eigen::MatrixXd::Constant(1, qv.cols(), inv_n), {});
    q.actor.backward_batch(ta, din.bottomRows(a.rows()), out.grad);
    return out;
}

inline double update_critic(NetQuartet& q, const Batch& batch)
{
    auto l = critic_loss(q, batch);
    if (!std::isfinite(l.loss))
        throw DivergenceError("critic loss is not finite");
    q.critic_opt.step(q.critic.params(), l.grad);
    return l.loss;
}

/// Gradient ascent on mean Q(s, actor(s)); returns the pre-update objective.
inline double update_actor(NetQuartet& q, const Batch& batch)
{
    auto obj = actor_objective(q, batch);
    if (!std::isfinite(obj.mean_q))
        throw DivergenceError("actor objective is not finite");
    for (double& g : obj.grad)
        g = -g;
    q.actor_opt.step(q.actor.params(), obj.grad);
    return obj.mean_q;
}

inline void soft_update(NetQuartet& q)
{
    soft_update(q.critic_target, q.critic, q.cfg.critic_tau);
    soft_update(q.actor_target, q.actor, q.cfg.actor_tau);
}

inline void hard_update(NetQuartet& q)
{
    soft_update(q.critic_target, q.critic, 1.0);
    soft_update(q.actor_target, q.actor, 1.0);
}

/// actor(state) plus N(0, sigma^2) per entry, clamped to [-1, 1].
template <class Rng>
std::vector<double> act(const NetQuartet& q, std::span<const double> state, const ExplorationNoise& noise,
                        Rng& rng)
{
    auto a = q.actor.forward(state);
    if (noise.sigma() > 0.0) {
        std::normal_distribution<double> n(0.0, noise.sigma());
        for (double& x : a)
            x = std::clamp(x + n(rng), -1.0, 1.0);
    }
    return a;
}

/// Rewrites an action before it reaches the environment (ablations).
class ActionOverride {
public:
    virtual ~ActionOverride() = default;
    virtual void begin_episode(int /*episode*/) {}
    virtual void apply(std::span<double> action) const = 0;
};

class DdpgAgent {
public:
    static constexpr const char* kind = "ddpg";

    DdpgAgent() = default;
    DdpgAgent(int state_dim, int action_dim, DdpgConfig cfg, std::uint64_t seed)
        : rng_(seed),
          memory_(cfg.memory_capacity, static_cast<std::size_t>(state_dim), static_cast<std::size_t>(action_dim)),
          noise_(cfg.noise)
    {
        quartet_ = NetQuartet::make(state_dim, action_dim, cfg, rng_);
    }

    NetQuartet& quartet() { return quartet_; }
    const NetQuartet& quartet() const { return quartet_; }
    ReplayMemory& memory() { return memory_; }
    ExplorationNoise& noise() { return noise_; }
    std::mt19937_64& rng() { return rng_; }
    int state_dim() const { return quartet_.state_dim(); }
    int action_dim() const { return quartet_.action_dim(); }

    void set_override(std::shared_ptr<ActionOverride> o) { override_ = std::move(o); }
    const std::shared_ptr<ActionOverride>& action_override() const { return override_; }

    /// Noise-free action, overrides applied.
    std::vector<double> policy(std::span<const double> state) const
    {
        auto a = quartet_.actor.forward(state);
        if (override_)
            override_->apply(a);
        return a;
    }

    void begin_episode(int episode, int /*total_episodes*/)
    {
        if (override_)
            override_->begin_episode(episode);
    }

    template <class Env>
    std::vector<double> explore(std::span<const double> state, const Env& /*env*/)
    {
        auto a = act(quartet_, state, noise_, rng_);
        if (override_)
            override_->apply(a);
        return a;
    }

    /// Stores the transition and runs the scheduled updates.
    template <class Env>
    void observe(std::span<const double> state, std::span<const double> action, double reward,
                 std::span<const double> next_state, bool done, const Env& /*env*/)
    {
        memory_.push({{state.begin(), state.end()}, {action.begin(), action.end()}, reward,
                      {next_state.begin(), next_state.end()}, done});
        ++steps_;
        const auto& cfg = quartet_.cfg;
        if (memory_.size() < static_cast<std::size_t>(std::max(cfg.warmup, cfg.batch_size)))
            return;
        if (steps_ % std::max(cfg.update_every, 1) != 0)
            return;
        auto batch = memory_.sample(static_cast<std::size_t>(cfg.batch_size), rng_);
        if (!batch)
            return;
        last_critic_loss_ = update_critic(quartet_, *batch);
        update_actor(quartet_, *batch);
        ++quartet_.updates;
        if (cfg.hard_target_period > 0) {
            if (quartet_.updates % cfg.hard_target_period == 0)
                hard_update(quartet_);
        } else {
            soft_update(quartet_);
        }
    }

    void end_episode() { noise_.decay(); }

    long long steps() const { return steps_; }
    void set_steps(long long s) { steps_ = s; }
    double last_critic_loss() const { return last_critic_loss_; }

private:
    std::mt19937_64 rng_;
    NetQuartet quartet_;
    ReplayMemory memory_;
    ExplorationNoise noise_;
    std::shared_ptr<ActionOverride> override_;
    long long steps_ = 0;
    double last_critic_loss_ = 0.0;
};

// ---------------------------------------------------------------------------
// Generic episodic training loop shared by every agent kind.

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Environment seed for training episode `episode` of run `seed`.
inline std::uint64_t episode_seed(std::uint64_t seed, int episode)
{
    return splitmix64(splitmix64(seed) ^ static_cast<std::uint64_t>(episode));
}

struct TrainSchedule {
    int episodes = 0;
    int checkpoint_every = 0; // episodes; 0 disables periodic checkpoints
};

struct EpisodeStats {
    int episode = 0;
    int steps = 0;
    double reward_sum = 0.0;

    double mean_reward() const { return steps > 0 ? reward_sum / steps : 0.0; }
};

struct TrainingReport {
    std::vector<EpisodeStats> episodes;
    bool diverged = false;
    std::string error;
    int next_episode = 0;
};

/// Runs episodes [start_episode, schedule.episodes). `on_episode(env, stats)`
/// runs after each episode; `checkpoint(next_episode)` at the configured cadence.
template <class Env, class Agent, class OnEpisode, class Checkpoint>
TrainingReport train_loop(Env& env, Agent& agent, const TrainSchedule& schedule, std::uint64_t seed,
                          int start_episode, OnEpisode&& on_episode, Checkpoint&& checkpoint)
{
    TrainingReport report;
    report.next_episode = start_episode;
    for (int ep = start_episode; ep < schedule.episodes; ++ep) {
        try {
            agent.begin_episode(ep, schedule.episodes);
            auto state = env.reset(episode_seed(seed, ep), ep);
            EpisodeStats stats;
            stats.episode = ep;
            while (!env.done()) {
                auto action = agent.explore(state, env);
                auto res = env.step(action);
                agent.observe(state, action, res.reward, res.next_state, res.done, env);
                stats.reward_sum += res.reward;
                ++stats.steps;
                state = std::move(res.next_state);
            }
            agent.end_episode();
            report.episodes.push_back(stats);
            report.next_episode = ep + 1;
            on_episode(env, stats);
            if (schedule.checkpoint_every > 0 && (ep + 1) % schedule.checkpoint_every == 0)
                checkpoint(ep + 1);
        } catch (const DivergenceError& e) {
            report.diverged = true;
            report.error = e.what();
            return report;
        }
    }
    return report;
}

template <class Env, class Agent>
TrainingReport train_loop(Env& env, Agent& agent, const TrainSchedule& schedule, std::uint64_t seed)
{
    return train_loop(env, agent, schedule, seed, 0, [](const Env&, const EpisodeStats&) {}, [](int) {});
}

/// Factory form: builds the environment, then trains from episode 0.
template <class EnvFactory, class Agent>
TrainingReport train(EnvFactory&& make_env, Agent& agent, const TrainSchedule& schedule, std::uint64_t seed)
{
    auto env = make_env();
    return train_loop(env, agent, schedule, seed);
}

} // namespace risamec
