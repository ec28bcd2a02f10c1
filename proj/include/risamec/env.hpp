#pragma once

// Episodic MDP around the RIS/UAV/MEC physics.
//
// State layout (length 2O + 8):
//   [cos t_1, sin t_1, ..., cos t_O, sin t_O,    RIS phases, in [-1, 1]
//    x / area_x, y / area_y,                      UAV position, [0, 1]
//    speed / max_speed,                           [0, 1]
//    energy / initial_energy,                     [0, 1]
//    amec_cycles_remaining / budget,              [0, 1]
//    active_bits_remaining / data_bits_max,       [0, 1]
//    active_time_remaining / deadline,            [0, 1]
//    ue_cycles_available / task_cycles]           [0, 1]
// The active task belongs to the UE served in the previous slot (UE 0 after reset).
//
// Action layout (length 2O + 4, entries clamped to [-1, 1]):
//   [c_1, s_1, ..., c_O, s_O, speed, heading, offload, ue_select]
// plus a trailing vertical-speed entry when vertical control is enabled.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "risamec/channel.hpp"
#include "risamec/energy.hpp"
#include "risamec/scenario.hpp"

namespace risamec {

class LifecycleError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

class EncodingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct ControlTuple {
    double speed = 0.0;          // m/s, horizontal
    double heading = 0.0;        // radians in [0, 2pi]
    double vertical_speed = 0.0; // m/s, only with vertical control
    std::vector<double> phases;  // radians in [0, 2pi)
    double alpha = 0.0;
    int selected_ue = 0;
};

struct TaskProgress {
    Task task;
    double alpha = 0.0;
    double delivered_bits = 0.0;
    int served_slots = 0;
    double secrecy_sum = 0.0;

    double mean_secrecy() const { return served_slots > 0 ? secrecy_sum / served_slots : 0.0; }
};

struct WorldSnapshot {
    int slot = 0;
    Position3D uav;
    double speed = 0.0;
    double heading = 0.0;
    std::vector<double> phases;
    double energy_remaining = 0.0;
    double amec_cycles_used = 0.0;
    double amec_budget = 0.0;
    int active_ue = 0;
    std::vector<Position3D> ues;
    std::vector<Position3D> eves;
    std::vector<TaskProgress> tasks;
};

struct Violations {
    bool latency = false;
    bool budget = false;
};

struct StepInfo {
    double secrecy_rate = 0.0;
    int selected_ue = 0;
    double alpha = 0.0;
    double propulsion_J = 0.0;
    double compute_J = 0.0;
    double ue_energy_J = 0.0;
    double bits_delivered = 0.0;
    Violations violations;
    LinkState link;
};

struct StepResult {
    std::vector<double> next_state;
    double reward = 0.0;
    bool done = false;
    StepInfo info;
};

struct SlotRecord {
    int episode = 0;
    int slot = 0;
    Position3D uav;
    double speed = 0.0;
    double heading = 0.0;
    int selected_ue = 0;
    double alpha = 0.0;
    double secrecy_bps = 0.0;
    double propulsion_J = 0.0;
    double compute_J = 0.0;
    double energy_remaining_J = 0.0;
    double reward = 0.0;
    bool viol_latency = false;
    bool viol_budget = false;
    // by-construction checks, recomputed from the realized slot
    double displacement = 0.0;
    bool phases_valid = true;
    double cascade_abs = 0.0;
};

struct EpisodeLog {
    int episode = 0;
    std::uint64_t seed = 0;
    double initial_energy = 0.0;
    double climb_energy = 0.0;
    double max_step_displacement = 0.0; // delta_ts * max_speed
    int num_ues = 0;
    std::vector<SlotRecord> slots;

    double final_energy() const
    {
        return slots.empty() ? initial_energy - climb_energy : slots.back().energy_remaining_J;
    }
    double energy_fraction() const { return std::clamp(final_energy() / initial_energy, 0.0, 1.0); }
    double reward_sum() const
    {
        double s = 0.0;
        for (const auto& r : slots)
            s += r.reward;
        return s;
    }
    double mean_reward() const { return slots.empty() ? 0.0 : reward_sum() / slots.size(); }

    /// Episode secrecy energy efficiency: mean per-slot secrecy rate over the
    /// flight energy spent after the climb (bit/J).
    double see() const
    {
        if (slots.empty())
            return 0.0;
        double secrecy = 0.0, prop = 0.0, comp = 0.0;
        for (const auto& r : slots) {
            secrecy += r.secrecy_bps;
            prop += r.propulsion_J;
            comp += r.compute_J;
        }
        return see_objective(secrecy / slots.size(), prop, comp);
    }

    /// |initial - climb - sum(prop + compute) - final| / initial.
    double bookkeeping_residual() const
    {
        double spent = climb_energy;
        for (const auto& r : slots)
            spent += r.propulsion_J + r.compute_J;
        return std::abs(initial_energy - spent - final_energy()) / initial_energy;
    }
};

struct ConstraintSummary {
    int phase = 0;      // unit-modulus RIS coefficients
    int velocity = 0;   // per-slot displacement bound
    int latency = 0;    // task deadline
    int offload = 0;    // 0 <= alpha <= 1
    int budget = 0;     // AMEC cycle budget
    int selection = 0;  // exactly one UE per slot

    ConstraintSummary& operator+=(const ConstraintSummary& o)
    {
        phase += o.phase;
        velocity += o.velocity;
        latency += o.latency;
        offload += o.offload;
        budget += o.budget;
        selection += o.selection;
        return *this;
    }
    int by_construction() const { return phase + velocity + offload + selection; }
};

inline ConstraintSummary constraint_report(const EpisodeLog& log)
{
    ConstraintSummary s;
    for (const auto& r : log.slots) {
        if (!r.phases_valid)
            ++s.phase;
        if (r.displacement > log.max_step_displacement + 1e-9)
            ++s.velocity;
        if (r.viol_latency)
            ++s.latency;
        if (!(r.alpha >= 0.0 && r.alpha <= 1.0))
            ++s.offload;
        if (r.viol_budget)
            ++s.budget;
        if (r.selected_ue < 0 || r.selected_ue >= log.num_ues)
            ++s.selection;
    }
    return s;
}

/// Rescales the state entries into their documented ranges.
inline std::vector<double> encode_state(const WorldSnapshot& w, const ScenarioConfig& cfg)
{
    const auto O = static_cast<std::size_t>(cfg.num_elements());
    if (w.phases.size() != O)
        throw EncodingError("encode_state: phase vector length differs from element count");
    if (w.active_ue < 0 || w.active_ue >= static_cast<int>(w.tasks.size()))
        throw EncodingError("encode_state: active UE index out of range");
    auto in_range = [](double v, double lo, double hi, const char* what) {
        if (!std::isfinite(v) || v < lo - 1e-9 || v > hi + 1e-9)
            throw EncodingError(std::string("encode_state: out of range: ") + what);
        return std::clamp(v, lo, hi);
    };
    std::vector<double> s;
    s.reserve(2 * O + 8);
    for (double th : w.phases) {
        in_range(th, 0.0, kTwoPi, "phase");
        s.push_back(std::cos(th));
        s.push_back(std::sin(th));
    }
    s.push_back(in_range(w.uav.x / cfg.area_x, 0.0, 1.0, "uav x"));
    s.push_back(in_range(w.uav.y / cfg.area_y, 0.0, 1.0, "uav y"));
    s.push_back(in_range(w.speed / cfg.power.max_speed, 0.0, 1.0, "speed"));
    s.push_back(in_range(std::max(w.energy_remaining, 0.0) / cfg.initial_energy, 0.0, 1.0, "energy"));
    const double cycles_left = std::max(w.amec_budget - w.amec_cycles_used, 0.0);
    s.push_back(in_range(w.amec_budget > 0.0 ? cycles_left / w.amec_budget : 0.0, 0.0, 1.0,
                         "amec cycles"));
    const auto& tp = w.tasks[static_cast<std::size_t>(w.active_ue)];
    const double bits_left = std::max(tp.task.data_bits - tp.delivered_bits, 0.0);
    s.push_back(in_range(bits_left / cfg.tasks.data_bits_max, 0.0, 1.0, "task bits"));
    const double elapsed = w.slot * cfg.power.slot_duration;
    const double time_left = std::max(tp.task.deadline - elapsed, 0.0);
    s.push_back(in_range(time_left / tp.task.deadline, 0.0, 1.0, "task time"));
    const double local_capacity = cfg.compute.ue_cpu_rate * time_left;
    s.push_back(std::min(local_capacity / tp.task.total_cycles(), 1.0));
    return s;
}

inline ControlTuple decode_action(std::span<const double> raw, const ScenarioConfig& cfg)
{
    if (raw.size() != static_cast<std::size_t>(cfg.action_size()))
        throw ShapeError("decode_action: expected " + std::to_string(cfg.action_size())
                         + " entries, got " + std::to_string(raw.size()));
    auto clamp1 = [](double v) { return std::isnan(v) ? 0.0 : std::clamp(v, -1.0, 1.0); };
    const auto O = static_cast<std::size_t>(cfg.num_elements());
    ControlTuple c;
    c.phases.resize(O);
    for (std::size_t o = 0; o < O; ++o) {
        const double re = clamp1(raw[2 * o]);
        const double im = clamp1(raw[2 * o + 1]);
        c.phases[o] = (re == 0.0 && im == 0.0) ? 0.0 : wrap_phase(std::atan2(im, re));
    }
    c.speed = (clamp1(raw[2 * O]) + 1.0) / 2.0 * cfg.power.max_speed;
    c.heading = (clamp1(raw[2 * O + 1]) + 1.0) * kPi;
    c.alpha = (clamp1(raw[2 * O + 2]) + 1.0) / 2.0;
    if (cfg.binary_offload)
        c.alpha = c.alpha >= 0.5 ? 1.0 : 0.0;
    const int K = cfg.num_ues;
    c.selected_ue = std::min(static_cast<int>(std::floor((clamp1(raw[2 * O + 3]) + 1.0) / 2.0 * K)),
                             K - 1);
    if (cfg.vertical_control) {
        c.vertical_speed = clamp1(raw[2 * O + 4]) * cfg.max_vertical_speed;
        // keep the 3-D displacement within the per-slot bound
        const double norm = std::hypot(c.speed, c.vertical_speed);
        if (norm > cfg.power.max_speed) {
            c.speed *= cfg.power.max_speed / norm;
            c.vertical_speed *= cfg.power.max_speed / norm;
        }
    }
    return c;
}

/// Inverse of decode_action for the non-phase entries; handy for scripted policies.
inline void write_controls(std::span<double> raw, const ScenarioConfig& cfg, double speed,
                           double heading, double alpha, int ue)
{
    const auto O = static_cast<std::size_t>(cfg.num_elements());
    raw[2 * O] = std::clamp(2.0 * speed / cfg.power.max_speed - 1.0, -1.0, 1.0);
    raw[2 * O + 1] = std::clamp(wrap_phase(heading) / kPi - 1.0, -1.0, 1.0);
    raw[2 * O + 2] = std::clamp(2.0 * alpha - 1.0, -1.0, 1.0);
    raw[2 * O + 3] = std::clamp(2.0 * (ue + 0.5) / cfg.num_ues - 1.0, -1.0, 1.0);
}

inline void write_phases(std::span<double> raw, std::span<const double> phases)
{
    for (std::size_t o = 0; o < phases.size(); ++o) {
        raw[2 * o] = std::cos(phases[o]);
        raw[2 * o + 1] = std::sin(phases[o]);
    }
}

class Environment {
public:
    explicit Environment(ScenarioConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

    const ScenarioConfig& config() const { return cfg_; }
    const WorldSnapshot& world() const { return world_; }
    const EpisodeLog& log() const { return log_; }
    bool done() const { return done_; }
    int state_size() const { return cfg_.state_size(); }
    int action_size() const { return cfg_.action_size(); }

    std::vector<double> reset(std::uint64_t seed, int episode = 0)
    {
        rng_.seed(seed);
        world_ = WorldSnapshot{};
        place_nodes(seed);

        const auto K = static_cast<std::size_t>(cfg_.num_ues);
        std::uniform_real_distribution<double> bits(cfg_.tasks.data_bits_min, cfg_.tasks.data_bits_max);
        world_.tasks.resize(K);
        double total_bits = 0.0;
        for (auto& tp : world_.tasks) {
            tp.task.cycles_per_bit = cfg_.tasks.cycles_per_bit;
            tp.task.data_bits = bits(rng_);
            tp.task.deadline = cfg_.tasks.deadline;
            total_bits += tp.task.data_bits;
        }
        world_.amec_budget = cfg_.compute.amec_cycle_budget > 0.0
                               ? cfg_.compute.amec_cycle_budget
                               : cfg_.tasks.cycles_per_bit * total_bits;

        world_.uav = {cfg_.start_x, cfg_.start_y, cfg_.operating_altitude};
        world_.phases.assign(static_cast<std::size_t>(cfg_.num_elements()), 0.0);
        const double climb_time = cfg_.operating_altitude / cfg_.climb_rate;
        const double climb_energy = climb_time * propulsion_power(0.0, cfg_.climb_rate, cfg_.power);
        world_.energy_remaining = cfg_.initial_energy - climb_energy;

        log_ = EpisodeLog{};
        log_.episode = episode;
        log_.seed = seed;
        log_.initial_energy = cfg_.initial_energy;
        log_.climb_energy = climb_energy;
        log_.max_step_displacement = cfg_.power.slot_duration * cfg_.power.max_speed;
        log_.num_ues = cfg_.num_ues;
        log_.slots.reserve(static_cast<std::size_t>(cfg_.episode_slots));
        abs_reward_sum_ = 0.0;
        done_ = world_.energy_remaining <= 0.0;
        started_ = true;
        return encode_state(world_, cfg_);
    }

    /// UAV position after applying `controls`, without advancing the episode.
    Position3D next_position(const ControlTuple& c) const
    {
        const double dt = cfg_.power.slot_duration;
        Position3D p = world_.uav;
        p.x = std::clamp(p.x + c.speed * dt * std::cos(c.heading), 0.0, cfg_.area_x);
        p.y = std::clamp(p.y + c.speed * dt * std::sin(c.heading), 0.0, cfg_.area_y);
        if (cfg_.vertical_control)
            p.z = std::clamp(p.z + c.vertical_speed * dt, cfg_.min_altitude, cfg_.max_altitude);
        return p;
    }

    StepResult step(std::span<const double> action)
    {
        if (!started_)
            throw LifecycleError("step called before reset");
        if (done_)
            throw LifecycleError("step called on a finished episode");
        const ControlTuple c = decode_action(action, cfg_);
        const double dt = cfg_.power.slot_duration;

        // (1) kinematics; the realized speed drives propulsion
        const Position3D before = world_.uav;
        world_.uav = next_position(c);
        const double moved_h = horizontal_distance(before, world_.uav);
        const double v_h = moved_h / dt;
        const double v_v = (world_.uav.z - before.z) / dt;
        world_.speed = v_h;
        world_.heading = c.heading;

        // (2) RIS configuration
        world_.phases = c.phases;

        if (cfg_.ue_mobility)
            move_ues();

        // (3) link of the single scheduled UE
        const auto k = static_cast<std::size_t>(c.selected_ue);
        std::optional<double> los_draw;
        if (cfg_.stochastic_los) {
            const double p = los_probability(elevation_angle(world_.uav, world_.ues[k]), cfg_.los);
            los_draw = std::bernoulli_distribution(p)(rng_) ? 1.0 : 0.0;
        }
        RisConfig ris{cfg_.ris, world_.phases};
        StepInfo info;
        info.link = evaluate_link(world_.ues[k], world_.eves, ris, world_.uav, cfg_.rf, cfg_.los, los_draw);
        info.secrecy_rate = info.link.secrecy_rate;
        info.selected_ue = c.selected_ue;
        info.alpha = c.alpha;

        // (4) task progress
        auto& tp = world_.tasks[k];
        tp.alpha = c.alpha;
        tp.served_slots += 1;
        tp.secrecy_sum += info.secrecy_rate;
        const double offload_left = std::max(tp.alpha * tp.task.data_bits - tp.delivered_bits, 0.0);
        info.bits_delivered = std::min(info.secrecy_rate * dt, offload_left);
        tp.delivered_bits += info.bits_delivered;
        world_.active_ue = c.selected_ue;

        const double mu = offload_latency(tp.alpha, tp.task, cfg_.compute, tp.mean_secrecy());
        info.violations.latency = mu > tp.task.deadline;
        double committed = 0.0;
        for (const auto& t : world_.tasks)
            committed += t.alpha * t.task.total_cycles();
        info.violations.budget = committed > world_.amec_budget * (1.0 + 1e-12);

        // (5) energy
        info.propulsion_J = dt * propulsion_power(v_h, v_v, cfg_.power);
        info.compute_J = compute_energy_for_bits(info.bits_delivered, tp.task.cycles_per_bit, cfg_.compute);
        info.ue_energy_J = info.secrecy_rate > 0.0
                             ? info.bits_delivered / info.secrecy_rate * cfg_.rf.tx_power_ue
                             : 0.0;
        world_.amec_cycles_used += info.bits_delivered * tp.task.cycles_per_bit;
        world_.energy_remaining -= info.propulsion_J + info.compute_J;

        // (6) reward
        const double see = see_objective(info.secrecy_rate, info.propulsion_J, info.compute_J);
        const double base = cfg_.reward_scale * see;
        abs_reward_sum_ += std::abs(base);
        const double running = abs_reward_sum_ / (world_.slot + 1);
        double reward = base;
        if (info.violations.latency)
            reward -= cfg_.penalty.latency * running;
        if (info.violations.budget)
            reward -= cfg_.penalty.budget * running;

        // (7) lifecycle
        world_.slot += 1;
        done_ = world_.slot >= cfg_.episode_slots || world_.energy_remaining <= 0.0;

        SlotRecord rec;
        rec.episode = log_.episode;
        rec.slot = world_.slot - 1;
        rec.uav = world_.uav;
        rec.speed = v_h;
        rec.heading = c.heading;
        rec.selected_ue = c.selected_ue;
        rec.alpha = c.alpha;
        rec.secrecy_bps = info.secrecy_rate;
        rec.propulsion_J = info.propulsion_J;
        rec.compute_J = info.compute_J;
        rec.energy_remaining_J = world_.energy_remaining;
        rec.reward = reward;
        rec.viol_latency = info.violations.latency;
        rec.viol_budget = info.violations.budget;
        rec.displacement = distance(before, world_.uav);
        rec.cascade_abs = std::abs(info.link.cascade_gain);
        rec.phases_valid = std::all_of(world_.phases.begin(), world_.phases.end(),
                                       [](double th) { return th >= 0.0 && th < kTwoPi; });
        log_.slots.push_back(rec);

        StepResult out;
        out.next_state = encode_state(world_, cfg_);
        out.reward = reward;
        out.done = done_;
        out.info = std::move(info);
        return out;
    }

private:
    void place_nodes(std::uint64_t seed)
    {
        const auto& pl = cfg_.placement;
        if (pl.policy == PlacementPolicy::Fixed) {
            world_.ues = pl.ues;
            world_.eves = pl.eves;
            return;
        }
        std::mt19937_64 layout_rng(pl.policy == PlacementPolicy::UniformFixed ? pl.layout_seed : seed);
        std::mt19937_64& g = pl.policy == PlacementPolicy::UniformFixed ? layout_rng : rng_;
        std::uniform_real_distribution<double> ux(0.0, cfg_.area_x);
        std::uniform_real_distribution<double> uy(0.0, cfg_.area_y);
        world_.ues.resize(static_cast<std::size_t>(cfg_.num_ues));
        world_.eves.resize(static_cast<std::size_t>(cfg_.num_eves));
        for (auto& p : world_.ues)
            p = {ux(g), uy(g), 0.0};
        for (auto& p : world_.eves)
            p = {ux(g), uy(g), 0.0};
    }

    void move_ues()
    {
        std::normal_distribution<double> n(0.0, cfg_.mobility_step);
        for (auto& p : world_.ues) {
            p.x = std::clamp(p.x + n(rng_), 0.0, cfg_.area_x);
            p.y = std::clamp(p.y + n(rng_), 0.0, cfg_.area_y);
        }
    }

    ScenarioConfig cfg_;
    WorldSnapshot world_;
    EpisodeLog log_;
    std::mt19937_64 rng_;
    double abs_reward_sum_ = 0.0;
    bool done_ = false;
    bool started_ = false;
};

inline constexpr const char* kSlotCsvHeader =
    "episode,slot,x,y,z,speed,heading,selected_ue,alpha,secrecy_bps,propulsion_J,compute_J,"
    "energy_remaining_J,reward,viol_latency,viol_budget,config_hash,seed";

inline void write_slot_rows(std::ostream& os, const EpisodeLog& log, const std::string& config_hash,
                            std::uint64_t seed)
{
    char buf[512];
    for (const auto& r : log.slots) {
        std::snprintf(buf, sizeof buf,
                      "%d,%d,%.10g,%.10g,%.10g,%.10g,%.10g,%d,%.10g,%.10g,%.10g,%.10g,%.12g,%.10g,%d,%d,",
                      r.episode, r.slot, r.uav.x, r.uav.y, r.uav.z, r.speed, r.heading, r.selected_ue,
                      r.alpha, r.secrecy_bps, r.propulsion_J, r.compute_J, r.energy_remaining_J,
                      r.reward, r.viol_latency ? 1 : 0, r.viol_budget ? 1 : 0);
        os << buf << config_hash << ',' << seed << '\n';
    }
}

} // namespace risamec
