#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "risamec/channel.hpp"
#include "risamec/energy.hpp"

namespace risamec {

// Carries every offending field so callers can report them all at once.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<std::string> problems)
        : std::runtime_error(join(problems)), problems_(std::move(problems))
    {
    }

    const std::vector<std::string>& problems() const { return problems_; }

private:
    static std::string join(const std::vector<std::string>& p)
    {
        std::string s = "invalid configuration:";
        for (const auto& x : p)
            s += "\n  " + x;
        return s;
    }

    std::vector<std::string> problems_;
};

enum class PlacementPolicy {
    UniformPerEpisode, // redrawn from every reset seed
    UniformFixed,      // drawn once from layout_seed, identical for every episode
    Fixed,             // explicit lists
};

struct Placement {
    PlacementPolicy policy = PlacementPolicy::UniformPerEpisode;
    std::uint64_t layout_seed = 1;
    std::vector<Position3D> ues;
    std::vector<Position3D> eves;
};

struct TaskSampling {
    double cycles_per_bit = 1e3;
    double data_bits_min = 512e3;
    double data_bits_max = 1024e3;
    double deadline = 30.0;
};

struct PenaltyWeights {
    double latency = 0.1; // fraction of running mean |reward| per violating slot
    double budget = 0.1;
};

struct ScenarioConfig {
    double area_x = 600.0;
    double area_y = 400.0;
    int num_ues = 6;
    int num_eves = 3;
    int episode_slots = 200;
    double initial_energy = 140e3;
    double operating_altitude = 60.0;
    double climb_rate = 5.0;
    double start_x = 0.0;
    double start_y = 0.0;

    Placement placement;
    RisGeometry ris;
    RfParams rf;
    LosConstants los;
    UavPowerParams power;
    ComputeParams compute;
    TaskSampling tasks;

    bool stochastic_los = false;
    bool binary_offload = false;
    bool ue_mobility = false;
    double mobility_step = 1.0; // m per slot, per axis standard deviation
    bool vertical_control = false;
    double max_vertical_speed = 5.0;
    double min_altitude = 30.0;
    double max_altitude = 120.0;

    PenaltyWeights penalty;
    double reward_scale = 1e-3;

    int num_elements() const { return ris.num_elements; }
    int state_size() const { return 2 * ris.num_elements + 8; }
    int action_size() const { return 2 * ris.num_elements + 4 + (vertical_control ? 1 : 0); }

    std::vector<std::string> problems() const
    {
        std::vector<std::string> bad;
        auto need = [&bad](bool ok, const char* field) {
            if (!ok)
                bad.emplace_back(field);
        };
        need(area_x > 0.0, "area_x must be > 0");
        need(area_y > 0.0, "area_y must be > 0");
        need(num_ues >= 1, "num_ues must be >= 1");
        need(num_eves >= 0, "num_eves must be >= 0");
        need(episode_slots >= 1, "episode_slots must be >= 1");
        need(initial_energy > 0.0, "initial_energy must be > 0");
        need(operating_altitude > 0.0, "operating_altitude must be > 0");
        need(climb_rate > 0.0, "climb_rate must be > 0");
        need(start_x >= 0.0 && start_x <= area_x, "start_x must lie inside the area");
        need(start_y >= 0.0 && start_y <= area_y, "start_y must lie inside the area");
        need(ris.num_elements >= 1, "ris.num_elements must be >= 1");
        need(is_finite(ris.position) && ris.position.z >= 0.0, "ris.position must be finite with z >= 0");
        need(rf.bandwidth_ue > 0.0, "rf.bandwidth_ue must be > 0");
        need(rf.bandwidth_eve > 0.0, "rf.bandwidth_eve must be > 0");
        need(rf.tx_power_ue > 0.0, "rf.tx_power_ue must be > 0");
        need(rf.eve_power > 0.0, "rf.eve_power must be > 0");
        need(rf.noise_var > 0.0, "rf.noise_var must be > 0");
        need(rf.noise_var_eve > 0.0, "rf.noise_var_eve must be > 0");
        need(rf.ref_pathloss > 0.0, "rf.ref_pathloss must be > 0");
        need(rf.ris_ref_pathloss > 0.0, "rf.ris_ref_pathloss must be > 0");
        need(rf.eve_ref_pathloss > 0.0, "rf.eve_ref_pathloss must be > 0");
        need(rf.carrier_freq > 0.0, "rf.carrier_freq must be > 0");
        need(los.env_C > 0.0, "los.env_C must be > 0");
        need(los.env_B > 0.0, "los.env_B must be > 0");
        need(power.blade_power > 0.0, "power.blade_power must be > 0");
        need(power.induced_power > 0.0, "power.induced_power must be > 0");
        need(power.vertical_power > 0.0, "power.vertical_power must be > 0");
        need(power.tip_speed > 0.0, "power.tip_speed must be > 0");
        need(power.rotor_induced_velocity > 0.0, "power.rotor_induced_velocity must be > 0");
        need(power.fuselage_drag_ratio > 0.0, "power.fuselage_drag_ratio must be > 0");
        need(power.air_density > 0.0, "power.air_density must be > 0");
        need(power.rotor_solidity > 0.0, "power.rotor_solidity must be > 0");
        need(power.rotor_disc_area > 0.0, "power.rotor_disc_area must be > 0");
        need(power.max_speed > 0.0, "power.max_speed must be > 0");
        need(power.slot_duration > 0.0, "power.slot_duration must be > 0");
        need(compute.ue_cpu_rate > 0.0, "compute.ue_cpu_rate must be > 0");
        need(compute.amec_cpu_rate > 0.0, "compute.amec_cpu_rate must be > 0");
        need(compute.switched_capacitance > 0.0, "compute.switched_capacitance must be > 0");
        need(compute.exponent >= 1.0, "compute.exponent must be >= 1");
        need(tasks.cycles_per_bit > 0.0, "tasks.cycles_per_bit must be > 0");
        need(tasks.data_bits_min > 0.0 && tasks.data_bits_max >= tasks.data_bits_min,
             "tasks.data_bits_min/max must satisfy 0 < min <= max");
        need(tasks.deadline > 0.0, "tasks.deadline must be > 0");
        need(penalty.latency >= 0.0, "penalty.latency must be >= 0");
        need(penalty.budget >= 0.0, "penalty.budget must be >= 0");
        need(reward_scale > 0.0, "reward_scale must be > 0");
        need(mobility_step >= 0.0, "mobility_step must be >= 0");
        if (vertical_control) {
            need(max_vertical_speed > 0.0, "max_vertical_speed must be > 0");
            need(min_altitude > 0.0 && max_altitude >= min_altitude,
                 "min_altitude/max_altitude must satisfy 0 < min <= max");
        }
        if (placement.policy == PlacementPolicy::Fixed) {
            need(placement.ues.size() == static_cast<std::size_t>(num_ues),
                 "placement.ues must list num_ues positions");
            need(placement.eves.size() == static_cast<std::size_t>(num_eves),
                 "placement.eves must list num_eves positions");
            auto inside = [this](const Position3D& p) {
                return is_finite(p) && p.x >= 0.0 && p.x <= area_x && p.y >= 0.0 && p.y <= area_y
                    && p.z == 0.0;
            };
            for (const auto& p : placement.ues)
                need(inside(p), "placement.ues entries must be ground points inside the area");
            for (const auto& p : placement.eves)
                need(inside(p), "placement.eves entries must be ground points inside the area");
        }
        return bad;
    }

    void validate() const
    {
        auto bad = problems();
        if (!bad.empty())
            throw ConfigError(std::move(bad));
    }

    /// Table I values: K = 6, E = 3,
    /// O = 64, N = 200, 140 kJ.
    static ScenarioConfig table1() { return ScenarioConfig{}; }

    /// Table I with its 750-slot episode length.
    static ScenarioConfig table1_750()
    {
        ScenarioConfig c;
        c.episode_slots = 750;
        return c;
    }

    /// Small scenario for laptop-scale training runs.
    static ScenarioConfig desk()
    {
        ScenarioConfig c;
        c.ris.num_elements = 8;
        c.num_ues = 2;
        c.num_eves = 1;
        c.episode_slots = 100;
        c.placement.policy = PlacementPolicy::UniformFixed;
        return c;
    }
};

} // namespace risamec
