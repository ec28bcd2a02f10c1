#pragma once

// Rotary-wing propulsion, offloading latency, computation energy and the
// secrecy-energy-efficiency ratio.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace risamec {

class ObjectiveError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class VerticalPowerMode {
    ClimbOnly, // iota_v * max(v_v, 0)
    Signed,    // iota_v * v_v
};

struct UavPowerParams {
    double blade_power = 79.4;           // iota_c, W
    double induced_power = 89.4;         // iota_h, W
    double vertical_power = 11.46;       // iota_v, W per m/s
    double tip_speed = 120.0;            // m/s
    double rotor_induced_velocity = 4.0; // nu_o, m/s
    double fuselage_drag_ratio = 0.6;
    double air_density = 0.051;
    double rotor_solidity = 23.0;
    double rotor_disc_area = 0.5;        // m^2
    double max_speed = 10.0;             // m/s
    double slot_duration = 0.5;          // s
    VerticalPowerMode vertical_mode = VerticalPowerMode::ClimbOnly;

    // Canonical rotary-wing constants for a physically plausible airframe.
    static UavPowerParams physical()
    {
        UavPowerParams p;
        p.blade_power = 79.86;
        p.induced_power = 88.63;
        p.rotor_induced_velocity = 4.03;
        p.air_density = 1.225;
        p.rotor_solidity = 0.05;
        p.rotor_disc_area = 0.503;
        return p;
    }
};

struct Task {
    double cycles_per_bit = 1e3;
    double data_bits = 1e6; // D_k
    double deadline = 30.0; // T_k, s

    double total_cycles() const { return cycles_per_bit * data_bits; }
};

struct ComputeParams {
    double ue_cpu_rate = 1e8;              // c^U, cycles/s
    double amec_cpu_rate = 1e9;            // c^A, cycles/s
    double amec_cycle_budget = 0.0;        // tau^U; <= 0 means cycles_per_bit * sum_k D_k
    double switched_capacitance = 1e-28;   // G
    double exponent = 3.0;                 // chi
};

struct PropulsionTerms {
    double blade = 0.0;
    double parasite = 0.0;
    double induced = 0.0;
    double vertical = 0.0;

    double total() const { return blade + parasite + induced + vertical; }
};

inline PropulsionTerms propulsion_terms(double v_h, double v_v, const UavPowerParams& p)
{
    PropulsionTerms t;
    const double v2 = v_h * v_h;
    const double vo2 = p.rotor_induced_velocity * p.rotor_induced_velocity;
    t.blade = p.blade_power * (1.0 + 3.0 * v2 / (p.tip_speed * p.tip_speed));
    t.parasite = 0.5 * p.fuselage_drag_ratio * p.air_density * p.rotor_solidity * p.rotor_disc_area
               * v2 * v_h;
    t.induced = p.induced_power
              * std::sqrt(std::sqrt(1.0 + v2 * v2 / (4.0 * vo2 * vo2)) - v2 / (2.0 * vo2));
    const double climb = p.vertical_mode == VerticalPowerMode::ClimbOnly ? std::max(v_v, 0.0) : v_v;
    t.vertical = p.vertical_power * climb;
    return t;
}

/// Propulsion power in W at horizontal speed v_h and vertical speed v_v.
inline double propulsion_power(double v_h, double v_v, const UavPowerParams& p)
{
    return propulsion_terms(v_h, v_v, p).total();
}

inline double propulsion_energy(double v_h, double v_v, const UavPowerParams& p)
{
    return p.slot_duration * propulsion_power(v_h, v_v, p);
}

/// Task completion time for offloading fraction alpha. An offloaded share
/// with zero secure rate can never finish: +infinity.
inline double offload_latency(double alpha, const Task& task, const ComputeParams& cp,
                              double avg_secrecy_rate)
{
    const double cycles = task.total_cycles();
    const double local = (1.0 - alpha) * cycles / cp.ue_cpu_rate;
    if (alpha == 0.0)
        return local;
    if (!(avg_secrecy_rate > 0.0))
        return std::numeric_limits<double>::infinity();
    return local + alpha * (cycles / cp.amec_cpu_rate + task.data_bits / avg_secrecy_rate);
}

inline double compute_energy_amec(double alpha, const Task& task, const ComputeParams& cp)
{
    return alpha * cp.switched_capacitance * std::pow(cp.amec_cpu_rate, cp.exponent - 1.0)
         * task.total_cycles();
}

inline double compute_energy_ue(double alpha, const Task& task, const ComputeParams& cp,
                                double tx_power, double avg_secrecy_rate)
{
    const double local = (1.0 - alpha) * cp.switched_capacitance
                       * std::pow(cp.ue_cpu_rate, cp.exponent - 1.0) * task.total_cycles();
    if (alpha == 0.0)
        return local;
    if (!(avg_secrecy_rate > 0.0))
        return std::numeric_limits<double>::infinity();
    return alpha * task.data_bits / avg_secrecy_rate * tx_power + local;
}

/// AMEC energy for executing the cycles of `bits` delivered bits.
inline double compute_energy_for_bits(double bits, double cycles_per_bit, const ComputeParams& cp)
{
    return cp.switched_capacitance * std::pow(cp.amec_cpu_rate, cp.exponent - 1.0) * cycles_per_bit
         * bits;
}

/// Secrecy energy efficiency: summed secrecy rate over consumed energy.
inline double see_objective(double sum_secrecy, double total_propulsion, double total_amec_compute)
{
    const double denom = total_propulsion + total_amec_compute;
    if (!(denom > 0.0))
        throw ObjectiveError("see_objective: energy denominator must be positive");
    return sum_secrecy / denom;
}

} // namespace risamec
