#pragma once

// Radio-link quantities for the RIS-assisted uplink: probabilistic LoS
// air-to-ground channel, ULA steering vectors, the UE -> RIS -> UAV cascade,
// and the legitimate, wiretap and secrecy rates.

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <span>
#include <vector>

#include "risamec/geometry.hpp"

namespace risamec {

using Complex = std::complex<double>;

struct RfParams {
    double bandwidth_ue = 1e6;     // B_k, Hz
    double bandwidth_eve = 1e6;    // B_e, Hz
    double tx_power_ue = 1e-3;     // P_k, W
    double eve_power = 1e-3;       // P_e, W
    double noise_var = 1e-12;      // receiver noise at the UAV, W
    double noise_var_eve = 1e-12;  // receiver noise at the eavesdropper, W
    double ref_pathloss = 1e-7;    // gamma_0, direct UE-UAV link at 1 m
    double ris_ref_pathloss = 1e-7; // lambda_0, per RIS segment at 1 m
    double eve_ref_pathloss = 1e-7; // gamma_e0
    double carrier_freq = 3.2e9;   // Hz

    double wavelength() const { return kSpeedOfLight / carrier_freq; }
};

// Sigmoid constants of the elevation-angle LoS model (urban by default).
struct LosConstants {
    double env_C = 9.61;
    double env_B = 0.16;
};

struct RisGeometry {
    Position3D position{200.0, 200.0, 20.0};
    int num_elements = 64;
    double element_spacing = 0.0; // <= 0 means half a wavelength
};

struct RisConfig {
    RisGeometry geometry;
    std::vector<double> phases; // radians, each in [0, 2pi)

    int num_elements() const { return geometry.num_elements; }
};

struct LinkState {
    double los_prob = 0.0;
    Complex cascade_gain{0.0, 0.0};
    double effective_gain = 0.0;
    double legit_rate = 0.0;
    std::vector<double> eve_rates;
    double secrecy_rate = 0.0;
};

inline double element_spacing(const RisGeometry& ris, const RfParams& rf)
{
    return ris.element_spacing > 0.0 ? ris.element_spacing : 0.5 * rf.wavelength();
}

/// Elevation angle in degrees seen from a ground node towards the UAV.
/// Directly overhead (zero horizontal distance) is defined as 90.
inline double elevation_angle(const Position3D& uav, const Position3D& ground)
{
    if (!(uav.z > 0.0))
        throw GeometryError("elevation_angle: UAV altitude must be positive");
    const double r = horizontal_distance(uav, ground);
    if (r == 0.0)
        return 90.0;
    return (180.0 / kPi) * std::atan(uav.z / r);
}

inline double los_probability(double theta_deg, const LosConstants& c)
{
    return 1.0 / (1.0 + c.env_C * std::exp(-c.env_B * (theta_deg - c.env_C)));
}

/// Angle of departure of the segment a -> b relative to the ULA axis (x).
inline double angle_of_departure(const Position3D& a, const Position3D& b)
{
    return std::atan2(b.x - a.x, distance(a, b));
}

/// ULA response sqrt(lambda_0)/d^2 * exp(-j 2pi/lambda * m * spacing * sin(aod)), m = 0..n-1.
inline std::vector<Complex> steering_vector(double dist, double aod, int num_elements,
                                            double spacing, const RfParams& rf)
{
    if (!(dist > 0.0))
        throw GeometryError("steering_vector: distance must be positive");
    if (num_elements < 1)
        throw ShapeError("steering_vector: need at least one element");
    const double amplitude = std::sqrt(rf.ris_ref_pathloss) / (dist * dist);
    const double step = -kTwoPi / rf.wavelength() * spacing * std::sin(aod);
    std::vector<Complex> out(static_cast<std::size_t>(num_elements));
    out[0] = Complex(amplitude, 0.0);
    for (int m = 1; m < num_elements; ++m)
        out[static_cast<std::size_t>(m)] = std::polar(amplitude, step * m);
    return out;
}

struct CascadeSegments {
    std::vector<Complex> ue_to_ris;
    std::vector<Complex> ris_to_uav;
};

inline CascadeSegments cascade_segments(const Position3D& ue, const RisGeometry& ris,
                                        const Position3D& uav, const RfParams& rf)
{
    const double d_ur = checked_distance(ue, ris.position, "UE/RIS");
    const double d_ra = checked_distance(ris.position, uav, "RIS/UAV");
    checked_distance(ue, uav, "UE/UAV");
    const double spacing = element_spacing(ris, rf);
    return {steering_vector(d_ur, angle_of_departure(ue, ris.position), ris.num_elements, spacing, rf),
            steering_vector(d_ra, angle_of_departure(ris.position, uav), ris.num_elements, spacing, rf)};
}

/// sum_o u_o e^{j theta_o} v_o over the UE->RIS and RIS->UAV segments.
inline Complex cascade_gain(const Position3D& ue, const RisConfig& ris, const Position3D& uav,
                            const RfParams& rf)
{
    if (ris.phases.size() != static_cast<std::size_t>(ris.num_elements()))
        throw ShapeError("cascade_gain: phase vector length differs from element count");
    const auto seg = cascade_segments(ue, ris.geometry, uav, rf);
    Complex sum{0.0, 0.0};
    for (std::size_t o = 0; o < seg.ue_to_ris.size(); ++o)
        sum += seg.ue_to_ris[o] * std::polar(1.0, ris.phases[o]) * seg.ris_to_uav[o];
    return sum;
}

/// Phases that rotate every cascade summand onto the positive real axis.
inline std::vector<double> phase_alignment_oracle(const Position3D& ue, const RisGeometry& ris,
                                                  const Position3D& uav, const RfParams& rf)
{
    const auto seg = cascade_segments(ue, ris, uav, rf);
    std::vector<double> phases(seg.ue_to_ris.size());
    for (std::size_t o = 0; o < phases.size(); ++o)
        phases[o] = wrap_phase(-std::arg(seg.ue_to_ris[o] * seg.ris_to_uav[o]));
    return phases;
}

/// LoS-weighted mixture of the cascaded power gain and the direct NLoS gain.
/// `los_override` pins the LoS weight (Bernoulli draws, tests).
inline LinkState effective_gain(const Position3D& ue, const RisConfig& ris, const Position3D& uav,
                                const RfParams& rf, const LosConstants& los,
                                std::optional<double> los_override = std::nullopt)
{
    LinkState link;
    const double d_ua = checked_distance(ue, uav, "UE/UAV");
    link.los_prob = los_override ? *los_override : los_probability(elevation_angle(uav, ue), los);
    link.cascade_gain = cascade_gain(ue, ris, uav, rf);
    link.effective_gain = link.los_prob * std::norm(link.cascade_gain)
                        + (1.0 - link.los_prob) * rf.ref_pathloss / (d_ua * d_ua);
    return link;
}

inline double legit_rate(const RfParams& rf, double gain)
{
    return rf.bandwidth_ue * std::log2(1.0 + rf.tx_power_ue / rf.noise_var * gain);
}

inline double eve_rate(const RfParams& rf, const Position3D& ue, const Position3D& eve)
{
    const double d = checked_distance(ue, eve, "UE/eavesdropper");
    const double snr = rf.eve_power * rf.eve_ref_pathloss / (rf.noise_var_eve * d * d);
    return rf.bandwidth_eve * std::log2(1.0 + snr);
}

inline double secrecy_rate(double legit, std::span<const double> eve_rates)
{
    double worst = 0.0;
    for (double r : eve_rates)
        worst = std::max(worst, r);
    return std::max(legit - worst, 0.0);
}

/// Full per-slot link evaluation for one served UE against every eavesdropper.
inline LinkState evaluate_link(const Position3D& ue, std::span<const Position3D> eves,
                               const RisConfig& ris, const Position3D& uav, const RfParams& rf,
                               const LosConstants& los, std::optional<double> los_override = std::nullopt)
{
    LinkState link = effective_gain(ue, ris, uav, rf, los, los_override);
    link.legit_rate = legit_rate(rf, link.effective_gain);
    link.eve_rates.reserve(eves.size());
    for (const auto& e : eves)
        link.eve_rates.push_back(eve_rate(rf, ue, e));
    link.secrecy_rate = secrecy_rate(link.legit_rate, link.eve_rates);
    return link;
}

} // namespace risamec
