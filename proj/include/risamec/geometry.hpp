#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace risamec {

// Error raised for coincident nodes and other degenerate geometry.
class GeometryError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Raised when a vector does not have the length the consumer expects.
class ShapeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;
inline constexpr double kSpeedOfLight = 299792458.0;

/// Cartesian position in meters. Ground nodes sit at z = 0.
struct Position3D {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    friend bool operator==(const Position3D&, const Position3D&) = default;
};

inline double horizontal_distance(const Position3D& a, const Position3D& b)
{
    return std::hypot(b.x - a.x, b.y - a.y);
}

inline double distance(const Position3D& a, const Position3D& b)
{
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    const double dz = b.z - a.z;
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

inline bool is_finite(const Position3D& p)
{
    return std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z);
}

// Distance that refuses to be zero; the channel formulas divide by it.
inline double checked_distance(const Position3D& a, const Position3D& b, const char* what)
{
    const double d = distance(a, b);
    if (!(d > 0.0))
        throw GeometryError(std::string("coincident positions: ") + what);
    return d;
}

// Wraps an angle into [0, 2pi).
inline double wrap_phase(double theta)
{
    double t = std::fmod(theta, kTwoPi);
    if (t < 0.0)
        t += kTwoPi;
    // fmod of a tiny negative value can round up to exactly 2pi
    if (t >= kTwoPi)
        t = 0.0;
    return t;
}

} // namespace risamec
