#pragma once

// Earth rotation, ground targets and elevation geometry on a spherical Earth.

#include <cmath>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "diffconst/orbits.hpp"
#include "diffconst/scalar.hpp"
#include "diffconst/time.hpp"

namespace diffconst {

inline constexpr double kEarthRotationRate = 7.2921158553e-5;  // rad/s

class GeoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct GroundTarget {
    double lat = 0.0;  // rad
    double lon = 0.0;  // rad
    Vec3<double> ecef{};  // km
    Vec3<double> up{};    // unit local vertical
    double weight = 1.0;
};

class GroundTargetSet {
public:
    GroundTargetSet() = default;
    explicit GroundTargetSet(std::vector<GroundTarget> targets);

    static GroundTarget make_target(double lat_rad, double lon_rad, double weight);

    std::size_t size() const noexcept { return targets_.size(); }
    bool empty() const noexcept { return targets_.empty(); }
    const GroundTarget& operator[](std::size_t j) const { return targets_[j]; }
    const std::vector<GroundTarget>& targets() const noexcept { return targets_; }
    double total_weight() const noexcept { return total_weight_; }
    std::vector<double> weights() const;

    auto begin() const { return targets_.begin(); }
    auto end() const { return targets_.end(); }

private:
    std::vector<GroundTarget> targets_;
    double total_weight_ = 0.0;
};

/// Uniformly spaced sample times over [0, horizon] with K >= 2 samples.
struct SimWindow {
    double horizon_s = 86400.0;
    int steps = 240;
    UtcInstant epoch{};
    double gmst_offset = 0.0;  // rad

    void validate() const;
    double step_s() const { return horizon_s / (steps - 1); }
    double step_min() const { return step_s() / 60.0; }
    double time(int k) const { return k * step_s(); }
    std::vector<double> times() const;
};

/// Sidereal angle at epoch from the IAU-1982 GMST polynomial, rad in [0, 2pi).
double gmst_at_epoch(const UtcInstant& epoch);

/// wrap(gmst_at_epoch + omega_earth * dt + offset).
double gmst(const UtcInstant& epoch, double dt, double offset = 0.0);

/// Rotation about +z taking inertial coordinates into the Earth-fixed frame:
/// a body at fixed inertial longitude appears to drift westward.
template <class T>
Vec3<T> teme_to_ecef(const Vec3<T>& r, double theta) {
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    return {r[0] * c + r[1] * s, r[1] * c - r[0] * s, r[2]};
}

inline Vec3<double> ecef_to_teme(const Vec3<double>& r, double theta) { return teme_to_ecef(r, -theta); }

/// Cell-centred grid over [-lat_max, lat_max] x [0, 360) with cos(lat) weights.
GroundTargetSet latlon_grid(int n_lat = 36, int n_lon = 72, double lat_max_deg = 70.0);

/// CSV with header lat_deg,lon_deg[,weight]; weight defaults to cos(lat).
GroundTargetSet load_targets(const std::filesystem::path& path);
GroundTargetSet parse_targets(std::istream& in, const std::string& source_name = "<stream>");

/// Elevation of a satellite above the local horizon at a ground target, rad.
template <class T>
T elevation(const Vec3<T>& sat_ecef, const GroundTarget& target) {
    using std::asin;
    using std::fabs;
    using std::sqrt;
    const T dx = sat_ecef[0] - T(target.ecef[0]);
    const T dy = sat_ecef[1] - T(target.ecef[1]);
    const T dz = sat_ecef[2] - T(target.ecef[2]);
    const T range2 = dx * dx + dy * dy + dz * dz;
    if (!(value_of(range2) > 0.0)) throw GeoError("elevation: satellite coincides with the target");
    const T along = dx * T(target.up[0]) + dy * T(target.up[1]) + dz * T(target.up[2]);
    T s = along / sqrt(range2);
    const double sv = static_cast<double>(value_of(s));
    if (sv > 1.0 || sv < -1.0) s = s * T(1.0 / std::fabs(sv));
    return asin(s);
}

}  // namespace diffconst
