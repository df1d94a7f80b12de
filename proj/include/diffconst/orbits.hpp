#pragma once

// Two-body propagation of osculating elements to inertial positions.
//
// Every routine is templated on the scalar type so the same code runs on
// double, long double and ad::Var. Kepler's equation is solved on plain
// values; the result is re-attached to the differentiable inputs through one
// Newton correction, which carries exactly the implicit-function derivatives
// dE/dM = 1 / (1 - e cos E) and dE/de = sin E / (1 - e cos E).

#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "diffconst/scalar.hpp"
#include "diffconst/time.hpp"

namespace diffconst {

inline constexpr double kMuEarth = 398600.4418;   // km^3/s^2
inline constexpr double kEarthRadius = 6378.137;  // km

class OrbitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

template <class T>
struct Elements {
    T a{};     // semi-major axis, km
    T e{};     // eccentricity
    T inc{};   // inclination, rad
    T raan{};  // rad
    T argp{};  // rad
    T ma{};    // mean anomaly at epoch, rad
};

/// One satellite's osculating elements plus their epoch.
struct ElementSet : Elements<double> {
    UtcInstant epoch{};

    double perigee_radius() const { return a * (1.0 - e); }
    double apogee_radius() const { return a * (1.0 + e); }
};

/// Throws OrbitError unless a > R, 0 <= e < 1, 0 <= i <= pi and the perigee
/// clears the Earth.
void validate(const Elements<double>& el);

template <class T>
using Vec3 = std::array<T, 3>;

template <class T>
struct StateVector {
    Vec3<T> position{};  // km, inertial
    Vec3<T> velocity{};  // km/s, inertial
    double dt = 0.0;     // s since epoch
};

template <class T>
T mean_motion(const T& a) {
    using std::sqrt;
    if (!(value_of(a) > 0.0)) throw OrbitError("mean_motion: semi-major axis must be positive");
    return sqrt(T(kMuEarth) / (a * a * a));
}

inline double orbital_period(double a) { return kTwoPi / mean_motion(a); }

/// Newton iteration on plain values; |E - e sin E - M| < 1e-12 on return.
double solve_kepler_value(double mean_anomaly, double e);

/// Eccentric anomaly with implicit-function derivatives attached.
template <class T>
T solve_kepler(const T& mean_anomaly, const T& e) {
    using std::cos;
    using std::sin;
    const double e0 = solve_kepler_value(static_cast<double>(value_of(mean_anomaly)), static_cast<double>(value_of(e)));
    const T ec(e0);
    return ec + (mean_anomaly - (ec - e * sin(ec))) / (T(1) - e * cos(ec));
}

namespace detail {

template <class T>
struct Perifocal {
    Vec3<T> p;  // unit vector toward perigee
    Vec3<T> q;  // unit vector 90 degrees ahead in the orbit plane
};

// Columns of R_z(raan) R_x(inc) R_z(argp).
template <class T>
Perifocal<T> perifocal_basis(const Elements<T>& el) {
    using std::cos;
    using std::sin;
    const T cO = cos(el.raan), sO = sin(el.raan);
    const T ci = cos(el.inc), si = sin(el.inc);
    const T cw = cos(el.argp), sw = sin(el.argp);
    Perifocal<T> b;
    b.p = {cO * cw - sO * sw * ci, sO * cw + cO * sw * ci, sw * si};
    b.q = {-cO * sw - sO * cw * ci, -sO * sw + cO * cw * ci, cw * si};
    return b;
}

}  // namespace detail

/// Precomputed per-satellite quantities for repeated propagation.
template <class T>
class Propagator {
public:
    explicit Propagator(const Elements<T>& el) : el_(el), basis_(detail::perifocal_basis(el)) {
        using std::sqrt;
        if (!(value_of(el.e) >= 0.0 && value_of(el.e) < 1.0)) {
            throw OrbitError("propagate: eccentricity outside [0, 1): " + std::to_string(static_cast<double>(value_of(el.e))));
        }
        n_ = mean_motion(el.a);
        b_over_a_ = sqrt(T(1) - el.e * el.e);
    }

    StateVector<T> operator()(double dt) const {
        using std::cos;
        using std::sin;
        const T m = el_.ma + n_ * T(dt);
        const T ea = solve_kepler(m, el_.e);
        const T ce = cos(ea), se = sin(ea);
        const T x = el_.a * (ce - el_.e);
        const T y = el_.a * b_over_a_ * se;
        const T rate = n_ / (T(1) - el_.e * ce);  // dE/dt
        const T vx = -el_.a * se * rate;
        const T vy = el_.a * b_over_a_ * ce * rate;
        StateVector<T> s;
        s.dt = dt;
        for (int c = 0; c < 3; ++c) {
            s.position[c] = x * basis_.p[c] + y * basis_.q[c];
            s.velocity[c] = vx * basis_.p[c] + vy * basis_.q[c];
        }
        return s;
    }

    /// Position only; same expressions as operator() without the velocity.
    Vec3<T> position(double dt) const {
        using std::cos;
        using std::sin;
        const T m = el_.ma + n_ * T(dt);
        const T ea = solve_kepler(m, el_.e);
        const T x = el_.a * (cos(ea) - el_.e);
        const T y = el_.a * b_over_a_ * sin(ea);
        Vec3<T> r;
        for (int c = 0; c < 3; ++c) r[c] = x * basis_.p[c] + y * basis_.q[c];
        return r;
    }

    const T& mean_motion_value() const { return n_; }

private:
    Elements<T> el_;
    detail::Perifocal<T> basis_;
    T n_{};
    T b_over_a_{};
};

template <class T>
StateVector<T> propagate(const Elements<T>& el, double dt) {
    return Propagator<T>(el)(dt);
}

/// N x K positions, satellite-major (index i * K + k).
template <class T>
std::vector<Vec3<T>> propagate_batch(std::span<const Elements<T>> sats, std::span<const double> times) {
    if (sats.empty() || times.empty()) throw OrbitError("propagate_batch: empty satellite or time list");
    std::vector<Vec3<T>> out;
    out.reserve(sats.size() * times.size());
    for (std::size_t i = 0; i < sats.size(); ++i) {
        try {
            const Propagator<T> prop(sats[i]);
            for (std::size_t k = 0; k < times.size(); ++k) out.push_back(prop.position(times[k]));
        } catch (const std::exception& ex) {
            throw OrbitError("propagate_batch: satellite " + std::to_string(i) + ": " + ex.what());
        }
    }
    return out;
}

}  // namespace diffconst
