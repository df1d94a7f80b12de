#include "diffconst/orbits.hpp"

#include <cmath>
#include <sstream>

namespace diffconst {

void validate(const Elements<double>& el) {
    std::ostringstream why;
    if (!(el.a > kEarthRadius)) {
        why << "semi-major axis " << el.a << " km is not above the Earth radius";
    } else if (!(el.e >= 0.0 && el.e < 1.0)) {
        why << "eccentricity " << el.e << " outside [0, 1)";
    } else if (!(el.inc >= 0.0 && el.inc <= kPi)) {
        why << "inclination " << el.inc << " rad outside [0, pi]";
    } else if (!(el.a * (1.0 - el.e) > kEarthRadius)) {
        why << "perigee radius " << el.a * (1.0 - el.e) << " km is below the Earth radius";
    } else if (!std::isfinite(el.raan) || !std::isfinite(el.argp) || !std::isfinite(el.ma)) {
        why << "non-finite angle";
    } else {
        return;
    }
    throw OrbitError("invalid elements: " + why.str());
}

double solve_kepler_value(double mean_anomaly, double e) {
    constexpr int kMaxIterations = 50;
    constexpr double kTolerance = 1e-12;

    if (!std::isfinite(mean_anomaly) || !(e >= 0.0 && e < 1.0)) {
        std::ostringstream msg;
        msg << "solve_kepler: invalid input M=" << mean_anomaly << " e=" << e;
        throw OrbitError(msg.str());
    }
    const double turns = std::round(mean_anomaly / kTwoPi);
    const double m = mean_anomaly - turns * kTwoPi;

    // f(E) = E - e sin E - m is increasing; the root lies in [m - e, m + e].
    double lo = m - e;
    double hi = m + e;
    double ea = m + e * std::sin(m);
    for (int it = 0; it < kMaxIterations; ++it) {
        const double f = ea - e * std::sin(ea) - m;
        if (std::fabs(f) < kTolerance * 1e-1) return ea + turns * kTwoPi;
        if (f > 0.0) {
            hi = ea;
        } else {
            lo = ea;
        }
        double next = ea - f / (1.0 - e * std::cos(ea));
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (next == ea) break;
        ea = next;
    }
    const double residual = ea - e * std::sin(ea) - m;
    if (std::fabs(residual) < kTolerance) return ea + turns * kTwoPi;

    std::ostringstream msg;
    msg.precision(17);
    msg << "solve_kepler: no convergence after " << kMaxIterations << " iterations (M=" << mean_anomaly
        << ", e=" << e << ")";
    throw OrbitError(msg.str());
}

}  // namespace diffconst
