#pragma once

// Small problems and helpers shared by the unit and acceptance tests.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "diffconst/objective.hpp"

namespace diffconst::testing {

/// Satellites with every element free: shape, inclination, RAAN, argp, MA.
/// Initial eccentricities are drawn from [1e-3, e_max]; e_max <= 0.5 keeps
/// the excess inside its bound.
struct RandomProblem {
    Problem problem;
    std::vector<double> theta;
};

inline RandomProblem random_problem(std::uint32_t seed, int sats, int steps, int targets, double e_max = 0.5) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    RandomProblem out;
    Problem& p = out.problem;
    const double rp_min = 300.0, rp_max = 1500.0, dr_max = 20000.0;
    for (int i = 0; i < sats; ++i) {
        const std::string name = "sat" + std::to_string(i);
        const auto [rp_slot, dr_slot] = p.spec.add_shape(name, rp_min, rp_max, dr_max);
        SatelliteParams s;
        s.perigee_slot = rp_slot;
        s.excess_slot = dr_slot;
        s.inc = ElementSource::from_slot(p.spec.add_interval(name + ".inc", 0.0, kPi));
        s.raan = ElementSource::from_slot(p.spec.add_periodic(name + ".raan"));
        s.argp = ElementSource::from_slot(p.spec.add_periodic(name + ".argp"));
        s.ma = ElementSource::from_slot(p.spec.add_periodic(name + ".ma"));
        p.spec.add_satellite(s);

        const double rp = rp_min + (rp_max - rp_min) * (0.05 + 0.9 * u(rng));
        const double e = std::max(1e-3, e_max * u(rng));
        const double a = (kEarthRadius + rp) / (1.0 - e);
        out.theta.push_back(inverse_interval(rp, rp_min, rp_max));
        out.theta.push_back(inverse_interval(2.0 * a * e, 0.0, dr_max));
        out.theta.push_back(inverse_interval((10.0 + 160.0 * u(rng)) * kDeg, 0.0, kPi));
        for (int k = 0; k < 3; ++k) out.theta.push_back(kTwoPi * u(rng));
    }
    std::vector<GroundTarget> tg;
    for (int j = 0; j < targets; ++j) {
        tg.push_back(GroundTargetSet::make_target(std::asin(2.0 * u(rng) - 1.0), kTwoPi * u(rng), 0.5 + u(rng)));
    }
    p.targets = GroundTargetSet(tg);
    p.window.steps = steps;
    p.threads = 1;
    return out;
}

/// Gradient of the straight-line reference loss by Richardson-extrapolated
/// central differences in long double.
std::vector<double> oracle_gradient(const Problem& p, std::span<const double> theta);

/// Largest |g - ref| / |g| over coordinates with |g| > floor.
inline double worst_relative_error(std::span<const double> g, std::span<const double> ref, double floor = 1e-8) {
    double worst = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (std::fabs(g[i]) <= floor) continue;
        worst = std::max(worst, std::fabs(g[i] - ref[i]) / std::fabs(g[i]));
    }
    return worst;
}

/// Brute-force worst gap: the longest stretch since the last covered step
/// (or the window start) ending at an uncovered step.
inline double brute_force_worst_gap(const std::vector<std::uint8_t>& covered, double dt) {
    double worst = 0.0;
    for (std::size_t t = 1; t < covered.size(); ++t) {
        if (covered[t]) continue;
        std::size_t last = t;
        while (last > 0 && !covered[last]) --last;
        worst = std::max(worst, static_cast<double>(t - last) * dt);
    }
    return worst;
}

}  // namespace diffconst::testing
