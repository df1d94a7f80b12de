#pragma once

#include <functional>
#include <span>
#include <vector>

#include "diffconst/tape.hpp"

namespace diffconst::ad {

/// A scalar function written once against Var; evaluating it on constant
/// Vars gives the plain value, on seeded Vars it records a tape.
using TapeFunction = std::function<Var(std::span<const Var>)>;

/// |analytic - numeric| / max(|analytic|, 1e-8), maximised over coordinates.
double max_relative_error(std::span<const double> analytic, std::span<const double> numeric);

/// Central differences of a plain function at step h (per coordinate
/// h * max(|x_i|, 1) when `scale_step` is set).
std::vector<double> central_difference(const std::function<double(std::span<const double>)>& f,
                                       std::span<const double> x, double h, bool scale_step = false);

/// Central differences of a long-double function at steps h and h/2,
/// combined by Richardson extrapolation (error O(h^4)). Used as the
/// high-accuracy oracle for the loss gradient.
std::vector<double> richardson_gradient(const std::function<long double(std::span<const long double>)>& f,
                                        std::span<const double> x, double h);

/// Tape gradient of f at x versus central differences at step h; returns the
/// maximum relative error. Throws GradError if f is non-finite at a probe.
double finite_diff_check(const TapeFunction& f, std::span<const double> x, double h);

}  // namespace diffconst::ad
