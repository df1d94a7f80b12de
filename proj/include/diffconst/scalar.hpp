#pragma once

// Plain-real counterparts of the differentiable operations, shared by the
// templated pipeline so that double, long double and ad::Var instantiations
// evaluate identical expressions.

#include <cmath>
#include <numbers>

namespace diffconst {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;
inline constexpr double kDeg = std::numbers::pi / 180.0;

/// |x| beyond which the asin derivative is held constant.
inline constexpr double kAsinClamp = 1.0 - 1e-12;

inline double value_of(double x) noexcept { return x; }
inline long double value_of(long double x) noexcept { return x; }

template <class T>
T sigmoid(T x) {
    using std::exp;
    if (x >= T(0)) {
        return T(1) / (T(1) + exp(-x));
    }
    const T ex = exp(x);
    return ex / (T(1) + ex);
}

/// Derivative of asin with the argument clamped away from +-1.
template <class T>
T asin_derivative(T x) {
    using std::sqrt;
    const T lim = T(kAsinClamp);
    T xc = x;
    if (xc > lim) xc = lim;
    if (xc < -lim) xc = -lim;
    return T(1) / sqrt(T(1) - xc * xc);
}

inline double wrap_two_pi(double angle) {
    double w = std::fmod(angle, kTwoPi);
    if (w < 0.0) w += kTwoPi;
    if (w >= kTwoPi) w -= kTwoPi;
    return w;
}

inline double wrap_degrees(double deg) {
    double w = std::fmod(deg, 360.0);
    if (w < 0.0) w += 360.0;
    if (w >= 360.0) w -= 360.0;
    return w;
}

}  // namespace diffconst
