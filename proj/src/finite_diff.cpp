#include "diffconst/finite_diff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace diffconst::ad {

double max_relative_error(std::span<const double> analytic, std::span<const double> numeric) {
    if (analytic.size() != numeric.size()) throw GradError("max_relative_error: size mismatch");
    double worst = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        const double err = std::fabs(analytic[i] - numeric[i]) / std::max(std::fabs(analytic[i]), 1e-8);
        worst = std::max(worst, err);
    }
    return worst;
}

std::vector<double> central_difference(const std::function<double(std::span<const double>)>& f,
                                       std::span<const double> x, double h, bool scale_step) {
    std::vector<double> probe(x.begin(), x.end());
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double step = scale_step ? h * std::max(std::fabs(x[i]), 1.0) : h;
        probe[i] = x[i] + step;
        const double fp = f(probe);
        probe[i] = x[i] - step;
        const double fm = f(probe);
        probe[i] = x[i];
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            throw GradError("finite_diff_check: non-finite value at probe " + std::to_string(i));
        }
        out[i] = (fp - fm) / (2.0 * step);
    }
    return out;
}

std::vector<double> richardson_gradient(const std::function<long double(std::span<const long double>)>& f,
                                        std::span<const double> x, double h) {
    std::vector<long double> probe(x.begin(), x.end());
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        auto diff = [&](long double step) {
            probe[i] = static_cast<long double>(x[i]) + step;
            const long double fp = f(probe);
            probe[i] = static_cast<long double>(x[i]) - step;
            const long double fm = f(probe);
            probe[i] = static_cast<long double>(x[i]);
            if (!std::isfinite(static_cast<double>(fp)) || !std::isfinite(static_cast<double>(fm))) {
                throw GradError("richardson_gradient: non-finite value at probe " + std::to_string(i));
            }
            return (fp - fm) / (2.0L * step);
        };
        const long double coarse = diff(h);
        const long double fine = diff(0.5L * h);
        out[i] = static_cast<double>((4.0L * fine - coarse) / 3.0L);
    }
    return out;
}

double finite_diff_check(const TapeFunction& f, std::span<const double> x, double h) {
    Tape tape;
    const std::vector<Var> params = tape.seed(x);
    const Var out = f(params);
    const std::vector<double> analytic = tape.gradient(out);

    auto plain = [&f](std::span<const double> p) {
        std::vector<Var> constants(p.begin(), p.end());
        return f(constants).value();
    };
    const std::vector<double> numeric = central_difference(plain, x, h);
    return max_relative_error(analytic, numeric);
}

}  // namespace diffconst::ad
