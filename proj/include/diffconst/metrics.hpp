#pragma once

// Coverage and revisit metrics.
//
// Hard metrics follow the discrete definitions: a target is covered at a
// step when any satellite is at or above the minimum elevation, the revisit
// gap is the time since the last covered step (or since t0 if there was
// none), and the worst-case gap is its maximum over the window. The relaxed
// metrics replace the step by a sigmoid in elevation, the OR by noisy-OR,
// the gap recurrence by a multiplicative leaky integrator and the max by
// LogSumExp. All target means are weight-normalised sums.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "diffconst/earthgeo.hpp"
#include "diffconst/scalar.hpp"

namespace diffconst {

class MetricsError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Relaxation temperatures and loss weights. Angles in degrees, beta in
/// minutes.
struct RelaxConfig {
    double tau_cov_deg = 2.0;
    double tau_rev_deg = 2.0;
    double beta_min = 10.0;
    double lambda = 0.1;
    double alpha_min_deg = 10.0;
    /// Multiplier on the -C term; 0 drops coverage from the loss.
    double coverage_weight = 1.0;

    void validate() const;
    bool shared_tau() const { return tau_cov_deg == tau_rev_deg; }
};

struct MetricsReport {
    double hard_coverage = 0.0;     // fraction in [0, 1]
    double hard_revisit_min = 0.0;  // mean worst-case gap
    double soft_coverage = 0.0;
    double soft_revisit_min = 0.0;
};

// ---- relaxations and their equivalent forms ------------------------------

/// sigma((alpha - alpha_min) / tau); all angles in the same unit.
template <class T>
T soft_visibility(const T& alpha, double alpha_min, double tau) {
    return sigmoid((alpha - T(alpha_min)) / T(tau));
}

template <class T>
T tanh_visibility(const T& alpha, double alpha_min, double tau) {
    using std::tanh;
    return (T(1) + tanh((alpha - T(alpha_min)) / T(2.0 * tau))) / T(2);
}

/// 1 - prod(1 - c_i).
template <class T>
T noisy_or(std::span<const T> values) {
    T miss(1);
    for (const T& c : values) miss = miss * (T(1) - c);
    return T(1) - miss;
}

/// gap_0 = 0, gap_k = (gap_{k-1} + dt) * (1 - C_k).
template <class T>
std::vector<T> leaky_gaps(std::span<const T> coverage, double dt) {
    if (!(dt > 0.0)) throw MetricsError("leaky_gaps: dt must be positive");
    std::vector<T> gaps;
    gaps.reserve(coverage.size());
    if (coverage.empty()) return gaps;
    gaps.push_back(T(0));
    for (std::size_t k = 1; k < coverage.size(); ++k) gaps.push_back((gaps.back() + T(dt)) * (T(1) - coverage[k]));
    return gaps;
}

/// beta * log(sum exp(x / beta)), shifted by the maximum for range safety.
template <class T>
T lse_softmax(std::span<const T> values, double beta) {
    using std::exp;
    using std::log;
    if (!(beta > 0.0)) throw MetricsError("lse_softmax: beta must be positive");
    if (values.empty()) throw MetricsError("lse_softmax: empty input");
    double shift = static_cast<double>(value_of(values[0]));
    for (const T& v : values) shift = std::max(shift, static_cast<double>(value_of(v)));
    T sum(0);
    for (const T& v : values) sum = sum + exp((v - T(shift)) / T(beta));
    return T(shift) + T(beta) * log(sum);
}

/// (1 / omega) log(mean exp(omega x)) with omega = 1 / beta.
template <class T>
T mellowmax(std::span<const T> values, double beta) {
    using std::exp;
    using std::log;
    if (!(beta > 0.0)) throw MetricsError("mellowmax: beta must be positive");
    if (values.empty()) throw MetricsError("mellowmax: empty input");
    double shift = static_cast<double>(value_of(values[0]));
    for (const T& v : values) shift = std::max(shift, static_cast<double>(value_of(v)));
    T sum(0);
    for (const T& v : values) sum = sum + exp((v - T(shift)) / T(beta));
    return T(shift) + T(beta) * log(sum / T(static_cast<double>(values.size())));
}

// ---- tensors ---------------------------------------------------------------

/// Visibility values indexed (satellite i, target j, step k), k fastest.
class VisibilityTensor {
public:
    VisibilityTensor(std::size_t sats, std::size_t targets, std::size_t steps, double fill = 0.0)
        : n_(sats), j_(targets), k_(steps), data_(sats * targets * steps, fill) {}

    std::size_t sats() const noexcept { return n_; }
    std::size_t targets() const noexcept { return j_; }
    std::size_t steps() const noexcept { return k_; }

    double& operator()(std::size_t i, std::size_t j, std::size_t k) { return data_[(i * j_ + j) * k_ + k]; }
    double operator()(std::size_t i, std::size_t j, std::size_t k) const { return data_[(i * j_ + j) * k_ + k]; }

    bool is_binary() const;

private:
    std::size_t n_, j_, k_;
    std::vector<double> data_;
};

/// Per-target, per-step noisy-OR over satellites (J x K, k fastest).
std::vector<double> aggregate_coverage(const VisibilityTensor& v);

double soft_coverage_fraction(const VisibilityTensor& v, std::span<const double> weights);
double soft_mean_worst_revisit(const VisibilityTensor& v, double dt_min, double beta, std::span<const double> weights);

/// Worst hard gap of one binary coverage series; no prior coverage counts
/// from t0.
double worst_gap(std::span<const std::uint8_t> covered, double dt);

struct HardMetrics {
    double coverage = 0.0;
    double revisit_min = 0.0;
};

/// Hard coverage and mean worst-case revisit from a J x K binary matrix.
HardMetrics hard_metrics_from_coverage(std::span<const std::uint8_t> covered, std::size_t targets, std::size_t steps,
                                       double dt_min, std::span<const double> weights);

// ---- metrics from positions -----------------------------------------------

/// Earth-fixed satellite positions, N x K satellite-major, stored as
/// separate coordinate arrays.
struct EcefTrack {
    std::size_t sats = 0;
    std::size_t steps = 0;
    std::vector<double> x, y, z;

    EcefTrack() = default;
    EcefTrack(std::size_t n, std::size_t k) : sats(n), steps(k), x(n * k), y(n * k), z(n * k) {}
    std::size_t index(std::size_t i, std::size_t k) const { return i * steps + k; }
    Vec3<double> at(std::size_t i, std::size_t k) const {
        const std::size_t q = index(i, k);
        return {x[q], y[q], z[q]};
    }
};

/// Propagate and rotate into the Earth-fixed frame over the window.
EcefTrack ecef_track(std::span<const Elements<double>> sats, const SimWindow& window);

HardMetrics hard_metrics(const EcefTrack& track, const GroundTargetSet& targets, const SimWindow& window,
                         double alpha_min_deg, int threads = 0);

/// Per-target number of steps with at least one satellite visible.
std::vector<int> visibility_density(const EcefTrack& track, const GroundTargetSet& targets, double alpha_min_deg,
                                    int threads = 0);

/// Hard visibility predicate used by the hard metrics.
bool hard_visible(const Vec3<double>& sat_ecef, const GroundTarget& target, double alpha_min_deg);

/// Output of the fused relaxed-metric kernel.
struct RelaxedEvaluation {
    double loss = 0.0;
    double soft_coverage = 0.0;
    double soft_revisit_min = 0.0;
    /// dL/dr in the Earth-fixed frame, N x K satellite-major (empty when no
    /// gradient was requested).
    std::vector<double> gx, gy, gz;
};

/// Relaxed coverage, revisit and loss L = -w_c * C + lambda * D, with the
/// adjoint with respect to every satellite position when `with_gradient`.
/// The result does not depend on the thread count.
RelaxedEvaluation relaxed_metrics(const EcefTrack& track, const GroundTargetSet& targets, double dt_min,
                                  const RelaxConfig& relax, bool with_gradient, int threads = 0);

MetricsReport full_metrics(const EcefTrack& track, const GroundTargetSet& targets, const SimWindow& window,
                           const RelaxConfig& relax, int threads = 0);

}  // namespace diffconst
