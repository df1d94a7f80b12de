#include "diffconst/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "diffconst/parallel.hpp"

namespace diffconst {

void RelaxConfig::validate() const {
    if (!(tau_cov_deg > 0.0) || !(tau_rev_deg > 0.0)) throw MetricsError("RelaxConfig: temperatures must be positive");
    if (!(beta_min > 0.0)) throw MetricsError("RelaxConfig: beta must be positive");
    if (!(lambda >= 0.0)) throw MetricsError("RelaxConfig: lambda must be non-negative");
    if (!(alpha_min_deg > -90.0 && alpha_min_deg < 90.0)) throw MetricsError("RelaxConfig: alpha_min out of range");
}

bool VisibilityTensor::is_binary() const {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return v == 0.0 || v == 1.0; });
}

std::vector<double> aggregate_coverage(const VisibilityTensor& v) {
    std::vector<double> out(v.targets() * v.steps());
    std::vector<double> column(v.sats());
    for (std::size_t j = 0; j < v.targets(); ++j) {
        for (std::size_t k = 0; k < v.steps(); ++k) {
            for (std::size_t i = 0; i < v.sats(); ++i) column[i] = v(i, j, k);
            out[j * v.steps() + k] = noisy_or<double>(column);
        }
    }
    return out;
}

namespace {

void check_weights(std::span<const double> weights, std::size_t targets, const char* op) {
    if (weights.size() != targets) {
        throw MetricsError(std::string(op) + ": " + std::to_string(weights.size()) + " weights for " +
                           std::to_string(targets) + " targets");
    }
}

double weight_sum(std::span<const double> weights) {
    double w = 0.0;
    for (double x : weights) w += x;
    if (!(w > 0.0)) throw MetricsError("total target weight must be positive");
    return w;
}

}  // namespace

double soft_coverage_fraction(const VisibilityTensor& v, std::span<const double> weights) {
    check_weights(weights, v.targets(), "soft_coverage_fraction");
    const double wsum = weight_sum(weights);
    const std::vector<double> cov = aggregate_coverage(v);
    double total = 0.0;
    for (std::size_t j = 0; j < v.targets(); ++j) {
        double row = 0.0;
        for (std::size_t k = 0; k < v.steps(); ++k) row += cov[j * v.steps() + k];
        total += weights[j] * row;
    }
    return total / (wsum * static_cast<double>(v.steps()));
}

double soft_mean_worst_revisit(const VisibilityTensor& v, double dt_min, double beta, std::span<const double> weights) {
    check_weights(weights, v.targets(), "soft_mean_worst_revisit");
    const double wsum = weight_sum(weights);
    const std::vector<double> cov = aggregate_coverage(v);
    double total = 0.0;
    for (std::size_t j = 0; j < v.targets(); ++j) {
        const std::span<const double> series(cov.data() + j * v.steps(), v.steps());
        const std::vector<double> gaps = leaky_gaps<double>(series, dt_min);
        total += weights[j] * lse_softmax<double>(gaps, beta);
    }
    return total / wsum;
}

double worst_gap(std::span<const std::uint8_t> covered, double dt) {
    double gap = 0.0;
    double worst = 0.0;
    for (std::size_t k = 1; k < covered.size(); ++k) {
        gap = covered[k] ? 0.0 : gap + dt;
        worst = std::max(worst, gap);
    }
    return worst;
}

HardMetrics hard_metrics_from_coverage(std::span<const std::uint8_t> covered, std::size_t targets, std::size_t steps,
                                       double dt_min, std::span<const double> weights) {
    if (covered.size() != targets * steps) throw MetricsError("hard_metrics: coverage matrix has the wrong size");
    check_weights(weights, targets, "hard_metrics");
    const double wsum = weight_sum(weights);
    double cov = 0.0;
    double rev = 0.0;
    for (std::size_t j = 0; j < targets; ++j) {
        const std::span<const std::uint8_t> series(covered.data() + j * steps, steps);
        std::size_t count = 0;
        for (std::uint8_t c : series) count += c ? 1u : 0u;
        cov += weights[j] * static_cast<double>(count);
        rev += weights[j] * worst_gap(series, dt_min);
    }
    return {cov / (wsum * static_cast<double>(steps)), rev / wsum};
}

EcefTrack ecef_track(std::span<const Elements<double>> sats, const SimWindow& window) {
    window.validate();
    EcefTrack track(sats.size(), static_cast<std::size_t>(window.steps));
    std::vector<double> theta(static_cast<std::size_t>(window.steps));
    for (int k = 0; k < window.steps; ++k) {
        theta[static_cast<std::size_t>(k)] = gmst(window.epoch, window.time(k), window.gmst_offset);
    }
    for (std::size_t i = 0; i < sats.size(); ++i) {
        const Propagator<double> prop(sats[i]);
        for (std::size_t k = 0; k < track.steps; ++k) {
            const Vec3<double> r = teme_to_ecef(prop.position(window.time(static_cast<int>(k))), theta[k]);
            const std::size_t q = track.index(i, k);
            track.x[q] = r[0];
            track.y[q] = r[1];
            track.z[q] = r[2];
        }
    }
    return track;
}

bool hard_visible(const Vec3<double>& sat, const GroundTarget& target, double alpha_min_deg) {
    const double sm = std::sin(alpha_min_deg * kDeg);
    const double c = sat[0] * target.up[0] + sat[1] * target.up[1] + sat[2] * target.up[2];
    const double r2 = sat[0] * sat[0] + sat[1] * sat[1] + sat[2] * sat[2];
    const double u = c - kEarthRadius;
    const double d2 = r2 + kEarthRadius * kEarthRadius - 2.0 * kEarthRadius * c;
    if (sm >= 0.0) return u >= 0.0 && u * u >= sm * sm * d2;
    return u >= 0.0 || u * u <= sm * sm * d2;
}

namespace {

constexpr std::size_t kTargetChunk = 64;

// covered[k] for one target, k in [0, K).
void covered_series(const EcefTrack& track, const std::vector<double>& r2, const GroundTarget& target, double sm,
                    std::uint8_t* covered) {
    const std::size_t steps = track.steps;
    const double ux = target.up[0], uy = target.up[1], uz = target.up[2];
    const double R = kEarthRadius;
    const double R2 = R * R;
    const double s2 = sm * sm;
    std::fill(covered, covered + steps, std::uint8_t{0});
    for (std::size_t i = 0; i < track.sats; ++i) {
        const double* x = track.x.data() + i * steps;
        const double* y = track.y.data() + i * steps;
        const double* z = track.z.data() + i * steps;
        const double* rr = r2.data() + i * steps;
        if (sm >= 0.0) {
            for (std::size_t k = 0; k < steps; ++k) {
                const double c = x[k] * ux + y[k] * uy + z[k] * uz;
                const double u = c - R;
                const double d2 = rr[k] + R2 - 2.0 * R * c;
                covered[k] |= static_cast<std::uint8_t>((u >= 0.0) & (u * u >= s2 * d2));
            }
        } else {
            for (std::size_t k = 0; k < steps; ++k) {
                const double c = x[k] * ux + y[k] * uy + z[k] * uz;
                const double u = c - R;
                const double d2 = rr[k] + R2 - 2.0 * R * c;
                covered[k] |= static_cast<std::uint8_t>((u >= 0.0) | (u * u <= s2 * d2));
            }
        }
    }
}

std::vector<double> radius_squared(const EcefTrack& track) {
    std::vector<double> r2(track.x.size());
    for (std::size_t q = 0; q < r2.size(); ++q) r2[q] = track.x[q] * track.x[q] + track.y[q] * track.y[q] + track.z[q] * track.z[q];
    return r2;
}

// Targets bucketed on a lat/lon grid of their local verticals, so each
// satellite step only tests the buckets its visibility cap can reach.
struct TargetBuckets {
    static constexpr double kCell = 5.0 * kDeg;
    int n_lat = 0;
    int n_lon = 0;
    std::vector<std::vector<std::uint32_t>> cells;

    explicit TargetBuckets(const GroundTargetSet& targets)
        : n_lat(static_cast<int>(std::ceil(kPi / kCell))), n_lon(static_cast<int>(std::ceil(kTwoPi / kCell))) {
        cells.resize(static_cast<std::size_t>(n_lat * n_lon));
        for (std::size_t j = 0; j < targets.size(); ++j) {
            const Vec3<double>& u = targets[j].up;
            const double lat = std::asin(std::clamp(u[2], -1.0, 1.0));
            const double lon = std::atan2(u[1], u[0]);
            cells[static_cast<std::size_t>(lat_cell(lat) * n_lon + lon_cell(lon))].push_back(static_cast<std::uint32_t>(j));
        }
    }
    int lat_cell(double lat) const { return std::clamp(static_cast<int>(std::floor((lat + 0.5 * kPi) / kCell)), 0, n_lat - 1); }
    int lon_cell(double lon) const {
        const int c = static_cast<int>(std::floor((lon + kPi) / kCell));
        return ((c % n_lon) + n_lon) % n_lon;
    }
};

// Same predicate as covered_series, visited satellite step by satellite step.
void culled_columns(const EcefTrack& track, const std::vector<double>& r2, const GroundTargetSet& targets,
                    const TargetBuckets& buckets, double alpha_min_rad, std::size_t k0, std::size_t k1,
                    std::uint8_t* covered) {
    const double R = kEarthRadius;
    const double R2 = R * R;
    const double sm = std::sin(alpha_min_rad);
    const double s2 = sm * sm;
    const double cos_alpha = std::cos(alpha_min_rad);
    const double margin = 0.5 * kDeg;
    const std::size_t steps = track.steps;
    for (std::size_t i = 0; i < track.sats; ++i) {
        for (std::size_t k = k0; k < k1; ++k) {
            const std::size_t q = track.index(i, k);
            const double x = track.x[q], y = track.y[q], z = track.z[q];
            const double r = std::sqrt(r2[q]);
            if (!(r > R) || R * cos_alpha >= r) continue;
            const double rho = std::acos(R * cos_alpha / r) - alpha_min_rad + margin;
            const double lat = std::asin(std::clamp(z / r, -1.0, 1.0));
            const double lon = std::atan2(y, x);
            const int la0 = buckets.lat_cell(lat - rho);
            const int la1 = buckets.lat_cell(lat + rho);
            int lo0 = 0;
            int span = buckets.n_lon;
            const double cl = std::cos(lat);
            if (lat + rho < 0.5 * kPi && lat - rho > -0.5 * kPi && std::sin(rho) < cl) {
                const double hw = std::asin(std::sin(rho) / cl);
                lo0 = buckets.lon_cell(lon - hw);
                span = std::min(buckets.n_lon, static_cast<int>(std::floor((lon + hw + kPi) / TargetBuckets::kCell)) -
                                                   static_cast<int>(std::floor((lon - hw + kPi) / TargetBuckets::kCell)) + 1);
            }
            for (int a = la0; a <= la1; ++a) {
                for (int b = 0; b < span; ++b) {
                    const int cell = a * buckets.n_lon + (lo0 + b) % buckets.n_lon;
                    for (std::uint32_t j : buckets.cells[static_cast<std::size_t>(cell)]) {
                        const Vec3<double>& u = targets[j].up;
                        const double c = x * u[0] + y * u[1] + z * u[2];
                        const double uu = c - R;
                        const double d2 = r2[q] + R2 - 2.0 * R * c;
                        if (uu >= 0.0 && uu * uu >= s2 * d2) covered[j * steps + k] = 1;
                    }
                }
            }
        }
    }
}

std::vector<std::uint8_t> coverage_matrix(const EcefTrack& track, const GroundTargetSet& targets, double alpha_min_deg,
                                          int threads) {
    const double sm = std::sin(alpha_min_deg * kDeg);
    const std::vector<double> r2 = radius_squared(track);
    std::vector<std::uint8_t> covered(targets.size() * track.steps, 0);
    if (sm >= 0.0 && alpha_min_deg < 90.0) {
        const TargetBuckets buckets(targets);
        constexpr std::size_t kStepChunk = 16;
        const std::size_t chunks = (track.steps + kStepChunk - 1) / kStepChunk;
        parallel_for(chunks, threads, [&](std::size_t c) {
            culled_columns(track, r2, targets, buckets, alpha_min_deg * kDeg, c * kStepChunk,
                           std::min(track.steps, (c + 1) * kStepChunk), covered.data());
        });
        return covered;
    }
    const std::size_t chunks = (targets.size() + kTargetChunk - 1) / kTargetChunk;
    parallel_for(chunks, threads, [&](std::size_t c) {
        const std::size_t j1 = std::min(targets.size(), (c + 1) * kTargetChunk);
        for (std::size_t j = c * kTargetChunk; j < j1; ++j) {
            covered_series(track, r2, targets[j], sm, covered.data() + j * track.steps);
        }
    });
    return covered;
}

}  // namespace

HardMetrics hard_metrics(const EcefTrack& track, const GroundTargetSet& targets, const SimWindow& window,
                         double alpha_min_deg, int threads) {
    if (track.steps != static_cast<std::size_t>(window.steps)) throw MetricsError("hard_metrics: track/window step mismatch");
    const std::vector<std::uint8_t> covered = coverage_matrix(track, targets, alpha_min_deg, threads);
    const std::vector<double> w = targets.weights();
    return hard_metrics_from_coverage(covered, targets.size(), track.steps, window.step_min(), w);
}

std::vector<int> visibility_density(const EcefTrack& track, const GroundTargetSet& targets, double alpha_min_deg,
                                    int threads) {
    const std::vector<std::uint8_t> covered = coverage_matrix(track, targets, alpha_min_deg, threads);
    std::vector<int> counts(targets.size(), 0);
    for (std::size_t j = 0; j < targets.size(); ++j) {
        for (std::size_t k = 0; k < track.steps; ++k) counts[j] += covered[j * track.steps + k];
    }
    return counts;
}

MetricsReport full_metrics(const EcefTrack& track, const GroundTargetSet& targets, const SimWindow& window,
                           const RelaxConfig& relax, int threads) {
    const HardMetrics hard = hard_metrics(track, targets, window, relax.alpha_min_deg, threads);
    const RelaxedEvaluation soft = relaxed_metrics(track, targets, window.step_min(), relax, false, threads);
    return {hard.coverage, hard.revisit_min, soft.soft_coverage, soft.soft_revisit_min};
}

}  // namespace diffconst
