#pragma once

// Parameter packing and the combined relaxed loss.
//
// The optimizer works on an unconstrained vector theta. A ParamSpec says how
// every orbital element of every satellite is obtained from theta: a fixed
// value, a periodic slot read as-is (radians), an interval slot mapped
// through a scaled sigmoid, or the coupled (perigee altitude, excess
// altitude) pair that produces a and e. Satellites that read the same slot
// form a share group; the slot's gradient is the sum of their partials and
// plane_average_grads turns it into their mean.

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "diffconst/earthgeo.hpp"
#include "diffconst/metrics.hpp"
#include "diffconst/orbits.hpp"
#include "diffconst/scalar.hpp"

namespace diffconst {

class SpecError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class SlotKind { periodic, interval, perigee, excess };

const char* to_string(SlotKind kind);
SlotKind slot_kind_from_string(const std::string& name);

/// One unconstrained optimizer variable. Interval bounds are in element
/// units (rad for angles); perigee bounds are altitudes in km, excess uses
/// [0, upper].
struct SlotDef {
    std::string name;
    SlotKind kind = SlotKind::periodic;
    double lower = 0.0;
    double upper = 0.0;
};

/// Where one element comes from: a fixed value or a slot index.
struct ElementSource {
    int slot = -1;
    double value = 0.0;

    static ElementSource fixed(double v) { return {-1, v}; }
    static ElementSource from_slot(int s) { return {s, 0.0}; }
    bool is_fixed() const { return slot < 0; }
};

struct SatelliteParams {
    // Orbital shape: fixed (a, e) unless both shape slots are set.
    double a = kEarthRadius + 550.0;
    double e = 0.0;
    int perigee_slot = -1;
    int excess_slot = -1;
    ElementSource inc = ElementSource::fixed(0.0);
    ElementSource raan = ElementSource::fixed(0.0);
    ElementSource argp = ElementSource::fixed(0.0);
    ElementSource ma = ElementSource::fixed(0.0);
    int plane = 0;

    bool has_shape_slots() const { return perigee_slot >= 0; }
};

class ParamSpec {
public:
    int add_slot(SlotDef def);
    int add_periodic(const std::string& name) { return add_slot({name, SlotKind::periodic, 0.0, 0.0}); }
    int add_interval(const std::string& name, double lower, double upper) {
        return add_slot({name, SlotKind::interval, lower, upper});
    }
    /// Perigee altitude in [rp_min, rp_max] km and excess in [0, excess_max];
    /// returns (perigee slot, excess slot).
    std::pair<int, int> add_shape(const std::string& name, double rp_min, double rp_max, double excess_max);

    void add_satellite(const SatelliteParams& sat);

    std::size_t slot_count() const { return slots_.size(); }
    std::size_t satellite_count() const { return sats_.size(); }
    const std::vector<SlotDef>& slots() const { return slots_; }
    const std::vector<SatelliteParams>& satellites() const { return sats_; }
    int slot_index(const std::string& name) const;

    /// Number of satellites reading each slot.
    std::vector<int> member_counts() const;

    /// Throws SpecError on dangling slot references, kind mismatches, bad
    /// bounds or slots that no satellite reads.
    void validate() const;

private:
    std::vector<SlotDef> slots_;
    std::vector<SatelliteParams> sats_;
};

/// l + (u - l) * sigmoid(theta).
template <class T>
T apply_interval(const T& theta, double lower, double upper) {
    return T(lower) + T(upper - lower) * sigmoid(theta);
}

/// d/dtheta of apply_interval.
inline double apply_interval_derivative(double theta, double lower, double upper) {
    const double s = sigmoid(theta);
    return (upper - lower) * s * (1.0 - s);
}

/// Inverse of apply_interval for x strictly inside (lower, upper).
double inverse_interval(double x, double lower, double upper);

struct ShapeBounds {
    double rp_min = 400.0;
    double rp_max = 600.0;
    double excess_max = 1500.0;
};

/// (a, e) from the perigee/excess pair: rp = rp_min + (rp_max - rp_min)
/// sigma(theta_rp), dr = dr_max sigma(theta_dr), a = R + rp + dr / 2,
/// e = dr / (2 a).
template <class T>
std::pair<T, T> apply_perigee_excess(const T& theta_rp, const T& theta_dr, const ShapeBounds& b) {
    const T rp = apply_interval(theta_rp, b.rp_min, b.rp_max);
    const T dr = T(b.excess_max) * sigmoid(theta_dr);
    const T a = T(kEarthRadius) + rp + dr / T(2);
    const T e = dr / (T(2) * a);
    return {a, e};
}

/// Value of the mapped slot for element consumption.
template <class T>
T slot_value(const SlotDef& def, const T& theta) {
    if (def.kind == SlotKind::interval) return apply_interval(theta, def.lower, def.upper);
    return theta;
}

template <class T>
std::vector<Elements<T>> unpack(const ParamSpec& spec, std::span<const T> theta) {
    if (theta.size() != spec.slot_count()) {
        throw SpecError("unpack: theta has " + std::to_string(theta.size()) + " entries, spec has " +
                        std::to_string(spec.slot_count()) + " slots");
    }
    const auto& slots = spec.slots();
    auto read = [&](const ElementSource& src) -> T {
        if (src.is_fixed()) return T(src.value);
        const auto s = static_cast<std::size_t>(src.slot);
        return slot_value(slots[s], theta[s]);
    };
    std::vector<Elements<T>> out;
    out.reserve(spec.satellite_count());
    for (const SatelliteParams& sat : spec.satellites()) {
        Elements<T> el;
        if (sat.has_shape_slots()) {
            const SlotDef& rp = slots[static_cast<std::size_t>(sat.perigee_slot)];
            const SlotDef& dr = slots[static_cast<std::size_t>(sat.excess_slot)];
            const auto [a, e] = apply_perigee_excess(theta[static_cast<std::size_t>(sat.perigee_slot)],
                                                     theta[static_cast<std::size_t>(sat.excess_slot)],
                                                     ShapeBounds{rp.lower, rp.upper, dr.upper});
            el.a = a;
            el.e = e;
        } else {
            el.a = T(sat.a);
            el.e = T(sat.e);
        }
        el.inc = read(sat.inc);
        el.raan = read(sat.raan);
        el.argp = read(sat.argp);
        el.ma = read(sat.ma);
        out.push_back(el);
    }
    return out;
}

/// Plain-value elements with the given epoch.
std::vector<ElementSet> unpack_elements(const ParamSpec& spec, std::span<const double> theta,
                                        const UtcInstant& epoch = {});

/// Slot gradient divided by the number of satellites reading the slot.
std::vector<double> plane_average_grads(std::span<const double> grads, const ParamSpec& spec);

/// Everything a loss evaluation needs besides theta.
struct Problem {
    ParamSpec spec;
    GroundTargetSet targets;
    SimWindow window;
    RelaxConfig relax;
    int threads = 0;
};

struct LossResult {
    double loss = 0.0;
    double soft_coverage = 0.0;
    double soft_revisit_min = 0.0;
    std::vector<double> grad;  // empty when not requested
};

/// Relaxed loss L = -w_c C~ + lambda D~ and, optionally, its gradient over
/// all slots (not plane-averaged).
LossResult loss(const Problem& problem, std::span<const double> theta, bool with_gradient = true);

struct HardEvaluation {
    double fitness = 0.0;  // -C + lambda * D
    double coverage = 0.0;
    double revisit_min = 0.0;
};

/// Hard fitness used by the black-box baselines.
HardEvaluation hard_evaluate(const Problem& problem, std::span<const double> theta);

/// Hard and soft metrics of theta.
MetricsReport evaluate_report(const Problem& problem, std::span<const double> theta);

/// Earth-fixed track of theta over the problem window.
EcefTrack track_of(const Problem& problem, std::span<const double> theta);

/// The relaxed loss written as one straight-line computation on T, without
/// the fused kernel. Used as an independent reference for the gradient.
template <class T>
T reference_loss(const Problem& problem, std::span<const T> theta) {
    using std::log;
    const auto els = unpack<T>(problem.spec, theta);
    const SimWindow& w = problem.window;
    const std::size_t n = els.size();
    const std::size_t k = static_cast<std::size_t>(w.steps);
    std::vector<Vec3<T>> ecef(n * k);
    for (std::size_t i = 0; i < n; ++i) {
        const Propagator<T> prop(els[i]);
        for (std::size_t t = 0; t < k; ++t) {
            const double dt = w.time(static_cast<int>(t));
            ecef[i * k + t] = teme_to_ecef(prop.position(dt), gmst(w.epoch, dt, w.gmst_offset));
        }
    }
    const RelaxConfig& rc = problem.relax;
    const double wtot = problem.targets.total_weight();
    const double to_deg = 180.0 / kPi;
    T cov_total(0), rev_total(0);
    std::vector<T> cov_col(n), rev_col(n), cov_series(k), rev_series(k);
    for (const GroundTarget& g : problem.targets) {
        for (std::size_t t = 0; t < k; ++t) {
            for (std::size_t i = 0; i < n; ++i) {
                const T alpha = elevation(ecef[i * k + t], g) * T(to_deg);
                cov_col[i] = soft_visibility(alpha, rc.alpha_min_deg, rc.tau_cov_deg);
                rev_col[i] = soft_visibility(alpha, rc.alpha_min_deg, rc.tau_rev_deg);
            }
            cov_series[t] = noisy_or<T>(cov_col);
            rev_series[t] = noisy_or<T>(rev_col);
        }
        T c(0);
        for (const T& v : cov_series) c = c + v;
        const std::vector<T> gaps = leaky_gaps<T>(rev_series, w.step_min());
        cov_total = cov_total + T(g.weight) * c;
        rev_total = rev_total + T(g.weight) * lse_softmax<T>(gaps, rc.beta_min);
    }
    const T cov = cov_total / T(wtot * static_cast<double>(k));
    const T rev = rev_total / T(wtot);
    return T(-rc.coverage_weight) * cov + T(rc.lambda) * rev;
}

}  // namespace diffconst
