#include "diffconst/objective.hpp"

#include <cmath>

#include "diffconst/tape.hpp"

namespace diffconst {

const char* to_string(SlotKind kind) {
    switch (kind) {
        case SlotKind::periodic: return "periodic";
        case SlotKind::interval: return "interval";
        case SlotKind::perigee: return "perigee";
        case SlotKind::excess: return "excess";
    }
    return "?";
}

SlotKind slot_kind_from_string(const std::string& name) {
    if (name == "periodic") return SlotKind::periodic;
    if (name == "interval") return SlotKind::interval;
    if (name == "perigee") return SlotKind::perigee;
    if (name == "excess") return SlotKind::excess;
    throw SpecError("unknown slot kind '" + name + "'");
}

int ParamSpec::add_slot(SlotDef def) {
    slots_.push_back(std::move(def));
    return static_cast<int>(slots_.size()) - 1;
}

std::pair<int, int> ParamSpec::add_shape(const std::string& name, double rp_min, double rp_max, double excess_max) {
    const int rp = add_slot({name + ".perigee", SlotKind::perigee, rp_min, rp_max});
    const int dr = add_slot({name + ".excess", SlotKind::excess, 0.0, excess_max});
    return {rp, dr};
}

void ParamSpec::add_satellite(const SatelliteParams& sat) { sats_.push_back(sat); }

int ParamSpec::slot_index(const std::string& name) const {
    for (std::size_t s = 0; s < slots_.size(); ++s) {
        if (slots_[s].name == name) return static_cast<int>(s);
    }
    throw SpecError("no slot named '" + name + "'");
}

std::vector<int> ParamSpec::member_counts() const {
    std::vector<int> counts(slots_.size(), 0);
    auto bump = [&](int s) {
        if (s >= 0 && static_cast<std::size_t>(s) < counts.size()) ++counts[static_cast<std::size_t>(s)];
    };
    for (const SatelliteParams& sat : sats_) {
        bump(sat.perigee_slot);
        bump(sat.excess_slot);
        bump(sat.inc.slot);
        bump(sat.raan.slot);
        bump(sat.argp.slot);
        bump(sat.ma.slot);
    }
    return counts;
}

void ParamSpec::validate() const {
    if (sats_.empty()) throw SpecError("spec has no satellites");
    for (std::size_t s = 0; s < slots_.size(); ++s) {
        const SlotDef& d = slots_[s];
        const std::string where = "slot " + std::to_string(s) + " (" + d.name + ")";
        if (d.kind == SlotKind::interval || d.kind == SlotKind::perigee) {
            if (!std::isfinite(d.lower) || !std::isfinite(d.upper) || !(d.lower < d.upper)) {
                throw SpecError(where + ": bounds must be finite with lower < upper");
            }
        }
        if (d.kind == SlotKind::perigee && !(d.lower > 0.0)) throw SpecError(where + ": perigee altitude must be positive");
        if (d.kind == SlotKind::excess && !(d.upper >= 0.0 && std::isfinite(d.upper))) {
            throw SpecError(where + ": excess bound must be finite and non-negative");
        }
    }
    const auto n = static_cast<int>(slots_.size());
    for (std::size_t i = 0; i < sats_.size(); ++i) {
        const SatelliteParams& sat = sats_[i];
        const std::string where = "satellite " + std::to_string(i);
        auto check = [&](const ElementSource& src, const char* element) {
            if (src.is_fixed()) {
                if (!std::isfinite(src.value)) throw SpecError(where + ": non-finite fixed " + element);
                return;
            }
            if (src.slot >= n) throw SpecError(where + ": " + element + " reads missing slot " + std::to_string(src.slot));
            const SlotKind k = slots_[static_cast<std::size_t>(src.slot)].kind;
            if (k != SlotKind::periodic && k != SlotKind::interval) {
                throw SpecError(where + ": " + element + " cannot read a " + to_string(k) + " slot");
            }
        };
        check(sat.inc, "inclination");
        check(sat.raan, "raan");
        check(sat.argp, "argp");
        check(sat.ma, "mean anomaly");
        if ((sat.perigee_slot >= 0) != (sat.excess_slot >= 0)) {
            throw SpecError(where + ": perigee and excess slots must be given together");
        }
        if (sat.has_shape_slots()) {
            if (sat.perigee_slot >= n || sat.excess_slot >= n ||
                slots_[static_cast<std::size_t>(sat.perigee_slot)].kind != SlotKind::perigee ||
                slots_[static_cast<std::size_t>(sat.excess_slot)].kind != SlotKind::excess) {
                throw SpecError(where + ": shape slots must reference a perigee and an excess slot");
            }
        } else {
            if (!(sat.a > kEarthRadius) || !(sat.e >= 0.0 && sat.e < 1.0) || !(sat.a * (1.0 - sat.e) > kEarthRadius)) {
                throw SpecError(where + ": fixed (a, e) does not give an orbit above the Earth");
            }
        }
    }
    const std::vector<int> counts = member_counts();
    for (std::size_t s = 0; s < counts.size(); ++s) {
        if (counts[s] == 0) throw SpecError("slot " + std::to_string(s) + " (" + slots_[s].name + ") is not read by any satellite");
    }
}

double inverse_interval(double x, double lower, double upper) {
    const double u = (x - lower) / (upper - lower);
    if (!(u > 0.0 && u < 1.0)) throw SpecError("inverse_interval: value outside the open interval");
    return std::log(u / (1.0 - u));
}

std::vector<ElementSet> unpack_elements(const ParamSpec& spec, std::span<const double> theta, const UtcInstant& epoch) {
    const auto els = unpack<double>(spec, theta);
    std::vector<ElementSet> out;
    out.reserve(els.size());
    for (const auto& el : els) {
        ElementSet s;
        static_cast<Elements<double>&>(s) = el;
        s.epoch = epoch;
        out.push_back(s);
    }
    return out;
}

std::vector<double> plane_average_grads(std::span<const double> grads, const ParamSpec& spec) {
    if (grads.size() != spec.slot_count()) throw SpecError("plane_average_grads: gradient length does not match the spec");
    const std::vector<int> counts = spec.member_counts();
    std::vector<double> out(grads.begin(), grads.end());
    for (std::size_t s = 0; s < out.size(); ++s) {
        if (counts[s] > 1) out[s] /= counts[s];
    }
    return out;
}

namespace {

// Earth-fixed positions on the tape for every (satellite, step).
std::vector<ad::Var> tape_track(const Problem& p, std::span<const ad::Var> theta, EcefTrack& track) {
    const auto els = unpack<ad::Var>(p.spec, theta);
    const SimWindow& w = p.window;
    const std::size_t k = static_cast<std::size_t>(w.steps);
    track = EcefTrack(els.size(), k);
    std::vector<double> angle(k);
    for (std::size_t t = 0; t < k; ++t) angle[t] = gmst(w.epoch, w.time(static_cast<int>(t)), w.gmst_offset);
    std::vector<ad::Var> out(3 * els.size() * k);
    for (std::size_t i = 0; i < els.size(); ++i) {
        const Propagator<ad::Var> prop(els[i]);
        for (std::size_t t = 0; t < k; ++t) {
            const Vec3<ad::Var> r = teme_to_ecef(prop.position(w.time(static_cast<int>(t))), angle[t]);
            const std::size_t q = track.index(i, t);
            track.x[q] = r[0].value();
            track.y[q] = r[1].value();
            track.z[q] = r[2].value();
            out[3 * q] = r[0];
            out[3 * q + 1] = r[1];
            out[3 * q + 2] = r[2];
        }
    }
    return out;
}

}  // namespace

EcefTrack track_of(const Problem& problem, std::span<const double> theta) {
    const auto els = unpack<double>(problem.spec, theta);
    return ecef_track(els, problem.window);
}

LossResult loss(const Problem& problem, std::span<const double> theta, bool with_gradient) {
    LossResult res;
    if (!with_gradient) {
        const EcefTrack track = track_of(problem, theta);
        const RelaxedEvaluation ev =
            relaxed_metrics(track, problem.targets, problem.window.step_min(), problem.relax, false, problem.threads);
        res.loss = ev.loss;
        res.soft_coverage = ev.soft_coverage;
        res.soft_revisit_min = ev.soft_revisit_min;
        return res;
    }
    ad::Tape tape;
    const std::vector<ad::Var> vars = tape.seed(theta);
    EcefTrack track;
    const std::vector<ad::Var> pos = tape_track(problem, vars, track);
    const RelaxedEvaluation ev =
        relaxed_metrics(track, problem.targets, problem.window.step_min(), problem.relax, true, problem.threads);
    std::vector<double> weights(pos.size());
    for (std::size_t q = 0; q < ev.gx.size(); ++q) {
        weights[3 * q] = ev.gx[q];
        weights[3 * q + 1] = ev.gy[q];
        weights[3 * q + 2] = ev.gz[q];
    }
    res.grad = tape.gradient(pos, weights);
    res.loss = ev.loss;
    res.soft_coverage = ev.soft_coverage;
    res.soft_revisit_min = ev.soft_revisit_min;
    return res;
}

HardEvaluation hard_evaluate(const Problem& problem, std::span<const double> theta) {
    const EcefTrack track = track_of(problem, theta);
    const HardMetrics h = hard_metrics(track, problem.targets, problem.window, problem.relax.alpha_min_deg, problem.threads);
    return {-h.coverage + problem.relax.lambda * h.revisit_min, h.coverage, h.revisit_min};
}

MetricsReport evaluate_report(const Problem& problem, std::span<const double> theta) {
    const EcefTrack track = track_of(problem, theta);
    return full_metrics(track, problem.targets, problem.window, problem.relax, problem.threads);
}

}  // namespace diffconst
