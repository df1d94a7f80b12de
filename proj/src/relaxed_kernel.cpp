// Fused forward/adjoint evaluation of the relaxed coverage and revisit
// metrics. Compiled with vectorised libm; see src/CMakeLists.txt.
//
// Per target j the kernel evaluates, for every (satellite i, step k):
//   c = r . up_j,  d = |r - g_j|,  s = (c - R) / d,  alpha = asin(s)
//   v = sigmoid((alpha - alpha_min) / tau)
// then noisy-OR over satellites, the coverage mean, the leaky gap recurrence
// and its LogSumExp, and finally back-propagates into dL/dr. Targets are
// processed in fixed chunks whose partial sums are reduced in chunk order,
// so the result is independent of the number of threads.

#include <algorithm>
#include <cmath>
#include <vector>

#include "diffconst/metrics.hpp"
#include "diffconst/parallel.hpp"

namespace diffconst {

namespace {

constexpr std::size_t kChunk = 64;
constexpr double kRadToDeg = 180.0 / kPi;
constexpr double kLogitClamp = 700.0;

struct Branch {
    std::vector<double> v;     // visibility
    std::vector<double> dv;    // dv/ds
    std::vector<double> pre;   // prod_{i' < i} (1 - v_i'k)
    std::vector<double> miss;  // prod_i (1 - v_ik), length K
    std::vector<double> suf;   // running suffix product, length K

    void resize(std::size_t nk, std::size_t k, bool grad) {
        v.resize(nk);
        pre.resize(nk);
        miss.resize(k);
        suf.resize(k);
        if (grad) dv.resize(nk);
    }
};

struct Scratch {
    std::vector<double> s, dsdc, dsdr2, g;
    Branch cov, rev;
    std::vector<double> gap, adj, bgap;
};

struct ChunkResult {
    double cov_sum = 0.0;
    double rev_sum = 0.0;
    std::vector<double> ax, ay, az, ar2;
};

void visibility(const double* s, const double* asin_s, std::size_t nk, double alpha_min, double inv_tau, bool grad,
                Branch& b) {
    double* v = b.v.data();
    double* dv = grad ? b.dv.data() : nullptr;
    const double lim = 1.0 - kAsinClamp * kAsinClamp;
    if (grad) {
#pragma omp simd
        for (std::size_t q = 0; q < nk; ++q) {
            double t = (asin_s[q] * kRadToDeg - alpha_min) * inv_tau;
            t = std::min(std::max(t, -kLogitClamp), kLogitClamp);
            const double vis = 1.0 / (1.0 + std::exp(-t));
            v[q] = vis;
            const double one_minus = std::max(1.0 - s[q] * s[q], lim);
            dv[q] = vis * (1.0 - vis) * inv_tau * kRadToDeg / std::sqrt(one_minus);
        }
    } else {
#pragma omp simd
        for (std::size_t q = 0; q < nk; ++q) {
            double t = (asin_s[q] * kRadToDeg - alpha_min) * inv_tau;
            t = std::min(std::max(t, -kLogitClamp), kLogitClamp);
            v[q] = 1.0 / (1.0 + std::exp(-t));
        }
    }
}

void noisy_or_products(std::size_t n, std::size_t k, Branch& b) {
    std::fill(b.miss.begin(), b.miss.end(), 1.0);
    double* miss = b.miss.data();
    for (std::size_t i = 0; i < n; ++i) {
        const double* v = b.v.data() + i * k;
        double* pre = b.pre.data() + i * k;
#pragma omp simd
        for (std::size_t t = 0; t < k; ++t) {
            pre[t] = miss[t];
            miss[t] *= 1.0 - v[t];
        }
    }
}

// g[q] += coeff[k] * prod_{i' != i}(1 - v_i'k) * dv[q]
void scatter_noisy_or(std::size_t n, std::size_t k, const double* coeff, Branch& b, double* g) {
    std::fill(b.suf.begin(), b.suf.end(), 1.0);
    double* suf = b.suf.data();
    for (std::size_t i = n; i-- > 0;) {
        const double* v = b.v.data() + i * k;
        const double* pre = b.pre.data() + i * k;
        const double* dv = b.dv.data() + i * k;
        double* gi = g + i * k;
#pragma omp simd
        for (std::size_t t = 0; t < k; ++t) {
            gi[t] += coeff[t] * pre[t] * suf[t] * dv[t];
            suf[t] *= 1.0 - v[t];
        }
    }
}

}  // namespace

RelaxedEvaluation relaxed_metrics(const EcefTrack& track, const GroundTargetSet& targets, double dt_min,
                                  const RelaxConfig& relax, bool with_gradient, int threads) {
    relax.validate();
    if (targets.empty()) throw MetricsError("relaxed_metrics: no targets");
    if (track.sats == 0 || track.steps < 2) throw MetricsError("relaxed_metrics: empty track");
    if (!(dt_min > 0.0)) throw MetricsError("relaxed_metrics: dt must be positive");

    const std::size_t n = track.sats;
    const std::size_t k = track.steps;
    const std::size_t nk = n * k;
    const bool shared = relax.shared_tau();
    const double wtot = targets.total_weight();
    const double beta = relax.beta_min;
    const double inv_tau_cov = 1.0 / relax.tau_cov_deg;
    const double inv_tau_rev = 1.0 / relax.tau_rev_deg;
    const double amin = relax.alpha_min_deg;
    const double R = kEarthRadius;
    const double R2 = R * R;

    std::vector<double> r2(nk);
    for (std::size_t q = 0; q < nk; ++q) r2[q] = track.x[q] * track.x[q] + track.y[q] * track.y[q] + track.z[q] * track.z[q];

    const std::size_t chunks = (targets.size() + kChunk - 1) / kChunk;
    std::vector<ChunkResult> results(chunks);

    parallel_for(chunks, threads, [&](std::size_t chunk) {
        ChunkResult& out = results[chunk];
        Scratch sc;
        sc.s.resize(nk);
        std::vector<double> asin_s(nk);
        sc.cov.resize(nk, k, with_gradient);
        if (!shared) sc.rev.resize(nk, k, with_gradient);
        sc.gap.resize(k);
        if (with_gradient) {
            sc.dsdc.resize(nk);
            sc.dsdr2.resize(nk);
            sc.g.resize(nk);
            sc.adj.resize(k);
            sc.bgap.resize(k);
            out.ax.assign(nk, 0.0);
            out.ay.assign(nk, 0.0);
            out.az.assign(nk, 0.0);
            out.ar2.assign(nk, 0.0);
        }

        const std::size_t j1 = std::min(targets.size(), (chunk + 1) * kChunk);
        for (std::size_t j = chunk * kChunk; j < j1; ++j) {
            const GroundTarget& tgt = targets[j];
            const double ux = tgt.up[0], uy = tgt.up[1], uz = tgt.up[2];
            const double wj = tgt.weight / wtot;

            // Elevation geometry.
            {
                const double* x = track.x.data();
                const double* y = track.y.data();
                const double* z = track.z.data();
                const double* rr = r2.data();
                double* s = sc.s.data();
                double* as = asin_s.data();
                if (with_gradient) {
                    double* dsdc = sc.dsdc.data();
                    double* dsdr2 = sc.dsdr2.data();
#pragma omp simd
                    for (std::size_t q = 0; q < nk; ++q) {
                        const double c = x[q] * ux + y[q] * uy + z[q] * uz;
                        const double inv_d = 1.0 / std::sqrt(rr[q] + R2 - 2.0 * R * c);
                        const double u = c - R;
                        const double sv = std::min(std::max(u * inv_d, -1.0), 1.0);
                        s[q] = sv;
                        as[q] = std::asin(sv);
                        const double inv_d3 = inv_d * inv_d * inv_d;
                        dsdc[q] = (rr[q] - R * c) * inv_d3;
                        dsdr2[q] = -0.5 * u * inv_d3;
                    }
                } else {
#pragma omp simd
                    for (std::size_t q = 0; q < nk; ++q) {
                        const double c = x[q] * ux + y[q] * uy + z[q] * uz;
                        const double inv_d = 1.0 / std::sqrt(rr[q] + R2 - 2.0 * R * c);
                        const double sv = std::min(std::max((c - R) * inv_d, -1.0), 1.0);
                        s[q] = sv;
                        as[q] = std::asin(sv);
                    }
                }
            }

            visibility(sc.s.data(), asin_s.data(), nk, amin, inv_tau_cov, with_gradient, sc.cov);
            noisy_or_products(n, k, sc.cov);
            Branch& rb = shared ? sc.cov : sc.rev;
            if (!shared) {
                visibility(sc.s.data(), asin_s.data(), nk, amin, inv_tau_rev, with_gradient, sc.rev);
                noisy_or_products(n, k, sc.rev);
            }

            // Coverage: sum_k (1 - miss_k).
            double cov_j = 0.0;
            for (std::size_t t = 0; t < k; ++t) cov_j += 1.0 - sc.cov.miss[t];
            out.cov_sum += wj * cov_j;

            // Leaky gaps and their LogSumExp.
            double* gap = sc.gap.data();
            const double* miss = rb.miss.data();
            gap[0] = 0.0;
            double gmax = 0.0;
            for (std::size_t t = 1; t < k; ++t) {
                gap[t] = (gap[t - 1] + dt_min) * miss[t];
                gmax = std::max(gmax, gap[t]);
            }
            double esum = 0.0;
            for (std::size_t t = 0; t < k; ++t) esum += std::exp((gap[t] - gmax) / beta);
            out.rev_sum += wj * (gmax + beta * std::log(esum));

            if (!with_gradient) continue;

            std::fill(sc.g.begin(), sc.g.end(), 0.0);
            const double cov_coeff = -relax.coverage_weight * wj / static_cast<double>(k);
            if (cov_coeff != 0.0) {
                std::fill(sc.adj.begin(), sc.adj.end(), cov_coeff);
                scatter_noisy_or(n, k, sc.adj.data(), sc.cov, sc.g.data());
            }
            if (relax.lambda != 0.0) {
                // dLSE/dgap_t = softmax weights; back through the recurrence.
                double* adj = sc.adj.data();
                for (std::size_t t = 0; t < k; ++t) adj[t] = std::exp((gap[t] - gmax) / beta) / esum;
                for (std::size_t t = k - 1; t-- > 0;) adj[t] += adj[t + 1] * miss[t + 1];
                // dL/dmiss_t, and d miss_t / d v_it = -prod_{i' != i}(1 - v).
                double* b = sc.bgap.data();
                const double scale = relax.lambda * wj;
                b[0] = 0.0;
                for (std::size_t t = 1; t < k; ++t) b[t] = -scale * adj[t] * (gap[t - 1] + dt_min);
                scatter_noisy_or(n, k, b, rb, sc.g.data());
            }

            const double* g = sc.g.data();
            const double* dsdc = sc.dsdc.data();
            const double* dsdr2 = sc.dsdr2.data();
            double* ax = out.ax.data();
            double* ay = out.ay.data();
            double* az = out.az.data();
            double* ar2 = out.ar2.data();
#pragma omp simd
            for (std::size_t q = 0; q < nk; ++q) {
                const double gc = g[q] * dsdc[q];
                ax[q] += gc * ux;
                ay[q] += gc * uy;
                az[q] += gc * uz;
                ar2[q] += g[q] * dsdr2[q];
            }
        }
    });

    RelaxedEvaluation ev;
    double cov = 0.0, rev = 0.0;
    for (const ChunkResult& r : results) {
        cov += r.cov_sum;
        rev += r.rev_sum;
    }
    ev.soft_coverage = cov / static_cast<double>(k);
    ev.soft_revisit_min = rev;
    ev.loss = -relax.coverage_weight * ev.soft_coverage + relax.lambda * ev.soft_revisit_min;

    if (with_gradient) {
        ev.gx.assign(nk, 0.0);
        ev.gy.assign(nk, 0.0);
        ev.gz.assign(nk, 0.0);
        std::vector<double> gr2(nk, 0.0);
        for (const ChunkResult& r : results) {
            for (std::size_t q = 0; q < nk; ++q) {
                ev.gx[q] += r.ax[q];
                ev.gy[q] += r.ay[q];
                ev.gz[q] += r.az[q];
                gr2[q] += r.ar2[q];
            }
        }
        for (std::size_t q = 0; q < nk; ++q) {
            ev.gx[q] += 2.0 * gr2[q] * track.x[q];
            ev.gy[q] += 2.0 * gr2[q] * track.y[q];
            ev.gz[q] += 2.0 * gr2[q] * track.z[q];
        }
    }
    return ev;
}

}  // namespace diffconst
