#include "diffconst/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <set>

#include <Eigen/SVD>

#include "diffconst/parallel.hpp"

namespace diffconst {

namespace {

double axis_scale(const ParamSpec& spec, int slot) {
    return spec.slots()[static_cast<std::size_t>(slot)].kind == SlotKind::periodic ? kDeg : 1.0;
}

int axis_slot(const ParamSpec& spec, const std::string& name) {
    try {
        return spec.slot_index(name);
    } catch (const SpecError&) {
        throw AnalysisError("landscape axis '" + name + "' is not a slot of the problem");
    }
}

void evaluate_cell(const Problem& problem, std::span<const double> theta, LandscapeCell& cell) {
    cell.relaxed_loss = loss(problem, theta, false).loss;
    const HardEvaluation h = hard_evaluate(problem, theta);
    cell.hard_loss = h.fitness;
    cell.hard_coverage = h.coverage;
    cell.hard_revisit_min = h.revisit_min;
}

// Inclusive linspace: both lo and hi are sampled.
double axis_point(const AxisSpec& a, int i) {
    return a.resolution == 1 ? a.lo : a.lo + i * (a.hi - a.lo) / (a.resolution - 1);
}

// Grid cells are independent; each evaluates single-threaded.
Problem serial_copy(const Problem& problem) {
    Problem p = problem;
    p.threads = 1;
    return p;
}

}  // namespace

Landscape landscape_grid(const Problem& problem, std::span<const double> center, const AxisSpec& x, const AxisSpec& y,
                         int threads) {
    if (center.size() != problem.spec.slot_count()) throw AnalysisError("landscape: center has the wrong length");
    if (x.resolution < 1 || y.resolution < 1) throw AnalysisError("landscape: resolution must be >= 1");
    if (!(x.hi > x.lo) || !(y.hi > y.lo)) throw AnalysisError("landscape: axis ranges must have hi > lo");
    const int sx = axis_slot(problem.spec, x.slot);
    const int sy = axis_slot(problem.spec, y.slot);
    if (sx == sy) throw AnalysisError("landscape: the two axes must use different slots");
    const double kx = axis_scale(problem.spec, sx);
    const double ky = axis_scale(problem.spec, sy);

    Landscape land;
    land.nx = x.resolution;
    land.ny = y.resolution;
    land.cells.resize(static_cast<std::size_t>(land.nx) * static_cast<std::size_t>(land.ny));
    const Problem p = serial_copy(problem);
    parallel_for(land.cells.size(), threads, [&](std::size_t c) {
        LandscapeCell& cell = land.cells[c];
        cell.iy = static_cast<int>(c / static_cast<std::size_t>(land.nx));
        cell.ix = static_cast<int>(c % static_cast<std::size_t>(land.nx));
        cell.x = axis_point(x, cell.ix);
        cell.y = axis_point(y, cell.iy);
        std::vector<double> theta(center.begin(), center.end());
        theta[static_cast<std::size_t>(sx)] = cell.x * kx;
        theta[static_cast<std::size_t>(sy)] = cell.y * ky;
        evaluate_cell(p, theta, cell);
    });
    return land;
}

Landscape direction_slice(const Problem& problem, std::span<const double> center, std::span<const double> d1,
                          std::span<const double> d2, std::array<double, 2> a_range, std::array<double, 2> b_range,
                          int resolution, int threads) {
    const std::size_t n = problem.spec.slot_count();
    if (center.size() != n || d1.size() != n || d2.size() != n) throw AnalysisError("slice: vector lengths do not match the problem");
    if (resolution < 2) throw AnalysisError("slice: resolution must be >= 2");
    Landscape land;
    land.nx = resolution;
    land.ny = resolution;
    land.cells.resize(static_cast<std::size_t>(resolution) * static_cast<std::size_t>(resolution));
    const Problem p = serial_copy(problem);
    const double step_a = (a_range[1] - a_range[0]) / (resolution - 1);
    const double step_b = (b_range[1] - b_range[0]) / (resolution - 1);
    parallel_for(land.cells.size(), threads, [&](std::size_t c) {
        LandscapeCell& cell = land.cells[c];
        cell.iy = static_cast<int>(c / static_cast<std::size_t>(resolution));
        cell.ix = static_cast<int>(c % static_cast<std::size_t>(resolution));
        cell.x = a_range[0] + cell.ix * step_a;
        cell.y = b_range[0] + cell.iy * step_b;
        std::vector<double> theta(n);
        for (std::size_t s = 0; s < n; ++s) theta[s] = center[s] + cell.x * d1[s] + cell.y * d2[s];
        evaluate_cell(p, theta, cell);
    });
    return land;
}

std::array<std::vector<double>, 2> random_directions(std::size_t n, std::uint64_t seed) {
    if (n == 0) throw AnalysisError("random_directions: dimension must be positive");
    auto rng = seeded_stream(seed, "landscape.directions");
    std::normal_distribution<double> normal(0.0, 1.0);
    std::array<std::vector<double>, 2> dirs;
    for (auto& d : dirs) {
        d.resize(n);
        double norm = 0.0;
        for (double& v : d) {
            v = normal(rng);
            norm += v * v;
        }
        norm = std::sqrt(norm);
        for (double& v : d) v /= norm;
    }
    return dirs;
}

std::vector<TrajectoryPoint> slot_trajectory(const ParamSpec& spec, std::span<const Snapshot> snapshots,
                                             const std::string& x_slot, const std::string& y_slot) {
    const int sx = axis_slot(spec, x_slot);
    const int sy = axis_slot(spec, y_slot);
    auto to_axis = [&](int slot, double v) {
        if (spec.slots()[static_cast<std::size_t>(slot)].kind == SlotKind::periodic) return wrap_degrees(v / kDeg);
        return v;
    };
    std::vector<TrajectoryPoint> out;
    out.reserve(snapshots.size());
    for (const Snapshot& s : snapshots) {
        if (s.theta.size() != spec.slot_count()) throw AnalysisError("trajectory: snapshot length does not match the spec");
        out.push_back({s.iter, to_axis(sx, s.theta[static_cast<std::size_t>(sx)]),
                       to_axis(sy, s.theta[static_cast<std::size_t>(sy)])});
    }
    return out;
}

bool antidiagonal_band(const Landscape& land, int tolerance_steps) {
    if (land.cells.empty()) return false;
    const double step = land.nx > 1 ? land.cells[1].x - land.cells[0].x : 0.0;
    const double tol = tolerance_steps * step + 1e-9;
    for (int iy = 0; iy < land.ny; ++iy) {
        const auto row = std::span(land.cells).subspan(static_cast<std::size_t>(iy * land.nx), static_cast<std::size_t>(land.nx));
        double best = row[0].hard_loss;
        for (const LandscapeCell& c : row) best = std::min(best, c.hard_loss);
        for (const LandscapeCell& c : row) {
            if (c.hard_loss > best + 1e-12) continue;
            double sep = std::fabs(std::remainder(c.x - c.y, 360.0));
            if (std::fabs(sep - 180.0) > tol) return false;
        }
    }
    return true;
}

void write_landscape_csv(const std::filesystem::path& path, const Landscape& land) {
    std::ofstream out(path);
    if (!out) throw AnalysisError("cannot write " + path.string());
    out << "ix,iy,x,y,relaxed_loss,hard_loss,hard_coverage,hard_revisit_min\n";
    for (const LandscapeCell& c : land.cells) {
        out << c.ix << ',' << c.iy << ',' << format_double(c.x) << ',' << format_double(c.y) << ','
            << format_double(c.relaxed_loss) << ',' << format_double(c.hard_loss) << ',' << format_double(c.hard_coverage)
            << ',' << format_double(c.hard_revisit_min) << '\n';
    }
}

void write_trajectory_csv(const std::filesystem::path& path, std::span<const TrajectoryPoint> points) {
    std::ofstream out(path);
    if (!out) throw AnalysisError("cannot write " + path.string());
    out << "iter,x,y\n";
    for (const TrajectoryPoint& p : points) out << p.iter << ',' << format_double(p.x) << ',' << format_double(p.y) << '\n';
}

// ---- PCA -----------------------------------------------------------------------

PcaBasis pca_basis(std::span<const Snapshot> snapshots) {
    if (snapshots.empty()) throw AnalysisError("pca: no iterates");
    const std::size_t n = snapshots.front().theta.size();
    if (n < 2) throw AnalysisError("pca: need at least two parameters");
    std::set<std::vector<double>> distinct;
    for (const Snapshot& s : snapshots) {
        if (s.theta.size() != n) throw AnalysisError("pca: iterates have different lengths");
        distinct.insert(s.theta);
    }
    if (distinct.size() < 3) throw AnalysisError("pca: need at least 3 distinct iterates");

    const auto m = static_cast<Eigen::Index>(snapshots.size());
    Eigen::MatrixXd x(m, static_cast<Eigen::Index>(n));
    for (Eigen::Index r = 0; r < m; ++r) {
        for (std::size_t c = 0; c < n; ++c) x(r, static_cast<Eigen::Index>(c)) = snapshots[static_cast<std::size_t>(r)].theta[c];
    }
    const Eigen::RowVectorXd mean = x.colwise().mean();
    x.rowwise() -= mean;
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinV);
    const Eigen::VectorXd& sv = svd.singularValues();
    if (!(sv(0) > 1e-12 * std::max(1.0, x.cwiseAbs().maxCoeff()))) throw AnalysisError("pca: trajectory has rank 0");

    PcaBasis basis;
    basis.mean.assign(mean.data(), mean.data() + n);
    basis.singular_values.assign(sv.data(), sv.data() + sv.size());
    double total = 0.0;
    for (double s : basis.singular_values) total += s * s;
    for (int d = 0; d < 2; ++d) {
        // Sign convention: the largest component is positive.
        Eigen::VectorXd v = svd.matrixV().col(d);
        Eigen::Index imax = 0;
        v.cwiseAbs().maxCoeff(&imax);
        if (v(imax) < 0.0) v = -v;
        basis.directions[static_cast<std::size_t>(d)].assign(v.data(), v.data() + n);
        const double s = d < sv.size() ? sv(d) : 0.0;
        basis.explained[static_cast<std::size_t>(d)] = s * s / total;
    }
    return basis;
}

PcaSlice pca_slice(std::span<const Snapshot> snapshots, const Problem& problem, int resolution, double margin,
                   int threads) {
    if (!(margin >= 0.0)) throw AnalysisError("pca: margin must be non-negative");
    PcaSlice out;
    out.basis = pca_basis(snapshots);
    const std::size_t n = out.basis.mean.size();
    if (n != problem.spec.slot_count()) throw AnalysisError("pca: iterates do not match the problem");
    double a_lo = INFINITY, a_hi = -INFINITY, b_lo = INFINITY, b_hi = -INFINITY;
    for (const Snapshot& s : snapshots) {
        double a = 0.0, b = 0.0;
        for (std::size_t c = 0; c < n; ++c) {
            const double d = s.theta[c] - out.basis.mean[c];
            a += d * out.basis.directions[0][c];
            b += d * out.basis.directions[1][c];
        }
        out.trajectory.push_back({s.iter, a, b});
        a_lo = std::min(a_lo, a);
        a_hi = std::max(a_hi, a);
        b_lo = std::min(b_lo, b);
        b_hi = std::max(b_hi, b);
    }
    const double wa = a_hi - a_lo;
    if (b_hi - b_lo < 1e-9 * wa) {
        // Straight-line trajectory: give the second axis the first one's width.
        const double mid = 0.5 * (b_lo + b_hi);
        b_lo = mid - 0.5 * wa;
        b_hi = mid + 0.5 * wa;
    }
    const double wb = b_hi - b_lo;
    out.slice = direction_slice(problem, out.basis.mean, out.basis.directions[0], out.basis.directions[1],
                                {a_lo - margin * wa, a_hi + margin * wa}, {b_lo - margin * wb, b_hi + margin * wb},
                                resolution, threads);
    return out;
}

// ---- hyperparameter sweep -------------------------------------------------------

bool tiers_valid(const std::array<double, 4>& l) { return std::max(l[0], l[1]) < std::min(l[2], l[3]); }

double tier_margin(const std::array<double, 4>& l) { return std::min(l[2], l[3]) - std::max(l[0], l[1]); }

namespace {

void check_grid(const HyperGrid& grid) {
    if (grid.size() == 0) throw AnalysisError("hyperparameter grid is empty");
    for (double v : grid.tau_cov_deg)
        if (!(v > 0.0)) throw AnalysisError("tau_cov values must be positive");
    for (double v : grid.tau_rev_deg)
        if (!(v > 0.0)) throw AnalysisError("tau_rev values must be positive");
    for (double v : grid.beta_min)
        if (!(v > 0.0)) throw AnalysisError("beta values must be positive");
    for (double v : grid.lambda)
        if (!(v >= 0.0)) throw AnalysisError("lambda values must be non-negative");
}

HyperRow make_row(double tc, double tr, double beta, double lambda, const std::array<double, 4>& losses) {
    HyperRow row{tc, tr, beta, lambda, losses, tiers_valid(losses), tier_margin(losses)};
    return row;
}

}  // namespace

std::vector<HyperRow> hyperparam_grid(const HyperGrid& grid, const TierLoss& losses, const RelaxConfig& base,
                                      int threads) {
    check_grid(grid);
    std::vector<HyperRow> rows(grid.size());
    const std::size_t nr = grid.tau_rev_deg.size(), nb = grid.beta_min.size(), nl = grid.lambda.size();
    parallel_for(rows.size(), threads, [&](std::size_t r) {
        const double tc = grid.tau_cov_deg[r / (nr * nb * nl)];
        const double tr = grid.tau_rev_deg[r / (nb * nl) % nr];
        const double beta = grid.beta_min[r / nl % nb];
        const double lambda = grid.lambda[r % nl];
        RelaxConfig relax = base;
        relax.tau_cov_deg = tc;
        relax.tau_rev_deg = tr;
        relax.beta_min = beta;
        relax.lambda = lambda;
        rows[r] = make_row(tc, tr, beta, lambda, losses(relax));
    });
    return rows;
}

std::vector<HyperRow> hyperparam_grid(std::span<const std::vector<ElementSet>> solutions, const Problem& problem,
                                      const HyperGrid& grid, int threads) {
    if (solutions.size() != 4) throw AnalysisError("hyperparameter sweep needs exactly 4 solutions");
    check_grid(grid);
    std::vector<EcefTrack> tracks;
    for (const auto& sol : solutions) {
        if (sol.empty()) throw AnalysisError("hyperparameter sweep: a solution has no satellites");
        std::vector<Elements<double>> els(sol.begin(), sol.end());
        tracks.push_back(ecef_track(els, problem.window));
    }

    // The loss is -w C(tau_cov) + lambda D(tau_rev, beta): evaluate the
    // distinct (tau, beta) pairs once per solution with shared tau.
    struct Job {
        std::size_t sol;
        double tau;
        double beta;
        bool coverage;  // true: C(tau); false: D(tau, beta)
    };
    std::vector<Job> jobs;
    for (std::size_t s = 0; s < 4; ++s) {
        for (double tc : grid.tau_cov_deg) jobs.push_back({s, tc, grid.beta_min.front(), true});
        for (double tr : grid.tau_rev_deg)
            for (double b : grid.beta_min) jobs.push_back({s, tr, b, false});
    }
    std::vector<double> value(jobs.size());
    const double dt = problem.window.step_min();
    parallel_for(jobs.size(), threads, [&](std::size_t q) {
        const Job& job = jobs[q];
        RelaxConfig relax = problem.relax;
        relax.tau_cov_deg = job.tau;
        relax.tau_rev_deg = job.tau;
        relax.beta_min = job.beta;
        const RelaxedEvaluation ev = relaxed_metrics(tracks[job.sol], problem.targets, dt, relax, false, 1);
        value[q] = job.coverage ? ev.soft_coverage : ev.soft_revisit_min;
    });
    const std::size_t per_sol = grid.tau_cov_deg.size() + grid.tau_rev_deg.size() * grid.beta_min.size();
    const std::size_t nb = grid.beta_min.size();
    const double w = problem.relax.coverage_weight;

    std::vector<HyperRow> rows;
    rows.reserve(grid.size());
    for (std::size_t ic = 0; ic < grid.tau_cov_deg.size(); ++ic) {
        for (std::size_t ir = 0; ir < grid.tau_rev_deg.size(); ++ir) {
            for (std::size_t ib = 0; ib < nb; ++ib) {
                for (double lambda : grid.lambda) {
                    std::array<double, 4> l{};
                    for (std::size_t s = 0; s < 4; ++s) {
                        const double c = value[s * per_sol + ic];
                        const double d = value[s * per_sol + grid.tau_cov_deg.size() + ir * nb + ib];
                        l[s] = -w * c + lambda * d;
                    }
                    rows.push_back(make_row(grid.tau_cov_deg[ic], grid.tau_rev_deg[ir], grid.beta_min[ib], lambda, l));
                }
            }
        }
    }
    return rows;
}

std::optional<std::size_t> select_hyperparams(std::span<const HyperRow> rows) {
    std::optional<std::size_t> best;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (!rows[r].valid) continue;
        if (!best) {
            best = r;
            continue;
        }
        const HyperRow& a = rows[r];
        const HyperRow& b = rows[*best];
        if (std::tie(a.tau_cov_deg, a.tau_rev_deg, a.margin) > std::tie(b.tau_cov_deg, b.tau_rev_deg, b.margin)) best = r;
    }
    return best;
}

void write_hyperparam_csv(const std::filesystem::path& path, std::span<const HyperRow> rows) {
    std::ofstream out(path);
    if (!out) throw AnalysisError("cannot write " + path.string());
    out << "tau_cov_deg,tau_rev_deg,beta_min,lambda";
    for (const char* label : kTierLabels) out << ",loss_" << label;
    out << ",valid,margin\n";
    for (const HyperRow& r : rows) {
        out << format_double(r.tau_cov_deg) << ',' << format_double(r.tau_rev_deg) << ',' << format_double(r.beta_min)
            << ',' << format_double(r.lambda);
        for (double l : r.losses) out << ',' << format_double(l);
        out << ',' << (r.valid ? 1 : 0) << ',' << format_double(r.margin) << '\n';
    }
}

// ---- baseline suite -------------------------------------------------------------

BaselineSuite run_baseline_suite(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                                 std::span<const std::uint64_t> seeds, int threads, bool verbose) {
    if (seeds.empty()) throw AnalysisError("baseline suite: no seeds");
    const std::array<const char*, 3> methods{"sa", "ga", "de"};
    BaselineSuite suite;
    std::vector<ExperimentConfig> configs;
    for (const char* m : methods) {
        for (std::uint64_t seed : seeds) {
            ExperimentConfig c = cfg;
            c.optimizer.method = m;
            c.seed = seed;
            c.id = cfg.id + "-" + m + "-seed" + std::to_string(seed);
            configs.push_back(c);
            SuiteEntry e;
            e.method = m;
            e.seed = seed;
            if (!out_dir.empty()) e.dir = out_dir / (std::string(m) + "-seed" + std::to_string(seed));
            suite.entries.push_back(e);
        }
    }
    // Runs are independent; with one worker the runs themselves may thread.
    const int workers = resolve_threads(threads);
    const int inner = workers > 1 ? 1 : threads;
    parallel_for(configs.size(), workers, [&](std::size_t r) {
        if (verbose) std::fprintf(stderr, "[baselines] %s\n", configs[r].id.c_str());
        const RunResult res = run_experiment(configs[r], suite.entries[r].dir, inner, false);
        SuiteEntry& e = suite.entries[r];
        e.final = res.final;
        e.final_fitness = -res.final.hard_coverage + configs[r].relax.lambda * res.final.hard_revisit_min;
        e.evaluations = res.trace.evaluations;
    });

    json summary;
    summary["budget"] = cfg.optimizer.baseline.budget;
    summary["seeds"] = std::vector<std::uint64_t>(seeds.begin(), seeds.end());
    json per_method = json::object();
    for (const char* m : methods) {
        double cmin = INFINITY, cmax = -INFINITY, dmin = INFINITY, dmax = -INFINITY;
        const SuiteEntry* best = nullptr;
        for (const SuiteEntry& e : suite.entries) {
            if (e.method != m) continue;
            cmin = std::min(cmin, e.final.hard_coverage);
            cmax = std::max(cmax, e.final.hard_coverage);
            dmin = std::min(dmin, e.final.hard_revisit_min);
            dmax = std::max(dmax, e.final.hard_revisit_min);
            if (!best || e.final_fitness < best->final_fitness) best = &e;
        }
        per_method[m] = {{"coverage_range", {cmin, cmax}},
                         {"revisit_min_range", {dmin, dmax}},
                         {"best_seed", best->seed},
                         {"best_coverage", best->final.hard_coverage},
                         {"best_revisit_min", best->final.hard_revisit_min},
                         {"best_fitness", best->final_fitness}};
    }
    summary["methods"] = per_method;
    suite.summary = summary;

    if (!out_dir.empty()) {
        std::filesystem::create_directories(out_dir);
        write_json(out_dir / "summary.json", summary);
        std::ofstream csv(out_dir / "summary.csv");
        if (!csv) throw AnalysisError("cannot write " + (out_dir / "summary.csv").string());
        csv << "method,seed,evaluations,hard_coverage,hard_revisit_min,fitness\n";
        for (const SuiteEntry& e : suite.entries) {
            csv << e.method << ',' << e.seed << ',' << e.evaluations << ',' << format_double(e.final.hard_coverage) << ','
                << format_double(e.final.hard_revisit_min) << ',' << format_double(e.final_fitness) << '\n';
        }
    }
    return suite;
}

}  // namespace diffconst
