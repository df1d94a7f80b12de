#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "diffconst/analysis.hpp"
#include "diffconst/experiment.hpp"
#include "support.hpp"

using namespace diffconst;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("diffconst_test_" + name);
    fs::remove_all(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

double circ_diff_deg(double a, double b) {
    double d = std::fmod(std::fabs(a - b), 360.0);
    return std::min(d, 360.0 - d);
}

// Two satellites in one plane, only their mean anomalies free.
ExperimentConfig toy_config(int iterations) {
    ExperimentConfig c = preset("exp1-ci");
    c.targets.n_lat = 6;
    c.targets.n_lon = 12;
    c.window.steps = 48;
    c.optimizer.adamw.iterations = iterations;
    c.write_density = true;
    return c;
}

}  // namespace

TEST_CASE("Walker 24/6/1 layout") {
    const auto w = walker_generate(24, 6, 1, 60.0, 550.0);
    REQUIRE(w.size() == 24);
    for (int p = 0; p < 6; ++p) {
        for (int s = 0; s < 4; ++s) {
            const ElementSet& el = w[static_cast<std::size_t>(p * 4 + s)];
            CHECK(el.raan / kDeg == doctest::Approx(60.0 * p));
            CHECK(el.e == 0.0);
            CHECK(el.a == doctest::Approx(kEarthRadius + 550.0));
            CHECK(el.inc / kDeg == doctest::Approx(60.0));
            CHECK(circ_diff_deg(el.ma / kDeg, 90.0 * s + 15.0 * p) < 1e-9);
        }
    }
    const auto f0 = walker_generate(24, 6, 0, 60.0, 550.0);
    CHECK(f0[4].ma == doctest::Approx(f0[0].ma));
    CHECK_THROWS(walker_generate(25, 6, 1, 60.0, 550.0));
}

TEST_CASE("NumPy legacy uniform draws") {
    const auto v = numpy_uniform(42, 5, 0.0, 360.0);
    CHECK(v[0] == doctest::Approx(134.8344427850505).epsilon(1e-14));
    CHECK(v[1] == doctest::Approx(342.2571503075698).epsilon(1e-14));
    CHECK(v[2] == doctest::Approx(263.51781905210584).epsilon(1e-14));
    CHECK(v[3] == doctest::Approx(215.5170543109332).epsilon(1e-14));
    CHECK(v[4] == doctest::Approx(56.16671055927715).epsilon(1e-14));
}

TEST_CASE("presets carry the experiment settings") {
    for (const std::string& name : preset_names()) {
        CAPTURE(name);
        CHECK_NOTHROW(preset(name).validate());
    }
    const ExperimentConfig e1 = preset("exp1");
    CHECK(e1.constellation.satellite_count() == 2);
    CHECK(resolve(e1).theta0.size() == 2);
    CHECK(e1.relax.lambda == 2.0);
    const ExperimentConfig e2 = preset("exp2");
    CHECK(e2.constellation.satellite_count() == 24);
    CHECK(resolve(e2).theta0.size() == 30);
    CHECK(resolve(e2).problem.targets.size() == 2592);
    CHECK(e2.relax.lambda == 0.1);
    CHECK(e2.relax.beta_min == 10.0);
    CHECK(e2.relax.tau_cov_deg == 2.0);
    const ExperimentConfig e3 = preset("exp3");
    CHECK(e3.constellation.satellite_count() == 4);
    CHECK(e3.relax.lambda == 1.0);
    CHECK(resolve(e3).problem.targets.size() == 500);
    CHECK(preset("baseline").optimizer.baseline.budget == 4050);
    CHECK(preset("tuning-clustered").window.gmst_random);
    CHECK_THROWS_AS(preset("exp9"), ConfigError);
}

TEST_CASE("config JSON round trip") {
    ExperimentConfig c = preset("exp3");
    c.seed = 17;
    c.relax.beta_min = 7.5;
    c.optimizer.adamw.lr = 0.003;
    const json j = to_json(c);
    const ExperimentConfig back = from_json(j, preset("exp2"));
    CHECK(to_json(back) == j);
    const fs::path dir = scratch("config");
    fs::create_directories(dir);
    write_json(dir / "c.json", json{{"preset", "exp1"}, {"seed", 3}});
    const ExperimentConfig partial = load_config(dir / "c.json");
    CHECK(partial.seed == 3);
    CHECK(partial.constellation.satellite_count() == 2);
    CHECK(load_config(dir / "c.json", std::string("exp3")).constellation.satellite_count() == 4);
    CHECK_THROWS(from_json(json{{"relax", {{"tau_cov_deg", "wide"}}}}, preset("exp2")));
}

TEST_CASE("run directory contents and bit-exact determinism") {
    const ExperimentConfig c = toy_config(6);
    const fs::path a = scratch("run_a"), b = scratch("run_b");
    const RunResult ra = run_experiment(c, a, 1);
    run_experiment(c, b, 1);
    for (const char* f : {"config.json", "trace.csv", "theta.csv", "elements.json", "metrics.json", "density.csv"}) {
        CAPTURE(f);
        CHECK(fs::exists(a / f));
    }
    const std::string trace = slurp(a / "trace.csv");
    CHECK(trace.rfind("iter,evals,loss,soft_coverage,soft_revisit_min,hard_coverage,hard_revisit_min\n", 0) == 0);
    CHECK(trace == slurp(b / "trace.csv"));
    CHECK(slurp(a / "theta.csv") == slurp(b / "theta.csv"));
    CHECK(slurp(a / "density.csv").rfind("lat_deg,lon_deg,weight,covered_steps\n", 0) == 0);
    CHECK(ra.trace.rows.size() == 7);

    // The stored config reproduces the run.
    const fs::path r = scratch("run_replay");
    run_experiment(load_config(a / "config.json"), r, 1);
    CHECK(slurp(r / "trace.csv") == trace);

    // Snapshots survive the theta.csv round trip.
    const auto snaps = read_theta_csv(a / "theta.csv");
    REQUIRE(snaps.size() == ra.trace.snapshots.size());
    CHECK(snaps.back().theta == ra.trace.snapshots.back().theta);

    // Elements survive their JSON round trip.
    const auto els = elements_from_json(read_json(a / "elements.json"));
    REQUIRE(els.size() == ra.final_elements.size());
    CHECK(els[1].ma == doctest::Approx(ra.final_elements[1].ma).epsilon(1e-15));
}

TEST_CASE("baseline runs are deterministic and stop at their budget") {
    ExperimentConfig c = toy_config(0);
    c.optimizer.method = "de";
    c.optimizer.baseline.budget = 80;
    const fs::path a = scratch("de_a"), b = scratch("de_b");
    const RunResult r = run_experiment(c, a, 1);
    run_experiment(c, b, 1);
    CHECK(r.trace.evaluations == 80);
    CHECK(r.trace.rows.size() == 80);
    CHECK(slurp(a / "trace.csv") == slurp(b / "trace.csv"));
}

TEST_CASE("eval on a two-step window") {
    const auto w = walker_generate(24, 6, 1, 60.0, 550.0);
    SimWindow win;
    win.steps = 2;
    const MetricsReport m = eval_constellation(w, latlon_grid(6, 12), win, RelaxConfig{}, 1);
    CHECK(m.hard_coverage >= 0.0);
    CHECK(m.hard_coverage <= 1.0);
    CHECK(std::isfinite(m.soft_revisit_min));
}

TEST_CASE("landscape grid layout and satellite-swap symmetry") {
    const ResolvedExperiment rx = resolve(toy_config(0), 1);
    const AxisSpec x{"sat0.ma", 0.0, 360.0, 3}, y{"sat1.ma", 0.0, 360.0, 3};
    const Landscape l = landscape_grid(rx.problem, rx.theta0, x, y, 1);
    REQUIRE(l.cells.size() == 9);
    CHECK(l.cells[1].x == doctest::Approx(180.0));
    CHECK(l.cells[3].y == doctest::Approx(180.0));
    CHECK(l.cells[8].x == doctest::Approx(360.0));
    const Landscape swapped = landscape_grid(rx.problem, rx.theta0, y, x, 1);
    for (int iy = 0; iy < 3; ++iy) {
        for (int ix = 0; ix < 3; ++ix) {
            const LandscapeCell& c = l.cells[static_cast<std::size_t>(iy * 3 + ix)];
            const LandscapeCell& s = swapped.cells[static_cast<std::size_t>(ix * 3 + iy)];
            CHECK(std::fabs(c.relaxed_loss - s.relaxed_loss) < 1e-9);
            CHECK(c.hard_loss == doctest::Approx(s.hard_loss).epsilon(1e-12));
        }
    }
    CHECK_THROWS(landscape_grid(rx.problem, rx.theta0, AxisSpec{"sat7.ma"}, y, 1));
}

TEST_CASE("anti-diagonal band check") {
    Landscape l;
    l.nx = l.ny = 4;
    for (int iy = 0; iy < 4; ++iy) {
        for (int ix = 0; ix < 4; ++ix) {
            LandscapeCell c;
            c.ix = ix;
            c.iy = iy;
            c.x = 90.0 * ix;
            c.y = 90.0 * iy;
            c.hard_loss = -circ_diff_deg(c.x, c.y);
            l.cells.push_back(c);
        }
    }
    CHECK(antidiagonal_band(l, 0));
    for (auto& c : l.cells) c.hard_loss = circ_diff_deg(c.x, c.y);
    CHECK_FALSE(antidiagonal_band(l, 1));
}

TEST_CASE("PCA of simple trajectories") {
    std::vector<Snapshot> line;
    for (int i = 0; i < 10; ++i) line.push_back({i, {1.0 + i, 2.0 - 2.0 * i, 0.5 * i}});
    const PcaBasis b = pca_basis(line);
    CHECK(b.explained[0] == doctest::Approx(1.0));
    const auto& d = b.directions;
    double dot = 0.0, n0 = 0.0, n1 = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
        dot += d[0][i] * d[1][i];
        n0 += d[0][i] * d[0][i];
        n1 += d[1][i] * d[1][i];
    }
    CHECK(std::fabs(dot) < 1e-12);
    CHECK(std::fabs(n0 - 1.0) < 1e-12);
    CHECK(std::fabs(n1 - 1.0) < 1e-12);
    CHECK(d[0][0] / d[0][1] == doctest::Approx(-0.5));

    // Points in a plane are reproduced exactly by two components.
    const std::vector<Snapshot> planar{{0, {0, 0, 1, 5}}, {1, {1, 0, 1, 5}}, {2, {0, 2, 1, 5}}, {3, {3, 1, 1, 5}}};
    const PcaBasis pb = pca_basis(planar);
    CHECK(pb.explained[0] + pb.explained[1] == doctest::Approx(1.0));
    for (const Snapshot& s : planar) {
        double c0 = 0.0, c1 = 0.0;
        for (std::size_t i = 0; i < 4; ++i) {
            c0 += (s.theta[i] - pb.mean[i]) * pb.directions[0][i];
            c1 += (s.theta[i] - pb.mean[i]) * pb.directions[1][i];
        }
        for (std::size_t i = 0; i < 4; ++i) {
            CHECK(pb.mean[i] + c0 * pb.directions[0][i] + c1 * pb.directions[1][i] == doctest::Approx(s.theta[i]));
        }
    }

    const std::vector<Snapshot> still{{0, {1, 1}}, {1, {1, 1}}, {2, {1, 1}}};
    CHECK_THROWS_AS(pca_basis(still), AnalysisError);
    const std::vector<Snapshot> two{{0, {0, 1}}, {1, {1, 1}}, {2, {1, 1}}};
    CHECK_THROWS_AS(pca_basis(two), AnalysisError);
}

TEST_CASE("PCA slice covers the trajectory") {
    const ExperimentConfig c = toy_config(8);
    const RunResult r = run_experiment(c, {}, 1);
    const ResolvedExperiment rx = resolve(c, 1);
    const PcaSlice s = pca_slice(r.trace.snapshots, rx.problem, 5, 0.2, 1);
    CHECK(s.slice.cells.size() == 25);
    CHECK(s.trajectory.size() == r.trace.snapshots.size());
    const double xlo = s.slice.cells.front().x, xhi = s.slice.cells.back().x;
    for (const TrajectoryPoint& p : s.trajectory) {
        CHECK(p.x >= xlo);
        CHECK(p.x <= xhi);
    }
}

TEST_CASE("random directions are unit vectors and seeded") {
    const auto a = random_directions(30, 4);
    const auto b = random_directions(30, 4);
    CHECK(a[0] == b[0]);
    for (const auto& d : a) {
        double n = 0.0;
        for (double v : d) n += v * v;
        CHECK(n == doctest::Approx(1.0));
    }
}

TEST_CASE("tier validity and margin") {
    CHECK(tiers_valid({1.0, 2.0, 5.0, 4.0}));
    CHECK(tier_margin({1.0, 2.0, 5.0, 4.0}) == doctest::Approx(2.0));
    CHECK_FALSE(tiers_valid({3.0, 2.0, 2.5, 4.0}));
    CHECK(tier_margin({3.0, 2.0, 2.5, 4.0}) < 0.0);
    CHECK_FALSE(tiers_valid({1.0, 2.0, 2.0, 4.0}));
}

TEST_CASE("synthetic sweep reproduces its known valid set") {
    // Fixed (coverage, revisit) per tier; L = -C + lambda D. The binding pair
    // is near_uniform against clustered, which flips at lambda = 0.75.
    const std::array<std::pair<double, double>, 4> tiers{
        {{0.6, 60.4}, {0.5, 60.0}, {0.3, 60.0}, {0.2, 59.9}}};
    const TierLoss f = [&tiers](const RelaxConfig& r) {
        std::array<double, 4> out{};
        for (std::size_t i = 0; i < 4; ++i) out[i] = -tiers[i].first + r.lambda * tiers[i].second;
        return out;
    };
    const HyperGrid grid;
    const auto rows = hyperparam_grid(grid, f, RelaxConfig{}, 2);
    REQUIRE(rows.size() == 1764);
    REQUIRE(grid.size() == 1764);
    std::size_t valid = 0;
    for (const HyperRow& r : rows) {
        CHECK(r.valid == (r.lambda < 0.75));
        valid += r.valid ? 1 : 0;
    }
    CHECK(valid == 1176);
    CHECK(rows[0].lambda == 0.05);
    CHECK(rows[1].lambda == 0.1);
    CHECK(rows[6].beta_min == 5.0);
    CHECK(rows.back().tau_cov_deg == 5.0);

    const auto pick = select_hyperparams(rows);
    REQUIRE(pick.has_value());
    const HyperRow& best = rows[*pick];
    CHECK(best.tau_cov_deg == 5.0);
    CHECK(best.tau_rev_deg == 2.0);
    CHECK(best.lambda == 0.05);

    const fs::path out = scratch("sweep") / "grid.csv";
    fs::create_directories(out.parent_path());
    write_hyperparam_csv(out, rows);
    std::ifstream in(out);
    std::string header;
    std::getline(in, header);
    CHECK(header ==
          "tau_cov_deg,tau_rev_deg,beta_min,lambda,loss_near_uniform,loss_moderate,loss_clustered,loss_two_cluster,"
          "valid,margin");
}

TEST_CASE("fast sweep path equals the relaxed-metric kernel") {
    ExperimentConfig c = preset("exp2");
    c.targets.n_lat = 6;
    c.targets.n_lon = 12;
    c.window.steps = 40;
    const ResolvedExperiment rx = resolve(c, 1);
    std::vector<std::vector<ElementSet>> sols;
    for (int k = 0; k < 4; ++k) sols.push_back(walker_generate(24, 6, k, 60.0, 550.0 + 10.0 * k));
    HyperGrid grid;
    grid.tau_cov_deg = {1.0, 3.0};
    grid.tau_rev_deg = {0.5, 3.0};
    grid.beta_min = {5.0};
    grid.lambda = {0.1, 2.0};
    const auto rows = hyperparam_grid(sols, rx.problem, grid, 2);
    REQUIRE(rows.size() == 8);
    for (const HyperRow& row : rows) {
        RelaxConfig r = rx.problem.relax;
        r.tau_cov_deg = row.tau_cov_deg;
        r.tau_rev_deg = row.tau_rev_deg;
        r.beta_min = row.beta_min;
        r.lambda = row.lambda;
        for (std::size_t s = 0; s < 4; ++s) {
            std::vector<Elements<double>> plain(sols[s].begin(), sols[s].end());
            const EcefTrack track = ecef_track(plain, rx.problem.window);
            const double expected =
                relaxed_metrics(track, rx.problem.targets, rx.problem.window.step_min(), r, false, 1).loss;
            CHECK(row.losses[s] == doctest::Approx(expected).epsilon(1e-12));
        }
    }
}

TEST_CASE("small baseline suite layout") {
    ExperimentConfig c = toy_config(0);
    c.optimizer.baseline.budget = 60;
    const fs::path out = scratch("suite");
    const std::vector<std::uint64_t> seeds{1, 2};
    const BaselineSuite s = run_baseline_suite(c, out, seeds, 2);
    REQUIRE(s.entries.size() == 6);
    CHECK(s.entries[0].method == "sa");
    CHECK(s.entries[2].method == "ga");
    CHECK(s.entries[5].method == "de");
    CHECK(s.entries[5].seed == 2);
    for (const SuiteEntry& e : s.entries) {
        CHECK(e.evaluations == 60);
        CHECK(fs::exists(e.dir / "trace.csv"));
    }
    CHECK(fs::exists(out / "de-seed2"));
    CHECK(fs::exists(out / "summary.json"));
    CHECK(fs::exists(out / "summary.csv"));
    CHECK(s.summary["methods"].contains("sa"));
    CHECK(s.summary["methods"]["de"].contains("best_revisit_min"));
}
