// diffconst command-line interface.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "diffconst/analysis.hpp"
#include "diffconst/experiment.hpp"

namespace fs = std::filesystem;
using namespace diffconst;

namespace {

struct Common {
    std::optional<std::uint64_t> seed;
    std::string out;
    int threads = 0;
    std::optional<std::string> preset;
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("--seed", c.seed, "Override the run seed");
    app->add_option("--out", c.out, "Output directory");
    app->add_option("--threads", c.threads, "Worker threads (default: DIFFCONST_THREADS or all cores)");
    app->add_option("--preset", c.preset, "Base preset")->check(CLI::IsMember(preset_names()));
}

// Config file when given, else the preset (exp2 by default).
ExperimentConfig load_experiment(const std::string& path, const Common& c) {
    ExperimentConfig cfg = path.empty() ? preset(c.preset.value_or("exp2")) : load_config(path, c.preset);
    if (c.seed) cfg.seed = *c.seed;
    return cfg;
}

fs::path out_dir(const Common& c, const std::string& fallback) { return c.out.empty() ? fs::path("runs") / fallback : fs::path(c.out); }

void print_report(const char* label, const MetricsReport& r) {
    std::printf("%-8s hard coverage %7.3f %%  hard revisit %7.2f min  soft coverage %7.3f %%  soft revisit %7.2f min\n",
                label, 100.0 * r.hard_coverage, r.hard_revisit_min, 100.0 * r.soft_coverage, r.soft_revisit_min);
}

int cmd_run(const std::string& config, const Common& c) {
    const ExperimentConfig cfg = load_experiment(config, c);
    const fs::path dir = out_dir(c, cfg.id);
    const RunResult res = run_experiment(cfg, dir, c.threads, true);
    print_report("initial", res.initial);
    print_report("final", res.final);
    std::printf("wrote %s\n", dir.string().c_str());
    return 0;
}

// "24/6/1" -> {24, 6, 1}
std::array<int, 3> parse_walker(const std::string& s) {
    std::array<int, 3> v{};
    char a = 0, b = 0;
    std::istringstream in(s);
    if (!(in >> v[0] >> a >> v[1] >> b >> v[2]) || a != '/' || b != '/') throw CLI::ValidationError("--walker", "expected T/P/F");
    return v;
}

struct WalkerArgs {
    std::string pattern = "24/6/1";
    double inc_deg = 60.0;
    double alt_km = 550.0;
    double raan0_deg = 0.0;
};

void add_walker_options(CLI::App* app, WalkerArgs& w) {
    app->add_option("--inc", w.inc_deg, "Inclination [deg]");
    app->add_option("--alt", w.alt_km, "Altitude [km]");
    app->add_option("--raan0", w.raan0_deg, "RAAN of the first plane [deg]");
}

std::vector<ElementSet> walker_of(const WalkerArgs& w, const UtcInstant& epoch, std::vector<int>& plane_of) {
    const auto [t, p, f] = parse_walker(w.pattern);
    auto els = walker_generate(t, p, f, w.inc_deg, w.alt_km, w.raan0_deg, epoch);
    plane_of.clear();
    for (int i = 0; i < t; ++i) plane_of.push_back(i / (t / p));
    return els;
}

int cmd_walker(const WalkerArgs& w, const Common& c) {
    std::vector<int> plane_of;
    const auto els = walker_of(w, UtcInstant::parse(preset("exp2").window.epoch), plane_of);
    const json j = elements_json(els, plane_of);
    if (c.out.empty()) {
        std::cout << j.dump(2) << '\n';
    } else {
        write_json(c.out, j);
    }
    return 0;
}

int cmd_eval(const std::string& config, const std::string& elements, const std::string& run_dir, bool use_walker,
             const WalkerArgs& w, const Common& c) {
    ExperimentConfig cfg;
    std::vector<ElementSet> els;
    std::vector<int> plane_of;
    if (!run_dir.empty()) {
        cfg = config.empty() ? load_config(fs::path(run_dir) / "config.json", c.preset) : load_experiment(config, c);
        const json ej = read_json(fs::path(run_dir) / "elements.json");
        els = elements_from_json(ej);
        for (const auto& s : ej.at("satellites")) plane_of.push_back(s.at("plane").get<int>());
    } else {
        cfg = load_experiment(config, c);
        if (!elements.empty()) {
            const json ej = read_json(elements);
            els = elements_from_json(ej);
            for (const auto& s : ej.at("satellites")) plane_of.push_back(s.value("plane", 0));
        } else if (use_walker) {
            els = walker_of(w, UtcInstant::parse(cfg.window.epoch), plane_of);
        } else {
            throw CLI::ValidationError("eval", "give --elements, --run or --walker");
        }
    }
    if (c.seed) cfg.seed = *c.seed;
    const ResolvedExperiment rx = resolve(cfg, c.threads);
    const Problem& p = rx.problem;
    const MetricsReport r = eval_constellation(els, p.targets, p.window, p.relax, c.threads);
    json out = report_json(r);
    out["hard_loss"] = -r.hard_coverage + p.relax.lambda * r.hard_revisit_min;
    std::cout << out.dump(2) << '\n';
    if (!c.out.empty()) {
        const fs::path dir(c.out);
        fs::create_directories(dir);
        write_json(dir / "metrics.json", out);
        write_json(dir / "elements.json", elements_json(els, plane_of));
        std::vector<Elements<double>> plain(els.begin(), els.end());
        const EcefTrack track = ecef_track(plain, p.window);
        write_density_csv(dir / "density.csv", p.targets, visibility_density(track, p.targets, p.relax.alpha_min_deg, c.threads));
    }
    return 0;
}

int cmd_baselines(const std::string& config, int count, const Common& c) {
    const ExperimentConfig cfg = load_experiment(config, c);
    std::vector<std::uint64_t> seeds;
    for (int k = 0; k < count; ++k) seeds.push_back(cfg.seed + static_cast<std::uint64_t>(k));
    const fs::path dir = out_dir(c, cfg.id + "-baselines");
    const BaselineSuite suite = run_baseline_suite(cfg, dir, seeds, c.threads, true);
    std::cout << suite.summary.dump(2) << '\n';
    return 0;
}

AxisSpec axis_from_json(const json& j) {
    AxisSpec a;
    a.slot = j.at("slot").get<std::string>();
    a.lo = j.value("lo", a.lo);
    a.hi = j.value("hi", a.hi);
    a.resolution = j.value("resolution", a.resolution);
    return a;
}

// Center of a landscape: a run directory's final theta or the initial point.
std::vector<double> landscape_center(const json& spec, const fs::path& base, const ResolvedExperiment& rx,
                                     std::vector<Snapshot>* snapshots) {
    if (!spec.contains("run")) return rx.theta0;
    fs::path run = spec["run"].get<std::string>();
    if (run.is_relative()) run = base / run;
    std::vector<Snapshot> snaps = read_theta_csv(run / "theta.csv");
    if (snaps.empty()) throw AnalysisError("no iterates in " + (run / "theta.csv").string());
    std::vector<double> center = snaps.back().theta;
    if (center.size() != rx.theta0.size()) throw AnalysisError("run " + run.string() + " does not match the landscape problem");
    if (snapshots) *snapshots = std::move(snaps);
    return center;
}

int cmd_landscape(const std::string& config, const Common& c) {
    const ExperimentConfig cfg = load_experiment(config, c);
    const json raw = read_json(config);
    const json spec = raw.value("landscape", json::object());
    const ResolvedExperiment rx = resolve(cfg, c.threads);
    const fs::path base = fs::path(config).parent_path();
    std::vector<Snapshot> snaps;
    const std::vector<double> center = landscape_center(spec, base, rx, &snaps);
    const fs::path dir = out_dir(c, cfg.id + "-landscape");
    fs::create_directories(dir);

    const std::string mode = spec.value("mode", std::string("slots"));
    Landscape land;
    if (mode == "slots") {
        const AxisSpec x = axis_from_json(spec.at("x"));
        const AxisSpec y = axis_from_json(spec.at("y"));
        land = landscape_grid(rx.problem, center, x, y, c.threads);
        if (!snaps.empty()) write_trajectory_csv(dir / "trajectory.csv", slot_trajectory(rx.problem.spec, snaps, x.slot, y.slot));
        std::printf("anti-diagonal hard-loss band: %s\n", antidiagonal_band(land) ? "yes" : "no");
    } else if (mode == "random") {
        const double span = spec.value("span", 1.0);
        const int res = spec.value("resolution", 41);
        const auto dirs = random_directions(center.size(), cfg.seed);
        land = direction_slice(rx.problem, center, dirs[0], dirs[1], {-span, span}, {-span, span}, res, c.threads);
    } else {
        throw ConfigError("landscape.mode must be slots or random");
    }
    write_landscape_csv(dir / "landscape.csv", land);
    std::printf("wrote %s\n", (dir / "landscape.csv").string().c_str());
    return 0;
}

int cmd_pca(const std::string& run_dir, int resolution, double margin, const Common& c) {
    const fs::path run(run_dir);
    ExperimentConfig cfg = load_config(run / "config.json", c.preset);
    const ResolvedExperiment rx = resolve(cfg, c.threads);
    const std::vector<Snapshot> snaps = read_theta_csv(run / "theta.csv");
    const PcaSlice pca = pca_slice(snaps, rx.problem, resolution, margin, c.threads);
    const fs::path dir = c.out.empty() ? run : fs::path(c.out);
    fs::create_directories(dir);
    write_landscape_csv(dir / "pca_slice.csv", pca.slice);
    write_trajectory_csv(dir / "pca_trajectory.csv", pca.trajectory);
    json j;
    j["explained"] = pca.basis.explained;
    j["singular_values"] = pca.basis.singular_values;
    j["mean"] = pca.basis.mean;
    j["pc1"] = pca.basis.directions[0];
    j["pc2"] = pca.basis.directions[1];
    write_json(dir / "pca.json", j);
    std::printf("PC1 %.2f %%  PC2 %.2f %% of variance; wrote %s\n", 100.0 * pca.basis.explained[0],
                100.0 * pca.basis.explained[1], dir.string().c_str());
    return 0;
}

std::vector<double> grid_values(const json& g, const char* key, std::vector<double> fallback) {
    return g.contains(key) ? g[key].get<std::vector<double>>() : fallback;
}

int cmd_gridsearch(const std::string& config, const Common& c) {
    ExperimentConfig cfg = load_experiment(config, c);
    cfg.window.gmst_random = false;
    const json raw = read_json(config);
    const json spec = raw.value("gridsearch", json::object());
    const fs::path base = fs::path(config).parent_path();
    const ResolvedExperiment rx = resolve(cfg, c.threads);

    std::vector<std::vector<ElementSet>> solutions;
    for (std::size_t s = 0; s < kTierLabels.size(); ++s) {
        fs::path path = fs::path("tuning") / (std::string(kTierLabels[s]) + ".json");
        if (spec.contains("solutions")) path = spec["solutions"].at(s).get<std::string>();
        path = resolve_target_path(path.string(), base);
        if (fs::is_directory(path)) path /= "elements.json";
        solutions.push_back(elements_from_json(read_json(path)));
    }
    HyperGrid grid;
    if (spec.contains("grid")) {
        const json& g = spec["grid"];
        grid.tau_cov_deg = grid_values(g, "tau_cov_deg", grid.tau_cov_deg);
        grid.tau_rev_deg = grid_values(g, "tau_rev_deg", grid.tau_rev_deg);
        grid.beta_min = grid_values(g, "beta_min", grid.beta_min);
        grid.lambda = grid_values(g, "lambda", grid.lambda);
    }
    const std::vector<HyperRow> rows = hyperparam_grid(solutions, rx.problem, grid, c.threads);
    const fs::path dir = out_dir(c, cfg.id + "-gridsearch");
    fs::create_directories(dir);
    write_hyperparam_csv(dir / "gridsearch.csv", rows);

    json sel;
    std::size_t valid = 0;
    for (const HyperRow& r : rows) valid += r.valid ? 1u : 0u;
    sel["rows"] = rows.size();
    sel["valid_rows"] = valid;
    json hard = json::array();
    for (std::size_t s = 0; s < solutions.size(); ++s) {
        const MetricsReport m = eval_constellation(solutions[s], rx.problem.targets, rx.problem.window, rx.problem.relax, c.threads);
        hard.push_back({{"label", kTierLabels[s]},
                        {"hard_coverage", m.hard_coverage},
                        {"hard_revisit_min", m.hard_revisit_min},
                        {"hard_loss", -m.hard_coverage + rx.problem.relax.lambda * m.hard_revisit_min}});
    }
    sel["solutions"] = hard;
    if (const auto best = select_hyperparams(rows)) {
        const HyperRow& r = rows[*best];
        sel["selected"] = {{"tau_cov_deg", r.tau_cov_deg}, {"tau_rev_deg", r.tau_rev_deg}, {"beta_min", r.beta_min},
                           {"lambda", r.lambda},           {"margin", r.margin}};
    } else {
        sel["selected"] = nullptr;
    }
    write_json(dir / "selection.json", sel);
    std::cout << sel.dump(2) << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Differentiable satellite constellation design"};
    app.require_subcommand(1);
    Common common;

    std::string config;
    auto* run = app.add_subcommand("run", "Optimize a constellation and write a run directory");
    run->add_option("config", config, "Experiment config (JSON)")->check(CLI::ExistingFile);
    add_common(run, common);

    std::string elements, run_dir;
    bool use_walker = false;
    WalkerArgs walker;
    auto* eval = app.add_subcommand("eval", "Hard and soft metrics of fixed elements");
    eval->add_option("--config", config, "Config supplying targets, window and relaxation")->check(CLI::ExistingFile);
    eval->add_option("--elements", elements, "Elements JSON")->check(CLI::ExistingFile);
    eval->add_option("--run", run_dir, "Run directory")->check(CLI::ExistingDirectory);
    eval->add_option("--walker", walker.pattern, "Walker pattern T/P/F")->each([&](const std::string&) { use_walker = true; });
    add_walker_options(eval, walker);
    add_common(eval, common);

    auto* walk = app.add_subcommand("walker", "Generate Walker delta elements");
    walk->add_option("pattern", walker.pattern, "T/P/F (default 24/6/1)");
    add_walker_options(walk, walker);
    add_common(walk, common);

    int seeds = 5;
    auto* base = app.add_subcommand("baselines", "SA, GA and DE over several seeds");
    base->add_option("config", config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
    base->add_option("--seeds", seeds, "Seeds per method, counted up from --seed")->check(CLI::PositiveNumber);
    add_common(base, common);

    auto* land = app.add_subcommand("landscape", "Loss landscape over two slots or two random directions");
    land->add_option("config", config, "Experiment config with a landscape section")->required()->check(CLI::ExistingFile);
    add_common(land, common);

    int resolution = 41;
    double margin = 0.2;
    auto* pca = app.add_subcommand("pca", "Loss on the principal plane of a run's trajectory");
    pca->add_option("run-dir", run_dir, "Run directory")->required()->check(CLI::ExistingDirectory);
    pca->add_option("--resolution", resolution, "Grid points per axis")->check(CLI::Range(2, 1000));
    pca->add_option("--margin", margin, "Bounding-box margin as a fraction of its width");
    add_common(pca, common);

    auto* grid = app.add_subcommand("gridsearch", "Relaxation hyperparameter sweep over four stored solutions");
    grid->add_option("config", config, "Experiment config with a gridsearch section")->required()->check(CLI::ExistingFile);
    add_common(grid, common);

    CLI11_PARSE(app, argc, argv);
    try {
        if (*run) return cmd_run(config, common);
        if (*eval) return cmd_eval(config, elements, run_dir, use_walker, walker, common);
        if (*walk) return cmd_walker(walker, common);
        if (*base) return cmd_baselines(config, seeds, common);
        if (*land) return cmd_landscape(config, common);
        if (*pca) return cmd_pca(run_dir, resolution, margin, common);
        if (*grid) return cmd_gridsearch(config, common);
    } catch (const CLI::Error& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
