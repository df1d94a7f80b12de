#pragma once

// Experiment configuration, presets and run directories.
//
// A config is a JSON document. Every field is optional; missing fields keep
// the values of the preset named in "preset" (or of exp2 when none is
// given). The resolved config is written back into each run directory and
// is enough to reproduce the run.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "diffconst/metrics.hpp"
#include "diffconst/objective.hpp"
#include "diffconst/optim.hpp"

namespace diffconst {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

using json = nlohmann::json;

/// Plane layout, initial values and which elements are free.
struct ConstellationConfig {
    int planes = 6;
    int sats_per_plane = 4;
    double inc_deg = 60.0;
    double alt_km = 550.0;
    double argp_deg = 0.0;

    /// Initial plane RAANs; "explicit" uses raan_deg (empty means
    /// equispaced), "random" draws them from the run seed.
    std::string raan_init = "explicit";
    std::vector<double> raan_deg{0.0, 30.0, 120.0, 200.0, 210.0, 300.0};

    /// Initial mean anomalies: "numpy" (RandomState(ma_seed) uniform on
    /// [0, 360)), "walker" (Walker phasing), "random" (run seed) or
    /// "explicit" (ma_deg, one per satellite).
    std::string ma_init = "numpy";
    std::uint32_t ma_seed = 42;
    int phasing = 1;
    std::vector<double> ma_deg;

    // Free parameters: "fixed", "plane" (shared per plane) or "satellite".
    std::string raan_mode = "plane";
    std::string ma_mode = "satellite";
    std::string inc_mode = "fixed";
    std::string argp_mode = "fixed";
    std::string shape_mode = "fixed";

    double inc_min_deg = 30.0;
    double inc_max_deg = 90.0;
    double perigee_min_km = 400.0;
    double perigee_max_km = 600.0;
    double excess_max_km = 1500.0;
    /// Excess altitude at initialisation; the sigmoid never reaches 0.
    double excess_init_km = 10.0;

    int satellite_count() const { return planes * sats_per_plane; }
};

struct TargetConfig {
    std::string kind = "grid";  // grid | csv
    int n_lat = 36;
    int n_lon = 72;
    double lat_max_deg = 70.0;
    std::string csv;
};

struct WindowConfig {
    double horizon_s = 86400.0;
    int steps = 240;
    std::string epoch = "2024-01-01T00:00:00Z";
    bool gmst_random = false;
};

struct OptimizerConfig {
    std::string method = "adamw";  // adamw | sa | ga | de
    AdamWConfig adamw;
    BaselineConfig baseline;
};

struct ExperimentConfig {
    std::string id = "exp2";
    ConstellationConfig constellation;
    TargetConfig targets;
    WindowConfig window;
    RelaxConfig relax;
    OptimizerConfig optimizer;
    std::uint64_t seed = 0;
    bool write_density = true;
    /// Directory used to resolve relative CSV paths.
    std::filesystem::path base_dir;

    void validate() const;
};

/// Names accepted by preset().
std::vector<std::string> preset_names();
ExperimentConfig preset(const std::string& name);

json to_json(const ExperimentConfig& cfg);
/// Applies the fields present in j on top of base.
ExperimentConfig from_json(const json& j, ExperimentConfig base);
/// Reads a config file; "preset" selects the base.
ExperimentConfig load_config(const std::filesystem::path& path, const std::optional<std::string>& preset_override = {});

/// Everything needed to run: the problem and the initial theta.
struct ResolvedExperiment {
    Problem problem;
    std::vector<double> theta0;
    std::vector<int> plane_of;  // per satellite
};

ResolvedExperiment resolve(const ExperimentConfig& cfg, int threads = 0);

GroundTargetSet load_target_set(const TargetConfig& tc, const std::filesystem::path& base_dir);
/// Relative CSV paths are tried against base_dir, the working directory and
/// the bundled data directory, in that order.
std::filesystem::path resolve_target_path(const std::string& csv, const std::filesystem::path& base_dir);

/// First `count` draws of NumPy's legacy RandomState(seed).uniform(lo, hi).
std::vector<double> numpy_uniform(std::uint32_t seed, std::size_t count, double lo, double hi);

/// Walker delta t/p/f: circular orbits, RAANs at 360/p spacing starting at
/// raan0, in-plane spacing 360/(t/p), plane k offset by k f 360 / t.
std::vector<ElementSet> walker_generate(int total, int planes, int phasing, double inc_deg, double alt_km,
                                        double raan0_deg = 0.0, const UtcInstant& epoch = {});

/// Hard and soft metrics of fixed elements.
MetricsReport eval_constellation(std::span<const ElementSet> elements, const GroundTargetSet& targets,
                                 const SimWindow& window, const RelaxConfig& relax, int threads = 0);

// ---- run directory -----------------------------------------------------------

json elements_json(std::span<const ElementSet> elements, std::span<const int> plane_of);
std::vector<ElementSet> elements_from_json(const json& j);
json report_json(const MetricsReport& r);

void write_trace_csv(const std::filesystem::path& path, const RunTrace& trace);
void write_theta_csv(const std::filesystem::path& path, const RunTrace& trace);
std::vector<Snapshot> read_theta_csv(const std::filesystem::path& path);
void write_density_csv(const std::filesystem::path& path, const GroundTargetSet& targets, std::span<const int> counts);

struct RunResult {
    RunTrace trace;
    MetricsReport initial;
    MetricsReport final;
    std::vector<ElementSet> final_elements;
};

/// Runs the configured optimizer and, when out_dir is non-empty, writes
/// config.json, trace.csv, theta.csv, elements.json, metrics.json and
/// optionally density.csv.
RunResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir, int threads = 0,
                         bool verbose = false);

/// Number formatting that round-trips doubles exactly.
std::string format_double(double v);

void write_json(const std::filesystem::path& path, const json& j);
json read_json(const std::filesystem::path& path);

}  // namespace diffconst
