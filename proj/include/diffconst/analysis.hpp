#pragma once

// Loss landscapes, PCA slices of optimizer trajectories, the relaxation
// hyperparameter sweep and the black-box baseline suite.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "diffconst/experiment.hpp"

namespace diffconst {

class AnalysisError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ---- landscapes ----------------------------------------------------------------

/// One grid axis over a parameter slot. Periodic slots take degrees, all
/// other slots raw theta units. Points are lo + m (hi - lo) / resolution for
/// m in [0, resolution), so a full turn is not sampled twice.
struct AxisSpec {
    std::string slot;
    double lo = 0.0;
    double hi = 360.0;
    int resolution = 65;
};

struct LandscapeCell {
    int ix = 0;
    int iy = 0;
    double x = 0.0;  // axis units
    double y = 0.0;
    double relaxed_loss = 0.0;
    double hard_loss = 0.0;
    double hard_coverage = 0.0;
    double hard_revisit_min = 0.0;
};

struct Landscape {
    std::vector<LandscapeCell> cells;  // row-major in (iy, ix)
    int nx = 0;
    int ny = 0;
};

/// Evaluates the relaxed and hard losses with two slots swept and every other
/// slot held at center.
Landscape landscape_grid(const Problem& problem, std::span<const double> center, const AxisSpec& x, const AxisSpec& y,
                         int threads = 0);

/// Loss over the affine slice center + a d1 + b d2 on an inclusive
/// resolution x resolution grid of [a_lo, a_hi] x [b_lo, b_hi].
Landscape direction_slice(const Problem& problem, std::span<const double> center, std::span<const double> d1,
                          std::span<const double> d2, std::array<double, 2> a_range, std::array<double, 2> b_range,
                          int resolution, int threads = 0);

/// Two unit-norm Gaussian directions, drawn from the "landscape.directions"
/// stream of seed.
std::array<std::vector<double>, 2> random_directions(std::size_t n, std::uint64_t seed);

/// Trajectory of two slots in axis units (periodic slots wrapped to [0, 360)).
struct TrajectoryPoint {
    int iter = 0;
    double x = 0.0;
    double y = 0.0;
};
std::vector<TrajectoryPoint> slot_trajectory(const ParamSpec& spec, std::span<const Snapshot> snapshots,
                                             const std::string& x_slot, const std::string& y_slot);

/// True when, in every row of the grid, the hard-loss minimum lies within
/// `tolerance_steps` grid steps of |x - y| = 180 (circular distance in degrees).
bool antidiagonal_band(const Landscape& land, int tolerance_steps = 2);

void write_landscape_csv(const std::filesystem::path& path, const Landscape& land);
void write_trajectory_csv(const std::filesystem::path& path, std::span<const TrajectoryPoint> points);

// ---- PCA of an optimizer trajectory ------------------------------------------

struct PcaBasis {
    std::vector<double> mean;
    std::array<std::vector<double>, 2> directions;  // orthonormal
    std::vector<double> singular_values;            // all of them, descending
    std::array<double, 2> explained{};              // fraction of variance
};

/// Principal directions of the mean-centered iterate matrix.
PcaBasis pca_basis(std::span<const Snapshot> snapshots);

struct PcaSlice {
    PcaBasis basis;
    std::vector<TrajectoryPoint> trajectory;  // coordinates in the PC basis
    Landscape slice;                          // x = PC1, y = PC2 coordinates
};

/// Loss on the plane of the first two principal directions over the
/// trajectory's bounding box widened by margin on each side.
PcaSlice pca_slice(std::span<const Snapshot> snapshots, const Problem& problem, int resolution, double margin = 0.2,
                   int threads = 0);

// ---- relaxation hyperparameter sweep ------------------------------------------

struct HyperGrid {
    std::vector<double> tau_cov_deg{1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.0};
    std::vector<double> tau_rev_deg{0.1, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0};
    std::vector<double> beta_min{3.0, 5.0, 7.5, 10.0, 15.0, 20.0};
    std::vector<double> lambda{0.05, 0.1, 0.2, 0.5, 1.0, 2.0};

    std::size_t size() const { return tau_cov_deg.size() * tau_rev_deg.size() * beta_min.size() * lambda.size(); }
};

/// Solutions in tier order: near-uniform, moderate, clustered, two-cluster.
inline constexpr std::array<const char*, 4> kTierLabels{"near_uniform", "moderate", "clustered", "two_cluster"};

struct HyperRow {
    double tau_cov_deg = 0.0;
    double tau_rev_deg = 0.0;
    double beta_min = 0.0;
    double lambda = 0.0;
    std::array<double, 4> losses{};
    bool valid = false;
    double margin = 0.0;
};

/// The two good solutions must both beat the two poor ones.
bool tiers_valid(const std::array<double, 4>& losses);
/// min(poor) - max(good); positive exactly when tiers_valid.
double tier_margin(const std::array<double, 4>& losses);

using TierLoss = std::function<std::array<double, 4>(const RelaxConfig&)>;

/// Sweep with an arbitrary loss of the four solutions. Rows are ordered
/// tau_cov, tau_rev, beta, lambda (lambda fastest).
std::vector<HyperRow> hyperparam_grid(const HyperGrid& grid, const TierLoss& losses, const RelaxConfig& base = {},
                                      int threads = 0);

/// Sweep of the relaxed loss of four fixed constellations on one problem.
/// Elevations are computed once per solution; the result matches
/// relaxed_metrics to rounding.
std::vector<HyperRow> hyperparam_grid(std::span<const std::vector<ElementSet>> solutions, const Problem& problem,
                                      const HyperGrid& grid, int threads = 0);

/// Among valid rows: largest tau_cov, then largest tau_rev, then largest margin.
std::optional<std::size_t> select_hyperparams(std::span<const HyperRow> rows);

void write_hyperparam_csv(const std::filesystem::path& path, std::span<const HyperRow> rows);

// ---- baseline suite -------------------------------------------------------------

struct SuiteEntry {
    std::string method;
    std::uint64_t seed = 0;
    std::filesystem::path dir;
    MetricsReport final;
    double final_fitness = 0.0;
    long evaluations = 0;
};

struct BaselineSuite {
    std::vector<SuiteEntry> entries;
    json summary;
};

/// SA, GA and DE over the given seeds, each in out_dir/<method>-seed<k>,
/// all warm-started from the config's initial point. Writes summary.json
/// and summary.csv into out_dir when it is non-empty.
BaselineSuite run_baseline_suite(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                                 std::span<const std::uint64_t> seeds, int threads = 0, bool verbose = false);

}  // namespace diffconst
