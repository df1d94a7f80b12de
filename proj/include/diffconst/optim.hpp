#pragma once

// AdamW for the relaxed loss and three black-box baselines (simulated
// annealing, a genetic algorithm and differential evolution) for the hard
// fitness. All runs are deterministic given their seed.

#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "diffconst/objective.hpp"

namespace diffconst {

class OptimError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct AdamWConfig {
    double lr = 1e-2;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
    int iterations = 1000;

    void validate() const;
};

struct AdamWState {
    std::vector<double> m, v;
    int t = 0;
};

/// One decoupled-weight-decay Adam update of theta in place.
void adamw_step(AdamWState& state, std::span<double> theta, std::span<const double> grad, const AdamWConfig& config);

/// One trace row. Gradient runs write one row per iterate; baselines write
/// one row per evaluation holding the best-so-far point's values.
struct TraceRow {
    int iter = 0;
    long evals = 0;
    double loss = 0.0;
    double soft_coverage = std::numeric_limits<double>::quiet_NaN();
    double soft_revisit_min = std::numeric_limits<double>::quiet_NaN();
    double hard_coverage = 0.0;
    double hard_revisit_min = 0.0;
};

struct Snapshot {
    int iter = 0;
    std::vector<double> theta;
};

struct RunTrace {
    std::string method;
    std::vector<TraceRow> rows;
    std::vector<Snapshot> snapshots;
    std::vector<double> final_theta;  // last iterate (gradient) or best point (baselines)
    long evaluations = 0;             // loss+gradient passes or hard-fitness calls
    long hard_evaluations = 0;        // hard metrics computed for monitoring only
};

/// Snapshot thinning: every iterate up to 2000, every 5th beyond.
bool keep_snapshot(int iter);

using ProgressFn = std::function<void(const TraceRow&)>;

/// AdamW on the relaxed loss with plane-averaged gradients. Hard metrics are
/// recorded at every iterate (counted in hard_evaluations, not evaluations).
RunTrace run_gradient(std::span<const double> theta0, const Problem& problem, const AdamWConfig& config,
                      const ProgressFn& progress = {});

// ---- black-box baselines ----------------------------------------------------

struct FitnessValue {
    double fitness = 0.0;
    double coverage = std::numeric_limits<double>::quiet_NaN();
    double revisit_min = std::numeric_limits<double>::quiet_NaN();
};

using Fitness = std::function<FitnessValue(std::span<const double>)>;

/// Hard fitness -C + lambda * D of a problem.
Fitness hard_fitness(const Problem& problem);

/// Slots tagged periodic in the spec.
std::vector<bool> periodic_mask(const ParamSpec& spec);

enum class BaselineMethod { sa, ga, de };
const char* to_string(BaselineMethod m);
BaselineMethod baseline_from_string(std::string_view name);

struct BaselineConfig {
    BaselineMethod method = BaselineMethod::sa;
    long budget = 4050;
    std::uint64_t seed = 0;

    // simulated annealing
    int sa_probe = 50;
    double sa_initial_step = 10.0 * kDeg;
    double sa_initial_acceptance = 0.8;
    double sa_final_acceptance = 0.01;
    double sa_target_rate = 0.44;
    int sa_window = 50;
    double sa_step_factor = 1.1;

    // genetic algorithm
    int ga_population = 40;
    int ga_tournament = 3;
    double ga_sigma_start = 30.0 * kDeg;
    double ga_sigma_end = 5.0 * kDeg;
    double ga_mutation_rate = 0.0;  // per gene; 0 means 1 / n

    // differential evolution
    int de_population = 30;
    double de_f = 0.8;
    double de_cr = 0.5;

    // spread of the warm-started population around theta0
    double init_sigma = 30.0 * kDeg;

    void validate() const;
};

/// Metropolis rule: always accept delta <= 0, otherwise with probability
/// exp(-delta / temperature).
bool metropolis_accept(double delta, double temperature, std::mt19937_64& rng);

RunTrace run_sa(std::span<const double> theta0, const Fitness& fitness, const BaselineConfig& config);
RunTrace run_ga(std::span<const double> theta0, const Fitness& fitness, const std::vector<bool>& periodic,
                const BaselineConfig& config);
RunTrace run_de(std::span<const double> theta0, const Fitness& fitness, const BaselineConfig& config);

/// Dispatch on config.method.
RunTrace run_baseline(std::span<const double> theta0, const Fitness& fitness, const std::vector<bool>& periodic,
                      const BaselineConfig& config);

/// Uniform crossover: each gene from a or b with probability 1/2.
std::vector<double> uniform_crossover(std::span<const double> a, std::span<const double> b, std::mt19937_64& rng);

/// Differential-evolution trial: a contiguous (cyclic) run of mutant genes
/// starting at a random position, continued while uniform draws stay below
/// cr; at least one gene comes from the mutant.
std::vector<double> segment_crossover(std::span<const double> parent, std::span<const double> mutant, double cr,
                                      std::mt19937_64& rng);

/// Independent generator for one named concern of a seeded run.
std::mt19937_64 seeded_stream(std::uint64_t seed, std::string_view stream);

}  // namespace diffconst
