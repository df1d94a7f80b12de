#include "diffconst/optim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace diffconst {

void AdamWConfig::validate() const {
    if (!(lr > 0.0)) throw OptimError("AdamW: learning rate must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw OptimError("AdamW: betas must lie in [0, 1)");
    if (!(eps > 0.0)) throw OptimError("AdamW: eps must be positive");
    if (!(weight_decay >= 0.0)) throw OptimError("AdamW: weight decay must be non-negative");
    if (iterations < 0) throw OptimError("AdamW: iteration count must be non-negative");
}

void adamw_step(AdamWState& state, std::span<double> theta, std::span<const double> grad, const AdamWConfig& config) {
    if (grad.size() != theta.size()) throw OptimError("adamw_step: gradient length does not match theta");
    for (std::size_t i = 0; i < grad.size(); ++i) {
        if (!std::isfinite(grad[i])) throw OptimError("adamw_step: non-finite gradient in slot " + std::to_string(i));
    }
    if (state.m.empty()) {
        state.m.assign(theta.size(), 0.0);
        state.v.assign(theta.size(), 0.0);
    }
    ++state.t;
    const double c1 = 1.0 - std::pow(config.beta1, state.t);
    const double c2 = 1.0 - std::pow(config.beta2, state.t);
    for (std::size_t i = 0; i < theta.size(); ++i) {
        state.m[i] = config.beta1 * state.m[i] + (1.0 - config.beta1) * grad[i];
        state.v[i] = config.beta2 * state.v[i] + (1.0 - config.beta2) * grad[i] * grad[i];
        const double mhat = state.m[i] / c1;
        const double vhat = state.v[i] / c2;
        theta[i] -= config.lr * (mhat / (std::sqrt(vhat) + config.eps)) + config.lr * config.weight_decay * theta[i];
    }
}

bool keep_snapshot(int iter) { return iter <= 2000 || iter % 5 == 0; }

RunTrace run_gradient(std::span<const double> theta0, const Problem& problem, const AdamWConfig& config,
                      const ProgressFn& progress) {
    config.validate();
    problem.spec.validate();
    RunTrace trace;
    trace.method = "adamw";
    std::vector<double> theta(theta0.begin(), theta0.end());
    AdamWState state;
    for (int it = 0; it <= config.iterations; ++it) {
        const bool step = it < config.iterations;
        LossResult lr;
        try {
            lr = loss(problem, theta, step);
        } catch (const std::exception& ex) {
            throw OptimError("run_gradient: iteration " + std::to_string(it) + ": " + ex.what());
        }
        const HardEvaluation hard = hard_evaluate(problem, theta);
        ++trace.hard_evaluations;

        TraceRow row;
        row.iter = it;
        row.evals = trace.evaluations;
        row.loss = lr.loss;
        row.soft_coverage = lr.soft_coverage;
        row.soft_revisit_min = lr.soft_revisit_min;
        row.hard_coverage = hard.coverage;
        row.hard_revisit_min = hard.revisit_min;
        trace.rows.push_back(row);
        if (keep_snapshot(it) || !step) trace.snapshots.push_back({it, theta});
        if (progress) progress(row);
        if (!step) break;

        const std::vector<double> g = plane_average_grads(lr.grad, problem.spec);
        adamw_step(state, theta, g, config);
        ++trace.evaluations;
    }
    trace.final_theta = theta;
    return trace;
}

Fitness hard_fitness(const Problem& problem) {
    return [&problem](std::span<const double> theta) {
        const HardEvaluation h = hard_evaluate(problem, theta);
        return FitnessValue{h.fitness, h.coverage, h.revisit_min};
    };
}

std::vector<bool> periodic_mask(const ParamSpec& spec) {
    std::vector<bool> mask;
    mask.reserve(spec.slot_count());
    for (const SlotDef& s : spec.slots()) mask.push_back(s.kind == SlotKind::periodic);
    return mask;
}

const char* to_string(BaselineMethod m) {
    switch (m) {
        case BaselineMethod::sa: return "sa";
        case BaselineMethod::ga: return "ga";
        case BaselineMethod::de: return "de";
    }
    return "?";
}

BaselineMethod baseline_from_string(std::string_view name) {
    if (name == "sa") return BaselineMethod::sa;
    if (name == "ga") return BaselineMethod::ga;
    if (name == "de") return BaselineMethod::de;
    throw OptimError("unknown baseline method '" + std::string(name) + "'");
}

void BaselineConfig::validate() const {
    if (budget <= 0) throw OptimError("baseline budget must be positive");
    if (method == BaselineMethod::sa && (sa_probe < 2 || sa_probe >= budget)) throw OptimError("SA probe must be in [2, budget)");
    if (method == BaselineMethod::sa && sa_window < 1) throw OptimError("SA window must be positive");
    if (method == BaselineMethod::ga && (ga_population < 2 || ga_tournament < 1)) throw OptimError("GA population too small");
    if (method == BaselineMethod::de && de_population < 4) throw OptimError("DE needs a population of at least 4");
    if (!(sa_final_acceptance > 0.0 && sa_final_acceptance < sa_initial_acceptance && sa_initial_acceptance < 1.0)) {
        throw OptimError("SA acceptance targets must satisfy 0 < final < initial < 1");
    }
}

std::mt19937_64 seeded_stream(std::uint64_t seed, std::string_view stream) {
    std::uint64_t h = 1469598103934665603ull;  // FNV-1a
    for (char c : stream) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
    return std::mt19937_64(seq);
}

bool metropolis_accept(double delta, double temperature, std::mt19937_64& rng) {
    if (delta <= 0.0) return true;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    return u(rng) < std::exp(-delta / temperature);
}

namespace {

// Budgeted fitness calls with best-so-far bookkeeping and one trace row per
// call.
class Ledger {
public:
    Ledger(const Fitness& f, long budget, RunTrace& trace) : f_(f), budget_(budget), trace_(trace) {}

    bool exhausted() const { return trace_.evaluations >= budget_; }
    long remaining() const { return budget_ - trace_.evaluations; }

    double operator()(std::span<const double> theta) {
        if (exhausted()) throw OptimError("evaluation budget exceeded");
        const FitnessValue v = f_(theta);
        ++trace_.evaluations;
        if (trace_.evaluations == 1 || v.fitness < best_.fitness) {
            best_ = v;
            best_theta_.assign(theta.begin(), theta.end());
            trace_.snapshots.push_back({static_cast<int>(trace_.evaluations), best_theta_});
        }
        TraceRow row;
        row.iter = static_cast<int>(trace_.evaluations);
        row.evals = trace_.evaluations;
        row.loss = best_.fitness;
        row.hard_coverage = best_.coverage;
        row.hard_revisit_min = best_.revisit_min;
        trace_.rows.push_back(row);
        return v.fitness;
    }

    void finish() { trace_.final_theta = best_theta_; }

private:
    const Fitness& f_;
    long budget_;
    RunTrace& trace_;
    FitnessValue best_;
    std::vector<double> best_theta_;
};

double wrap_gene(double x) {
    double w = std::fmod(x, kTwoPi);
    if (w < 0.0) w += kTwoPi;
    return w;
}

std::vector<std::vector<double>> warm_population(std::span<const double> theta0, int size, double sigma,
                                                 std::mt19937_64& rng) {
    std::normal_distribution<double> n01(0.0, 1.0);
    std::vector<std::vector<double>> pop;
    pop.emplace_back(theta0.begin(), theta0.end());
    for (int p = 1; p < size; ++p) {
        std::vector<double> x(theta0.begin(), theta0.end());
        for (double& g : x) g += sigma * n01(rng);
        pop.push_back(std::move(x));
    }
    return pop;
}

}  // namespace

RunTrace run_sa(std::span<const double> theta0, const Fitness& fitness, const BaselineConfig& config) {
    config.validate();
    RunTrace trace;
    trace.method = "sa";
    Ledger eval(fitness, config.budget, trace);
    auto rng = seeded_stream(config.seed, "sa.proposals");
    std::normal_distribution<double> n01(0.0, 1.0);
    const std::size_t n = theta0.size();

    std::vector<double> x(theta0.begin(), theta0.end());
    double fx = eval(x);
    double step = config.sa_initial_step;
    auto propose = [&](const std::vector<double>& from) {
        std::vector<double> y = from;
        for (std::size_t i = 0; i < n; ++i) y[i] += step * n01(rng);
        return y;
    };

    // Probe: random moves from theta0 estimate the mean uphill step.
    double uphill = 0.0;
    int uphill_count = 0;
    for (int p = 1; p < config.sa_probe && !eval.exhausted(); ++p) {
        const double fy = eval(propose(x));
        if (fy > fx) {
            uphill += fy - fx;
            ++uphill_count;
        }
    }
    const double mean_uphill = uphill_count > 0 ? uphill / uphill_count : 1.0;
    const double t0 = -mean_uphill / std::log(config.sa_initial_acceptance);
    const double tf = -mean_uphill / std::log(config.sa_final_acceptance);
    const long steps = eval.remaining();
    const double ratio = steps > 1 ? std::pow(tf / t0, 1.0 / static_cast<double>(steps - 1)) : 1.0;

    double temperature = t0;
    int window_accepts = 0;
    int window_count = 0;
    while (!eval.exhausted()) {
        std::vector<double> y = propose(x);
        const double fy = eval(y);
        if (metropolis_accept(fy - fx, temperature, rng)) {
            x = std::move(y);
            fx = fy;
            ++window_accepts;
        }
        if (++window_count == config.sa_window) {
            const double rate = static_cast<double>(window_accepts) / window_count;
            if (rate > config.sa_target_rate) step *= config.sa_step_factor;
            if (rate < config.sa_target_rate) step /= config.sa_step_factor;
            window_accepts = 0;
            window_count = 0;
        }
        temperature *= ratio;
    }
    eval.finish();
    return trace;
}

std::vector<double> uniform_crossover(std::span<const double> a, std::span<const double> b, std::mt19937_64& rng) {
    std::bernoulli_distribution coin(0.5);
    std::vector<double> child(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) child[i] = coin(rng) ? a[i] : b[i];
    return child;
}

RunTrace run_ga(std::span<const double> theta0, const Fitness& fitness, const std::vector<bool>& periodic,
                const BaselineConfig& config) {
    config.validate();
    if (periodic.size() != theta0.size()) throw OptimError("run_ga: periodic mask length does not match theta");
    RunTrace trace;
    trace.method = "ga";
    Ledger eval(fitness, config.budget, trace);
    auto rng = seeded_stream(config.seed, "ga.proposals");
    std::normal_distribution<double> n01(0.0, 1.0);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const std::size_t n = theta0.size();
    const double pm = config.ga_mutation_rate > 0.0 ? config.ga_mutation_rate : 1.0 / static_cast<double>(n);
    auto wrap = [&](std::vector<double>& x) {
        for (std::size_t i = 0; i < n; ++i) {
            if (periodic[i]) x[i] = wrap_gene(x[i]);
        }
    };

    auto pop = warm_population(theta0, config.ga_population, config.init_sigma, rng);
    std::vector<double> fit;
    for (auto& x : pop) {
        if (eval.exhausted()) break;
        wrap(x);
        fit.push_back(eval(x));
    }
    pop.resize(fit.size());
    std::uniform_int_distribution<std::size_t> pick(0, pop.size() - 1);
    auto tournament = [&]() -> const std::vector<double>& {
        std::size_t best = pick(rng);
        for (int t = 1; t < config.ga_tournament; ++t) {
            const std::size_t c = pick(rng);
            if (fit[c] < fit[best]) best = c;
        }
        return pop[best];
    };

    while (!eval.exhausted()) {
        const auto elite = static_cast<std::size_t>(std::min_element(fit.begin(), fit.end()) - fit.begin());
        std::vector<std::vector<double>> next{pop[elite]};
        std::vector<double> next_fit{fit[elite]};
        while (next.size() < pop.size() && !eval.exhausted()) {
            const std::vector<double>& a = tournament();
            const std::vector<double>& b = tournament();
            std::vector<double> child = uniform_crossover(a, b, rng);
            const double progress = static_cast<double>(trace.evaluations) / static_cast<double>(config.budget);
            const double sigma = config.ga_sigma_start + (config.ga_sigma_end - config.ga_sigma_start) * progress;
            for (std::size_t i = 0; i < n; ++i) {
                if (u01(rng) < pm) child[i] += sigma * n01(rng);
            }
            wrap(child);
            next_fit.push_back(eval(child));
            next.push_back(std::move(child));
        }
        pop = std::move(next);
        fit = std::move(next_fit);
        pick = std::uniform_int_distribution<std::size_t>(0, pop.size() - 1);
    }
    eval.finish();
    return trace;
}

std::vector<double> segment_crossover(std::span<const double> parent, std::span<const double> mutant, double cr,
                                      std::mt19937_64& rng) {
    const std::size_t n = parent.size();
    std::vector<double> trial(parent.begin(), parent.end());
    std::uniform_int_distribution<std::size_t> start(0, n - 1);
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    std::size_t j = start(rng);
    std::size_t len = 0;
    do {
        trial[j] = mutant[j];
        j = (j + 1) % n;
        ++len;
    } while (len < n && u01(rng) < cr);
    return trial;
}

RunTrace run_de(std::span<const double> theta0, const Fitness& fitness, const BaselineConfig& config) {
    config.validate();
    RunTrace trace;
    trace.method = "de";
    Ledger eval(fitness, config.budget, trace);
    auto rng = seeded_stream(config.seed, "de.proposals");
    const std::size_t n = theta0.size();

    auto pop = warm_population(theta0, config.de_population, config.init_sigma, rng);
    std::vector<double> fit;
    for (auto& x : pop) {
        if (eval.exhausted()) break;
        fit.push_back(eval(x));
    }
    if (fit.size() < pop.size()) {
        eval.finish();
        return trace;
    }
    const std::size_t np = pop.size();
    std::uniform_int_distribution<std::size_t> pick(0, np - 1);
    while (!eval.exhausted()) {
        for (std::size_t i = 0; i < np && !eval.exhausted(); ++i) {
            std::size_t r1, r2, r3;
            do r1 = pick(rng); while (r1 == i);
            do r2 = pick(rng); while (r2 == i || r2 == r1);
            do r3 = pick(rng); while (r3 == i || r3 == r1 || r3 == r2);
            std::vector<double> mutant(n);
            for (std::size_t g = 0; g < n; ++g) mutant[g] = pop[r1][g] + config.de_f * (pop[r2][g] - pop[r3][g]);
            std::vector<double> trial = segment_crossover(pop[i], mutant, config.de_cr, rng);
            const double ft = eval(trial);
            if (ft <= fit[i]) {
                pop[i] = std::move(trial);
                fit[i] = ft;
            }
        }
    }
    eval.finish();
    return trace;
}

RunTrace run_baseline(std::span<const double> theta0, const Fitness& fitness, const std::vector<bool>& periodic,
                      const BaselineConfig& config) {
    switch (config.method) {
        case BaselineMethod::sa: return run_sa(theta0, fitness, config);
        case BaselineMethod::ga: return run_ga(theta0, fitness, periodic, config);
        case BaselineMethod::de: return run_de(theta0, fitness, config);
    }
    throw OptimError("unknown baseline method");
}

}  // namespace diffconst
