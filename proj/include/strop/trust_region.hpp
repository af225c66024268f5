#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "strop/linops.hpp"
#include "strop/problems.hpp"
#include "strop/rng.hpp"

namespace strop {

struct TrustRegionConfig {
    double delta0 = 1.0;    // initial radius, in (0, delta_max]
    double delta_max = 10.0;
    double c0 = 0.05;       // acceptance threshold, 0 < c0 <= c1 <= c2 < 1
    double c1 = 0.10;       // shrink below this ratio
    double c2 = 0.50;       // expand above this ratio
    double nu1 = 2.0;       // shrink divisor, > 1
    double nu2 = 5.0;       // expansion factor, > 1 unless explicitly allowed
    double g_tol = 1e-14;   // sampled gradients at or below this are treated as stationary
    std::size_t max_iter = 1000;
    std::optional<double> a_max{}; // optional step-parameter clip, disabled by default
    bool allow_nonstandard_nu2 = false;

    void validate() const; // throws ConfigError naming the offending field
};

struct SolverState {
    Vec x;
    double delta = 0.0;
    std::size_t k = 0;
    std::size_t n_success = 0;
    std::size_t n_fail = 0;
    std::size_t n_stationary = 0; // stationary-sample skips (x and delta unchanged)
};

struct IterationRecord {
    std::size_t k = 0;
    long long sample_index = -1; // first index of the drawn batch
    double grad_norm = 0.0;      // sampled (possibly penalized) gradient norm
    double a = 0.0;              // step parameter; 0 on a stationary-sample skip
    double r = 0.0;
    double delta_before = 0.0;
    double delta_after = 0.0;
    bool accepted = false;
    double pred_red = 0.0;
    double actual_red = 0.0;
    double obj_sample = 0.0; // sampled objective at x_k (batch mean)
    std::optional<double> full_grad_norm{};
    std::optional<double> feasibility{};  // ||c(x_k)||, constrained runs only
    std::optional<double> stationarity{}; // full penalized gradient norm at eval iterations
    bool stationary_skip = false;
    // Populated only when state storage is requested (replay, deep checks).
    std::optional<Vec> x_before{};
    std::vector<std::size_t> batch_indices{};
};

using Trace = std::vector<IterationRecord>;

// Closed-form Cauchy point of  m(p) = g^T p + ||p||^2 / 2  over ||p|| <= delta:
// p = -a g with a = 1 when ||g|| <= delta, else a = delta / ||g||.
// Throws GradientVanished when ||g|| <= g_tol.
std::pair<Vec, double> cauchy_step_first_order(const Vec& g, double delta,
                                               double g_tol = 1e-14);

// m(0) - m(-a g) = a (1 - a/2) ||g||^2 for the first-order model.
double predicted_reduction_first_order(const Vec& g, double a);

// (f_before - f_after) / pred_red. Throws NonpositivePrediction if pred_red <= 0.
double acceptance_ratio(double f_before, double f_after, double pred_red);

// r < c1: delta/nu1.  r > c2: min(nu2*delta, delta_max).  Otherwise unchanged
// (boundary ties keep the radius).
double radius_update(double delta, double r, const TrustRegionConfig& cfg);

struct StopRule {
    double grad_tol = 0.0;       // 0 disables the full-gradient stop
    std::size_t eval_every = 0;  // iterations between full-gradient checks; 0 = once per epoch
};

struct RunOptions {
    std::size_t batch = 1;     // per-sample oracles averaged into one draw
    bool store_states = false; // keep x_k and batch indices on each record
    bool log_epochs = false;   // record full objective at each completed epoch
};

struct EpochLogEntry {
    std::size_t epoch = 0;
    double objective_mean = 0.0; // raw (1/n) sum_i f_i, penalty term excluded
    std::optional<double> feasibility{};
};

struct RunResult {
    Trace trace;
    SolverState state;
    double final_grad_norm = std::numeric_limits<double>::quiet_NaN();
    std::optional<double> final_feasibility{};
    bool stopped_early = false;        // full-gradient stop fired before max_iter
    std::size_t oracle_calls = 0;      // stochastic gradient evaluations
    std::size_t deterministic_evals = 0; // full-gradient / full-objective evaluations
    std::vector<EpochLogEntry> epoch_log;
};

// One iteration: draw i uniformly, take the Cauchy step of the sampled model,
// accept when the sampled reduction ratio exceeds c0, update the radius.
// Throws GradientVanished when the sampled gradient norm is at or below g_tol;
// the run loop treats that as a stationarity signal.
std::pair<SolverState, IterationRecord> str_step(const FiniteSumProblem& problem,
                                                 const SolverState& state, CounterRng& rng,
                                                 const TrustRegionConfig& cfg);

// Full run: iterate str_step until max_iter or until the full gradient norm
// drops to stop.grad_tol (checked every stop.eval_every iterations). Stationary
// samples are recorded and skipped. max_iter = 0 returns the initial state.
RunResult run_str(const FiniteSumProblem& problem, const TrustRegionConfig& cfg,
                  std::uint64_t seed, const StopRule& stop, const Vec& x0,
                  const RunOptions& opts = {});

} // namespace strop
