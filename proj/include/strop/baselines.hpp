#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "strop/linops.hpp"
#include "strop/problems.hpp"
#include "strop/rng.hpp"
#include "strop/trust_region.hpp"

namespace strop {

enum class MultiplierUpdate {
    damped_increment, // lambda <- lambda + lambda_damp * mu * c(x)
    damped_full,      // lambda <- lambda_damp * (lambda + mu * c(x))
};

struct BaselineConfig {
    double lr = 0.05;      // step size for sgd / sgd_proj / riemannian_gd
    std::size_t batch = 1; // mini-batch size, uniform with replacement

    // Augmented Lagrangian controls.
    double auglag_inner_lr = 0.01;
    double auglag_mu0 = 0.1;
    double auglag_mu_growth = 1.1;
    std::size_t auglag_inner_epochs = 10;
    double auglag_lambda_damp = 0.5;
    MultiplierUpdate auglag_update = MultiplierUpdate::damped_increment;

    void validate() const;
};

// One mini-batch SGD step: x - lr * mean of sampled gradients.
Vec sgd_step(const FiniteSumProblem& problem, const Vec& x, CounterRng& rng,
             const BaselineConfig& cfg);

// SGD step followed by re-orthonormalization of the d x k iterate through the
// Q factor of its thin QR (a retraction onto the feasible set).
Vec projected_sgd_step(const FiniteSumProblem& problem, const Vec& w, std::size_t d,
                       std::size_t k, CounterRng& rng, const BaselineConfig& cfg);

// Riemannian gradient descent on orthonormal frames: project the sampled
// gradient G onto the tangent space at W via G - W*(W^T G + G^T W)/2, step,
// retract by thin QR.
Vec riemannian_gd_step(const FiniteSumProblem& problem, const Vec& w, std::size_t d,
                       std::size_t k, CounterRng& rng, const BaselineConfig& cfg);

struct BaselineIterRecord {
    std::size_t k = 0;
    long long sample_index = -1;
    double grad_norm = 0.0;  // norm of the applied (batch mean) gradient
    double obj_sample = 0.0; // sampled objective at the pre-step iterate
    std::optional<double> feasibility{};
};

struct BaselineRunResult {
    std::vector<BaselineIterRecord> trace;
    Vec x;
    double final_objective = 0.0; // mean objective over all samples
    std::optional<double> final_feasibility{};
    std::size_t oracle_calls = 0;
    std::size_t deterministic_evals = 0;
    std::vector<EpochLogEntry> epoch_log;
};

enum class BaselineMethod { sgd, sgd_proj, riemannian_gd };

// Run a stepwise baseline for max_iter iterations. Constrained variants
// (sgd_proj, riemannian_gd) need the orthogonality geometry and record
// per-iterate feasibility ||c(x)||.
BaselineRunResult run_baseline(BaselineMethod method, const FiniteSumProblem& problem,
                               const OrthogonalityConstraint* constraint,
                               const BaselineConfig& cfg, std::uint64_t seed,
                               std::size_t max_iter, const Vec& x0, bool log_epochs);

struct AugLagOuterRecord {
    std::size_t outer = 0;
    double objective = 0.0;   // mean objective after the inner solve
    double feasibility = 0.0; // ||c(x)||
    double lambda_norm = 0.0;
    double mu = 0.0;
};

struct AugLagResult {
    std::vector<AugLagOuterRecord> outer_trace;
    Vec x;
    Vec lambda;
    double final_objective = 0.0;
    double final_feasibility = 0.0;
    std::size_t oracle_calls = 0;
    std::size_t deterministic_evals = 0;
    std::vector<EpochLogEntry> epoch_log;
};

// Stochastic augmented Lagrangian: inner mini-batch SGD epochs on
//   L(x) = f(x) + lambda^T c(x) + (mu/2) ||c(x)||^2,
// then lambda <- lambda + lambda_damp * mu * c(x) and mu <- mu_growth * mu.
AugLagResult auglag_run(const FiniteSumProblem& problem, const ConstraintMap* constraints,
                        const BaselineConfig& cfg, std::uint64_t seed,
                        std::size_t outer_iters, const Vec& x0, bool log_epochs);

} // namespace strop
