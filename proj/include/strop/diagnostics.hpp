#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "strop/linops.hpp"
#include "strop/penalty.hpp"
#include "strop/problems.hpp"
#include "strop/trust_region.hpp"

namespace strop {

enum class CheckOutcome { pass, fail, vacuous };

// Every check reports the two sides it compared plus a signed margin
// (nonnegative iff the check holds); vacuous means no qualifying data.
struct CheckResult {
    std::string name;
    CheckOutcome outcome = CheckOutcome::vacuous;
    double lhs = 0.0;
    double rhs = 0.0;
    double margin = 0.0;
    std::string note;
};

const char* to_string(CheckOutcome outcome);

// Empirical strong-growth ratio (1/n) sum_i ||grad f_i(x)||^2 / ||grad f(x)||^2,
// exact over all samples. Throws StationaryPoint when ||grad f(x)|| <= g_tol.
double sgc_ratio(const FiniteSumProblem& problem, const Vec& x, double g_tol = 1e-14);

// Same ratio for the penalized oracle (per-sample penalized gradients against
// the full penalized gradient).
double sgc_ratio_penalized(const FiniteSumProblem& problem, const ConstraintMap* constraints,
                           double mu, const Vec& x, double g_tol = 1e-14);

struct SmoothnessEstimate {
    Vec per_sample;          // max gradient difference quotient, one per sample
    double mean_grad = 0.0;  // same quotient for the averaged gradient
    double max_per_sample() const;
};

// Lower bounds on Lipschitz constants from pairwise difference quotients over
// the probe set; degenerate pairs (zero distance) are skipped.
SmoothnessEstimate estimate_smoothness(const FiniteSumProblem& problem,
                                       const std::vector<Vec>& probes);

// Step-parameter range on accepted iterations:
// a in [2(1-c0)/(l_max - c0) - 1e-9, 1 + 1e-12]. Vacuous when no iteration was
// accepted or when l_max <= c0 (the bound's own precondition).
CheckResult check_ak_bounds(const Trace& trace, double l_max, double c0);

// Over the maximal trace prefix with every recorded ||g|| >= eps:
// delta_k >= eps / (4 * r * m_hat) - 1e-12, where r = 2/(1-c2).
CheckResult check_radius_lower_bound(const Trace& trace, double eps, double m_hat, double c2);

// On the same prefix: n_fail/n_success <= log(4*r*m_hat*delta_max/eps)/log(nu1) + 1.
CheckResult check_success_ratio(const Trace& trace, double eps, double m_hat,
                                const TrustRegionConfig& cfg);

// Model accuracy constant: replays each stored iterate, rebuilds the sampled
// model, and measures |model change - sampled objective change| / ||p||^2.
// Passes against bound l_max when given; vacuous without stored states.
struct ModelAccuracyResult {
    double m_hat = 0.0;
    CheckResult check;
};
ModelAccuracyResult check_model_accuracy(const FiniteSumProblem& problem,
                                         const ConstraintMap* constraints, double mu,
                                         const Trace& trace,
                                         std::optional<double> l_max = std::nullopt);

// Cauchy decrease pred_red >= 0.5 * ||g|| * min(delta, ||g||/h_norm_bound) on
// every stepped iteration; h_norm_bound = 1 for the unconstrained model.
CheckResult check_cauchy_decrease(const Trace& trace, double h_norm_bound = 1.0);

// Final feasibility against (eps + g_hat) / (mu * sigma_min_hat). Vacuous when
// the stationarity precondition fails or sigma_min_hat is zero.
CheckResult check_feasibility_bound(const KktResidual& final_kkt, double mu, double g_hat,
                                    double sigma_min_hat, double eps);

// Max relative error of analytic gradients against central differences with
// h = 1e-5 * (1 + ||x||), error scaled by max(1, ||g_a||, ||g_fd||).
double finite_difference_check(const std::function<double(const Vec&)>& value,
                               const std::function<Vec(const Vec&)>& gradient,
                               const std::vector<Vec>& probes);

// Constants observed along stored iterates.
struct IterateConstants {
    double g_hat = 0.0;                    // max ||grad f(x_k)||
    std::optional<double> sigma_min_hat{}; // min sigma_min(J(x_k))
    std::optional<double> c_c_hat{};       // max sigma_max(J(x_k))
};
IterateConstants estimate_iterate_constants(const FiniteSumProblem& problem,
                                            const ConstraintMap* constraints,
                                            const std::vector<Vec>& iterates);

struct DiagnosticsReport {
    std::optional<double> rho_hat{};
    std::optional<double> tau_hat{};
    std::optional<double> l_hat_mean{};
    std::optional<double> l_hat_max_sample{};
    std::optional<double> m_hat{};
    double r_const = 0.0; // 2/(1-c2)
    std::optional<double> sigma_min_hat{};
    std::optional<double> g_hat{};
    std::optional<double> c_c_hat{};
    std::vector<CheckResult> checks;

    bool all_passed() const; // true iff no non-vacuous failure
};

struct DiagnosticsInputs {
    const FiniteSumProblem* problem = nullptr;
    const ConstraintMap* constraints = nullptr; // null for unconstrained runs
    double mu = 0.0;
    TrustRegionConfig tr{};
    const Trace* trace = nullptr;
    double eps = 1e-6;          // gradient threshold for prefix-based checks
    std::optional<KktResidual> final_kkt{};
    std::size_t probe_cap = 32; // iterates sampled for constants estimation
};

// Assemble the full report: estimated constants plus every applicable check.
DiagnosticsReport build_report(const DiagnosticsInputs& in);

} // namespace strop
