#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <utility>

#include "strop/linops.hpp"
#include "strop/problems.hpp"
#include "strop/rng.hpp"
#include "strop/trust_region.hpp"

namespace strop {

struct PenaltyConfig {
    double mu = 1.0; // quadratic penalty weight, >= 0
    TrustRegionConfig tr;

    void validate() const;
};

// Quadratic-penalty view of a constrained finite sum:
//   phi_i(x) = f_i(x) + (mu/2) ||c(x)||^2.
// constraints may be null, in which case everything reduces to the base
// problem (as it also does, bit for bit, when mu = 0).
struct PenalizedOracle {
    const FiniteSumProblem* problem = nullptr;
    const ConstraintMap* constraints = nullptr;
    double mu = 0.0;

    bool penalized() const { return constraints != nullptr && mu != 0.0; }
};

double penalized_value(const PenalizedOracle& oracle, std::size_t i, const Vec& x);
Vec penalized_gradient(const PenalizedOracle& oracle, std::size_t i, const Vec& x);
double penalized_full_value(const PenalizedOracle& oracle, const Vec& x);
Vec penalized_full_gradient(const PenalizedOracle& oracle, const Vec& x);

// Model curvature H = I + mu J(x)^T J(x), applied as an operator (J products
// only; H itself is never materialized).
class HessianModel {
public:
    HessianModel(const ConstraintMap* constraints, Vec x, double mu);

    Vec apply(const Vec& v) const;   // H v
    double quad(const Vec& g) const; // g^T H g = ||g||^2 + mu ||J g||^2

    // ||H||_2 = 1 + mu sigma_max(J)^2, exact for this H. Materializes the
    // Jacobian once; cached.
    double norm_bound() const;

    const Vec& point() const { return x_; }
    double mu() const { return mu_; }

private:
    const ConstraintMap* constraints_;
    Vec x_;
    double mu_;
    mutable std::optional<double> norm_bound_;
};

// Cauchy step for m(p) = g^T p + p^T H p / 2 over ||p|| <= delta: the interior
// minimizer a* = ||g||^2 / (g^T H g) when a* ||g|| <= delta, else delta/||g||.
std::pair<Vec, double> cauchy_step_general(const HessianModel& model, const Vec& g,
                                           double delta, double g_tol = 1e-14);

// a ||g||^2 - a^2 (g^T H g) / 2.
double predicted_reduction_general(const HessianModel& model, const Vec& g, double a);

struct KktResidual {
    double stationarity = 0.0; // ||grad f(x) + J(x)^T lambda||
    double feasibility = 0.0;  // ||c(x)||
    Vec multiplier;            // lambda = mu c(x)
};

// KKT residual at x with the penalty multiplier estimate lambda = mu c(x).
// The stationarity equals ||grad phi(x)|| by construction.
KktResidual kkt_residual(const FiniteSumProblem& problem, const ConstraintMap& constraints,
                         double mu, const Vec& x);

// One iteration on the penalized objective: sampled gradient of phi_i, Cauchy
// step under H = I + mu J^T J, acceptance ratio on the sampled phi_i.
// Throws GradientVanished when the sampled penalized gradient vanishes.
std::pair<SolverState, IterationRecord> str_penalty_step(const PenalizedOracle& oracle,
                                                         const SolverState& state,
                                                         CounterRng& rng,
                                                         const TrustRegionConfig& cfg);

struct PenaltyRunResult {
    RunResult run;
    std::optional<KktResidual> final_kkt{}; // present when constraints exist
};

// Full penalized run; stop.grad_tol applies to the full penalized gradient.
PenaltyRunResult run_str_penalty(const FiniteSumProblem& problem,
                                 const ConstraintMap* constraints, const PenaltyConfig& cfg,
                                 std::uint64_t seed, const StopRule& stop, const Vec& x0,
                                 const RunOptions& opts = {});

} // namespace strop
