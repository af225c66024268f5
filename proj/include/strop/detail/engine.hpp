#pragma once

#include <cstdint>
#include <optional>

#include "strop/linops.hpp"
#include "strop/problems.hpp"
#include "strop/rng.hpp"
#include "strop/trust_region.hpp"

namespace strop::detail {

// Oracle abstraction shared by the plain and penalized solvers. Both run the
// same stepping code, so a penalized run with mu = 0 retraces the plain run
// bit for bit. begin_iterate/begin_trial let implementations cache terms that
// are shared across a batch (constraint values, penalty shifts).
class StepOracle {
public:
    virtual ~StepOracle() = default;

    virtual std::size_t sample_count() const = 0;
    virtual std::size_t dim() const = 0;

    // True when the model curvature is exactly the identity; the step
    // parameter is then 1 whenever the gradient fits inside the region.
    virtual bool identity_model() const = 0;

    virtual void begin_iterate(const Vec& x) = 0;
    virtual double iterate_sample_value(std::size_t i) = 0;
    virtual Vec iterate_sample_gradient(std::size_t i) = 0;
    virtual double iterate_quad(const Vec& g) = 0; // g^T H g at the iterate

    virtual void begin_trial(const Vec& y) = 0;
    virtual double trial_sample_value(std::size_t i) = 0;

    virtual double full_value(const Vec& x) = 0;
    virtual Vec full_gradient(const Vec& x) = 0;

    // Raw (unpenalized) mean objective for epoch logs, so method comparisons
    // share one loss axis; equals full_value for plain oracles.
    virtual double epoch_objective(const Vec& x) { return full_value(x); }

    virtual std::optional<double> feasibility_at_iterate() const { return std::nullopt; }
    virtual std::optional<double> feasibility(const Vec& x) { return std::nullopt; }
};

// Plain finite-sum oracle with identity model curvature.
class PlainStepOracle final : public StepOracle {
public:
    explicit PlainStepOracle(const FiniteSumProblem& p) : p_(p) {}

    std::size_t sample_count() const override { return p_.sample_count(); }
    std::size_t dim() const override { return p_.dim(); }
    bool identity_model() const override { return true; }

    void begin_iterate(const Vec& x) override { x_ = &x; }
    double iterate_sample_value(std::size_t i) override { return p_.sample_value(i, *x_); }
    Vec iterate_sample_gradient(std::size_t i) override { return p_.sample_gradient(i, *x_); }
    double iterate_quad(const Vec& g) override { return dot(g, g); }

    void begin_trial(const Vec& y) override { y_ = &y; }
    double trial_sample_value(std::size_t i) override { return p_.sample_value(i, *y_); }

    double full_value(const Vec& x) override { return p_.value(x); }
    Vec full_gradient(const Vec& x) override { return p_.gradient(x); }

private:
    const FiniteSumProblem& p_;
    const Vec* x_ = nullptr;
    const Vec* y_ = nullptr;
};

enum class StepKind { stepped, stationary };

// a ||g||^2 - a^2 (g^T H g) / 2; the single expression every predicted
// reduction in the library reduces to.
inline double predicted_reduction(double a, double gg, double quad) {
    return a * gg - 0.5 * a * a * quad;
}

StepKind engine_step(StepOracle& oracle, SolverState& state, CounterRng& rng,
                     const TrustRegionConfig& cfg, std::size_t batch,
                     IterationRecord& rec, bool store_states);

RunResult engine_run(StepOracle& oracle, const TrustRegionConfig& cfg, std::uint64_t seed,
                     const StopRule& stop, const Vec& x0, const RunOptions& opts);

} // namespace strop::detail
