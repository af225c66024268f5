#include "strop/penalty.hpp"

#include <cmath>
#include <string>

#include "strop/detail/engine.hpp"
#include "strop/errors.hpp"

namespace strop {
namespace {

// StepOracle over the penalized objective. Constraint values, the penalty
// shift and the multiplier pull J^T c are evaluated once per iterate and
// shared across the batch.
class PenaltyStepOracle final : public detail::StepOracle {
public:
    explicit PenaltyStepOracle(const PenalizedOracle& o) : o_(o) {}

    std::size_t sample_count() const override { return o_.problem->sample_count(); }
    std::size_t dim() const override { return o_.problem->dim(); }
    bool identity_model() const override { return !o_.penalized(); }

    void begin_iterate(const Vec& x) override {
        x_ = &x;
        if (o_.penalized()) {
            c_ = o_.constraints->value(x);
            pen_ = 0.5 * o_.mu * dot(c_, c_);
            jtc_ = o_.constraints->jac_tvec(x, c_);
        }
    }

    double iterate_sample_value(std::size_t i) override {
        const double base = o_.problem->sample_value(i, *x_);
        return o_.penalized() ? base + pen_ : base;
    }

    Vec iterate_sample_gradient(std::size_t i) override {
        Vec g = o_.problem->sample_gradient(i, *x_);
        if (o_.penalized()) axpy(o_.mu, jtc_, g);
        return g;
    }

    double iterate_quad(const Vec& g) override {
        const double gg = dot(g, g);
        if (!o_.penalized()) return gg;
        Vec jg = o_.constraints->jac_vec(*x_, g);
        return gg + o_.mu * dot(jg, jg);
    }

    void begin_trial(const Vec& y) override {
        y_ = &y;
        if (o_.penalized()) {
            Vec cy = o_.constraints->value(y);
            trial_pen_ = 0.5 * o_.mu * dot(cy, cy);
        }
    }

    double trial_sample_value(std::size_t i) override {
        const double base = o_.problem->sample_value(i, *y_);
        return o_.penalized() ? base + trial_pen_ : base;
    }

    double full_value(const Vec& x) override { return penalized_full_value(o_, x); }
    double epoch_objective(const Vec& x) override { return o_.problem->value(x); }
    Vec full_gradient(const Vec& x) override { return penalized_full_gradient(o_, x); }

    std::optional<double> feasibility_at_iterate() const override {
        if (o_.constraints == nullptr) return std::nullopt;
        if (o_.penalized()) return norm2(c_);
        return norm2(o_.constraints->value(*x_));
    }

    std::optional<double> feasibility(const Vec& x) override {
        if (o_.constraints == nullptr) return std::nullopt;
        return norm2(o_.constraints->value(x));
    }

private:
    const PenalizedOracle& o_;
    const Vec* x_ = nullptr;
    const Vec* y_ = nullptr;
    Vec c_;
    Vec jtc_;
    double pen_ = 0.0;
    double trial_pen_ = 0.0;
};

void check_oracle(const PenalizedOracle& o) {
    if (o.problem == nullptr) {
        throw ConfigError("penalized oracle has no problem");
    }
    if (!(o.mu >= 0.0)) {
        throw ConfigError("mu must be >= 0, got " + std::to_string(o.mu));
    }
    if (o.constraints != nullptr && o.constraints->dim() != o.problem->dim()) {
        throw DimensionMismatch("constraint dim " + std::to_string(o.constraints->dim()) +
                                " vs problem dim " + std::to_string(o.problem->dim()));
    }
}

} // namespace

void PenaltyConfig::validate() const {
    if (!(mu >= 0.0)) {
        throw ConfigError("mu must be >= 0, got " + std::to_string(mu));
    }
    tr.validate();
}

double penalized_value(const PenalizedOracle& oracle, std::size_t i, const Vec& x) {
    check_oracle(oracle);
    const double base = oracle.problem->sample_value(i, x);
    if (!oracle.penalized()) return base;
    Vec c = oracle.constraints->value(x);
    return base + 0.5 * oracle.mu * dot(c, c);
}

Vec penalized_gradient(const PenalizedOracle& oracle, std::size_t i, const Vec& x) {
    check_oracle(oracle);
    Vec g = oracle.problem->sample_gradient(i, x);
    if (!oracle.penalized()) return g;
    Vec c = oracle.constraints->value(x);
    Vec jtc = oracle.constraints->jac_tvec(x, c);
    axpy(oracle.mu, jtc, g);
    return g;
}

double penalized_full_value(const PenalizedOracle& oracle, const Vec& x) {
    check_oracle(oracle);
    const double base = oracle.problem->value(x);
    if (!oracle.penalized()) return base;
    Vec c = oracle.constraints->value(x);
    return base + 0.5 * oracle.mu * dot(c, c);
}

Vec penalized_full_gradient(const PenalizedOracle& oracle, const Vec& x) {
    check_oracle(oracle);
    Vec g = oracle.problem->gradient(x);
    if (!oracle.penalized()) return g;
    Vec c = oracle.constraints->value(x);
    Vec jtc = oracle.constraints->jac_tvec(x, c);
    axpy(oracle.mu, jtc, g);
    return g;
}

HessianModel::HessianModel(const ConstraintMap* constraints, Vec x, double mu)
    : constraints_(constraints), x_(std::move(x)), mu_(mu) {
    if (!(mu >= 0.0)) {
        throw ConfigError("mu must be >= 0, got " + std::to_string(mu));
    }
    if (constraints_ != nullptr && constraints_->dim() != x_.size()) {
        throw DimensionMismatch("constraint dim " + std::to_string(constraints_->dim()) +
                                " vs point length " + std::to_string(x_.size()));
    }
}

Vec HessianModel::apply(const Vec& v) const {
    if (v.size() != x_.size()) {
        throw DimensionMismatch("HessianModel::apply: length " + std::to_string(v.size()) +
                                " vs dim " + std::to_string(x_.size()));
    }
    Vec out = v;
    if (constraints_ == nullptr || mu_ == 0.0) return out;
    Vec jv = constraints_->jac_vec(x_, v);
    Vec jtjv = constraints_->jac_tvec(x_, jv);
    axpy(mu_, jtjv, out);
    return out;
}

double HessianModel::quad(const Vec& g) const {
    const double gg = dot(g, g);
    if (constraints_ == nullptr || mu_ == 0.0) return gg;
    Vec jg = constraints_->jac_vec(x_, g);
    return gg + mu_ * dot(jg, jg);
}

double HessianModel::norm_bound() const {
    if (!norm_bound_) {
        if (constraints_ == nullptr || mu_ == 0.0) {
            norm_bound_ = 1.0;
        } else {
            const double smax = max_singular_value(constraints_->jacobian(x_));
            norm_bound_ = 1.0 + mu_ * smax * smax;
        }
    }
    return *norm_bound_;
}

std::pair<Vec, double> cauchy_step_general(const HessianModel& model, const Vec& g,
                                           double delta, double g_tol) {
    if (!(delta > 0.0)) {
        throw Error("cauchy step requires delta > 0, got " + std::to_string(delta));
    }
    const double gn = norm2(g);
    if (gn <= g_tol) {
        throw GradientVanished("gradient norm " + std::to_string(gn) + " at or below " +
                               std::to_string(g_tol));
    }
    const double gg = dot(g, g);
    const double quad = model.quad(g);
    const double a_star = gg / quad;
    const double a = (a_star * gn <= delta) ? a_star : delta / gn;
    Vec p(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) p[i] = -a * g[i];
    return {std::move(p), a};
}

double predicted_reduction_general(const HessianModel& model, const Vec& g, double a) {
    return detail::predicted_reduction(a, dot(g, g), model.quad(g));
}

KktResidual kkt_residual(const FiniteSumProblem& problem, const ConstraintMap& constraints,
                         double mu, const Vec& x) {
    KktResidual res;
    Vec c = constraints.value(x);
    res.feasibility = norm2(c);
    res.multiplier = c;
    scale(res.multiplier, mu);
    Vec g = problem.gradient(x);
    Vec jtl = constraints.jac_tvec(x, res.multiplier);
    axpy(1.0, jtl, g);
    res.stationarity = norm2(g);
    return res;
}

std::pair<SolverState, IterationRecord> str_penalty_step(const PenalizedOracle& oracle,
                                                         const SolverState& state,
                                                         CounterRng& rng,
                                                         const TrustRegionConfig& cfg) {
    check_oracle(oracle);
    PenaltyStepOracle step_oracle(oracle);
    SolverState next = state;
    IterationRecord rec;
    const auto kind =
        detail::engine_step(step_oracle, next, rng, cfg, 1, rec, /*store_states=*/false);
    if (kind == detail::StepKind::stationary) {
        throw GradientVanished("sampled penalized gradient norm " +
                               std::to_string(rec.grad_norm) +
                               " at or below g_tol at iteration " + std::to_string(state.k));
    }
    return {std::move(next), std::move(rec)};
}

PenaltyRunResult run_str_penalty(const FiniteSumProblem& problem,
                                 const ConstraintMap* constraints, const PenaltyConfig& cfg,
                                 std::uint64_t seed, const StopRule& stop, const Vec& x0,
                                 const RunOptions& opts) {
    cfg.validate();
    PenalizedOracle oracle{&problem, constraints, cfg.mu};
    check_oracle(oracle);
    PenaltyStepOracle step_oracle(oracle);
    PenaltyRunResult out;
    out.run = detail::engine_run(step_oracle, cfg.tr, seed, stop, x0, opts);
    if (constraints != nullptr) {
        out.final_kkt = kkt_residual(problem, *constraints, cfg.mu, out.run.state.x);
    }
    return out;
}

} // namespace strop
