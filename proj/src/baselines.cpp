#include "strop/baselines.hpp"

#include <cmath>
#include <utility>

#include "strop/errors.hpp"

namespace strop {

namespace {

// Column-major flattening: w[b*d + a] = W(a, b).
Mat unflatten(const Vec& w, std::size_t d, std::size_t k) {
    if (w.size() != d * k) throw DimensionMismatch("iterate length does not match d*k");
    Mat m(d, k);
    for (std::size_t b = 0; b < k; ++b)
        for (std::size_t a = 0; a < d; ++a) m(a, b) = w[b * d + a];
    return m;
}

Vec flatten(const Mat& m) {
    Vec w(m.rows() * m.cols());
    for (std::size_t b = 0; b < m.cols(); ++b)
        for (std::size_t a = 0; a < m.rows(); ++a) w[b * m.rows() + a] = m(a, b);
    return w;
}

struct BatchSample {
    Vec grad;
    double value = 0.0;
    long long first_index = -1;
};

BatchSample sample_batch(const FiniteSumProblem& problem, const Vec& x, CounterRng& rng,
                         std::size_t batch) {
    BatchSample out;
    out.grad.assign(x.size(), 0.0);
    for (std::size_t b = 0; b < batch; ++b) {
        std::size_t idx = rng.next_index(problem.sample_count());
        if (b == 0) out.first_index = static_cast<long long>(idx);
        axpy(1.0, problem.sample_gradient(idx, x), out.grad);
        out.value += problem.sample_value(idx, x);
    }
    scale(out.grad, 1.0 / static_cast<double>(batch));
    out.value /= static_cast<double>(batch);
    if (!all_finite(out.grad) || !std::isfinite(out.value))
        throw NumericalFailure("sampled oracle returned a non-finite value");
    return out;
}

Vec retract_qr(const Mat& y) {
    return flatten(thin_qr(y).q);
}

Vec apply_step(BaselineMethod method, const Vec& x, const Vec& g, double lr,
               std::size_t d, std::size_t k) {
    switch (method) {
    case BaselineMethod::sgd:
        return add_scaled(x, -lr, g);
    case BaselineMethod::sgd_proj:
        return retract_qr(unflatten(add_scaled(x, -lr, g), d, k));
    case BaselineMethod::riemannian_gd: {
        Mat wm = unflatten(x, d, k);
        Mat gm = unflatten(g, d, k);
        Mat wtg = matmul(transpose(wm), gm); // k x k
        Mat y(d, k);
        for (std::size_t a = 0; a < d; ++a)
            for (std::size_t b = 0; b < k; ++b) {
                double corr = 0.0;
                for (std::size_t q = 0; q < k; ++q)
                    corr += wm(a, q) * 0.5 * (wtg(q, b) + wtg(b, q));
                // corr is the normal component W*sym(W^T G); subtracting it
                // leaves the tangent part of the gradient.
                y(a, b) = wm(a, b) - lr * (gm(a, b) - corr);
            }
        return retract_qr(y);
    }
    }
    throw Error("unknown baseline method");
}

} // namespace

void BaselineConfig::validate() const {
    if (!(lr > 0.0)) throw ConfigError("lr must be positive");
    if (batch < 1) throw ConfigError("batch must be at least 1");
    if (!(auglag_inner_lr > 0.0)) throw ConfigError("auglag_inner_lr must be positive");
    if (!(auglag_mu0 > 0.0)) throw ConfigError("auglag_mu0 must be positive");
    if (!(auglag_mu_growth >= 1.0)) throw ConfigError("auglag_mu_growth must be at least 1");
    if (auglag_inner_epochs < 1) throw ConfigError("auglag_inner_epochs must be at least 1");
    if (!(auglag_lambda_damp >= 0.0)) throw ConfigError("auglag_lambda_damp must be nonnegative");
}

Vec sgd_step(const FiniteSumProblem& problem, const Vec& x, CounterRng& rng,
             const BaselineConfig& cfg) {
    BatchSample s = sample_batch(problem, x, rng, cfg.batch);
    return apply_step(BaselineMethod::sgd, x, s.grad, cfg.lr, 0, 0);
}

Vec projected_sgd_step(const FiniteSumProblem& problem, const Vec& w, std::size_t d,
                       std::size_t k, CounterRng& rng, const BaselineConfig& cfg) {
    BatchSample s = sample_batch(problem, w, rng, cfg.batch);
    return apply_step(BaselineMethod::sgd_proj, w, s.grad, cfg.lr, d, k);
}

Vec riemannian_gd_step(const FiniteSumProblem& problem, const Vec& w, std::size_t d,
                       std::size_t k, CounterRng& rng, const BaselineConfig& cfg) {
    BatchSample s = sample_batch(problem, w, rng, cfg.batch);
    return apply_step(BaselineMethod::riemannian_gd, w, s.grad, cfg.lr, d, k);
}

BaselineRunResult run_baseline(BaselineMethod method, const FiniteSumProblem& problem,
                               const OrthogonalityConstraint* constraint,
                               const BaselineConfig& cfg, std::uint64_t seed,
                               std::size_t max_iter, const Vec& x0, bool log_epochs) {
    cfg.validate();
    if (x0.size() != problem.dim())
        throw DimensionMismatch("starting point length does not match problem dimension");
    bool constrained = method != BaselineMethod::sgd;
    if (constrained && constraint == nullptr)
        throw ConfigError("method requires the orthogonality constraint geometry");
    std::size_t d = constrained ? constraint->ambient_dim() : 0;
    std::size_t k = constrained ? constraint->subspace_dim() : 0;
    if (constrained && constraint->dim() != problem.dim())
        throw DimensionMismatch("constraint dimension does not match problem dimension");

    BaselineRunResult out;
    out.x = x0;
    CounterRng rng(seed, RngStream::sampling);

    std::size_t n = problem.sample_count();
    std::size_t next_epoch_mark = n;
    std::size_t epoch = 0;
    auto log_epoch = [&](std::size_t e) {
        EpochLogEntry entry;
        entry.epoch = e;
        entry.objective_mean = problem.value(out.x);
        ++out.deterministic_evals;
        if (constrained) entry.feasibility = norm2(constraint->value(out.x));
        if (!std::isfinite(entry.objective_mean))
            throw NumericalFailure("objective became non-finite during epoch logging");
        out.epoch_log.push_back(entry);
    };
    if (log_epochs) log_epoch(0);

    for (std::size_t it = 0; it < max_iter; ++it) {
        BatchSample s = sample_batch(problem, out.x, rng, cfg.batch);
        BaselineIterRecord rec;
        rec.k = it;
        rec.sample_index = s.first_index;
        rec.obj_sample = s.value;
        rec.grad_norm = norm2(s.grad);

        out.x = apply_step(method, out.x, s.grad, cfg.lr, d, k);
        if (!all_finite(out.x)) throw NumericalFailure("iterate became non-finite");
        if (constrained) rec.feasibility = norm2(constraint->value(out.x));
        out.trace.push_back(std::move(rec));
        out.oracle_calls += cfg.batch;
        if (log_epochs) {
            while (out.oracle_calls >= next_epoch_mark) {
                ++epoch;
                log_epoch(epoch);
                next_epoch_mark += n;
            }
        }
    }

    out.final_objective = problem.value(out.x);
    ++out.deterministic_evals;
    if (constrained) out.final_feasibility = norm2(constraint->value(out.x));
    return out;
}

AugLagResult auglag_run(const FiniteSumProblem& problem, const ConstraintMap* constraints,
                        const BaselineConfig& cfg, std::uint64_t seed,
                        std::size_t outer_iters, const Vec& x0, bool log_epochs) {
    cfg.validate();
    if (x0.size() != problem.dim())
        throw DimensionMismatch("starting point length does not match problem dimension");
    if (constraints != nullptr && constraints->dim() != problem.dim())
        throw DimensionMismatch("constraint dimension does not match problem dimension");

    AugLagResult out;
    out.x = x0;
    std::size_t m = constraints ? constraints->constraint_count() : 0;
    out.lambda.assign(m, 0.0);
    double mu = cfg.auglag_mu0;
    CounterRng rng(seed, RngStream::sampling);

    std::size_t n = problem.sample_count();
    std::size_t iters_per_epoch = (n + cfg.batch - 1) / cfg.batch;
    if (iters_per_epoch == 0) iters_per_epoch = 1;

    auto feas = [&](const Vec& x) {
        return constraints ? norm2(constraints->value(x)) : 0.0;
    };
    auto log_epoch = [&](std::size_t e) {
        EpochLogEntry entry;
        entry.epoch = e;
        entry.objective_mean = problem.value(out.x);
        ++out.deterministic_evals;
        if (constraints) entry.feasibility = feas(out.x);
        if (!std::isfinite(entry.objective_mean))
            throw NumericalFailure("objective became non-finite during epoch logging");
        out.epoch_log.push_back(entry);
    };
    std::size_t epochs_done = 0;
    if (log_epochs) log_epoch(0);

    for (std::size_t outer = 0; outer < outer_iters; ++outer) {
        for (std::size_t e = 0; e < cfg.auglag_inner_epochs; ++e) {
            for (std::size_t it = 0; it < iters_per_epoch; ++it) {
                BatchSample s = sample_batch(problem, out.x, rng, cfg.batch);
                Vec g = std::move(s.grad);
                if (constraints) {
                    // gradient of lambda^T c + (mu/2)||c||^2 is J^T (lambda + mu c)
                    Vec c = constraints->value(out.x);
                    Vec y(m);
                    for (std::size_t j = 0; j < m; ++j) y[j] = out.lambda[j] + mu * c[j];
                    axpy(1.0, constraints->jac_tvec(out.x, y), g);
                }
                out.x = add_scaled(out.x, -cfg.auglag_inner_lr, g);
                if (!all_finite(out.x)) throw NumericalFailure("iterate became non-finite");
                out.oracle_calls += cfg.batch;
            }
            ++epochs_done;
            if (log_epochs) log_epoch(epochs_done);
        }

        AugLagOuterRecord rec;
        rec.outer = outer;
        rec.objective = problem.value(out.x);
        ++out.deterministic_evals;
        rec.mu = mu;
        if (constraints) {
            Vec c = constraints->value(out.x);
            for (std::size_t j = 0; j < m; ++j) {
                if (cfg.auglag_update == MultiplierUpdate::damped_increment)
                    out.lambda[j] += cfg.auglag_lambda_damp * mu * c[j];
                else
                    out.lambda[j] = cfg.auglag_lambda_damp * (out.lambda[j] + mu * c[j]);
            }
            rec.feasibility = norm2(c);
        }
        rec.lambda_norm = norm2(out.lambda);
        out.outer_trace.push_back(rec);
        mu *= cfg.auglag_mu_growth;
    }

    out.final_objective = problem.value(out.x);
    ++out.deterministic_evals;
    out.final_feasibility = feas(out.x);
    return out;
}

} // namespace strop
