#include "strop/detail/engine.hpp"

#include <cmath>
#include <string>

#include "strop/errors.hpp"

namespace strop::detail {

StepKind engine_step(StepOracle& oracle, SolverState& state, CounterRng& rng,
                     const TrustRegionConfig& cfg, std::size_t batch,
                     IterationRecord& rec, bool store_states) {
    const std::size_t n = oracle.sample_count();
    rec = IterationRecord{};
    rec.k = state.k;
    rec.delta_before = state.delta;

    std::vector<std::size_t> idx(batch);
    for (std::size_t b = 0; b < batch; ++b) idx[b] = rng.next_index(n);
    rec.sample_index = static_cast<long long>(idx[0]);
    if (store_states) {
        rec.x_before = state.x;
        rec.batch_indices = idx;
    }

    oracle.begin_iterate(state.x);
    rec.feasibility = oracle.feasibility_at_iterate();

    Vec g(oracle.dim(), 0.0);
    for (std::size_t b = 0; b < batch; ++b) {
        Vec gi = oracle.iterate_sample_gradient(idx[b]);
        axpy(1.0, gi, g);
    }
    scale(g, 1.0 / static_cast<double>(batch));
    if (!all_finite(g)) {
        throw NumericalFailure("NaN/Inf in sampled gradient at iteration " +
                               std::to_string(state.k));
    }
    const double gn = norm2(g);
    rec.grad_norm = gn;

    double f_before = 0.0;
    for (std::size_t b = 0; b < batch; ++b) f_before += oracle.iterate_sample_value(idx[b]);
    f_before /= static_cast<double>(batch);
    rec.obj_sample = f_before;
    if (!std::isfinite(f_before)) {
        throw NumericalFailure("NaN/Inf in sampled objective at iteration " +
                               std::to_string(state.k));
    }

    if (gn <= cfg.g_tol) {
        rec.stationary_skip = true;
        rec.delta_after = state.delta;
        state.k += 1;
        state.n_stationary += 1;
        return StepKind::stationary;
    }

    const double gg = dot(g, g);
    double quad;
    double a_star;
    if (oracle.identity_model()) {
        quad = gg;
        a_star = 1.0;
    } else {
        quad = oracle.iterate_quad(g);
        a_star = gg / quad; // <= 1 since quad = ||g||^2 + mu ||J g||^2 >= ||g||^2
    }
    double a = (a_star * gn <= state.delta) ? a_star : state.delta / gn;
    if (cfg.a_max && a > *cfg.a_max) a = *cfg.a_max;

    const double pred = predicted_reduction(a, gg, quad);
    if (!(pred > 0.0)) {
        throw NonpositivePrediction("predicted reduction " + std::to_string(pred) +
                                    " at iteration " + std::to_string(state.k));
    }

    Vec y = add_scaled(state.x, -a, g);
    if (!all_finite(y)) {
        throw NumericalFailure("NaN/Inf in trial point at iteration " +
                               std::to_string(state.k));
    }
    oracle.begin_trial(y);
    double f_after = 0.0;
    for (std::size_t b = 0; b < batch; ++b) f_after += oracle.trial_sample_value(idx[b]);
    f_after /= static_cast<double>(batch);

    const double actual = f_before - f_after;
    const double r = actual / pred;
    if (!std::isfinite(r)) {
        throw NumericalFailure("NaN/Inf in acceptance ratio at iteration " +
                               std::to_string(state.k));
    }

    rec.a = a;
    rec.r = r;
    rec.pred_red = pred;
    rec.actual_red = actual;
    rec.accepted = (r > cfg.c0);
    if (rec.accepted) {
        state.x = std::move(y);
        state.n_success += 1;
    } else {
        state.n_fail += 1;
    }
    state.delta = radius_update(rec.delta_before, r, cfg);
    rec.delta_after = state.delta;
    state.k += 1;
    return StepKind::stepped;
}

RunResult engine_run(StepOracle& oracle, const TrustRegionConfig& cfg, std::uint64_t seed,
                     const StopRule& stop, const Vec& x0, const RunOptions& opts) {
    cfg.validate();
    if (opts.batch == 0) {
        throw ConfigError("batch must be >= 1");
    }
    if (x0.size() != oracle.dim()) {
        throw DimensionMismatch("initial point length " + std::to_string(x0.size()) +
                                " vs problem dim " + std::to_string(oracle.dim()));
    }
    if (!all_finite(x0)) {
        throw NumericalFailure("NaN/Inf in initial point");
    }

    const std::size_t n = oracle.sample_count();
    const std::size_t iters_per_epoch = std::max<std::size_t>(1, (n + opts.batch - 1) / opts.batch);
    const std::size_t eval_every = stop.eval_every ? stop.eval_every : iters_per_epoch;

    RunResult res;
    res.state = SolverState{x0, cfg.delta0, 0, 0, 0, 0};
    CounterRng rng(seed, RngStream::sampling);

    auto log_epoch = [&](std::size_t epoch) {
        EpochLogEntry e;
        e.epoch = epoch;
        e.objective_mean = oracle.epoch_objective(res.state.x);
        e.feasibility = oracle.feasibility(res.state.x);
        res.deterministic_evals += 1;
        if (!std::isfinite(e.objective_mean)) {
            throw NumericalFailure("NaN/Inf in full objective at epoch " +
                                   std::to_string(epoch));
        }
        res.epoch_log.push_back(e);
    };

    std::size_t next_epoch_mark = n;
    if (opts.log_epochs) log_epoch(0);

    for (std::size_t k = 0; k < cfg.max_iter; ++k) {
        std::optional<double> full_now;
        if (k % eval_every == 0) {
            Vec fg = oracle.full_gradient(res.state.x);
            res.deterministic_evals += 1;
            if (!all_finite(fg)) {
                throw NumericalFailure("NaN/Inf in full gradient at iteration " +
                                       std::to_string(k));
            }
            full_now = norm2(fg);
            if (stop.grad_tol > 0.0 && *full_now <= stop.grad_tol) {
                res.final_grad_norm = *full_now;
                res.stopped_early = true;
                break;
            }
        }

        IterationRecord rec;
        engine_step(oracle, res.state, rng, cfg, opts.batch, rec, opts.store_states);
        if (full_now) {
            rec.full_grad_norm = full_now;
            if (rec.feasibility) rec.stationarity = full_now;
        }
        res.oracle_calls += opts.batch;
        res.trace.push_back(std::move(rec));

        if (opts.log_epochs) {
            while (res.oracle_calls >= next_epoch_mark) {
                log_epoch(next_epoch_mark / n);
                next_epoch_mark += n;
            }
        }
    }

    if (!res.stopped_early) {
        Vec fg = oracle.full_gradient(res.state.x);
        res.deterministic_evals += 1;
        res.final_grad_norm = norm2(fg);
    }
    res.final_feasibility = oracle.feasibility(res.state.x);
    return res;
}

} // namespace strop::detail
