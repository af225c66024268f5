#include "strop/trust_region.hpp"

#include <cmath>
#include <string>

#include "strop/detail/engine.hpp"
#include "strop/errors.hpp"

namespace strop {

void TrustRegionConfig::validate() const {
    if (!(delta_max > 0.0)) {
        throw ConfigError("delta_max must be positive, got " + std::to_string(delta_max));
    }
    if (!(delta0 > 0.0) || delta0 > delta_max) {
        throw ConfigError("delta0 must lie in (0, delta_max], got " + std::to_string(delta0));
    }
    if (!(c0 > 0.0)) {
        throw ConfigError("c0 must be positive, got " + std::to_string(c0));
    }
    if (c1 < c0) {
        throw ConfigError("c1 must satisfy c0 <= c1, got " + std::to_string(c1));
    }
    if (c2 < c1) {
        throw ConfigError("c2 must satisfy c1 <= c2, got " + std::to_string(c2));
    }
    if (!(c2 < 1.0)) {
        throw ConfigError("c2 must be below 1, got " + std::to_string(c2));
    }
    if (!(nu1 > 1.0)) {
        throw ConfigError("nu1 must be > 1, got " + std::to_string(nu1));
    }
    if (!(nu2 > 1.0)) {
        if (!allow_nonstandard_nu2) {
            throw ConfigError("nu2 must be > 1 (radius expansion factor), got " +
                              std::to_string(nu2) +
                              "; set allow_nonstandard_nu2 to run anyway");
        }
        if (!(nu2 > 0.0)) {
            throw ConfigError("nu2 must be positive, got " + std::to_string(nu2));
        }
    }
    if (!(g_tol >= 0.0)) {
        throw ConfigError("g_tol must be >= 0, got " + std::to_string(g_tol));
    }
    if (a_max && !(*a_max > 0.0)) {
        throw ConfigError("a_max must be positive when set, got " + std::to_string(*a_max));
    }
}

std::pair<Vec, double> cauchy_step_first_order(const Vec& g, double delta, double g_tol) {
    if (!(delta > 0.0)) {
        throw Error("cauchy step requires delta > 0, got " + std::to_string(delta));
    }
    const double gn = norm2(g);
    if (gn <= g_tol) {
        throw GradientVanished("gradient norm " + std::to_string(gn) + " at or below " +
                               std::to_string(g_tol));
    }
    const double a = (gn <= delta) ? 1.0 : delta / gn;
    Vec p(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) p[i] = -a * g[i];
    return {std::move(p), a};
}

double predicted_reduction_first_order(const Vec& g, double a) {
    const double gg = dot(g, g);
    return detail::predicted_reduction(a, gg, gg);
}

double acceptance_ratio(double f_before, double f_after, double pred_red) {
    if (!(pred_red > 0.0)) {
        throw NonpositivePrediction("predicted reduction must be positive, got " +
                                    std::to_string(pred_red));
    }
    return (f_before - f_after) / pred_red;
}

double radius_update(double delta, double r, const TrustRegionConfig& cfg) {
    if (r < cfg.c1) return delta / cfg.nu1;
    if (r > cfg.c2) return std::min(cfg.nu2 * delta, cfg.delta_max);
    return delta;
}

std::pair<SolverState, IterationRecord> str_step(const FiniteSumProblem& problem,
                                                 const SolverState& state, CounterRng& rng,
                                                 const TrustRegionConfig& cfg) {
    detail::PlainStepOracle oracle(problem);
    SolverState next = state;
    IterationRecord rec;
    const auto kind =
        detail::engine_step(oracle, next, rng, cfg, 1, rec, /*store_states=*/false);
    if (kind == detail::StepKind::stationary) {
        throw GradientVanished("sampled gradient norm " + std::to_string(rec.grad_norm) +
                               " at or below g_tol at iteration " + std::to_string(state.k));
    }
    return {std::move(next), std::move(rec)};
}

RunResult run_str(const FiniteSumProblem& problem, const TrustRegionConfig& cfg,
                  std::uint64_t seed, const StopRule& stop, const Vec& x0,
                  const RunOptions& opts) {
    detail::PlainStepOracle oracle(problem);
    return detail::engine_run(oracle, cfg, seed, stop, x0, opts);
}

} // namespace strop
