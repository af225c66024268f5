#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "strop/errors.hpp"
#include "strop/linops.hpp"
#include "strop/problems.hpp"
#include "strop/rng.hpp"
#include "strop/trust_region.hpp"

using namespace strop;

namespace {

// One-dimensional quadratic with a single sample: f(x) = x^2 / 2.
class ScalarQuadratic final : public FiniteSumProblem {
public:
    std::size_t sample_count() const override { return 1; }
    std::size_t dim() const override { return 1; }
    double sample_value(std::size_t, const Vec& x) const override { return 0.5 * x[0] * x[0]; }
    Vec sample_gradient(std::size_t, const Vec& x) const override { return {x[0]}; }
};

TrustRegionConfig paper_style_config() {
    TrustRegionConfig cfg;
    cfg.delta0 = 8.0;
    cfg.delta_max = 80.0;
    cfg.c0 = 0.05;
    cfg.c1 = 0.10;
    cfg.c2 = 0.50;
    cfg.nu1 = 2.0;
    cfg.nu2 = 5.0;
    return cfg;
}

// Model value m(p) = g^T p + ||p||^2 / 2.
double model_value(const Vec& g, const Vec& p) {
    return dot(g, p) + 0.5 * dot(p, p);
}

} // namespace

TEST_CASE("cauchy step takes the full gradient step inside the region") {
    auto [p, a] = cauchy_step_first_order(Vec{3.0, 4.0}, 10.0);
    CHECK(a == 1.0);
    CHECK(p[0] == -3.0);
    CHECK(p[1] == -4.0);
}

TEST_CASE("cauchy step lands on the boundary when the gradient is long") {
    auto [p, a] = cauchy_step_first_order(Vec{3.0, 4.0}, 1.0);
    CHECK(a == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(p[0] == doctest::Approx(-0.6).epsilon(1e-15));
    CHECK(p[1] == doctest::Approx(-0.8).epsilon(1e-15));
    CHECK(norm2(p) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("cauchy step rejects vanished gradients and bad radii") {
    CHECK_THROWS_AS(cauchy_step_first_order(Vec{0.0, 0.0}, 1.0), GradientVanished);
    CHECK_THROWS_AS(cauchy_step_first_order(Vec{0.0, 1e-15}, 1.0), GradientVanished);
    CHECK_THROWS_AS(cauchy_step_first_order(Vec{1.0}, 0.0), Error);
}

TEST_CASE("cauchy step minimizes the model over the ball (grid oracle)") {
    CounterRng rng(77, RngStream::probe);
    for (int trial = 0; trial < 200; ++trial) {
        std::size_t dim = 1 + rng.next_index(5);
        Vec g(dim);
        for (auto& v : g) v = rng.next_gaussian();
        if (norm2(g) < 1e-8) continue;
        double delta = 0.05 + 3.0 * rng.next_double();
        auto [p, a] = cauchy_step_first_order(g, delta);
        REQUIRE(norm2(p) <= delta * (1.0 + 1e-12));
        double closed = model_value(g, p);

        // Random feasible probes plus a line search along -g.
        double best = 0.0; // p = 0 is feasible
        for (int s = 0; s < 2000; ++s) {
            Vec q(dim);
            for (auto& v : q) v = rng.next_gaussian();
            double nq = norm2(q);
            if (nq == 0.0) continue;
            double radius = delta * std::pow(rng.next_double(), 1.0 / dim);
            scale(q, radius / nq);
            best = std::min(best, model_value(g, q));
        }
        double amax = delta / norm2(g);
        for (int s = 1; s <= 200; ++s) {
            double t = amax * static_cast<double>(s) / 200.0;
            best = std::min(best, model_value(g, add_scaled(Vec(dim, 0.0), -t, g)));
        }
        REQUIRE(closed <= best + 1e-9 * (1.0 + std::abs(best)));
    }
}

TEST_CASE("predicted reduction closed form") {
    Vec g1{6.0, 8.0}; // norm 10
    CHECK(predicted_reduction_first_order(g1, 1.0) == doctest::Approx(50.0).epsilon(1e-15));
    Vec g2{3.0, 4.0};
    CHECK(predicted_reduction_first_order(g2, 1.0) == doctest::Approx(12.5).epsilon(1e-15));
    // Continuity at zero step and agreement with -(g^T p + ||p||^2/2).
    CHECK(predicted_reduction_first_order(g2, 1e-300) == doctest::Approx(0.0));
    CounterRng rng(3, RngStream::probe);
    for (int t = 0; t < 100; ++t) {
        Vec g(4);
        for (auto& v : g) v = rng.next_gaussian();
        double a = rng.next_double();
        if (a == 0.0) continue;
        Vec p = add_scaled(Vec(4, 0.0), -a, g);
        double direct = -model_value(g, p);
        CHECK(predicted_reduction_first_order(g, a) ==
              doctest::Approx(direct).epsilon(1e-12));
    }
}

TEST_CASE("acceptance ratio arithmetic and failure modes") {
    CHECK(acceptance_ratio(1.0, 0.5, 1.0) == 0.5);
    CHECK(acceptance_ratio(1.0, 1.0, 2.0) == 0.0);
    CHECK(acceptance_ratio(1.0, 2.0, 0.5) == -2.0);
    CHECK_THROWS_AS(acceptance_ratio(1.0, 0.5, 0.0), NonpositivePrediction);
    CHECK_THROWS_AS(acceptance_ratio(1.0, 0.5, -1.0), NonpositivePrediction);
}

TEST_CASE("radius update branches") {
    TrustRegionConfig cfg = paper_style_config();
    CHECK(radius_update(8.0, 0.05, cfg) == 4.0);
    CHECK(radius_update(8.0, 0.70, cfg) == 40.0);
    CHECK(radius_update(8.0, 0.30, cfg) == 8.0);
    CHECK(radius_update(20.0, 0.90, cfg) == 80.0); // capped at delta_max
    // Boundary ties keep the radius.
    CHECK(radius_update(8.0, cfg.c1, cfg) == 8.0);
    CHECK(radius_update(8.0, cfg.c2, cfg) == 8.0);
    CHECK(radius_update(8.0, -3.0, cfg) == 4.0);
}

TEST_CASE("config validation names the offending field") {
    TrustRegionConfig cfg;

    cfg.delta0 = 0.0;
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("delta0"), ConfigError);
    cfg.delta0 = 20.0; // above delta_max = 10
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("delta0"), ConfigError);

    cfg = TrustRegionConfig{};
    cfg.delta_max = -1.0;
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("delta_max"), ConfigError);

    cfg = TrustRegionConfig{};
    cfg.c0 = 0.0;
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("c0"), ConfigError);

    cfg = TrustRegionConfig{};
    cfg.c1 = cfg.c0 / 2.0;
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("c1"), ConfigError);

    cfg = TrustRegionConfig{};
    cfg.c2 = cfg.c1 / 2.0;
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("c2"), ConfigError);

    cfg = TrustRegionConfig{};
    cfg.c2 = 1.0;
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("c2"), ConfigError);

    cfg = TrustRegionConfig{};
    cfg.nu1 = 1.0;
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("nu1"), ConfigError);

    cfg = TrustRegionConfig{};
    cfg.nu2 = 0.5;
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("nu2"), ConfigError);
    cfg.allow_nonstandard_nu2 = true;
    CHECK_NOTHROW(cfg.validate());
    cfg.nu2 = 0.0;
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("nu2"), ConfigError);

    cfg = TrustRegionConfig{};
    cfg.g_tol = -1e-3;
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("g_tol"), ConfigError);

    cfg = TrustRegionConfig{};
    cfg.a_max = 0.0;
    CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("a_max"), ConfigError);

    CHECK_NOTHROW(TrustRegionConfig{}.validate());
}

TEST_CASE("a single exact-quadratic step reaches the minimizer with ratio one") {
    ScalarQuadratic problem;
    SolverState state;
    state.x = {10.0};
    state.delta = 100.0;
    TrustRegionConfig cfg;
    cfg.delta_max = 100.0;
    cfg.delta0 = 100.0;
    CounterRng rng(0, RngStream::sampling);

    auto [next, rec] = str_step(problem, state, rng, cfg);
    CHECK(rec.a == 1.0);
    CHECK(rec.grad_norm == 10.0);
    CHECK(rec.pred_red == 50.0);
    CHECK(rec.actual_red == 50.0);
    CHECK(rec.r == 1.0);
    CHECK(rec.accepted);
    CHECK(next.x[0] == 0.0);
    CHECK(next.k == 1);
    CHECK(next.n_success == 1);
    CHECK(rec.delta_after == 100.0); // r > c2 but already at the cap
}

TEST_CASE("rejected steps leave the iterate and bump the failure count") {
    // f(x) = cos-like trap: use a sample whose quadratic model overshoots.
    // Steep quartic: f(x) = x^4, gradient 4x^3; at x=1 with a=1 the step jumps
    // to x=-3 where f explodes, so the ratio is deeply negative.
    class Quartic final : public FiniteSumProblem {
    public:
        std::size_t sample_count() const override { return 1; }
        std::size_t dim() const override { return 1; }
        double sample_value(std::size_t, const Vec& x) const override {
            return std::pow(x[0], 4);
        }
        Vec sample_gradient(std::size_t, const Vec& x) const override {
            return {4.0 * std::pow(x[0], 3)};
        }
    } problem;

    SolverState state;
    state.x = {1.0};
    state.delta = 10.0;
    TrustRegionConfig cfg;
    cfg.delta_max = 10.0;
    CounterRng rng(0, RngStream::sampling);
    auto [next, rec] = str_step(problem, state, rng, cfg);
    CHECK_FALSE(rec.accepted);
    CHECK(next.x[0] == 1.0);
    CHECK(next.n_fail == 1);
    CHECK(next.n_success == 0);
    CHECK(rec.delta_after == doctest::Approx(state.delta / cfg.nu1));
}

TEST_CASE("str_step propagates vanished gradients") {
    ScalarQuadratic problem;
    SolverState state;
    state.x = {0.0};
    state.delta = 1.0;
    TrustRegionConfig cfg;
    CounterRng rng(0, RngStream::sampling);
    CHECK_THROWS_AS(str_step(problem, state, rng, cfg), GradientVanished);
}

TEST_CASE("zero-iteration run returns the initial state") {
    InterpolatingLeastSquares p = make_interpolating_least_squares(4, 9, 0);
    TrustRegionConfig cfg;
    cfg.max_iter = 0;
    Vec x0(9, 0.5);
    RunResult res = run_str(p, cfg, 1, {}, x0);
    CHECK(res.trace.empty());
    CHECK(res.state.x == x0);
    CHECK(res.state.k == 0);
    CHECK(res.oracle_calls == 0);
}

TEST_CASE("run invariants on a random least-squares run") {
    InterpolatingLeastSquares p = make_interpolating_least_squares(10, 30, 2);
    TrustRegionConfig cfg = paper_style_config();
    cfg.max_iter = 500;
    Vec x0 = random_init(30, 1, 5, InitMode::gaussian);
    RunResult res = run_str(p, cfg, 9, {}, x0);
    REQUIRE(res.trace.size() == 500);

    std::size_t succ = 0, fail = 0, stat = 0;
    for (const IterationRecord& rec : res.trace) {
        REQUIRE(rec.sample_index >= 0);
        REQUIRE(rec.sample_index < 10);
        if (rec.stationary_skip) {
            ++stat;
            CHECK(rec.a == 0.0);
            CHECK(rec.delta_after == rec.delta_before);
            continue;
        }
        // Step feasibility: ||p|| = a ||g|| <= delta.
        CHECK(rec.a * rec.grad_norm <= rec.delta_before * (1.0 + 1e-12));
        CHECK(rec.a > 0.0);
        CHECK(rec.a <= 1.0);
        CHECK(rec.pred_red > 0.0);
        // Cauchy decrease floor.
        double floor = 0.5 * rec.grad_norm * std::min(rec.delta_before, rec.grad_norm);
        CHECK(rec.pred_red >= floor * (1.0 - 1e-12));
        // Acceptance semantics.
        CHECK(rec.accepted == (rec.r > cfg.c0));
        if (rec.accepted) {
            ++succ;
            CHECK(rec.actual_red >= cfg.c0 * rec.pred_red * (1.0 - 1e-12));
        } else {
            ++fail;
        }
        // Radius update law and cap.
        CHECK(rec.delta_after > 0.0);
        CHECK(rec.delta_after <= cfg.delta_max);
        if (rec.r < cfg.c1) {
            CHECK(rec.delta_after == rec.delta_before / cfg.nu1);
        } else if (rec.r > cfg.c2) {
            CHECK(rec.delta_after == std::min(cfg.nu2 * rec.delta_before, cfg.delta_max));
        } else {
            CHECK(rec.delta_after == rec.delta_before);
        }
    }
    CHECK(succ == res.state.n_success);
    CHECK(fail == res.state.n_fail);
    CHECK(stat == res.state.n_stationary);
    CHECK(succ + fail + stat == res.state.k);
    CHECK(res.state.k == 500);
    CHECK(res.oracle_calls == 500);
    CHECK(std::isfinite(res.final_grad_norm));
}

TEST_CASE("traces are bit-deterministic in the seed") {
    InterpolatingLeastSquares p = make_interpolating_least_squares(6, 15, 4);
    TrustRegionConfig cfg;
    cfg.max_iter = 200;
    Vec x0 = random_init(15, 1, 2, InitMode::gaussian);
    RunResult r1 = run_str(p, cfg, 42, {}, x0);
    RunResult r2 = run_str(p, cfg, 42, {}, x0);
    REQUIRE(r1.trace.size() == r2.trace.size());
    for (std::size_t i = 0; i < r1.trace.size(); ++i) {
        const auto& a = r1.trace[i];
        const auto& b = r2.trace[i];
        CHECK(a.sample_index == b.sample_index);
        CHECK(a.grad_norm == b.grad_norm);
        CHECK(a.a == b.a);
        CHECK(a.r == b.r);
        CHECK(a.delta_after == b.delta_after);
        CHECK(a.pred_red == b.pred_red);
        CHECK(a.actual_red == b.actual_red);
    }
    CHECK(r1.state.x == r2.state.x);

    RunResult r3 = run_str(p, cfg, 43, {}, x0);
    bool same = r3.trace.size() == r1.trace.size();
    if (same) {
        same = false;
        for (std::size_t i = 0; i < r1.trace.size() && !same; ++i)
            if (r1.trace[i].sample_index != r3.trace[i].sample_index) same = true;
        CHECK(same); // different seed draws a different index sequence
    }
}

TEST_CASE("stationary samples are skipped without moving") {
    InterpolatingLeastSquares p = make_interpolating_least_squares(4, 9, 7);
    TrustRegionConfig cfg;
    cfg.max_iter = 25;
    RunResult res = run_str(p, cfg, 3, {}, p.x_star());
    REQUIRE(res.trace.size() == 25);
    for (const auto& rec : res.trace) {
        CHECK(rec.stationary_skip);
        CHECK(rec.a == 0.0);
        CHECK_FALSE(rec.accepted);
    }
    CHECK(res.state.n_stationary == 25);
    CHECK(res.state.x == p.x_star());
    CHECK(res.state.delta == cfg.delta0);
}

TEST_CASE("full-gradient stopping rule fires early") {
    InterpolatingLeastSquares p = make_interpolating_least_squares(8, 40, 1);
    TrustRegionConfig cfg = paper_style_config();
    cfg.max_iter = 100000;
    StopRule stop;
    stop.grad_tol = 1e-6;
    stop.eval_every = 8;
    Vec x0 = random_init(40, 1, 3, InitMode::gaussian);
    RunResult res = run_str(p, cfg, 11, stop, x0);
    CHECK(res.stopped_early);
    CHECK(res.trace.size() < 100000);
    CHECK(res.final_grad_norm <= 1e-6);
    CHECK(norm2(p.gradient(res.state.x)) <= 1e-6);
    CHECK(res.deterministic_evals > 0);
}

TEST_CASE("batched runs average the sampled oracles") {
    InterpolatingLeastSquares p = make_interpolating_least_squares(5, 12, 9);
    TrustRegionConfig cfg;
    cfg.max_iter = 40;
    Vec x0 = random_init(12, 1, 8, InitMode::gaussian);
    RunOptions opts;
    opts.batch = 5;
    opts.store_states = true;
    RunResult res = run_str(p, cfg, 21, {}, x0, opts);
    CHECK(res.oracle_calls == 40 * 5);
    for (const auto& rec : res.trace) {
        REQUIRE(rec.batch_indices.size() == 5);
        REQUIRE(rec.x_before.has_value());
        if (rec.stationary_skip) continue;
        // Recompute the batch-mean gradient norm from the stored indices.
        Vec g(12, 0.0);
        for (std::size_t idx : rec.batch_indices)
            axpy(1.0, p.sample_gradient(idx, *rec.x_before), g);
        scale(g, 1.0 / 5.0);
        CHECK(rec.grad_norm == doctest::Approx(norm2(g)).epsilon(1e-14));
    }
}

TEST_CASE("the step parameter clip is honored when enabled") {
    InterpolatingLeastSquares p = make_interpolating_least_squares(5, 12, 10);
    TrustRegionConfig cfg;
    cfg.max_iter = 100;
    cfg.a_max = 0.05;
    Vec x0 = random_init(12, 1, 4, InitMode::gaussian);
    RunResult res = run_str(p, cfg, 13, {}, x0);
    for (const auto& rec : res.trace) {
        if (rec.stationary_skip) continue;
        CHECK(rec.a <= 0.05);
    }
}

TEST_CASE("epoch logging records the raw objective each epoch") {
    InterpolatingLeastSquares p = make_interpolating_least_squares(5, 12, 14);
    TrustRegionConfig cfg;
    cfg.max_iter = 50; // 10 epochs of 5
    Vec x0 = random_init(12, 1, 4, InitMode::gaussian);
    RunOptions opts;
    opts.log_epochs = true;
    RunResult res = run_str(p, cfg, 17, {}, x0, opts);
    REQUIRE(res.epoch_log.size() == 11); // epoch 0 through 10
    CHECK(res.epoch_log.front().epoch == 0);
    CHECK(res.epoch_log.front().objective_mean == doctest::Approx(p.value(x0)));
    CHECK(res.epoch_log.back().epoch == 10);
    CHECK(res.epoch_log.back().objective_mean ==
          doctest::Approx(p.value(res.state.x)));
}
