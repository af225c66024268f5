#include <cmath>
#include <vector>

#include "doctest.h"
#include "strop/diagnostics.hpp"
#include "strop/errors.hpp"
#include "strop/linops.hpp"
#include "strop/penalty.hpp"
#include "strop/problems.hpp"
#include "strop/rng.hpp"
#include "strop/trust_region.hpp"

using namespace strop;

namespace {

class ScalarQuadratic final : public FiniteSumProblem {
public:
    std::size_t sample_count() const override { return 1; }
    std::size_t dim() const override { return 1; }
    double sample_value(std::size_t, const Vec& x) const override { return 0.5 * x[0] * x[0]; }
    Vec sample_gradient(std::size_t, const Vec& x) const override { return {x[0]}; }
};

// Linear finite sum: f_i(x) = b_i . x, so every gradient is constant.
class LinearProblem final : public FiniteSumProblem {
public:
    explicit LinearProblem(std::vector<Vec> rows) : rows_(std::move(rows)) {}
    std::size_t sample_count() const override { return rows_.size(); }
    std::size_t dim() const override { return rows_.front().size(); }
    double sample_value(std::size_t i, const Vec& x) const override {
        return dot(rows_[i], x);
    }
    Vec sample_gradient(std::size_t i, const Vec&) const override { return rows_[i]; }

private:
    std::vector<Vec> rows_;
};

class HalfSquaredNorm final : public FiniteSumProblem {
public:
    std::size_t sample_count() const override { return 1; }
    std::size_t dim() const override { return 2; }
    double sample_value(std::size_t, const Vec& x) const override {
        return 0.5 * dot(x, x);
    }
    Vec sample_gradient(std::size_t, const Vec& x) const override { return x; }
};

class FirstCoordinateShift final : public ConstraintMap {
public:
    std::size_t constraint_count() const override { return 1; }
    std::size_t dim() const override { return 2; }
    Vec value(const Vec& x) const override { return {x[0] - 1.0}; }
    Mat jacobian(const Vec&) const override {
        Mat j(1, 2);
        j(0, 0) = 1.0;
        return j;
    }
};

std::vector<Vec> gaussian_probes(std::size_t count, std::size_t dim, std::uint64_t seed) {
    CounterRng rng(seed, RngStream::probe);
    std::vector<Vec> out(count, Vec(dim));
    for (auto& v : out)
        for (auto& x : v) x = rng.next_gaussian();
    return out;
}

IterationRecord accepted_record(double a, double grad_norm, double delta) {
    IterationRecord rec;
    rec.a = a;
    rec.grad_norm = grad_norm;
    rec.delta_before = delta;
    rec.delta_after = delta;
    rec.accepted = true;
    rec.r = 1.0;
    rec.pred_red = a * (1.0 - a / 2.0) * grad_norm * grad_norm;
    rec.actual_red = rec.pred_red;
    return rec;
}

} // namespace

TEST_CASE("sgc ratio is exactly one for a single sample") {
    ScalarQuadratic p;
    CHECK(sgc_ratio(p, Vec{3.0}) == 1.0);
    CHECK(sgc_ratio(p, Vec{-0.25}) == 1.0);
    CHECK_THROWS_AS(sgc_ratio(p, Vec{0.0}), StationaryPoint);
}

TEST_CASE("sgc ratio obeys the jensen floor on random problems") {
    InterpolatingLeastSquares p = make_interpolating_least_squares(12, 30, 6);
    CounterRng rng(2, RngStream::probe);
    double worst = 1e300;
    for (int t = 0; t < 100; ++t) {
        Vec x(30);
        for (auto& v : x) v = rng.next_gaussian();
        double rho = sgc_ratio(p, x);
        REQUIRE(std::isfinite(rho));
        worst = std::min(worst, rho);
    }
    CHECK(worst >= 1.0 - 1e-12);
}

TEST_CASE("penalized sgc ratio reduces to the plain one without constraints") {
    InterpolatingLeastSquares p = make_interpolating_least_squares(5, 11, 3);
    Vec x(11, 0.3);
    CHECK(sgc_ratio_penalized(p, nullptr, 2.0, x) == sgc_ratio(p, x));
}

TEST_CASE("smoothness estimate recovers quadratic curvature and linear flatness") {
    // Least squares: L_i = ||a_i||^2 exactly; difference quotients of a
    // quadratic gradient hit the constant exactly for any probe pair.
    InterpolatingLeastSquares p = make_interpolating_least_squares(4, 9, 8);
    std::vector<Vec> probes = gaussian_probes(6, 9, 5);
    SmoothnessEstimate est = estimate_smoothness(p, probes);
    Vec exact = *p.per_sample_smoothness();
    REQUIRE(est.per_sample.size() == 4);
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(est.per_sample[i] <= exact[i] * (1.0 + 1e-9));
        CHECK(est.per_sample[i] >= exact[i] * 0.1); // same order for rank-one quadratics
    }
    CHECK(est.max_per_sample() <= norm2(exact) * (1.0 + 1e-9));

    LinearProblem lin({Vec{1.0, 2.0}, Vec{-3.0, 0.5}});
    SmoothnessEstimate flat = estimate_smoothness(lin, gaussian_probes(5, 2, 7));
    CHECK(flat.per_sample[0] == 0.0);
    CHECK(flat.per_sample[1] == 0.0);
    CHECK(flat.mean_grad == 0.0);
}

TEST_CASE("smoothness estimate skips degenerate probe pairs") {
    ScalarQuadratic p;
    std::vector<Vec> probes{Vec{1.0}, Vec{1.0}}; // zero distance only
    SmoothnessEstimate est = estimate_smoothness(p, probes);
    CHECK(est.per_sample[0] == 0.0); // nothing measured, no NaN
    CHECK(std::isfinite(est.mean_grad));
}

TEST_CASE("smoothness estimates grow monotonically with more probes") {
    InterpolatingLeastSquares p = make_interpolating_least_squares(3, 7, 12);
    std::vector<Vec> probes = gaussian_probes(10, 7, 9);
    double prev = 0.0;
    for (std::size_t count = 2; count <= probes.size(); ++count) {
        std::vector<Vec> sub(probes.begin(), probes.begin() + count);
        SmoothnessEstimate est = estimate_smoothness(p, sub);
        CHECK(est.max_per_sample() >= prev - 1e-15);
        prev = est.max_per_sample();
    }
}

TEST_CASE("step-parameter range check outcomes") {
    double c0 = 0.05;
    double l_max = 2.0;
    double lower = 2.0 * (1.0 - c0) / (l_max - c0); // ~0.9744

    Trace empty;
    CHECK(check_ak_bounds(empty, l_max, c0).outcome == CheckOutcome::vacuous);

    Trace rejected_only{IterationRecord{}};
    rejected_only[0].accepted = false;
    CHECK(check_ak_bounds(rejected_only, l_max, c0).outcome == CheckOutcome::vacuous);

    Trace tight{accepted_record(1.0, 3.0, 5.0)};
    CheckResult res = check_ak_bounds(tight, l_max, c0);
    CHECK(res.outcome == CheckOutcome::pass);

    Trace in_range{accepted_record(lower + 0.001, 3.0, 5.0)};
    CHECK(check_ak_bounds(in_range, l_max, c0).outcome == CheckOutcome::pass);

    Trace below{accepted_record(lower - 0.01, 3.0, 5.0)};
    CheckResult bad = check_ak_bounds(below, l_max, c0);
    CHECK(bad.outcome == CheckOutcome::fail);
    CHECK(bad.margin < 0.0);

    Trace above{accepted_record(1.5, 3.0, 5.0)}; // a beyond 1 is out of range
    CHECK(check_ak_bounds(above, l_max, c0).outcome == CheckOutcome::fail);

    // The lemma's own precondition fails: L_max <= c0.
    CHECK(check_ak_bounds(tight, 0.01, c0).outcome == CheckOutcome::vacuous);
}

TEST_CASE("radius lower bound check restricts to the high-gradient prefix") {
    double eps = 0.5;
    double m_hat = 1.0;
    double c2 = 0.5; // r = 4, floor = eps/16
    Trace trace;
    trace.push_back(accepted_record(1.0, 2.0, 1.0));
    trace.push_back(accepted_record(1.0, 1.0, 0.25));
    CheckResult res = check_radius_lower_bound(trace, eps, m_hat, c2);
    CHECK(res.outcome == CheckOutcome::pass);
    CHECK(res.lhs == 0.25); // smallest prefix radius

    // A radius below the floor within the prefix fails.
    trace[1].delta_before = eps / 16.0 / 2.0;
    CHECK(check_radius_lower_bound(trace, eps, m_hat, c2).outcome == CheckOutcome::fail);

    // Records after the first low-gradient iteration are out of scope.
    trace[1].grad_norm = eps / 10.0;
    CHECK(check_radius_lower_bound(trace, eps, m_hat, c2).outcome == CheckOutcome::pass);

    // eps above every gradient norm leaves nothing to check.
    CHECK(check_radius_lower_bound(trace, 100.0, m_hat, c2).outcome ==
          CheckOutcome::vacuous);
    CHECK(check_radius_lower_bound(Trace{}, eps, m_hat, c2).outcome ==
          CheckOutcome::vacuous);
}

TEST_CASE("success ratio check counts the qualifying prefix") {
    TrustRegionConfig cfg;
    cfg.delta_max = 10.0;
    cfg.nu1 = 2.0;
    double eps = 0.1;
    double m_hat = 1.0;

    Trace all_success;
    for (int i = 0; i < 5; ++i) all_success.push_back(accepted_record(1.0, 1.0, 1.0));
    CheckResult res = check_success_ratio(all_success, eps, m_hat, cfg);
    CHECK(res.outcome == CheckOutcome::pass);
    CHECK(res.lhs == 0.0);

    // No success in the prefix: the ratio is undefined.
    Trace none{accepted_record(1.0, 1.0, 1.0)};
    none[0].accepted = false;
    none[0].r = 0.0;
    CHECK(check_success_ratio(none, eps, m_hat, cfg).outcome == CheckOutcome::vacuous);

    // A wildly unsuccessful trace breaks the bound.
    Trace lopsided;
    lopsided.push_back(accepted_record(1.0, 1.0, 1.0));
    for (int i = 0; i < 200; ++i) {
        IterationRecord rec = accepted_record(1.0, 1.0, 1.0);
        rec.accepted = false;
        rec.r = 0.0;
        lopsided.push_back(rec);
    }
    CHECK(check_success_ratio(lopsided, eps, m_hat, cfg).outcome == CheckOutcome::fail);
}

TEST_CASE("model accuracy replay on a stored least-squares run") {
    InterpolatingLeastSquares p = make_interpolating_least_squares(6, 15, 4);
    TrustRegionConfig cfg;
    cfg.max_iter = 300;
    Vec x0 = random_init(15, 1, 2, InitMode::gaussian);
    RunOptions opts;
    opts.store_states = true;
    RunResult run = run_str(p, cfg, 19, {}, x0, opts);

    Vec l = *p.per_sample_smoothness();
    double l_max = 0.0;
    for (double v : l) l_max = std::max(l_max, v);

    ModelAccuracyResult acc = check_model_accuracy(p, nullptr, 0.0, run.trace, l_max);
    CHECK(acc.check.outcome == CheckOutcome::pass);
    CHECK(acc.m_hat <= l_max + 1e-9 * std::max(1.0, l_max));
    CHECK(acc.m_hat > 0.0);

    // Without stored states the check cannot replay anything.
    RunResult bare = run_str(p, cfg, 19, {}, x0);
    CHECK(check_model_accuracy(p, nullptr, 0.0, bare.trace, l_max).check.outcome ==
          CheckOutcome::vacuous);

    // Without a known bound the constant is reported, not judged.
    ModelAccuracyResult rep = check_model_accuracy(p, nullptr, 0.0, run.trace);
    CHECK(rep.check.outcome == CheckOutcome::vacuous);
    CHECK(rep.m_hat == acc.m_hat);
}

TEST_CASE("model accuracy is zero on a curvature-one quadratic") {
    // f(x) = x^2/2 has Hessian exactly 1, so the first-order model with unit
    // quadratic term is exact: |model change - actual change| = 0.
    ScalarQuadratic p;
    TrustRegionConfig cfg;
    cfg.delta0 = 0.5; // keep a < 1 boundary steps in play too
    cfg.delta_max = 8.0;
    cfg.max_iter = 10;
    RunOptions opts;
    opts.store_states = true;
    RunResult run = run_str(p, cfg, 5, {}, Vec{30.0}, opts);
    ModelAccuracyResult acc = check_model_accuracy(p, nullptr, 0.0, run.trace, 1.0);
    CHECK(acc.check.outcome == CheckOutcome::pass);
    CHECK(acc.m_hat <= 1e-10);
}

TEST_CASE("cauchy decrease check on real and corrupted traces") {
    InterpolatingLeastSquares p = make_interpolating_least_squares(5, 12, 2);
    TrustRegionConfig cfg;
    cfg.max_iter = 200;
    Vec x0 = random_init(12, 1, 1, InitMode::gaussian);
    RunResult run = run_str(p, cfg, 23, {}, x0);
    CheckResult res = check_cauchy_decrease(run.trace);
    CHECK(res.outcome == CheckOutcome::pass);
    CHECK(res.margin >= 0.0);

    Trace bad = run.trace;
    for (auto& rec : bad)
        if (!rec.stationary_skip) {
            rec.pred_red *= 0.25; // strictly below the floor
            break;
        }
    CHECK(check_cauchy_decrease(bad).outcome == CheckOutcome::fail);

    CHECK(check_cauchy_decrease(Trace{}).outcome == CheckOutcome::vacuous);
}

TEST_CASE("feasibility bound check outcomes") {
    KktResidual kkt;
    kkt.stationarity = 5e-3;
    kkt.feasibility = 0.009;
    // Bound: (0.01 + 1) / (100 * 1) = 0.0101.
    CheckResult pass = check_feasibility_bound(kkt, 100.0, 1.0, 1.0, 1e-2);
    CHECK(pass.outcome == CheckOutcome::pass);

    kkt.feasibility = 0.02;
    CHECK(check_feasibility_bound(kkt, 100.0, 1.0, 1.0, 1e-2).outcome ==
          CheckOutcome::fail);

    // Stationarity above eps: precondition unmet, reported not failed.
    kkt.stationarity = 0.5;
    CHECK(check_feasibility_bound(kkt, 100.0, 1.0, 1.0, 1e-2).outcome ==
          CheckOutcome::vacuous);

    // Degenerate LICQ estimate skips the check.
    kkt.stationarity = 5e-3;
    CHECK(check_feasibility_bound(kkt, 100.0, 1.0, 0.0, 1e-2).outcome ==
          CheckOutcome::vacuous);
}

TEST_CASE("finite difference check error scales") {
    InterpolatingLeastSquares p = make_interpolating_least_squares(4, 9, 10);
    std::vector<Vec> probes = gaussian_probes(10, 9, 3);
    double quad_err = finite_difference_check(
        [&](const Vec& x) { return p.value(x); },
        [&](const Vec& x) { return p.gradient(x); }, probes);
    CHECK(quad_err <= 1e-9);

    // Central differences are exact for linear functions; what is left is pure
    // evaluation rounding, eps*|f|/(2h), so keep |f| modest for the 1e-12 bar.
    LinearProblem lin({Vec{0.02, -0.01, 0.005}});
    double lin_err = finite_difference_check(
        [&](const Vec& x) { return lin.value(x); },
        [&](const Vec& x) { return lin.gradient(x); }, gaussian_probes(10, 3, 4));
    CHECK(lin_err <= 1e-12);
}

TEST_CASE("iterate constants are monotone in the probe set") {
    HalfSquaredNorm f;
    FirstCoordinateShift c;
    std::vector<Vec> iterates = gaussian_probes(8, 2, 11);
    double prev_g = 0.0;
    for (std::size_t count = 1; count <= iterates.size(); ++count) {
        std::vector<Vec> sub(iterates.begin(), iterates.begin() + count);
        IterateConstants ic = estimate_iterate_constants(f, &c, sub);
        CHECK(ic.g_hat >= prev_g - 1e-15);
        prev_g = ic.g_hat;
        REQUIRE(ic.sigma_min_hat.has_value());
        CHECK(*ic.sigma_min_hat == doctest::Approx(1.0)); // constant Jacobian (1, 0)
        REQUIRE(ic.c_c_hat.has_value());
        CHECK(*ic.c_c_hat == doctest::Approx(1.0));
    }
}

TEST_CASE("full report on an unconstrained stored run") {
    InterpolatingLeastSquares p = make_interpolating_least_squares(8, 20, 7);
    TrustRegionConfig cfg;
    cfg.max_iter = 400;
    Vec x0 = random_init(20, 1, 5, InitMode::gaussian);
    RunOptions opts;
    opts.store_states = true;
    RunResult run = run_str(p, cfg, 29, {}, x0, opts);

    DiagnosticsInputs in;
    in.problem = &p;
    in.tr = cfg;
    in.trace = &run.trace;
    in.eps = 1e-6;
    DiagnosticsReport report = build_report(in);

    REQUIRE(report.rho_hat.has_value());
    CHECK(*report.rho_hat >= 1.0 - 1e-12);
    CHECK_FALSE(report.tau_hat.has_value());
    REQUIRE(report.l_hat_max_sample.has_value());
    REQUIRE(report.m_hat.has_value());
    CHECK(report.r_const == doctest::Approx(2.0 / (1.0 - cfg.c2)));
    REQUIRE(report.g_hat.has_value());
    CHECK_FALSE(report.sigma_min_hat.has_value());

    // Every advertised check is present exactly once.
    std::vector<std::string> names;
    for (const auto& chk : report.checks) names.push_back(chk.name);
    for (const char* expect : {"ak_bounds", "radius_lower_bound", "success_ratio",
                               "model_accuracy", "cauchy_decrease"}) {
        CHECK(std::count(names.begin(), names.end(), expect) == 1);
    }
    // No feasibility check without constraints.
    CHECK(std::count(names.begin(), names.end(), "feasibility_bound") == 0);
}

TEST_CASE("full report on a constrained penalty run includes feasibility") {
    SpikedDataSpec spec;
    spec.d = 8;
    spec.k = 2;
    spec.n = 12;
    spec.seed = 3;
    Mat data = spiked_data(spec);
    SubspaceProblem sub = make_subspace_problem(data, 2);
    PenaltyConfig cfg;
    cfg.mu = 1.0;
    cfg.tr.delta0 = 0.2;
    cfg.tr.delta_max = 5.0;
    cfg.tr.c2 = 0.9;
    cfg.tr.nu1 = 1.5;
    cfg.tr.nu2 = 2.0;
    cfg.tr.max_iter = 500;
    Vec w0 = random_init(8, 2, 9, InitMode::orthonormal);
    RunOptions opts;
    opts.store_states = true;
    PenaltyRunResult res =
        run_str_penalty(*sub.objective, sub.constraint.get(), cfg, 31, {}, w0, opts);

    DiagnosticsInputs in;
    in.problem = sub.objective.get();
    in.constraints = sub.constraint.get();
    in.mu = 1.0;
    in.tr = cfg.tr;
    in.trace = &res.run.trace;
    in.final_kkt = res.final_kkt;
    in.eps = 1e-2;
    DiagnosticsReport report = build_report(in);

    REQUIRE(report.tau_hat.has_value());
    CHECK(*report.tau_hat >= 1.0 - 1e-12);
    REQUIRE(report.sigma_min_hat.has_value());
    CHECK(*report.sigma_min_hat > 0.0);
    REQUIRE(report.c_c_hat.has_value());

    std::vector<std::string> names;
    for (const auto& chk : report.checks) names.push_back(chk.name);
    CHECK(std::count(names.begin(), names.end(), "feasibility_bound") == 1);
    CHECK(std::count(names.begin(), names.end(), "cauchy_decrease") == 1);
    // The step-parameter range bound is specific to the unconstrained lemma.
    CHECK(std::count(names.begin(), names.end(), "ak_bounds") == 0);

    // Vacuous outcomes are first-class: nothing in the report is silently
    // dropped, and all_passed treats vacuous as non-failing.
    for (const auto& chk : report.checks) {
        CHECK((chk.outcome == CheckOutcome::pass || chk.outcome == CheckOutcome::fail ||
               chk.outcome == CheckOutcome::vacuous));
    }
}

TEST_CASE("outcome names serialize") {
    CHECK(std::string(to_string(CheckOutcome::pass)) == "pass");
    CHECK(std::string(to_string(CheckOutcome::fail)) == "fail");
    CHECK(std::string(to_string(CheckOutcome::vacuous)) == "vacuous");
}
