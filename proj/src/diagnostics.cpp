#include "strop/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "strop/errors.hpp"

namespace strop {

namespace {

constexpr double kTinyRel = 1e-9;

CheckResult vacuous(std::string name, std::string note) {
    CheckResult out;
    out.name = std::move(name);
    out.outcome = CheckOutcome::vacuous;
    out.note = std::move(note);
    return out;
}

Vec batch_mean_gradient(const PenalizedOracle& oracle, const std::vector<std::size_t>& indices,
                        const Vec& x) {
    Vec g(x.size(), 0.0);
    for (std::size_t idx : indices) axpy(1.0, penalized_gradient(oracle, idx, x), g);
    scale(g, 1.0 / static_cast<double>(indices.size()));
    return g;
}

double batch_mean_value(const PenalizedOracle& oracle, const std::vector<std::size_t>& indices,
                        const Vec& x) {
    double v = 0.0;
    for (std::size_t idx : indices) v += penalized_value(oracle, idx, x);
    return v / static_cast<double>(indices.size());
}

// Length of the initial run of records whose sampled gradient stays at or
// above eps (prefix-based lemma checks apply only there).
std::size_t qualifying_prefix(const Trace& trace, double eps) {
    std::size_t len = 0;
    for (const auto& rec : trace) {
        if (rec.grad_norm < eps) break;
        ++len;
    }
    return len;
}

} // namespace

const char* to_string(CheckOutcome outcome) {
    switch (outcome) {
    case CheckOutcome::pass: return "pass";
    case CheckOutcome::fail: return "fail";
    case CheckOutcome::vacuous: return "vacuous";
    }
    return "unknown";
}

double SmoothnessEstimate::max_per_sample() const {
    double m = 0.0;
    for (double v : per_sample) m = std::max(m, v);
    return m;
}

double sgc_ratio(const FiniteSumProblem& problem, const Vec& x, double g_tol) {
    Vec g = problem.gradient(x);
    double gn2 = dot(g, g);
    if (std::sqrt(gn2) <= g_tol)
        throw StationaryPoint("full gradient vanishes; growth ratio undefined");
    double mean_sq = 0.0;
    std::size_t n = problem.sample_count();
    for (std::size_t i = 0; i < n; ++i) {
        Vec gi = problem.sample_gradient(i, x);
        mean_sq += dot(gi, gi);
    }
    mean_sq /= static_cast<double>(n);
    return mean_sq / gn2;
}

double sgc_ratio_penalized(const FiniteSumProblem& problem, const ConstraintMap* constraints,
                           double mu, const Vec& x, double g_tol) {
    PenalizedOracle oracle{&problem, constraints, mu};
    Vec g = penalized_full_gradient(oracle, x);
    double gn2 = dot(g, g);
    if (std::sqrt(gn2) <= g_tol)
        throw StationaryPoint("full penalized gradient vanishes; growth ratio undefined");
    double mean_sq = 0.0;
    std::size_t n = problem.sample_count();
    for (std::size_t i = 0; i < n; ++i) {
        Vec gi = penalized_gradient(oracle, i, x);
        mean_sq += dot(gi, gi);
    }
    mean_sq /= static_cast<double>(n);
    return mean_sq / gn2;
}

SmoothnessEstimate estimate_smoothness(const FiniteSumProblem& problem,
                                       const std::vector<Vec>& probes) {
    if (probes.size() < 2) throw Error("smoothness estimation needs at least two probe points");
    std::size_t n = problem.sample_count();
    std::size_t np = probes.size();

    SmoothnessEstimate out;
    out.per_sample.assign(n, 0.0);

    std::vector<double> dist(np * np, 0.0);
    for (std::size_t p = 0; p < np; ++p)
        for (std::size_t q = p + 1; q < np; ++q) {
            Vec diff = add_scaled(probes[p], -1.0, probes[q]);
            dist[p * np + q] = norm2(diff);
        }

    std::vector<Vec> grads(np);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t p = 0; p < np; ++p) grads[p] = problem.sample_gradient(i, probes[p]);
        for (std::size_t p = 0; p < np; ++p)
            for (std::size_t q = p + 1; q < np; ++q) {
                double dd = dist[p * np + q];
                if (dd == 0.0) continue;
                double gd = norm2(add_scaled(grads[p], -1.0, grads[q]));
                out.per_sample[i] = std::max(out.per_sample[i], gd / dd);
            }
    }

    for (std::size_t p = 0; p < np; ++p) grads[p] = problem.gradient(probes[p]);
    for (std::size_t p = 0; p < np; ++p)
        for (std::size_t q = p + 1; q < np; ++q) {
            double dd = dist[p * np + q];
            if (dd == 0.0) continue;
            double gd = norm2(add_scaled(grads[p], -1.0, grads[q]));
            out.mean_grad = std::max(out.mean_grad, gd / dd);
        }
    return out;
}

CheckResult check_ak_bounds(const Trace& trace, double l_max, double c0) {
    const char* name = "ak_bounds";
    if (!(l_max > c0))
        return vacuous(name, "smoothness constant does not exceed the acceptance threshold");

    double lower = 2.0 * (1.0 - c0) / (l_max - c0) - 1e-9;
    double upper = 1.0 + 1e-12;
    double worst_margin = std::numeric_limits<double>::infinity();
    double worst_a = 0.0;
    double worst_bound = 0.0;
    std::size_t accepted = 0;
    for (const auto& rec : trace) {
        if (!rec.accepted || rec.stationary_skip) continue;
        ++accepted;
        double m_low = rec.a - lower;
        double m_high = upper - rec.a;
        double m = std::min(m_low, m_high);
        if (m < worst_margin) {
            worst_margin = m;
            worst_a = rec.a;
            worst_bound = (m_low < m_high) ? lower : upper;
        }
    }
    if (accepted == 0) return vacuous(name, "no accepted iterations");

    CheckResult out;
    out.name = name;
    out.lhs = worst_a;
    out.rhs = worst_bound;
    out.margin = worst_margin;
    out.outcome = worst_margin >= 0.0 ? CheckOutcome::pass : CheckOutcome::fail;
    out.note = "accepted-step parameter against [2(1-c0)/(L-c0), 1]";
    return out;
}

CheckResult check_radius_lower_bound(const Trace& trace, double eps, double m_hat, double c2) {
    const char* name = "radius_lower_bound";
    if (!(m_hat > 0.0)) return vacuous(name, "model-accuracy constant is not positive");
    std::size_t len = qualifying_prefix(trace, eps);
    if (len == 0) return vacuous(name, "no prefix with sampled gradient above eps");

    double r_const = 2.0 / (1.0 - c2);
    double bound = eps / (4.0 * r_const * m_hat) - 1e-12;
    double min_delta = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < len; ++j) min_delta = std::min(min_delta, trace[j].delta_before);

    CheckResult out;
    out.name = name;
    out.lhs = min_delta;
    out.rhs = bound;
    out.margin = min_delta - bound;
    out.outcome = out.margin >= 0.0 ? CheckOutcome::pass : CheckOutcome::fail;
    out.note = "minimum radius over the above-eps prefix";
    return out;
}

CheckResult check_success_ratio(const Trace& trace, double eps, double m_hat,
                                const TrustRegionConfig& cfg) {
    const char* name = "success_ratio";
    if (!(m_hat > 0.0)) return vacuous(name, "model-accuracy constant is not positive");
    std::size_t len = qualifying_prefix(trace, eps);
    if (len == 0) return vacuous(name, "no prefix with sampled gradient above eps");

    std::size_t n_success = 0;
    std::size_t n_fail = 0;
    for (std::size_t j = 0; j < len; ++j) {
        if (trace[j].stationary_skip) continue;
        if (trace[j].accepted)
            ++n_success;
        else
            ++n_fail;
    }
    if (n_success == 0) return vacuous(name, "no successes in the qualifying prefix");

    double r_const = 2.0 / (1.0 - cfg.c2);
    double ratio = static_cast<double>(n_fail) / static_cast<double>(n_success);
    double bound =
        std::log(4.0 * r_const * m_hat * cfg.delta_max / eps) / std::log(cfg.nu1) + 1.0;

    CheckResult out;
    out.name = name;
    out.lhs = ratio;
    out.rhs = bound;
    out.margin = bound - ratio;
    out.outcome = out.margin >= 0.0 ? CheckOutcome::pass : CheckOutcome::fail;
    out.note = "rejected/accepted count ratio on the above-eps prefix";
    return out;
}

ModelAccuracyResult check_model_accuracy(const FiniteSumProblem& problem,
                                         const ConstraintMap* constraints, double mu,
                                         const Trace& trace, std::optional<double> l_max) {
    const char* name = "model_accuracy";
    PenalizedOracle oracle{&problem, constraints, mu};

    ModelAccuracyResult out;
    std::size_t used = 0;
    for (const auto& rec : trace) {
        if (rec.stationary_skip || !rec.x_before.has_value() || rec.batch_indices.empty())
            continue;
        if (!(rec.a > 0.0)) continue;
        const Vec& x = *rec.x_before;
        Vec g = batch_mean_gradient(oracle, rec.batch_indices, x);
        double gg = dot(g, g);
        double quad = gg;
        if (oracle.penalized()) {
            Vec jg = constraints->jac_vec(x, g);
            quad = gg + mu * dot(jg, jg);
        }
        double pn = rec.a * std::sqrt(gg);
        if (pn == 0.0) continue;
        Vec y = add_scaled(x, -rec.a, g);
        double model_change = -rec.a * gg + 0.5 * rec.a * rec.a * quad;
        double sampled_change =
            batch_mean_value(oracle, rec.batch_indices, y) -
            batch_mean_value(oracle, rec.batch_indices, x);
        out.m_hat = std::max(out.m_hat, std::abs(model_change - sampled_change) / (pn * pn));
        ++used;
    }

    if (used == 0) {
        out.check = vacuous(name, "trace carries no stored iterates to replay");
        return out;
    }
    if (!l_max.has_value()) {
        out.check = vacuous(name, "no smoothness bound supplied; constant reported only");
        out.check.lhs = out.m_hat;
        return out;
    }

    out.check.name = name;
    out.check.lhs = out.m_hat;
    out.check.rhs = *l_max + kTinyRel * std::max(1.0, *l_max);
    out.check.margin = out.check.rhs - out.check.lhs;
    out.check.outcome = out.check.margin >= 0.0 ? CheckOutcome::pass : CheckOutcome::fail;
    out.check.note = "replayed |model - sampled| / ||p||^2 against the smoothness bound";
    return out;
}

CheckResult check_cauchy_decrease(const Trace& trace, double h_norm_bound) {
    const char* name = "cauchy_decrease";
    if (!(h_norm_bound > 0.0)) return vacuous(name, "curvature bound is not positive");

    double worst_margin = std::numeric_limits<double>::infinity();
    double worst_pred = 0.0;
    double worst_rhs = 0.0;
    std::size_t used = 0;
    for (const auto& rec : trace) {
        if (rec.stationary_skip || !(rec.a > 0.0)) continue;
        double rhs =
            0.5 * rec.grad_norm * std::min(rec.delta_before, rec.grad_norm / h_norm_bound);
        double tol = kTinyRel * std::max(1.0, rhs);
        double margin = rec.pred_red - (rhs - tol);
        if (margin < worst_margin) {
            worst_margin = margin;
            worst_pred = rec.pred_red;
            worst_rhs = rhs;
        }
        ++used;
    }
    if (used == 0) return vacuous(name, "no stepped iterations");

    CheckResult out;
    out.name = name;
    out.lhs = worst_pred;
    out.rhs = worst_rhs;
    out.margin = worst_margin;
    out.outcome = worst_margin >= 0.0 ? CheckOutcome::pass : CheckOutcome::fail;
    out.note = "predicted reduction against the Cauchy decrease floor";
    return out;
}

CheckResult check_feasibility_bound(const KktResidual& final_kkt, double mu, double g_hat,
                                    double sigma_min_hat, double eps) {
    const char* name = "feasibility_bound";
    if (final_kkt.stationarity > eps) {
        CheckResult out = vacuous(name, "stationarity precondition not met; reported only");
        out.lhs = final_kkt.stationarity;
        out.rhs = eps;
        return out;
    }
    if (!(sigma_min_hat > 0.0))
        return vacuous(name, "constraint Jacobian estimate is rank deficient");
    if (!(mu > 0.0)) return vacuous(name, "penalty parameter is not positive");

    double bound = (eps + g_hat) / (mu * sigma_min_hat) + 1e-12;
    CheckResult out;
    out.name = name;
    out.lhs = final_kkt.feasibility;
    out.rhs = bound;
    out.margin = bound - final_kkt.feasibility;
    out.outcome = out.margin >= 0.0 ? CheckOutcome::pass : CheckOutcome::fail;
    out.note = "final constraint violation against (eps + G)/(mu * sigma_min)";
    return out;
}

double finite_difference_check(const std::function<double(const Vec&)>& value,
                               const std::function<Vec(const Vec&)>& gradient,
                               const std::vector<Vec>& probes) {
    if (probes.empty()) throw Error("finite-difference check needs at least one probe");
    double worst = 0.0;
    for (const Vec& x : probes) {
        Vec ga = gradient(x);
        double h = 1e-5 * (1.0 + norm2(x));
        Vec gfd(x.size());
        Vec xp = x;
        for (std::size_t j = 0; j < x.size(); ++j) {
            double saved = xp[j];
            xp[j] = saved + h;
            double fp = value(xp);
            xp[j] = saved - h;
            double fm = value(xp);
            xp[j] = saved;
            gfd[j] = (fp - fm) / (2.0 * h);
        }
        double denom = std::max({1.0, norm2(ga), norm2(gfd)});
        worst = std::max(worst, norm2(add_scaled(ga, -1.0, gfd)) / denom);
    }
    return worst;
}

IterateConstants estimate_iterate_constants(const FiniteSumProblem& problem,
                                            const ConstraintMap* constraints,
                                            const std::vector<Vec>& iterates) {
    IterateConstants out;
    for (const Vec& x : iterates) {
        out.g_hat = std::max(out.g_hat, norm2(problem.gradient(x)));
        if (constraints != nullptr) {
            Vec sv = singular_values(constraints->jacobian(x));
            double smin = sv.back();
            double smax = sv.front();
            out.sigma_min_hat =
                out.sigma_min_hat ? std::min(*out.sigma_min_hat, smin) : smin;
            out.c_c_hat = out.c_c_hat ? std::max(*out.c_c_hat, smax) : smax;
        }
    }
    return out;
}

bool DiagnosticsReport::all_passed() const {
    for (const auto& c : checks)
        if (c.outcome == CheckOutcome::fail) return false;
    return true;
}

DiagnosticsReport build_report(const DiagnosticsInputs& in) {
    if (in.problem == nullptr || in.trace == nullptr)
        throw Error("diagnostics need a problem and a trace");
    const FiniteSumProblem& problem = *in.problem;
    const Trace& trace = *in.trace;

    DiagnosticsReport report;
    report.r_const = 2.0 / (1.0 - in.tr.c2);

    // Stored iterates, evenly subsampled to keep the report cheap.
    std::vector<Vec> iterates;
    for (const auto& rec : trace)
        if (rec.x_before.has_value()) iterates.push_back(*rec.x_before);
    if (iterates.size() > in.probe_cap && in.probe_cap > 0) {
        std::vector<Vec> picked;
        picked.reserve(in.probe_cap);
        double stride =
            static_cast<double>(iterates.size() - 1) / static_cast<double>(in.probe_cap - 1);
        for (std::size_t j = 0; j < in.probe_cap; ++j)
            picked.push_back(iterates[static_cast<std::size_t>(j * stride + 0.5)]);
        iterates = std::move(picked);
    }

    if (!iterates.empty()) {
        for (const Vec& x : iterates) {
            try {
                double rho = sgc_ratio(problem, x);
                report.rho_hat = report.rho_hat ? std::max(*report.rho_hat, rho) : rho;
            } catch (const StationaryPoint&) {
            }
            if (in.constraints != nullptr) {
                try {
                    double tau = sgc_ratio_penalized(problem, in.constraints, in.mu, x);
                    report.tau_hat = report.tau_hat ? std::max(*report.tau_hat, tau) : tau;
                } catch (const StationaryPoint&) {
                }
            }
        }
        IterateConstants consts =
            estimate_iterate_constants(problem, in.constraints, iterates);
        report.g_hat = consts.g_hat;
        report.sigma_min_hat = consts.sigma_min_hat;
        report.c_c_hat = consts.c_c_hat;
        if (iterates.size() >= 2) {
            SmoothnessEstimate sm = estimate_smoothness(problem, iterates);
            report.l_hat_mean = sm.mean_grad;
            report.l_hat_max_sample = sm.max_per_sample();
        }
    }

    // Exact per-sample constants beat difference-quotient estimates.
    if (auto exact = problem.per_sample_smoothness()) {
        double lmax = 0.0;
        for (double v : *exact) lmax = std::max(lmax, v);
        report.l_hat_max_sample = lmax;
    }

    ModelAccuracyResult acc = check_model_accuracy(
        problem, in.constraints, in.mu, trace,
        in.constraints == nullptr ? report.l_hat_max_sample : std::nullopt);
    if (acc.check.outcome != CheckOutcome::vacuous || !trace.empty()) report.m_hat = acc.m_hat;
    report.checks.push_back(acc.check);

    if (in.constraints == nullptr && report.l_hat_max_sample)
        report.checks.push_back(check_ak_bounds(trace, *report.l_hat_max_sample, in.tr.c0));
    else if (in.constraints == nullptr)
        report.checks.push_back(
            vacuous("ak_bounds", "no per-sample smoothness constant available"));

    double m_for_prefix = report.m_hat.value_or(0.0);
    report.checks.push_back(check_radius_lower_bound(trace, in.eps, m_for_prefix, in.tr.c2));
    report.checks.push_back(check_success_ratio(trace, in.eps, m_for_prefix, in.tr));

    double h_bound = 1.0;
    if (in.constraints != nullptr) {
        if (report.c_c_hat)
            h_bound = 1.0 + in.mu * (*report.c_c_hat) * (*report.c_c_hat);
        else
            h_bound = 0.0; // forces the vacuous branch below
    }
    if (h_bound > 0.0)
        report.checks.push_back(check_cauchy_decrease(trace, h_bound));
    else
        report.checks.push_back(
            vacuous("cauchy_decrease", "no curvature bound available for the penalized model"));

    if (in.final_kkt && in.constraints != nullptr && report.g_hat && report.sigma_min_hat)
        report.checks.push_back(check_feasibility_bound(
            *in.final_kkt, in.mu, *report.g_hat, *report.sigma_min_hat, in.eps));

    return report;
}

} // namespace strop
