#include "strop/experiment.hpp"

#include <chrono>
#include <cmath>

#include "strop/errors.hpp"

namespace strop {

namespace {

constexpr const char* kFamilies = "interpolating_lsq, subspace";

std::size_t resolve_max_iter(const ExperimentConfig& cfg, std::size_t n) {
    if (cfg.max_iter > 0) return cfg.max_iter;
    std::size_t per_epoch = std::max<std::size_t>(1, (n + cfg.batch - 1) / cfg.batch);
    return cfg.max_epochs * per_epoch;
}

} // namespace

MethodKind method_from_name(const std::string& name) {
    if (name == "str") return MethodKind::str;
    if (name == "str_penalty") return MethodKind::str_penalty;
    if (name == "sgd") return MethodKind::sgd;
    if (name == "sgd_proj") return MethodKind::sgd_proj;
    if (name == "riemannian_gd") return MethodKind::riemannian_gd;
    if (name == "auglag") return MethodKind::auglag;
    throw ConfigError("key 'method' has unknown value '" + name +
                      "' (expected str, str_penalty, sgd, sgd_proj, riemannian_gd, auglag)");
}

const char* method_name(MethodKind kind) {
    switch (kind) {
    case MethodKind::str: return "str";
    case MethodKind::str_penalty: return "str_penalty";
    case MethodKind::sgd: return "sgd";
    case MethodKind::sgd_proj: return "sgd_proj";
    case MethodKind::riemannian_gd: return "riemannian_gd";
    case MethodKind::auglag: return "auglag";
    }
    return "unknown";
}

ExperimentConfig parse_experiment_config(const KeyValueConfig& kv) {
    ExperimentConfig cfg;

    cfg.family = kv.get_string("problem.family");
    if (cfg.family != "interpolating_lsq" && cfg.family != "subspace")
        throw ConfigError("key 'problem.family' has unknown value '" + cfg.family +
                          "' (expected " + std::string(kFamilies) + ")");
    cfg.data_file = kv.get_string("problem.data_file", "");
    if (cfg.data_file.empty()) {
        cfg.n = kv.get_size("problem.n");
        cfg.d = kv.get_size("problem.d");
        cfg.data_seed = kv.get_u64("problem.data_seed", 0);
        if (cfg.family == "subspace") {
            cfg.k = kv.get_size("problem.k");
            cfg.noise_sigma = kv.get_double("problem.noise_sigma", 0.05);
            if (!(cfg.noise_sigma >= 0.0))
                throw ConfigError("key 'problem.noise_sigma' must be nonnegative");
        }
    } else {
        if (cfg.family != "subspace")
            throw ConfigError("key 'problem.data_file' applies to the subspace family only");
        for (const char* key : {"problem.n", "problem.d", "problem.data_seed", "problem.noise_sigma"})
            if (kv.has(key))
                throw ConfigError("key '" + std::string(key) +
                                  "' conflicts with 'problem.data_file' (taken from the file header)");
        // Shape keys are read from the data file header; optional k override.
        cfg.k = kv.get_size("problem.k", 0);
    }

    cfg.init_mode = kv.get_string("init.mode", "");
    if (!cfg.init_mode.empty() && cfg.init_mode != "gaussian" && cfg.init_mode != "orthonormal")
        throw ConfigError("key 'init.mode' has unknown value '" + cfg.init_mode +
                          "' (expected gaussian or orthonormal)");
    if (kv.has("init.seed")) cfg.init_seed = kv.get_u64("init.seed");

    cfg.method = method_from_name(kv.get_string("method"));

    cfg.tr.delta0 = kv.get_double("tr.delta0", cfg.tr.delta0);
    cfg.tr.delta_max = kv.get_double("tr.delta_max", cfg.tr.delta_max);
    cfg.tr.c0 = kv.get_double("tr.c0", cfg.tr.c0);
    cfg.tr.c1 = kv.get_double("tr.c1", cfg.tr.c1);
    cfg.tr.c2 = kv.get_double("tr.c2", cfg.tr.c2);
    cfg.tr.nu1 = kv.get_double("tr.nu1", cfg.tr.nu1);
    cfg.tr.nu2 = kv.get_double("tr.nu2", cfg.tr.nu2);
    cfg.tr.g_tol = kv.get_double("tr.g_tol", cfg.tr.g_tol);
    if (kv.has("tr.a_max")) cfg.tr.a_max = kv.get_double("tr.a_max");
    cfg.tr.allow_nonstandard_nu2 =
        kv.get_bool("tr.allow_nonstandard_nu2", cfg.tr.allow_nonstandard_nu2);

    cfg.mu = kv.get_double("penalty.mu", cfg.mu);
    if (cfg.method == MethodKind::str_penalty && !(cfg.mu > 0.0)) {
        throw ConfigError("penalty.mu must be positive, got " + std::to_string(cfg.mu));
    }

    cfg.baseline.lr = kv.get_double("baseline.lr", cfg.baseline.lr);
    cfg.baseline.auglag_inner_lr = kv.get_double("auglag.inner_lr", cfg.baseline.auglag_inner_lr);
    cfg.baseline.auglag_mu0 = kv.get_double("auglag.mu0", cfg.baseline.auglag_mu0);
    cfg.baseline.auglag_mu_growth =
        kv.get_double("auglag.mu_growth", cfg.baseline.auglag_mu_growth);
    cfg.baseline.auglag_inner_epochs =
        kv.get_size("auglag.inner_epochs", cfg.baseline.auglag_inner_epochs);
    cfg.baseline.auglag_lambda_damp =
        kv.get_double("auglag.lambda_damp", cfg.baseline.auglag_lambda_damp);
    std::string update = kv.get_string("auglag.update", "damped_increment");
    if (update == "damped_increment")
        cfg.baseline.auglag_update = MultiplierUpdate::damped_increment;
    else if (update == "damped_full")
        cfg.baseline.auglag_update = MultiplierUpdate::damped_full;
    else
        throw ConfigError("key 'auglag.update' has unknown value '" + update +
                          "' (expected damped_increment or damped_full)");
    cfg.auglag_outer = kv.get_size("auglag.outer_iters", 0);

    cfg.run_seed = kv.get_u64("run.seed", 0);
    cfg.max_iter = kv.get_size("run.max_iter", 0);
    cfg.max_epochs = kv.get_size("run.max_epochs", 0);
    if (cfg.max_iter == 0 && cfg.max_epochs == 0)
        throw ConfigError("one of 'run.max_iter' or 'run.max_epochs' is required");
    if (cfg.max_iter > 0 && cfg.max_epochs > 0)
        throw ConfigError("keys 'run.max_iter' and 'run.max_epochs' are mutually exclusive");
    cfg.batch = kv.get_size("run.batch", 1);
    if (cfg.batch == 0) throw ConfigError("key 'run.batch' must be at least 1");
    cfg.baseline.batch = cfg.batch;
    cfg.eval_every = kv.get_size("run.eval_every", 0);
    cfg.grad_tol = kv.get_double("run.grad_tol", 0.0);
    if (cfg.grad_tol < 0.0) throw ConfigError("key 'run.grad_tol' must be nonnegative");
    cfg.store_full = kv.get_bool("run.store_full", false);
    cfg.log_epochs = kv.get_bool("run.log_epochs", false);
    cfg.diagnostics = kv.get_bool("run.diagnostics", false);
    cfg.check_eps = kv.get_double("check.eps", 1e-6);
    if (!(cfg.check_eps > 0.0)) throw ConfigError("key 'check.eps' must be positive");

    cfg.trace_name = kv.get_string("out.trace", cfg.trace_name);
    cfg.summary_name = kv.get_string("out.summary", cfg.summary_name);
    cfg.iterates_name = kv.get_string("out.iterates", cfg.iterates_name);
    cfg.report_name = kv.get_string("out.report", cfg.report_name);
    cfg.compare_name = kv.get_string("out.compare", cfg.compare_name);
    cfg.data_name = kv.get_string("out.data", cfg.data_name);

    kv.require_all_known();

    if (cfg.method == MethodKind::str || cfg.method == MethodKind::str_penalty) {
        TrustRegionConfig check = cfg.tr;
        check.max_iter = 1; // budget is resolved later; validate the rest now
        check.validate();
    } else {
        cfg.baseline.validate();
    }
    return cfg;
}

std::size_t iterations_per_epoch(const ExperimentConfig& cfg) {
    std::size_t n = cfg.n;
    if (n == 0) n = 1;
    return std::max<std::size_t>(1, (n + cfg.batch - 1) / cfg.batch);
}

BuiltProblem build_problem(const ExperimentConfig& cfg) {
    BuiltProblem out;
    std::string init_mode = cfg.init_mode;
    std::uint64_t init_seed = cfg.init_seed.value_or(cfg.run_seed);

    if (cfg.family == "interpolating_lsq") {
        out.problem = std::make_shared<InterpolatingLeastSquares>(
            make_interpolating_least_squares(cfg.n, cfg.d, cfg.data_seed));
        if (init_mode.empty()) init_mode = "gaussian";
        out.x0 = random_init(cfg.d, 1, init_seed,
                             init_mode == "orthonormal" ? InitMode::orthonormal
                                                        : InitMode::gaussian);
        return out;
    }

    Mat x;
    std::size_t k = cfg.k;
    if (!cfg.data_file.empty()) {
        LoadedData loaded = read_data_csv(cfg.data_file);
        x = std::move(loaded.x);
        if (k == 0) k = loaded.spec.k;
    } else {
        SpikedDataSpec spec{cfg.d, cfg.k, cfg.n, cfg.noise_sigma, cfg.data_seed};
        x = spiked_data(spec);
    }
    SubspaceProblem sub = make_subspace_problem(x, k);
    out.problem = sub.objective;
    out.constraint = sub.constraint;
    if (init_mode.empty()) init_mode = "orthonormal";
    out.x0 = random_init(x.rows(), k, init_seed,
                         init_mode == "orthonormal" ? InitMode::orthonormal
                                                    : InitMode::gaussian);
    return out;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg, const BuiltProblem& built) {
    ExperimentResult res;
    res.method = cfg.method;
    const FiniteSumProblem& problem = *built.problem;
    std::size_t n = problem.sample_count();
    std::size_t per_epoch = std::max<std::size_t>(1, (n + cfg.batch - 1) / cfg.batch);
    std::size_t max_iter = resolve_max_iter(cfg, n);

    auto t0 = std::chrono::steady_clock::now();
    switch (cfg.method) {
    case MethodKind::str: {
        TrustRegionConfig tr = cfg.tr;
        tr.max_iter = max_iter;
        StopRule stop{cfg.grad_tol, cfg.eval_every};
        RunOptions opts{cfg.batch, cfg.store_full, cfg.log_epochs};
        res.tr_run = run_str(problem, tr, cfg.run_seed, stop, built.x0, opts);
        res.final_x = res.tr_run->state.x;
        res.epoch_log = res.tr_run->epoch_log;
        break;
    }
    case MethodKind::str_penalty: {
        PenaltyConfig pc;
        pc.mu = cfg.mu;
        pc.tr = cfg.tr;
        pc.tr.max_iter = max_iter;
        StopRule stop{cfg.grad_tol, cfg.eval_every};
        RunOptions opts{cfg.batch, cfg.store_full, cfg.log_epochs};
        PenaltyRunResult pr = run_str_penalty(problem, built.constraint.get(), pc,
                                              cfg.run_seed, stop, built.x0, opts);
        res.final_kkt = pr.final_kkt;
        res.tr_run = std::move(pr.run);
        res.final_x = res.tr_run->state.x;
        res.epoch_log = res.tr_run->epoch_log;
        break;
    }
    case MethodKind::sgd:
    case MethodKind::sgd_proj:
    case MethodKind::riemannian_gd: {
        BaselineMethod bm = cfg.method == MethodKind::sgd ? BaselineMethod::sgd
                            : cfg.method == MethodKind::sgd_proj
                                ? BaselineMethod::sgd_proj
                                : BaselineMethod::riemannian_gd;
        res.baseline_run = run_baseline(bm, problem, built.constraint.get(), cfg.baseline,
                                        cfg.run_seed, max_iter, built.x0, cfg.log_epochs);
        res.final_x = res.baseline_run->x;
        res.epoch_log = res.baseline_run->epoch_log;
        break;
    }
    case MethodKind::auglag: {
        std::size_t outer = cfg.auglag_outer;
        if (outer == 0) {
            std::size_t inner = cfg.baseline.auglag_inner_epochs;
            std::size_t epochs = cfg.max_epochs > 0 ? cfg.max_epochs
                                                     : (max_iter + per_epoch - 1) / per_epoch;
            outer = (epochs + inner - 1) / inner;
            if (outer == 0) outer = 1;
        }
        res.auglag_result = auglag_run(problem, built.constraint.get(), cfg.baseline,
                                       cfg.run_seed, outer, built.x0, cfg.log_epochs);
        res.final_x = res.auglag_result->x;
        res.epoch_log = res.auglag_result->epoch_log;
        break;
    }
    }
    auto t1 = std::chrono::steady_clock::now();
    res.wall_seconds = std::chrono::duration<double>(t1 - t0).count();
    return res;
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    return run_experiment(cfg, build_problem(cfg));
}

std::string trace_csv_for(const ExperimentResult& res) {
    if (res.tr_run) return trace_to_csv(res.tr_run->trace);
    if (res.baseline_run) return baseline_trace_to_csv(res.baseline_run->trace);
    if (res.auglag_result) return auglag_trace_to_csv(res.auglag_result->outer_trace);
    throw Error("experiment result carries no trace");
}

SummaryItems summarize(const ExperimentConfig& cfg, const BuiltProblem& built,
                       const ExperimentResult& res) {
    SummaryItems items;
    const FiniteSumProblem& problem = *built.problem;
    double n = static_cast<double>(problem.sample_count());

    items.emplace_back("method", method_name(cfg.method));
    items.emplace_back("problem.family", cfg.family);
    items.emplace_back("problem.n", std::to_string(problem.sample_count()));
    items.emplace_back("problem.dim", std::to_string(problem.dim()));
    items.emplace_back("run.seed", std::to_string(cfg.run_seed));

    double obj_mean = problem.value(res.final_x);
    items.emplace_back("final.objective_mean", format_double(obj_mean));
    items.emplace_back("final.objective_total", format_double(n * obj_mean));

    if (res.tr_run) {
        const RunResult& run = *res.tr_run;
        items.emplace_back("final.grad_norm", format_double(run.final_grad_norm));
        if (run.final_feasibility)
            items.emplace_back("final.feasibility", format_double(*run.final_feasibility));
        items.emplace_back("iterations", std::to_string(run.trace.size()));
        items.emplace_back("stopped_early", run.stopped_early ? "true" : "false");
        items.emplace_back("n_success", std::to_string(run.state.n_success));
        items.emplace_back("n_fail", std::to_string(run.state.n_fail));
        items.emplace_back("n_stationary", std::to_string(run.state.n_stationary));
        items.emplace_back("oracle_calls", std::to_string(run.oracle_calls));
        items.emplace_back("deterministic_evals", std::to_string(run.deterministic_evals));
    }
    if (res.final_kkt) {
        items.emplace_back("final.kkt_stationarity", format_double(res.final_kkt->stationarity));
        items.emplace_back("final.kkt_feasibility", format_double(res.final_kkt->feasibility));
        items.emplace_back("final.kkt_multiplier_norm",
                           format_double(norm2(res.final_kkt->multiplier)));
    }
    if (res.baseline_run) {
        const BaselineRunResult& run = *res.baseline_run;
        if (run.final_feasibility)
            items.emplace_back("final.feasibility", format_double(*run.final_feasibility));
        items.emplace_back("iterations", std::to_string(run.trace.size()));
        items.emplace_back("oracle_calls", std::to_string(run.oracle_calls));
        items.emplace_back("deterministic_evals", std::to_string(run.deterministic_evals));
    }
    if (res.auglag_result) {
        const AugLagResult& run = *res.auglag_result;
        items.emplace_back("final.feasibility", format_double(run.final_feasibility));
        items.emplace_back("final.multiplier_norm", format_double(norm2(run.lambda)));
        items.emplace_back("outer_iterations", std::to_string(run.outer_trace.size()));
        items.emplace_back("oracle_calls", std::to_string(run.oracle_calls));
        items.emplace_back("deterministic_evals", std::to_string(run.deterministic_evals));
    }
    items.emplace_back("wall_seconds", format_double(res.wall_seconds));
    return items;
}

std::vector<CompareRow> run_compare(const std::vector<ExperimentConfig>& cfgs) {
    if (cfgs.empty()) throw ConfigError("compare needs at least one config");
    const ExperimentConfig& first = cfgs.front();
    for (const auto& cfg : cfgs) {
        bool same = cfg.family == first.family && cfg.n == first.n && cfg.d == first.d &&
                    cfg.k == first.k && cfg.noise_sigma == first.noise_sigma &&
                    cfg.data_seed == first.data_seed && cfg.data_file == first.data_file;
        if (!same)
            throw ConfigError("compare configs describe different problems ('" +
                              std::string(method_name(cfg.method)) + "' differs from '" +
                              std::string(method_name(first.method)) + "')");
    }

    std::vector<CompareRow> rows;
    for (const auto& cfg : cfgs) {
        ExperimentConfig run_cfg = cfg;
        run_cfg.log_epochs = true;
        BuiltProblem built = build_problem(run_cfg);
        ExperimentResult res = run_experiment(run_cfg, built);
        double n = static_cast<double>(built.problem->sample_count());
        for (const auto& entry : res.epoch_log) {
            CompareRow row;
            row.epoch = entry.epoch;
            row.method = method_name(cfg.method);
            row.objective_total = n * entry.objective_mean;
            row.feasibility = entry.feasibility;
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

} // namespace strop
