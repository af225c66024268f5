#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "strop/diagnostics.hpp"
#include "strop/errors.hpp"
#include "strop/experiment.hpp"
#include "strop/io.hpp"
#include "strop/penalty.hpp"

namespace {

using namespace strop;

enum class LogLevel { quiet = 0, info = 1, debug = 2 };

LogLevel log_level() {
    static LogLevel level = [] {
        const char* env = std::getenv("STROP_LOG");
        if (env == nullptr) return LogLevel::info;
        std::string v(env);
        if (v == "quiet") return LogLevel::quiet;
        if (v == "debug") return LogLevel::debug;
        return LogLevel::info;
    }();
    return level;
}

void log_info(const std::string& msg) {
    if (log_level() >= LogLevel::info) std::cerr << "[strop] " << msg << "\n";
}

void log_debug(const std::string& msg) {
    if (log_level() >= LogLevel::debug) std::cerr << "[strop:debug] " << msg << "\n";
}

std::string join_path(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

// Report lines are already key=value shaped; fold them into the summary.
void append_report(SummaryItems& items, const DiagnosticsReport& report) {
    std::string text = report_to_text(report);
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string::npos) end = text.size();
        std::string line = text.substr(start, end - start);
        start = end + 1;
        if (line.empty()) continue;
        std::size_t eq = line.find('=');
        items.emplace_back("diagnostics." + line.substr(0, eq), line.substr(eq + 1));
    }
}

// Rebuild the final iterate from the last stored state plus its recorded step.
std::optional<Vec> replay_final_x(const FiniteSumProblem& problem,
                                  const ConstraintMap* constraints, double mu,
                                  const Trace& trace) {
    for (auto it = trace.rbegin(); it != trace.rend(); ++it) {
        if (!it->x_before.has_value()) continue;
        if (it->stationary_skip || !it->accepted || it->batch_indices.empty())
            return *it->x_before;
        PenalizedOracle oracle{&problem, constraints, mu};
        Vec g(it->x_before->size(), 0.0);
        for (std::size_t idx : it->batch_indices)
            axpy(1.0, penalized_gradient(oracle, idx, *it->x_before), g);
        scale(g, 1.0 / static_cast<double>(it->batch_indices.size()));
        return add_scaled(*it->x_before, -it->a, g);
    }
    return std::nullopt;
}

int do_run(const std::string& config_path, const std::string& out_dir,
           std::optional<std::uint64_t> seed_override, bool store_full_flag) {
    KeyValueConfig kv = KeyValueConfig::parse_file(config_path);
    ExperimentConfig cfg = parse_experiment_config(kv);
    if (seed_override) cfg.run_seed = *seed_override;
    if (store_full_flag) cfg.store_full = true;

    log_info("run: method=" + std::string(method_name(cfg.method)) +
             " family=" + cfg.family + " seed=" + std::to_string(cfg.run_seed));

    BuiltProblem built = build_problem(cfg);
    ExperimentResult res = run_experiment(cfg, built);

    std::string trace_path = join_path(out_dir, cfg.trace_name);
    atomic_write_text(trace_path, trace_csv_for(res));
    log_debug("wrote " + trace_path);

    if (cfg.store_full && res.tr_run) {
        std::string iterates_path = join_path(out_dir, cfg.iterates_name);
        write_iterates(iterates_path, res.tr_run->trace);
        log_debug("wrote " + iterates_path);
    }

    SummaryItems items = summarize(cfg, built, res);
    if (cfg.diagnostics && res.tr_run) {
        DiagnosticsInputs in;
        in.problem = built.problem.get();
        in.constraints =
            cfg.method == MethodKind::str_penalty ? built.constraint.get() : nullptr;
        in.mu = in.constraints ? cfg.mu : 0.0;
        in.tr = cfg.tr;
        in.trace = &res.tr_run->trace;
        in.eps = cfg.check_eps;
        in.final_kkt = res.final_kkt;
        try {
            append_report(items, build_report(in));
        } catch (const NumericalFailure& e) {
            throw NumericalFailure("diagnostics on this run's trace: " + std::string(e.what()));
        }
    }
    std::string summary_path = join_path(out_dir, cfg.summary_name);
    write_summary(summary_path, items);
    log_info("done: trace=" + trace_path + " summary=" + summary_path);
    return 0;
}

int do_gen_data(const std::string& config_path, const std::string& out_dir) {
    KeyValueConfig kv = KeyValueConfig::parse_file(config_path);
    SpikedDataSpec spec;
    spec.d = kv.get_size("problem.d");
    spec.k = kv.get_size("problem.k");
    spec.n = kv.get_size("problem.n");
    spec.noise_sigma = kv.get_double("problem.noise_sigma", 0.05);
    spec.seed = kv.get_u64("problem.data_seed", 0);
    spec.validate();
    std::string name = kv.get_string("out.data", "data.csv");

    Mat x = spiked_data(spec);
    std::string path = join_path(out_dir, name);
    write_data_csv(path, x, spec);
    log_info("gen-data: wrote " + path);
    return 0;
}

int do_check(const std::string& config_path, const std::string& out_dir) {
    KeyValueConfig kv = KeyValueConfig::parse_file(config_path);
    ExperimentConfig cfg = parse_experiment_config(kv);
    if (cfg.method != MethodKind::str && cfg.method != MethodKind::str_penalty)
        throw ConfigError("check applies to trust-region methods (str, str_penalty)");

    std::string trace_path = join_path(out_dir, cfg.trace_name);
    Trace trace = read_trace_csv(trace_path);
    std::string iterates_path = join_path(out_dir, cfg.iterates_name);
    if (std::filesystem::exists(iterates_path)) {
        merge_iterates(trace, read_iterates(iterates_path));
        log_debug("merged stored iterates from " + iterates_path);
    } else {
        log_info("no stored iterates at " + iterates_path +
                 "; replay-based checks will be vacuous");
    }

    BuiltProblem built = build_problem(cfg);
    DiagnosticsInputs in;
    in.problem = built.problem.get();
    in.constraints = cfg.method == MethodKind::str_penalty ? built.constraint.get() : nullptr;
    in.mu = in.constraints ? cfg.mu : 0.0;
    in.tr = cfg.tr;
    in.trace = &trace;
    in.eps = cfg.check_eps;
    if (in.constraints != nullptr) {
        if (auto x = replay_final_x(*built.problem, in.constraints, in.mu, trace))
            in.final_kkt = kkt_residual(*built.problem, *in.constraints, in.mu, *x);
    }

    DiagnosticsReport report = build_report(in);
    std::string report_path = join_path(out_dir, cfg.report_name);
    atomic_write_text(report_path, report_to_text(report));
    log_info("check: wrote " + report_path);

    bool ok = true;
    for (const auto& check : report.checks) {
        if (check.outcome == CheckOutcome::fail) {
            ok = false;
            std::cerr << "check failed: " << check.name << " lhs=" << format_double(check.lhs)
                      << " rhs=" << format_double(check.rhs)
                      << " margin=" << format_double(check.margin) << "\n";
        }
    }
    return ok ? 0 : 4;
}

int do_compare(const std::vector<std::string>& config_paths, const std::string& out_dir) {
    std::vector<ExperimentConfig> cfgs;
    for (const auto& path : config_paths) {
        KeyValueConfig kv = KeyValueConfig::parse_file(path);
        cfgs.push_back(parse_experiment_config(kv));
        log_debug("compare: loaded " + path);
    }
    std::vector<CompareRow> rows = run_compare(cfgs);
    std::string path = join_path(out_dir, cfgs.front().compare_name);
    write_compare_csv(path, rows);
    log_info("compare: wrote " + path);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stochastic trust-region solvers and experiment harness"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> config_paths;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed_override;
    bool store_full_flag = false;

    CLI::App* cmd_run = app.add_subcommand("run", "Run one configured experiment");
    cmd_run->add_option("--config", config_path, "Experiment config file")->required();
    cmd_run->add_option("--out", out_dir, "Output directory");
    std::uint64_t seed_value = 0;
    CLI::Option* seed_opt =
        cmd_run->add_option("--seed", seed_value, "Override the run seed");
    cmd_run->add_flag("--store-full", store_full_flag, "Store iterates for later checks");

    CLI::App* cmd_gen = app.add_subcommand("gen-data", "Generate a spiked data file");
    cmd_gen->add_option("--config", config_path, "Data spec config file")->required();
    cmd_gen->add_option("--out", out_dir, "Output directory");

    CLI::App* cmd_check = app.add_subcommand("check", "Replay a trace through the lemma checks");
    cmd_check->add_option("--config", config_path, "Experiment config file")->required();
    cmd_check->add_option("--out", out_dir, "Directory holding the run outputs");

    CLI::App* cmd_compare = app.add_subcommand("compare", "Run several methods on one problem");
    cmd_compare->add_option("--config", config_paths, "Config file (repeatable)")
        ->required()
        ->take_all();
    cmd_compare->add_option("--out", out_dir, "Output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (seed_opt->count() > 0) seed_override = seed_value;
        if (cmd_run->parsed()) return do_run(config_path, out_dir, seed_override, store_full_flag);
        if (cmd_gen->parsed()) return do_gen_data(config_path, out_dir);
        if (cmd_check->parsed()) return do_check(config_path, out_dir);
        if (cmd_compare->parsed()) return do_compare(config_paths, out_dir);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const InvalidDimensions& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const NumericalFailure& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 3;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
