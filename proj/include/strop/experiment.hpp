#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "strop/baselines.hpp"
#include "strop/io.hpp"
#include "strop/penalty.hpp"
#include "strop/problems.hpp"
#include "strop/trust_region.hpp"

namespace strop {

enum class MethodKind { str, str_penalty, sgd, sgd_proj, riemannian_gd, auglag };

MethodKind method_from_name(const std::string& name); // throws ConfigError
const char* method_name(MethodKind kind);

// Parsed and validated experiment description. Config keys use dotted
// namespaces: problem.*, init.*, method, tr.*, penalty.*, baseline.*,
// auglag.*, run.*, out.*, check.*.
struct ExperimentConfig {
    // problem
    std::string family;      // interpolating_lsq | subspace
    std::size_t n = 0;
    std::size_t d = 0;
    std::size_t k = 0;       // subspace only
    double noise_sigma = 0.05;
    std::uint64_t data_seed = 0;
    std::string data_file;   // optional pre-generated data CSV (subspace)

    // initialization
    std::string init_mode;   // gaussian | orthonormal (family default if empty)
    std::optional<std::uint64_t> init_seed{}; // defaults to run seed

    MethodKind method = MethodKind::str;

    TrustRegionConfig tr{};
    double mu = 1.0;
    BaselineConfig baseline{};
    std::size_t auglag_outer = 0; // 0: derived from run.max_epochs

    // run controls
    std::uint64_t run_seed = 0;
    std::size_t max_iter = 0;
    std::size_t max_epochs = 0; // used when max_iter is 0
    std::size_t batch = 1;
    std::size_t eval_every = 0; // 0: once per epoch
    double grad_tol = 0.0;      // 0 disables the deterministic stop
    bool store_full = false;
    bool log_epochs = false;
    bool diagnostics = false;
    double check_eps = 1e-6;

    // output file names, resolved against the output directory
    std::string trace_name = "trace.csv";
    std::string summary_name = "summary.txt";
    std::string iterates_name = "iterates.txt";
    std::string report_name = "report.txt";
    std::string compare_name = "compare.csv";
    std::string data_name = "data.csv";
};

// Reads every recognized key and rejects unknown ones, naming the offender.
ExperimentConfig parse_experiment_config(const KeyValueConfig& kv);

struct BuiltProblem {
    std::shared_ptr<FiniteSumProblem> problem;
    std::shared_ptr<OrthogonalityConstraint> constraint; // subspace family only
    Vec x0;
};

BuiltProblem build_problem(const ExperimentConfig& cfg);

struct ExperimentResult {
    MethodKind method = MethodKind::str;
    // Exactly one of these is populated, matching the method kind.
    std::optional<RunResult> tr_run{};
    std::optional<BaselineRunResult> baseline_run{};
    std::optional<AugLagResult> auglag_result{};
    std::optional<KktResidual> final_kkt{}; // str_penalty with constraints
    Vec final_x;
    std::vector<EpochLogEntry> epoch_log;
    double wall_seconds = 0.0;
};

ExperimentResult run_experiment(const ExperimentConfig& cfg, const BuiltProblem& built);
ExperimentResult run_experiment(const ExperimentConfig& cfg);

// Iterations in one epoch for this config (ceil(n / batch)).
std::size_t iterations_per_epoch(const ExperimentConfig& cfg);

std::string trace_csv_for(const ExperimentResult& res);
SummaryItems summarize(const ExperimentConfig& cfg, const BuiltProblem& built,
                       const ExperimentResult& res);

// Runs every config on the problem built from the first one (shared data,
// per-config run seeds) and returns aligned per-epoch rows; throws ConfigError
// when the problem specs differ.
std::vector<CompareRow> run_compare(const std::vector<ExperimentConfig>& cfgs);

} // namespace strop
