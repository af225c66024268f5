#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "strop/baselines.hpp"
#include "strop/diagnostics.hpp"
#include "strop/linops.hpp"
#include "strop/problems.hpp"
#include "strop/trust_region.hpp"

namespace strop {

// 17 significant decimal digits round-trip IEEE doubles exactly.
// Throws NumericalFailure on NaN/Inf: non-finite values never reach files.
std::string format_double(double v);
double parse_double(const std::string& s);

std::string read_text_file(const std::string& path);

// Write-to-temp-then-rename, so readers never observe partial files.
void atomic_write_text(const std::string& path, const std::string& content);

// Flat key=value configuration with '#' comments and dotted namespaces.
// Accessed keys are tracked so unknown keys can be reported after parsing.
class KeyValueConfig {
public:
    static KeyValueConfig parse_string(const std::string& text, const std::string& origin = "");
    static KeyValueConfig parse_file(const std::string& path);

    bool has(const std::string& key) const;

    std::string get_string(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& fallback) const;
    double get_double(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    std::size_t get_size(const std::string& key) const;
    std::size_t get_size(const std::string& key, std::size_t fallback) const;
    std::uint64_t get_u64(const std::string& key) const;
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;

    void set(const std::string& key, const std::string& value); // CLI overrides

    // Keys present in the file but never read; harness treats these as errors.
    std::vector<std::string> unknown_keys() const;
    void require_all_known() const; // throws ConfigError naming the first one

private:
    std::string origin_;
    std::map<std::string, std::string> values_;
    mutable std::set<std::string> accessed_;
};

inline constexpr const char* kTraceHeader =
    "k,sample_index,grad_norm,a,r,delta_before,delta_after,accepted,"
    "pred_red,actual_red,feasibility,stationarity,obj_sample";

std::string trace_to_csv(const Trace& trace);
void write_trace_csv(const std::string& path, const Trace& trace);
Trace read_trace_csv(const std::string& path);

std::string baseline_trace_to_csv(const std::vector<BaselineIterRecord>& trace);
std::string auglag_trace_to_csv(const std::vector<AugLagOuterRecord>& trace);

// Spiked data files: a header naming the shape fields, one line of their
// values, then the d x n matrix (row per ambient coordinate).
void write_data_csv(const std::string& path, const Mat& x, const SpikedDataSpec& spec);
struct LoadedData {
    Mat x;
    SpikedDataSpec spec;
};
LoadedData read_data_csv(const std::string& path);

struct CompareRow {
    std::size_t epoch = 0;
    std::string method;
    double objective_total = 0.0;
    std::optional<double> feasibility{};
};
std::string compare_to_csv(const std::vector<CompareRow>& rows);
void write_compare_csv(const std::string& path, const std::vector<CompareRow>& rows);

// Ordered key=value summary, same syntax as configs.
using SummaryItems = std::vector<std::pair<std::string, std::string>>;
void write_summary(const std::string& path, const SummaryItems& items);

// Replay sidecar: per-iteration stored state (iterate and batch indices).
struct StoredIterate {
    std::size_t k = 0;
    std::vector<std::size_t> batch_indices;
    Vec x;
};
void write_iterates(const std::string& path, const Trace& trace);
std::vector<StoredIterate> read_iterates(const std::string& path);

// Attach stored states back onto a trace read from CSV (matched by k).
void merge_iterates(Trace& trace, const std::vector<StoredIterate>& stored);

std::string report_to_text(const DiagnosticsReport& report);

} // namespace strop
