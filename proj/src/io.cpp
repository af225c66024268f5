#include "strop/io.hpp"

#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "strop/errors.hpp"

namespace strop {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

std::string opt_field(const std::optional<double>& v) {
    return v ? format_double(*v) : std::string();
}

std::optional<double> parse_opt(const std::string& s) {
    if (s.empty()) return std::nullopt;
    return parse_double(s);
}

std::size_t parse_size(const std::string& s, const std::string& what) {
    if (s.empty()) throw Error("empty " + what + " field");
    errno = 0;
    char* end = nullptr;
    unsigned long long v = std::strtoull(s.c_str(), &end, 10);
    if (errno != 0 || end == s.c_str() || *end != '\0')
        throw Error("cannot parse " + what + " from '" + s + "'");
    return static_cast<std::size_t>(v);
}

} // namespace

std::string format_double(double v) {
    if (!std::isfinite(v)) throw NumericalFailure("refusing to write a non-finite value");
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

double parse_double(const std::string& s) {
    if (s.empty()) throw Error("cannot parse a number from an empty field");
    errno = 0;
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0')
        throw Error("cannot parse a number from '" + s + "'");
    // errno is ERANGE on denormal underflow too; only overflow is fatal.
    if (errno == ERANGE && std::abs(v) == HUGE_VAL)
        throw Error("number '" + s + "' is out of range");
    if (!std::isfinite(v)) throw Error("non-finite value '" + s + "' in input");
    return v;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void atomic_write_text(const std::string& path, const std::string& content) {
    std::filesystem::path target(path);
    if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
    std::filesystem::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot open '" + tmp.string() + "' for writing");
        out << content;
        out.flush();
        if (!out) throw Error("short write to '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, target);
}

KeyValueConfig KeyValueConfig::parse_string(const std::string& text, const std::string& origin) {
    KeyValueConfig cfg;
    cfg.origin_ = origin;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string::size_type hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        std::string::size_type eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(lineno) + " of " +
                              (origin.empty() ? "config" : origin) + " is not key=value: '" +
                              line + "'");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw ConfigError("line " + std::to_string(lineno) + " has an empty key");
        if (cfg.values_.count(key))
            throw ConfigError("duplicate key '" + key + "'");
        cfg.values_[key] = value;
    }
    return cfg;
}

KeyValueConfig KeyValueConfig::parse_file(const std::string& path) {
    return parse_string(read_text_file(path), path);
}

bool KeyValueConfig::has(const std::string& key) const {
    return values_.count(key) != 0;
}

std::string KeyValueConfig::get_string(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("missing required key '" + key + "'");
    accessed_.insert(key);
    return it->second;
}

std::string KeyValueConfig::get_string(const std::string& key,
                                       const std::string& fallback) const {
    accessed_.insert(key);
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
}

double KeyValueConfig::get_double(const std::string& key) const {
    const std::string raw = get_string(key);
    try {
        return parse_double(raw);
    } catch (const Error&) {
        throw ConfigError("key '" + key + "' is not a number: '" + raw + "'");
    }
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
    accessed_.insert(key);
    return has(key) ? get_double(key) : fallback;
}

std::size_t KeyValueConfig::get_size(const std::string& key) const {
    const std::string raw = get_string(key);
    try {
        return parse_size(raw, "key '" + key + "'");
    } catch (const Error&) {
        throw ConfigError("key '" + key + "' is not a nonnegative integer: '" + raw + "'");
    }
}

std::size_t KeyValueConfig::get_size(const std::string& key, std::size_t fallback) const {
    accessed_.insert(key);
    return has(key) ? get_size(key) : fallback;
}

std::uint64_t KeyValueConfig::get_u64(const std::string& key) const {
    return static_cast<std::uint64_t>(get_size(key));
}

std::uint64_t KeyValueConfig::get_u64(const std::string& key, std::uint64_t fallback) const {
    accessed_.insert(key);
    return has(key) ? get_u64(key) : fallback;
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
    accessed_.insert(key);
    if (!has(key)) return fallback;
    std::string raw = get_string(key);
    if (raw == "true" || raw == "1") return true;
    if (raw == "false" || raw == "0") return false;
    throw ConfigError("key '" + key + "' is not a boolean: '" + raw + "'");
}

void KeyValueConfig::set(const std::string& key, const std::string& value) {
    values_[key] = value;
}

std::vector<std::string> KeyValueConfig::unknown_keys() const {
    std::vector<std::string> out;
    for (const auto& [key, value] : values_)
        if (!accessed_.count(key)) out.push_back(key);
    return out;
}

void KeyValueConfig::require_all_known() const {
    auto unknown = unknown_keys();
    if (!unknown.empty()) throw ConfigError("unknown key '" + unknown.front() + "'");
}

std::string trace_to_csv(const Trace& trace) {
    std::string out = kTraceHeader;
    out += '\n';
    for (const auto& rec : trace) {
        out += std::to_string(rec.k);
        out += ',';
        out += std::to_string(rec.sample_index);
        out += ',';
        out += format_double(rec.grad_norm);
        out += ',';
        out += format_double(rec.a);
        out += ',';
        out += format_double(rec.r);
        out += ',';
        out += format_double(rec.delta_before);
        out += ',';
        out += format_double(rec.delta_after);
        out += ',';
        out += rec.accepted ? '1' : '0';
        out += ',';
        out += format_double(rec.pred_red);
        out += ',';
        out += format_double(rec.actual_red);
        out += ',';
        out += opt_field(rec.feasibility);
        out += ',';
        out += opt_field(rec.stationarity);
        out += ',';
        out += format_double(rec.obj_sample);
        out += '\n';
    }
    return out;
}

void write_trace_csv(const std::string& path, const Trace& trace) {
    atomic_write_text(path, trace_to_csv(trace));
}

Trace read_trace_csv(const std::string& path) {
    std::string text = read_text_file(path);
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw Error("trace file '" + path + "' is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kTraceHeader)
        throw Error("trace file '" + path + "' has an unexpected header");
    Trace trace;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto fields = split(line, ',');
        if (fields.size() != 13)
            throw Error("trace line " + std::to_string(lineno) + " has " +
                        std::to_string(fields.size()) + " fields, expected 13");
        IterationRecord rec;
        rec.k = parse_size(fields[0], "iteration index");
        rec.sample_index = static_cast<long long>(parse_size(fields[1], "sample index"));
        rec.grad_norm = parse_double(fields[2]);
        rec.a = parse_double(fields[3]);
        rec.r = parse_double(fields[4]);
        rec.delta_before = parse_double(fields[5]);
        rec.delta_after = parse_double(fields[6]);
        rec.accepted = fields[7] == "1";
        rec.pred_red = parse_double(fields[8]);
        rec.actual_red = parse_double(fields[9]);
        rec.feasibility = parse_opt(fields[10]);
        rec.stationarity = parse_opt(fields[11]);
        rec.obj_sample = parse_double(fields[12]);
        // Stationary-sample skips are the only records with a zero step.
        rec.stationary_skip = rec.a == 0.0;
        trace.push_back(std::move(rec));
    }
    return trace;
}

std::string baseline_trace_to_csv(const std::vector<BaselineIterRecord>& trace) {
    std::string out = kTraceHeader;
    out += '\n';
    for (const auto& rec : trace) {
        out += std::to_string(rec.k);
        out += ',';
        out += std::to_string(rec.sample_index);
        out += ',';
        out += format_double(rec.grad_norm);
        out += ",,,,,,,,"; // a,r,delta_before,delta_after,accepted,pred_red,actual_red: not defined
        out += opt_field(rec.feasibility);
        out += ",,"; // stationarity
        out += format_double(rec.obj_sample);
        out += '\n';
    }
    return out;
}

std::string auglag_trace_to_csv(const std::vector<AugLagOuterRecord>& trace) {
    std::string out = kTraceHeader;
    out += '\n';
    for (const auto& rec : trace) {
        out += std::to_string(rec.outer);
        out += ",,,,,,,,,,"; // stochastic per-step fields are not defined per outer iteration
        out += format_double(rec.feasibility);
        out += ",,";
        out += format_double(rec.objective);
        out += '\n';
    }
    return out;
}

void write_data_csv(const std::string& path, const Mat& x, const SpikedDataSpec& spec) {
    if (x.rows() != spec.d || x.cols() != spec.n)
        throw DimensionMismatch("data matrix shape does not match its spec");
    std::string out = "d,k,n,noise_sigma,seed\n";
    out += std::to_string(spec.d);
    out += ',';
    out += std::to_string(spec.k);
    out += ',';
    out += std::to_string(spec.n);
    out += ',';
    out += format_double(spec.noise_sigma);
    out += ',';
    out += std::to_string(spec.seed);
    out += '\n';
    for (std::size_t i = 0; i < x.rows(); ++i) {
        for (std::size_t j = 0; j < x.cols(); ++j) {
            if (j > 0) out += ',';
            out += format_double(x(i, j));
        }
        out += '\n';
    }
    atomic_write_text(path, out);
}

LoadedData read_data_csv(const std::string& path) {
    std::string text = read_text_file(path);
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw Error("data file '" + path + "' is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "d,k,n,noise_sigma,seed")
        throw Error("data file '" + path + "' has an unexpected header");
    if (!std::getline(in, line)) throw Error("data file '" + path + "' is missing its shape row");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto fields = split(line, ',');
    if (fields.size() != 5) throw Error("data shape row must have 5 fields");

    LoadedData out;
    out.spec.d = parse_size(fields[0], "d");
    out.spec.k = parse_size(fields[1], "k");
    out.spec.n = parse_size(fields[2], "n");
    out.spec.noise_sigma = parse_double(fields[3]);
    out.spec.seed = static_cast<std::uint64_t>(parse_size(fields[4], "seed"));
    out.spec.validate();

    out.x = Mat(out.spec.d, out.spec.n);
    for (std::size_t i = 0; i < out.spec.d; ++i) {
        if (!std::getline(in, line))
            throw Error("data file '" + path + "' ends before row " + std::to_string(i));
        if (!line.empty() && line.back() == '\r') line.pop_back();
        auto row = split(line, ',');
        if (row.size() != out.spec.n)
            throw Error("data row " + std::to_string(i) + " has " +
                        std::to_string(row.size()) + " fields, expected " +
                        std::to_string(out.spec.n));
        for (std::size_t j = 0; j < out.spec.n; ++j) out.x(i, j) = parse_double(row[j]);
    }
    return out;
}

std::string compare_to_csv(const std::vector<CompareRow>& rows) {
    std::string out = "epoch,method,objective_total,feasibility\n";
    for (const auto& row : rows) {
        out += std::to_string(row.epoch);
        out += ',';
        out += row.method;
        out += ',';
        out += format_double(row.objective_total);
        out += ',';
        out += opt_field(row.feasibility);
        out += '\n';
    }
    return out;
}

void write_compare_csv(const std::string& path, const std::vector<CompareRow>& rows) {
    atomic_write_text(path, compare_to_csv(rows));
}

void write_summary(const std::string& path, const SummaryItems& items) {
    std::string out;
    for (const auto& [key, value] : items) {
        out += key;
        out += '=';
        out += value;
        out += '\n';
    }
    atomic_write_text(path, out);
}

void write_iterates(const std::string& path, const Trace& trace) {
    std::string out = "# k,batch_indices,x\n";
    for (const auto& rec : trace) {
        if (!rec.x_before.has_value()) continue;
        out += std::to_string(rec.k);
        out += ',';
        for (std::size_t j = 0; j < rec.batch_indices.size(); ++j) {
            if (j > 0) out += ' ';
            out += std::to_string(rec.batch_indices[j]);
        }
        out += ',';
        const Vec& x = *rec.x_before;
        for (std::size_t j = 0; j < x.size(); ++j) {
            if (j > 0) out += ' ';
            out += format_double(x[j]);
        }
        out += '\n';
    }
    atomic_write_text(path, out);
}

std::vector<StoredIterate> read_iterates(const std::string& path) {
    std::string text = read_text_file(path);
    std::istringstream in(text);
    std::string line;
    std::vector<StoredIterate> out;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        auto fields = split(line, ',');
        if (fields.size() != 3)
            throw Error("iterate line " + std::to_string(lineno) + " must have 3 fields");
        StoredIterate item;
        item.k = parse_size(fields[0], "iteration index");
        std::istringstream idx(fields[1]);
        std::string tok;
        while (idx >> tok) item.batch_indices.push_back(parse_size(tok, "batch index"));
        std::istringstream xs(fields[2]);
        while (xs >> tok) item.x.push_back(parse_double(tok));
        if (item.x.empty())
            throw Error("iterate line " + std::to_string(lineno) + " carries no state");
        out.push_back(std::move(item));
    }
    return out;
}

void merge_iterates(Trace& trace, const std::vector<StoredIterate>& stored) {
    std::map<std::size_t, const StoredIterate*> by_k;
    for (const auto& item : stored) by_k[item.k] = &item;
    for (auto& rec : trace) {
        auto it = by_k.find(rec.k);
        if (it == by_k.end()) continue;
        rec.x_before = it->second->x;
        rec.batch_indices = it->second->batch_indices;
    }
}

std::string report_to_text(const DiagnosticsReport& report) {
    std::string out;
    auto put = [&](const char* key, const std::optional<double>& v) {
        if (v) {
            out += key;
            out += '=';
            out += format_double(*v);
            out += '\n';
        }
    };
    put("rho_hat", report.rho_hat);
    put("tau_hat", report.tau_hat);
    put("l_hat_mean", report.l_hat_mean);
    put("l_hat_max_sample", report.l_hat_max_sample);
    put("m_hat", report.m_hat);
    out += "r_const=";
    out += format_double(report.r_const);
    out += '\n';
    put("sigma_min_hat", report.sigma_min_hat);
    put("g_hat", report.g_hat);
    put("c_c_hat", report.c_c_hat);
    for (const auto& check : report.checks) {
        out += "check.";
        out += check.name;
        out += '=';
        out += to_string(check.outcome);
        if (check.outcome != CheckOutcome::vacuous) {
            out += " lhs=";
            out += format_double(check.lhs);
            out += " rhs=";
            out += format_double(check.rhs);
            out += " margin=";
            out += format_double(check.margin);
        }
        if (!check.note.empty()) {
            out += " (";
            out += check.note;
            out += ')';
        }
        out += '\n';
    }
    return out;
}

} // namespace strop
