/*
    Licensed under the Apache License, Version 2.0 (the "License");
    you may not use this file except in compliance with the License.
    You may obtain a copy of the License at

        https://www.apache.org/licenses/LICENSE-2.0

    Unless required by applicable law or agreed to in writing, software
    distributed under the License is distributed on an "AS IS" BASIS,
    WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
    See the License for the specific language governing permissions and
    limitations under the License.
*/

#include "qdaqp/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>

#include "qdaqp/serialization.hpp"

namespace qdaqp {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
    fail(ErrorKind::kConfig, "config key '" + std::string(key) + "': cannot parse '" + std::string(value) + "' as " +
                                 std::string(expected));
}

double parse_double(std::string_view key, std::string_view v) {
    double x = 0.0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc{} || p != v.data() + v.size() || !std::isfinite(x)) bad_value(key, v, "a finite number");
    return x;
}

std::uint64_t parse_uint(std::string_view key, std::string_view v) {
    std::uint64_t x = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (ec != std::errc{} || p != v.data() + v.size()) bad_value(key, v, "a non-negative integer");
    return x;
}

bool parse_bool(std::string_view key, std::string_view v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    bad_value(key, v, "a boolean");
}

std::string fmt_double(double v) {
    char buf[64];
    const auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return ec == std::errc{} ? std::string(buf, p) : std::string("nan");
}

struct Field {
    std::string key;
    std::function<void(ExperimentConfig&, std::string_view, std::string_view)> set;
    std::function<std::string(const ExperimentConfig&)> get;
};

template <class T>
using Accessor = T& (*)(ExperimentConfig&);

template <class T>
T& access(Accessor<T> acc, const ExperimentConfig& c) {
    return acc(const_cast<ExperimentConfig&>(c));
}

Field f_double(std::string key, Accessor<double> acc) {
    return {std::move(key), [acc](ExperimentConfig& c, std::string_view k, std::string_view v) { acc(c) = parse_double(k, v); },
            [acc](const ExperimentConfig& c) { return fmt_double(access(acc, c)); }};
}

Field f_size(std::string key, Accessor<std::size_t> acc) {
    return {std::move(key),
            [acc](ExperimentConfig& c, std::string_view k, std::string_view v) {
                acc(c) = static_cast<std::size_t>(parse_uint(k, v));
            },
            [acc](const ExperimentConfig& c) { return std::to_string(access(acc, c)); }};
}

Field f_u64(std::string key, Accessor<std::uint64_t> acc) {
    return {std::move(key), [acc](ExperimentConfig& c, std::string_view k, std::string_view v) { acc(c) = parse_uint(k, v); },
            [acc](const ExperimentConfig& c) { return std::to_string(access(acc, c)); }};
}

Field f_bool(std::string key, Accessor<bool> acc) {
    return {std::move(key), [acc](ExperimentConfig& c, std::string_view k, std::string_view v) { acc(c) = parse_bool(k, v); },
            [acc](const ExperimentConfig& c) { return std::string(access(acc, c) ? "true" : "false"); }};
}

Field f_string(std::string key, Accessor<std::string> acc, std::vector<std::string> choices = {}) {
    return {std::move(key),
            [acc, choices](ExperimentConfig& c, std::string_view k, std::string_view v) {
                if (!choices.empty() && std::find(choices.begin(), choices.end(), v) == choices.end()) {
                    std::string list;
                    for (const auto& s : choices) list += (list.empty() ? "" : "|") + s;
                    bad_value(k, v, "one of " + list);
                }
                acc(c) = std::string(v);
            },
            [acc](const ExperimentConfig& c) { return access(acc, c); }};
}

const std::vector<Field>& fields() {
    static const std::vector<Field> table = [] {
        std::vector<Field> f;
        f.push_back(f_string("out", [](ExperimentConfig& c) -> std::string& { return c.out; }));
        f.push_back(f_u64("seed", [](ExperimentConfig& c) -> std::uint64_t& { return c.seed; }));

        f.push_back(f_string("data.kind", [](ExperimentConfig& c) -> std::string& { return c.data_kind; },
                             {"spatial", "uniform"}));
        f.push_back(f_string("data.path", [](ExperimentConfig& c) -> std::string& { return c.data_path; }));
        f.push_back({"data.seed",
                     [](ExperimentConfig& c, std::string_view k, std::string_view v) {
                         c.uniform.seed = c.scenario.data.seed = parse_uint(k, v);
                     },
                     [](const ExperimentConfig& c) { return std::to_string(c.scenario.data.seed); }});
        f.push_back({"data.rows",
                     [](ExperimentConfig& c, std::string_view k, std::string_view v) {
                         c.uniform.rows = c.scenario.data.rows = static_cast<std::size_t>(parse_uint(k, v));
                     },
                     [](const ExperimentConfig& c) {
                         return std::to_string(c.data_kind == "uniform" ? c.uniform.rows : c.scenario.data.rows);
                     }});
        f.push_back(f_size("data.columns", [](ExperimentConfig& c) -> std::size_t& { return c.uniform.columns; }));
        f.push_back(f_double("data.lo", [](ExperimentConfig& c) -> double& { return c.uniform.value_range.lo; }));
        f.push_back(f_double("data.hi", [](ExperimentConfig& c) -> double& { return c.uniform.value_range.hi; }));
        f.push_back(f_double("data.value_scale", [](ExperimentConfig& c) -> double& { return c.scenario.data.value_scale; }));
        f.push_back(f_double("data.noise_sd", [](ExperimentConfig& c) -> double& { return c.scenario.data.noise_sd; }));
        f.push_back(f_double("data.wave", [](ExperimentConfig& c) -> double& { return c.scenario.data.wave_amplitude; }));
        f.push_back(f_double("data.trend", [](ExperimentConfig& c) -> double& { return c.scenario.data.trend; }));

        f.push_back(f_string("workload.kind", [](ExperimentConfig& c) -> std::string& { return c.workload_kind; },
                             {"synthetic", "clustered", "temporal"}));
        f.push_back(f_string("workload.path", [](ExperimentConfig& c) -> std::string& { return c.workload_path; }));
        f.push_back({"workload.count",
                     [](ExperimentConfig& c, std::string_view k, std::string_view v) {
                         c.query.count = c.temporal.count = static_cast<std::size_t>(parse_uint(k, v));
                         c.clustered.points_per_center = std::max<std::size_t>(
                             1, c.query.count / std::max<std::size_t>(1, c.clustered.n_centers));
                     },
                     [](const ExperimentConfig& c) { return std::to_string(c.query.count); }});
        f.push_back(f_size("workload.predicates", [](ExperimentConfig& c) -> std::size_t& { return c.query.predicates; }));
        f.push_back(f_double("workload.selectivity", [](ExperimentConfig& c) -> double& { return c.query.selectivity; }));
        f.push_back({"workload.centers",
                     [](ExperimentConfig& c, std::string_view k, std::string_view v) {
                         c.clustered.n_centers = static_cast<std::size_t>(parse_uint(k, v));
                         c.clustered.points_per_center = std::max<std::size_t>(
                             1, c.query.count / std::max<std::size_t>(1, c.clustered.n_centers));
                     },
                     [](const ExperimentConfig& c) { return std::to_string(c.clustered.n_centers); }});
        f.push_back({"workload.range_fraction",
                     [](ExperimentConfig& c, std::string_view k, std::string_view v) {
                         c.clustered.range_fraction = c.temporal.range_fraction = parse_double(k, v);
                     },
                     [](const ExperimentConfig& c) { return fmt_double(c.clustered.range_fraction); }});
        f.push_back(f_size("workload.column", [](ExperimentConfig& c) -> std::size_t& { return c.temporal.column; }));
        f.push_back({"workload.agg",
                     [](ExperimentConfig& c, std::string_view k, std::string_view v) {
                         try {
                             c.agg.function = parse_aggregate_function(v);
                         } catch (const Error&) {
                             bad_value(k, v, "one of count|sum|avg|min|max");
                         }
                     },
                     [](const ExperimentConfig& c) { return std::string(to_string(c.agg.function)); }});
        f.push_back(f_size("workload.target", [](ExperimentConfig& c) -> std::size_t& { return c.agg.target; }));

        f.push_back(f_double("quantizer.vigilance",
                             [](ExperimentConfig& c) -> double& { return c.scenario.engine.quantizer.vigilance; }));
        f.push_back(f_double("quantizer.learn_rate",
                             [](ExperimentConfig& c) -> double& { return c.scenario.engine.quantizer.learn_rate; }));
        f.push_back({"model.kind",
                     [](ExperimentConfig& c, std::string_view k, std::string_view v) {
                         try {
                             c.scenario.engine.model.kind = parse_model_kind(v);
                         } catch (const Error&) {
                             bad_value(k, v, "one of ridge|sgd_linear|knn");
                         }
                     },
                     [](const ExperimentConfig& c) { return std::string(to_string(c.scenario.engine.model.kind)); }});
        f.push_back(f_double("model.ridge_alpha",
                             [](ExperimentConfig& c) -> double& { return c.scenario.engine.model.ridge_alpha; }));
        f.push_back(f_size("model.knn_k", [](ExperimentConfig& c) -> std::size_t& { return c.scenario.engine.model.knn_k; }));
        f.push_back(f_double("model.sgd_step", [](ExperimentConfig& c) -> double& { return c.scenario.engine.model.sgd_step; }));
        f.push_back(f_size("model.sgd_epochs",
                           [](ExperimentConfig& c) -> std::size_t& { return c.scenario.engine.model.sgd_epochs; }));
        f.push_back(f_double("cdm.h_multiplier",
                             [](ExperimentConfig& c) -> double& { return c.scenario.engine.cdm.h_multiplier; }));
        f.push_back(f_double("adm.lambda", [](ExperimentConfig& c) -> double& { return c.scenario.engine.adm.lambda; }));
        f.push_back(f_double("adm.c", [](ExperimentConfig& c) -> double& { return c.scenario.engine.adm.c; }));
        f.push_back(f_size("adm.min_buffer",
                           [](ExperimentConfig& c) -> std::size_t& { return c.scenario.engine.adm.min_buffer; }));
        f.push_back({"adm.affiliate",
                     [](ExperimentConfig& c, std::string_view k, std::string_view v) {
                         if (v == "within") {
                             c.scenario.engine.adm.affiliate_criterion = AffiliateCriterion::kWithinRadius;
                         } else if (v == "beyond") {
                             c.scenario.engine.adm.affiliate_criterion = AffiliateCriterion::kBeyondRadius;
                         } else {
                             bad_value(k, v, "one of within|beyond");
                         }
                     },
                     [](const ExperimentConfig& c) {
                         return std::string(c.scenario.engine.adm.affiliate_criterion == AffiliateCriterion::kWithinRadius
                                                ? "within"
                                                : "beyond");
                     }});

        f.push_back(f_double("scenario.range_fraction", [](ExperimentConfig& c) -> double& { return c.scenario.range_fraction; }));
        f.push_back(f_double("scenario.range_floor", [](ExperimentConfig& c) -> double& { return c.scenario.range_floor; }));
        f.push_back(f_double("scenario.spread", [](ExperimentConfig& c) -> double& { return c.scenario.spread_fraction; }));
        f.push_back({"scenario.per_space",
                     [](ExperimentConfig& c, std::string_view k, std::string_view v) {
                         c.per_space = c.conv.train_per_space = static_cast<std::size_t>(parse_uint(k, v));
                     },
                     [](const ExperimentConfig& c) { return std::to_string(c.per_space); }});

        f.push_back(f_size("drift.at", [](ExperimentConfig& c) -> std::size_t& { return c.drift.at; }));
        f.push_back(f_size("drift.length", [](ExperimentConfig& c) -> std::size_t& { return c.drift.length; }));
        f.push_back(f_size("drift.space", [](ExperimentConfig& c) -> std::size_t& { return c.drift.space; }));
        f.push_back(f_size("drift.k_spaces", [](ExperimentConfig& c) -> std::size_t& { return c.drift.k_spaces; }));
        f.push_back(f_string("drift.pre_path", [](ExperimentConfig& c) -> std::string& { return c.drift.pre_path; }));
        f.push_back(f_string("drift.post_path", [](ExperimentConfig& c) -> std::string& { return c.drift.post_path; }));

        f.push_back(f_size("federation.n", [](ExperimentConfig& c) -> std::size_t& { return c.federation.n; }));
        f.push_back({"federation.k_spaces",
                     [](ExperimentConfig& c, std::string_view k, std::string_view v) {
                         c.federation.k_spaces = c.conv.k_spaces = static_cast<std::size_t>(parse_uint(k, v));
                     },
                     [](const ExperimentConfig& c) { return std::to_string(c.federation.k_spaces); }});
        f.push_back(f_size("federation.rounds", [](ExperimentConfig& c) -> std::size_t& { return c.plan.rounds; }));
        f.push_back(f_double("federation.drift_probability",
                             [](ExperimentConfig& c) -> double& { return c.plan.drift_probability; }));
        f.push_back(f_double("federation.drift_window_lo",
                             [](ExperimentConfig& c) -> double& { return c.plan.drift_window_lo; }));
        f.push_back(f_double("federation.drift_window_hi",
                             [](ExperimentConfig& c) -> double& { return c.plan.drift_window_hi; }));
        f.push_back(f_size("federation.workers", [](ExperimentConfig& c) -> std::size_t& { return c.federation.workers; }));
        f.push_back(f_size("federation.rate_window", [](ExperimentConfig& c) -> std::size_t& { return c.rate_window; }));
        f.push_back(f_bool("federation.convergence", [](ExperimentConfig& c) -> bool& { return c.convergence; }));
        f.push_back(f_size("federation.probe_window", [](ExperimentConfig& c) -> std::size_t& { return c.conv.probe_window; }));
        f.push_back(f_size("federation.probe_trials", [](ExperimentConfig& c) -> std::size_t& { return c.conv.probe_trials; }));
        f.push_back(f_size("federation.max_phase", [](ExperimentConfig& c) -> std::size_t& { return c.conv.max_phase; }));
        return f;
    }();
    return table;
}

const Field& field(std::string_view key) {
    for (const auto& f : fields()) {
        if (f.key == key) return f;
    }
    fail(ErrorKind::kConfig, "unknown config key '" + std::string(key) + "'");
}

void require_file(const std::string& path, std::string_view what) {
    if (!path.empty() && !fs::is_regular_file(path)) {
        fail(ErrorKind::kConfig, std::string(what) + " '" + path + "' does not exist");
    }
}

std::uint64_t derive(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::vector<LabeledQuery> read_segment(const std::string& path, std::size_t d) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::kIo, "cannot open '" + path + "'");
    return read_workload_jsonl(in, d).queries;
}

fs::path prepare_out(const ExperimentConfig& cfg) {
    const fs::path dir(cfg.out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) fail(ErrorKind::kIo, "cannot create output directory '" + cfg.out + "': " + ec.message());
    return dir;
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::kIo, "cannot write '" + p.string() + "'");
    return out;
}

void finish(std::ofstream& out, const fs::path& p) {
    out.flush();
    if (!out) fail(ErrorKind::kIo, "write to '" + p.string() + "' failed");
}

void write_json(const fs::path& p, const nlohmann::json& j) {
    auto out = open_out(p);
    out << j.dump(2) << '\n';
    finish(out, p);
}

double rel_error(double y_hat, double y) { return std::abs(y_hat - y) / std::max(std::abs(y), 1.0); }

double median(std::vector<double> v) {
    if (v.empty()) return std::nan("");
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
    std::nth_element(v.begin(), mid, v.end());
    if (v.size() % 2 == 1) return *mid;
    const double hi = *mid;
    const double lo = *std::max_element(v.begin(), mid);
    return 0.5 * (lo + hi);
}

nlohmann::json opt_json(const std::optional<std::size_t>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

}  // namespace

void ExperimentConfig::set(std::string_view key, std::string_view value) {
    field(key).set(*this, key, trim(value));
}

std::string ExperimentConfig::get(std::string_view key) const { return field(key).get(*this); }

const std::vector<std::string>& ExperimentConfig::keys() {
    static const std::vector<std::string> k = [] {
        std::vector<std::string> out;
        for (const auto& f : fields()) out.push_back(f.key);
        return out;
    }();
    return k;
}

void ExperimentConfig::validate() const {
    if (out.empty()) fail(ErrorKind::kConfig, "out must name a directory");
    if (uniform.columns < 1) fail(ErrorKind::kConfig, "data.columns must be >= 1");
    if (uniform.rows < 1 || scenario.data.rows < 1) fail(ErrorKind::kConfig, "data.rows must be >= 1");
    if (!(uniform.value_range.lo < uniform.value_range.hi)) fail(ErrorKind::kConfig, "data.lo must be below data.hi");
    if (!(scenario.data.value_scale > 0.0)) fail(ErrorKind::kConfig, "data.value_scale must be positive");
    if (!(scenario.data.noise_sd >= 0.0)) fail(ErrorKind::kConfig, "data.noise_sd must be >= 0");

    if (query.count < 1) fail(ErrorKind::kConfig, "workload.count must be >= 1");
    if (workload_kind == "synthetic" && data_kind == "uniform" && data_path.empty() &&
        (query.predicates < 1 || query.predicates > uniform.columns)) {
        fail(ErrorKind::kConfig, "workload.predicates must lie in [1, data.columns]");
    }
    if (!(query.selectivity > 0.0 && query.selectivity <= 1.0)) {
        fail(ErrorKind::kConfig, "workload.selectivity must lie in (0, 1]");
    }
    if (clustered.n_centers < 1) fail(ErrorKind::kConfig, "workload.centers must be >= 1");

    const EngineConfig& e = scenario.engine;
    e.validate();
    if (!(e.cdm.h_multiplier >= 3.0 && e.cdm.h_multiplier <= 5.0)) {
        fail(ErrorKind::kConfig, "cdm.h_multiplier must lie in [3, 5]");
    }
    if (!(e.adm.lambda >= 3.0 && e.adm.lambda <= 5.0)) fail(ErrorKind::kConfig, "adm.lambda must lie in [3, 5]");
    if (!(scenario.range_fraction > 0.0)) fail(ErrorKind::kConfig, "scenario.range_fraction must be positive");
    if (!(scenario.range_floor >= 0.0 && scenario.range_floor < 1.0)) {
        fail(ErrorKind::kConfig, "scenario.range_floor must lie in [0, 1)");
    }
    if (!(scenario.spread_fraction >= 0.0)) fail(ErrorKind::kConfig, "scenario.spread must be >= 0");
    if (per_space < 10) fail(ErrorKind::kConfig, "scenario.per_space must be >= 10");

    if (drift.at < 1 || drift.length < 1) fail(ErrorKind::kConfig, "drift.at and drift.length must be >= 1");
    if (drift.k_spaces < 1 || drift.space >= drift.k_spaces) {
        fail(ErrorKind::kConfig, "drift.space must index one of drift.k_spaces spaces");
    }

    FederationConfig fc = federation;
    fc.lambda = e.adm.lambda;
    fc.c = e.adm.c;
    fc.h_multiplier = e.cdm.h_multiplier;
    fc.validate();
    if (plan.rounds < 1) fail(ErrorKind::kConfig, "federation.rounds must be >= 1");
    if (!(plan.drift_probability >= 0.0 && plan.drift_probability <= 1.0)) {
        fail(ErrorKind::kConfig, "federation.drift_probability must lie in [0, 1]");
    }
    if (!(plan.drift_window_lo >= 0.0 && plan.drift_window_lo <= plan.drift_window_hi && plan.drift_window_hi <= 1.0)) {
        fail(ErrorKind::kConfig, "federation drift window must satisfy 0 <= lo <= hi <= 1");
    }
    if (rate_window < 1) fail(ErrorKind::kConfig, "federation.rate_window must be >= 1");
    if (conv.probe_window < 1 || conv.probe_trials < 1) {
        fail(ErrorKind::kConfig, "federation.probe_window and probe_trials must be >= 1");
    }

    require_file(data_path, "data.path");
    require_file(workload_path, "workload.path");
    require_file(drift.pre_path, "drift.pre_path");
    require_file(drift.post_path, "drift.post_path");
}

std::string ExperimentConfig::to_text() const {
    std::string out;
    for (const auto& f : fields()) out += f.key + " = " + f.get(*this) + "\n";
    return out;
}

nlohmann::json ExperimentConfig::to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& f : fields()) j[f.key] = f.get(*this);
    return j;
}

ExperimentConfig ExperimentConfig::parse(std::istream& in) {
    ExperimentConfig cfg;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const std::string t = trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) {
            fail(ErrorKind::kConfig, "config line " + std::to_string(lineno) + ": expected 'key = value'");
        }
        try {
            cfg.set(trim(std::string_view(t).substr(0, eq)), std::string_view(t).substr(eq + 1));
        } catch (const Error& e) {
            fail(ErrorKind::kConfig, "config line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::kConfig, "cannot open config file '" + path + "'");
    return parse(in);
}

DataTable experiment_table(const ExperimentConfig& cfg) {
    if (!cfg.data_path.empty()) return read_csv_file(cfg.data_path);
    if (cfg.data_kind == "uniform") return gen_uniform_table(cfg.uniform);
    return gen_spatial_table(cfg.scenario.data);
}

Workload experiment_workload(const ExperimentConfig& cfg, const DataTable& table) {
    if (cfg.workload_kind == "clustered") {
        ClusteredWorkloadConfig wc = cfg.clustered;
        wc.seed = cfg.seed;
        return gen_clustered_workload(table, wc, cfg.agg).workload;
    }
    if (cfg.workload_kind == "temporal") {
        TemporalWorkloadConfig wc = cfg.temporal;
        wc.seed = cfg.seed;
        return gen_temporal_workload(table, wc, cfg.agg);
    }
    QueryGenConfig qc = cfg.query;
    qc.seed = cfg.seed;
    return gen_query_workload(table, qc, cfg.agg);
}

SpatialScenario experiment_scenario(const ExperimentConfig& cfg) {
    if (!cfg.data_path.empty()) return SpatialScenario(cfg.scenario, read_csv_file(cfg.data_path));
    return SpatialScenario(cfg.scenario);
}

AnalystDevice experiment_device(const ExperimentConfig& cfg) {
    if (!cfg.workload_path.empty()) {
        const DataTable table = experiment_table(cfg);
        std::ifstream in(cfg.workload_path);
        if (!in) fail(ErrorKind::kIo, "cannot open '" + cfg.workload_path + "'");
        const Workload w = read_workload_jsonl(in, table.columns());
        EngineConfig e = cfg.scenario.engine;
        e.seed = cfg.seed;
        return AnalystDevice::bootstrap(w.queries, table.domain(), e);
    }
    const SpatialScenario scenario = experiment_scenario(cfg);
    return scenario.bootstrap(space_layout(cfg.drift.k_spaces).base, cfg.per_space, cfg.seed);
}

DriftReport run_drift_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const SpatialScenario scenario = experiment_scenario(cfg);
    const auto layout = space_layout(cfg.drift.k_spaces);
    const std::size_t d = scenario.table().columns();

    std::vector<LabeledQuery> pre, post;
    if (!cfg.drift.pre_path.empty()) {
        pre = read_segment(cfg.drift.pre_path, d);
    } else {
        const std::size_t per = (cfg.drift.at + layout.base.size() - 1) / layout.base.size();
        pre = scenario.sample_mix(layout.base, per, derive(cfg.seed, 1));
        pre.resize(std::min(pre.size(), cfg.drift.at));
    }
    if (!cfg.drift.post_path.empty()) {
        post = read_segment(cfg.drift.post_path, d);
    } else {
        post = scenario.sample(layout.spaces[cfg.drift.space], cfg.drift.length, derive(cfg.seed, 2));
    }
    if (pre.empty() || post.empty()) fail(ErrorKind::kConfig, "drift segments must be non-empty");
    const DriftStream stream = compose_drift({{"known", std::move(pre)}, {"novel", std::move(post)}});

    DriftReport r;
    r.t_drift_true = stream.drift_points.front();
    r.adaptive = scenario.bootstrap(layout.base, cfg.per_space, cfg.seed);
    r.ablation = r.adaptive;
    r.ablation.mutable_config().adapt = false;
    r.k_before = r.adaptive.codebook().size();

    const Oracle oracle = scenario.oracle();
    std::vector<double> e_pre, e_post, e_abl;
    for (std::size_t t = 0; t < stream.queries.size(); ++t) {
        const LabeledQuery& lq = stream.queries[t];
        const AnswerResult a = r.adaptive.answer(lq.query, oracle, lq.answer);
        const AnswerResult b = r.ablation.answer(lq.query, oracle, lq.answer);
        const QueryRecord& rec = r.adaptive.log().back();
        if (rec.drift && !r.t_detect) r.t_detect = t;
        if (rec.finalized && !r.t_finalize) {
            r.t_finalize = t;
            continue;
        }
        if (t < r.t_drift_true) {
            e_pre.push_back(rel_error(a.value, lq.answer));
        } else if (r.t_finalize) {
            e_post.push_back(rel_error(a.value, lq.answer));
            e_abl.push_back(rel_error(b.value, lq.answer));
        }
    }
    r.k_after = r.adaptive.codebook().size();
    r.oracle_calls = r.adaptive.oracle_calls();
    r.pre_error = median(e_pre);
    r.post_error = median(e_post);
    r.ablation_error = median(e_abl);
    r.post_count = e_post.size();
    r.stream = stream.queries;
    return r;
}

FederationReport run_federation_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const SpatialScenario scenario = experiment_scenario(cfg);
    const auto layout = space_layout(cfg.federation.k_spaces);

    FederationConfig fc = cfg.federation;
    fc.lambda = cfg.scenario.engine.adm.lambda;
    fc.c = cfg.scenario.engine.adm.c;
    fc.h_multiplier = cfg.scenario.engine.cdm.h_multiplier;
    fc.seed = cfg.seed;

    std::vector<AnalystDevice> devices;
    devices.reserve(fc.n);
    for (std::size_t i = 0; i < fc.n; ++i) {
        devices.push_back(scenario.bootstrap(layout.base, cfg.per_space, derive(cfg.seed, 100 + i)));
    }
    const auto scripts = make_drift_scripts(scenario, fc.n, layout.base, layout.spaces, cfg.plan, cfg.seed);
    CentralSystem cs(scenario.table(), scenario.aggregate());

    FederationReport rep;
    rep.result = run_federation(fc, devices, scripts, cs);

    const auto& rounds = rep.result.rounds;
    for (std::size_t b = 0; b < rounds.size(); b += cfg.rate_window) {
        const std::size_t e = std::min(rounds.size(), b + cfg.rate_window);
        std::size_t active = 0, buffering = 0;
        for (std::size_t r = b; r < e; ++r) {
            active += rounds[r].active;
            buffering += rounds[r].buffering;
        }
        RateWindow w;
        w.begin = b;
        w.end = e;
        w.beta_hat = active ? static_cast<double>(buffering) / static_cast<double>(active) : 0.0;
        w.execution_rate = measure_execution_rate(rep.result, b, e);
        w.bound = execution_rate_bound(fc.lambda, w.beta_hat, fc.n);
        rep.windows.push_back(w);
    }

    if (cfg.convergence) {
        ConvergenceConfig cc = cfg.conv;
        cc.k_spaces = cfg.federation.k_spaces;
        cc.train_per_space = cfg.per_space;
        cc.seed = cfg.seed;
        rep.convergence = measure_offline_convergence(scenario, cc);
    }
    return rep;
}

std::vector<std::string> cmd_gen_data(const ExperimentConfig& cfg) {
    cfg.validate();
    const DataTable table = experiment_table(cfg);
    const fs::path p = prepare_out(cfg) / "data.csv";
    auto out = open_out(p);
    write_csv(out, table);
    finish(out, p);
    return {p.string()};
}

std::vector<std::string> cmd_gen_workload(const ExperimentConfig& cfg) {
    cfg.validate();
    const DataTable table = experiment_table(cfg);
    const Workload w = experiment_workload(cfg, table);
    const fs::path p = prepare_out(cfg) / "workload.jsonl";
    auto out = open_out(p);
    write_workload_jsonl(out, w);
    finish(out, p);
    return {p.string()};
}

std::vector<std::string> cmd_bootstrap(const ExperimentConfig& cfg) {
    cfg.validate();
    const AnalystDevice dev = experiment_device(cfg);
    const fs::path dir = prepare_out(cfg);
    const fs::path dp = dir / "device.json";
    {
        auto out = open_out(dp);
        out << dump_device(dev) << '\n';
        finish(out, dp);
    }
    const CusumDetector& det = dev.detector();
    nlohmann::json clusters = nlohmann::json::array();
    for (std::size_t k = 0; k < dev.codebook().size(); ++k) {
        const ClusterStats& s = dev.codebook().stats(k);
        clusters.push_back({{"id", k},
                            {"members", s.member_count},
                            {"variance", s.variance},
                            {"min_dist", s.min_dist},
                            {"epe", s.epe},
                            {"model_bytes", model_size_bytes(dev.models()[k])}});
    }
    const fs::path sp = dir / "bootstrap.json";
    write_json(sp, {{"config", cfg.to_json()},
                    {"K", dev.codebook().size()},
                    {"model", to_string(dev.config().model.kind)},
                    {"detector",
                     {{"p0", {{"scale", det.p0().scale}, {"shape", det.p0().shape}}},
                      {"p1", {{"scale", det.p1().scale}, {"shape", det.p1().shape}}},
                      {"sigma_u", det.sigma_u()},
                      {"h", det.h()}}},
                    {"clusters", clusters}});
    return {dp.string(), sp.string()};
}

std::vector<std::string> cmd_run_drift(const ExperimentConfig& cfg) {
    const DriftReport r = run_drift_experiment(cfg);
    const fs::path dir = prepare_out(cfg);
    std::vector<std::string> written;

    const fs::path pa = dir / "metrics_adaptive.csv";
    {
        auto out = open_out(pa);
        r.adaptive.write_metrics_csv(out);
        finish(out, pa);
    }
    const fs::path pb = dir / "metrics_ablation.csv";
    {
        auto out = open_out(pb);
        r.ablation.write_metrics_csv(out);
        finish(out, pb);
    }
    const fs::path pe = dir / "errors.csv";
    {
        auto out = open_out(pe);
        out << "t,segment,y_true,y_adaptive,y_ablation,rel_err_adaptive,rel_err_ablation\n";
        char buf[160];
        for (std::size_t t = 0; t < r.stream.size(); ++t) {
            const double y = r.stream[t].answer;
            const double ya = r.adaptive.log()[t].y_hat;
            const double yb = r.ablation.log()[t].y_hat;
            std::snprintf(buf, sizeof(buf), ",%.17g,%.17g,%.17g,%.17g,%.17g\n", y, ya, yb, rel_error(ya, y),
                          rel_error(yb, y));
            out << t << ',' << (t < r.t_drift_true ? "known" : "novel") << buf;
        }
        finish(out, pe);
    }
    const fs::path ps = dir / "summary.json";
    const auto ratio = [&](double v) { return r.pre_error > 0.0 ? nlohmann::json(v / r.pre_error) : nlohmann::json(nullptr); };
    const auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
    write_json(ps, {{"config", cfg.to_json()},
                    {"t_drift_true", r.t_drift_true},
                    {"t_D", opt_json(r.t_detect)},
                    {"detection_delay", r.t_detect && *r.t_detect >= r.t_drift_true
                                            ? nlohmann::json(*r.t_detect - r.t_drift_true)
                                            : nlohmann::json(nullptr)},
                    {"t_finalize", opt_json(r.t_finalize)},
                    {"K_before", r.k_before},
                    {"K_after", r.k_after},
                    {"oracle_calls", r.oracle_calls},
                    {"queries", r.stream.size()},
                    {"post_finalize_queries", r.post_count},
                    {"median_rel_error",
                     {{"pre_drift", num(r.pre_error)},
                      {"post_finalize_adaptive", num(r.post_error)},
                      {"post_finalize_ablation", num(r.ablation_error)}}},
                    {"error_ratio",
                     {{"adaptive", r.post_count ? ratio(r.post_error) : nullptr},
                      {"ablation", r.post_count ? ratio(r.ablation_error) : nullptr}}}});
    written = {pa.string(), pb.string(), pe.string(), ps.string()};
    return written;
}

std::vector<std::string> cmd_run_federation(const ExperimentConfig& cfg) {
    const FederationReport rep = run_federation_experiment(cfg);
    const fs::path dir = prepare_out(cfg);
    std::vector<std::string> written;

    const fs::path pr = dir / "round_stats.csv";
    {
        auto out = open_out(pr);
        write_round_stats_csv(out, rep.result);
        finish(out, pr);
    }
    written.push_back(pr.string());

    const fs::path pw = dir / "rate_vs_bound.csv";
    {
        auto out = open_out(pw);
        out << "round_begin,round_end,beta_hat,execution_rate,bound,within_bound\n";
        char buf[128];
        const auto row = [&](std::size_t b, std::size_t e, double beta, double rate, double bound) {
            std::snprintf(buf, sizeof(buf), "%zu,%zu,%.17g,%.17g,%.17g,%d\n", b, e, beta, rate, bound,
                          rate <= bound ? 1 : 0);
            out << buf;
        };
        for (const auto& w : rep.windows) row(w.begin, w.end, w.beta_hat, w.execution_rate, w.bound);
        row(0, rep.result.rounds.size(), rep.result.beta_hat, rep.result.execution_rate, rep.result.bound);
        finish(out, pw);
    }
    written.push_back(pw.string());

    if (rep.convergence) {
        const fs::path pc = dir / "convergence.csv";
        auto out = open_out(pc);
        write_convergence_csv(out, *rep.convergence);
        finish(out, pc);
        written.push_back(pc.string());
    }

    FederationConfig fc = cfg.federation;
    fc.lambda = cfg.scenario.engine.adm.lambda;
    fc.c = cfg.scenario.engine.adm.c;
    fc.h_multiplier = cfg.scenario.engine.cdm.h_multiplier;
    fc.seed = cfg.seed;
    nlohmann::json summary = federation_summary_json(fc, rep.result);
    summary["config"] = cfg.to_json();
    nlohmann::json windows = nlohmann::json::array();
    for (const auto& w : rep.windows) {
        windows.push_back({{"round_begin", w.begin},
                           {"round_end", w.end},
                           {"beta_hat", w.beta_hat},
                           {"execution_rate", w.execution_rate},
                           {"bound", w.bound}});
    }
    summary["rate_windows"] = windows;
    if (rep.convergence) summary["beta_curve"] = rep.convergence->beta_hat;
    const fs::path ps = dir / "summary.json";
    write_json(ps, summary);
    written.push_back(ps.string());
    return written;
}

}  // namespace qdaqp
