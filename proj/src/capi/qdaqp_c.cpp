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

#include "qdaqp.h"

#include <cstring>
#include <fstream>
#include <iterator>
#include <new>
#include <string>

#include "qdaqp/experiments.hpp"
#include "qdaqp/serialization.hpp"

struct qdaqp_table {
    qdaqp::DataTable table;
};

struct qdaqp_query {
    qdaqp::RangeQuery query;
};

struct qdaqp_config {
    qdaqp::ExperimentConfig config;
};

struct qdaqp_device {
    qdaqp::AnalystDevice device;
};

namespace {

thread_local std::string g_last_error;

qdaqp_status to_status(qdaqp::ErrorKind kind) {
    using qdaqp::ErrorKind;
    switch (kind) {
        case ErrorKind::kDimension: return QDAQP_ERR_DIMENSION;
        case ErrorKind::kEmptySelection: return QDAQP_ERR_EMPTY_SELECTION;
        case ErrorKind::kState: return QDAQP_ERR_STATE;
        case ErrorKind::kNumerical: return QDAQP_ERR_NUMERICAL;
        case ErrorKind::kDegenerate: return QDAQP_ERR_DEGENERATE;
        case ErrorKind::kConfig: return QDAQP_ERR_CONFIG;
        case ErrorKind::kGeneration: return QDAQP_ERR_GENERATION;
        case ErrorKind::kIo: return QDAQP_ERR_IO;
    }
    return QDAQP_ERR_INTERNAL;
}

qdaqp_status invalid(const char* what) {
    g_last_error = what;
    return QDAQP_ERR_INVALID_ARGUMENT;
}

/// Runs `f`, translating exceptions into status codes.
template <class F>
qdaqp_status guarded(F&& f) {
    try {
        g_last_error.clear();
        f();
        return QDAQP_OK;
    } catch (const qdaqp::Error& e) {
        g_last_error = e.what();
        return to_status(e.kind());
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
        return QDAQP_ERR_INTERNAL;
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return QDAQP_ERR_INTERNAL;
    } catch (...) {
        g_last_error = "unknown error";
        return QDAQP_ERR_INTERNAL;
    }
}

qdaqp::AggregateFunction to_fn(qdaqp_aggregate fn) {
    switch (fn) {
        case QDAQP_COUNT: return qdaqp::AggregateFunction::kCount;
        case QDAQP_SUM: return qdaqp::AggregateFunction::kSum;
        case QDAQP_AVG: return qdaqp::AggregateFunction::kAvg;
        case QDAQP_MIN: return qdaqp::AggregateFunction::kMin;
        case QDAQP_MAX: return qdaqp::AggregateFunction::kMax;
    }
    qdaqp::fail(qdaqp::ErrorKind::kConfig, "unknown aggregate function");
}

/// Status raised by a C oracle callback, carried through the engine.
struct OracleFailure : std::exception {
    qdaqp_status status;
    explicit OracleFailure(qdaqp_status s) : status(s) {}
    const char* what() const noexcept override { return "oracle callback failed"; }
};

}  // namespace

extern "C" {

const char* qdaqp_version(void) { return "1.0.0"; }

const char* qdaqp_status_name(qdaqp_status status) {
    switch (status) {
        case QDAQP_OK: return "ok";
        case QDAQP_ERR_DIMENSION: return "dimension";
        case QDAQP_ERR_EMPTY_SELECTION: return "empty_selection";
        case QDAQP_ERR_STATE: return "state";
        case QDAQP_ERR_NUMERICAL: return "numerical";
        case QDAQP_ERR_DEGENERATE: return "degenerate";
        case QDAQP_ERR_CONFIG: return "config";
        case QDAQP_ERR_GENERATION: return "generation";
        case QDAQP_ERR_IO: return "io";
        case QDAQP_ERR_INVALID_ARGUMENT: return "invalid_argument";
        case QDAQP_ERR_INTERNAL: return "internal";
    }
    return "unknown";
}

const char* qdaqp_last_error(void) { return g_last_error.c_str(); }

// ---- tables ----

qdaqp_status qdaqp_table_uniform(size_t columns, size_t rows, double lo, double hi, uint64_t seed, qdaqp_table** out) {
    if (!out) return invalid("out is null");
    return guarded([&] {
        qdaqp::SyntheticDataConfig c;
        c.columns = columns;
        c.rows = rows;
        c.value_range = {lo, hi};
        c.seed = seed;
        *out = new qdaqp_table{qdaqp::gen_uniform_table(c)};
    });
}

qdaqp_status qdaqp_table_spatial(size_t rows, double value_scale, double noise_sd, uint64_t seed, qdaqp_table** out) {
    if (!out) return invalid("out is null");
    return guarded([&] {
        qdaqp::SpatialDataConfig c = qdaqp::ScenarioConfig{}.data;
        c.rows = rows;
        c.value_scale = value_scale;
        c.noise_sd = noise_sd;
        c.seed = seed;
        *out = new qdaqp_table{qdaqp::gen_spatial_table(c)};
    });
}

qdaqp_status qdaqp_table_read_csv(const char* path, qdaqp_table** out) {
    if (!path || !out) return invalid("path or out is null");
    return guarded([&] { *out = new qdaqp_table{qdaqp::read_csv_file(path)}; });
}

qdaqp_status qdaqp_table_write_csv(const qdaqp_table* table, const char* path) {
    if (!table || !path) return invalid("table or path is null");
    return guarded([&] {
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        if (!f) qdaqp::fail(qdaqp::ErrorKind::kIo, std::string("cannot write '") + path + "'");
        qdaqp::write_csv(f, table->table);
        f.flush();
        if (!f) qdaqp::fail(qdaqp::ErrorKind::kIo, std::string("write to '") + path + "' failed");
    });
}

qdaqp_status qdaqp_table_shape(const qdaqp_table* table, size_t* rows, size_t* columns) {
    if (!table || !rows || !columns) return invalid("null argument");
    *rows = table->table.rows();
    *columns = table->table.columns();
    return QDAQP_OK;
}

qdaqp_status qdaqp_table_domain(const qdaqp_table* table, size_t column, double* lo, double* hi) {
    if (!table || !lo || !hi) return invalid("null argument");
    if (column >= table->table.columns()) {
        g_last_error = "column index out of range";
        return QDAQP_ERR_DIMENSION;
    }
    *lo = table->table.domain()[column].lo;
    *hi = table->table.domain()[column].hi;
    return QDAQP_OK;
}

void qdaqp_table_free(qdaqp_table* table) { delete table; }

// ---- queries ----

qdaqp_status qdaqp_query_new(qdaqp_query** out) {
    if (!out) return invalid("out is null");
    return guarded([&] { *out = new qdaqp_query{}; });
}

qdaqp_status qdaqp_query_set_range(qdaqp_query* query, size_t column, double lo, double hi) {
    if (!query) return invalid("query is null");
    if (!(lo <= hi)) {
        g_last_error = "predicate interval is inverted";
        return QDAQP_ERR_DIMENSION;
    }
    return guarded([&] { query->query.predicates[column] = {lo, hi}; });
}

qdaqp_status qdaqp_query_predicate_count(const qdaqp_query* query, size_t* count) {
    if (!query || !count) return invalid("null argument");
    *count = query->query.predicates.size();
    return QDAQP_OK;
}

qdaqp_status qdaqp_query_predicate(const qdaqp_query* query, size_t i, size_t* column, double* lo, double* hi) {
    if (!query || !column || !lo || !hi) return invalid("null argument");
    if (i >= query->query.predicates.size()) {
        g_last_error = "predicate index out of range";
        return QDAQP_ERR_DIMENSION;
    }
    auto it = query->query.predicates.begin();
    std::advance(it, static_cast<std::ptrdiff_t>(i));
    *column = it->first;
    *lo = it->second.lo;
    *hi = it->second.hi;
    return QDAQP_OK;
}

void qdaqp_query_free(qdaqp_query* query) { delete query; }

qdaqp_status qdaqp_execute(const qdaqp_table* table, const qdaqp_query* query, qdaqp_aggregate fn, size_t target,
                           double* out) {
    if (!table || !query || !out) return invalid("null argument");
    return guarded([&] { *out = qdaqp::execute_exact(table->table, query->query, {to_fn(fn), target}); });
}

// ---- config ----

qdaqp_status qdaqp_config_new(qdaqp_config** out) {
    if (!out) return invalid("out is null");
    return guarded([&] { *out = new qdaqp_config{}; });
}

qdaqp_status qdaqp_config_load(const char* path, qdaqp_config** out) {
    if (!path || !out) return invalid("path or out is null");
    return guarded([&] { *out = new qdaqp_config{qdaqp::ExperimentConfig::load(path)}; });
}

qdaqp_status qdaqp_config_set(qdaqp_config* config, const char* key, const char* value) {
    if (!config || !key || !value) return invalid("null argument");
    return guarded([&] { config->config.set(key, value); });
}

qdaqp_status qdaqp_config_get(const qdaqp_config* config, const char* key, char* buf, size_t len, size_t* needed) {
    if (!config || !key) return invalid("null argument");
    return guarded([&] {
        const std::string v = config->config.get(key);
        if (needed) *needed = v.size() + 1;
        if (buf && len >= v.size() + 1) std::memcpy(buf, v.c_str(), v.size() + 1);
    });
}

qdaqp_status qdaqp_config_validate(const qdaqp_config* config) {
    if (!config) return invalid("config is null");
    return guarded([&] { config->config.validate(); });
}

size_t qdaqp_config_key_count(void) { return qdaqp::ExperimentConfig::keys().size(); }

const char* qdaqp_config_key(size_t i) {
    const auto& keys = qdaqp::ExperimentConfig::keys();
    return i < keys.size() ? keys[i].c_str() : nullptr;
}

void qdaqp_config_free(qdaqp_config* config) { delete config; }

// ---- devices ----

qdaqp_status qdaqp_device_bootstrap(const qdaqp_config* config, qdaqp_device** out) {
    if (!config || !out) return invalid("null argument");
    return guarded([&] {
        config->config.validate();
        *out = new qdaqp_device{qdaqp::experiment_device(config->config)};
    });
}

qdaqp_status qdaqp_device_load(const char* path, qdaqp_device** out) {
    if (!path || !out) return invalid("path or out is null");
    return guarded([&] {
        std::ifstream f(path, std::ios::binary);
        if (!f) qdaqp::fail(qdaqp::ErrorKind::kIo, std::string("cannot open '") + path + "'");
        const std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
        *out = new qdaqp_device{qdaqp::load_device(text)};
    });
}

qdaqp_status qdaqp_device_save(const qdaqp_device* device, const char* path) {
    if (!device || !path) return invalid("device or path is null");
    return guarded([&] {
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        if (!f) qdaqp::fail(qdaqp::ErrorKind::kIo, std::string("cannot write '") + path + "'");
        f << qdaqp::dump_device(device->device) << '\n';
        f.flush();
        if (!f) qdaqp::fail(qdaqp::ErrorKind::kIo, std::string("write to '") + path + "' failed");
    });
}

qdaqp_status qdaqp_device_predict(const qdaqp_device* device, const qdaqp_query* query, double* out) {
    if (!device || !query || !out) return invalid("null argument");
    return guarded([&] { *out = device->device.predict(query->query); });
}

qdaqp_status qdaqp_device_answer(qdaqp_device* device, const qdaqp_query* query, qdaqp_oracle_fn oracle, void* user,
                                 double* value, int* executed) {
    if (!device || !query || !oracle || !value) return invalid("null argument");
    try {
        g_last_error.clear();
        const qdaqp::Oracle fn = [oracle, user](const qdaqp::RangeQuery& q) {
            qdaqp_query wrapped{q};
            double y = 0.0;
            const qdaqp_status s = oracle(user, &wrapped, &y);
            if (s != QDAQP_OK) throw OracleFailure(s);
            return y;
        };
        const qdaqp::AnswerResult r = device->device.answer(query->query, fn);
        *value = r.value;
        if (executed) *executed = r.provenance == qdaqp::Provenance::kExecuted ? 1 : 0;
        return QDAQP_OK;
    } catch (const OracleFailure& e) {
        g_last_error = "oracle callback failed with status " + std::string(qdaqp_status_name(e.status)) +
                       "; the query was queued for retry";
        return e.status;
    } catch (const qdaqp::Error& e) {
        g_last_error = e.what();
        return to_status(e.kind());
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return QDAQP_ERR_INTERNAL;
    }
}

qdaqp_status qdaqp_device_mode(const qdaqp_device* device, qdaqp_mode* mode) {
    if (!device || !mode) return invalid("null argument");
    *mode = device->device.mode() == qdaqp::EngineMode::kPrediction ? QDAQP_MODE_PREDICTION : QDAQP_MODE_BUFFERING;
    return QDAQP_OK;
}

qdaqp_status qdaqp_device_codebook_size(const qdaqp_device* device, size_t* k) {
    if (!device || !k) return invalid("null argument");
    *k = device->device.codebook().size();
    return QDAQP_OK;
}

qdaqp_status qdaqp_device_oracle_calls(const qdaqp_device* device, size_t* calls) {
    if (!device || !calls) return invalid("null argument");
    *calls = device->device.oracle_calls();
    return QDAQP_OK;
}

qdaqp_status qdaqp_device_write_metrics(const qdaqp_device* device, const char* path) {
    if (!device || !path) return invalid("device or path is null");
    return guarded([&] {
        std::ofstream f(path, std::ios::binary | std::ios::trunc);
        if (!f) qdaqp::fail(qdaqp::ErrorKind::kIo, std::string("cannot write '") + path + "'");
        device->device.write_metrics_csv(f);
        f.flush();
        if (!f) qdaqp::fail(qdaqp::ErrorKind::kIo, std::string("write to '") + path + "' failed");
    });
}

void qdaqp_device_free(qdaqp_device* device) { delete device; }

// ---- commands ----

qdaqp_status qdaqp_cmd_gen_data(const qdaqp_config* config) {
    if (!config) return invalid("config is null");
    return guarded([&] { qdaqp::cmd_gen_data(config->config); });
}

qdaqp_status qdaqp_cmd_gen_workload(const qdaqp_config* config) {
    if (!config) return invalid("config is null");
    return guarded([&] { qdaqp::cmd_gen_workload(config->config); });
}

qdaqp_status qdaqp_cmd_bootstrap(const qdaqp_config* config) {
    if (!config) return invalid("config is null");
    return guarded([&] { qdaqp::cmd_bootstrap(config->config); });
}

qdaqp_status qdaqp_cmd_run_drift(const qdaqp_config* config) {
    if (!config) return invalid("config is null");
    return guarded([&] { qdaqp::cmd_run_drift(config->config); });
}

qdaqp_status qdaqp_cmd_run_federation(const qdaqp_config* config) {
    if (!config) return invalid("config is null");
    return guarded([&] { qdaqp::cmd_run_federation(config->config); });
}

}  // extern "C"
