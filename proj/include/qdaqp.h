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

/*
 * C interface to the adaptive query-driven engine.
 *
 * Every object is an opaque handle created by a *_new / *_create / *_load
 * call and released by the matching *_free. Functions return a status code;
 * on failure the message of the most recent error on the calling thread is
 * available from qdaqp_last_error(). Output parameters are written only on
 * success.
 */
#ifndef QDAQP_H
#define QDAQP_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define QDAQP_API __declspec(dllexport)
#else
#define QDAQP_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

#define QDAQP_VERSION_MAJOR 1
#define QDAQP_VERSION_MINOR 0

typedef enum qdaqp_status {
    QDAQP_OK = 0,
    QDAQP_ERR_DIMENSION = 1,
    QDAQP_ERR_EMPTY_SELECTION = 2,
    QDAQP_ERR_STATE = 3,
    QDAQP_ERR_NUMERICAL = 4,
    QDAQP_ERR_DEGENERATE = 5,
    QDAQP_ERR_CONFIG = 6,
    QDAQP_ERR_GENERATION = 7,
    QDAQP_ERR_IO = 8,
    QDAQP_ERR_INVALID_ARGUMENT = 9, /* null handle or out pointer */
    QDAQP_ERR_INTERNAL = 10
} qdaqp_status;

typedef enum qdaqp_aggregate {
    QDAQP_COUNT = 0,
    QDAQP_SUM = 1,
    QDAQP_AVG = 2,
    QDAQP_MIN = 3,
    QDAQP_MAX = 4
} qdaqp_aggregate;

typedef enum qdaqp_mode { QDAQP_MODE_PREDICTION = 0, QDAQP_MODE_BUFFERING = 1 } qdaqp_mode;

typedef struct qdaqp_table qdaqp_table;
typedef struct qdaqp_query qdaqp_query;
typedef struct qdaqp_config qdaqp_config;
typedef struct qdaqp_device qdaqp_device;

/* Exact execution callback: write the answer of `query` to *out and return
 * QDAQP_OK, or return any other status to signal failure. */
typedef qdaqp_status (*qdaqp_oracle_fn)(void* user, const qdaqp_query* query, double* out);

QDAQP_API const char* qdaqp_version(void);
QDAQP_API const char* qdaqp_status_name(qdaqp_status status);
/* Message of the last failure on this thread; "" if none. */
QDAQP_API const char* qdaqp_last_error(void);

/* ---- tables ---- */
QDAQP_API qdaqp_status qdaqp_table_uniform(size_t columns, size_t rows, double lo, double hi, uint64_t seed,
                                           qdaqp_table** out);
/* Columns x, y, value: a smooth value field over the plane plus noise. */
QDAQP_API qdaqp_status qdaqp_table_spatial(size_t rows, double value_scale, double noise_sd, uint64_t seed,
                                           qdaqp_table** out);
QDAQP_API qdaqp_status qdaqp_table_read_csv(const char* path, qdaqp_table** out);
QDAQP_API qdaqp_status qdaqp_table_write_csv(const qdaqp_table* table, const char* path);
QDAQP_API qdaqp_status qdaqp_table_shape(const qdaqp_table* table, size_t* rows, size_t* columns);
QDAQP_API qdaqp_status qdaqp_table_domain(const qdaqp_table* table, size_t column, double* lo, double* hi);
QDAQP_API void qdaqp_table_free(qdaqp_table* table);

/* ---- range queries ---- */
QDAQP_API qdaqp_status qdaqp_query_new(qdaqp_query** out);
/* Adds or replaces the inclusive predicate lo <= a_column <= hi. */
QDAQP_API qdaqp_status qdaqp_query_set_range(qdaqp_query* query, size_t column, double lo, double hi);
QDAQP_API qdaqp_status qdaqp_query_predicate_count(const qdaqp_query* query, size_t* count);
/* The i-th predicate in increasing column order. */
QDAQP_API qdaqp_status qdaqp_query_predicate(const qdaqp_query* query, size_t i, size_t* column, double* lo,
                                             double* hi);
QDAQP_API void qdaqp_query_free(qdaqp_query* query);

QDAQP_API qdaqp_status qdaqp_execute(const qdaqp_table* table, const qdaqp_query* query, qdaqp_aggregate fn,
                                     size_t target, double* out);

/* ---- experiment configuration (flat key = value document) ---- */
QDAQP_API qdaqp_status qdaqp_config_new(qdaqp_config** out);
QDAQP_API qdaqp_status qdaqp_config_load(const char* path, qdaqp_config** out);
QDAQP_API qdaqp_status qdaqp_config_set(qdaqp_config* config, const char* key, const char* value);
/* Copies the value (NUL terminated) into buf when it fits; *needed receives
 * the required size including the terminator. */
QDAQP_API qdaqp_status qdaqp_config_get(const qdaqp_config* config, const char* key, char* buf, size_t len,
                                        size_t* needed);
QDAQP_API qdaqp_status qdaqp_config_validate(const qdaqp_config* config);
/* Enumerates the recognised keys; returns NULL past the end. */
QDAQP_API size_t qdaqp_config_key_count(void);
QDAQP_API const char* qdaqp_config_key(size_t i);
QDAQP_API void qdaqp_config_free(qdaqp_config* config);

/* ---- analyst devices ---- */
/* Trains a device per the configuration (workload.path or the scenario's
 * known query spaces). */
QDAQP_API qdaqp_status qdaqp_device_bootstrap(const qdaqp_config* config, qdaqp_device** out);
QDAQP_API qdaqp_status qdaqp_device_load(const char* path, qdaqp_device** out);
QDAQP_API qdaqp_status qdaqp_device_save(const qdaqp_device* device, const char* path);
QDAQP_API qdaqp_status qdaqp_device_predict(const qdaqp_device* device, const qdaqp_query* query, double* out);
/* Answers through the PREDICTION/BUFFERING state machine. *executed is set
 * to 1 when the value came from the oracle. */
QDAQP_API qdaqp_status qdaqp_device_answer(qdaqp_device* device, const qdaqp_query* query, qdaqp_oracle_fn oracle,
                                           void* user, double* value, int* executed);
QDAQP_API qdaqp_status qdaqp_device_mode(const qdaqp_device* device, qdaqp_mode* mode);
QDAQP_API qdaqp_status qdaqp_device_codebook_size(const qdaqp_device* device, size_t* k);
QDAQP_API qdaqp_status qdaqp_device_oracle_calls(const qdaqp_device* device, size_t* calls);
QDAQP_API qdaqp_status qdaqp_device_write_metrics(const qdaqp_device* device, const char* path);
QDAQP_API void qdaqp_device_free(qdaqp_device* device);

/* ---- commands: write their file set into the configured output directory ---- */
QDAQP_API qdaqp_status qdaqp_cmd_gen_data(const qdaqp_config* config);
QDAQP_API qdaqp_status qdaqp_cmd_gen_workload(const qdaqp_config* config);
QDAQP_API qdaqp_status qdaqp_cmd_bootstrap(const qdaqp_config* config);
QDAQP_API qdaqp_status qdaqp_cmd_run_drift(const qdaqp_config* config);
QDAQP_API qdaqp_status qdaqp_cmd_run_federation(const qdaqp_config* config);

#ifdef __cplusplus
}
#endif

#endif /* QDAQP_H */
