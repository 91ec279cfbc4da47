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

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "qdaqp/simulator.hpp"

namespace qdaqp {

struct DriftExperimentConfig {
    std::size_t at = 66;       // queries from the known spaces before the switch
    std::size_t length = 600;  // queries from the novel space after it
    std::size_t space = 15;    // index of the novel space in the layout
    std::size_t k_spaces = 16;
    std::string pre_path;   // optional JSONL segment replacing the generated one
    std::string post_path;
};

/// One flat document of every tunable used by the commands. Keys are
/// dotted names (see ExperimentConfig::keys()).
struct ExperimentConfig {
    std::string out = "out";
    std::uint64_t seed = 0;

    std::string data_kind = "spatial";  // spatial | uniform
    std::string data_path;              // optional CSV replacing the generated table
    SyntheticDataConfig uniform;
    ScenarioConfig scenario;

    std::string workload_kind = "synthetic";  // synthetic | clustered | temporal
    std::string workload_path;                // optional JSONL training set for bootstrap
    QueryGenConfig query;
    ClusteredWorkloadConfig clustered;
    TemporalWorkloadConfig temporal;
    AggregateSpec agg{AggregateFunction::kCount, 0};
    std::size_t per_space = 300;

    DriftExperimentConfig drift;

    FederationConfig federation;
    ScriptPlan plan;
    std::size_t rate_window = 500;
    bool convergence = true;
    ConvergenceConfig conv;

    /// Throws kConfig on an unknown key or unparsable value.
    void set(std::string_view key, std::string_view value);
    std::string get(std::string_view key) const;
    static const std::vector<std::string>& keys();

    /// Checks every module precondition and that input paths exist.
    void validate() const;

    /// "key = value" lines in key order; parse(to_text()) reproduces the config.
    std::string to_text() const;
    nlohmann::json to_json() const;

    /// Lines of "key = value"; '#' starts a comment.
    static ExperimentConfig parse(std::istream& in);
    static ExperimentConfig load(const std::string& path);
};

/// Table from data.path, or generated per data.kind.
DataTable experiment_table(const ExperimentConfig& cfg);

/// Workload per workload.kind over `table`.
Workload experiment_workload(const ExperimentConfig& cfg, const DataTable& table);

SpatialScenario experiment_scenario(const ExperimentConfig& cfg);

/// Device trained from workload.path when set, otherwise from the scenario's
/// base spaces.
AnalystDevice experiment_device(const ExperimentConfig& cfg);

struct DriftReport {
    std::size_t t_drift_true = 0;
    std::optional<std::size_t> t_detect;
    std::optional<std::size_t> t_finalize;
    std::size_t k_before = 0;
    std::size_t k_after = 0;
    std::size_t oracle_calls = 0;
    double pre_error = 0.0;       // median relative error before the switch
    double post_error = 0.0;      // adaptive device, novel queries after finalize
    double ablation_error = 0.0;  // device without adaptation, same queries
    std::size_t post_count = 0;
    AnalystDevice adaptive;
    AnalystDevice ablation;
    std::vector<LabeledQuery> stream;
};

/// Runs one adaptive and one no-adaptation device over the same stream.
DriftReport run_drift_experiment(const ExperimentConfig& cfg);

struct RateWindow {
    std::size_t begin = 0;
    std::size_t end = 0;
    double beta_hat = 0.0;
    double execution_rate = 0.0;
    double bound = 0.0;
};

struct FederationReport {
    FederationResult result;
    std::vector<RateWindow> windows;
    std::optional<ConvergenceResult> convergence;
};

FederationReport run_federation_experiment(const ExperimentConfig& cfg);

// Commands. Each writes its documented file set under cfg.out and returns
// the written paths.
std::vector<std::string> cmd_gen_data(const ExperimentConfig& cfg);
std::vector<std::string> cmd_gen_workload(const ExperimentConfig& cfg);
std::vector<std::string> cmd_bootstrap(const ExperimentConfig& cfg);
std::vector<std::string> cmd_run_drift(const ExperimentConfig& cfg);
std::vector<std::string> cmd_run_federation(const ExperimentConfig& cfg);

}  // namespace qdaqp
