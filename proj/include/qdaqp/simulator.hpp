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
#include <span>
#include <vector>

#include <json.hpp>

#include "qdaqp/engine.hpp"

namespace qdaqp {

// ---------------------------------------------------------------------------
// Query-space scenario shared by the drift, federation and convergence runs.

struct ScenarioConfig {
    /// Flat value field: per-cluster prediction error stays homogeneous.
    SpatialDataConfig data{.rows = 20000, .value_scale = 1e4, .noise_sd = 100.0, .wave_amplitude = 0.0};
    /// Query half-widths are drawn from U[0, range_fraction * column sd].
    double range_fraction = 0.2;
    double range_floor = 0.5;
    double spread_fraction = 0.02;
    EngineConfig engine = default_engine();

    static EngineConfig default_engine() {
        EngineConfig e;
        e.quantizer.vigilance = 1.0;
        return e;
    }
};

/// A spatial table plus AVG(value) queries drawn around fixed query-space
/// centers on the (x, y) plane.
class SpatialScenario {
public:
    explicit SpatialScenario(ScenarioConfig cfg);
    /// Uses `table` (columns x, y, value) instead of generating one.
    SpatialScenario(ScenarioConfig cfg, DataTable table);

    const DataTable& table() const noexcept { return table_; }
    const AggregateSpec& aggregate() const noexcept { return agg_; }
    const ScenarioConfig& config() const noexcept { return cfg_; }

    /// `n` labeled queries around `center`.
    std::vector<LabeledQuery> sample(Point2 center, std::size_t n, std::uint64_t seed) const;
    /// `per_space` queries from each center, interleaved.
    std::vector<LabeledQuery> sample_mix(std::span<const Point2> centers, std::size_t per_space,
                                         std::uint64_t seed) const;

    AnalystDevice bootstrap(std::span<const Point2> known, std::size_t per_space, std::uint64_t seed) const;

    /// Exact execution callback over the scenario table.
    Oracle oracle() const;

private:
    ScenarioConfig cfg_;
    DataTable table_;
    AggregateSpec agg_;
};

/// `count` well separated centers on a regular grid inside the plane.
std::vector<Point2> space_grid(std::size_t count, double lo = 2e5, double hi = 8e5);

/// Three neighbouring base spaces near the origin corner plus `k_spaces` grid
/// spaces spread over the rest of the plane.
struct SpaceLayout {
    std::vector<Point2> base;
    std::vector<Point2> spaces;
};

SpaceLayout space_layout(std::size_t k_spaces);

// ---------------------------------------------------------------------------
// Central system and federation.

/// Exact executor shared by all devices; logs every execution.
class CentralSystem {
public:
    struct Execution {
        std::size_t round = 0;
        std::size_t device = 0;
        RangeQuery query;
        double answer = 0.0;
    };

    CentralSystem(const DataTable& table, AggregateSpec agg);

    /// Pure exact execution; safe to call concurrently.
    double execute(const RangeQuery& q) const;
    std::size_t log_execution(std::size_t round, std::size_t device, const RangeQuery& q, double y);

    std::size_t calls() const noexcept { return log_.size(); }
    const std::vector<Execution>& executions() const noexcept { return log_; }

private:
    const DataTable* table_;
    AggregateSpec agg_;
    std::vector<Execution> log_;
};

struct FederationConfig {
    std::size_t n = 4;
    std::size_t k_spaces = 16;
    double lambda = 3.0;
    double h_multiplier = 3.0;
    double c = 0.008;
    std::uint64_t seed = 0;
    /// Parallel workers; 1 runs the single-threaded loop.
    std::size_t workers = 1;

    void validate() const;
};

/// Query stream of one device with the indices where a new pattern begins.
struct DeviceScript {
    std::vector<LabeledQuery> queries;
    std::vector<std::size_t> drift_points;
};

struct RoundStats {
    std::size_t round = 0;
    std::size_t active = 0;     // devices that answered a query this round
    std::size_t buffering = 0;  // of those, answered in BUFFERING mode
    std::size_t oracle_calls = 0;
    std::size_t affiliate_offers = 0;
    std::size_t affiliate_accepted = 0;
    std::size_t total_k = 0;
    double beta_hat = 0.0;        // cumulative buffering fraction
    double execution_rate = 0.0;  // cumulative oracle calls per query
};

struct DeviceSummary {
    std::size_t final_k = 0;
    std::vector<std::size_t> detections;
    std::vector<std::optional<std::size_t>> detection_delays;  // per drift point
    std::vector<SessionSummary> sessions;
    std::vector<std::size_t> k_sequence;  // K_m over mode cycles
    std::vector<double> k_ratios;         // K_{m+1} / K_m
    std::size_t oracle_calls = 0;
    std::size_t affiliate_pairs = 0;
};

struct FederationResult {
    std::vector<RoundStats> rounds;
    std::vector<DeviceSummary> devices;
    std::size_t device_steps = 0;
    std::size_t buffering_steps = 0;
    std::size_t oracle_calls = 0;
    std::size_t affiliate_offers = 0;
    std::size_t affiliate_accepted = 0;
    double beta_hat = 0.0;
    double execution_rate = 0.0;
    double bound = 0.0;
};

/// Steps the devices in lockstep rounds (one query each per round). After
/// each round the pairs executed for device j are offered, in device order,
/// to every other device that is still buffering.
FederationResult run_federation(const FederationConfig& cfg, std::vector<AnalystDevice>& devices,
                                std::span<const DeviceScript> scripts, CentralSystem& cs);

/// Oracle calls per device-step over rounds [begin, end).
double measure_execution_rate(const FederationResult& result, std::size_t begin, std::size_t end);

/// (1 / lambda^2) * (2 - (1 - beta)^(n - 1)).
double execution_rate_bound(double lambda, double beta, std::size_t n);

void write_round_stats_csv(std::ostream& out, const FederationResult& result);
nlohmann::json federation_summary_json(const FederationConfig& cfg, const FederationResult& result);

/// Per-device scripts of `rounds` queries: known-space traffic, and with
/// probability `drift_probability` a switch at a random round to one of the
/// `novel` spaces for the rest of the script.
struct ScriptPlan {
    std::size_t rounds = 3000;
    double drift_probability = 1.0;
    double drift_window_lo = 0.1;  // drift round drawn from [lo, hi] * rounds
    double drift_window_hi = 0.5;
};

std::vector<DeviceScript> make_drift_scripts(const SpatialScenario& scenario, std::size_t n,
                                             std::span<const Point2> known, std::span<const Point2> novel,
                                             const ScriptPlan& plan, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Offline convergence over a fixed set of query spaces.

struct ConvergenceConfig {
    std::size_t k_spaces = 16;
    std::size_t train_per_space = 300;
    /// Queries streamed per space before giving up on a learning phase.
    std::size_t max_phase = 2000;
    std::size_t probe_window = 30;
    std::size_t probe_trials = 4;
    std::uint64_t seed = 0;
};

struct ConvergenceResult {
    std::vector<double> beta_hat;                // index l = spaces learned, 0..k_spaces
    std::vector<std::size_t> k_after;            // codebook size after learning l spaces
    std::vector<std::size_t> phase_forwarded;    // oracle calls spent learning space l
    std::vector<bool> learned;                   // phase ended in a finalized session
};

/// The device learns the k_spaces query spaces one after another through
/// its own detection and adaptation; after each space, beta_hat is the
/// fraction of probe windows (every space, probe_trials each, run on a
/// frozen copy) in which the detector fires.
ConvergenceResult measure_offline_convergence(const SpatialScenario& scenario, const ConvergenceConfig& cfg);

void write_convergence_csv(std::ostream& out, const ConvergenceResult& result);

// ---------------------------------------------------------------------------
// Affiliate count per adaptation cycle.

struct AffiliateCycleConfig {
    std::size_t n = 4;
    double beta = 0.3;
    std::size_t cycles = 100;
    std::size_t known_prefix = 10;
    std::size_t cycle_rounds = 600;
    std::size_t train_per_space = 300;
    std::uint64_t seed = 0;
};

struct AffiliateCycleResult {
    std::vector<std::size_t> affiliates;  // per cycle, for device 0
    double mean = 0.0;
    double expected = 0.0;   // beta * (n - 1)
    double tolerance = 0.0;  // 3 sigma of the cycle mean
};

/// Each cycle device 0 drifts to a novel space and every other device
/// drifts with probability beta at the same round; counts the distinct
/// devices whose executions reached device 0's session.
AffiliateCycleResult run_affiliate_cycles(const SpatialScenario& scenario, const AffiliateCycleConfig& cfg);

}  // namespace qdaqp
