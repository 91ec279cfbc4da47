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
#include <vector>

#include "qdaqp/datamodel.hpp"

namespace qdaqp {

struct LabeledQuery {
    RangeQuery query;
    double answer = 0.0;
};

/// A labeled query stream produced for one aggregate.
struct Workload {
    AggregateSpec agg;
    std::vector<LabeledQuery> queries;
};

struct SyntheticDataConfig {
    std::size_t columns = 10;
    std::size_t rows = 100000;
    Interval value_range{0.0, 1e6};
    std::uint64_t seed = 0;
};

/// Every cell ~ U[value_range]; the domain is value_range itself.
DataTable gen_uniform_table(const SyntheticDataConfig& cfg);

/// Two spatial columns (x, y) uniform on [0, 1e6]^2 plus a `value` column
/// that varies smoothly with location, so range aggregates over different
/// regions of the plane differ:
///   value = scale * (0.5 + wave * sin(3 pi fx) cos(2 pi fy) + trend * fx) + noise
/// with fx, fy the coordinates as fractions of the side.
struct SpatialDataConfig {
    std::size_t rows = 20000;
    double value_scale = 100.0;
    double noise_sd = 1.0;
    double wave_amplitude = 0.3;
    double trend = 0.2;
    std::uint64_t seed = 0;
};

DataTable gen_spatial_table(const SpatialDataConfig& cfg);

enum class CenterMode {
    kUniform,   // z ~ U[domain]
    kAppendix,  // z ~ N(domain hi, center_sd), the literal generator parameters
};

struct QueryGenConfig {
    std::size_t count = 1000;
    std::size_t predicates = 2;
    double selectivity = 0.5;
    /// Range-size noise as a fraction of the column's domain width.
    double range_noise_fraction = 0.01;
    double center_sd = 100.0;
    CenterMode center_mode = CenterMode::kUniform;
    std::uint64_t seed = 0;
    /// 0 means 100 * count.
    std::size_t max_draws = 0;
};

Workload gen_query_workload(const DataTable& table, const QueryGenConfig& cfg, const AggregateSpec& agg);

struct Point2 {
    double x = 0.0;
    double y = 0.0;
};

struct ClusteredWorkloadConfig {
    std::size_t x_column = 0;
    std::size_t y_column = 1;
    std::size_t n_centers = 5;
    std::size_t points_per_center = 10000;
    double center_spread_fraction = 0.01;
    double range_fraction = 0.5;
    /// Lower end of the rand(0,1) factor scaling each half-width.
    double range_floor = 0.0;
    std::size_t stats_sample = 10000;
    /// When set, replaces the sampled cluster centers.
    std::optional<std::vector<Point2>> centers;
    std::uint64_t seed = 0;
    std::size_t max_draws = 0;
};

struct ClusteredWorkload {
    Workload workload;
    std::vector<Point2> centers;
    std::vector<std::size_t> center_of;  // per query
};

ClusteredWorkload gen_clustered_workload(const DataTable& table, const ClusteredWorkloadConfig& cfg,
                                         const AggregateSpec& agg);

/// One-predicate temporal workload: fixed range 0.2*(max-min), centers ~
/// N(mean, sd/2) of the column.
struct TemporalWorkloadConfig {
    std::size_t column = 0;
    std::size_t count = 1000;
    double range_fraction = 0.2;
    std::uint64_t seed = 0;
    std::size_t max_draws = 0;
};

Workload gen_temporal_workload(const DataTable& table, const TemporalWorkloadConfig& cfg,
                               const AggregateSpec& agg);

/// The (d, p) grid the synthetic study sweeps; p > d is skipped and p == d
/// only where p is listed.
std::vector<std::pair<std::size_t, std::size_t>> synthetic_workload_grid();

struct DriftSegment {
    std::string name;
    std::vector<LabeledQuery> queries;
};

struct DriftStream {
    std::vector<LabeledQuery> queries;
    std::vector<std::size_t> drift_points;  // index of the first query of each later segment
    std::vector<std::size_t> segment_of;
};

DriftStream compose_drift(const std::vector<DriftSegment>& segments);

/// JSON Lines: {"predicates": {"<col>": [l, u]}, "agg": {"fn": "...", "target": t}, "answer": y}
void write_workload_jsonl(std::ostream& out, const Workload& workload);
/// Validates every record against `d` when d > 0.
Workload read_workload_jsonl(std::istream& in, std::size_t d = 0);

std::vector<QueryAnswerPair> to_pairs(const std::vector<LabeledQuery>& queries,
                                      std::span<const Interval> domain);

}  // namespace qdaqp
