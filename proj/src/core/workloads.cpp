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

#include "qdaqp/workloads.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <random>

#include <json.hpp>

namespace qdaqp {

using Rng = std::mt19937_64;

namespace {

/// Labels `query` unless the aggregate is undefined on it.
std::optional<double> try_label(const DataTable& table, const RangeQuery& query, const AggregateSpec& agg) {
    try {
        return execute_exact(table, query, agg);
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::kEmptySelection) return std::nullopt;
        throw;
    }
}

Interval clamp_interval(double lo, double hi, const Interval& domain) {
    lo = std::clamp(lo, domain.lo, domain.hi);
    hi = std::clamp(hi, domain.lo, domain.hi);
    return {lo, hi};
}

std::size_t draw_budget(std::size_t max_draws, std::size_t count) {
    return max_draws ? max_draws : 100 * std::max<std::size_t>(count, 1);
}

/// Uniformly random p-subset of [0, d), returned sorted.
std::vector<std::size_t> random_columns(Rng& rng, std::size_t d, std::size_t p) {
    std::vector<std::size_t> idx(d);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < p; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, d - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(p);
    std::sort(idx.begin(), idx.end());
    return idx;
}

}  // namespace

DataTable gen_uniform_table(const SyntheticDataConfig& cfg) {
    if (cfg.columns < 1) fail(ErrorKind::kConfig, "columns must be >= 1");
    if (cfg.rows < 1) fail(ErrorKind::kConfig, "rows must be >= 1");
    if (!(cfg.value_range.lo < cfg.value_range.hi)) fail(ErrorKind::kConfig, "value range is empty");
    Rng rng(cfg.seed);
    std::uniform_real_distribution<double> cell(cfg.value_range.lo, cfg.value_range.hi);
    std::vector<std::vector<double>> cols(cfg.columns, std::vector<double>(cfg.rows));
    // Row-major draw order so a prefix of rows does not depend on column count.
    for (std::size_t r = 0; r < cfg.rows; ++r) {
        for (std::size_t c = 0; c < cfg.columns; ++c) cols[c][r] = cell(rng);
    }
    std::vector<std::string> names;
    for (std::size_t c = 0; c < cfg.columns; ++c) names.push_back("c" + std::to_string(c));
    return DataTable(std::move(names), std::move(cols),
                     std::vector<Interval>(cfg.columns, cfg.value_range));
}

DataTable gen_spatial_table(const SpatialDataConfig& cfg) {
    if (cfg.rows < 1) fail(ErrorKind::kConfig, "rows must be >= 1");
    if (!(cfg.value_scale > 0.0)) fail(ErrorKind::kConfig, "value_scale must be positive");
    if (cfg.noise_sd < 0.0) fail(ErrorKind::kConfig, "noise_sd must be >= 0");
    constexpr double kSide = 1e6;
    Rng rng(cfg.seed);
    std::uniform_real_distribution<double> coord(0.0, kSide);
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<double> xs(cfg.rows), ys(cfg.rows), vs(cfg.rows);
    for (std::size_t r = 0; r < cfg.rows; ++r) {
        const double x = coord(rng);
        const double y = coord(rng);
        const double fx = x / kSide;
        const double fy = y / kSide;
        const double shape = 0.5 +
                             cfg.wave_amplitude * std::sin(3.0 * std::numbers::pi * fx) *
                                 std::cos(2.0 * std::numbers::pi * fy) +
                             cfg.trend * fx;
        xs[r] = x;
        ys[r] = y;
        vs[r] = cfg.value_scale * shape + cfg.noise_sd * noise(rng);
    }
    auto [vlo, vhi] = std::minmax_element(vs.begin(), vs.end());
    std::vector<Interval> domain{{0.0, kSide}, {0.0, kSide}, {*vlo, *vhi}};
    return DataTable({"x", "y", "value"}, {std::move(xs), std::move(ys), std::move(vs)}, std::move(domain));
}

Workload gen_query_workload(const DataTable& table, const QueryGenConfig& cfg, const AggregateSpec& agg) {
    const std::size_t d = table.columns();
    if (cfg.predicates < 1 || cfg.predicates > d) {
        fail(ErrorKind::kConfig, "predicates per query must satisfy 1 <= p <= d");
    }
    if (!(cfg.selectivity > 0.0 && cfg.selectivity <= 1.0)) {
        fail(ErrorKind::kConfig, "selectivity must lie in (0, 1]");
    }
    validate_aggregate(agg, d);

    Rng rng(cfg.seed);
    std::normal_distribution<double> unit_normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const auto& domain = table.domain();

    Workload out{agg, {}};
    out.queries.reserve(cfg.count);
    const std::size_t budget = draw_budget(cfg.max_draws, cfg.count);
    std::size_t draws = 0;
    while (out.queries.size() < cfg.count) {
        if (draws++ >= budget) {
            fail(ErrorKind::kGeneration, "query generation exhausted its budget of " + std::to_string(budget) +
                                             " draws after " + std::to_string(out.queries.size()) + " queries");
        }
        // One range size per query, as in the generator the workloads mirror.
        const double width = domain.front().width();
        double r = 0.0;
        do {
            r = cfg.selectivity * width + cfg.range_noise_fraction * width * unit_normal(rng);
        } while (r <= 0.0);

        const auto cols = random_columns(rng, d, cfg.predicates);
        RangeQuery q;
        for (std::size_t col : cols) {
            const Interval& dom = domain[col];
            const double scaled_r = r * (dom.width() / width);
            double z = 0.0;
            if (cfg.center_mode == CenterMode::kUniform) {
                z = dom.lo + unit(rng) * dom.width();
            } else {
                z = dom.hi + cfg.center_sd * unit_normal(rng);
            }
            q.predicates.emplace(col, clamp_interval(z - scaled_r / 2.0, z + scaled_r / 2.0, dom));
        }
        if (auto y = try_label(table, q, agg)) out.queries.push_back({std::move(q), *y});
    }
    return out;
}

ClusteredWorkload gen_clustered_workload(const DataTable& table, const ClusteredWorkloadConfig& cfg,
                                         const AggregateSpec& agg) {
    if (table.columns() < 2) fail(ErrorKind::kConfig, "clustered workload needs two spatial columns");
    if (cfg.x_column >= table.columns() || cfg.y_column >= table.columns() || cfg.x_column == cfg.y_column) {
        fail(ErrorKind::kConfig, "invalid spatial column selection");
    }
    if (cfg.n_centers < 1 && !cfg.centers) fail(ErrorKind::kConfig, "n_centers must be >= 1");
    if (cfg.centers && cfg.centers->empty()) fail(ErrorKind::kConfig, "explicit center list is empty");
    if (table.rows() == 0) fail(ErrorKind::kConfig, "table is empty");
    if (!(cfg.range_floor >= 0.0 && cfg.range_floor < 1.0)) fail(ErrorKind::kConfig, "range_floor must lie in [0, 1)");
    validate_aggregate(agg, table.columns());

    Rng rng(cfg.seed);
    std::normal_distribution<double> unit_normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> width(cfg.range_floor, 1.0);

    // Location/spread of the spatial attributes from a row sample.
    const std::size_t sample = std::min(cfg.stats_sample, table.rows());
    std::uniform_int_distribution<std::size_t> pick_row(0, table.rows() - 1);
    double mx = 0, my = 0, sxx = 0, syy = 0;
    std::vector<Point2> pts(sample);
    for (auto& p : pts) {
        const std::size_t r = pick_row(rng);
        p = {table.column(cfg.x_column)[r], table.column(cfg.y_column)[r]};
        mx += p.x;
        my += p.y;
    }
    mx /= static_cast<double>(sample);
    my /= static_cast<double>(sample);
    for (const auto& p : pts) {
        sxx += (p.x - mx) * (p.x - mx);
        syy += (p.y - my) * (p.y - my);
    }
    const double x_std = std::sqrt(sxx / static_cast<double>(sample));
    const double y_std = std::sqrt(syy / static_cast<double>(sample));

    const Interval& dx = table.domain()[cfg.x_column];
    const Interval& dy = table.domain()[cfg.y_column];

    ClusteredWorkload out;
    out.workload.agg = agg;
    if (cfg.centers) {
        out.centers = *cfg.centers;
    } else {
        for (std::size_t c = 0; c < cfg.n_centers; ++c) {
            out.centers.push_back({std::clamp(mx + x_std * unit_normal(rng), dx.lo, dx.hi),
                                   std::clamp(my + y_std * unit_normal(rng), dy.lo, dy.hi)});
        }
    }

    const std::size_t total = out.centers.size() * cfg.points_per_center;
    const std::size_t budget = draw_budget(cfg.max_draws, total);
    std::size_t draws = 0;
    for (std::size_t c = 0; c < out.centers.size(); ++c) {
        const Point2 center = out.centers[c];
        std::size_t made = 0;
        while (made < cfg.points_per_center) {
            if (draws++ >= budget) {
                fail(ErrorKind::kGeneration, "clustered generation exhausted its budget of " +
                                                 std::to_string(budget) + " draws");
            }
            const double px = center.x + cfg.center_spread_fraction * x_std * unit_normal(rng);
            const double py = center.y + cfg.center_spread_fraction * y_std * unit_normal(rng);
            const double xr = cfg.range_fraction * x_std * width(rng);
            const double yr = cfg.range_fraction * y_std * width(rng);
            RangeQuery q;
            q.predicates.emplace(cfg.x_column, clamp_interval(px - xr, px + xr, dx));
            q.predicates.emplace(cfg.y_column, clamp_interval(py - yr, py + yr, dy));
            if (auto y = try_label(table, q, agg)) {
                out.workload.queries.push_back({std::move(q), *y});
                out.center_of.push_back(c);
                ++made;
            }
        }
    }

    // Interleave clusters into one analyst stream.
    std::vector<std::size_t> order(out.workload.queries.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i > 1; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i - 1);
        std::swap(order[i - 1], order[pick(rng)]);
    }
    std::vector<LabeledQuery> shuffled;
    std::vector<std::size_t> shuffled_center;
    shuffled.reserve(order.size());
    for (std::size_t i : order) {
        shuffled.push_back(std::move(out.workload.queries[i]));
        shuffled_center.push_back(out.center_of[i]);
    }
    out.workload.queries = std::move(shuffled);
    out.center_of = std::move(shuffled_center);
    return out;
}

Workload gen_temporal_workload(const DataTable& table, const TemporalWorkloadConfig& cfg,
                               const AggregateSpec& agg) {
    if (cfg.column >= table.columns()) fail(ErrorKind::kConfig, "temporal column out of range");
    if (!(cfg.range_fraction > 0.0 && cfg.range_fraction <= 1.0)) {
        fail(ErrorKind::kConfig, "range fraction must lie in (0, 1]");
    }
    if (table.rows() == 0) fail(ErrorKind::kConfig, "table is empty");
    validate_aggregate(agg, table.columns());

    const auto col = table.column(cfg.column);
    const double n = static_cast<double>(col.size());
    const double mean = std::accumulate(col.begin(), col.end(), 0.0) / n;
    double var = 0.0;
    for (double v : col) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / n);
    auto [lo, hi] = std::minmax_element(col.begin(), col.end());
    const double r = cfg.range_fraction * (*hi - *lo);

    Rng rng(cfg.seed);
    std::normal_distribution<double> center(mean, sd / 2.0);
    const Interval& dom = table.domain()[cfg.column];
    Workload out{agg, {}};
    const std::size_t budget = draw_budget(cfg.max_draws, cfg.count);
    std::size_t draws = 0;
    while (out.queries.size() < cfg.count) {
        if (draws++ >= budget) fail(ErrorKind::kGeneration, "temporal generation exhausted its draw budget");
        const double z = center(rng);
        RangeQuery q;
        q.predicates.emplace(cfg.column, clamp_interval(z - r / 2.0, z + r / 2.0, dom));
        if (auto y = try_label(table, q, agg)) out.queries.push_back({std::move(q), *y});
    }
    return out;
}

std::vector<std::pair<std::size_t, std::size_t>> synthetic_workload_grid() {
    std::vector<std::pair<std::size_t, std::size_t>> grid;
    for (std::size_t d : {10u, 20u, 50u, 100u}) {
        for (std::size_t p : {2u, 5u, 10u}) {
            if (p >= d) continue;
            grid.emplace_back(d, p);
        }
    }
    return grid;
}

DriftStream compose_drift(const std::vector<DriftSegment>& segments) {
    if (segments.empty()) fail(ErrorKind::kConfig, "drift script needs at least one segment");
    DriftStream out;
    for (std::size_t s = 0; s < segments.size(); ++s) {
        if (segments[s].queries.empty()) {
            fail(ErrorKind::kConfig, "drift segment '" + segments[s].name + "' is empty");
        }
        if (s > 0) out.drift_points.push_back(out.queries.size());
        for (const auto& q : segments[s].queries) {
            out.queries.push_back(q);
            out.segment_of.push_back(s);
        }
    }
    return out;
}

void write_workload_jsonl(std::ostream& out, const Workload& workload) {
    for (const auto& lq : workload.queries) {
        nlohmann::ordered_json rec;
        nlohmann::ordered_json preds = nlohmann::ordered_json::object();
        for (const auto& [col, iv] : lq.query.predicates) preds[std::to_string(col)] = {iv.lo, iv.hi};
        rec["predicates"] = std::move(preds);
        rec["agg"] = {{"fn", std::string(to_string(workload.agg.function))}, {"target", workload.agg.target}};
        rec["answer"] = lq.answer;
        out << rec.dump() << '\n';
    }
}

Workload read_workload_jsonl(std::istream& in, std::size_t d) {
    Workload out;
    std::string line;
    std::size_t line_no = 0;
    bool have_agg = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::string where = "workload line " + std::to_string(line_no) + ": ";
        nlohmann::json rec;
        try {
            rec = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorKind::kIo, where + e.what());
        }
        try {
            AggregateSpec agg{parse_aggregate_function(rec.at("agg").at("fn").get<std::string>()),
                              rec.at("agg").value("target", std::size_t{0})};
            if (!have_agg) {
                out.agg = agg;
                have_agg = true;
            } else if (!(agg == out.agg)) {
                fail(ErrorKind::kIo, where + "aggregate differs from the first record");
            }
            LabeledQuery lq;
            for (const auto& [key, val] : rec.at("predicates").items()) {
                const std::size_t col = std::stoul(key);
                lq.query.predicates.emplace(col, Interval{val.at(0).get<double>(), val.at(1).get<double>()});
            }
            lq.answer = rec.at("answer").get<double>();
            if (!std::isfinite(lq.answer)) fail(ErrorKind::kIo, where + "answer is not finite");
            if (d > 0) {
                validate_query(lq.query, d);
                validate_aggregate(out.agg, d);
            } else {
                validate_query(lq.query, std::numeric_limits<std::size_t>::max());
            }
            out.queries.push_back(std::move(lq));
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorKind::kIo, where + e.what());
        } catch (const std::invalid_argument&) {
            fail(ErrorKind::kIo, where + "predicate key is not a column index");
        }
    }
    return out;
}

std::vector<QueryAnswerPair> to_pairs(const std::vector<LabeledQuery>& queries,
                                      std::span<const Interval> domain) {
    std::vector<QueryAnswerPair> out;
    out.reserve(queries.size());
    for (const auto& lq : queries) out.push_back({vectorize(lq.query, domain), lq.answer});
    return out;
}

}  // namespace qdaqp
