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

#include "qdaqp/datamodel.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace qdaqp {

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::kDimension: return "dimension";
        case ErrorKind::kEmptySelection: return "empty-selection";
        case ErrorKind::kState: return "state";
        case ErrorKind::kNumerical: return "numerical";
        case ErrorKind::kDegenerate: return "degenerate";
        case ErrorKind::kConfig: return "config";
        case ErrorKind::kGeneration: return "generation";
        case ErrorKind::kIo: return "io";
    }
    return "unknown";
}

DataTable::DataTable(std::vector<std::string> names, std::vector<std::vector<double>> columns,
                     std::optional<std::vector<Interval>> domain)
    : names_(std::move(names)), columns_(std::move(columns)) {
    if (names_.size() != columns_.size()) {
        fail(ErrorKind::kDimension, "column name count does not match column count");
    }
    rows_ = columns_.empty() ? 0 : columns_.front().size();
    for (const auto& col : columns_) {
        if (col.size() != rows_) fail(ErrorKind::kDimension, "columns have different lengths");
        for (double v : col) {
            if (!std::isfinite(v)) fail(ErrorKind::kNumerical, "table cell is not finite");
        }
    }
    if (domain) {
        if (domain->size() != columns_.size()) {
            fail(ErrorKind::kDimension, "domain size does not match column count");
        }
        domain_ = std::move(*domain);
    } else {
        domain_.resize(columns_.size());
        for (std::size_t i = 0; i < columns_.size(); ++i) {
            if (rows_ == 0) continue;
            auto [lo, hi] = std::minmax_element(columns_[i].begin(), columns_[i].end());
            domain_[i] = {*lo, *hi};
        }
    }
    for (std::size_t i = 0; i < columns_.size(); ++i) {
        const Interval& b = domain_[i];
        if (!(b.lo <= b.hi)) fail(ErrorKind::kConfig, "domain bound lo > hi for column " + names_[i]);
        for (double v : columns_[i]) {
            if (!b.contains(v)) {
                fail(ErrorKind::kConfig, "value outside domain in column " + names_[i]);
            }
        }
    }
}

std::string_view to_string(AggregateFunction fn) noexcept {
    switch (fn) {
        case AggregateFunction::kCount: return "COUNT";
        case AggregateFunction::kSum: return "SUM";
        case AggregateFunction::kAvg: return "AVG";
        case AggregateFunction::kMin: return "MIN";
        case AggregateFunction::kMax: return "MAX";
    }
    return "?";
}

AggregateFunction parse_aggregate_function(std::string_view name) {
    std::string up(name);
    std::transform(up.begin(), up.end(), up.begin(), [](unsigned char c) { return std::toupper(c); });
    if (up == "COUNT") return AggregateFunction::kCount;
    if (up == "SUM") return AggregateFunction::kSum;
    if (up == "AVG") return AggregateFunction::kAvg;
    if (up == "MIN") return AggregateFunction::kMin;
    if (up == "MAX") return AggregateFunction::kMax;
    fail(ErrorKind::kConfig, "unknown aggregate function '" + up + "'");
}

void validate_query(const RangeQuery& query, std::size_t d) {
    for (const auto& [col, iv] : query.predicates) {
        if (col >= d) {
            fail(ErrorKind::kDimension,
                 "predicate column " + std::to_string(col) + " out of range for d=" + std::to_string(d));
        }
        if (!(iv.lo <= iv.hi)) {
            fail(ErrorKind::kDimension, "predicate on column " + std::to_string(col) + " has l > u");
        }
    }
}

void validate_aggregate(const AggregateSpec& agg, std::size_t d) {
    if (agg.function != AggregateFunction::kCount && agg.target >= d) {
        fail(ErrorKind::kDimension, "aggregate target column out of range");
    }
}

QueryVector vectorize(const RangeQuery& query, std::span<const Interval> domain) {
    validate_query(query, domain.size());
    QueryVector v(2 * domain.size());
    for (std::size_t i = 0; i < domain.size(); ++i) {
        v[2 * i] = domain[i].lo;
        v[2 * i + 1] = domain[i].hi;
    }
    for (const auto& [col, iv] : query.predicates) {
        v[2 * col] = iv.lo;
        v[2 * col + 1] = iv.hi;
    }
    return v;
}

RangeQuery devectorize(std::span<const double> v, std::span<const Interval> domain) {
    if (v.size() != 2 * domain.size()) fail(ErrorKind::kDimension, "query vector length != 2d");
    RangeQuery q;
    for (std::size_t i = 0; i < domain.size(); ++i) {
        Interval iv{v[2 * i], v[2 * i + 1]};
        if (iv != domain[i]) q.predicates.emplace(i, iv);
    }
    return q;
}

double query_distance(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        fail(ErrorKind::kDimension, "query vectors differ in length (" + std::to_string(a.size()) +
                                        " vs " + std::to_string(b.size()) + ")");
    }
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double diff = a[i] - b[i];
        acc += diff * diff;
    }
    return acc;
}

double execute_exact(const DataTable& table, const RangeQuery& query, const AggregateSpec& agg) {
    validate_query(query, table.columns());
    validate_aggregate(agg, table.columns());

    struct Bound {
        std::span<const double> col;
        Interval iv;
    };
    std::vector<Bound> bounds;
    bounds.reserve(query.predicates.size());
    for (const auto& [col, iv] : query.predicates) bounds.push_back({table.column(col), iv});

    std::span<const double> target;
    if (agg.function != AggregateFunction::kCount) target = table.column(agg.target);

    std::size_t count = 0;
    double sum = 0.0;
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < table.rows(); ++r) {
        bool keep = true;
        for (const auto& b : bounds) {
            if (!b.iv.contains(b.col[r])) {
                keep = false;
                break;
            }
        }
        if (!keep) continue;
        ++count;
        if (!target.empty()) {
            const double v = target[r];
            sum += v;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }

    switch (agg.function) {
        case AggregateFunction::kCount: return static_cast<double>(count);
        case AggregateFunction::kSum: return sum;
        default: break;
    }
    if (count == 0) {
        fail(ErrorKind::kEmptySelection,
             std::string(to_string(agg.function)) + " over an empty selection is undefined");
    }
    switch (agg.function) {
        case AggregateFunction::kAvg: return sum / static_cast<double>(count);
        case AggregateFunction::kMin: return lo;
        case AggregateFunction::kMax: return hi;
        default: break;
    }
    return 0.0;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
        while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
        std::size_t start = cell.find_first_not_of(' ');
        cells.push_back(start == std::string::npos ? std::string{} : cell.substr(start));
    }
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    return cells;
}

double parse_cell(const std::string& cell, std::size_t line_no) {
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(cell.c_str(), &end);
    if (cell.empty() || end != cell.c_str() + cell.size() || errno == ERANGE || !std::isfinite(v)) {
        fail(ErrorKind::kIo, "line " + std::to_string(line_no) + ": cell '" + cell + "' is not a finite real");
    }
    return v;
}

}  // namespace

DataTable read_csv(std::istream& in, std::optional<std::vector<Interval>> domain) {
    std::string line;
    if (!std::getline(in, line)) fail(ErrorKind::kIo, "csv is empty (missing header)");
    std::vector<std::string> names = split_csv_line(line);
    std::vector<std::vector<double>> cols(names.size());
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        auto cells = split_csv_line(line);
        if (cells.size() != names.size()) {
            fail(ErrorKind::kIo, "line " + std::to_string(line_no) + ": expected " +
                                     std::to_string(names.size()) + " cells");
        }
        for (std::size_t i = 0; i < cells.size(); ++i) cols[i].push_back(parse_cell(cells[i], line_no));
    }
    return DataTable(std::move(names), std::move(cols), std::move(domain));
}

DataTable read_csv_file(const std::string& path, std::optional<std::vector<Interval>> domain) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::kIo, "cannot open " + path);
    return read_csv(in, std::move(domain));
}

void write_csv(std::ostream& out, const DataTable& table) {
    const auto& names = table.names();
    for (std::size_t i = 0; i < names.size(); ++i) out << (i ? "," : "") << names[i];
    out << '\n';
    char buf[32];
    for (std::size_t r = 0; r < table.rows(); ++r) {
        for (std::size_t c = 0; c < table.columns(); ++c) {
            std::snprintf(buf, sizeof(buf), "%.17g", table.column(c)[r]);
            out << (c ? "," : "") << buf;
        }
        out << '\n';
    }
}

QueryScaler::QueryScaler(std::vector<double> mean, std::vector<double> scale)
    : mean_(std::move(mean)), scale_(std::move(scale)) {
    if (mean_.size() != scale_.size()) fail(ErrorKind::kDimension, "scaler mean/scale size mismatch");
    for (double s : scale_) {
        if (!(s > 0.0) || !std::isfinite(s)) fail(ErrorKind::kConfig, "scaler scale must be positive");
    }
}

QueryScaler QueryScaler::fit(std::span<const QueryVector> sample, std::span<const double> fallback_scale) {
    if (sample.empty()) fail(ErrorKind::kState, "cannot fit a scaler on an empty sample");
    const std::size_t dim = sample.front().size();
    if (fallback_scale.size() != dim) fail(ErrorKind::kDimension, "fallback scale length mismatch");
    std::vector<double> mean(dim, 0.0), scale(dim, 0.0);
    for (const auto& v : sample) {
        if (v.size() != dim) fail(ErrorKind::kDimension, "scaler sample has inconsistent lengths");
        for (std::size_t i = 0; i < dim; ++i) mean[i] += v[i];
    }
    const double n = static_cast<double>(sample.size());
    for (auto& m : mean) m /= n;
    for (const auto& v : sample) {
        for (std::size_t i = 0; i < dim; ++i) scale[i] += (v[i] - mean[i]) * (v[i] - mean[i]);
    }
    for (std::size_t i = 0; i < dim; ++i) {
        const double sd = std::sqrt(scale[i] / n);
        // Constant dimensions carry no spread to learn from.
        scale[i] = sd > 1e-12 * std::max(1.0, std::abs(mean[i])) ? sd : std::max(fallback_scale[i], 1e-12);
    }
    return QueryScaler(std::move(mean), std::move(scale));
}

QueryVector QueryScaler::apply(std::span<const double> v) const {
    if (v.size() != mean_.size()) fail(ErrorKind::kDimension, "scaler input length mismatch");
    QueryVector out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - mean_[i]) / scale_[i];
    return out;
}

QueryVector QueryScaler::invert(std::span<const double> v) const {
    if (v.size() != mean_.size()) fail(ErrorKind::kDimension, "scaler input length mismatch");
    QueryVector out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] * scale_[i] + mean_[i];
    return out;
}

}  // namespace qdaqp
