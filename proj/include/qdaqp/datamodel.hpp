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

#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "qdaqp/error.hpp"

namespace qdaqp {

/// Closed interval [lo, hi].
struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    bool contains(double v) const noexcept { return lo <= v && v <= hi; }
    double width() const noexcept { return hi - lo; }
    bool operator==(const Interval&) const = default;
};

/// In-memory columnar table of real attributes with per-column domain bounds.
/// Immutable after construction.
class DataTable {
public:
    DataTable() = default;

    /// Domain defaults to per-column [min, max]. An explicit domain must
    /// contain every stored value.
    DataTable(std::vector<std::string> names, std::vector<std::vector<double>> columns,
              std::optional<std::vector<Interval>> domain = std::nullopt);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t columns() const noexcept { return columns_.size(); }
    std::span<const double> column(std::size_t i) const { return columns_.at(i); }
    const std::vector<std::string>& names() const noexcept { return names_; }
    const std::vector<Interval>& domain() const noexcept { return domain_; }

    bool operator==(const DataTable&) const = default;

private:
    std::vector<std::string> names_;
    std::vector<std::vector<double>> columns_;
    std::vector<Interval> domain_;
    std::size_t rows_ = 0;
};

/// Conjunctive range predicate set; only constrained columns appear.
struct RangeQuery {
    std::map<std::size_t, Interval> predicates;

    bool operator==(const RangeQuery&) const = default;
};

/// [l_1, u_1, ..., l_d, u_d]
using QueryVector = std::vector<double>;

enum class AggregateFunction { kCount, kSum, kAvg, kMin, kMax };

struct AggregateSpec {
    AggregateFunction function = AggregateFunction::kCount;
    std::size_t target = 0;  // ignored for COUNT

    bool operator==(const AggregateSpec&) const = default;
};

struct QueryAnswerPair {
    QueryVector query;
    double answer = 0.0;
};

std::string_view to_string(AggregateFunction fn) noexcept;
AggregateFunction parse_aggregate_function(std::string_view name);

/// Throws kDimension if a predicate column is outside `d` or an interval is inverted.
void validate_query(const RangeQuery& query, std::size_t d);
void validate_aggregate(const AggregateSpec& agg, std::size_t d);

/// Unconstrained columns take the domain bounds.
QueryVector vectorize(const RangeQuery& query, std::span<const Interval> domain);

/// Inverse of vectorize: columns whose interval equals the domain are dropped.
RangeQuery devectorize(std::span<const double> v, std::span<const Interval> domain);

/// Squared Euclidean norm of a - b.
double query_distance(std::span<const double> a, std::span<const double> b);

/// Inclusive conjunctive filter followed by the aggregate. COUNT and SUM of
/// an empty selection are 0; AVG/MIN/MAX raise kEmptySelection.
double execute_exact(const DataTable& table, const RangeQuery& query, const AggregateSpec& agg);

/// First row is the header; every cell must parse as a finite real.
DataTable read_csv(std::istream& in, std::optional<std::vector<Interval>> domain = std::nullopt);
DataTable read_csv_file(const std::string& path,
                        std::optional<std::vector<Interval>> domain = std::nullopt);
void write_csv(std::ostream& out, const DataTable& table);

/// Per-dimension affine map to zero mean / unit scale. Dimensions that are
/// constant in the fitting sample fall back to a caller-supplied scale.
class QueryScaler {
public:
    QueryScaler() = default;
    QueryScaler(std::vector<double> mean, std::vector<double> scale);

    static QueryScaler fit(std::span<const QueryVector> sample, std::span<const double> fallback_scale);

    std::size_t dim() const noexcept { return mean_.size(); }
    QueryVector apply(std::span<const double> v) const;
    QueryVector invert(std::span<const double> v) const;
    const std::vector<double>& mean() const noexcept { return mean_; }
    const std::vector<double>& scale() const noexcept { return scale_; }

private:
    std::vector<double> mean_;
    std::vector<double> scale_;
};

}  // namespace qdaqp
