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

// Independent reference implementations shared by the unit suites. They are
// written from the definitions, not from the library code.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <vector>

#include "qdaqp/datamodel.hpp"

namespace oracle {

inline double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
}

inline std::size_t argmin(const std::vector<std::vector<double>>& ws, const std::vector<double>& q) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < ws.size(); ++k) {
        if (sq_dist(ws[k], q) < sq_dist(ws[best], q)) best = k;
    }
    return best;
}

// Row-by-row scan: collect the selected target values, then aggregate.
inline std::optional<double> scan(const qdaqp::DataTable& t, const qdaqp::RangeQuery& q,
                                  const qdaqp::AggregateSpec& agg) {
    std::vector<double> picked;
    std::size_t n = 0;
    for (std::size_t r = 0; r < t.rows(); ++r) {
        bool ok = true;
        for (const auto& [c, iv] : q.predicates) {
            const double v = t.column(c)[r];
            ok = ok && v >= iv.lo && v <= iv.hi;
        }
        if (!ok) continue;
        ++n;
        if (agg.function != qdaqp::AggregateFunction::kCount) picked.push_back(t.column(agg.target)[r]);
    }
    using F = qdaqp::AggregateFunction;
    if (agg.function == F::kCount) return static_cast<double>(n);
    long double s = 0;
    for (double v : picked) s += v;
    if (agg.function == F::kSum) return static_cast<double>(s);
    if (picked.empty()) return std::nullopt;
    if (agg.function == F::kAvg) return static_cast<double>(s / picked.size());
    if (agg.function == F::kMin) return *std::min_element(picked.begin(), picked.end());
    return *std::max_element(picked.begin(), picked.end());
}

inline qdaqp::DataTable random_table(std::size_t cols, std::size_t rows, std::mt19937_64& rng, double hi = 100.0) {
    std::uniform_real_distribution<double> u(0.0, hi);
    std::vector<std::string> names;
    std::vector<std::vector<double>> data(cols, std::vector<double>(rows));
    for (std::size_t c = 0; c < cols; ++c) {
        names.push_back("c" + std::to_string(c));
        for (auto& v : data[c]) v = u(rng);
    }
    return qdaqp::DataTable(names, data, std::vector<qdaqp::Interval>(cols, {0.0, hi}));
}

inline qdaqp::RangeQuery random_query(std::size_t cols, std::mt19937_64& rng, double hi = 100.0) {
    std::uniform_real_distribution<double> u(0.0, hi);
    std::bernoulli_distribution pick(0.5);
    qdaqp::RangeQuery q;
    for (std::size_t c = 0; c < cols; ++c) {
        if (!pick(rng)) continue;
        double a = u(rng), b = u(rng);
        q.predicates[c] = {std::min(a, b), std::max(a, b)};
    }
    if (q.predicates.empty()) q.predicates[0] = {0.0, hi / 2};
    return q;
}

inline double rel_close(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace oracle
