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

#include "qdaqp/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace qdaqp {

double ClusterStats::sigma() const { return std::sqrt(std::max(variance, 0.0)); }

std::size_t Codebook::add(QueryVector w, ClusterStats stats) {
    if (dim_ == 0 && reps_.empty()) dim_ = w.size();
    if (w.size() != dim_) fail(ErrorKind::kDimension, "prototype length does not match codebook dimension");
    reps_.push_back(std::move(w));
    stats_.push_back(stats);
    return reps_.size() - 1;
}

Assignment Codebook::assign(std::span<const double> q) const {
    if (reps_.empty()) fail(ErrorKind::kState, "assign on an empty codebook");
    Assignment a;
    double best = std::numeric_limits<double>::infinity();
    double second = std::numeric_limits<double>::infinity();
    std::size_t best_k = 0;
    std::optional<std::size_t> second_k;
    for (std::size_t k = 0; k < reps_.size(); ++k) {
        const double d = query_distance(q, reps_[k]);
        // Strict comparisons keep the lowest id on ties.
        if (d < best) {
            if (k > 0) {
                second = best;
                second_k = best_k;
            }
            best = d;
            best_k = k;
        } else if (!second_k || d < second) {
            second = d;
            second_k = k;
        }
    }
    a.closest = best_k;
    a.closest_dist = best;
    a.rival = second_k;
    a.rival_dist = second_k ? second : 0.0;
    return a;
}

void Codebook::refresh_stats(std::span<const QueryVector> queries) {
    std::vector<double> sum(reps_.size(), 0.0);
    std::vector<double> mind(reps_.size(), std::numeric_limits<double>::infinity());
    std::vector<std::size_t> count(reps_.size(), 0);
    for (const auto& q : queries) {
        const Assignment a = assign(q);
        sum[a.closest] += a.closest_dist;
        mind[a.closest] = std::min(mind[a.closest], a.closest_dist);
        ++count[a.closest];
    }
    for (std::size_t k = 0; k < reps_.size(); ++k) {
        stats_[k].member_count = count[k];
        stats_[k].variance = count[k] ? sum[k] / static_cast<double>(count[k]) : 0.0;
        stats_[k].min_dist = count[k] ? mind[k] : 0.0;
    }
}

double vigilance_from_sample(std::span<const QueryVector> queries, double quantile, std::size_t sample,
                             std::uint64_t seed) {
    if (queries.size() < 2) fail(ErrorKind::kState, "need at least two queries to derive a vigilance");
    if (!(quantile > 0.0 && quantile < 1.0)) fail(ErrorKind::kConfig, "vigilance quantile must lie in (0, 1)");
    std::vector<std::size_t> idx(queries.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed);
    const std::size_t m = std::min(sample, queries.size());
    for (std::size_t i = 0; i < m; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    std::vector<double> dists;
    dists.reserve(m * (m - 1) / 2);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j) dists.push_back(query_distance(queries[idx[i]], queries[idx[j]]));
    }
    const auto pos = static_cast<std::size_t>(quantile * static_cast<double>(dists.size() - 1));
    std::nth_element(dists.begin(), dists.begin() + static_cast<std::ptrdiff_t>(pos), dists.end());
    return dists[pos];
}

Codebook fit_online(std::span<const QueryVector> queries, double vigilance, double learn_rate) {
    if (!(vigilance > 0.0)) fail(ErrorKind::kConfig, "vigilance must be positive");
    if (!(learn_rate > 0.0 && learn_rate < 1.0)) fail(ErrorKind::kConfig, "learn rate must lie in (0, 1)");
    Codebook cb(queries.empty() ? 0 : queries.front().size());
    for (const auto& q : queries) {
        if (cb.empty()) {
            cb.add(q);
            continue;
        }
        const Assignment a = cb.assign(q);
        if (a.closest_dist > vigilance) {
            cb.add(q);
        } else {
            auto& w = cb.prototype(a.closest);
            for (std::size_t i = 0; i < w.size(); ++i) w[i] += learn_rate * (q[i] - w[i]);
        }
    }
    if (!cb.empty()) cb.refresh_stats(queries);
    return cb;
}

Codebook fit_online(std::span<const QueryVector> queries, const QuantizerConfig& cfg) {
    double rho = cfg.vigilance;
    if (rho <= 0.0) rho = vigilance_from_sample(queries, cfg.vigilance_quantile, cfg.bootstrap_sample, cfg.seed);
    // Coincident sample points can drive the quantile to zero.
    if (!(rho > 0.0)) rho = std::numeric_limits<double>::min();
    return fit_online(queries, rho, cfg.learn_rate);
}

std::vector<std::vector<QueryAnswerPair>> partition(const Codebook& codebook,
                                                    std::span<const QueryAnswerPair> pairs) {
    if (codebook.empty()) fail(ErrorKind::kState, "partition with an empty codebook");
    std::vector<std::vector<QueryAnswerPair>> out(codebook.size());
    for (const auto& p : pairs) out[codebook.assign(p.query).closest].push_back(p);
    return out;
}

double quantization_error(const Codebook& codebook, std::span<const QueryVector> queries) {
    if (queries.empty()) fail(ErrorKind::kState, "quantization error over an empty query set");
    double acc = 0.0;
    for (const auto& q : queries) acc += codebook.assign(q).closest_dist;
    return acc / static_cast<double>(queries.size());
}

}  // namespace qdaqp
