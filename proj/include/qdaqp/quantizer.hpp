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
#include <optional>
#include <span>
#include <vector>

#include "qdaqp/datamodel.hpp"

namespace qdaqp {

/// Per-cluster statistics. Distances are squared query-space distances.
struct ClusterStats {
    std::size_t member_count = 0;
    double variance = 0.0;  // mean squared distance of members to w
    double min_dist = 0.0;  // smallest squared distance of a member to w
    double epe = 0.0;       // expected squared prediction error of the cluster model

    double sigma() const;
};

struct Representative {
    QueryVector w;
    std::size_t id = 0;  // 0-based position in the codebook
};

struct Assignment {
    std::size_t closest = 0;
    std::optional<std::size_t> rival;
    double closest_dist = 0.0;
    double rival_dist = 0.0;
};

/// Set of query-space prototypes plus their cluster statistics. Ids are the
/// dense positions 0..K-1.
class Codebook {
public:
    Codebook() = default;
    explicit Codebook(std::size_t dim) : dim_(dim) {}

    std::size_t size() const noexcept { return reps_.size(); }
    bool empty() const noexcept { return reps_.empty(); }
    std::size_t dim() const noexcept { return dim_; }

    std::size_t add(QueryVector w, ClusterStats stats = {});
    const QueryVector& prototype(std::size_t k) const { return reps_.at(k); }
    QueryVector& prototype(std::size_t k) { return reps_.at(k); }
    const ClusterStats& stats(std::size_t k) const { return stats_.at(k); }
    ClusterStats& stats(std::size_t k) { return stats_.at(k); }
    Representative representative(std::size_t k) const { return {reps_.at(k), k}; }

    /// Closest and second-closest prototypes; ties go to the lowest id.
    Assignment assign(std::span<const double> q) const;

    /// Recomputes member_count, variance and min_dist from a full
    /// assignment pass. epe is left untouched.
    void refresh_stats(std::span<const QueryVector> queries);

private:
    std::size_t dim_ = 0;
    std::vector<QueryVector> reps_;
    std::vector<ClusterStats> stats_;
};

struct QuantizerConfig {
    double vigilance = 0.0;  // spawn threshold on squared distance; <= 0 means derive from data
    double learn_rate = 0.05;
    double vigilance_quantile = 0.9;
    std::size_t bootstrap_sample = 500;
    std::uint64_t seed = 0;
};

/// Quantile of pairwise squared distances over a deterministic subsample.
double vigilance_from_sample(std::span<const QueryVector> queries, double quantile, std::size_t sample,
                             std::uint64_t seed);

/// Growing vigilance quantizer: spawn at q when the nearest prototype is
/// farther than the vigilance, otherwise pull the nearest prototype toward q.
/// Stats are computed in a final full pass over `queries`.
Codebook fit_online(std::span<const QueryVector> queries, double vigilance, double learn_rate);
Codebook fit_online(std::span<const QueryVector> queries, const QuantizerConfig& cfg);

/// Splits pairs into per-cluster subsets by their closest prototype.
std::vector<std::vector<QueryAnswerPair>> partition(const Codebook& codebook,
                                                    std::span<const QueryAnswerPair> pairs);

/// Mean squared distance to the closest prototype.
double quantization_error(const Codebook& codebook, std::span<const QueryVector> queries);

}  // namespace qdaqp
