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
#include <map>
#include <span>
#include <vector>

#include "qdaqp/quantizer.hpp"
#include "qdaqp/regressors.hpp"

namespace qdaqp {

enum class AffiliateCriterion {
    kWithinRadius,  // accept iff ||q_j - w_rival|| <= lambda * sigma
    kBeyondRadius,  // the inverted test, for experiments
};

struct AdmConfig {
    double lambda = 3.0;
    double c = 0.008;
    std::size_t min_buffer = 20;
    AffiliateCriterion affiliate_criterion = AffiliateCriterion::kWithinRadius;

    void validate() const;
};

/// Prototype and buffer grown from one affiliate device's accepted pairs.
struct AffiliateTrack {
    QueryVector w;
    std::vector<QueryAnswerPair> pairs;
};

/// Buffering-mode state for one novel pattern: the unconverged prototype,
/// its executed-query buffer and the affiliate buffers.
class AdaptationSession {
public:
    /// Prototype fixed at `w0`; buffers empty, gamma = 1.
    static AdaptationSession anchored(QueryVector w0);
    /// Prototype placed at `w0` until the first forwarded query replaces it.
    static AdaptationSession provisional(QueryVector w0);

    const QueryVector& w_new() const noexcept { return w_new_; }
    bool is_anchored() const noexcept { return anchored_; }
    const std::vector<QueryAnswerPair>& buffer() const noexcept { return buffer_; }
    const std::map<std::size_t, AffiliateTrack>& affiliates() const noexcept { return affiliates_; }
    std::size_t affiliate_pairs() const noexcept { return affiliate_pairs_; }
    double gamma() const noexcept { return gamma_; }
    double last_delta() const noexcept { return last_delta_; }

    /// Squared-distance variance of the buffer around w_new (0 when empty).
    ClusterStats current_stats() const;

    /// Appends (q, y) to the buffer and takes one sign step of w_new.
    void ingest_forwarded(std::span<const double> q, double y);

    /// Offers an affiliate pair; returns whether it was accepted.
    bool ingest_affiliate(std::size_t source, std::span<const double> q, double y, const Codebook& codebook,
                          const AdmConfig& cfg);

    /// Rebuild from serialized state.
    static AdaptationSession restore(QueryVector w_new, bool anchored, std::vector<QueryAnswerPair> buffer,
                                     std::map<std::size_t, AffiliateTrack> affiliates, double last_delta);

private:
    void refresh_gamma();

    QueryVector w_new_;
    bool anchored_ = true;
    std::vector<QueryAnswerPair> buffer_;
    std::map<std::size_t, AffiliateTrack> affiliates_;
    std::size_t affiliate_pairs_ = 0;
    double gamma_ = 1.0;
    double last_delta_ = 0.0;
};

/// Elementwise w <- w + gamma * sgn(q - w); returns the number of nonzero steps.
std::size_t sign_step(QueryVector& w, std::span<const double> q, double gamma);

/// ||q - w||_2 > lambda * sigma, with `sq_dist` the squared distance.
bool beyond_radius(double sq_dist, const ClusterStats& stats, double lambda);

enum class RouteKind { kForward, kLocal };

struct RouteDecision {
    RouteKind kind = RouteKind::kLocal;
    std::size_t serving = 0;  // codebook id answering a LOCAL query
    std::size_t rival = 0;  // codebook id of the second-closest prototype
    bool closest_is_new = false;
    bool rival_is_new = false;
};

/// Assignment over W plus w_new; w_new loses ties to existing prototypes.
RouteDecision should_forward(const Codebook& codebook, const AdaptationSession& session, std::span<const double> q,
                             const AdmConfig& cfg);

bool check_convergence(const AdaptationSession& session, const AdmConfig& cfg);

/// Mean squared residual on an every-fifth holdout of `pairs`; falls back to
/// the training residual for fewer than 10 pairs.
double estimate_epe(const ModelSpec& spec, std::span<const QueryAnswerPair> pairs);

struct FinalizeResult {
    std::vector<std::size_t> new_ids;
    std::vector<std::size_t> finalized_affiliates;  // source device ids
};

/// Trains the new cluster model (and one per affiliate with at least
/// min_buffer pairs) and appends prototypes, stats and models.
FinalizeResult finalize(const AdaptationSession& session, Codebook& codebook, std::vector<TrainedModel>& models,
                        const ModelSpec& spec, const AdmConfig& cfg);

}  // namespace qdaqp
