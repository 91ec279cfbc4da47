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

#include "qdaqp/adm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace qdaqp {

void AdmConfig::validate() const {
    if (!(lambda > 0.0) || !std::isfinite(lambda)) fail(ErrorKind::kConfig, "lambda must be positive");
    if (!(c > 0.0) || !std::isfinite(c)) fail(ErrorKind::kConfig, "convergence threshold c must be positive");
    if (min_buffer < 1) fail(ErrorKind::kConfig, "min_buffer must be >= 1");
}

AdaptationSession AdaptationSession::anchored(QueryVector w0) {
    AdaptationSession s;
    s.w_new_ = std::move(w0);
    s.anchored_ = true;
    return s;
}

AdaptationSession AdaptationSession::provisional(QueryVector w0) {
    AdaptationSession s = anchored(std::move(w0));
    s.anchored_ = false;
    return s;
}

AdaptationSession AdaptationSession::restore(QueryVector w_new, bool anchored, std::vector<QueryAnswerPair> buffer,
                                             std::map<std::size_t, AffiliateTrack> affiliates, double last_delta) {
    AdaptationSession s;
    s.w_new_ = std::move(w_new);
    s.anchored_ = anchored;
    s.buffer_ = std::move(buffer);
    s.affiliates_ = std::move(affiliates);
    for (const auto& [id, track] : s.affiliates_) s.affiliate_pairs_ += track.pairs.size();
    s.last_delta_ = last_delta;
    s.refresh_gamma();
    return s;
}

void AdaptationSession::refresh_gamma() {
    gamma_ = 1.0 / (1.0 + static_cast<double>(buffer_.size()) + static_cast<double>(affiliate_pairs_));
}

ClusterStats AdaptationSession::current_stats() const {
    ClusterStats st;
    st.member_count = buffer_.size();
    if (buffer_.empty()) return st;
    double sum = 0.0;
    double mind = std::numeric_limits<double>::infinity();
    for (const auto& p : buffer_) {
        const double d = query_distance(p.query, w_new_);
        sum += d;
        mind = std::min(mind, d);
    }
    st.variance = sum / static_cast<double>(buffer_.size());
    st.min_dist = mind;
    return st;
}

std::size_t sign_step(QueryVector& w, std::span<const double> q, double gamma) {
    if (w.size() != q.size()) fail(ErrorKind::kDimension, "sign step on vectors of different length");
    std::size_t moved = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        const double diff = q[i] - w[i];
        if (diff > 0.0) {
            w[i] += gamma;
            ++moved;
        } else if (diff < 0.0) {
            w[i] -= gamma;
            ++moved;
        }
    }
    return moved;
}

void AdaptationSession::ingest_forwarded(std::span<const double> q, double y) {
    if (q.size() != w_new_.size()) fail(ErrorKind::kDimension, "forwarded query length mismatch");
    buffer_.push_back({QueryVector(q.begin(), q.end()), y});
    if (!anchored_) {
        // The first executed query becomes the initial prototype.
        w_new_.assign(q.begin(), q.end());
        anchored_ = true;
        last_delta_ = 0.0;
    } else {
        const std::size_t moved = sign_step(w_new_, q, gamma_);
        last_delta_ = gamma_ * std::sqrt(static_cast<double>(moved));
    }
    refresh_gamma();
}

bool AdaptationSession::ingest_affiliate(std::size_t source, std::span<const double> q, double y,
                                         const Codebook& codebook, const AdmConfig& cfg) {
    if (q.size() != w_new_.size()) fail(ErrorKind::kDimension, "affiliate query length mismatch");
    if (codebook.empty()) fail(ErrorKind::kState, "affiliate check against an empty codebook");

    // Rival of q_j over W plus w_new.
    const Assignment a = codebook.assign(q);
    const double d_new = query_distance(q, w_new_);
    double rival_dist = 0.0;
    ClusterStats rival_stats;
    if (d_new < a.closest_dist) {
        rival_dist = a.closest_dist;
        rival_stats = codebook.stats(a.closest);
    } else if (!a.rival || d_new < a.rival_dist) {
        rival_dist = d_new;
        rival_stats = current_stats();
    } else {
        rival_dist = a.rival_dist;
        rival_stats = codebook.stats(*a.rival);
    }
    const bool outside = beyond_radius(rival_dist, rival_stats, cfg.lambda);
    const bool accept = cfg.affiliate_criterion == AffiliateCriterion::kWithinRadius ? !outside : outside;
    if (!accept) return false;

    auto [it, inserted] = affiliates_.try_emplace(source);
    AffiliateTrack& track = it->second;
    if (inserted) {
        track.w.assign(q.begin(), q.end());
    } else {
        sign_step(track.w, q, gamma_);
    }
    track.pairs.push_back({QueryVector(q.begin(), q.end()), y});
    ++affiliate_pairs_;
    refresh_gamma();
    return true;
}

bool beyond_radius(double sq_dist, const ClusterStats& stats, double lambda) {
    return std::sqrt(std::max(sq_dist, 0.0)) > lambda * stats.sigma();
}

RouteDecision should_forward(const Codebook& codebook, const AdaptationSession& session, std::span<const double> q,
                             const AdmConfig& cfg) {
    if (codebook.empty()) fail(ErrorKind::kState, "forwarding decision with an empty codebook");
    const Assignment a = codebook.assign(q);
    const double d_new = query_distance(q, session.w_new());
    RouteDecision r;
    if (d_new < a.closest_dist) {
        // w_new is closest; the nearest existing prototype is the rival.
        r.closest_is_new = true;
        r.rival = a.closest;
        r.serving = a.closest;
        r.kind = beyond_radius(a.closest_dist, codebook.stats(a.closest), cfg.lambda) ? RouteKind::kForward
                                                                                       : RouteKind::kLocal;
        return r;
    }
    r.kind = RouteKind::kLocal;
    r.serving = a.closest;
    if (a.rival && a.rival_dist <= d_new) {
        r.rival = *a.rival;
    } else {
        r.rival_is_new = true;
    }
    return r;
}

bool check_convergence(const AdaptationSession& session, const AdmConfig& cfg) {
    return session.buffer().size() >= cfg.min_buffer && session.last_delta() < cfg.c;
}

double estimate_epe(const ModelSpec& spec, std::span<const QueryAnswerPair> pairs) {
    if (pairs.empty()) fail(ErrorKind::kState, "EPE estimate on an empty buffer");
    if (pairs.size() < 10) return evaluate(train(spec, pairs), pairs).epe;
    std::vector<QueryAnswerPair> fit, hold;
    for (std::size_t i = 0; i < pairs.size(); ++i) (i % 5 == 4 ? hold : fit).push_back(pairs[i]);
    return evaluate(train(spec, fit), hold).epe;
}

namespace {

ClusterStats stats_around(const QueryVector& w, std::span<const QueryAnswerPair> pairs) {
    ClusterStats st;
    st.member_count = pairs.size();
    double sum = 0.0;
    double mind = std::numeric_limits<double>::infinity();
    for (const auto& p : pairs) {
        const double d = query_distance(p.query, w);
        sum += d;
        mind = std::min(mind, d);
    }
    st.variance = sum / static_cast<double>(pairs.size());
    st.min_dist = mind;
    return st;
}

}  // namespace

FinalizeResult finalize(const AdaptationSession& session, Codebook& codebook, std::vector<TrainedModel>& models,
                        const ModelSpec& spec, const AdmConfig& cfg) {
    if (!check_convergence(session, cfg)) fail(ErrorKind::kState, "finalize called before convergence");
    if (models.size() != codebook.size()) fail(ErrorKind::kState, "model set does not cover the codebook");

    FinalizeResult out;
    auto append = [&](const QueryVector& w, std::span<const QueryAnswerPair> pairs) {
        TrainedModel model = train(spec, pairs);
        ClusterStats st = stats_around(w, pairs);
        st.epe = estimate_epe(spec, pairs);
        out.new_ids.push_back(codebook.add(w, st));
        models.push_back(std::move(model));
    };

    append(session.w_new(), session.buffer());
    for (const auto& [source, track] : session.affiliates()) {
        if (track.pairs.size() < cfg.min_buffer) continue;
        append(track.w, track.pairs);
        out.finalized_affiliates.push_back(source);
    }
    return out;
}

}  // namespace qdaqp
