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

#include "qdaqp/engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <random>

namespace qdaqp {

void EngineConfig::validate() const {
    model.validate();
    adm.validate();
    if (!(holdout_fraction > 0.0 && holdout_fraction < 1.0)) {
        fail(ErrorKind::kConfig, "holdout fraction must lie in (0, 1)");
    }
    if (!(cdm.h_multiplier > 0.0)) fail(ErrorKind::kConfig, "h multiplier must be positive");
    if (!(quantizer.learn_rate > 0.0 && quantizer.learn_rate < 1.0)) {
        fail(ErrorKind::kConfig, "quantizer learn rate must lie in (0, 1)");
    }
}

std::string_view to_string(EngineMode mode) noexcept {
    return mode == EngineMode::kPrediction ? "PREDICTION" : "BUFFERING";
}

std::string_view to_string(Provenance p) noexcept { return p == Provenance::kPredicted ? "PREDICTED" : "EXECUTED"; }

namespace {

std::vector<double> fallback_scales(const std::vector<Interval>& domain) {
    std::vector<double> s;
    s.reserve(2 * domain.size());
    for (const auto& iv : domain) {
        const double w = std::max(iv.width(), 1e-12);
        s.push_back(w);
        s.push_back(w);
    }
    return s;
}

/// Drops prototypes that own no training query and recomputes stats.
Codebook compact(const Codebook& cb, std::span<const QueryVector> queries) {
    Codebook out(cb.dim());
    for (std::size_t k = 0; k < cb.size(); ++k) {
        if (cb.stats(k).member_count > 0) out.add(cb.prototype(k));
    }
    out.refresh_stats(queries);
    return out;
}

}  // namespace

AnalystDevice AnalystDevice::bootstrap(std::span<const LabeledQuery> training, std::vector<Interval> domain,
                                       const EngineConfig& cfg) {
    cfg.validate();
    if (domain.empty()) fail(ErrorKind::kConfig, "bootstrap needs a non-empty domain");
    if (training.size() < 10) fail(ErrorKind::kConfig, "bootstrap needs at least 10 training queries");

    AnalystDevice dev;
    dev.cfg_ = cfg;
    dev.domain_ = std::move(domain);

    std::vector<std::size_t> order(training.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(cfg.seed);
    for (std::size_t i = order.size(); i > 1; --i) {
        std::uniform_int_distribution<std::size_t> pick(0, i - 1);
        std::swap(order[i - 1], order[pick(rng)]);
    }
    const auto n_hold = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(cfg.holdout_fraction * static_cast<double>(training.size()))));
    const std::size_t n_train = training.size() - n_hold;

    std::vector<QueryVector> raw_train;
    raw_train.reserve(n_train);
    for (std::size_t i = 0; i < n_train; ++i) raw_train.push_back(vectorize(training[order[i]].query, dev.domain_));
    dev.scaler_ = QueryScaler::fit(raw_train, fallback_scales(dev.domain_));

    std::vector<QueryAnswerPair> train_pairs, hold_pairs;
    std::vector<QueryVector> train_vecs;
    for (std::size_t i = 0; i < training.size(); ++i) {
        const LabeledQuery& lq = training[order[i]];
        QueryAnswerPair p{dev.scaler_.apply(vectorize(lq.query, dev.domain_)), lq.answer};
        if (i < n_train) {
            train_vecs.push_back(p.query);
            train_pairs.push_back(std::move(p));
        } else {
            hold_pairs.push_back(std::move(p));
        }
    }

    dev.codebook_ = compact(fit_online(train_vecs, cfg.quantizer), train_vecs);
    const auto parts = partition(dev.codebook_, train_pairs);
    dev.models_.reserve(parts.size());
    for (const auto& part : parts) dev.models_.push_back(train(cfg.model, part));

    // Per-cluster EPE from held-out residuals.
    std::vector<double> sq(dev.codebook_.size(), 0.0);
    std::vector<std::size_t> cnt(dev.codebook_.size(), 0);
    for (const auto& p : hold_pairs) {
        const std::size_t k = dev.codebook_.assign(p.query).closest;
        const double r = dev.models_[k].predict(p.query) - p.answer;
        sq[k] += r * r;
        ++cnt[k];
    }
    for (std::size_t k = 0; k < dev.codebook_.size(); ++k) {
        dev.codebook_.stats(k).epe =
            cnt[k] ? sq[k] / static_cast<double>(cnt[k]) : estimate_epe(cfg.model, parts[k]);
    }

    for (const auto& p : hold_pairs) dev.calibration_.push_back(p.query);
    dev.detector_ = calibrate(dev.codebook_, dev.calibration_, cfg.cdm);
    return dev;
}

QueryVector AnalystDevice::embed(const RangeQuery& query) const { return scaler_.apply(vectorize(query, domain_)); }

double AnalystDevice::predict(const RangeQuery& query) const {
    return ensemble_predict(codebook_, models_, embed(query));
}

AnswerResult AnalystDevice::answer(const RangeQuery& query, const Oracle& oracle, std::optional<double> y_true) {
    if (codebook_.empty() || models_.size() != codebook_.size()) {
        fail(ErrorKind::kState, "device is not initialized");
    }
    const QueryVector v = embed(query);
    QueryRecord rec;
    rec.t = t_;
    rec.y_true = y_true;
    AnswerResult result;

    if (mode_ == EngineMode::kPrediction) {
        const Assignment a = codebook_.assign(v);
        const double y_hat = models_[a.closest].predict(v);
        const double u = distance_error(a.closest_dist, codebook_.stats(a.closest), cfg_.cdm.form);
        const StepResult step = detector_.step(u);
        rec.mode = EngineMode::kPrediction;
        rec.y_hat = y_hat;
        rec.u_tilde = u;
        rec.g = step.g;
        rec.serving = a.closest;
        rec.drift = step.drift;
        result = {y_hat, Provenance::kPredicted};
        if (step.drift && cfg_.adapt) {
            session_ = AdaptationSession::provisional(v);
            mode_ = EngineMode::kBuffering;
            current_ = SessionSummary{};
            current_.opened_at = t_;
            current_.k_before = codebook_.size();
            // The triggering query goes through the buffering route as well.
            result = answer_buffering(query, v, oracle, rec);
        }
    } else {
        result = answer_buffering(query, v, oracle, rec);
    }
    rec.k = codebook_.size();
    log_.push_back(rec);
    ++t_;
    return result;
}

AnswerResult AnalystDevice::answer_buffering(const RangeQuery& query, const QueryVector& v, const Oracle& oracle,
                                             QueryRecord& rec) {
    rec.mode = EngineMode::kBuffering;
    const RouteDecision route = should_forward(codebook_, *session_, v, cfg_.adm);
    AnswerResult result;
    if (route.kind == RouteKind::kForward) {
        double y = 0.0;
        try {
            y = oracle(query);
        } catch (...) {
            retry_.push_back(query);
            throw;
        }
        ++oracle_calls_;
        session_->ingest_forwarded(v, y);
        ++current_.forwarded;
        result = {y, Provenance::kExecuted};
        rec.serving = codebook_.size();
    } else {
        result = {models_[route.serving].predict(v), Provenance::kPredicted};
        rec.serving = route.serving;
    }
    rec.provenance = result.provenance;
    rec.y_hat = result.value;
    rec.g = detector_.g();
    if (check_convergence(*session_, cfg_.adm)) finish_session(rec);
    return result;
}

void AnalystDevice::finish_session(QueryRecord& rec) {
    const FinalizeResult fr = finalize(*session_, codebook_, models_, cfg_.model, cfg_.adm);
    for (const auto& p : session_->buffer()) calibration_.push_back(p.query);
    for (std::size_t src : fr.finalized_affiliates) {
        for (const auto& p : session_->affiliates().at(src).pairs) calibration_.push_back(p.query);
    }
    recalibrate();
    detector_.reset();

    current_.closed_at = t_;
    current_.affiliate_pairs = session_->affiliate_pairs();
    current_.k_after = codebook_.size();
    sessions_.push_back(current_);
    session_.reset();
    mode_ = EngineMode::kPrediction;
    rec.finalized = true;
}

bool AnalystDevice::offer_affiliate(std::size_t source, const RangeQuery& query, double y) {
    if (mode_ != EngineMode::kBuffering || !session_) return false;
    if (std::find(current_.affiliate_sources.begin(), current_.affiliate_sources.end(), source) ==
        current_.affiliate_sources.end()) {
        current_.affiliate_sources.push_back(source);
    }
    return session_->ingest_affiliate(source, embed(query), y, codebook_, cfg_.adm);
}

void AnalystDevice::recalibrate() {
    try {
        CusumDetector fresh = calibrate(codebook_, calibration_, cfg_.cdm);
        detector_ = fresh;
    } catch (const Error& e) {
        // A degenerate refit keeps the previous distributions.
        if (e.kind() != ErrorKind::kDegenerate) throw;
    }
}

void AnalystDevice::set_h_multiplier(double multiplier) {
    if (!(multiplier > 0.0)) fail(ErrorKind::kConfig, "h multiplier must be positive");
    cfg_.cdm.h_multiplier = multiplier;
    detector_.set_h(multiplier * detector_.sigma_u());
}

void AnalystDevice::clear_history() {
    log_.clear();
    sessions_.clear();
    retry_.clear();
    oracle_calls_ = 0;
}

void AnalystDevice::write_metrics_csv(std::ostream& out) const {
    out << "t,mode,provenance,y_hat,y_true,u_tilde,G,K\n";
    char buf[64];
    for (const auto& r : log_) {
        out << r.t << ',' << to_string(r.mode) << ',' << to_string(r.provenance) << ',';
        std::snprintf(buf, sizeof(buf), "%.17g", r.y_hat);
        out << buf << ',';
        if (r.y_true) {
            std::snprintf(buf, sizeof(buf), "%.17g", *r.y_true);
            out << buf;
        }
        std::snprintf(buf, sizeof(buf), ",%.17g,%.17g,", r.u_tilde, r.g);
        out << buf << r.k << '\n';
    }
}

AnalystDevice AnalystDevice::assemble(EngineConfig cfg, std::vector<Interval> domain, QueryScaler scaler,
                                      Codebook codebook, std::vector<TrainedModel> models, CusumDetector detector,
                                      std::vector<QueryVector> calibration, EngineMode mode,
                                      std::optional<AdaptationSession> session, std::size_t t) {
    cfg.validate();
    if (models.size() != codebook.size()) fail(ErrorKind::kState, "model set does not cover the codebook");
    if ((mode == EngineMode::kBuffering) != session.has_value()) {
        fail(ErrorKind::kState, "session must be present exactly when buffering");
    }
    if (scaler.dim() != 2 * domain.size() || codebook.dim() != scaler.dim()) {
        fail(ErrorKind::kDimension, "device parts disagree on query dimensionality");
    }
    AnalystDevice dev;
    dev.cfg_ = cfg;
    dev.domain_ = std::move(domain);
    dev.scaler_ = std::move(scaler);
    dev.codebook_ = std::move(codebook);
    dev.models_ = std::move(models);
    dev.detector_ = detector;
    dev.calibration_ = std::move(calibration);
    dev.mode_ = mode;
    dev.session_ = std::move(session);
    dev.t_ = t;
    if (dev.session_) {
        dev.current_.opened_at = t;
        dev.current_.k_before = dev.codebook_.size();
    }
    return dev;
}

}  // namespace qdaqp
