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
#include <deque>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "qdaqp/adm.hpp"
#include "qdaqp/cdm.hpp"
#include "qdaqp/datamodel.hpp"
#include "qdaqp/quantizer.hpp"
#include "qdaqp/regressors.hpp"
#include "qdaqp/workloads.hpp"

namespace qdaqp {

struct EngineConfig {
    QuantizerConfig quantizer;
    ModelSpec model;
    CdmConfig cdm;
    AdmConfig adm;
    double holdout_fraction = 0.2;
    std::uint64_t seed = 0;
    /// When false the detector still runs but drift never opens a session.
    bool adapt = true;

    void validate() const;
};

enum class EngineMode { kPrediction, kBuffering };
enum class Provenance { kPredicted, kExecuted };

std::string_view to_string(EngineMode mode) noexcept;
std::string_view to_string(Provenance p) noexcept;

/// One line of the per-query metric log.
struct QueryRecord {
    std::size_t t = 0;
    EngineMode mode = EngineMode::kPrediction;  // mode the query was answered in
    Provenance provenance = Provenance::kPredicted;
    double y_hat = 0.0;
    std::optional<double> y_true;
    double u_tilde = 0.0;
    double g = 0.0;
    std::size_t k = 0;        // codebook size after the call
    std::size_t serving = 0;  // id of the answering representative (or the closest one)
    bool drift = false;       // detector fired on this query
    bool finalized = false;   // a session finished on this query
};

struct AnswerResult {
    double value = 0.0;
    Provenance provenance = Provenance::kPredicted;
};

/// Exact execution at the central system.
using Oracle = std::function<double(const RangeQuery&)>;

/// One completed buffering cycle.
struct SessionSummary {
    std::size_t opened_at = 0;
    std::size_t closed_at = 0;
    std::size_t forwarded = 0;
    std::size_t affiliate_pairs = 0;
    std::size_t k_before = 0;
    std::size_t k_after = 0;
    std::vector<std::size_t> affiliate_sources;
};

/// Analyst-device facade: predicts in PREDICTION mode, watches the detector,
/// and runs an adaptation session while BUFFERING.
class AnalystDevice {
public:
    AnalystDevice() = default;

    /// Shuffles and splits `training` (holdout_fraction held out), fits the
    /// query scaler and quantizer on the training part, trains one model per
    /// cluster, estimates per-cluster EPE on the held-out part and calibrates
    /// the detector on it.
    static AnalystDevice bootstrap(std::span<const LabeledQuery> training, std::vector<Interval> domain,
                                   const EngineConfig& cfg);

    AnswerResult answer(const RangeQuery& query, const Oracle& oracle, std::optional<double> y_true = std::nullopt);

    /// Offers a pair executed for another device; only used while buffering.
    bool offer_affiliate(std::size_t source, const RangeQuery& query, double y);

    EngineMode mode() const noexcept { return mode_; }
    const Codebook& codebook() const noexcept { return codebook_; }
    const std::vector<TrainedModel>& models() const noexcept { return models_; }
    const CusumDetector& detector() const noexcept { return detector_; }
    const std::optional<AdaptationSession>& session() const noexcept { return session_; }
    const QueryScaler& scaler() const noexcept { return scaler_; }
    const std::vector<Interval>& domain() const noexcept { return domain_; }
    const EngineConfig& config() const noexcept { return cfg_; }
    EngineConfig& mutable_config() noexcept { return cfg_; }
    const std::vector<QueryRecord>& log() const noexcept { return log_; }
    const std::vector<SessionSummary>& sessions() const noexcept { return sessions_; }
    const std::deque<RangeQuery>& retry_queue() const noexcept { return retry_; }
    const std::vector<QueryVector>& calibration_queries() const noexcept { return calibration_; }
    std::size_t oracle_calls() const noexcept { return oracle_calls_; }

    /// Query vector in the device's (scaled) query space.
    QueryVector embed(const RangeQuery& query) const;
    /// Eq. 1 style dispatch without touching detector or log.
    double predict(const RangeQuery& query) const;

    /// Refits the detector on the stored calibration queries.
    void recalibrate();
    /// Clears the per-query log, session summaries and counters.
    void clear_history();
    /// Zeroes the CUSUM statistic without refitting.
    void reset_detector() { detector_.reset(); }
    /// Sets h = multiplier * sigma_u for the current and future detectors.
    void set_h_multiplier(double multiplier);
    /// Summary of the open session (meaningful only while buffering).
    const SessionSummary& current_session() const noexcept { return current_; }

    void write_metrics_csv(std::ostream& out) const;

    /// Assembles a device from deserialized parts.
    static AnalystDevice assemble(EngineConfig cfg, std::vector<Interval> domain, QueryScaler scaler,
                                  Codebook codebook, std::vector<TrainedModel> models, CusumDetector detector,
                                  std::vector<QueryVector> calibration, EngineMode mode,
                                  std::optional<AdaptationSession> session, std::size_t t);

    std::size_t time() const noexcept { return t_; }

private:
    AnswerResult answer_buffering(const RangeQuery& query, const QueryVector& v, const Oracle& oracle,
                                  QueryRecord& rec);
    void finish_session(QueryRecord& rec);

    EngineConfig cfg_;
    std::vector<Interval> domain_;
    QueryScaler scaler_;
    Codebook codebook_;
    std::vector<TrainedModel> models_;
    CusumDetector detector_;
    std::vector<QueryVector> calibration_;
    EngineMode mode_ = EngineMode::kPrediction;
    std::optional<AdaptationSession> session_;
    SessionSummary current_;
    std::vector<SessionSummary> sessions_;
    std::vector<QueryRecord> log_;
    std::deque<RangeQuery> retry_;
    std::size_t t_ = 0;
    std::size_t oracle_calls_ = 0;
};

}  // namespace qdaqp
