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

#include "qdaqp/serialization.hpp"

namespace qdaqp {

using nlohmann::json;

namespace {

void check_header(const json& j, const char* kind) {
    if (!j.is_object() || j.value("format", std::string{}) != kind) {
        fail(ErrorKind::kIo, std::string("document is not a '") + kind + "' record");
    }
    if (j.value("version", 0) != kFormatVersion) {
        fail(ErrorKind::kIo, std::string("unsupported ") + kind + " version");
    }
}

json stats_to_json(const ClusterStats& s) {
    return {{"member_count", s.member_count}, {"variance", s.variance}, {"min_dist", s.min_dist}, {"epe", s.epe}};
}

ClusterStats stats_from_json(const json& j) {
    return {j.at("member_count").get<std::size_t>(), j.at("variance").get<double>(), j.at("min_dist").get<double>(),
            j.at("epe").get<double>()};
}

json spec_to_json(const ModelSpec& s) {
    return {{"kind", std::string(to_string(s.kind))},
            {"ridge_alpha", s.ridge_alpha},
            {"sgd_step", s.sgd_step},
            {"sgd_epochs", s.sgd_epochs},
            {"sgd_seed", s.sgd_seed},
            {"knn_k", s.knn_k}};
}

ModelSpec spec_from_json(const json& j) {
    ModelSpec s;
    s.kind = parse_model_kind(j.at("kind").get<std::string>());
    s.ridge_alpha = j.at("ridge_alpha").get<double>();
    s.sgd_step = j.at("sgd_step").get<double>();
    s.sgd_epochs = j.at("sgd_epochs").get<std::size_t>();
    s.sgd_seed = j.at("sgd_seed").get<std::uint64_t>();
    s.knn_k = j.at("knn_k").get<std::size_t>();
    s.validate();
    return s;
}

json gamma_to_json(const GammaParams& g) { return {{"scale", g.scale}, {"shape", g.shape}}; }
GammaParams gamma_from_json(const json& j) { return {j.at("scale").get<double>(), j.at("shape").get<double>()}; }

json pairs_to_json(const std::vector<QueryAnswerPair>& pairs) {
    json arr = json::array();
    for (const auto& p : pairs) arr.push_back({{"q", p.query}, {"y", p.answer}});
    return arr;
}

std::vector<QueryAnswerPair> pairs_from_json(const json& j) {
    std::vector<QueryAnswerPair> out;
    for (const auto& e : j) out.push_back({e.at("q").get<QueryVector>(), e.at("y").get<double>()});
    return out;
}

json engine_config_to_json(const EngineConfig& c) {
    return {{"quantizer",
             {{"vigilance", c.quantizer.vigilance},
              {"learn_rate", c.quantizer.learn_rate},
              {"vigilance_quantile", c.quantizer.vigilance_quantile},
              {"bootstrap_sample", c.quantizer.bootstrap_sample},
              {"seed", c.quantizer.seed}}},
            {"model", spec_to_json(c.model)},
            {"cdm",
             {{"h_multiplier", c.cdm.h_multiplier},
              {"form", c.cdm.form == DistanceErrorForm::kScaledLog ? "scaled_log" : "inside_log"}}},
            {"adm",
             {{"lambda", c.adm.lambda},
              {"c", c.adm.c},
              {"min_buffer", c.adm.min_buffer},
              {"affiliate_criterion",
               c.adm.affiliate_criterion == AffiliateCriterion::kWithinRadius ? "within" : "beyond"}}},
            {"holdout_fraction", c.holdout_fraction},
            {"seed", c.seed},
            {"adapt", c.adapt}};
}

EngineConfig engine_config_from_json(const json& j) {
    EngineConfig c;
    const json& q = j.at("quantizer");
    c.quantizer.vigilance = q.at("vigilance").get<double>();
    c.quantizer.learn_rate = q.at("learn_rate").get<double>();
    c.quantizer.vigilance_quantile = q.at("vigilance_quantile").get<double>();
    c.quantizer.bootstrap_sample = q.at("bootstrap_sample").get<std::size_t>();
    c.quantizer.seed = q.at("seed").get<std::uint64_t>();
    c.model = spec_from_json(j.at("model"));
    c.cdm.h_multiplier = j.at("cdm").at("h_multiplier").get<double>();
    c.cdm.form = j.at("cdm").at("form").get<std::string>() == "inside_log" ? DistanceErrorForm::kInsideLog
                                                                           : DistanceErrorForm::kScaledLog;
    const json& a = j.at("adm");
    c.adm.lambda = a.at("lambda").get<double>();
    c.adm.c = a.at("c").get<double>();
    c.adm.min_buffer = a.at("min_buffer").get<std::size_t>();
    c.adm.affiliate_criterion = a.at("affiliate_criterion").get<std::string>() == "beyond"
                                    ? AffiliateCriterion::kBeyondRadius
                                    : AffiliateCriterion::kWithinRadius;
    c.holdout_fraction = j.at("holdout_fraction").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.adapt = j.at("adapt").get<bool>();
    return c;
}

template <typename F>
auto guarded(const char* what, F&& f) {
    try {
        return f();
    } catch (const json::exception& e) {
        fail(ErrorKind::kIo, std::string("malformed ") + what + ": " + e.what());
    }
}

}  // namespace

json codebook_to_json(const Codebook& codebook) {
    json reps = json::array();
    for (std::size_t k = 0; k < codebook.size(); ++k) {
        reps.push_back({{"id", k}, {"w", codebook.prototype(k)}, {"stats", stats_to_json(codebook.stats(k))}});
    }
    return {{"format", "qdaqp-codebook"}, {"version", kFormatVersion}, {"dim", codebook.dim()}, {"representatives", reps}};
}

Codebook codebook_from_json(const json& j) {
    check_header(j, "qdaqp-codebook");
    return guarded("codebook", [&] {
        Codebook cb(j.at("dim").get<std::size_t>());
        for (const auto& r : j.at("representatives")) {
            if (r.at("id").get<std::size_t>() != cb.size()) fail(ErrorKind::kIo, "codebook ids are not dense");
            cb.add(r.at("w").get<QueryVector>(), stats_from_json(r.at("stats")));
        }
        return cb;
    });
}

json model_to_json(const TrainedModel& model) {
    json j = {{"format", "qdaqp-model"},
              {"version", kFormatVersion},
              {"spec", spec_to_json(model.spec())},
              {"input_dim", model.input_dim()}};
    if (const auto* lin = std::get_if<LinearParams>(&model.params())) {
        j["linear"] = {{"mean", lin->mean}, {"scale", lin->scale}, {"weights", lin->weights}, {"bias", lin->bias}};
    } else {
        const auto& knn = std::get<KnnParams>(model.params());
        j["knn"] = {{"points", knn.points}, {"targets", knn.targets}};
    }
    return j;
}

TrainedModel model_from_json(const json& j) {
    check_header(j, "qdaqp-model");
    return guarded("model", [&] {
        ModelSpec spec = spec_from_json(j.at("spec"));
        const auto dim = j.at("input_dim").get<std::size_t>();
        if (j.contains("linear")) {
            const json& l = j.at("linear");
            LinearParams p{l.at("mean").get<std::vector<double>>(), l.at("scale").get<std::vector<double>>(),
                           l.at("weights").get<std::vector<double>>(), l.at("bias").get<double>()};
            if (p.mean.size() != dim || p.scale.size() != dim || p.weights.size() != dim) {
                fail(ErrorKind::kIo, "linear model parameter length mismatch");
            }
            return TrainedModel(spec, dim, std::move(p));
        }
        const json& k = j.at("knn");
        KnnParams p{k.at("points").get<std::vector<QueryVector>>(), k.at("targets").get<std::vector<double>>()};
        if (p.points.size() != p.targets.size() || p.points.empty()) {
            fail(ErrorKind::kIo, "knn model point/target mismatch");
        }
        return TrainedModel(spec, dim, std::move(p));
    });
}

std::size_t model_size_bytes(const TrainedModel& model) { return model_to_json(model).dump().size(); }

json device_to_json(const AnalystDevice& device) {
    json models = json::array();
    for (const auto& m : device.models()) models.push_back(model_to_json(m));
    json domain = json::array();
    for (const auto& iv : device.domain()) domain.push_back({iv.lo, iv.hi});
    const CusumDetector& det = device.detector();
    json detector = {{"p0", gamma_to_json(det.p0())},
                     {"p1", gamma_to_json(det.p1())},
                     {"sigma_u", det.sigma_u()},
                     {"h", det.h()},
                     {"g", det.g()},
                     {"t", det.t()},
                     {"t_detect", det.detection_time() ? json(*det.detection_time()) : json(nullptr)},
                     {"cum", det.cumulative()},
                     {"cum_min", det.cumulative_min()},
                     {"t_star", det.change_time_estimate()}};
    json j = {{"format", "qdaqp-device"},
              {"version", kFormatVersion},
              {"config", engine_config_to_json(device.config())},
              {"domain", domain},
              {"scaler", {{"mean", device.scaler().mean()}, {"scale", device.scaler().scale()}}},
              {"codebook", codebook_to_json(device.codebook())},
              {"models", models},
              {"detector", detector},
              {"calibration", device.calibration_queries()},
              {"mode", std::string(to_string(device.mode()))},
              {"t", device.time()}};
    if (const auto& s = device.session()) {
        json affiliates = json::array();
        for (const auto& [src, track] : s->affiliates()) {
            affiliates.push_back({{"source", src}, {"w", track.w}, {"pairs", pairs_to_json(track.pairs)}});
        }
        j["session"] = {{"w_new", s->w_new()},
                        {"anchored", s->is_anchored()},
                        {"buffer", pairs_to_json(s->buffer())},
                        {"affiliates", affiliates},
                        {"last_delta", s->last_delta()}};
    }
    return j;
}

AnalystDevice device_from_json(const json& j) {
    check_header(j, "qdaqp-device");
    return guarded("device", [&] {
        EngineConfig cfg = engine_config_from_json(j.at("config"));
        std::vector<Interval> domain;
        for (const auto& iv : j.at("domain")) domain.push_back({iv.at(0).get<double>(), iv.at(1).get<double>()});
        QueryScaler scaler(j.at("scaler").at("mean").get<std::vector<double>>(),
                           j.at("scaler").at("scale").get<std::vector<double>>());
        Codebook cb = codebook_from_json(j.at("codebook"));
        std::vector<TrainedModel> models;
        for (const auto& m : j.at("models")) models.push_back(model_from_json(m));
        const json& d = j.at("detector");
        CusumDetector det(gamma_from_json(d.at("p0")), gamma_from_json(d.at("p1")), d.at("sigma_u").get<double>(),
                          d.at("h").get<double>());
        std::optional<std::size_t> t_detect;
        if (!d.at("t_detect").is_null()) t_detect = d.at("t_detect").get<std::size_t>();
        det.restore(d.at("g").get<double>(), d.at("t").get<std::size_t>(), t_detect, d.at("cum").get<double>(),
                    d.at("cum_min").get<double>(), d.at("t_star").get<std::size_t>());
        const EngineMode mode =
            j.at("mode").get<std::string>() == "BUFFERING" ? EngineMode::kBuffering : EngineMode::kPrediction;
        std::optional<AdaptationSession> session;
        if (j.contains("session")) {
            const json& s = j.at("session");
            std::map<std::size_t, AffiliateTrack> affiliates;
            for (const auto& a : s.at("affiliates")) {
                affiliates[a.at("source").get<std::size_t>()] =
                    AffiliateTrack{a.at("w").get<QueryVector>(), pairs_from_json(a.at("pairs"))};
            }
            session = AdaptationSession::restore(s.at("w_new").get<QueryVector>(), s.at("anchored").get<bool>(),
                                                 pairs_from_json(s.at("buffer")), std::move(affiliates),
                                                 s.at("last_delta").get<double>());
        }
        return AnalystDevice::assemble(cfg, std::move(domain), std::move(scaler), std::move(cb), std::move(models),
                                       det, j.at("calibration").get<std::vector<QueryVector>>(), mode,
                                       std::move(session), j.at("t").get<std::size_t>());
    });
}

std::string dump_device(const AnalystDevice& device) { return device_to_json(device).dump(); }

AnalystDevice load_device(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        fail(ErrorKind::kIo, std::string("device document is not valid JSON: ") + e.what());
    }
    return device_from_json(j);
}

}  // namespace qdaqp
