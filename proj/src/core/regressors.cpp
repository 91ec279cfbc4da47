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

#include "qdaqp/regressors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <queue>
#include <random>
#include <string>

#include <Eigen/Dense>

namespace qdaqp {

std::string_view to_string(ModelKind kind) noexcept {
    switch (kind) {
        case ModelKind::kRidge: return "RIDGE";
        case ModelKind::kSgdLinear: return "SGD_LINEAR";
        case ModelKind::kKnn: return "KNN";
    }
    return "?";
}

ModelKind parse_model_kind(std::string_view name) {
    std::string up(name);
    std::transform(up.begin(), up.end(), up.begin(), [](unsigned char c) { return std::toupper(c); });
    if (up == "RIDGE") return ModelKind::kRidge;
    if (up == "SGD_LINEAR" || up == "SGD") return ModelKind::kSgdLinear;
    if (up == "KNN") return ModelKind::kKnn;
    fail(ErrorKind::kConfig, "unknown model kind '" + std::string(name) + "'");
}

void ModelSpec::validate() const {
    switch (kind) {
        case ModelKind::kRidge:
            if (!(ridge_alpha >= 0.0) || !std::isfinite(ridge_alpha)) fail(ErrorKind::kConfig, "ridge alpha must be >= 0");
            break;
        case ModelKind::kSgdLinear:
            if (!(sgd_step > 0.0) || !std::isfinite(sgd_step)) fail(ErrorKind::kConfig, "sgd step must be positive");
            break;
        case ModelKind::kKnn:
            if (knn_k < 1) fail(ErrorKind::kConfig, "knn k must be >= 1");
            break;
    }
}

TrainedModel::TrainedModel(ModelSpec spec, std::size_t input_dim, std::variant<LinearParams, KnnParams> params)
    : spec_(spec), input_dim_(input_dim), params_(std::move(params)) {}

TrainedModel TrainedModel::linear(ModelSpec spec, std::vector<double> weights, double bias) {
    const std::size_t dim = weights.size();
    LinearParams p{std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0), std::move(weights), bias};
    return TrainedModel(spec, dim, std::move(p));
}

namespace {

double predict_linear(const LinearParams& p, std::span<const double> q) {
    double y = p.bias;
    for (std::size_t i = 0; i < q.size(); ++i) y += p.weights[i] * (q[i] - p.mean[i]) / p.scale[i];
    return y;
}

double predict_knn(const KnnParams& p, std::size_t k, std::span<const double> q) {
    // Max-heap of the k best (distance, index) pairs.
    std::priority_queue<std::pair<double, std::size_t>> heap;
    for (std::size_t i = 0; i < p.points.size(); ++i) {
        const double d = query_distance(q, p.points[i]);
        if (heap.size() < k) {
            heap.emplace(d, i);
        } else if (d < heap.top().first) {
            heap.pop();
            heap.emplace(d, i);
        }
    }
    double exact_sum = 0.0;
    std::size_t exact = 0;
    double wsum = 0.0, ysum = 0.0;
    while (!heap.empty()) {
        const auto [d2, i] = heap.top();
        heap.pop();
        if (d2 == 0.0) {
            exact_sum += p.targets[i];
            ++exact;
            continue;
        }
        const double w = 1.0 / std::sqrt(d2);
        wsum += w;
        ysum += w * p.targets[i];
    }
    if (exact > 0) return exact_sum / static_cast<double>(exact);
    return ysum / wsum;
}

struct Standardization {
    std::vector<double> mean;
    std::vector<double> scale;
};

Standardization standardize(std::span<const QueryAnswerPair> data, std::size_t dim) {
    Standardization s{std::vector<double>(dim, 0.0), std::vector<double>(dim, 0.0)};
    const double n = static_cast<double>(data.size());
    for (const auto& p : data) {
        for (std::size_t i = 0; i < dim; ++i) s.mean[i] += p.query[i];
    }
    for (auto& m : s.mean) m /= n;
    for (const auto& p : data) {
        for (std::size_t i = 0; i < dim; ++i) s.scale[i] += (p.query[i] - s.mean[i]) * (p.query[i] - s.mean[i]);
    }
    for (std::size_t i = 0; i < dim; ++i) {
        const double sd = std::sqrt(s.scale[i] / n);
        s.scale[i] = sd > 1e-12 * std::max(1.0, std::abs(s.mean[i])) ? sd : 1.0;
    }
    return s;
}

LinearParams train_ridge(const ModelSpec& spec, std::span<const QueryAnswerPair> data, std::size_t dim) {
    Standardization s = standardize(data, dim);
    const auto n = static_cast<Eigen::Index>(data.size());
    const auto m = static_cast<Eigen::Index>(dim);
    Eigen::MatrixXd x(n, m);
    Eigen::VectorXd y(n);
    for (Eigen::Index r = 0; r < n; ++r) {
        const auto& p = data[static_cast<std::size_t>(r)];
        for (Eigen::Index c = 0; c < m; ++c) {
            const auto i = static_cast<std::size_t>(c);
            x(r, c) = (p.query[i] - s.mean[i]) / s.scale[i];
        }
        y(r) = p.answer;
    }
    // Intercept stays unpenalized: center y, solve on centered features.
    const double y_mean = y.mean();
    y.array() -= y_mean;
    Eigen::MatrixXd gram = x.transpose() * x;
    gram.diagonal().array() += spec.ridge_alpha;
    const Eigen::VectorXd rhs = x.transpose() * y;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    if (ldlt.info() != Eigen::Success || ldlt.isNegative()) {
        fail(ErrorKind::kNumerical, "ridge normal equations could not be factorized");
    }
    // Exactly-zero pivots mean the system is singular (alpha == 0 with collinear features).
    const Eigen::VectorXd pivots = ldlt.vectorD();
    const double max_pivot = pivots.cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < pivots.size(); ++i) {
        if (std::abs(pivots(i)) <= 1e-12 * std::max(max_pivot, 1.0)) {
            fail(ErrorKind::kNumerical, "ridge normal equations are singular; use alpha > 0");
        }
    }
    const Eigen::VectorXd beta = ldlt.solve(rhs);
    if (!beta.allFinite()) fail(ErrorKind::kNumerical, "ridge solution is not finite");
    return LinearParams{std::move(s.mean), std::move(s.scale), std::vector<double>(beta.data(), beta.data() + m),
                        y_mean};
}

LinearParams train_sgd(const ModelSpec& spec, std::span<const QueryAnswerPair> data, std::size_t dim) {
    Standardization s = standardize(data, dim);
    LinearParams p{std::move(s.mean), std::move(s.scale), std::vector<double>(dim, 0.0), 0.0};
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(spec.sgd_seed);
    std::vector<double> z(dim);
    for (std::size_t epoch = 0; epoch < spec.sgd_epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) {
            std::uniform_int_distribution<std::size_t> pick(0, i - 1);
            std::swap(order[i - 1], order[pick(rng)]);
        }
        for (std::size_t idx : order) {
            const auto& pair = data[idx];
            double yhat = p.bias;
            for (std::size_t i = 0; i < dim; ++i) {
                z[i] = (pair.query[i] - p.mean[i]) / p.scale[i];
                yhat += p.weights[i] * z[i];
            }
            const double err = pair.answer - yhat;
            p.bias += spec.sgd_step * err;
            for (std::size_t i = 0; i < dim; ++i) p.weights[i] += spec.sgd_step * err * z[i];
        }
    }
    for (double w : p.weights) {
        if (!std::isfinite(w)) fail(ErrorKind::kNumerical, "sgd diverged; lower the step size");
    }
    return p;
}

}  // namespace

double TrainedModel::predict(std::span<const double> q) const {
    if (q.size() != input_dim_) {
        fail(ErrorKind::kDimension, "model expects " + std::to_string(input_dim_) + " inputs, got " +
                                        std::to_string(q.size()));
    }
    if (const auto* lin = std::get_if<LinearParams>(&params_)) return predict_linear(*lin, q);
    return predict_knn(std::get<KnnParams>(params_), spec_.knn_k, q);
}

std::pair<std::vector<double>, double> TrainedModel::input_space_coefficients() const {
    const auto* lin = std::get_if<LinearParams>(&params_);
    if (!lin) fail(ErrorKind::kState, "coefficients requested from a non-linear model");
    std::vector<double> w(lin->weights.size());
    double bias = lin->bias;
    for (std::size_t i = 0; i < w.size(); ++i) {
        w[i] = lin->weights[i] / lin->scale[i];
        bias -= w[i] * lin->mean[i];
    }
    return {std::move(w), bias};
}

TrainedModel train(const ModelSpec& spec, std::span<const QueryAnswerPair> data) {
    spec.validate();
    if (data.empty()) fail(ErrorKind::kState, "cannot train on an empty data set");
    const std::size_t dim = data.front().query.size();
    for (const auto& p : data) {
        if (p.query.size() != dim) fail(ErrorKind::kDimension, "training queries differ in length");
        if (!std::isfinite(p.answer)) fail(ErrorKind::kNumerical, "training answer is not finite");
    }
    switch (spec.kind) {
        case ModelKind::kRidge: return TrainedModel(spec, dim, train_ridge(spec, data, dim));
        case ModelKind::kSgdLinear: return TrainedModel(spec, dim, train_sgd(spec, data, dim));
        case ModelKind::kKnn: {
            KnnParams p;
            p.points.reserve(data.size());
            p.targets.reserve(data.size());
            for (const auto& pair : data) {
                p.points.push_back(pair.query);
                p.targets.push_back(pair.answer);
            }
            return TrainedModel(spec, dim, std::move(p));
        }
    }
    fail(ErrorKind::kConfig, "unhandled model kind");
}

double median_relative_error(std::span<const double> predicted, std::span<const double> truth, double eps_y) {
    if (predicted.size() != truth.size()) fail(ErrorKind::kDimension, "prediction/truth length mismatch");
    if (predicted.empty()) return 0.0;
    std::vector<double> rel(predicted.size());
    for (std::size_t i = 0; i < rel.size(); ++i) {
        rel[i] = std::abs(predicted[i] - truth[i]) / std::max(std::abs(truth[i]), eps_y);
    }
    const std::size_t mid = rel.size() / 2;
    std::nth_element(rel.begin(), rel.begin() + static_cast<std::ptrdiff_t>(mid), rel.end());
    if (rel.size() % 2 == 1) return rel[mid];
    const double upper = rel[mid];
    const double lower = *std::max_element(rel.begin(), rel.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

EvalReport evaluate(const TrainedModel& model, std::span<const QueryAnswerPair> test, double eps_y) {
    if (test.empty()) fail(ErrorKind::kState, "evaluation on an empty test set");
    std::vector<double> yhat(test.size()), y(test.size());
    double sq = 0.0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        yhat[i] = model.predict(test[i].query);
        y[i] = test[i].answer;
        sq += (yhat[i] - y[i]) * (yhat[i] - y[i]);
    }
    return {sq / static_cast<double>(test.size()), median_relative_error(yhat, y, eps_y), test.size()};
}

double ensemble_predict(const Codebook& codebook, std::span<const TrainedModel> models, std::span<const double> q) {
    if (models.size() != codebook.size()) {
        fail(ErrorKind::kState, std::to_string(models.size()) + " models for " + std::to_string(codebook.size()) +
                                    " representatives");
    }
    return models[codebook.assign(q).closest].predict(q);
}

}  // namespace qdaqp
