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
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "qdaqp/datamodel.hpp"
#include "qdaqp/quantizer.hpp"

namespace qdaqp {

enum class ModelKind { kRidge, kSgdLinear, kKnn };

std::string_view to_string(ModelKind kind) noexcept;
ModelKind parse_model_kind(std::string_view name);

struct ModelSpec {
    ModelKind kind = ModelKind::kKnn;
    double ridge_alpha = 1.0;
    double sgd_step = 0.01;
    std::size_t sgd_epochs = 20;
    std::uint64_t sgd_seed = 0;
    std::size_t knn_k = 5;

    void validate() const;
    bool operator==(const ModelSpec&) const = default;
};

/// Affine model on standardized inputs: y = bias + sum_i weight_i * (x_i - mean_i) / scale_i.
struct LinearParams {
    std::vector<double> mean;
    std::vector<double> scale;
    std::vector<double> weights;
    double bias = 0.0;
};

/// Distance-weighted k nearest neighbours over the stored training set.
struct KnnParams {
    std::vector<QueryVector> points;
    std::vector<double> targets;
};

class TrainedModel {
public:
    TrainedModel() = default;
    TrainedModel(ModelSpec spec, std::size_t input_dim, std::variant<LinearParams, KnnParams> params);

    /// Linear model in input units with an identity standardization.
    static TrainedModel linear(ModelSpec spec, std::vector<double> weights, double bias);

    const ModelSpec& spec() const noexcept { return spec_; }
    std::size_t input_dim() const noexcept { return input_dim_; }
    const std::variant<LinearParams, KnnParams>& params() const noexcept { return params_; }

    double predict(std::span<const double> q) const;

    /// Weights and bias expressed in input units (linear kinds only).
    std::pair<std::vector<double>, double> input_space_coefficients() const;

private:
    ModelSpec spec_;
    std::size_t input_dim_ = 0;
    std::variant<LinearParams, KnnParams> params_;
};

TrainedModel train(const ModelSpec& spec, std::span<const QueryAnswerPair> data);

inline double predict(const TrainedModel& model, std::span<const double> q) { return model.predict(q); }

struct EvalReport {
    double epe = 0.0;             // mean squared residual
    double median_rel_err = 0.0;  // median |yhat - y| / max(|y|, eps_y)
    std::size_t n_test = 0;
};

/// Median of |yhat - y| / max(|y|, eps_y) over parallel spans.
double median_relative_error(std::span<const double> predicted, std::span<const double> truth, double eps_y = 1.0);

EvalReport evaluate(const TrainedModel& model, std::span<const QueryAnswerPair> test, double eps_y = 1.0);

/// Routes q to the model of its closest prototype.
double ensemble_predict(const Codebook& codebook, std::span<const TrainedModel> models, std::span<const double> q);

}  // namespace qdaqp
