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

#include <string>

#include <json.hpp>

#include "qdaqp/engine.hpp"

// Versioned JSON documents for shipping codebooks, models and whole devices.
namespace qdaqp {

inline constexpr int kFormatVersion = 1;

nlohmann::json codebook_to_json(const Codebook& codebook);
Codebook codebook_from_json(const nlohmann::json& j);

nlohmann::json model_to_json(const TrainedModel& model);
TrainedModel model_from_json(const nlohmann::json& j);

/// Size of the model's compact JSON encoding.
std::size_t model_size_bytes(const TrainedModel& model);

nlohmann::json device_to_json(const AnalystDevice& device);
AnalystDevice device_from_json(const nlohmann::json& j);

std::string dump_device(const AnalystDevice& device);
AnalystDevice load_device(const std::string& text);

}  // namespace qdaqp
