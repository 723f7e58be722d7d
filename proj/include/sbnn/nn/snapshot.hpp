/* Copyright 2026 The SBNN Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "sbnn/nn/network.hpp"

/// Trained networks as JSON: the layer stack plus every latent parameter and
/// batchnorm running statistic. Doubles round-trip exactly.
namespace sbnn::nn {

nlohmann::json to_json(const NetworkSpec& spec);
NetworkSpec spec_from_json(const nlohmann::json& j);

nlohmann::json snapshot_json(Network& net);
Network network_from_json(const nlohmann::json& j);

void save_snapshot(Network& net, const std::filesystem::path& path);
/// Throws ValidationError on malformed documents.
Network load_snapshot(const std::filesystem::path& path);

/// CRC-32 of the serialized snapshot, as 8 hex digits.
std::string snapshot_id(Network& net);

}  // namespace sbnn::nn
