/* Copyright 2026 The ALA-Net Authors. All Rights Reserved.

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

#ifndef ALANET_CONFIG_IO_HPP_
#define ALANET_CONFIG_IO_HPP_

#include <nlohmann/json.hpp>

#include "alanet/network.hpp"
#include "alanet/training.hpp"

// JSON mapping of the configuration records. Reading is strict: unknown keys
// and wrongly typed values raise ConfigError; absent keys keep their defaults.
namespace alanet {

void to_json(nlohmann::json& j, const ALANetConfig& c);
void from_json(const nlohmann::json& j, ALANetConfig& c);

void to_json(nlohmann::json& j, const AugmentConfig& c);
void from_json(const nlohmann::json& j, AugmentConfig& c);

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

// Parses JSON that may contain // and /* */ comments.
nlohmann::json parse_json_with_comments(const std::string& text, const std::string& origin);

}  // namespace alanet

#endif  // ALANET_CONFIG_IO_HPP_
