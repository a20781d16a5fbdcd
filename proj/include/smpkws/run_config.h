// Copyright 2026 The smpkws Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "smpkws/data.h"
#include "smpkws/eval.h"
#include "smpkws/frontend.h"
#include "smpkws/train.h"

namespace smpkws {

// Everything a run needs. train.model and train.loss are the model and loss
// sections; loss K, synth K and feature dim follow the model.
struct RunConfig {
  std::string name;
  FrontendConfig frontend;
  TrainConfig train;
  SynthConfig synth;
  EvalConfig eval;

  void Validate() const;
};

nlohmann::json RunConfigToJson(const RunConfig& config);
// Missing keys keep their defaults; unknown keys raise ConfigError.
RunConfig RunConfigFromJson(const nlohmann::json& json);

// Applies "section.key=value" to a config object. The value is parsed as JSON
// when possible and taken as a string otherwise.
void ApplyOverride(nlohmann::json& json, const std::string& assignment);

// Defaults, then the optional file, then the overrides in order.
RunConfig LoadRunConfig(const std::optional<std::filesystem::path>& file,
                        const std::vector<std::string>& overrides = {});

// Writes the resolved config as pretty JSON.
void WriteManifest(const std::filesystem::path& path, const RunConfig& config);

}  // namespace smpkws
