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

#include "smpkws/run_config.h"

#include <fstream>

#include "smpkws/errors.h"
#include "smpkws/json_util.h"

namespace smpkws {
namespace {

nlohmann::json FrontendToJson(const FrontendConfig& c) {
  return {{"sample_rate", c.sample_rate},        {"frame_step_ms", c.frame_step_ms},
          {"frame_length_ms", c.frame_length_ms}, {"num_mel_bins", c.num_mel_bins},
          {"low_freq_hz", c.low_freq_hz},         {"high_freq_hz", c.high_freq_hz}};
}

void FrontendFromJson(const nlohmann::json& j, FrontendConfig& c) {
  RejectUnknownKeys(j, "frontend",
                    {"sample_rate", "frame_step_ms", "frame_length_ms", "num_mel_bins",
                     "low_freq_hz", "high_freq_hz"});
  ReadKey(j, "frontend", "sample_rate", c.sample_rate);
  ReadKey(j, "frontend", "frame_step_ms", c.frame_step_ms);
  ReadKey(j, "frontend", "frame_length_ms", c.frame_length_ms);
  ReadKey(j, "frontend", "num_mel_bins", c.num_mel_bins);
  ReadKey(j, "frontend", "low_freq_hz", c.low_freq_hz);
  ReadKey(j, "frontend", "high_freq_hz", c.high_freq_hz);
}

nlohmann::json SynthToJson(const SynthConfig& c) {
  return {{"template_scale", c.template_scale},
          {"min_unit_frames", c.min_unit_frames},
          {"max_unit_frames", c.max_unit_frames},
          {"noise_stddev", c.noise_stddev},
          {"keyword_probability", c.keyword_probability},
          {"hard_negative_fraction", c.hard_negative_fraction},
          {"min_frames", c.min_frames},
          {"max_frames", c.max_frames},
          {"lead_frames", c.lead_frames},
          {"tail_frames", c.tail_frames},
          {"seed", c.seed}};
}

void SynthFromJson(const nlohmann::json& j, SynthConfig& c) {
  RejectUnknownKeys(j, "synth",
                    {"template_scale", "min_unit_frames", "max_unit_frames", "noise_stddev",
                     "keyword_probability", "hard_negative_fraction", "min_frames",
                     "max_frames", "lead_frames", "tail_frames", "seed"});
  ReadKey(j, "synth", "template_scale", c.template_scale);
  ReadKey(j, "synth", "min_unit_frames", c.min_unit_frames);
  ReadKey(j, "synth", "max_unit_frames", c.max_unit_frames);
  ReadKey(j, "synth", "noise_stddev", c.noise_stddev);
  ReadKey(j, "synth", "keyword_probability", c.keyword_probability);
  ReadKey(j, "synth", "hard_negative_fraction", c.hard_negative_fraction);
  ReadKey(j, "synth", "min_frames", c.min_frames);
  ReadKey(j, "synth", "max_frames", c.max_frames);
  ReadKey(j, "synth", "lead_frames", c.lead_frames);
  ReadKey(j, "synth", "tail_frames", c.tail_frames);
  ReadKey(j, "synth", "seed", c.seed);
}

}  // namespace

void RunConfig::Validate() const {
  frontend.Validate();
  train.Validate();
  if (train.steps == 0) throw ConfigError("train.steps must be >= 1");
  synth.Validate();
  eval.Validate();
}

nlohmann::json RunConfigToJson(const RunConfig& c) {
  return {{"name", c.name},
          {"frontend", FrontendToJson(c.frontend)},
          {"model", ModelConfigToJson(c.train.model)},
          {"loss", LossSpecToJson(c.train.loss)},
          {"train", TrainConfigToJson(c.train)},
          {"synth", SynthToJson(c.synth)},
          {"eval", EvalConfigToJson(c.eval)}};
}

RunConfig RunConfigFromJson(const nlohmann::json& j) {
  RejectUnknownKeys(j, "config", {"name", "frontend", "model", "loss", "train", "synth", "eval"});
  RunConfig c;
  ReadKey(j, "config", "name", c.name);
  if (j.contains("frontend")) FrontendFromJson(j["frontend"], c.frontend);
  if (j.contains("model")) c.train.model = ModelConfigFromJson(j["model"]);
  if (j.contains("loss")) c.train.loss = LossSpecFromJson(j["loss"]);
  if (j.contains("train")) TrainConfigFromJson(j["train"], c.train);
  if (j.contains("synth")) SynthFromJson(j["synth"], c.synth);
  if (j.contains("eval")) EvalConfigFromJson(j["eval"], c.eval);
  c.train.loss.windows.num_units = c.train.model.num_units;
  c.synth.num_units = c.train.model.num_units;
  c.synth.feature_dim = c.train.model.feature_dim;
  c.eval.frame_step_ms = c.frontend.frame_step_ms;
  c.Validate();
  return c;
}

void ApplyOverride(nlohmann::json& json, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  nlohmann::json* node = &json;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
    if (key.empty()) throw ConfigError("override key '" + path + "' has an empty component");
    if (!node->is_object()) throw ConfigError("override key '" + path + "' crosses a value");
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    if (!node->contains(key)) {
      throw ConfigError("override key '" + path + "': unknown section '" + key + "'");
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

RunConfig LoadRunConfig(const std::optional<std::filesystem::path>& file,
                        const std::vector<std::string>& overrides) {
  nlohmann::json j = RunConfigToJson(RunConfig{});
  if (file) {
    std::ifstream in(*file);
    if (!in) throw ConfigError("cannot open config " + file->string());
    nlohmann::json user = nlohmann::json::parse(in, nullptr, false);
    if (user.is_discarded()) throw ConfigError("config " + file->string() + " is not valid JSON");
    if (!user.is_object()) throw ConfigError("config " + file->string() + " must be an object");
    RejectUnknownKeys(user, "config",
                      {"name", "frontend", "model", "loss", "train", "synth", "eval"});
    for (auto it = user.begin(); it != user.end(); ++it) {
      if (it.value().is_object() && j[it.key()].is_object()) {
        for (auto kv = it.value().begin(); kv != it.value().end(); ++kv) {
          j[it.key()][kv.key()] = kv.value();
        }
      } else {
        j[it.key()] = it.value();
      }
    }
  }
  for (const std::string& o : overrides) ApplyOverride(j, o);
  return RunConfigFromJson(j);
}

void WriteManifest(const std::filesystem::path& path, const RunConfig& config) {
  std::ofstream out(path);
  out << RunConfigToJson(config).dump(2) << '\n';
  if (!out) throw DataError("cannot write manifest " + path.string());
}

}  // namespace smpkws
