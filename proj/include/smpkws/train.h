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

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"
#include "smpkws/data.h"
#include "smpkws/losses.h"
#include "smpkws/model.h"

namespace smpkws {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainConfig {
  ModelConfig model = ModelConfig::Default();
  LossSpec loss;
  std::size_t batch_size = 32;
  std::size_t steps = 2000;
  double learning_rate = 1e-3;
  AdamConfig adam;
  // Global gradient norm cap; 0 disables clipping.
  double clip_norm = 5.0;
  std::uint64_t seed = 1;
  double init_scale = 0.05;
  // Write <checkpoint_dir>/step_<n>.smpw every interval steps (0: never).
  std::size_t checkpoint_interval = 0;
  std::filesystem::path checkpoint_dir;
  bool augment = false;
  AugmentConfig augmentation;
  // Baseline pipeline: encoder alone with cross entropy, then the decoder
  // with the encoder frozen. stage1_steps = 0 reuses `steps`.
  bool two_stage = false;
  std::size_t stage1_steps = 0;
  std::size_t threads = 1;

  void Validate() const;
};

nlohmann::json TrainConfigToJson(const TrainConfig& config);
// Reads the "train" section only; model and loss are left untouched.
void TrainConfigFromJson(const nlohmann::json& json, TrainConfig& config);

struct TrainStep {
  std::size_t step = 0;  // 1-based
  double total = 0.0;
  double loss_encoder = 0.0;
  double loss_decoder = 0.0;
  double loss_positive = 0.0;
  double loss_negative = 0.0;
  double grad_norm = 0.0;  // before clipping
  std::size_t used = 0;
  std::size_t skipped = 0;
};

struct TrainReport {
  std::vector<TrainStep> steps;
  std::size_t skipped_utterances = 0;

  // step,total,loss_E,loss_D,loss_pos,loss_neg
  void WriteCsv(const std::filesystem::path& path) const;
};

struct TrainResult {
  Model model;
  TrainReport report;
  std::optional<Model> stage_one;  // two-stage runs only
};

using StepCallback = std::function<void(const TrainStep&)>;

// Trains from InitModel(config.model, seed) unless `init` is given. Dispatches
// to the two-stage pipeline when config.two_stage is set.
TrainResult Train(std::span<const Utterance> dataset, const TrainConfig& config,
                  const Model* init = nullptr, const StepCallback& on_step = {});

TrainResult BaselineTwoStageTrain(std::span<const Utterance> dataset, const TrainConfig& config,
                                  const StepCallback& on_step = {});

// Throws DataError naming the utterances whose annotations cannot feed `spec`.
void ValidateAnnotations(std::span<const Utterance> dataset, const LossSpec& spec,
                         std::size_t num_units);

// ---------------------------------------------------------------------------
// Building blocks, exposed for testing.

struct BatchGradient {
  std::vector<Tensor> grads;  // one per parameter tensor; zero where frozen
  LossBreakdown loss;
};

// Mean-loss gradient over the batch. Per-utterance gradients are computed on
// up to `threads` workers and summed in batch order.
BatchGradient ComputeBatchGradient(const Model& model, std::span<const Utterance> batch,
                                   const LossSpec& spec, const std::vector<bool>& trainable,
                                   std::size_t threads = 1);

// Scales `grads` in place so their joint L2 norm is at most max_norm (no-op
// for max_norm <= 0); returns the norm before scaling.
double ClipGlobalNorm(std::vector<Tensor>& grads, double max_norm);

class Adam {
 public:
  Adam(const AdamConfig& config, double learning_rate, const ModelParams& shape);
  // One bias-corrected update of every tensor whose `trainable` flag is set.
  void Step(ModelParams& params, const std::vector<Tensor>& grads,
            const std::vector<bool>& trainable);
  std::size_t steps_taken() const { return t_; }

 private:
  AdamConfig config_;
  double lr_;
  std::vector<Tensor> m_, v_;
  std::size_t t_ = 0;
};

}  // namespace smpkws
