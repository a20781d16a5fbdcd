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
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "smpkws/frontend.h"
#include "smpkws/tape.h"
#include "smpkws/tensor.h"

namespace smpkws {

enum class Activation { kRelu, kLinear, kTanh };
enum class LayerKind { kSvdf, kDense };

// One hidden layer. SVDF layers factor each node into `rank` per-frame
// feature filters followed by a time filter over the last `memory` filter
// outputs. Dense layers (memory = rank = 1) serve as bottlenecks.
struct LayerConfig {
  LayerKind kind = LayerKind::kSvdf;
  std::size_t units = 0;
  std::size_t memory = 1;
  std::size_t rank = 1;
  Activation activation = Activation::kRelu;

  static LayerConfig Svdf(std::size_t units, std::size_t memory, std::size_t rank = 1,
                          Activation act = Activation::kRelu) {
    return {LayerKind::kSvdf, units, memory, rank, act};
  }
  static LayerConfig Dense(std::size_t units, Activation act = Activation::kLinear) {
    return {LayerKind::kDense, units, 1, 1, act};
  }
  friend bool operator==(const LayerConfig&, const LayerConfig&) = default;
};

// Encoder: stacked features -> K+1 sound-unit posteriors (unit 0 is
// background). Decoder: encoder posteriors -> 2-way keyword posterior.
// Each stack ends in an implicit linear projection followed by softmax.
struct ModelConfig {
  std::size_t feature_dim = 40;
  std::size_t context_left = 3;
  std::size_t context_right = 1;
  std::size_t num_units = 4;  // K
  std::vector<LayerConfig> encoder;
  std::vector<LayerConfig> decoder;

  static constexpr std::size_t kDecoderOutputs = 2;

  std::size_t input_dim() const { return feature_dim * (context_left + context_right + 1); }
  std::size_t encoder_outputs() const { return num_units + 1; }
  void Validate() const;

  // 3 SVDF layers (32 nodes, memory 8) around a 16-d bottleneck; decoder of
  // 2 SVDF layers (16 nodes, memory 16).
  static ModelConfig Default();

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

nlohmann::json ModelConfigToJson(const ModelConfig& config);
// Missing keys keep their defaults; unknown keys raise ConfigError.
ModelConfig ModelConfigFromJson(const nlohmann::json& json);

struct NamedTensor {
  std::string name;
  Tensor value;
};

// All weights in a fixed order: encoder layers, encoder projection, decoder
// layers, decoder projection.
struct ModelParams {
  std::vector<NamedTensor> tensors;

  std::size_t count() const;
  const Tensor& get(const std::string& name) const;
  // Indices of tensors whose name starts with "encoder." / "decoder.".
  std::vector<std::size_t> encoder_indices() const;
  std::vector<std::size_t> decoder_indices() const;
};

struct Model {
  ModelConfig config;
  ModelParams params;
};

// Zero-filled parameters with the layout implied by `config`.
ModelParams MakeParams(const ModelConfig& config);
// Uniform(-scale, scale) initialisation of every weight and bias.
Model InitModel(const ModelConfig& config, std::uint64_t seed, double scale = 0.05);

// Per-utterance input: stacks raw features with the model's context.
Tensor PrepareInput(const ModelConfig& config, const FeatureSequence& features);

// ---------------------------------------------------------------------------
// Batch (whole-sequence) forward on a tape.

struct HeadVars {
  Var encoder;  // [frames, K+1] posteriors
  Var decoder;  // [frames, 2] posteriors
};

// `params` holds one tape node per ModelParams tensor, in order.
HeadVars ForwardOnTape(Tape& tape, const ModelConfig& config, std::span<const Var> params,
                       Var input);

struct HeadOutputs {
  Tensor encoder;
  Tensor decoder;
};

Tensor EncoderForward(const Model& model, const Tensor& input);
Tensor DecoderForward(const Model& model, const Tensor& encoder_posteriors);
HeadOutputs FullForward(const Model& model, const Tensor& input);

// ---------------------------------------------------------------------------
// Streaming forward.

// Ring buffer of the last `memory` feature-filter outputs of one SVDF layer,
// zero-initialised. Dense layers carry an empty state.
struct LayerState {
  std::size_t memory = 0;
  std::size_t filters = 0;
  std::size_t oldest = 0;
  std::vector<double> buffer;  // memory x filters

  friend bool operator==(const LayerState&, const LayerState&) = default;
};

struct StreamingState {
  std::vector<LayerState> encoder;
  std::vector<LayerState> decoder;

  friend bool operator==(const StreamingState&, const StreamingState&) = default;
};

StreamingState MakeStreamingState(const ModelConfig& config);

struct SvdfWeights {
  const Tensor& feature;  // [input, units * rank]
  const Tensor& time;     // [units * rank, memory]
  const Tensor& bias;     // [units]
};

// Advances one SVDF layer by a frame: pushes the feature-filter outputs into
// the ring buffer, then applies the time filter, bias and activation.
std::vector<double> SvdfStep(const LayerConfig& layer, const SvdfWeights& weights,
                             LayerState& state, std::span<const double> frame);

// Runs frames through the model one at a time, carrying `state` across calls.
HeadOutputs ForwardStreaming(const Model& model, const Tensor& input, StreamingState& state);

// ---------------------------------------------------------------------------
// Checkpoints: "SMPW", u32 version, u32-length JSON config block, u32 tensor
// count, then per tensor: u32 name length, name, u32 rank, u32 extents,
// float64 little-endian values.

void SaveCheckpoint(const std::filesystem::path& path, const Model& model);
Model LoadCheckpoint(const std::filesystem::path& path);
std::vector<char> SerializeModel(const Model& model);

}  // namespace smpkws
