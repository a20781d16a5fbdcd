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

// Small models, utterances and loss settings shared across test binaries.
#pragma once

#include <algorithm>
#include <optional>
#include <random>
#include <vector>

#include "smpkws/data.h"
#include "smpkws/grad_check.h"
#include "smpkws/losses.h"
#include "smpkws/model.h"

namespace fixture {

inline smpkws::ModelConfig TinyModelConfig(std::size_t num_units = 3) {
  using smpkws::LayerConfig;
  smpkws::ModelConfig c;
  c.feature_dim = 6;
  c.context_left = 1;
  c.context_right = 1;
  c.num_units = num_units;
  c.encoder = {LayerConfig::Svdf(8, 4), LayerConfig::Dense(4), LayerConfig::Svdf(8, 3)};
  c.decoder = {LayerConfig::Svdf(6, 5)};
  return c;
}

// Windows scaled down to fit 30-40 frame utterances.
inline smpkws::LossSpec TinyLossSpec(const smpkws::ModelVariant& variant,
                                     std::size_t num_units = 3) {
  smpkws::LossSpec s;
  s.encoder = variant.encoder;
  s.decoder = variant.decoder;
  s.encoder_kernel = {1.5, 5};
  s.decoder_kernel = {3.0, 7};
  s.windows.num_units = num_units;
  s.windows.encoder_offset = 4;
  s.windows.encoder_size = 4;
  s.windows.decoder_offset = 4;
  s.windows.decoder_size = 10;
  s.decoder_ce_frames = 4;
  return s;
}

// Gaussian features; positives carry K units of `unit` frames ending at
// `end` (exclusive) with matching frame labels.
inline smpkws::Utterance MakeUtterance(std::uint32_t id, std::size_t frames, std::size_t dim,
                                       std::size_t num_units, std::optional<std::size_t> end,
                                       std::mt19937_64& rng, std::size_t unit = 3) {
  smpkws::Utterance u;
  u.id = id;
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> v(frames * dim);
  for (double& x : v) x = n(rng);
  u.features = smpkws::FeatureSequence(frames, dim, std::move(v));
  std::vector<std::uint16_t> labels(frames, 0);
  if (end) {
    u.annotation.kind = smpkws::UtteranceKind::kPositive;
    u.annotation.end_frame = static_cast<std::uint32_t>(*end);
    for (std::size_t i = 0; i < num_units * unit; ++i) {
      labels[*end - num_units * unit + i] = static_cast<std::uint16_t>(1 + i / unit);
    }
  }
  u.annotation.labels = std::move(labels);
  return u;
}

inline std::vector<smpkws::Utterance> TinyBatch(std::mt19937_64& rng, std::size_t dim = 6,
                                                std::size_t num_units = 3) {
  return {MakeUtterance(0, 32, dim, num_units, 20, rng),
          MakeUtterance(1, 28, dim, num_units, std::nullopt, rng),
          MakeUtterance(2, 36, dim, num_units, 24, rng)};
}

inline smpkws::GradCheckResult CheckVariantGradient(const smpkws::ModelVariant& variant,
                                                    std::uint64_t seed,
                                                    smpkws::GradCheckOptions options = {}) {
  std::mt19937_64 rng(seed);
  const smpkws::ModelConfig config = TinyModelConfig();
  smpkws::Model model = smpkws::InitModel(config, seed, 0.5);
  const std::vector<smpkws::Utterance> batch = TinyBatch(rng);
  smpkws::LossSpec spec = TinyLossSpec(variant);
  std::vector<smpkws::Tensor> params;
  for (const auto& t : model.params.tensors) params.push_back(t.value);
  auto fn = [&](smpkws::Tape& tape, std::span<const smpkws::Var> vars) {
    return smpkws::TotalLossOnTape(tape, batch, config, vars, spec);
  };
  options.seed = seed;
  return smpkws::GradCheck(fn, params, options);
}

}  // namespace fixture
