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
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "smpkws/frontend.h"

namespace smpkws {

enum class UtteranceKind : std::uint8_t { kNegative = 0, kPositive = 1 };

struct Annotation {
  UtteranceKind kind = UtteranceKind::kNegative;
  // Exclusive end frame of the keyword (first frame after it); positives only.
  std::optional<std::uint32_t> end_frame;
  // Per-frame sound-unit labels in [0, K]; 0 is background.
  std::optional<std::vector<std::uint16_t>> labels;

  bool positive() const { return kind == UtteranceKind::kPositive; }
  // First frame carrying a non-background label, when labels are present.
  std::optional<std::size_t> keyword_start() const;

  friend bool operator==(const Annotation&, const Annotation&) = default;
};

struct Utterance {
  std::uint32_t id = 0;
  FeatureSequence features;
  Annotation annotation;

  std::size_t num_frames() const { return features.num_frames(); }
  // Throws DataError when the annotation disagrees with the features.
  void Validate() const;

  friend bool operator==(const Utterance&, const Utterance&) = default;
};

// ---------------------------------------------------------------------------
// Dataset file: "KWSD", u32 version, u32 record count; per record u32 id,
// u8 kind, u32 frames, u32 dim, float32 features row-major, u32 end frame
// (0xFFFFFFFF when absent), u8 label flag, u16 labels.
// Features are stored in single precision; values that are not exactly
// representable as float do not survive a round trip.

void WriteDataset(const std::filesystem::path& path, std::span<const Utterance> utterances);
std::vector<Utterance> ReadDataset(const std::filesystem::path& path);
std::vector<char> EncodeDataset(std::span<const Utterance> utterances);
std::vector<Utterance> DecodeDataset(std::vector<char> bytes);

// ---------------------------------------------------------------------------
// Synthetic corpus.

struct SynthConfig {
  std::size_t num_units = 4;  // K
  std::size_t feature_dim = 40;
  // Scale of the randomly drawn unit templates (K+1 points, index 0 is background).
  double template_scale = 1.0;
  std::size_t min_unit_frames = 8;
  std::size_t max_unit_frames = 14;
  double noise_stddev = 1.0;
  double keyword_probability = 0.5;
  // Share of negatives that carry a partial or shuffled unit sequence.
  double hard_negative_fraction = 0.5;
  std::size_t min_frames = 140;
  std::size_t max_frames = 200;
  // Background frames kept before the keyword and after its end.
  std::size_t lead_frames = 20;
  std::size_t tail_frames = 50;
  std::uint64_t seed = 1;

  void Validate() const;
  std::size_t max_keyword_frames() const { return num_units * max_unit_frames; }
};

// Unit template means, row i for unit i, float-representable.
std::vector<std::vector<double>> UnitTemplates(const SynthConfig& config);

// Utterance `id` of the corpus: a pure function of (config, id).
Utterance SynthUtterance(const SynthConfig& config, std::uint32_t id);
// Ids first_id .. first_id + count - 1, generated on up to `threads` workers.
std::vector<Utterance> SynthCorpus(const SynthConfig& config, std::size_t count,
                                   std::uint32_t first_id = 0, std::size_t threads = 1);

// ---------------------------------------------------------------------------
// Augmentation.

struct AugmentConfig {
  // Additive Gaussian noise at an SNR drawn uniformly from [min, max] dB;
  // +inf disables noise.
  double snr_db_min = 10.0;
  double snr_db_max = 30.0;
  // Shift drawn uniformly from [-max_shift, max_shift] frames.
  std::size_t max_shift = 10;
};

// Adds feature-space noise and shifts the sequence in time. Vacated frames
// replicate the edge frame and label; the end frame moves with the content.
// The shift is clamped so that the keyword stays inside the utterance.
Utterance Augment(const Utterance& utterance, const AugmentConfig& config, std::mt19937_64& rng);

// Shift alone (no noise); positive delta moves content later in time.
Utterance ShiftUtterance(const Utterance& utterance, std::ptrdiff_t delta);

}  // namespace smpkws
