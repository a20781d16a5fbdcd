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
#include <filesystem>
#include <span>
#include <vector>

#include "smpkws/tensor.h"

namespace smpkws {

struct FrontendConfig {
  int sample_rate = 16000;
  double frame_step_ms = 10.0;
  double frame_length_ms = 25.0;
  std::size_t num_mel_bins = 40;
  // Stacking context X_t = [x_{t-left}, ..., x_t, ..., x_{t+right}].
  std::size_t context_left = 3;
  std::size_t context_right = 1;
  double low_freq_hz = 20.0;
  // 0 selects the Nyquist frequency.
  double high_freq_hz = 0.0;

  void Validate() const;
  std::size_t frame_step_samples() const;
  std::size_t frame_length_samples() const;
  std::size_t stacked_dim() const {
    return num_mel_bins * (context_left + context_right + 1);
  }
};

// Time-major frames of `dim` features each, one frame per 10 ms step.
class FeatureSequence {
 public:
  FeatureSequence() = default;
  FeatureSequence(std::size_t num_frames, std::size_t dim, double fill = 0.0);
  FeatureSequence(std::size_t num_frames, std::size_t dim, std::vector<double> values);

  std::size_t num_frames() const { return num_frames_; }
  std::size_t dim() const { return dim_; }
  std::span<double> frame(std::size_t t) { return {values_.data() + t * dim_, dim_}; }
  std::span<const double> frame(std::size_t t) const { return {values_.data() + t * dim_, dim_}; }
  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  // [num_frames, dim] tensor copy.
  Tensor ToTensor() const;

  friend bool operator==(const FeatureSequence&, const FeatureSequence&) = default;

 private:
  std::size_t num_frames_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> values_;
};

// Log mel filter-bank energies: Hann-windowed frames, power spectrum from a
// zero-padded power-of-two FFT, triangular filters evenly spaced on the mel
// scale, natural log floored at log(1e-10). Frame count is
// 1 + (samples - frame_length) / frame_step.
FeatureSequence LogMel(std::span<const double> pcm, const FrontendConfig& config);

// Center frequency in Hz of every mel filter.
std::vector<double> MelBinCenters(const FrontendConfig& config);

// Concatenates each frame with its left/right neighbours, replicating the
// first/last frame where the context runs off the sequence.
FeatureSequence StackFrames(const FeatureSequence& features, std::size_t left, std::size_t right);

// Recovers the unstacked sequence from the center slot of stacked frames.
FeatureSequence CenterSlice(const FeatureSequence& stacked, std::size_t left, std::size_t right);

struct WavAudio {
  int sample_rate = 0;
  // Samples scaled to [-1, 1).
  std::vector<double> samples;
};

// Mono 16-bit little-endian PCM only.
WavAudio ReadWav(const std::filesystem::path& path);
void WriteWav(const std::filesystem::path& path, const WavAudio& audio);

}  // namespace smpkws
