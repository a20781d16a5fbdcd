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
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "smpkws/data.h"
#include "smpkws/model.h"
#include "smpkws/tape.h"

namespace smpkws {

// Odd-length, symmetric, unit-mass smoothing filter centred on its middle tap.
struct Kernel {
  std::vector<double> taps;
  double sigma = 0.0;

  std::size_t length() const { return taps.size(); }
  static Kernel Delta() { return {{1.0}, 0.0}; }
};

// Truncated Gaussian exp(-t^2 / 2 sigma^2), t in [-(L-1)/2, (L-1)/2],
// normalised to unit sum. sigma = +inf yields the uniform kernel 1/L.
Kernel MakeGaussianKernel(double sigma, std::size_t length);

// Half-open frame interval [start, end) whose pooled value targets output
// dimension `target`.
struct PoolingWindow {
  std::size_t target = 0;
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - start; }
  friend bool operator==(const PoolingWindow&, const PoolingWindow&) = default;
};

struct WindowSpec {
  std::int64_t decoder_offset = 40;
  std::size_t decoder_size = 60;
  std::int64_t encoder_offset = 40;
  std::size_t encoder_size = 20;
  // Distance between consecutive encoder window starts; 0 means encoder_size.
  std::size_t encoder_stride = 0;
  std::size_t num_units = 4;  // K
  double alpha = 1.0;

  std::size_t stride() const { return encoder_stride == 0 ? encoder_size : encoder_stride; }
  void Validate() const;
};

enum class HeadLoss { kNone, kCrossEntropy, kMaxPool, kSmoothedMaxPool };

struct KernelSpec {
  double sigma = 1.0;
  std::size_t length = 1;
};

struct LossSpec {
  HeadLoss encoder = HeadLoss::kSmoothedMaxPool;
  HeadLoss decoder = HeadLoss::kSmoothedMaxPool;
  KernelSpec encoder_kernel{4.0, 9};
  KernelSpec decoder_kernel{9.0, 21};
  WindowSpec windows;
  // Frame-level decoder targets for cross entropy: label 1 on
  // [end + decoder_ce_offset, end + decoder_ce_offset + decoder_ce_frames).
  std::int64_t decoder_ce_offset = 0;
  std::size_t decoder_ce_frames = 20;

  void Validate() const;
};

// The evaluated model variants: Baseline_CE_CE (trained in two stages),
// Max2_NA_SMP, Max3_CE_SMP, Max4_SMP_SMP, Max5_MP_SMP, Max6_SMP_MP, Max7_MP_MP.
struct ModelVariant {
  const char* name;
  HeadLoss encoder;
  HeadLoss decoder;
  bool two_stage;
};
std::span<const ModelVariant> ModelVariants();
const ModelVariant& FindModelVariant(const std::string& name);

const char* HeadLossName(HeadLoss loss);
HeadLoss ParseHeadLoss(const std::string& name);
// K is not serialised; it follows the model's num_units.
nlohmann::json LossSpecToJson(const LossSpec& spec);
LossSpec LossSpecFromJson(const nlohmann::json& json);

// ---------------------------------------------------------------------------
// Window placement. Both functions clamp to [0, num_frames) and raise
// EmptyWindowError if any window ends up with no frames, DataError if the
// end frame lies outside the utterance.

// One window on decoder dim 1: start = end + offset - size, length size.
std::vector<PoolingWindow> DecoderWindows(std::size_t end_frame, const WindowSpec& spec,
                                          std::size_t num_frames);
// K windows, window i (1-based) on encoder dim i:
// start_i = end + offset - stride * (K - i + 1), length encoder_size.
std::vector<PoolingWindow> EncoderWindows(std::size_t end_frame, const WindowSpec& spec,
                                          std::size_t num_frames);

// ---------------------------------------------------------------------------
// Loss terms. Tape versions build differentiable scalars; Tensor versions
// evaluate the same code path on constants.

// sum_t -log y_{c_t}(t).
Var CrossEntropyLoss(Tape& tape, Var posteriors, std::span<const std::uint16_t> labels);
double CrossEntropyLoss(const Tensor& posteriors, std::span<const std::uint16_t> labels);

// Posterior trace of `dim` convolved with the kernel.
Var SmoothPosteriors(Tape& tape, Var posteriors, std::size_t dim, const Kernel& kernel);
std::vector<double> SmoothPosteriors(const Tensor& posteriors, std::size_t dim,
                                     const Kernel& kernel);

struct PooledLoss {
  Var loss;
  std::vector<std::size_t> argmax;  // m(i) per window
};

// sum_i -log smoothed_{target_i}(m(i)) with m(i) the earliest maximiser of
// the smoothed trace inside window i. Pass Kernel::Delta() for plain max
// pooling. Windows must be in range and pairwise disjoint.
PooledLoss PooledPositiveLoss(Tape& tape, Var posteriors, std::span<const PoolingWindow> windows,
                              const Kernel& kernel);
double PooledPositiveLoss(const Tensor& posteriors, std::span<const PoolingWindow> windows,
                          const Kernel& kernel, std::vector<std::size_t>* argmax = nullptr);

// Cross entropy towards `background` over frames outside every window.
Var NegativeLoss(Tape& tape, Var posteriors, std::span<const PoolingWindow> windows,
                 std::size_t background = 0);
double NegativeLoss(const Tensor& posteriors, std::span<const PoolingWindow> windows,
                    std::size_t background = 0);

// ---------------------------------------------------------------------------
// Per-utterance and batch objectives.

struct UtteranceLoss {
  Var total;  // alpha * encoder + decoder
  Var encoder;
  Var decoder;
  double positive = 0.0;  // alpha * encoder positive part + decoder positive part
  double negative = 0.0;
};

// Head losses for one utterance. Throws DataError when the annotation lacks
// what the selected losses need and EmptyWindowError for degenerate windows.
UtteranceLoss ComputeUtteranceLoss(Tape& tape, const HeadVars& heads,
                                   const Annotation& annotation, const LossSpec& spec);

struct LossBreakdown {
  double total = 0.0;
  double encoder = 0.0;
  double decoder = 0.0;
  double positive = 0.0;
  double negative = 0.0;
  std::size_t used = 0;
  std::size_t skipped = 0;
};

// Batch mean over utterances that yield valid windows; skipped utterances
// are counted. Returns the differentiable mean (a zero constant if every
// utterance was skipped).
Var TotalLossOnTape(Tape& tape, std::span<const Utterance> batch, const ModelConfig& config,
                    std::span<const Var> params, const LossSpec& spec,
                    LossBreakdown* breakdown = nullptr);
LossBreakdown TotalLoss(std::span<const Utterance> batch, const Model& model,
                        const LossSpec& spec);

}  // namespace smpkws
