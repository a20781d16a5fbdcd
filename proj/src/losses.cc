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

#include "smpkws/losses.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "smpkws/errors.h"
#include "smpkws/json_util.h"
#include "smpkws/ops.h"

namespace smpkws {
namespace {

PoolingWindow Clamped(std::size_t target, std::int64_t start, std::int64_t size,
                      std::size_t num_frames) {
  const auto n = static_cast<std::int64_t>(num_frames);
  const std::int64_t lo = std::clamp<std::int64_t>(start, 0, n);
  const std::int64_t hi = std::clamp<std::int64_t>(start + size, 0, n);
  if (lo >= hi) {
    throw EmptyWindowError("pooling window [" + std::to_string(start) + ", " +
                           std::to_string(start + size) + ") is empty inside " +
                           std::to_string(num_frames) + " frames");
  }
  return {target, static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

void RequireEndInside(std::size_t end_frame, std::size_t num_frames) {
  if (end_frame >= num_frames) {
    throw DataError("keyword end frame " + std::to_string(end_frame) + " outside " +
                    std::to_string(num_frames) + " frames");
  }
}

void CheckWindows(const Tensor& posteriors, std::span<const PoolingWindow> windows) {
  for (std::size_t i = 0; i < windows.size(); ++i) {
    const PoolingWindow& w = windows[i];
    if (w.start >= w.end || w.end > posteriors.rows() || w.target >= posteriors.cols()) {
      throw DataError("pooling window out of range");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (w.start < windows[j].end && windows[j].start < w.end) {
        throw DataError("pooling windows overlap");
      }
    }
  }
}

Kernel KernelFor(HeadLoss loss, const KernelSpec& spec) {
  return loss == HeadLoss::kSmoothedMaxPool ? MakeGaussianKernel(spec.sigma, spec.length)
                                            : Kernel::Delta();
}

template <typename Fn>
auto OnConstants(const Tensor& posteriors, Fn&& fn) {
  Tape tape;
  Var p = tape.Constant(posteriors);
  return fn(tape, p);
}

struct HeadTerms {
  Var total;
  double positive = 0.0;
  double negative = 0.0;
};

HeadTerms Sum2(Tape& tape, Var a, Var b) {
  std::vector<Var> terms = {a, b};
  std::vector<double> ones = {1.0, 1.0};
  return {WeightedSum(tape, terms, ones), tape.value(a)[0], tape.value(b)[0]};
}

// Cross entropy split by target class (non-background vs background frames).
HeadTerms FrameCrossEntropy(Tape& tape, Var posteriors, std::span<const std::uint16_t> labels) {
  const Tensor& p = tape.value(posteriors);
  if (labels.size() != p.rows()) throw DataError("frame label count does not match frames");
  std::vector<std::pair<std::size_t, std::size_t>> pos, neg;
  for (std::size_t t = 0; t < labels.size(); ++t) {
    if (labels[t] >= p.cols()) {
      throw DataError("frame label " + std::to_string(labels[t]) + " out of range");
    }
    (labels[t] != 0 ? pos : neg).emplace_back(t, labels[t]);
  }
  return Sum2(tape, NegLogSum(tape, posteriors, pos), NegLogSum(tape, posteriors, neg));
}

std::size_t RequireEnd(const Annotation& a, const char* head) {
  if (!a.end_frame) {
    throw DataError(std::string(head) + " loss needs the keyword end frame of every positive");
  }
  return *a.end_frame;
}

HeadTerms EncoderHead(Tape& tape, Var posteriors, const Annotation& a, const LossSpec& spec) {
  const std::size_t frames = tape.value(posteriors).rows();
  switch (spec.encoder) {
    case HeadLoss::kNone: {
      Var zero = tape.Constant(Tensor::Scalar(0.0));
      return {zero, 0.0, 0.0};
    }
    case HeadLoss::kCrossEntropy: {
      if (a.labels) return FrameCrossEntropy(tape, posteriors, *a.labels);
      if (a.positive()) throw DataError("encoder cross entropy needs frame labels");
      std::vector<std::uint16_t> background(frames, 0);
      return FrameCrossEntropy(tape, posteriors, background);
    }
    case HeadLoss::kMaxPool:
    case HeadLoss::kSmoothedMaxPool: {
      std::vector<PoolingWindow> windows;
      if (a.positive()) windows = EncoderWindows(RequireEnd(a, "encoder"), spec.windows, frames);
      const Kernel kernel = KernelFor(spec.encoder, spec.encoder_kernel);
      return Sum2(tape, PooledPositiveLoss(tape, posteriors, windows, kernel).loss,
                  NegativeLoss(tape, posteriors, windows));
    }
  }
  throw ConfigError("unknown encoder loss");
}

HeadTerms DecoderHead(Tape& tape, Var posteriors, const Annotation& a, const LossSpec& spec) {
  const std::size_t frames = tape.value(posteriors).rows();
  switch (spec.decoder) {
    case HeadLoss::kNone: {
      Var zero = tape.Constant(Tensor::Scalar(0.0));
      return {zero, 0.0, 0.0};
    }
    case HeadLoss::kCrossEntropy: {
      std::vector<std::uint16_t> labels(frames, 0);
      if (a.positive()) {
        const std::size_t end = RequireEnd(a, "decoder");
        RequireEndInside(end, frames);
        const auto n = static_cast<std::int64_t>(frames);
        const std::int64_t lo =
            std::clamp<std::int64_t>(static_cast<std::int64_t>(end) + spec.decoder_ce_offset, 0, n);
        const std::int64_t hi =
            std::clamp<std::int64_t>(lo + static_cast<std::int64_t>(spec.decoder_ce_frames), 0, n);
        for (std::int64_t t = lo; t < hi; ++t) labels[static_cast<std::size_t>(t)] = 1;
      }
      return FrameCrossEntropy(tape, posteriors, labels);
    }
    case HeadLoss::kMaxPool:
    case HeadLoss::kSmoothedMaxPool: {
      std::vector<PoolingWindow> windows;
      if (a.positive()) windows = DecoderWindows(RequireEnd(a, "decoder"), spec.windows, frames);
      const Kernel kernel = KernelFor(spec.decoder, spec.decoder_kernel);
      return Sum2(tape, PooledPositiveLoss(tape, posteriors, windows, kernel).loss,
                  NegativeLoss(tape, posteriors, windows));
    }
  }
  throw ConfigError("unknown decoder loss");
}

// Window placement that would be used for this utterance; throws
// EmptyWindowError exactly when ComputeUtteranceLoss would.
void ProbeWindows(const Annotation& a, const LossSpec& spec, std::size_t frames) {
  if (!a.positive()) return;
  const bool enc_pool = spec.windows.alpha != 0.0 && (spec.encoder == HeadLoss::kMaxPool ||
                                                      spec.encoder == HeadLoss::kSmoothedMaxPool);
  const bool dec_pool = spec.decoder == HeadLoss::kMaxPool ||
                        spec.decoder == HeadLoss::kSmoothedMaxPool;
  if ((enc_pool || dec_pool || spec.decoder == HeadLoss::kCrossEntropy) && !a.end_frame) return;
  if (enc_pool) EncoderWindows(*a.end_frame, spec.windows, frames);
  if (dec_pool) DecoderWindows(*a.end_frame, spec.windows, frames);
}

}  // namespace

Kernel MakeGaussianKernel(double sigma, std::size_t length) {
  if (length == 0 || length % 2 == 0) {
    throw ConfigError("smoothing kernel length must be odd, got " + std::to_string(length));
  }
  if (!(sigma > 0.0)) throw ConfigError("smoothing kernel sigma must be positive");
  Kernel k;
  k.sigma = sigma;
  k.taps.resize(length);
  const auto half = static_cast<std::ptrdiff_t>(length - 1) / 2;
  double total = 0.0;
  for (std::ptrdiff_t t = -half; t <= half; ++t) {
    const double v = std::isinf(sigma) ? 1.0 : std::exp(-double(t * t) / (2.0 * sigma * sigma));
    k.taps[static_cast<std::size_t>(t + half)] = v;
    total += v;
  }
  for (double& v : k.taps) v /= total;
  return k;
}

void WindowSpec::Validate() const {
  if (decoder_size == 0 || encoder_size == 0) throw ConfigError("window sizes must be positive");
  if (num_units == 0) throw ConfigError("window spec needs K >= 1");
  if (stride() < encoder_size) {
    throw ConfigError("encoder stride shorter than the encoder window makes windows overlap");
  }
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("alpha must be finite and >= 0");
}

void LossSpec::Validate() const {
  windows.Validate();
  MakeGaussianKernel(encoder_kernel.sigma, encoder_kernel.length);
  MakeGaussianKernel(decoder_kernel.sigma, decoder_kernel.length);
}

std::span<const ModelVariant> ModelVariants() {
  using enum HeadLoss;
  static constexpr ModelVariant kVariants[] = {
      {"Baseline_CE_CE", kCrossEntropy, kCrossEntropy, true},
      {"Max2_NA_SMP", kNone, kSmoothedMaxPool, false},
      {"Max3_CE_SMP", kCrossEntropy, kSmoothedMaxPool, false},
      {"Max4_SMP_SMP", kSmoothedMaxPool, kSmoothedMaxPool, false},
      {"Max5_MP_SMP", kMaxPool, kSmoothedMaxPool, false},
      {"Max6_SMP_MP", kSmoothedMaxPool, kMaxPool, false},
      {"Max7_MP_MP", kMaxPool, kMaxPool, false},
  };
  return kVariants;
}

const ModelVariant& FindModelVariant(const std::string& name) {
  for (const ModelVariant& v : ModelVariants()) {
    if (name == v.name) return v;
  }
  throw ConfigError("unknown model variant '" + name + "'");
}

const char* HeadLossName(HeadLoss loss) {
  switch (loss) {
    case HeadLoss::kNone: return "none";
    case HeadLoss::kCrossEntropy: return "ce";
    case HeadLoss::kMaxPool: return "mp";
    case HeadLoss::kSmoothedMaxPool: return "smp";
  }
  return "none";
}

HeadLoss ParseHeadLoss(const std::string& name) {
  if (name == "none") return HeadLoss::kNone;
  if (name == "ce") return HeadLoss::kCrossEntropy;
  if (name == "mp") return HeadLoss::kMaxPool;
  if (name == "smp") return HeadLoss::kSmoothedMaxPool;
  throw ConfigError("unknown loss '" + name + "' (expected none, ce, mp or smp)");
}

nlohmann::json LossSpecToJson(const LossSpec& s) {
  nlohmann::json j;
  j["encoder"] = HeadLossName(s.encoder);
  j["decoder"] = HeadLossName(s.decoder);
  j["alpha"] = s.windows.alpha;
  j["encoder_kernel"] = {{"sigma", s.encoder_kernel.sigma}, {"length", s.encoder_kernel.length}};
  j["decoder_kernel"] = {{"sigma", s.decoder_kernel.sigma}, {"length", s.decoder_kernel.length}};
  j["decoder_offset"] = s.windows.decoder_offset;
  j["decoder_window"] = s.windows.decoder_size;
  j["encoder_offset"] = s.windows.encoder_offset;
  j["encoder_window"] = s.windows.encoder_size;
  j["encoder_stride"] = s.windows.encoder_stride;
  j["decoder_ce_offset"] = s.decoder_ce_offset;
  j["decoder_ce_frames"] = s.decoder_ce_frames;
  return j;
}

LossSpec LossSpecFromJson(const nlohmann::json& j) {
  RejectUnknownKeys(j, "loss",
                    {"encoder", "decoder", "alpha", "encoder_kernel", "decoder_kernel",
                     "decoder_offset", "decoder_window", "encoder_offset", "encoder_window",
                     "encoder_stride", "decoder_ce_offset", "decoder_ce_frames"});
  LossSpec s;
  std::string enc = HeadLossName(s.encoder), dec = HeadLossName(s.decoder);
  ReadKey(j, "loss", "encoder", enc);
  ReadKey(j, "loss", "decoder", dec);
  s.encoder = ParseHeadLoss(enc);
  s.decoder = ParseHeadLoss(dec);
  if (s.decoder == HeadLoss::kNone) throw ConfigError("loss.decoder must be ce, mp or smp");
  ReadKey(j, "loss", "alpha", s.windows.alpha);
  for (auto [key, target] : {std::pair{"encoder_kernel", &s.encoder_kernel},
                             std::pair{"decoder_kernel", &s.decoder_kernel}}) {
    if (!j.contains(key)) continue;
    const std::string section = std::string("loss.") + key;
    RejectUnknownKeys(j[key], section, {"sigma", "length"});
    ReadKey(j[key], section, "sigma", target->sigma);
    ReadKey(j[key], section, "length", target->length);
  }
  ReadKey(j, "loss", "decoder_offset", s.windows.decoder_offset);
  ReadKey(j, "loss", "decoder_window", s.windows.decoder_size);
  ReadKey(j, "loss", "encoder_offset", s.windows.encoder_offset);
  ReadKey(j, "loss", "encoder_window", s.windows.encoder_size);
  ReadKey(j, "loss", "encoder_stride", s.windows.encoder_stride);
  ReadKey(j, "loss", "decoder_ce_offset", s.decoder_ce_offset);
  ReadKey(j, "loss", "decoder_ce_frames", s.decoder_ce_frames);
  s.Validate();
  return s;
}

std::vector<PoolingWindow> DecoderWindows(std::size_t end_frame, const WindowSpec& spec,
                                          std::size_t num_frames) {
  RequireEndInside(end_frame, num_frames);
  const auto size = static_cast<std::int64_t>(spec.decoder_size);
  const std::int64_t start = static_cast<std::int64_t>(end_frame) + spec.decoder_offset - size;
  return {Clamped(1, start, size, num_frames)};
}

std::vector<PoolingWindow> EncoderWindows(std::size_t end_frame, const WindowSpec& spec,
                                          std::size_t num_frames) {
  RequireEndInside(end_frame, num_frames);
  const auto k = static_cast<std::int64_t>(spec.num_units);
  const auto stride = static_cast<std::int64_t>(spec.stride());
  const auto size = static_cast<std::int64_t>(spec.encoder_size);
  std::vector<PoolingWindow> out;
  for (std::int64_t i = 1; i <= k; ++i) {
    const std::int64_t start =
        static_cast<std::int64_t>(end_frame) + spec.encoder_offset - stride * (k - i + 1);
    out.push_back(Clamped(static_cast<std::size_t>(i), start, size, num_frames));
  }
  return out;
}

Var CrossEntropyLoss(Tape& tape, Var posteriors, std::span<const std::uint16_t> labels) {
  return FrameCrossEntropy(tape, posteriors, labels).total;
}

double CrossEntropyLoss(const Tensor& posteriors, std::span<const std::uint16_t> labels) {
  return OnConstants(posteriors, [&](Tape& t, Var p) {
    return t.value(CrossEntropyLoss(t, p, labels))[0];
  });
}

Var SmoothPosteriors(Tape& tape, Var posteriors, std::size_t dim, const Kernel& kernel) {
  return ConvolveTime(tape, Column(tape, posteriors, dim), kernel.taps);
}

std::vector<double> SmoothPosteriors(const Tensor& posteriors, std::size_t dim,
                                     const Kernel& kernel) {
  return OnConstants(posteriors, [&](Tape& t, Var p) {
    return t.value(SmoothPosteriors(t, p, dim, kernel)).values();
  });
}

PooledLoss PooledPositiveLoss(Tape& tape, Var posteriors, std::span<const PoolingWindow> windows,
                              const Kernel& kernel) {
  CheckWindows(tape.value(posteriors), windows);
  PooledLoss out;
  std::vector<Var> terms;
  for (const PoolingWindow& w : windows) {
    Var smoothed = SmoothPosteriors(tape, posteriors, w.target, kernel);
    const Tensor& s = tape.value(smoothed);
    std::size_t best = w.start;
    for (std::size_t t = w.start + 1; t < w.end; ++t) {
      if (s[t] > s[best]) best = t;
    }
    out.argmax.push_back(best);
    terms.push_back(NegLogAt(tape, smoothed, best));
  }
  std::vector<double> ones(terms.size(), 1.0);
  out.loss = WeightedSum(tape, terms, ones);
  return out;
}

double PooledPositiveLoss(const Tensor& posteriors, std::span<const PoolingWindow> windows,
                          const Kernel& kernel, std::vector<std::size_t>* argmax) {
  return OnConstants(posteriors, [&](Tape& t, Var p) {
    PooledLoss r = PooledPositiveLoss(t, p, windows, kernel);
    if (argmax) *argmax = r.argmax;
    return t.value(r.loss)[0];
  });
}

Var NegativeLoss(Tape& tape, Var posteriors, std::span<const PoolingWindow> windows,
                 std::size_t background) {
  const Tensor& p = tape.value(posteriors);
  CheckWindows(p, windows);
  if (background >= p.cols()) throw DataError("background class out of range");
  std::vector<bool> covered(p.rows(), false);
  for (const PoolingWindow& w : windows) {
    std::fill(covered.begin() + w.start, covered.begin() + w.end, true);
  }
  std::vector<std::pair<std::size_t, std::size_t>> cells;
  for (std::size_t t = 0; t < p.rows(); ++t) {
    if (!covered[t]) cells.emplace_back(t, background);
  }
  return NegLogSum(tape, posteriors, cells);
}

double NegativeLoss(const Tensor& posteriors, std::span<const PoolingWindow> windows,
                    std::size_t background) {
  return OnConstants(posteriors, [&](Tape& t, Var p) {
    return t.value(NegativeLoss(t, p, windows, background))[0];
  });
}

UtteranceLoss ComputeUtteranceLoss(Tape& tape, const HeadVars& heads,
                                   const Annotation& annotation, const LossSpec& spec) {
  if (tape.value(heads.encoder).cols() != spec.windows.num_units + 1) {
    throw ConfigError("loss spec K does not match the encoder output count");
  }
  // alpha = 0 removes the encoder objective entirely, annotations included.
  const HeadTerms enc = spec.windows.alpha == 0.0
                            ? HeadTerms{tape.Constant(Tensor::Scalar(0.0)), 0.0, 0.0}
                            : EncoderHead(tape, heads.encoder, annotation, spec);
  const HeadTerms dec = DecoderHead(tape, heads.decoder, annotation, spec);
  const double alpha = spec.windows.alpha;
  UtteranceLoss out;
  out.encoder = enc.total;
  out.decoder = dec.total;
  std::vector<Var> terms = {enc.total, dec.total};
  std::vector<double> weights = {alpha, 1.0};
  out.total = WeightedSum(tape, terms, weights);
  out.positive = alpha * enc.positive + dec.positive;
  out.negative = alpha * enc.negative + dec.negative;
  return out;
}

Var TotalLossOnTape(Tape& tape, std::span<const Utterance> batch, const ModelConfig& config,
                    std::span<const Var> params, const LossSpec& spec,
                    LossBreakdown* breakdown) {
  LossBreakdown b;
  std::vector<Var> totals;
  std::vector<UtteranceLoss> parts;
  for (const Utterance& u : batch) {
    try {
      ProbeWindows(u.annotation, spec, u.num_frames());
    } catch (const EmptyWindowError&) {
      ++b.skipped;
      continue;
    }
    HeadVars heads = ForwardOnTape(tape, config, params,
                                   tape.Constant(PrepareInput(config, u.features)));
    parts.push_back(ComputeUtteranceLoss(tape, heads, u.annotation, spec));
    totals.push_back(parts.back().total);
  }
  b.used = totals.size();
  // Components accumulate exactly like the weighted sum below, so that
  // e.g. alpha = 0 gives total == decoder bit for bit.
  const double inv = b.used ? 1.0 / double(b.used) : 0.0;
  for (const UtteranceLoss& l : parts) {
    b.encoder += inv * tape.value(l.encoder)[0];
    b.decoder += inv * tape.value(l.decoder)[0];
    b.positive += inv * l.positive;
    b.negative += inv * l.negative;
  }
  std::vector<double> weights(totals.size(), inv);
  Var mean = WeightedSum(tape, totals, weights);
  b.total = tape.value(mean)[0];
  if (breakdown) *breakdown = b;
  return mean;
}

LossBreakdown TotalLoss(std::span<const Utterance> batch, const Model& model,
                        const LossSpec& spec) {
  Tape tape;
  std::vector<Var> vars;
  for (const auto& t : model.params.tensors) vars.push_back(tape.Constant(t.value));
  LossBreakdown b;
  TotalLossOnTape(tape, batch, model.config, vars, spec, &b);
  return b;
}

}  // namespace smpkws
