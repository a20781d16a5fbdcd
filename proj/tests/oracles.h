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

// Brute-force reference implementations shared by the unit and acceptance
// tests. They work on plain nested vectors and deliberately avoid the
// library's tape and tensor code paths.
#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <utility>
#include <vector>

#include "smpkws/data.h"
#include "smpkws/eval.h"
#include "smpkws/losses.h"
#include "smpkws/model.h"

namespace oracle {

using Matrix = std::vector<std::vector<double>>;  // [frame][class]

inline Matrix FromTensor(const smpkws::Tensor& t) {
  Matrix m(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t r = 0; r < t.rows(); ++r) {
    for (std::size_t c = 0; c < t.cols(); ++c) m[r][c] = t(r, c);
  }
  return m;
}

inline smpkws::Tensor ToTensor(const Matrix& m) {
  smpkws::Tensor t = smpkws::Tensor::Matrix(m.size(), m.empty() ? 0 : m[0].size());
  for (std::size_t r = 0; r < m.size(); ++r) {
    for (std::size_t c = 0; c < m[r].size(); ++c) t(r, c) = m[r][c];
  }
  return t;
}

// Random softmax rows.
inline Matrix RandomPosteriors(std::size_t frames, std::size_t classes, std::mt19937_64& rng,
                               double spread = 2.0) {
  std::normal_distribution<double> n(0.0, spread);
  Matrix m(frames, std::vector<double>(classes));
  for (auto& row : m) {
    double z = 0.0;
    for (double& v : row) z += (v = std::exp(n(rng)));
    for (double& v : row) v /= z;
  }
  return m;
}

// Explicit zero-padded convolution of column `dim`: out[t] = sum_j k[j] y[t - j + h].
inline std::vector<double> Smooth(const Matrix& y, std::size_t dim, const std::vector<double>& k) {
  const long n = static_cast<long>(y.size());
  const long h = static_cast<long>(k.size() / 2);
  std::vector<double> out(y.size(), 0.0);
  for (long t = 0; t < n; ++t) {
    double acc = 0.0;
    for (long j = 0; j < static_cast<long>(k.size()); ++j) {
      const long src = t - j + h;
      if (src >= 0 && src < n) acc += k[static_cast<std::size_t>(j)] * y[src][dim];
    }
    out[static_cast<std::size_t>(t)] = acc;
  }
  return out;
}

struct Pooled {
  double loss = 0.0;
  std::vector<std::size_t> argmax;
};

inline Pooled PooledPositive(const Matrix& y, const std::vector<smpkws::PoolingWindow>& windows,
                             const std::vector<double>& k) {
  Pooled out;
  for (const auto& w : windows) {
    const std::vector<double> s = Smooth(y, w.target, k);
    std::size_t best = w.start;
    for (std::size_t t = w.start; t < w.end; ++t) {
      if (s[t] > s[best]) best = t;
    }
    out.argmax.push_back(best);
    out.loss += -std::log(s[best]);
  }
  return out;
}

inline double Negative(const Matrix& y, const std::vector<smpkws::PoolingWindow>& windows,
                       std::size_t background = 0) {
  double loss = 0.0;
  for (std::size_t t = 0; t < y.size(); ++t) {
    bool inside = false;
    for (const auto& w : windows) inside = inside || (t >= w.start && t < w.end);
    if (!inside) loss += -std::log(y[t][background]);
  }
  return loss;
}

inline double CrossEntropy(const Matrix& y, const std::vector<std::uint16_t>& labels) {
  double loss = 0.0;
  for (std::size_t t = 0; t < y.size(); ++t) loss += -std::log(y[t][labels[t]]);
  return loss;
}

// Windows written out from the placement formulas, clamped, without
// reusing the library.
inline std::vector<smpkws::PoolingWindow> Windows(bool decoder, std::size_t end,
                                                  const smpkws::WindowSpec& s,
                                                  std::size_t frames) {
  std::vector<smpkws::PoolingWindow> out;
  auto add = [&](std::size_t target, long start, long size) {
    const long lo = std::max(0L, std::min(start, long(frames)));
    const long hi = std::max(0L, std::min(start + size, long(frames)));
    out.push_back({target, std::size_t(lo), std::size_t(hi)});
  };
  if (decoder) {
    add(1, long(end) + s.decoder_offset - long(s.decoder_size), long(s.decoder_size));
  } else {
    const long k = long(s.num_units);
    for (long i = 1; i <= k; ++i) {
      add(std::size_t(i), long(end) + s.encoder_offset - long(s.stride()) * (k - i + 1),
          long(s.encoder_size));
    }
  }
  return out;
}

inline std::vector<double> KernelTaps(smpkws::HeadLoss mode, const smpkws::KernelSpec& k) {
  if (mode != smpkws::HeadLoss::kSmoothedMaxPool) return {1.0};
  const long h = long(k.length / 2);
  std::vector<double> taps;
  double z = 0.0;
  for (long t = -h; t <= h; ++t) {
    taps.push_back(std::exp(-double(t * t) / (2.0 * k.sigma * k.sigma)));
    z += taps.back();
  }
  for (double& v : taps) v /= z;
  return taps;
}

// One head's loss for one utterance.
inline double HeadLoss(bool decoder, const Matrix& y, const smpkws::Annotation& a,
                       const smpkws::LossSpec& spec) {
  using smpkws::HeadLoss;
  const HeadLoss mode = decoder ? spec.decoder : spec.encoder;
  const std::size_t frames = y.size();
  switch (mode) {
    case HeadLoss::kNone:
      return 0.0;
    case HeadLoss::kCrossEntropy: {
      std::vector<std::uint16_t> labels(frames, 0);
      if (!decoder) {
        if (a.labels) labels = *a.labels;
      } else if (a.positive()) {
        const long lo = std::max(0L, long(*a.end_frame) + spec.decoder_ce_offset);
        for (long t = lo; t < lo + long(spec.decoder_ce_frames) && t < long(frames); ++t) {
          labels[std::size_t(t)] = 1;
        }
      }
      return CrossEntropy(y, labels);
    }
    default: {
      std::vector<smpkws::PoolingWindow> w;
      if (a.positive()) w = Windows(decoder, *a.end_frame, spec.windows, frames);
      const auto taps = KernelTaps(mode, decoder ? spec.decoder_kernel : spec.encoder_kernel);
      return PooledPositive(y, w, taps).loss + Negative(y, w);
    }
  }
}

// Batch mean of alpha * encoder + decoder using the library's forward pass
// only for posteriors.
inline double TotalLoss(const std::vector<smpkws::Utterance>& batch, const smpkws::Model& model,
                        const smpkws::LossSpec& spec) {
  double sum = 0.0;
  for (const auto& u : batch) {
    const auto heads = smpkws::FullForward(model, smpkws::PrepareInput(model.config, u.features));
    sum += spec.windows.alpha * HeadLoss(false, FromTensor(heads.encoder), u.annotation, spec) +
           HeadLoss(true, FromTensor(heads.decoder), u.annotation, spec);
  }
  return sum / double(batch.size());
}

// Greedy event count: fire at scores >= theta, then mute `suppression` frames.
inline std::size_t Events(const std::vector<double>& s, std::size_t begin, std::size_t end,
                          double theta, std::size_t suppression) {
  std::size_t n = 0;
  std::size_t t = begin;
  while (t < end) {
    if (s[t] >= theta) {
      ++n;
      t += suppression;
    } else {
      ++t;
    }
  }
  return n;
}

struct RocValue {
  std::size_t misses = 0;
  std::size_t false_accepts = 0;
  double fr = 0.0;
  double fa_per_hour = 0.0;
};

// Direct recomputation at one threshold: positives run the detector over the
// hit window, negatives over the whole utterance.
inline RocValue RocAt(const std::vector<smpkws::ScoredUtterance>& scored, double theta,
                      const smpkws::EvalConfig& c) {
  RocValue v;
  std::size_t positives = 0, negative_frames = 0;
  for (const auto& u : scored) {
    const std::size_t n = u.scores.size();
    if (u.positive) {
      ++positives;
      const long lo = std::max(0L, long(*u.end_frame) - long(c.hit_before));
      const long hi = std::min(long(n), long(*u.end_frame) + long(c.hit_after) + 1);
      const bool hit = lo < hi && Events(u.scores, std::size_t(lo), std::size_t(hi), theta,
                                         c.suppression) > 0;
      v.misses += !hit;
    } else {
      negative_frames += n;
      v.false_accepts += Events(u.scores, 0, n, theta, c.suppression);
    }
  }
  v.fr = double(v.misses) / double(positives);
  v.fa_per_hour = double(v.false_accepts) / (double(negative_frames) * c.frame_step_ms / 3.6e6);
  return v;
}

}  // namespace oracle
