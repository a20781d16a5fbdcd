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

#include "smpkws/data.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <string>
#include <thread>

#include "smpkws/binary_io.h"
#include "smpkws/errors.h"

namespace smpkws {
namespace {

constexpr char kMagic[] = "KWSD";
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kNoEnd = 0xFFFFFFFFu;

double ToFloat(double v) { return static_cast<double>(static_cast<float>(v)); }

std::mt19937_64 StreamRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t salt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    static_cast<std::uint32_t>(salt)};
  return std::mt19937_64(seq);
}

std::size_t UniformIndex(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

// Unit sequence for a hard negative: a strict prefix of 1..K, or all K
// units out of order.
std::vector<std::uint16_t> HardNegativeUnits(std::size_t k, std::mt19937_64& rng) {
  std::vector<std::uint16_t> units(k);
  std::iota(units.begin(), units.end(), std::uint16_t{1});
  if (k < 2) return {};
  if (std::bernoulli_distribution(0.5)(rng)) {
    const std::vector<std::uint16_t> ordered = units;
    do {
      std::shuffle(units.begin(), units.end(), rng);
    } while (units == ordered);
    return units;
  }
  units.resize(UniformIndex(rng, 1, k - 1));
  return units;
}

}  // namespace

std::optional<std::size_t> Annotation::keyword_start() const {
  if (!labels) return std::nullopt;
  for (std::size_t t = 0; t < labels->size(); ++t) {
    if ((*labels)[t] != 0) return t;
  }
  return std::nullopt;
}

void Utterance::Validate() const {
  const std::string where = "utterance " + std::to_string(id) + ": ";
  if (features.values().size() != features.num_frames() * features.dim()) {
    throw DataError(where + "feature buffer does not match frames x dim");
  }
  if (annotation.labels && annotation.labels->size() != num_frames()) {
    throw DataError(where + "label count " + std::to_string(annotation.labels->size()) +
                    " differs from frame count " + std::to_string(num_frames()));
  }
  if (!annotation.positive()) {
    if (annotation.end_frame) throw DataError(where + "negative utterance carries an end frame");
    return;
  }
  if (!annotation.end_frame && !annotation.labels) {
    throw DataError(where + "positive utterance needs an end frame or frame labels");
  }
  if (annotation.end_frame) {
    const std::uint32_t end = *annotation.end_frame;
    if (end >= num_frames()) {
      throw DataError(where + "end frame " + std::to_string(end) + " not below frame count " +
                      std::to_string(num_frames()));
    }
    if (annotation.labels) {
      const auto& l = *annotation.labels;
      auto last = std::find_if(l.rbegin(), l.rend(), [](std::uint16_t v) { return v != 0; });
      if (last == l.rend() || static_cast<std::size_t>(l.rend() - last) != end) {
        throw DataError(where + "end frame disagrees with the last keyword label");
      }
    }
  }
}

std::vector<char> EncodeDataset(std::span<const Utterance> utterances) {
  ByteWriter w;
  w.bytes(std::string_view(kMagic, 4));
  w.u32(kVersion);
  w.u32(static_cast<std::uint32_t>(utterances.size()));
  for (const Utterance& u : utterances) {
    u.Validate();
    w.u32(u.id);
    w.u8(static_cast<std::uint8_t>(u.annotation.kind));
    w.u32(static_cast<std::uint32_t>(u.num_frames()));
    w.u32(static_cast<std::uint32_t>(u.features.dim()));
    for (double v : u.features.values()) w.f32(static_cast<float>(v));
    w.u32(u.annotation.end_frame.value_or(kNoEnd));
    w.u8(u.annotation.labels ? 1 : 0);
    if (u.annotation.labels) {
      for (std::uint16_t l : *u.annotation.labels) w.u16(l);
    }
  }
  return w.buffer();
}

std::vector<Utterance> DecodeDataset(std::vector<char> bytes) {
  ByteReader r(std::move(bytes));
  if (r.bytes(4, "magic") != std::string_view(kMagic, 4)) {
    throw FormatError("not a KWSD dataset", 0);
  }
  const std::uint64_t version_at = r.offset();
  if (r.u32("version") != kVersion) throw FormatError("unsupported dataset version", version_at);
  const std::uint32_t count = r.u32("record count");
  std::vector<Utterance> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint64_t record_at = r.offset();
    Utterance u;
    u.id = r.u32("utterance id");
    const std::uint64_t kind_at = r.offset();
    const std::uint8_t kind = r.u8("utterance kind");
    if (kind > 1) throw FormatError("invalid utterance kind " + std::to_string(kind), kind_at);
    u.annotation.kind = static_cast<UtteranceKind>(kind);
    const std::uint32_t frames = r.u32("frame count");
    const std::uint32_t dim = r.u32("feature dim");
    const std::uint64_t cells = std::uint64_t(frames) * dim;
    if (cells * 4 > r.remaining()) {
      throw FormatError("truncated input while reading features", r.offset());
    }
    std::vector<double> values(cells);
    for (double& v : values) v = r.f32("features");
    u.features = FeatureSequence(frames, dim, std::move(values));
    const std::uint32_t end = r.u32("end frame");
    if (end != kNoEnd) u.annotation.end_frame = end;
    const std::uint64_t flag_at = r.offset();
    const std::uint8_t has_labels = r.u8("label flag");
    if (has_labels > 1) throw FormatError("invalid label flag", flag_at);
    if (has_labels) {
      std::vector<std::uint16_t> labels(frames);
      for (auto& l : labels) l = r.u16("labels");
      u.annotation.labels = std::move(labels);
    }
    try {
      u.Validate();
    } catch (const DataError& e) {
      throw FormatError(e.what(), record_at);
    }
    out.push_back(std::move(u));
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after last record", r.offset());
  return out;
}

void WriteDataset(const std::filesystem::path& path, std::span<const Utterance> utterances) {
  ByteWriter w;
  const std::vector<char> bytes = EncodeDataset(utterances);
  w.bytes(std::string_view(bytes.data(), bytes.size()));
  w.WriteTo(path);
}

std::vector<Utterance> ReadDataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return DecodeDataset(std::move(bytes));
}

void SynthConfig::Validate() const {
  if (num_units == 0 || num_units > 1000) throw ConfigError("synth.num_units must be in 1..1000");
  if (feature_dim == 0) throw ConfigError("synth.feature_dim must be positive");
  if (min_unit_frames == 0 || min_unit_frames > max_unit_frames) {
    throw ConfigError("synth unit duration range is empty");
  }
  if (min_frames > max_frames) throw ConfigError("synth frame range is empty");
  if (min_frames < lead_frames + tail_frames + max_keyword_frames()) {
    throw ConfigError("synth.min_frames too short for lead + keyword + tail");
  }
  if (!(noise_stddev >= 0.0) || !(template_scale > 0.0)) {
    throw ConfigError("synth noise and template scale must be non-negative");
  }
  for (double p : {keyword_probability, hard_negative_fraction}) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError("synth probabilities must lie in [0, 1]");
  }
}

std::vector<std::vector<double>> UnitTemplates(const SynthConfig& config) {
  std::mt19937_64 rng = StreamRng(config.seed, 0, 0x7e3a);
  std::normal_distribution<double> normal(0.0, config.template_scale);
  std::vector<std::vector<double>> out(config.num_units + 1,
                                       std::vector<double>(config.feature_dim));
  for (auto& row : out) {
    for (double& v : row) v = ToFloat(normal(rng));
  }
  return out;
}

namespace {

Utterance Synthesize(const SynthConfig& config, const std::vector<std::vector<double>>& templates,
                     std::uint32_t id) {
  std::mt19937_64 rng = StreamRng(config.seed, id, 0x51d7);
  Utterance u;
  u.id = id;
  const bool positive = std::bernoulli_distribution(config.keyword_probability)(rng);
  const std::size_t frames = UniformIndex(rng, config.min_frames, config.max_frames);

  std::vector<std::uint16_t> units;
  if (positive) {
    units.resize(config.num_units);
    std::iota(units.begin(), units.end(), std::uint16_t{1});
  } else if (std::bernoulli_distribution(config.hard_negative_fraction)(rng)) {
    units = HardNegativeUnits(config.num_units, rng);
  }

  std::vector<std::uint16_t> labels(frames, 0);
  if (!units.empty()) {
    std::vector<std::size_t> durations;
    for (std::size_t i = 0; i < units.size(); ++i) {
      durations.push_back(UniformIndex(rng, config.min_unit_frames, config.max_unit_frames));
    }
    const std::size_t length = std::accumulate(durations.begin(), durations.end(), std::size_t{0});
    const std::size_t start =
        UniformIndex(rng, config.lead_frames, frames - config.tail_frames - length);
    std::size_t t = start;
    for (std::size_t i = 0; i < units.size(); ++i) {
      std::fill_n(labels.begin() + t, durations[i], units[i]);
      t += durations[i];
    }
    if (positive) u.annotation.end_frame = static_cast<std::uint32_t>(t);
  }

  std::normal_distribution<double> noise(0.0, config.noise_stddev);
  std::vector<double> values(frames * config.feature_dim);
  for (std::size_t t = 0; t < frames; ++t) {
    const auto& mean = templates[labels[t]];
    for (std::size_t d = 0; d < config.feature_dim; ++d) {
      values[t * config.feature_dim + d] = ToFloat(mean[d] + noise(rng));
    }
  }
  u.features = FeatureSequence(frames, config.feature_dim, std::move(values));
  u.annotation.kind = positive ? UtteranceKind::kPositive : UtteranceKind::kNegative;
  u.annotation.labels = std::move(labels);
  return u;
}

}  // namespace

Utterance SynthUtterance(const SynthConfig& config, std::uint32_t id) {
  config.Validate();
  return Synthesize(config, UnitTemplates(config), id);
}

std::vector<Utterance> SynthCorpus(const SynthConfig& config, std::size_t count,
                                   std::uint32_t first_id, std::size_t threads) {
  config.Validate();
  const auto templates = UnitTemplates(config);
  std::vector<Utterance> out(count);
  const std::size_t workers = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(count, 1));
  auto run = [&](std::size_t w) {
    for (std::size_t i = w; i < count; i += workers) {
      out[i] = Synthesize(config, templates, first_id + static_cast<std::uint32_t>(i));
    }
  };
  if (workers == 1) {
    run(0);
    return out;
  }
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run, w);
  return out;
}

Utterance ShiftUtterance(const Utterance& utterance, std::ptrdiff_t delta) {
  const auto n = static_cast<std::ptrdiff_t>(utterance.num_frames());
  Utterance out = utterance;
  if (delta == 0 || n == 0) return out;
  const Annotation& a = utterance.annotation;
  if (a.end_frame) {
    const auto start =
        static_cast<std::ptrdiff_t>(a.keyword_start().value_or(*a.end_frame));
    const std::ptrdiff_t end = static_cast<std::ptrdiff_t>(*a.end_frame);
    if (start + delta < 0 || end + delta >= n) {
      throw DataError("shift by " + std::to_string(delta) + " moves the keyword out of utterance " +
                      std::to_string(utterance.id));
    }
    out.annotation.end_frame = static_cast<std::uint32_t>(end + delta);
  }
  for (std::ptrdiff_t t = 0; t < n; ++t) {
    const std::ptrdiff_t src = std::clamp<std::ptrdiff_t>(t - delta, 0, n - 1);
    std::ranges::copy(utterance.features.frame(static_cast<std::size_t>(src)),
                      out.features.frame(static_cast<std::size_t>(t)).begin());
    if (a.labels) {
      (*out.annotation.labels)[static_cast<std::size_t>(t)] =
          (*a.labels)[static_cast<std::size_t>(src)];
    }
  }
  return out;
}

Utterance Augment(const Utterance& utterance, const AugmentConfig& config, std::mt19937_64& rng) {
  if (config.snr_db_min > config.snr_db_max) throw ConfigError("augment SNR range is empty");
  const auto n = static_cast<std::ptrdiff_t>(utterance.num_frames());
  const auto max_shift = static_cast<std::ptrdiff_t>(config.max_shift);
  std::ptrdiff_t lo = -max_shift, hi = max_shift;
  const Annotation& a = utterance.annotation;
  if (a.end_frame) {
    // Keep the keyword inside and its end strictly before the last frame.
    lo = std::max(lo, -static_cast<std::ptrdiff_t>(a.keyword_start().value_or(*a.end_frame)));
    hi = std::min(hi, n - 1 - static_cast<std::ptrdiff_t>(*a.end_frame));
  }
  std::ptrdiff_t delta = 0;
  if (lo < hi) delta = std::uniform_int_distribution<std::ptrdiff_t>(lo, hi)(rng);
  else if (lo == hi) delta = lo;
  Utterance out = ShiftUtterance(utterance, delta);

  const double snr = std::isinf(config.snr_db_min)
                         ? config.snr_db_min
                         : std::uniform_real_distribution<double>(config.snr_db_min,
                                                                  config.snr_db_max)(rng);
  auto& v = out.features.values();
  if (std::isinf(snr) || v.empty()) return out;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
  double power = 0.0;
  for (double x : v) power += (x - mean) * (x - mean);
  power /= double(v.size());
  std::normal_distribution<double> noise(0.0, std::sqrt(power / std::pow(10.0, snr / 10.0)));
  for (double& x : v) x = ToFloat(x + noise(rng));
  return out;
}

}  // namespace smpkws
