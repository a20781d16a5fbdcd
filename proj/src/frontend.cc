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

#include "smpkws/frontend.h"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <numbers>

#include "smpkws/binary_io.h"
#include "smpkws/errors.h"

namespace smpkws {
namespace {

constexpr double kLogFloor = 1e-10;

double HzToMel(double hz) { return 1127.0 * std::log1p(hz / 700.0); }
double MelToHz(double mel) { return 700.0 * std::expm1(mel / 1127.0); }

std::size_t NextPowerOfTwo(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// FFTW planning is not thread-safe; execution with new-array functions is.
std::mutex& PlannerMutex() {
  static std::mutex m;
  return m;
}

struct PlanDeleter {
  void operator()(fftw_plan_s* p) const {
    std::lock_guard<std::mutex> lock(PlannerMutex());
    fftw_destroy_plan(p);
  }
};

// Mel points (Hz) delimiting the filters: num_bins + 2 edges.
std::vector<double> MelEdges(const FrontendConfig& cfg) {
  const double high = cfg.high_freq_hz > 0.0 ? cfg.high_freq_hz : cfg.sample_rate / 2.0;
  const double lo_mel = HzToMel(cfg.low_freq_hz), hi_mel = HzToMel(high);
  std::vector<double> edges(cfg.num_mel_bins + 2);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    edges[i] = MelToHz(lo_mel + (hi_mel - lo_mel) * double(i) / double(cfg.num_mel_bins + 1));
  }
  return edges;
}

}  // namespace

void FrontendConfig::Validate() const {
  if (sample_rate <= 0) throw ConfigError("frontend sample_rate must be positive");
  if (!(frame_step_ms > 0.0)) throw ConfigError("frontend frame_step must be positive");
  if (!(frame_length_ms > 0.0)) throw ConfigError("frontend frame_length must be positive");
  if (num_mel_bins < 1) throw ConfigError("frontend num_mel_bins must be at least 1");
  const double high = high_freq_hz > 0.0 ? high_freq_hz : sample_rate / 2.0;
  if (!(low_freq_hz >= 0.0 && low_freq_hz < high && high <= sample_rate / 2.0)) {
    throw ConfigError("frontend frequency range is invalid");
  }
  if (frame_step_samples() == 0 || frame_length_samples() == 0) {
    throw ConfigError("frontend frame is shorter than one sample");
  }
}

std::size_t FrontendConfig::frame_step_samples() const {
  return static_cast<std::size_t>(std::lround(sample_rate * frame_step_ms / 1000.0));
}

std::size_t FrontendConfig::frame_length_samples() const {
  return static_cast<std::size_t>(std::lround(sample_rate * frame_length_ms / 1000.0));
}

FeatureSequence::FeatureSequence(std::size_t num_frames, std::size_t dim, double fill)
    : num_frames_(num_frames), dim_(dim), values_(num_frames * dim, fill) {}

FeatureSequence::FeatureSequence(std::size_t num_frames, std::size_t dim,
                                 std::vector<double> values)
    : num_frames_(num_frames), dim_(dim), values_(std::move(values)) {
  if (values_.size() != num_frames_ * dim_) {
    throw DimensionError("feature sequence value count does not match frames x dim");
  }
}

Tensor FeatureSequence::ToTensor() const { return Tensor({num_frames_, dim_}, values_); }

std::vector<double> MelBinCenters(const FrontendConfig& config) {
  config.Validate();
  std::vector<double> edges = MelEdges(config);
  return std::vector<double>(edges.begin() + 1, edges.end() - 1);
}

FeatureSequence LogMel(std::span<const double> pcm, const FrontendConfig& config) {
  config.Validate();
  const std::size_t step = config.frame_step_samples();
  const std::size_t length = config.frame_length_samples();
  if (pcm.empty()) throw DataError("log-mel frontend given empty audio");
  if (pcm.size() < length) throw DataError("audio is shorter than one analysis frame");

  const std::size_t frames = 1 + (pcm.size() - length) / step;
  const std::size_t n_fft = NextPowerOfTwo(length);
  const std::size_t n_bins = n_fft / 2 + 1;

  std::vector<double> window(length);
  for (std::size_t i = 0; i < length; ++i) {
    window[i] = length == 1 ? 1.0
                            : 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * double(i) /
                                                   double(length - 1));
  }

  // Triangular filter weights over FFT bins.
  const std::vector<double> edges = MelEdges(config);
  std::vector<std::vector<double>> filters(config.num_mel_bins, std::vector<double>(n_bins, 0.0));
  for (std::size_t m = 0; m < config.num_mel_bins; ++m) {
    const double left = edges[m], center = edges[m + 1], right = edges[m + 2];
    for (std::size_t k = 0; k < n_bins; ++k) {
      const double hz = double(k) * config.sample_rate / double(n_fft);
      if (hz > left && hz <= center) {
        filters[m][k] = (hz - left) / (center - left);
      } else if (hz > center && hz < right) {
        filters[m][k] = (right - hz) / (right - center);
      }
    }
  }

  std::unique_ptr<double[], decltype(&fftw_free)> in(
      static_cast<double*>(fftw_malloc(sizeof(double) * n_fft)), &fftw_free);
  std::unique_ptr<fftw_complex[], decltype(&fftw_free)> out(
      static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n_bins)), &fftw_free);
  std::unique_ptr<fftw_plan_s, PlanDeleter> plan;
  {
    std::lock_guard<std::mutex> lock(PlannerMutex());
    plan.reset(fftw_plan_dft_r2c_1d(static_cast<int>(n_fft), in.get(), out.get(), FFTW_ESTIMATE));
  }

  FeatureSequence features(frames, config.num_mel_bins);
  std::vector<double> power(n_bins);
  for (std::size_t t = 0; t < frames; ++t) {
    std::fill(in.get(), in.get() + n_fft, 0.0);
    for (std::size_t i = 0; i < length; ++i) in[i] = pcm[t * step + i] * window[i];
    fftw_execute(plan.get());
    for (std::size_t k = 0; k < n_bins; ++k) {
      power[k] = out[k][0] * out[k][0] + out[k][1] * out[k][1];
    }
    auto row = features.frame(t);
    for (std::size_t m = 0; m < config.num_mel_bins; ++m) {
      double energy = 0.0;
      for (std::size_t k = 0; k < n_bins; ++k) energy += filters[m][k] * power[k];
      row[m] = std::log(std::max(energy, kLogFloor));
    }
  }
  return features;
}

FeatureSequence StackFrames(const FeatureSequence& features, std::size_t left,
                            std::size_t right) {
  const std::size_t n = features.num_frames(), d = features.dim();
  const std::size_t width = left + right + 1;
  FeatureSequence out(n, d * width);
  for (std::size_t t = 0; t < n; ++t) {
    auto dst = out.frame(t);
    for (std::size_t slot = 0; slot < width; ++slot) {
      const auto offset = static_cast<std::ptrdiff_t>(slot) - static_cast<std::ptrdiff_t>(left);
      const auto src = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(t) + offset, 0,
                                                  static_cast<std::ptrdiff_t>(n) - 1);
      auto from = features.frame(static_cast<std::size_t>(src));
      std::copy(from.begin(), from.end(), dst.begin() + slot * d);
    }
  }
  return out;
}

FeatureSequence CenterSlice(const FeatureSequence& stacked, std::size_t left, std::size_t right) {
  const std::size_t width = left + right + 1;
  if (stacked.dim() % width != 0) {
    throw DimensionError("stacked dimension is not a multiple of the context width");
  }
  const std::size_t d = stacked.dim() / width;
  FeatureSequence out(stacked.num_frames(), d);
  for (std::size_t t = 0; t < stacked.num_frames(); ++t) {
    auto src = stacked.frame(t);
    std::copy(src.begin() + left * d, src.begin() + (left + 1) * d, out.frame(t).begin());
  }
  return out;
}

WavAudio ReadWav(const std::filesystem::path& path) {
  ByteReader r = ByteReader::FromFile(path);
  if (r.bytes(4, "RIFF tag") != "RIFF") throw FormatError("not a RIFF file", 0);
  r.u32("RIFF size");
  if (r.bytes(4, "WAVE tag") != "WAVE") throw FormatError("not a WAVE file", 8);
  WavAudio audio;
  bool have_fmt = false;
  while (r.remaining() > 0) {
    const std::uint64_t chunk_at = r.offset();
    const std::string id = r.bytes(4, "chunk id");
    const std::uint32_t size = r.u32("chunk size");
    if (id == "fmt ") {
      const std::uint16_t format = r.u16("audio format");
      const std::uint16_t channels = r.u16("channel count");
      audio.sample_rate = static_cast<int>(r.u32("sample rate"));
      r.u32("byte rate");
      r.u16("block align");
      const std::uint16_t bits = r.u16("bits per sample");
      if (format != 1 || channels != 1 || bits != 16) {
        throw FormatError("only mono 16-bit PCM WAV is supported", chunk_at);
      }
      if (size < 16) throw FormatError("fmt chunk too short", chunk_at);
      r.skip(size - 16 + (size & 1), "fmt chunk");
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw FormatError("data chunk before fmt chunk", chunk_at);
      audio.samples.resize(size / 2);
      for (auto& s : audio.samples) {
        s = static_cast<std::int16_t>(r.u16("sample")) / 32768.0;
      }
      return audio;
    } else {
      r.skip(size + (size & 1), "chunk body");
    }
  }
  throw FormatError("WAV file has no data chunk", r.offset());
}

void WriteWav(const std::filesystem::path& path, const WavAudio& audio) {
  ByteWriter w;
  const auto data_bytes = static_cast<std::uint32_t>(audio.samples.size() * 2);
  w.bytes("RIFF");
  w.u32(36 + data_bytes);
  w.bytes("WAVE");
  w.bytes("fmt ");
  w.u32(16);
  w.u16(1);
  w.u16(1);
  w.u32(static_cast<std::uint32_t>(audio.sample_rate));
  w.u32(static_cast<std::uint32_t>(audio.sample_rate) * 2);
  w.u16(2);
  w.u16(16);
  w.bytes("data");
  w.u32(data_bytes);
  for (double s : audio.samples) {
    const long q = std::lround(std::clamp(s, -1.0, 32767.0 / 32768.0) * 32768.0);
    w.u16(static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  w.WriteTo(path);
}

}  // namespace smpkws
