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

#include "smpkws/model.h"

#include <algorithm>
#include <cmath>
#include <random>

#include "smpkws/binary_io.h"
#include "smpkws/errors.h"
#include "smpkws/json_util.h"
#include "smpkws/ops.h"

namespace smpkws {
namespace {

constexpr char kCheckpointMagic[] = "SMPW";
constexpr std::uint32_t kCheckpointVersion = 1;

struct StackSpec {
  const char* prefix;
  const std::vector<LayerConfig>* layers;
  std::size_t input_dim;
  std::size_t outputs;
};

std::vector<StackSpec> Stacks(const ModelConfig& c) {
  return {{"encoder", &c.encoder, c.input_dim(), c.encoder_outputs()},
          {"decoder", &c.decoder, c.encoder_outputs(), ModelConfig::kDecoderOutputs}};
}

std::size_t TensorsPerLayer(const LayerConfig& l) { return l.kind == LayerKind::kSvdf ? 3 : 2; }

Var Activate(Tape& tape, Var x, Activation act) {
  switch (act) {
    case Activation::kRelu: return Relu(tape, x);
    case Activation::kTanh: return Tanh(tape, x);
    case Activation::kLinear: return x;
  }
  return x;
}

double Activate(double x, Activation act) {
  switch (act) {
    case Activation::kRelu: return x > 0.0 ? x : 0.0;
    case Activation::kTanh: return std::tanh(x);
    case Activation::kLinear: return x;
  }
  return x;
}

// x * W + b for a single frame, accumulated in the same order as MatMul.
std::vector<double> AffineFrame(std::span<const double> x, const Tensor& w) {
  const std::size_t out_dim = w.cols();
  std::vector<double> out(out_dim, 0.0);
  for (std::size_t p = 0; p < x.size(); ++p) {
    const double xp = x[p];
    if (xp == 0.0) continue;
    const double* wp = w.values().data() + p * out_dim;
    for (std::size_t j = 0; j < out_dim; ++j) out[j] += xp * wp[j];
  }
  return out;
}

std::vector<double> SoftmaxFrame(std::vector<double> logits) {
  const std::size_t n = logits.size();
  Tensor t({1, n}, std::move(logits));
  return Softmax(t, 1).values();
}

const char* ActivationName(Activation a) {
  switch (a) {
    case Activation::kRelu: return "relu";
    case Activation::kLinear: return "linear";
    case Activation::kTanh: return "tanh";
  }
  return "relu";
}

Activation ParseActivation(const std::string& s) {
  if (s == "relu") return Activation::kRelu;
  if (s == "linear") return Activation::kLinear;
  if (s == "tanh") return Activation::kTanh;
  throw ConfigError("unknown activation '" + s + "'");
}

nlohmann::json LayersToJson(const std::vector<LayerConfig>& layers) {
  nlohmann::json arr = nlohmann::json::array();
  for (const LayerConfig& l : layers) {
    nlohmann::json j;
    j["type"] = l.kind == LayerKind::kSvdf ? "svdf" : "dense";
    j["units"] = l.units;
    if (l.kind == LayerKind::kSvdf) {
      j["memory"] = l.memory;
      j["rank"] = l.rank;
    }
    j["activation"] = ActivationName(l.activation);
    arr.push_back(j);
  }
  return arr;
}

std::vector<LayerConfig> LayersFromJson(const nlohmann::json& arr, const char* section) {
  if (!arr.is_array()) throw ConfigError(std::string(section) + " must be an array of layers");
  std::vector<LayerConfig> layers;
  for (const auto& j : arr) {
    RejectUnknownKeys(j, section, {"type", "units", "memory", "rank", "activation"});
    std::string type = "svdf", act = "relu";
    ReadKey(j, section, "type", type);
    LayerConfig l;
    if (type == "svdf") {
      l.kind = LayerKind::kSvdf;
    } else if (type == "dense") {
      l.kind = LayerKind::kDense;
      act = "linear";
    } else {
      throw ConfigError(std::string(section) + ": unknown layer type '" + type + "'");
    }
    ReadKey(j, section, "units", l.units);
    ReadKey(j, section, "memory", l.memory);
    ReadKey(j, section, "rank", l.rank);
    ReadKey(j, section, "activation", act);
    l.activation = ParseActivation(act);
    if (l.kind == LayerKind::kDense && (l.memory != 1 || l.rank != 1)) {
      throw ConfigError(std::string(section) + ": dense layers take no memory or rank");
    }
    layers.push_back(l);
  }
  return layers;
}

}  // namespace

void ModelConfig::Validate() const {
  if (feature_dim == 0) throw ConfigError("model feature_dim must be positive");
  if (num_units < 1) throw ConfigError("model needs at least one sound unit (K >= 1)");
  for (const auto& stack : Stacks(*this)) {
    for (const LayerConfig& l : *stack.layers) {
      if (l.units < 1 || l.memory < 1 || l.rank < 1) {
        throw ConfigError(std::string(stack.prefix) + " layer needs units, memory, rank >= 1");
      }
    }
  }
}

ModelConfig ModelConfig::Default() {
  ModelConfig c;
  c.encoder = {LayerConfig::Svdf(32, 8), LayerConfig::Svdf(32, 8), LayerConfig::Dense(16),
               LayerConfig::Svdf(32, 8)};
  c.decoder = {LayerConfig::Svdf(16, 16), LayerConfig::Svdf(16, 16)};
  return c;
}

nlohmann::json ModelConfigToJson(const ModelConfig& c) {
  nlohmann::json j;
  j["feature_dim"] = c.feature_dim;
  j["context_left"] = c.context_left;
  j["context_right"] = c.context_right;
  j["num_units"] = c.num_units;
  j["encoder"] = LayersToJson(c.encoder);
  j["decoder"] = LayersToJson(c.decoder);
  return j;
}

ModelConfig ModelConfigFromJson(const nlohmann::json& j) {
  RejectUnknownKeys(j, "model",
                    {"feature_dim", "context_left", "context_right", "num_units", "encoder",
                     "decoder"});
  ModelConfig c = ModelConfig::Default();
  ReadKey(j, "model", "feature_dim", c.feature_dim);
  ReadKey(j, "model", "context_left", c.context_left);
  ReadKey(j, "model", "context_right", c.context_right);
  ReadKey(j, "model", "num_units", c.num_units);
  if (j.contains("encoder")) c.encoder = LayersFromJson(j["encoder"], "model.encoder");
  if (j.contains("decoder")) c.decoder = LayersFromJson(j["decoder"], "model.decoder");
  c.Validate();
  return c;
}

std::size_t ModelParams::count() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.value.size();
  return n;
}

const Tensor& ModelParams::get(const std::string& name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return t.value;
  }
  throw ConfigError("model has no parameter '" + name + "'");
}

std::vector<std::size_t> ModelParams::encoder_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (tensors[i].name.starts_with("encoder.")) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> ModelParams::decoder_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (tensors[i].name.starts_with("decoder.")) out.push_back(i);
  }
  return out;
}

ModelParams MakeParams(const ModelConfig& config) {
  config.Validate();
  ModelParams p;
  for (const auto& stack : Stacks(config)) {
    std::size_t in = stack.input_dim;
    for (std::size_t i = 0; i < stack.layers->size(); ++i) {
      const LayerConfig& l = (*stack.layers)[i];
      const std::string base = std::string(stack.prefix) + "." + std::to_string(i) + ".";
      if (l.kind == LayerKind::kSvdf) {
        p.tensors.push_back({base + "feature", Tensor::Matrix(in, l.units * l.rank)});
        p.tensors.push_back({base + "time", Tensor::Matrix(l.units * l.rank, l.memory)});
      } else {
        p.tensors.push_back({base + "weight", Tensor::Matrix(in, l.units)});
      }
      p.tensors.push_back({base + "bias", Tensor({l.units})});
      in = l.units;
    }
    const std::string base = std::string(stack.prefix) + ".out.";
    p.tensors.push_back({base + "weight", Tensor::Matrix(in, stack.outputs)});
    p.tensors.push_back({base + "bias", Tensor({stack.outputs})});
  }
  return p;
}

Model InitModel(const ModelConfig& config, std::uint64_t seed, double scale) {
  Model m{config, MakeParams(config)};
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (auto& t : m.params.tensors) {
    for (double& v : t.value.values()) v = u(rng);
  }
  return m;
}

Tensor PrepareInput(const ModelConfig& config, const FeatureSequence& features) {
  if (features.dim() != config.feature_dim) {
    throw DimensionError("features have dim " + std::to_string(features.dim()) +
                         ", model expects " + std::to_string(config.feature_dim));
  }
  return StackFrames(features, config.context_left, config.context_right).ToTensor();
}

namespace {

Var StackOnTape(Tape& tape, const StackSpec& stack, std::span<const Var> params,
                std::size_t& next, Var x) {
  for (const LayerConfig& l : *stack.layers) {
    if (l.kind == LayerKind::kSvdf) {
      Var f = MatMul(tape, x, params[next]);
      Var pre = SvdfTimeFilter(tape, f, params[next + 1], l.rank);
      x = Activate(tape, AddRowBias(tape, pre, params[next + 2]), l.activation);
    } else {
      x = Activate(tape, AddRowBias(tape, MatMul(tape, x, params[next]), params[next + 1]),
                   l.activation);
    }
    next += TensorsPerLayer(l);
  }
  Var logits = AddRowBias(tape, MatMul(tape, x, params[next]), params[next + 1]);
  next += 2;
  return Softmax(tape, logits, 1);
}

}  // namespace

HeadVars ForwardOnTape(Tape& tape, const ModelConfig& config, std::span<const Var> params,
                       Var input) {
  const Tensor& in = tape.value(input);
  if (in.rank() != 2 || in.cols() != config.input_dim()) {
    throw DimensionError("model input " + in.shape_string() + " does not match input dim " +
                         std::to_string(config.input_dim()));
  }
  const auto stacks = Stacks(config);
  std::size_t next = 0;
  HeadVars out;
  out.encoder = StackOnTape(tape, stacks[0], params, next, input);
  out.decoder = StackOnTape(tape, stacks[1], params, next, out.encoder);
  if (next != params.size()) throw DimensionError("parameter count does not match config");
  return out;
}

HeadOutputs FullForward(const Model& model, const Tensor& input) {
  Tape tape;
  std::vector<Var> vars;
  for (const auto& t : model.params.tensors) vars.push_back(tape.Constant(t.value));
  HeadVars h = ForwardOnTape(tape, model.config, vars, tape.Constant(input));
  return {tape.value(h.encoder), tape.value(h.decoder)};
}

Tensor EncoderForward(const Model& model, const Tensor& input) {
  return FullForward(model, input).encoder;
}

Tensor DecoderForward(const Model& model, const Tensor& encoder_posteriors) {
  if (encoder_posteriors.rank() != 2 ||
      encoder_posteriors.cols() != model.config.encoder_outputs()) {
    throw DimensionError("decoder input must have K+1 columns");
  }
  Tape tape;
  std::vector<Var> vars;
  for (const auto& t : model.params.tensors) vars.push_back(tape.Constant(t.value));
  const auto stacks = Stacks(model.config);
  std::size_t next = 0;
  for (const LayerConfig& l : model.config.encoder) next += TensorsPerLayer(l);
  next += 2;
  return tape.value(StackOnTape(tape, stacks[1], vars, next, tape.Constant(encoder_posteriors)));
}

StreamingState MakeStreamingState(const ModelConfig& config) {
  auto make = [](const std::vector<LayerConfig>& layers) {
    std::vector<LayerState> states;
    for (const LayerConfig& l : layers) {
      LayerState s;
      if (l.kind == LayerKind::kSvdf) {
        s.memory = l.memory;
        s.filters = l.units * l.rank;
        s.buffer.assign(s.memory * s.filters, 0.0);
      }
      states.push_back(std::move(s));
    }
    return states;
  };
  return {make(config.encoder), make(config.decoder)};
}

std::vector<double> SvdfStep(const LayerConfig& layer, const SvdfWeights& w, LayerState& state,
                             std::span<const double> frame) {
  const std::size_t filters = layer.units * layer.rank;
  if (layer.kind != LayerKind::kSvdf || w.feature.rows() != frame.size() ||
      w.feature.cols() != filters || w.time.rows() != filters ||
      w.time.cols() != layer.memory || w.bias.size() != layer.units ||
      state.memory != layer.memory || state.filters != filters) {
    throw DimensionError("svdf step: frame, weights or state do not match the layer");
  }
  // Overwrite the oldest slot with this frame's feature-filter outputs.
  const std::vector<double> f = AffineFrame(frame, w.feature);
  std::copy(f.begin(), f.end(), state.buffer.begin() + state.oldest * filters);
  state.oldest = (state.oldest + 1) % state.memory;

  std::vector<double> out(layer.units, 0.0);
  for (std::size_t m = 0; m < filters; ++m) {
    double acc = 0.0;
    for (std::size_t k = 0; k < layer.memory; ++k) {
      const std::size_t slot = (state.oldest + k) % state.memory;
      acc += w.time(m, k) * state.buffer[slot * filters + m];
    }
    out[m / layer.rank] += acc;
  }
  for (std::size_t n = 0; n < layer.units; ++n) {
    out[n] = Activate(out[n] + w.bias[n], layer.activation);
  }
  return out;
}

HeadOutputs ForwardStreaming(const Model& model, const Tensor& input, StreamingState& state) {
  const ModelConfig& c = model.config;
  if (input.rank() != 2 || input.cols() != c.input_dim()) {
    throw DimensionError("streaming input " + input.shape_string() +
                         " does not match input dim " + std::to_string(c.input_dim()));
  }
  const auto stacks = Stacks(c);
  const std::size_t frames = input.rows();
  HeadOutputs out{Tensor::Matrix(frames, c.encoder_outputs()),
                  Tensor::Matrix(frames, ModelConfig::kDecoderOutputs)};

  auto run_stack = [&](const StackSpec& stack, std::size_t& next, std::vector<LayerState>& states,
                       std::vector<double> x) {
    for (std::size_t i = 0; i < stack.layers->size(); ++i) {
      const LayerConfig& l = (*stack.layers)[i];
      const auto& t = model.params.tensors;
      if (l.kind == LayerKind::kSvdf) {
        SvdfWeights w{t[next].value, t[next + 1].value, t[next + 2].value};
        x = SvdfStep(l, w, states[i], x);
      } else {
        std::vector<double> y = AffineFrame(x, t[next].value);
        for (std::size_t j = 0; j < y.size(); ++j) {
          y[j] = Activate(y[j] + t[next + 1].value[j], l.activation);
        }
        x = std::move(y);
      }
      next += TensorsPerLayer(l);
    }
    std::vector<double> logits = AffineFrame(x, model.params.tensors[next].value);
    const Tensor& b = model.params.tensors[next + 1].value;
    for (std::size_t j = 0; j < logits.size(); ++j) logits[j] += b[j];
    next += 2;
    return SoftmaxFrame(std::move(logits));
  };

  for (std::size_t t = 0; t < frames; ++t) {
    std::size_t next = 0;
    auto row = input.row(t);
    std::vector<double> enc =
        run_stack(stacks[0], next, state.encoder, std::vector<double>(row.begin(), row.end()));
    std::vector<double> dec = run_stack(stacks[1], next, state.decoder, enc);
    std::copy(enc.begin(), enc.end(), out.encoder.row(t).begin());
    std::copy(dec.begin(), dec.end(), out.decoder.row(t).begin());
  }
  return out;
}

std::vector<char> SerializeModel(const Model& model) {
  ByteWriter w;
  w.bytes(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  const std::string config = ModelConfigToJson(model.config).dump();
  w.u32(static_cast<std::uint32_t>(config.size()));
  w.bytes(config);
  w.u32(static_cast<std::uint32_t>(model.params.tensors.size()));
  for (const auto& t : model.params.tensors) {
    w.u32(static_cast<std::uint32_t>(t.name.size()));
    w.bytes(t.name);
    w.u32(static_cast<std::uint32_t>(t.value.rank()));
    for (std::size_t e : t.value.shape()) w.u32(static_cast<std::uint32_t>(e));
    for (double v : t.value.values()) w.f64(v);
  }
  return w.buffer();
}

void SaveCheckpoint(const std::filesystem::path& path, const Model& model) {
  ByteWriter w;
  const auto bytes = SerializeModel(model);
  w.bytes(std::string_view(bytes.data(), bytes.size()));
  w.WriteTo(path);
}

Model LoadCheckpoint(const std::filesystem::path& path) {
  ByteReader r = ByteReader::FromFile(path);
  if (r.bytes(4, "magic") != kCheckpointMagic) throw FormatError("not an SMPW checkpoint", 0);
  const std::uint32_t version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version), 4);
  }
  const std::uint64_t config_at = r.offset();
  const std::uint32_t config_len = r.u32("config length");
  Model model;
  try {
    model.config = ModelConfigFromJson(nlohmann::json::parse(r.bytes(config_len, "config")));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad checkpoint config block: ") + e.what(), config_at);
  } catch (const ConfigError& e) {
    throw FormatError(std::string("bad checkpoint config block: ") + e.what(), config_at);
  }
  model.params = MakeParams(model.config);
  const std::uint64_t count_at = r.offset();
  const std::uint32_t count = r.u32("tensor count");
  if (count != model.params.tensors.size()) {
    throw FormatError("checkpoint tensor count does not match its config", count_at);
  }
  for (auto& t : model.params.tensors) {
    const std::uint64_t at = r.offset();
    const std::string name = r.bytes(r.u32("name length"), "tensor name");
    if (name != t.name) {
      throw FormatError("expected tensor '" + t.name + "', found '" + name + "'", at);
    }
    const std::uint32_t rank = r.u32("tensor rank");
    std::vector<std::size_t> shape(rank);
    for (auto& e : shape) e = r.u32("tensor extent");
    if (shape != t.value.shape()) throw FormatError("tensor '" + name + "' has wrong shape", at);
    for (double& v : t.value.values()) v = r.f64("tensor values");
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after checkpoint", r.offset());
  return model;
}

}  // namespace smpkws
