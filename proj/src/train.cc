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

#include "smpkws/train.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <mutex>
#include <thread>

#include "smpkws/errors.h"
#include "smpkws/json_util.h"

namespace smpkws {
namespace {

std::mt19937_64 Rng(std::uint64_t seed, std::uint64_t stream, std::uint32_t salt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    salt};
  return std::mt19937_64(seq);
}

std::vector<bool> Mask(const ModelParams& params, const std::vector<std::size_t>& indices) {
  std::vector<bool> mask(params.tensors.size(), false);
  for (std::size_t i : indices) mask[i] = true;
  return mask;
}

bool NeedsEndFrame(const LossSpec& s) {
  return s.encoder == HeadLoss::kMaxPool || s.encoder == HeadLoss::kSmoothedMaxPool ||
         s.decoder != HeadLoss::kNone;
}

// Epoch-wise shuffled index stream.
class BatchSampler {
 public:
  BatchSampler(std::size_t n, std::uint64_t seed) : order_(n), rng_(Rng(seed, 0, 0xba7c)) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    pos_ = n;
  }
  std::vector<std::size_t> Next(std::size_t count) {
    std::vector<std::size_t> out;
    while (out.size() < count) {
      if (pos_ == order_.size()) {
        std::shuffle(order_.begin(), order_.end(), rng_);
        pos_ = 0;
      }
      out.push_back(order_[pos_++]);
    }
    return out;
  }

 private:
  std::vector<std::size_t> order_;
  std::mt19937_64 rng_;
  std::size_t pos_;
};

TrainResult RunStage(std::span<const Utterance> dataset, const TrainConfig& config,
                     const LossSpec& spec, Model model, const std::vector<bool>& trainable,
                     std::size_t steps, std::size_t step_offset, const StepCallback& on_step) {
  TrainResult result;
  if (steps == 0) {
    result.model = std::move(model);
    return result;
  }
  if (dataset.empty()) throw DataError("training set is empty");
  Adam adam(config.adam, config.learning_rate, model.params);
  BatchSampler sampler(dataset.size(), config.seed + step_offset);
  const std::size_t batch_size = std::min(config.batch_size, dataset.size());
  std::vector<Utterance> batch(batch_size);
  for (std::size_t step = 1; step <= steps; ++step) {
    const std::size_t global_step = step_offset + step;
    const auto picks = sampler.Next(batch_size);
    for (std::size_t i = 0; i < batch_size; ++i) {
      if (config.augment) {
        std::mt19937_64 rng = Rng(config.seed, global_step * 1000003 + i, 0xa06e);
        batch[i] = Augment(dataset[picks[i]], config.augmentation, rng);
      } else {
        batch[i] = dataset[picks[i]];
      }
    }
    BatchGradient g;
    try {
      g = ComputeBatchGradient(model, batch, spec, trainable, config.threads);
    } catch (const NumericError& e) {
      throw NumericError("step " + std::to_string(global_step) + ": " + e.what());
    }
    if (!std::isfinite(g.loss.total)) {
      throw NumericError("non-finite training loss at step " + std::to_string(global_step));
    }
    TrainStep rec;
    rec.step = global_step;
    rec.total = g.loss.total;
    rec.loss_encoder = g.loss.encoder;
    rec.loss_decoder = g.loss.decoder;
    rec.loss_positive = g.loss.positive;
    rec.loss_negative = g.loss.negative;
    rec.used = g.loss.used;
    rec.skipped = g.loss.skipped;
    rec.grad_norm = ClipGlobalNorm(g.grads, config.clip_norm);
    if (!std::isfinite(rec.grad_norm)) {
      throw NumericError("non-finite gradient at step " + std::to_string(global_step));
    }
    if (g.loss.used > 0) adam.Step(model.params, g.grads, trainable);
    result.report.skipped_utterances += rec.skipped;
    result.report.steps.push_back(rec);
    if (on_step) on_step(rec);
    if (config.checkpoint_interval > 0 && !config.checkpoint_dir.empty() &&
        (global_step % config.checkpoint_interval == 0 || step == steps)) {
      std::filesystem::create_directories(config.checkpoint_dir);
      SaveCheckpoint(config.checkpoint_dir / ("step_" + std::to_string(global_step) + ".smpw"),
                     model);
    }
  }
  result.model = std::move(model);
  return result;
}

}  // namespace

void TrainConfig::Validate() const {
  model.Validate();
  loss.Validate();
  if (loss.windows.num_units != model.num_units) {
    throw ConfigError("loss K (" + std::to_string(loss.windows.num_units) +
                      ") differs from model num_units (" + std::to_string(model.num_units) + ")");
  }
  if (batch_size == 0) throw ConfigError("train.batch_size must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("train.learning_rate must be positive");
  }
  if (!(adam.beta1 >= 0.0 && adam.beta1 < 1.0) || !(adam.beta2 >= 0.0 && adam.beta2 < 1.0) ||
      !(adam.epsilon > 0.0)) {
    throw ConfigError("Adam betas must lie in [0, 1) and epsilon must be positive");
  }
  if (!(clip_norm >= 0.0)) throw ConfigError("train.clip_norm must be >= 0");
  if (!(init_scale > 0.0)) throw ConfigError("train.init_scale must be positive");
  if (threads == 0) throw ConfigError("thread count must be positive");
}

nlohmann::json TrainConfigToJson(const TrainConfig& c) {
  return {{"batch_size", c.batch_size},
          {"steps", c.steps},
          {"learning_rate", c.learning_rate},
          {"beta1", c.adam.beta1},
          {"beta2", c.adam.beta2},
          {"epsilon", c.adam.epsilon},
          {"clip_norm", c.clip_norm},
          {"seed", c.seed},
          {"init_scale", c.init_scale},
          {"checkpoint_interval", c.checkpoint_interval},
          {"checkpoint_dir", c.checkpoint_dir.string()},
          {"augment", c.augment},
          {"augment_snr_db_min", c.augmentation.snr_db_min},
          {"augment_snr_db_max", c.augmentation.snr_db_max},
          {"augment_max_shift", c.augmentation.max_shift},
          {"two_stage", c.two_stage},
          {"stage1_steps", c.stage1_steps}};
}

void TrainConfigFromJson(const nlohmann::json& j, TrainConfig& c) {
  RejectUnknownKeys(j, "train",
                    {"batch_size", "steps", "learning_rate", "beta1", "beta2", "epsilon",
                     "clip_norm", "seed", "init_scale", "checkpoint_interval", "checkpoint_dir",
                     "augment", "augment_snr_db_min", "augment_snr_db_max", "augment_max_shift",
                     "two_stage", "stage1_steps"});
  ReadKey(j, "train", "batch_size", c.batch_size);
  ReadKey(j, "train", "steps", c.steps);
  ReadKey(j, "train", "learning_rate", c.learning_rate);
  ReadKey(j, "train", "beta1", c.adam.beta1);
  ReadKey(j, "train", "beta2", c.adam.beta2);
  ReadKey(j, "train", "epsilon", c.adam.epsilon);
  ReadKey(j, "train", "clip_norm", c.clip_norm);
  ReadKey(j, "train", "seed", c.seed);
  ReadKey(j, "train", "init_scale", c.init_scale);
  ReadKey(j, "train", "checkpoint_interval", c.checkpoint_interval);
  std::string dir = c.checkpoint_dir.string();
  ReadKey(j, "train", "checkpoint_dir", dir);
  c.checkpoint_dir = dir;
  ReadKey(j, "train", "augment", c.augment);
  ReadKey(j, "train", "augment_snr_db_min", c.augmentation.snr_db_min);
  ReadKey(j, "train", "augment_snr_db_max", c.augmentation.snr_db_max);
  ReadKey(j, "train", "augment_max_shift", c.augmentation.max_shift);
  ReadKey(j, "train", "two_stage", c.two_stage);
  ReadKey(j, "train", "stage1_steps", c.stage1_steps);
}

void TrainReport::WriteCsv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out.precision(17);
  out << "step,total,loss_E,loss_D,loss_pos,loss_neg\n";
  for (const TrainStep& s : steps) {
    out << s.step << ',' << s.total << ',' << s.loss_encoder << ',' << s.loss_decoder << ','
        << s.loss_positive << ',' << s.loss_negative << '\n';
  }
  if (!out) throw DataError("failed writing " + path.string());
}

void ValidateAnnotations(std::span<const Utterance> dataset, const LossSpec& spec,
                         std::size_t num_units) {
  std::vector<std::string> problems;
  for (const Utterance& u : dataset) {
    std::string why;
    try {
      u.Validate();
    } catch (const DataError& e) {
      why = e.what();
    }
    const Annotation& a = u.annotation;
    if (why.empty() && a.positive() && NeedsEndFrame(spec) && !a.end_frame) {
      why = "missing keyword end frame";
    }
    if (why.empty() && a.positive() && spec.encoder == HeadLoss::kCrossEntropy &&
        spec.windows.alpha != 0.0 && !a.labels) {
      why = "missing frame labels";
    }
    if (why.empty() && a.labels) {
      for (std::uint16_t l : *a.labels) {
        if (l > num_units) {
          why = "label " + std::to_string(l) + " exceeds K";
          break;
        }
      }
    }
    if (!why.empty()) problems.push_back("utterance " + std::to_string(u.id) + ": " + why);
  }
  if (problems.empty()) return;
  std::string msg = std::to_string(problems.size()) + " utterance(s) do not fit the " +
                    HeadLossName(spec.encoder) + "/" + HeadLossName(spec.decoder) + " losses";
  for (std::size_t i = 0; i < problems.size() && i < 10; ++i) msg += "\n  " + problems[i];
  if (problems.size() > 10) msg += "\n  ...";
  throw DataError(msg);
}

BatchGradient ComputeBatchGradient(const Model& model, std::span<const Utterance> batch,
                                   const LossSpec& spec, const std::vector<bool>& trainable,
                                   std::size_t threads) {
  const auto& tensors = model.params.tensors;
  if (trainable.size() != tensors.size()) throw ConfigError("trainable mask size mismatch");
  struct PerUtterance {
    std::vector<std::vector<double>> grads;
    LossBreakdown loss;
  };
  std::vector<PerUtterance> parts(batch.size());
  auto work = [&](std::size_t i) {
    Tape tape;
    std::vector<Var> vars;
    vars.reserve(tensors.size());
    for (std::size_t p = 0; p < tensors.size(); ++p) {
      vars.push_back(trainable[p] ? tape.Variable(tensors[p].value)
                                  : tape.Constant(tensors[p].value));
    }
    PerUtterance& out = parts[i];
    Var loss = TotalLossOnTape(tape, batch.subspan(i, 1), model.config, vars, spec, &out.loss);
    if (out.loss.used == 0) return;
    tape.Backward(loss);
    out.grads.resize(tensors.size());
    for (std::size_t p = 0; p < tensors.size(); ++p) {
      if (trainable[p]) out.grads[p] = tape.grad(vars[p]);
    }
  };
  const std::size_t workers =
      std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(1, batch.size()));
  std::exception_ptr failure;
  if (workers == 1) {
    for (std::size_t i = 0; i < batch.size(); ++i) work(i);
  } else {
    std::mutex mu;
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < batch.size(); i += workers) work(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!failure) failure = std::current_exception();
        }
      });
    }
    pool.clear();
    if (failure) std::rethrow_exception(failure);
  }

  BatchGradient out;
  for (const auto& t : tensors) out.grads.emplace_back(t.value.shape());
  LossBreakdown& b = out.loss;
  for (const PerUtterance& p : parts) {
    b.used += p.loss.used;
    b.skipped += p.loss.skipped;
  }
  const double inv = b.used ? 1.0 / double(b.used) : 0.0;
  for (const PerUtterance& p : parts) {
    if (p.loss.used == 0) continue;
    b.total += inv * p.loss.total;
    b.encoder += inv * p.loss.encoder;
    b.decoder += inv * p.loss.decoder;
    b.positive += inv * p.loss.positive;
    b.negative += inv * p.loss.negative;
    for (std::size_t k = 0; k < tensors.size(); ++k) {
      if (!trainable[k]) continue;
      auto& dst = out.grads[k].values();
      for (std::size_t e = 0; e < dst.size(); ++e) dst[e] += inv * p.grads[k][e];
    }
  }
  return out;
}

double ClipGlobalNorm(std::vector<Tensor>& grads, double max_norm) {
  double sq = 0.0;
  for (const Tensor& g : grads) {
    for (double v : g.values()) sq += v * v;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    const double scale = max_norm / norm;
    for (Tensor& g : grads) {
      for (double& v : g.values()) v *= scale;
    }
  }
  return norm;
}

Adam::Adam(const AdamConfig& config, double learning_rate, const ModelParams& shape)
    : config_(config), lr_(learning_rate) {
  for (const auto& t : shape.tensors) {
    m_.emplace_back(t.value.shape());
    v_.emplace_back(t.value.shape());
  }
}

void Adam::Step(ModelParams& params, const std::vector<Tensor>& grads,
                const std::vector<bool>& trainable) {
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, double(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, double(t_));
  for (std::size_t k = 0; k < params.tensors.size(); ++k) {
    if (!trainable[k]) continue;
    auto& w = params.tensors[k].value.values();
    auto& m = m_[k].values();
    auto& v = v_[k].values();
    const auto& g = grads[k].values();
    for (std::size_t e = 0; e < w.size(); ++e) {
      m[e] = config_.beta1 * m[e] + (1.0 - config_.beta1) * g[e];
      v[e] = config_.beta2 * v[e] + (1.0 - config_.beta2) * g[e] * g[e];
      w[e] -= lr_ * (m[e] / c1) / (std::sqrt(v[e] / c2) + config_.epsilon);
    }
  }
}

TrainResult Train(std::span<const Utterance> dataset, const TrainConfig& config,
                  const Model* init, const StepCallback& on_step) {
  config.Validate();
  if (config.two_stage && init == nullptr) return BaselineTwoStageTrain(dataset, config, on_step);
  ValidateAnnotations(dataset, config.loss, config.model.num_units);
  Model model = init ? *init : InitModel(config.model, config.seed, config.init_scale);
  std::vector<bool> all(model.params.tensors.size(), true);
  return RunStage(dataset, config, config.loss, std::move(model), all, config.steps, 0, on_step);
}

TrainResult BaselineTwoStageTrain(std::span<const Utterance> dataset, const TrainConfig& config,
                                  const StepCallback& on_step) {
  config.Validate();
  LossSpec stage1 = config.loss;
  stage1.encoder = HeadLoss::kCrossEntropy;
  stage1.decoder = HeadLoss::kNone;
  stage1.windows.alpha = 1.0;
  LossSpec stage2 = config.loss;
  stage2.encoder = HeadLoss::kNone;
  ValidateAnnotations(dataset, stage1, config.model.num_units);
  ValidateAnnotations(dataset, stage2, config.model.num_units);

  Model model = InitModel(config.model, config.seed, config.init_scale);
  const std::vector<bool> encoder = Mask(model.params, model.params.encoder_indices());
  const std::vector<bool> decoder = Mask(model.params, model.params.decoder_indices());
  const std::size_t steps1 = config.stage1_steps ? config.stage1_steps : config.steps;
  TrainResult first =
      RunStage(dataset, config, stage1, std::move(model), encoder, steps1, 0, on_step);
  TrainResult second =
      RunStage(dataset, config, stage2, first.model, decoder, config.steps, steps1, on_step);
  second.stage_one = std::move(first.model);
  second.report.skipped_utterances += first.report.skipped_utterances;
  second.report.steps.insert(second.report.steps.begin(), first.report.steps.begin(),
                             first.report.steps.end());
  return second;
}

}  // namespace smpkws
