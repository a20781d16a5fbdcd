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

// smpkws: synthetic corpora, training, evaluation, gradient checks and
// ablation reports from one binary.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "smpkws/data.h"
#include "smpkws/errors.h"
#include "smpkws/eval.h"
#include "smpkws/frontend.h"
#include "smpkws/grad_check.h"
#include "smpkws/losses.h"
#include "smpkws/run_config.h"
#include "smpkws/train.h"

namespace {

using namespace smpkws;

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct ConfigArgs {
  std::string file;
  std::vector<std::string> overrides;

  void Register(CLI::App* cmd) {
    cmd->add_option("--config", file, "JSON run config");
    cmd->add_option("--set", overrides, "Override, e.g. --set train.steps=500")->take_all();
  }
  RunConfig Load(std::size_t threads) const {
    RunConfig c = LoadRunConfig(file.empty() ? std::nullopt
                                             : std::optional<std::filesystem::path>(file),
                                overrides);
    c.train.threads = threads;
    c.eval.threads = threads;
    std::cerr << "config: " << RunConfigToJson(c).dump() << '\n';
    return c;
  }
};

std::string Percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * v);
  return buf;
}

std::filesystem::path WithSuffix(const std::string& path, const char* suffix) {
  return std::filesystem::path(path + suffix);
}

bool HardNegative(const Utterance& u) {
  if (u.annotation.positive() || !u.annotation.labels) return false;
  for (auto l : *u.annotation.labels) {
    if (l != 0) return true;
  }
  return false;
}

std::size_t ResolveThreads(int flag) {
  if (flag > 0) return std::size_t(flag);
  if (const char* env = std::getenv("SMP_KWS_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v <= 0) {
      throw ConfigError(std::string("SMP_KWS_THREADS must be a positive integer, got '") + env +
                        "'");
    }
    return std::size_t(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// ---------------------------------------------------------------------------

int RunSynth(const RunConfig& c, const std::string& out, std::size_t count,
             std::uint32_t first_id) {
  const auto data = SynthCorpus(c.synth, count, first_id, c.train.threads);
  WriteDataset(out, data);
  WriteManifest(WithSuffix(out, ".manifest.json"), c);
  std::size_t pos = 0, hard = 0;
  for (const auto& u : data) {
    pos += u.annotation.positive();
    hard += HardNegative(u);
  }
  std::cout << "synth: " << data.size() << " utterances (" << pos << " positive, "
            << data.size() - pos << " negative, " << hard << " hard negative) -> " << out << '\n';
  return 0;
}

TrainResult TrainAndSave(const RunConfig& c, std::span<const Utterance> data,
                         const std::string& out, std::size_t log_every) {
  const auto t0 = std::chrono::steady_clock::now();
  TrainResult r = Train(data, c.train, nullptr, [&](const TrainStep& s) {
    if (log_every && (s.step % log_every == 0 || s.step == 1)) {
      std::cerr << "step " << s.step << " total " << s.total << " loss_E " << s.loss_encoder
                << " loss_D " << s.loss_decoder << " grad_norm " << s.grad_norm
                << (s.skipped ? " skipped " + std::to_string(s.skipped) : "") << '\n';
    }
  });
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::filesystem::path out_path(out);
  if (out_path.has_parent_path()) std::filesystem::create_directories(out_path.parent_path());
  SaveCheckpoint(out, r.model);
  WriteManifest(WithSuffix(out, ".manifest.json"), c);
  std::cerr << "trained " << r.model.params.count() << " parameters for "
            << r.report.steps.size() << " steps in " << secs << " s";
  if (r.report.skipped_utterances) {
    std::cerr << " (" << r.report.skipped_utterances << " utterances skipped)";
  }
  std::cerr << '\n';
  return r;
}

int RunTrain(const RunConfig& c, const std::string& data_path, const std::string& out,
             std::string report, std::size_t log_every) {
  const auto data = ReadDataset(data_path);
  const TrainResult r = TrainAndSave(c, data, out, log_every);
  if (report.empty()) report = out + ".report.csv";
  r.report.WriteCsv(report);
  if (!r.report.steps.empty()) {
    std::cout << "final_loss " << r.report.steps.back().total << '\n';
  }
  std::cout << "checkpoint " << out << '\n';
  return 0;
}

int RunEval(const RunConfig& c, const std::string& checkpoint, const std::string& data_path,
            const std::string& roc_path) {
  const Model model = LoadCheckpoint(checkpoint);
  const auto data = ReadDataset(data_path);
  const auto scored = ScoreDataset(model, data, c.eval.threads);
  const auto roc = FaFrSweep(scored, c.eval);
  const OperatingPoint op = SelectOperatingPoint(roc, c.eval.target_fa_per_hour);
  std::size_t positives = 0;
  for (const auto& s : scored) positives += s.positive;
  std::cout << "threshold " << op.threshold << '\n'
            << "fr " << op.fr << " (" << Percent(op.fr) << " of " << positives
            << " positives)\n"
            << "fa_per_hour " << op.fa_per_hour << '\n'
            << "target_fa_per_hour " << c.eval.target_fa_per_hour
            << (op.meets_target ? " met" : " not met (strictest threshold shown)") << '\n';
  bool labelled = false;
  for (const auto& u : data) labelled = labelled || u.annotation.labels.has_value();
  if (labelled) std::cout << "encoder_frame_accuracy " << EncoderFrameAccuracy(model, data) << '\n';
  if (!roc_path.empty()) WriteRocCsv(roc_path, roc);
  return 0;
}

int RunGradCheck(const RunConfig& c, std::size_t utterances, std::size_t coords) {
  // A small batch with at least one positive and one negative.
  std::vector<Utterance> batch;
  bool have_pos = false, have_neg = false;
  for (std::uint32_t id = 0; batch.size() < utterances && id < 10000; ++id) {
    Utterance u = SynthUtterance(c.synth, id);
    const bool pos = u.annotation.positive();
    if ((pos && have_pos && !have_neg) || (!pos && have_neg && !have_pos)) continue;
    have_pos = have_pos || pos;
    have_neg = have_neg || !pos;
    batch.push_back(std::move(u));
  }
  Model model = InitModel(c.train.model, c.train.seed, c.train.init_scale);
  std::vector<Tensor> params;
  for (const auto& t : model.params.tensors) params.push_back(t.value);
  const LossSpec spec = c.train.loss;
  auto fn = [&](Tape& tape, std::span<const Var> vars) {
    return TotalLossOnTape(tape, batch, model.config, vars, spec);
  };
  GradCheckOptions options;
  options.max_coords_per_param = coords;
  options.seed = c.train.seed;
  const GradCheckResult r = GradCheck(fn, params, options);
  std::cout << "max_relative_error " << r.max_relative_error << '\n'
            << "coordinates " << r.coordinates_checked << " (" << r.coordinates_nonsmooth
            << " at kinks skipped)\n";
  if (r.max_relative_error >= 1e-4) {
    std::cout << "worst " << model.params.tensors[r.worst_param].name << '[' << r.worst_index
              << "] analytic " << r.worst_analytic << " numeric " << r.worst_numeric << '\n';
    return kExitNumeric;
  }
  return 0;
}

std::vector<Condition> ParseConditions(const std::string& list) {
  std::vector<Condition> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item == "clean") out.push_back(Condition::kClean);
    else if (item == "noisy") out.push_back(Condition::kNoisy);
    else if (item == "shifted") out.push_back(Condition::kShifted);
    else throw ConfigError("unknown condition '" + item + "' (clean, noisy, shifted)");
  }
  if (out.empty()) throw ConfigError("no conditions given");
  return out;
}

int RunAblate(const std::vector<std::string>& configs, const std::vector<std::string>& overrides,
              std::size_t threads, const std::string& data_path, const std::string& out_dir,
              std::string ckpt_dir, const std::string& train_data,
              const std::string& conditions, std::optional<double> target,
              std::size_t log_every) {
  if (ckpt_dir.empty()) ckpt_dir = (std::filesystem::path(out_dir) / "checkpoints").string();
  std::filesystem::create_directories(out_dir);
  std::vector<Utterance> train_set;
  if (!train_data.empty()) train_set = ReadDataset(train_data);
  std::vector<AblationEntry> entries;
  std::optional<EvalConfig> eval;
  for (const std::string& file : configs) {
    ConfigArgs args{file, overrides};
    RunConfig c = args.Load(threads);
    if (c.name.empty()) c.name = std::filesystem::path(file).stem().string();
    if (target) c.eval.target_fa_per_hour = *target;
    if (!eval) eval = c.eval;
    const std::filesystem::path ckpt = std::filesystem::path(ckpt_dir) / (c.name + ".smpw");
    if (!train_set.empty() && !std::filesystem::exists(ckpt)) {
      std::cerr << "training " << c.name << '\n';
      TrainAndSave(c, train_set, ckpt.string(), log_every);
    }
    entries.push_back({c.name, ckpt});
  }
  if (!eval) throw ConfigError("ablate needs at least one --configs file");
  const auto data = ReadDataset(data_path);
  const auto conds = ParseConditions(conditions);
  const AblationReport report = RunAblation(entries, data, conds, *eval, out_dir);
  std::cout << report.Markdown();
  return 0;
}

int RunFeatures(const RunConfig& c, const std::string& list, const std::string& out) {
  std::ifstream in(list);
  if (!in) throw DataError("cannot open list " + list);
  std::vector<Utterance> data;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string path, label, end_ms;
    std::getline(ss, path, ',');
    std::getline(ss, label, ',');
    std::getline(ss, end_ms, ',');
    const std::string where = list + ":" + std::to_string(lineno);
    if (label != "positive" && label != "negative") {
      throw DataError(where + ": label must be positive or negative");
    }
    const WavAudio wav = ReadWav(path);
    if (wav.sample_rate != c.frontend.sample_rate) {
      throw DataError(where + ": sample rate " + std::to_string(wav.sample_rate) +
                      " differs from frontend " + std::to_string(c.frontend.sample_rate));
    }
    Utterance u;
    u.id = std::uint32_t(data.size());
    u.features = LogMel(wav.samples, c.frontend);
    if (label == "positive") {
      u.annotation.kind = UtteranceKind::kPositive;
      if (end_ms.empty()) throw DataError(where + ": positives need an end time in ms");
      u.annotation.end_frame =
          std::uint32_t(std::llround(std::stod(end_ms) / c.frontend.frame_step_ms));
    }
    u.Validate();
    data.push_back(std::move(u));
  }
  WriteDataset(out, data);
  WriteManifest(WithSuffix(out, ".manifest.json"), c);
  std::cout << "features: " << data.size() << " utterances -> " << out << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Keyword spotting with smoothed max pooling losses"};
  app.require_subcommand(1);
  int threads_flag = 0;
  app.add_option("--threads", threads_flag,
                 "Worker threads (default: SMP_KWS_THREADS, else all cores)")
      ->check(CLI::PositiveNumber);

  ConfigArgs synth_cfg, train_cfg, eval_cfg, grad_cfg, feat_cfg;
  std::string out, data_path, report, checkpoint, roc_path, list;
  std::size_t count = 1000, log_every = 100, utterances = 2, coords = 24;
  std::optional<std::uint64_t> seed;
  std::uint32_t first_id = 0;
  std::optional<double> target_fa;
  std::optional<std::size_t> suppression, hit_before, hit_after;

  auto* synth = app.add_subcommand("synth", "Write a synthetic keyword corpus");
  synth_cfg.Register(synth);
  synth->add_option("--out", out, "Dataset file")->required();
  synth->add_option("--count", count, "Number of utterances");
  synth->add_option("--seed", seed, "Corpus seed (overrides synth.seed)");
  synth->add_option("--first-id", first_id, "Id of the first utterance");

  auto* train = app.add_subcommand("train", "Train a model");
  train_cfg.Register(train);
  train->add_option("--data", data_path, "Training dataset")->required();
  train->add_option("--out", out, "Checkpoint file")->required();
  train->add_option("--report", report, "Loss trajectory CSV (default <out>.report.csv)");
  train->add_option("--log-every", log_every, "Progress line interval in steps (0: quiet)");

  auto* eval = app.add_subcommand("eval", "FR at a target FA/h");
  eval_cfg.Register(eval);
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  eval->add_option("--data", data_path, "Evaluation dataset")->required();
  eval->add_option("--target-fa", target_fa, "Target false accepts per hour");
  eval->add_option("--suppression", suppression, "Frames muted after a detection");
  eval->add_option("--hit-before", hit_before, "Hit window frames before the keyword end");
  eval->add_option("--hit-after", hit_after, "Hit window frames after the keyword end");
  eval->add_option("--roc", roc_path, "Write the ROC as CSV");

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of the training loss");
  grad_cfg.Register(grad);
  grad->add_option("--utterances", utterances, "Synthetic utterances in the batch");
  grad->add_option("--coords", coords, "Coordinates checked per parameter tensor");

  std::vector<std::string> ablate_configs, ablate_overrides;
  std::string ckpt_dir, train_data, conditions = "clean,noisy,shifted";
  auto* ablate = app.add_subcommand("ablate", "FR table across model configurations");
  ablate->add_option("--configs", ablate_configs, "Run configs, one per model")->required();
  ablate->add_option("--set", ablate_overrides, "Override applied to every config")->take_all();
  ablate->add_option("--data", data_path, "Evaluation dataset")->required();
  ablate->add_option("--out", out, "Report directory")->required();
  ablate->add_option("--checkpoint-dir", ckpt_dir, "Checkpoints named <model>.smpw");
  ablate->add_option("--train-data", train_data, "Train models whose checkpoint is missing");
  ablate->add_option("--conditions", conditions, "Comma-separated: clean,noisy,shifted");
  ablate->add_option("--target-fa", target_fa, "Target false accepts per hour");
  ablate->add_option("--log-every", log_every, "Progress line interval in steps (0: quiet)");

  auto* features = app.add_subcommand("features", "Log-mel features from WAV files");
  feat_cfg.Register(features);
  features->add_option("--list", list, "CSV lines: wav path,positive|negative[,end ms]")
      ->required();
  features->add_option("--out", out, "Dataset file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    const std::size_t threads = ResolveThreads(threads_flag);
    if (*synth) {
      if (seed) synth_cfg.overrides.push_back("synth.seed=" + std::to_string(*seed));
      return RunSynth(synth_cfg.Load(threads), out, count, first_id);
    }
    if (*train) return RunTrain(train_cfg.Load(threads), data_path, out, report, log_every);
    if (*eval) {
      auto& o = eval_cfg.overrides;
      if (target_fa) o.push_back("eval.target_fa_per_hour=" + std::to_string(*target_fa));
      if (suppression) o.push_back("eval.suppression=" + std::to_string(*suppression));
      if (hit_before) o.push_back("eval.hit_before=" + std::to_string(*hit_before));
      if (hit_after) o.push_back("eval.hit_after=" + std::to_string(*hit_after));
      return RunEval(eval_cfg.Load(threads), checkpoint, data_path, roc_path);
    }
    if (*grad) return RunGradCheck(grad_cfg.Load(threads), utterances, coords);
    if (*ablate) {
      return RunAblate(ablate_configs, ablate_overrides, threads, data_path, out, ckpt_dir,
                       train_data, conditions, target_fa, log_every);
    }
    if (*features) return RunFeatures(feat_cfg.Load(threads), list, out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
