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

// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits nonzero if any criterion fails. Pass criterion numbers to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "fixtures.h"
#include "oracles.h"
#include "smpkws/errors.h"
#include "smpkws/eval.h"
#include "smpkws/losses.h"
#include "smpkws/model.h"
#include "smpkws/run_config.h"
#include "smpkws/train.h"

using namespace smpkws;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

std::string Fmt(const char* format, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

std::size_t Threads() {
  if (const char* env = std::getenv("SMP_KWS_THREADS")) {
    return std::size_t(std::max(1L, std::atol(env)));
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// 1 -------------------------------------------------------------------------

Outcome GradientSuite() {
  const auto t0 = Clock::now();
  const std::size_t params = InitModel(fixture::TinyModelConfig(), 1, 0.5).params.count();
  double worst = 0.0;
  std::string worst_name;
  std::size_t coords = 0;
  for (const ModelVariant& v : ModelVariants()) {
    const GradCheckResult r = fixture::CheckVariantGradient(v, 2024);
    coords += r.coordinates_checked;
    if (r.max_relative_error >= worst) {
      worst = r.max_relative_error;
      worst_name = v.name;
    }
  }
  const double secs = Seconds(t0);
  return {worst < 1e-4 && secs < 60.0 && params <= 5000,
          "7 variants, " + std::to_string(params) + " params, " + std::to_string(coords) +
              " coords, max rel err " + Fmt("%.3g", worst) + " (" + worst_name + "), " +
              Fmt("%.1f", secs) + " s"};
}

// 2 -------------------------------------------------------------------------

Outcome LossOracle() {
  std::mt19937_64 rng(20);
  double worst = 0.0;
  bool argmax_ok = true;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t frames = 20 + rng() % 120;
    const std::size_t k = 1 + rng() % 4;
    const auto m = oracle::RandomPosteriors(frames, k + 1, rng);
    std::vector<PoolingWindow> w;
    std::size_t cursor = rng() % 5;
    for (std::size_t i = 1; i <= k && cursor < frames; ++i) {
      const std::size_t end = std::min(frames, cursor + 1 + rng() % 20);
      w.push_back({i, cursor, end});
      cursor = end + rng() % 6;
    }
    const Kernel kernel = trial % 3 == 0 ? Kernel::Delta()
                                         : MakeGaussianKernel(0.5 + double(rng() % 100) / 10,
                                                              1 + 2 * (rng() % 12));
    const Tensor y = oracle::ToTensor(m);
    std::vector<std::size_t> argmax;
    const auto want = oracle::PooledPositive(m, w, kernel.taps);
    worst = std::max(worst, std::abs(PooledPositiveLoss(y, w, kernel, &argmax) - want.loss));
    argmax_ok = argmax_ok && argmax == want.argmax;
    worst = std::max(worst, std::abs(NegativeLoss(y, w) - oracle::Negative(m, w)));

    // Total loss on a random tiny model under a variant cycling with the trial.
    const ModelVariant& v = ModelVariants()[std::size_t(trial) % ModelVariants().size()];
    const auto batch = fixture::TinyBatch(rng);
    const Model model = InitModel(fixture::TinyModelConfig(), rng(), 0.5);
    LossSpec spec = fixture::TinyLossSpec(v);
    spec.windows.alpha = double(rng() % 5) / 4;
    worst = std::max(worst,
                     std::abs(TotalLoss(batch, model, spec).total -
                              oracle::TotalLoss(batch, model, spec)));
  }
  return {worst < 1e-12 && argmax_ok,
          "200 instances, max abs diff " + Fmt("%.3g", worst) +
              (argmax_ok ? ", argmax agrees" : ", argmax differs")};
}

// 3 -------------------------------------------------------------------------

Outcome Reductions() {
  std::mt19937_64 rng(30);
  std::size_t failures = 0, checks = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t frames = 30 + rng() % 100;
    const auto m = oracle::RandomPosteriors(frames, 3, rng);
    const Tensor y = oracle::ToTensor(m);
    const std::size_t a = rng() % (frames / 2), b = frames / 2 + rng() % (frames / 2);
    const std::vector<PoolingWindow> w = {{1, a, a + 1 + rng() % (frames / 2 - a)},
                                          {2, b, b + 1 + rng() % (frames - b)}};
    // SMP with a length-1 kernel is MP.
    const Kernel k1 = MakeGaussianKernel(0.5 + double(rng() % 50), 1);
    failures += PooledPositiveLoss(y, w, k1) != PooledPositiveLoss(y, w, Kernel::Delta());
    // MP over a one-frame window at t is the CE positive term at t.
    const std::size_t t = rng() % frames;
    const std::size_t c = 1 + rng() % 2;
    const std::vector<PoolingWindow> single = {{c, t, t + 1}};
    std::vector<std::uint16_t> labels(1, std::uint16_t(c));
    Tensor row = Tensor::Matrix(1, 3);
    std::copy(y.row(t).begin(), y.row(t).end(), row.row(0).begin());
    failures += PooledPositiveLoss(y, single, Kernel::Delta()) != CrossEntropyLoss(row, labels);
    checks += 2;
  }
  for (const ModelVariant& v : ModelVariants()) {
    for (int trial = 0; trial < 5; ++trial) {
      const auto batch = fixture::TinyBatch(rng);
      const Model model = InitModel(fixture::TinyModelConfig(), rng(), 0.5);
      LossSpec spec = fixture::TinyLossSpec(v);
      spec.windows.alpha = 0.0;
      const LossBreakdown br = TotalLoss(batch, model, spec);
      failures += br.total != br.decoder;
      ++checks;
    }
  }
  return {failures == 0, std::to_string(checks - failures) + "/" + std::to_string(checks) +
                             " exact identities (SMP_L1=MP, MP_1=CE, alpha0=decoder)"};
}

// 4 -------------------------------------------------------------------------

Outcome WindowPlacement() {
  WindowSpec s;
  const bool decoder_example =
      DecoderWindows(100, s, 300) == std::vector<PoolingWindow>{{1, 80, 140}};
  const bool encoder_example =
      EncoderWindows(200, s, 300) ==
      std::vector<PoolingWindow>{{1, 160, 180}, {2, 180, 200}, {3, 200, 220}, {4, 220, 240}};

  std::mt19937_64 rng(40);
  std::size_t trials = 0, broken = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    WindowSpec r;
    r.num_units = 1 + rng() % 6;
    r.encoder_size = 1 + rng() % 25;
    r.encoder_stride = r.encoder_size + rng() % 20;
    r.encoder_offset = std::int64_t(rng() % 80) - 10;
    r.decoder_size = 1 + rng() % 80;
    r.decoder_offset = std::int64_t(rng() % 80) - 10;
    const std::size_t frames = 30 + rng() % 250;
    const std::size_t end = rng() % frames;
    for (bool decoder : {false, true}) {
      std::vector<PoolingWindow> w;
      try {
        w = decoder ? DecoderWindows(end, r, frames) : EncoderWindows(end, r, frames);
      } catch (const EmptyWindowError&) {
        continue;
      }
      ++trials;
      // Windows match the placement formulas and, with the complement tau^c,
      // cover every frame exactly once.
      bool ok = w == oracle::Windows(decoder, end, r, frames);
      std::vector<int> cover(frames, 0);
      for (const auto& x : w) {
        ok = ok && x.start < x.end && x.end <= frames;
        for (std::size_t t = x.start; t < x.end && t < frames; ++t) ++cover[t];
      }
      Tensor uniform = Tensor::Matrix(frames, r.num_units + 1);
      for (double& v : uniform.values()) v = 1.0 / double(r.num_units + 1);
      std::size_t complement = 0;
      for (int c : cover) {
        ok = ok && c <= 1;
        complement += c == 0;
      }
      const double want = double(complement) * std::log(double(r.num_units + 1));
      ok = ok && std::abs(NegativeLoss(uniform, w) - want) <= 1e-9 * std::max(1.0, want);
      broken += !ok;
    }
  }
  return {decoder_example && encoder_example && broken == 0,
          std::string("examples ") + (decoder_example && encoder_example ? "exact" : "differ") +
              ", partition held in " + std::to_string(trials - broken) + "/" +
              std::to_string(trials) + " trials"};
}

// 5 -------------------------------------------------------------------------

Outcome Invariance() {
  std::mt19937_64 rng(50);
  double worst = 0.0;
  bool argmax_shifts = true;
  for (int trial = 0; trial < 100; ++trial) {
    const Kernel k = MakeGaussianKernel(9, 21);
    const std::size_t frames = 200;
    const auto m = oracle::RandomPosteriors(frames, 3, rng);
    const std::vector<PoolingWindow> w = {{1, 40, 60}, {2, 70, 100}};
    const long delta = long(rng() % 41) - 20;
    oracle::Matrix shifted(frames, std::vector<double>(3, 1.0 / 3));
    for (long t = 0; t < long(frames); ++t) {
      if (t - delta >= 0 && t - delta < long(frames)) shifted[std::size_t(t)] = m[t - delta];
    }
    std::vector<PoolingWindow> ws = w;
    for (auto& x : ws) {
      x.start = std::size_t(long(x.start) + delta);
      x.end = std::size_t(long(x.end) + delta);
    }
    std::vector<std::size_t> a1, a2;
    const double l1 = PooledPositiveLoss(oracle::ToTensor(m), w, k, &a1);
    const double l2 = PooledPositiveLoss(oracle::ToTensor(shifted), ws, k, &a2);
    worst = std::max(worst, std::abs(l1 - l2));
    for (std::size_t i = 0; i < a1.size(); ++i) {
      argmax_shifts = argmax_shifts && long(a2[i]) == long(a1[i]) + delta;
    }
  }

  // Moving the endpoint while every maximiser stays inside the old and new
  // windows leaves the loss unchanged.
  WindowSpec s;
  s.num_units = 2;
  std::size_t endpoint_trials = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t frames = 260;
    oracle::Matrix m = oracle::RandomPosteriors(frames, 3, rng, 0.3);
    const std::size_t end = 120 + rng() % 20;
    const auto windows = EncoderWindows(end, s, frames);
    for (const auto& w : windows) {
      const std::size_t peak = w.start + 5 + rng() % (w.size() - 10);
      for (long d = -3; d <= 3; ++d) {
        auto& row = m[std::size_t(long(peak) + d)];
        row.assign(3, 0.02);
        row[w.target] = 0.96;
      }
    }
    const Kernel k = MakeGaussianKernel(4, 9);
    const Tensor y = oracle::ToTensor(m);
    const double base = PooledPositiveLoss(y, windows, k);
    const long delta = long(rng() % 9) - 4;
    const auto moved = EncoderWindows(std::size_t(long(end) + delta), s, frames);
    bool inside = true;
    for (std::size_t i = 0; i < moved.size(); ++i) {
      const auto sm = oracle::Smooth(m, moved[i].target, k.taps);
      const auto g = std::size_t(std::max_element(sm.begin(), sm.end()) - sm.begin());
      inside = inside && g >= moved[i].start && g < moved[i].end && g >= windows[i].start &&
               g < windows[i].end;
    }
    if (!inside) continue;
    ++endpoint_trials;
    worst = std::max(worst, std::abs(PooledPositiveLoss(y, moved, k) - base));
  }
  return {worst <= 1e-12 && argmax_shifts && endpoint_trials >= 80,
          "100 shift trials + " + std::to_string(endpoint_trials) +
              " endpoint trials, max abs diff " + Fmt("%.3g", worst)};
}

// 6 -------------------------------------------------------------------------

ModelConfig RandomModelConfig(std::mt19937_64& rng) {
  ModelConfig c;
  c.num_units = 1 + rng() % 4;
  c.feature_dim = 2 + rng() % 6;
  c.context_left = rng() % 3;
  c.context_right = rng() % 2;
  auto svdf = [&](std::size_t units) {
    return LayerConfig::Svdf(units, 1 + rng() % 6, 1 + rng() % 2,
                             rng() % 2 ? Activation::kRelu : Activation::kLinear);
  };
  c.encoder = {svdf(3 + rng() % 6)};
  if (rng() % 2) c.encoder.push_back(LayerConfig::Dense(2 + rng() % 4, Activation::kLinear));
  c.encoder.push_back(svdf(3 + rng() % 6));
  c.decoder = {svdf(2 + rng() % 5)};
  if (rng() % 2) c.decoder.push_back(svdf(2 + rng() % 5));
  return c;
}

Outcome Streaming() {
  std::mt19937_64 rng(60);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const Model m = InitModel(RandomModelConfig(rng), rng(), 0.7);
    const std::size_t frames = 1 + rng() % 60;
    Tensor x = Tensor::Matrix(frames, m.config.input_dim());
    std::normal_distribution<double> n(0.0, 1.0);
    for (double& v : x.values()) v = n(rng);
    const HeadOutputs batch = FullForward(m, x);
    // Feed the frames in random-length chunks with carried state.
    StreamingState state = MakeStreamingState(m.config);
    std::size_t t = 0;
    while (t < frames) {
      const std::size_t len = std::min(frames - t, std::size_t(rng() % 12));
      Tensor chunk = Tensor::Matrix(len, x.cols());
      for (std::size_t r = 0; r < len; ++r) {
        std::copy(x.row(t + r).begin(), x.row(t + r).end(), chunk.row(r).begin());
      }
      const HeadOutputs out = ForwardStreaming(m, chunk, state);
      for (std::size_t r = 0; r < len; ++r) {
        for (std::size_t c = 0; c < out.encoder.cols(); ++c) {
          worst = std::max(worst, std::abs(out.encoder(r, c) - batch.encoder(t + r, c)));
        }
        for (std::size_t c = 0; c < out.decoder.cols(); ++c) {
          worst = std::max(worst, std::abs(out.decoder(r, c) - batch.decoder(t + r, c)));
        }
      }
      t += len;
    }
  }
  return {worst < 1e-9, "100 random models, chunked input, max abs diff " + Fmt("%.3g", worst)};
}

// 7 -------------------------------------------------------------------------

// Exactly `positives` keyword utterances and `negatives` non-keyword ones.
std::vector<Utterance> BalancedCorpus(SynthConfig c, std::size_t positives, std::size_t negatives,
                                      std::uint32_t first_id, std::size_t threads) {
  c.keyword_probability = 1.0;
  std::vector<Utterance> out = SynthCorpus(c, positives, first_id, threads);
  c.keyword_probability = 0.0;
  auto neg = SynthCorpus(c, negatives, first_id + 1000000, threads);
  out.insert(out.end(), std::make_move_iterator(neg.begin()), std::make_move_iterator(neg.end()));
  return out;
}

RunConfig VariantConfig(const std::string& name, std::size_t threads) {
  RunConfig c = LoadRunConfig(fs::path(SMPKWS_SOURCE_DIR) / "configs" / (name + ".json"));
  c.train.threads = threads;
  c.eval.threads = threads;
  return c;
}

Outcome Convergence() {
  const std::size_t threads = Threads();
  const RunConfig max4 = VariantConfig("Max4_SMP_SMP", threads);
  const auto train = BalancedCorpus(max4.synth, 2000, 2000, 0, threads);
  const auto test = BalancedCorpus(max4.synth, 500, 500, 5000000, threads);
  std::size_t prefix = 0;
  for (const auto& u : train) {
    if (u.annotation.positive() || !u.annotation.labels) continue;
    const auto& l = *u.annotation.labels;
    std::uint16_t last = 0;
    bool ordered = true, any = false;
    for (auto v : l) {
      if (v == 0 || v == last) continue;
      ordered = ordered && v == last + 1;
      last = v;
      any = true;
    }
    prefix += any && ordered;
  }

  auto t0 = Clock::now();
  const TrainResult r4 = Train(train, max4.train);
  const double secs4 = Seconds(t0);
  const auto roc = FaFrSweep(ScoreDataset(r4.model, test, threads), max4.eval);
  const OperatingPoint zero = SelectOperatingPoint(roc, 0.0);
  const double initial = r4.report.steps.front().total, last = r4.report.steps.back().total;

  const RunConfig base = VariantConfig("Baseline_CE_CE", threads);
  t0 = Clock::now();
  const TrainResult rb = Train(train, base.train);
  const double secsb = Seconds(t0);
  const double accuracy = EncoderFrameAccuracy(rb.model, test);

  const bool pass = prefix > 0 && secs4 < 600.0 && zero.meets_target && zero.fr <= 0.05 &&
                    accuracy > 0.90;
  return {pass, "Max4 " + Fmt("%.0f", secs4) + " s, loss " + Fmt("%.3g", initial) + " -> " +
                    Fmt("%.3g", last) + ", FR at 0 FA/h " + Fmt("%.2f%%", 100 * zero.fr) +
                    " (threshold " + Fmt("%.4f", zero.threshold) + ", " +
                    std::to_string(prefix) + " prefix hard negatives in training); Baseline " +
                    Fmt("%.0f", secsb) + " s, encoder frame accuracy " +
                    Fmt("%.2f%%", 100 * accuracy)};
}

// 8 -------------------------------------------------------------------------

int RunCli(const std::string& args, const fs::path& log) {
  const std::string cmd = "'" SMPKWS_BIN "' " + args + " > '" + log.string() + "' 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome Ablation() {
  const fs::path dir = fs::temp_directory_path() / "smpkws_acceptance_ablation";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path log = dir / "log.txt";
  const std::string threads = "--threads " + std::to_string(Threads()) + " ";
  if (RunCli(threads + "synth --out '" + (dir / "train.kwsd").string() + "' --count 400",
             log) != 0 ||
      RunCli(threads + "synth --out '" + (dir / "test.kwsd").string() +
                 "' --count 200 --first-id 100000",
             log) != 0) {
    return {false, "synth failed, see " + log.string()};
  }
  std::string configs;
  for (const ModelVariant& v : ModelVariants()) {
    configs += " '" + (fs::path(SMPKWS_SOURCE_DIR) / "configs" / v.name).string() + ".json'";
  }
  const fs::path out = dir / "report";
  const auto t0 = Clock::now();
  const int code = RunCli(threads + "ablate --configs" + configs + " --data '" +
                              (dir / "test.kwsd").string() + "' --train-data '" +
                              (dir / "train.kwsd").string() + "' --out '" + out.string() +
                              "' --log-every 0 --set train.steps=150",
                          log);
  if (code != 0) return {false, "ablate exited " + std::to_string(code) + ", see " + log.string()};

  std::ifstream in(out / "report.md");
  std::stringstream ss;
  ss << in.rdbuf();
  const std::string md = ss.str();
  std::size_t rows = 0, csvs = 0;
  for (const ModelVariant& v : ModelVariants()) {
    const std::string row = std::string("| ") + v.name + " |";
    rows += md.find(row) != std::string::npos &&
            md.find(row + " absent") == std::string::npos;
    std::ifstream csv(out / ("roc_" + std::string(v.name) + ".csv"));
    std::string header;
    csvs += std::getline(csv, header) && header == "threshold,fr,fa_per_hour";
  }
  std::ifstream svg_in(out / "roc.svg");
  std::stringstream svg;
  svg << svg_in.rdbuf();
  const bool svg_ok = svg.str().find("<svg") != std::string::npos &&
                      svg.str().find("</svg>") != std::string::npos;
  const bool header = md.find("| Model | clean | noisy | shifted |") != std::string::npos;
  const bool pass = rows == 7 && csvs == 7 && svg_ok && header;
  if (pass) fs::remove_all(dir);
  return {pass, std::to_string(rows) + "/7 table rows, " + std::to_string(csvs) +
                    "/7 ROC CSVs, SVG " + (svg_ok ? "ok" : "missing") + ", " +
                    Fmt("%.0f", Seconds(t0)) + " s"};
}

// 9 -------------------------------------------------------------------------

std::vector<ScoredUtterance> RandomScored(std::mt19937_64& rng, std::size_t count) {
  std::vector<ScoredUtterance> out;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t n = 40 + rng() % 200;
    std::vector<double> s(n);
    const bool coarse = rng() % 2;
    for (double& v : s) v = coarse ? std::round(std::pow(u(rng), 3) * 20) / 20 : u(rng);
    const bool positive = i == 0 || (i > 1 && rng() % 2);
    out.push_back({std::uint32_t(i), positive,
                   positive ? std::optional<std::size_t>(rng() % n) : std::nullopt,
                   std::move(s)});
  }
  return out;
}

Outcome RocCorrectness() {
  std::mt19937_64 rng(90);
  std::size_t instances = 0, thresholds = 0, mismatches = 0, non_monotone = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto s = RandomScored(rng, 2 + rng() % 49);
    EvalConfig c;
    c.suppression = 1 + rng() % 120;
    c.hit_before = rng() % 80;
    c.hit_after = rng() % 100;
    const auto roc = FaFrSweep(s, c);
    ++instances;
    for (std::size_t i = 1; i < roc.size(); ++i) {
      non_monotone += !(roc[i].threshold < roc[i - 1].threshold &&
                        roc[i].fr <= roc[i - 1].fr &&
                        roc[i].fa_per_hour >= roc[i - 1].fa_per_hour);
    }
    // Every distinct score, and 0, as a threshold: the sweep point covering
    // it must report exactly the brute-force outcome.
    std::set<double> candidates = {0.0};
    for (const auto& u : s) candidates.insert(u.scores.begin(), u.scores.end());
    for (double theta : candidates) {
      ++thresholds;
      const auto want = oracle::RocAt(s, theta, c);
      const auto it = std::find_if(roc.rbegin(), roc.rend(),
                                   [&](const RocPoint& p) { return p.threshold >= theta; });
      if (it == roc.rend()) {
        mismatches += want.false_accepts != 0 || want.fr != 1.0;
        continue;
      }
      mismatches += it->misses != want.misses || it->false_accepts != want.false_accepts ||
                    it->fr != want.fr || it->fa_per_hour != want.fa_per_hour;
    }
    for (const RocPoint& p : roc) {
      const auto want = oracle::RocAt(s, p.threshold, c);
      mismatches += p.misses != want.misses || p.false_accepts != want.false_accepts;
    }
  }
  return {mismatches == 0 && non_monotone == 0,
          std::to_string(instances) + " instances, " + std::to_string(thresholds) +
              " brute-force thresholds, " + std::to_string(mismatches) + " mismatches, " +
              std::to_string(non_monotone) + " monotonicity violations"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"gradient suite", GradientSuite},
      {"loss oracle equivalence", LossOracle},
      {"exact reductions", Reductions},
      {"window placement", WindowPlacement},
      {"translation/endpoint invariance", Invariance},
      {"streaming equivalence", Streaming},
      {"end-to-end convergence", Convergence},
      {"ablation harness", Ablation},
      {"ROC correctness", RocCorrectness},
  };
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = int(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    all = all && o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << ' ' << id << ' ' << criteria[i].first << ": "
              << o.detail << std::endl;
  }
  return all ? 0 : 1;
}
