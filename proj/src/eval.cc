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

#include "smpkws/eval.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "smpkws/errors.h"
#include "smpkws/json_util.h"

namespace smpkws {
namespace {

// Piecewise-constant false-accept count of one negative: count(theta) equals
// `counts[i]` for the smallest breakpoint values[i] >= theta, 0 above all.
struct CountSteps {
  std::vector<double> values;  // ascending
  std::vector<std::size_t> counts;

  std::size_t At(double theta) const {
    auto it = std::lower_bound(values.begin(), values.end(), theta);
    return it == values.end() ? 0 : counts[std::size_t(it - values.begin())];
  }
};

// Breakpoints by bisection over the distinct scores: the count is monotone
// in the threshold, so equal counts at both ends of a range mean no change
// inside it.
CountSteps NegativeSteps(const ScoredUtterance& u, const EvalConfig& config) {
  std::vector<double> distinct = u.scores;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  CountSteps steps;
  if (distinct.empty()) return steps;
  std::map<std::size_t, std::size_t> memo;
  auto count = [&](std::size_t i) {
    auto it = memo.find(i);
    if (it != memo.end()) return it->second;
    const std::size_t c = FalseAccepts(u, distinct[i], config);
    memo.emplace(i, c);
    return c;
  };
  // Index i is a breakpoint when count(i) > count(i + 1) (or i is the top).
  std::vector<std::size_t> found;
  auto search = [&](auto&& self, std::size_t lo, std::size_t hi) -> void {
    // Invariant: lo < hi, looking for breakpoints in [lo, hi).
    if (count(lo) == count(hi)) return;
    if (hi - lo == 1) {
      found.push_back(lo);
      return;
    }
    const std::size_t mid = lo + (hi - lo) / 2;
    self(self, lo, mid);
    self(self, mid, hi);
  };
  const std::size_t top = distinct.size() - 1;
  if (top > 0) search(search, 0, top);
  if (count(top) > 0) found.push_back(top);
  std::sort(found.begin(), found.end());
  for (std::size_t i : found) {
    steps.values.push_back(distinct[i]);
    steps.counts.push_back(count(i));
  }
  return steps;
}

double WindowPeak(const ScoredUtterance& u, const EvalConfig& config) {
  if (!u.end_frame) {
    throw DataError("positive utterance " + std::to_string(u.id) + " has no keyword end frame");
  }
  const std::size_t n = u.scores.size();
  const std::size_t end = *u.end_frame;
  const std::size_t lo = end > config.hit_before ? end - config.hit_before : 0;
  const std::size_t hi = std::min(n == 0 ? 0 : n - 1, end + config.hit_after);
  if (n == 0 || lo > hi) return -INFINITY;
  return *std::max_element(u.scores.begin() + lo, u.scores.begin() + hi + 1);
}

std::string Fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string SafeName(const std::string& name) {
  std::string out = name;
  for (char& c : out) {
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') c = '_';
  }
  return out;
}

void WriteText(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

}  // namespace

void EvalConfig::Validate() const {
  if (suppression == 0) throw ConfigError("eval.suppression must be >= 1 frame");
  if (!(target_fa_per_hour >= 0.0)) throw ConfigError("eval.target_fa_per_hour must be >= 0");
  if (!(frame_step_ms > 0.0)) throw ConfigError("eval.frame_step_ms must be positive");
  if (threads == 0) throw ConfigError("thread count must be positive");
}

nlohmann::json EvalConfigToJson(const EvalConfig& c) {
  return {{"suppression", c.suppression},
          {"hit_before", c.hit_before},
          {"hit_after", c.hit_after},
          {"target_fa_per_hour", c.target_fa_per_hour}};
}

void EvalConfigFromJson(const nlohmann::json& j, EvalConfig& c) {
  RejectUnknownKeys(j, "eval",
                    {"suppression", "hit_before", "hit_after", "target_fa_per_hour"});
  ReadKey(j, "eval", "suppression", c.suppression);
  ReadKey(j, "eval", "hit_before", c.hit_before);
  ReadKey(j, "eval", "hit_after", c.hit_after);
  ReadKey(j, "eval", "target_fa_per_hour", c.target_fa_per_hour);
  c.Validate();
}

std::vector<Detection> Detect(std::span<const double> scores, double threshold,
                              std::size_t suppression, std::uint32_t utterance_id) {
  if (suppression == 0) throw ConfigError("suppression window must be >= 1 frame");
  std::vector<Detection> out;
  std::size_t muted_until = 0;
  for (std::size_t t = 0; t < scores.size(); ++t) {
    if (t < muted_until || scores[t] < threshold) continue;
    out.push_back({utterance_id, t, scores[t]});
    muted_until = t + suppression;
  }
  return out;
}

std::vector<double> ScoreUtterance(const Model& model, const Utterance& utterance) {
  StreamingState state = MakeStreamingState(model.config);
  const HeadOutputs out =
      ForwardStreaming(model, PrepareInput(model.config, utterance.features), state);
  std::vector<double> scores(out.decoder.rows());
  for (std::size_t t = 0; t < scores.size(); ++t) scores[t] = out.decoder(t, 1);
  return scores;
}

std::vector<ScoredUtterance> ScoreDataset(const Model& model, std::span<const Utterance> dataset,
                                          std::size_t threads) {
  std::vector<ScoredUtterance> out(dataset.size());
  auto work = [&](std::size_t i) {
    const Utterance& u = dataset[i];
    out[i].id = u.id;
    out[i].positive = u.annotation.positive();
    if (u.annotation.end_frame) out[i].end_frame = *u.annotation.end_frame;
    out[i].scores = ScoreUtterance(model, u);
  };
  const std::size_t workers =
      std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(1, dataset.size()));
  if (workers == 1) {
    for (std::size_t i = 0; i < dataset.size(); ++i) work(i);
    return out;
  }
  std::exception_ptr failure;
  std::mutex mu;
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < dataset.size(); i += workers) work(i);
        } catch (...) {
          std::lock_guard lock(mu);
          if (!failure) failure = std::current_exception();
        }
      });
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

double EncoderFrameAccuracy(const Model& model, std::span<const Utterance> dataset) {
  std::size_t correct = 0, total = 0;
  for (const Utterance& u : dataset) {
    if (!u.annotation.labels) continue;
    const Tensor enc = EncoderForward(model, PrepareInput(model.config, u.features));
    const auto& labels = *u.annotation.labels;
    for (std::size_t t = 0; t < labels.size(); ++t) {
      const auto row = enc.row(t);
      const auto best = std::size_t(std::max_element(row.begin(), row.end()) - row.begin());
      correct += best == labels[t];
      ++total;
    }
  }
  return total ? double(correct) / double(total) : 0.0;
}

bool PositiveHit(const ScoredUtterance& u, double threshold, const EvalConfig& config) {
  return WindowPeak(u, config) >= threshold;
}

std::size_t FalseAccepts(const ScoredUtterance& u, double threshold, const EvalConfig& config) {
  return Detect(u.scores, threshold, config.suppression, u.id).size();
}

double NegativeHours(std::span<const ScoredUtterance> scored, const EvalConfig& config) {
  std::size_t frames = 0;
  for (const auto& u : scored) {
    if (!u.positive) frames += u.scores.size();
  }
  return double(frames) * config.frame_step_ms / 3.6e6;
}

std::vector<RocPoint> FaFrSweep(std::span<const ScoredUtterance> scored,
                                const EvalConfig& config) {
  config.Validate();
  std::vector<double> peaks;
  std::vector<CountSteps> negatives;
  std::vector<double> candidates = {0.0};
  for (const auto& u : scored) {
    if (u.positive) {
      peaks.push_back(WindowPeak(u, config));
      if (std::isfinite(peaks.back())) candidates.push_back(peaks.back());
    } else {
      negatives.push_back(NegativeSteps(u, config));
      candidates.insert(candidates.end(), negatives.back().values.begin(),
                        negatives.back().values.end());
    }
  }
  if (peaks.empty() || negatives.empty()) {
    throw DataError("ROC needs at least one positive and one negative utterance");
  }
  const double hours = NegativeHours(scored, config);
  if (!(hours > 0.0)) throw ConfigError("negative audio has zero duration");
  std::sort(candidates.begin(), candidates.end(), std::greater<>());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  std::vector<RocPoint> roc;
  for (double theta : candidates) {
    RocPoint p;
    p.threshold = theta;
    for (double peak : peaks) p.misses += peak < theta;
    for (const auto& n : negatives) p.false_accepts += n.At(theta);
    p.fr = double(p.misses) / double(peaks.size());
    p.fa_per_hour = double(p.false_accepts) / hours;
    roc.push_back(p);
  }
  return roc;
}

OperatingPoint SelectOperatingPoint(std::span<const RocPoint> roc, double target) {
  if (roc.empty()) throw DataError("empty ROC");
  std::optional<std::size_t> pick;
  for (std::size_t i = 0; i < roc.size(); ++i) {
    if (roc[i].fa_per_hour <= target) pick = i;
  }
  OperatingPoint op;
  const std::size_t i = pick.value_or(0);
  op.meets_target = pick.has_value();
  op.threshold = i + 1 < roc.size() ? 0.5 * (roc[i].threshold + roc[i + 1].threshold)
                                    : roc[i].threshold;
  op.fr = roc[i].fr;
  op.fa_per_hour = roc[i].fa_per_hour;
  return op;
}

void WriteRocCsv(const std::filesystem::path& path, std::span<const RocPoint> roc) {
  std::ostringstream out;
  out.precision(17);
  out << "threshold,fr,fa_per_hour\n";
  for (const RocPoint& p : roc) out << p.threshold << ',' << p.fr << ',' << p.fa_per_hour << '\n';
  WriteText(path, out.str());
}

std::string RocSvg(std::span<const RocCurve> curves) {
  static const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                  "#9467bd", "#8c564b", "#e377c2", "#17becf"};
  const double w = 640, h = 480, left = 60, right = 180, top = 20, bottom = 50;
  const double pw = w - left - right, ph = h - top - bottom;
  double max_fa = 0.0;
  for (const auto& c : curves) {
    for (const auto& p : c.points) max_fa = std::max(max_fa, p.fa_per_hour);
  }
  if (max_fa <= 0.0) max_fa = 1.0;
  auto x = [&](double fa) { return left + pw * fa / max_fa; };
  auto y = [&](double fr) { return top + ph * (1.0 - fr); };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
    << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double fr = i / 4.0, fa = max_fa * i / 4.0;
    s << "<text x=\"" << left - 6 << "\" y=\"" << Fixed(y(fr) + 4, 2)
      << "\" text-anchor=\"end\">" << Fixed(fr, 2) << "</text>\n";
    s << "<text x=\"" << Fixed(x(fa), 2) << "\" y=\"" << top + ph + 16
      << "\" text-anchor=\"middle\">" << Fixed(fa, 2) << "</text>\n";
  }
  s << "<text x=\"" << left + pw / 2 << "\" y=\"" << h - 12
    << "\" text-anchor=\"middle\">false accepts per hour</text>\n";
  s << "<text x=\"16\" y=\"" << top + ph / 2 << "\" transform=\"rotate(-90 16 " << top + ph / 2
    << ")\" text-anchor=\"middle\">false reject rate</text>\n";
  for (std::size_t c = 0; c < curves.size(); ++c) {
    const char* color = kColors[c % std::size(kColors)];
    s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (const auto& p : curves[c].points) {
      s << Fixed(x(p.fa_per_hour), 2) << ',' << Fixed(y(p.fr), 2) << ' ';
    }
    s << "\"/>\n";
    const double ly = top + 14 + 18 * double(c);
    s << "<line x1=\"" << left + pw + 12 << "\" y1=\"" << ly - 4 << "\" x2=\"" << left + pw + 32
      << "\" y2=\"" << ly - 4 << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    s << "<text x=\"" << left + pw + 38 << "\" y=\"" << ly << "\">" << curves[c].name
      << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

const char* ConditionName(Condition c) {
  switch (c) {
    case Condition::kClean: return "clean";
    case Condition::kNoisy: return "noisy";
    case Condition::kShifted: return "shifted";
  }
  return "clean";
}

std::vector<Utterance> ApplyCondition(std::span<const Utterance> dataset, Condition c,
                                      std::uint64_t seed) {
  std::vector<Utterance> out;
  out.reserve(dataset.size());
  for (const Utterance& u : dataset) {
    switch (c) {
      case Condition::kClean:
        out.push_back(u);
        break;
      case Condition::kNoisy: {
        AugmentConfig a;
        a.snr_db_min = a.snr_db_max = 5.0;
        a.max_shift = 0;
        std::mt19937_64 rng(seed * 0x9e3779b97f4a7c15ull + u.id);
        out.push_back(Augment(u, a, rng));
        break;
      }
      case Condition::kShifted: {
        std::ptrdiff_t delta = u.id % 2 ? 20 : -20;
        const Annotation& a = u.annotation;
        if (a.end_frame) {
          const auto end = std::ptrdiff_t(*a.end_frame);
          const auto start = std::ptrdiff_t(a.keyword_start().value_or(*a.end_frame));
          delta = std::clamp<std::ptrdiff_t>(delta, -start,
                                             std::ptrdiff_t(u.num_frames()) - 1 - end);
        }
        out.push_back(ShiftUtterance(u, delta));
        break;
      }
    }
  }
  return out;
}

std::string AblationReport::Markdown() const {
  std::ostringstream s;
  s << "# False reject rate at " << Fixed(target_fa_per_hour, 2) << " FA/h\n\n";
  s << "| Model |";
  for (Condition c : conditions) s << ' ' << ConditionName(c) << " |";
  s << "\n|---|";
  for (std::size_t i = 0; i < conditions.size(); ++i) s << "---|";
  s << '\n';
  bool any_unmet = false;
  for (const AblationRow& r : rows) {
    s << "| " << r.name << " |";
    for (std::size_t i = 0; i < conditions.size(); ++i) {
      if (!r.present) {
        s << " absent |";
        continue;
      }
      const OperatingPoint& p = r.cells[i].point;
      s << ' ' << Fixed(100.0 * p.fr, 2) << '%' << (p.meets_target ? "" : "*") << " |";
      any_unmet = any_unmet || !p.meets_target;
    }
    s << '\n';
  }
  if (any_unmet) s << "\n\\* no threshold reaches the target; strictest threshold shown.\n";
  std::vector<const AblationRow*> ranked;
  for (const AblationRow& r : rows) {
    if (r.present && !r.cells.empty()) ranked.push_back(&r);
  }
  std::stable_sort(ranked.begin(), ranked.end(), [](const AblationRow* a, const AblationRow* b) {
    return a->cells[0].point.fr < b->cells[0].point.fr;
  });
  if (!ranked.empty()) {
    s << "\nOrdering by " << ConditionName(conditions[0]) << " FR (informational): ";
    for (std::size_t i = 0; i < ranked.size(); ++i) {
      if (i) {
        const bool tie = ranked[i]->cells[0].point.fr == ranked[i - 1]->cells[0].point.fr;
        s << (tie ? " = " : " < ");
      }
      s << ranked[i]->name;
    }
    s << '\n';
  }
  return s.str();
}

AblationReport RunAblation(std::span<const AblationEntry> models,
                           std::span<const Utterance> dataset,
                           std::span<const Condition> conditions,
                           const EvalConfig& config, const std::filesystem::path& out_dir,
                           std::uint64_t seed) {
  config.Validate();
  if (conditions.empty()) throw ConfigError("ablation needs at least one condition");
  std::filesystem::create_directories(out_dir);
  std::vector<std::vector<Utterance>> sets;
  for (Condition c : conditions) sets.push_back(ApplyCondition(dataset, c, seed));

  AblationReport report;
  report.conditions.assign(conditions.begin(), conditions.end());
  report.target_fa_per_hour = config.target_fa_per_hour;
  std::vector<RocCurve> curves;
  for (const AblationEntry& m : models) {
    AblationRow row;
    row.name = m.name;
    row.present = std::filesystem::exists(m.checkpoint);
    if (row.present) {
      const Model model = LoadCheckpoint(m.checkpoint);
      for (std::size_t c = 0; c < sets.size(); ++c) {
        const auto scored = ScoreDataset(model, sets[c], config.threads);
        const auto roc = FaFrSweep(scored, config);
        row.cells.push_back({SelectOperatingPoint(roc, config.target_fa_per_hour)});
        if (c == 0) {
          WriteRocCsv(out_dir / ("roc_" + SafeName(m.name) + ".csv"), roc);
          curves.push_back({m.name, roc});
        }
      }
    }
    report.rows.push_back(std::move(row));
  }
  WriteText(out_dir / "roc.svg", RocSvg(curves));
  WriteText(out_dir / "report.md", report.Markdown());
  return report;
}

}  // namespace smpkws
