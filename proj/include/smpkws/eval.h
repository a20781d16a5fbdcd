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
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "smpkws/data.h"
#include "smpkws/model.h"

namespace smpkws {

struct Detection {
  std::uint32_t utterance_id = 0;
  std::size_t frame = 0;
  double score = 0.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

struct EvalConfig {
  // Frames muted after each detection.
  std::size_t suppression = 100;
  // A positive is detected when it fires inside
  // [end - hit_before, end + hit_after] (inclusive).
  std::size_t hit_before = 50;
  std::size_t hit_after = 75;
  double target_fa_per_hour = 0.1;
  double frame_step_ms = 10.0;
  std::size_t threads = 1;

  void Validate() const;
};

// frame_step_ms and threads are not part of the JSON form; they follow the
// frontend and the process settings.
nlohmann::json EvalConfigToJson(const EvalConfig& config);
void EvalConfigFromJson(const nlohmann::json& json, EvalConfig& config);

// Fires at the first frame with score >= threshold, then ignores the next
// suppression - 1 frames, and repeats.
std::vector<Detection> Detect(std::span<const double> scores, double threshold,
                              std::size_t suppression, std::uint32_t utterance_id = 0);

// Per-frame decoder keyword posterior from the streaming forward pass.
std::vector<double> ScoreUtterance(const Model& model, const Utterance& utterance);

struct ScoredUtterance {
  std::uint32_t id = 0;
  bool positive = false;
  std::optional<std::size_t> end_frame;
  std::vector<double> scores;
};

std::vector<ScoredUtterance> ScoreDataset(const Model& model, std::span<const Utterance> dataset,
                                          std::size_t threads = 1);

// Fraction of labelled frames whose encoder argmax equals the frame label;
// utterances without labels are ignored. Returns 0 when nothing is labelled.
double EncoderFrameAccuracy(const Model& model, std::span<const Utterance> dataset);

// Positive hit rule: the detector restarted at the hit window's first frame
// fires before the window closes, i.e. the window's peak score reaches the
// threshold. Earlier firings outside the window therefore cannot mask it.
bool PositiveHit(const ScoredUtterance& u, double threshold, const EvalConfig& config);
// Detections on a negative utterance.
std::size_t FalseAccepts(const ScoredUtterance& u, double threshold, const EvalConfig& config);
double NegativeHours(std::span<const ScoredUtterance> scored, const EvalConfig& config);

struct RocPoint {
  double threshold = 0.0;
  double fr = 0.0;
  double fa_per_hour = 0.0;
  std::size_t misses = 0;
  std::size_t false_accepts = 0;

  friend bool operator==(const RocPoint&, const RocPoint&) = default;
};

// One point per threshold at which any outcome changes (window peaks of
// positives, count breakpoints of negatives) plus threshold 0, ordered by
// decreasing threshold. Requires at least one positive and one negative.
std::vector<RocPoint> FaFrSweep(std::span<const ScoredUtterance> scored, const EvalConfig& config);

struct OperatingPoint {
  double threshold = 1.0;
  double fr = 1.0;
  double fa_per_hour = 0.0;
  bool meets_target = false;
};

// Lowest ROC threshold with FA/h <= target. The returned threshold sits
// halfway to the next lower ROC threshold, the middle of the interval with
// identical outcomes. If no point qualifies the strictest point is returned
// with meets_target = false.
OperatingPoint SelectOperatingPoint(std::span<const RocPoint> roc, double target_fa_per_hour);

void WriteRocCsv(const std::filesystem::path& path, std::span<const RocPoint> roc);

struct RocCurve {
  std::string name;
  std::vector<RocPoint> points;
};
// FR versus FA/h overlay of several curves.
std::string RocSvg(std::span<const RocCurve> curves);

// ---------------------------------------------------------------------------
// Ablation report.

enum class Condition { kClean, kNoisy, kShifted };
const char* ConditionName(Condition c);
// Noisy: 5 dB additive noise; shifted: +-20 frames alternating by id
// (clamped for positives so the keyword stays inside).
std::vector<Utterance> ApplyCondition(std::span<const Utterance> dataset, Condition c,
                                      std::uint64_t seed);

struct AblationEntry {
  std::string name;
  std::filesystem::path checkpoint;
};

struct AblationCell {
  OperatingPoint point;
};

struct AblationRow {
  std::string name;
  bool present = false;
  std::vector<AblationCell> cells;  // one per condition
};

struct AblationReport {
  std::vector<Condition> conditions;
  std::vector<AblationRow> rows;
  double target_fa_per_hour = 0.1;

  std::string Markdown() const;
};

// Scores every present checkpoint under each condition and writes
// report.md, roc_<model>.csv (clean condition) and roc.svg into out_dir.
AblationReport RunAblation(std::span<const AblationEntry> models,
                           std::span<const Utterance> dataset,
                           std::span<const Condition> conditions,
                           const EvalConfig& config, const std::filesystem::path& out_dir,
                           std::uint64_t seed = 1);

}  // namespace smpkws
