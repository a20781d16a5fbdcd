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

#include <cmath>
#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "smpkws/data.h"
#include "smpkws/errors.h"

using namespace smpkws;

namespace {

SynthConfig Small() {
  SynthConfig c;
  c.feature_dim = 8;
  c.seed = 21;
  return c;
}

bool FloatExact(double v) { return double(float(v)) == v; }

}  // namespace

TEST(Synth, PureFunctionOfConfigAndId) {
  const SynthConfig c = Small();
  EXPECT_EQ(SynthUtterance(c, 7), SynthUtterance(c, 7));
  EXPECT_NE(SynthUtterance(c, 7).features, SynthUtterance(c, 8).features);
  const auto serial = SynthCorpus(c, 40, 5, 1);
  const auto parallel = SynthCorpus(c, 40, 5, 3);
  EXPECT_EQ(serial, parallel);
  EXPECT_EQ(serial[2], SynthUtterance(c, 7));
  SynthConfig other = c;
  other.seed = 22;
  EXPECT_NE(SynthUtterance(other, 7).features, SynthUtterance(c, 7).features);
}

TEST(Synth, PositivesCarryOrderedUnitsEndingAtEndFrame) {
  const SynthConfig c = Small();
  std::size_t positives = 0;
  for (const Utterance& u : SynthCorpus(c, 200)) {
    ASSERT_NO_THROW(u.Validate());
    EXPECT_GE(u.num_frames(), c.min_frames);
    EXPECT_LE(u.num_frames(), c.max_frames);
    for (double v : u.features.values()) ASSERT_TRUE(FloatExact(v));
    if (!u.annotation.positive()) continue;
    ++positives;
    const auto& labels = *u.annotation.labels;
    const std::size_t start = *u.annotation.keyword_start();
    const std::size_t end = *u.annotation.end_frame;
    EXPECT_GE(start, c.lead_frames);
    EXPECT_LE(end + c.tail_frames, u.num_frames());
    std::size_t unit = 1, run = 0;
    for (std::size_t t = start; t < end; ++t) {
      if (labels[t] != unit) {
        EXPECT_GE(run, c.min_unit_frames);
        EXPECT_LE(run, c.max_unit_frames);
        ASSERT_EQ(labels[t], unit + 1);
        ++unit;
        run = 0;
      }
      ++run;
    }
    EXPECT_EQ(unit, c.num_units);
  }
  EXPECT_GT(positives, 70u);
  EXPECT_LT(positives, 130u);
}

TEST(Synth, HardNegativesIncludePrefixesAndShuffles) {
  const SynthConfig c = Small();
  std::size_t negatives = 0, prefixes = 0, shuffles = 0;
  for (const Utterance& u : SynthCorpus(c, 400)) {
    if (u.annotation.positive()) continue;
    ++negatives;
    std::vector<std::uint16_t> order;
    for (std::uint16_t l : *u.annotation.labels) {
      if (l != 0 && (order.empty() || order.back() != l)) order.push_back(l);
    }
    if (order.empty()) continue;
    bool ascending_from_one = true;
    for (std::size_t i = 0; i < order.size(); ++i) {
      ascending_from_one = ascending_from_one && order[i] == i + 1;
    }
    if (ascending_from_one) {
      EXPECT_LT(order.size(), c.num_units);
      ++prefixes;
    } else {
      EXPECT_EQ(order.size(), c.num_units);
      ++shuffles;
    }
  }
  EXPECT_GT(prefixes, negatives / 8);
  EXPECT_GT(shuffles, negatives / 8);
  EXPECT_LT(prefixes + shuffles, negatives);
}

TEST(Synth, UnitFramesSitNearTheirTemplates) {
  SynthConfig c = Small();
  c.noise_stddev = 0.0;
  const auto templates = UnitTemplates(c);
  const Utterance u = SynthUtterance(c, 3);
  for (std::size_t t = 0; t < u.num_frames(); ++t) {
    const auto frame = u.features.frame(t);
    const auto& mean = templates[(*u.annotation.labels)[t]];
    for (std::size_t d = 0; d < c.feature_dim; ++d) EXPECT_EQ(frame[d], mean[d]);
  }
}

TEST(Synth, InvalidConfigsRejected) {
  SynthConfig c = Small();
  c.num_units = 0;
  EXPECT_THROW(c.Validate(), ConfigError);
  c = Small();
  c.min_unit_frames = 0;
  EXPECT_THROW(c.Validate(), ConfigError);
  c = Small();
  c.min_frames = 100;
  EXPECT_THROW(c.Validate(), ConfigError);
  c = Small();
  c.keyword_probability = 1.5;
  EXPECT_THROW(c.Validate(), ConfigError);
}

TEST(Dataset, RoundTripIsExact) {
  auto corpus = SynthCorpus(Small(), 25);
  corpus[1].annotation.labels.reset();
  if (!corpus[1].annotation.positive()) corpus[1].annotation.end_frame.reset();
  const auto path = std::filesystem::temp_directory_path() / "smpkws_data_test.kwsd";
  WriteDataset(path, corpus);
  EXPECT_EQ(ReadDataset(path), corpus);
  std::filesystem::remove(path);
  EXPECT_TRUE(DecodeDataset(EncodeDataset({})).empty());
}

TEST(Dataset, TruncationReportsOffsetAtEveryCut) {
  const auto bytes = EncodeDataset(SynthCorpus(Small(), 2));
  for (std::size_t cut = 0; cut < bytes.size(); cut += 37) {
    std::vector<char> prefix(bytes.begin(), bytes.begin() + cut);
    try {
      DecodeDataset(prefix);
      FAIL() << "cut " << cut;
    } catch (const FormatError& e) {
      EXPECT_LE(e.offset(), cut);
    }
  }
}

TEST(Dataset, CorruptFieldsRejected) {
  auto bytes = EncodeDataset(SynthCorpus(Small(), 1));
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(DecodeDataset(bad_magic), FormatError);
  auto bad_kind = bytes;
  bad_kind[16] = 7;  // after magic, version, count, id
  try {
    DecodeDataset(bad_kind);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.offset(), 16u);
  }
  auto trailing = bytes;
  trailing.push_back(0);
  EXPECT_THROW(DecodeDataset(trailing), FormatError);
}

TEST(Utterance, ValidationCatchesInconsistentAnnotations) {
  Utterance u = SynthUtterance(Small(), 0);
  Utterance bad = u;
  bad.annotation.labels->pop_back();
  EXPECT_THROW(bad.Validate(), DataError);

  Utterance neg;
  neg.features = FeatureSequence(10, 2);
  neg.annotation.end_frame = 3;
  EXPECT_THROW(neg.Validate(), DataError);

  Utterance pos;
  pos.features = FeatureSequence(10, 2);
  pos.annotation.kind = UtteranceKind::kPositive;
  EXPECT_THROW(pos.Validate(), DataError);
  pos.annotation.end_frame = 10;
  EXPECT_THROW(pos.Validate(), DataError);
  pos.annotation.end_frame = 9;
  EXPECT_NO_THROW(pos.Validate());
  pos.annotation.labels = std::vector<std::uint16_t>{0, 0, 1, 1, 0, 0, 0, 0, 0, 0};
  EXPECT_THROW(pos.Validate(), DataError);
  pos.annotation.end_frame = 4;
  EXPECT_NO_THROW(pos.Validate());
  EXPECT_EQ(pos.annotation.keyword_start(), 2u);
}

TEST(Shift, MovesContentLabelsAndEnd) {
  Utterance u;
  u.features = FeatureSequence(8, 1, {0, 1, 2, 3, 4, 5, 6, 7});
  u.annotation.kind = UtteranceKind::kPositive;
  u.annotation.end_frame = 5;
  u.annotation.labels = std::vector<std::uint16_t>{0, 0, 0, 1, 2, 0, 0, 0};
  const Utterance later = ShiftUtterance(u, 2);
  EXPECT_EQ(later.features.values(), (std::vector<double>{0, 0, 0, 1, 2, 3, 4, 5}));
  EXPECT_EQ(*later.annotation.end_frame, 7u);
  EXPECT_EQ(*later.annotation.labels, (std::vector<std::uint16_t>{0, 0, 0, 0, 0, 1, 2, 0}));
  const Utterance earlier = ShiftUtterance(u, -3);
  EXPECT_EQ(earlier.features.values(), (std::vector<double>{3, 4, 5, 6, 7, 7, 7, 7}));
  EXPECT_EQ(*earlier.annotation.end_frame, 2u);
  EXPECT_NO_THROW(later.Validate());
  EXPECT_NO_THROW(earlier.Validate());
  EXPECT_THROW(ShiftUtterance(u, 3), DataError);
  EXPECT_THROW(ShiftUtterance(u, -4), DataError);
}

TEST(Augment, IdentityWithoutNoiseOrShift) {
  const Utterance u = SynthUtterance(Small(), 4);
  AugmentConfig a;
  a.snr_db_min = a.snr_db_max = INFINITY;
  a.max_shift = 0;
  std::mt19937_64 rng(1);
  EXPECT_EQ(Augment(u, a, rng), u);
}

TEST(Augment, NoiseMatchesRequestedSnrAndKeywordStaysInside) {
  SynthConfig c = Small();
  c.keyword_probability = 1.0;
  AugmentConfig a;
  a.snr_db_min = a.snr_db_max = 5.0;
  a.max_shift = 0;
  std::mt19937_64 rng(2);
  const Utterance u = SynthUtterance(c, 9);
  const Utterance noisy = Augment(u, a, rng);
  const auto& x = u.features.values();
  const auto& y = noisy.features.values();
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= double(x.size());
  double signal = 0.0, noise = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    signal += (x[i] - mean) * (x[i] - mean);
    noise += (y[i] - x[i]) * (y[i] - x[i]);
  }
  EXPECT_NEAR(10 * std::log10(signal / noise), 5.0, 0.5);

  a.snr_db_min = a.snr_db_max = INFINITY;
  a.max_shift = 500;
  for (int trial = 0; trial < 50; ++trial) {
    const Utterance v = Augment(SynthUtterance(c, trial), a, rng);
    ASSERT_NO_THROW(v.Validate());
    EXPECT_LT(*v.annotation.end_frame, v.num_frames());
  }
}
