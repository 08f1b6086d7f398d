// Copyright 2026 The MDER Authors.
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

#include <random>

#include <gtest/gtest.h>

#include "mder/metrics.hpp"

namespace mder {
namespace {

constexpr auto M = EntityKind::Method;
constexpr auto D = EntityKind::Dataset;

TEST(MetricsTest, ExactMatchOnly) {
  EXPECT_EQ(match_entities({{0, 4, M}}, {{0, 4, M}}), 1u);
  EXPECT_EQ(match_entities({{0, 4, M}}, {{0, 5, M}}), 0u);
  EXPECT_EQ(match_entities({{0, 4, D}}, {{0, 4, M}}), 0u);
  EXPECT_THROW(match_entities({{0, 4, M}, {3, 6, D}}, {}), AnnotationError);
  EXPECT_THROW(match_entities({}, {{0, 4, M}, {2, 3, M}}), AnnotationError);
}

// Non-overlapping random spans over [0, 30).
std::vector<EntitySpan> random_spans(std::mt19937_64& rng) {
  std::vector<EntitySpan> out;
  std::uniform_int_distribution<std::size_t> step(0, 4), len(1, 3);
  std::bernoulli_distribution kind(0.5);
  for (std::size_t pos = step(rng); pos < 30;) {
    const std::size_t end = pos + len(rng);
    out.push_back({pos, end, kind(rng) ? M : D});
    pos = end + step(rng);
  }
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

TEST(MetricsTest, MatcherAgreesWithDoubleLoop) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 500; ++trial) {
    const auto pred = random_spans(rng), gold = random_spans(rng);
    std::size_t naive = 0;
    std::vector<bool> used(gold.size());
    for (const auto& p : pred) {
      for (std::size_t g = 0; g < gold.size(); ++g) {
        if (!used[g] && gold[g] == p) {
          used[g] = true;
          ++naive;
          break;
        }
      }
    }
    EXPECT_EQ(match_entities(pred, gold), naive);
    EXPECT_EQ(match_entities(gold, pred), naive);
  }
}

TEST(MetricsTest, PrfArithmetic) {
  const Prf a = prf(1000, 597, 1000);
  EXPECT_DOUBLE_EQ(a.precision, 0.597);
  EXPECT_NEAR(f1_score(0.698, 0.597), 0.6436, 1e-4);
  const Prf b = prf(4, 2, 4);
  EXPECT_DOUBLE_EQ(b.f1, 0.5);
  const Prf c = prf(0, 0, 5);
  EXPECT_EQ(c.precision, 0.0);
  EXPECT_EQ(c.f1, 0.0);
  const Prf d = prf(0, 0, 0);
  EXPECT_EQ(d.recall, 0.0);
  EXPECT_THROW(prf(2, 3, 5), CountError);
  EXPECT_THROW(prf(5, 3, 2), CountError);
}

TEST(MetricsTest, F1LiesBetweenPrecisionAndRecall) {
  for (std::size_t i = 1; i < 20; ++i) {
    for (std::size_t c = 1; c <= i; ++c) {
      const Prf r = prf(i, c, 13 + c);
      EXPECT_LE(std::min(r.precision, r.recall), r.f1 + 1e-15);
      EXPECT_GE(std::max(r.precision, r.recall), r.f1 - 1e-15);
    }
  }
}

TEST(MetricsTest, SwappingPredictionAndGoldSwapsPrecisionAndRecall) {
  MetricsReport a, b;
  const std::vector<EntitySpan> pred = {{0, 3, M}, {5, 7, D}, {9, 10, M}};
  const std::vector<EntitySpan> gold = {{0, 3, M}, {5, 8, D}};
  a.add(pred, gold);
  b.add(gold, pred);
  EXPECT_DOUBLE_EQ(a.precision(), b.recall());
  EXPECT_DOUBLE_EQ(a.recall(), b.precision());
}

TEST(MetricsTest, MicroAverageSumsCountsPerType) {
  MetricsReport r;
  r.add({{0, 3, M}, {5, 7, D}}, {{0, 3, M}, {5, 8, D}, {10, 12, D}});
  r.add({{1, 2, M}}, {{1, 2, M}});
  EXPECT_EQ(r.counts.identified, 3u);
  EXPECT_EQ(r.counts.correct, 2u);
  EXPECT_EQ(r.counts.annotated, 4u);
  EXPECT_EQ(r.methods.correct, 2u);
  EXPECT_EQ(r.datasets.annotated, 2u);
  EXPECT_DOUBLE_EQ(r.f1(), 2 * (2.0 / 3) * 0.5 / (2.0 / 3 + 0.5));
  const nlohmann::json j = r;
  EXPECT_EQ(j.at("per_type").at("D").at("correct"), 0);
  EXPECT_EQ(j.get<MetricsReport>().counts.identified, 3u);
}

TEST(MetricsTest, AggregateReportsBothF1Readings) {
  MetricsReport a, b;
  a.counts = {10, 9, 10};
  b.counts = {10, 1, 2};
  const RepeatedMetrics r = aggregate({a, b});
  EXPECT_DOUBLE_EQ(r.precision.mean, 0.5);
  EXPECT_DOUBLE_EQ(r.recall.mean, 0.7);
  EXPECT_DOUBLE_EQ(r.f1.mean, (0.9 + 2 * 0.1 * 0.5 / 0.6) / 2);
  EXPECT_DOUBLE_EQ(r.f1_of_means, 2 * 0.5 * 0.7 / 1.2);
  EXPECT_DOUBLE_EQ(r.precision.std, 0.4);
}

}  // namespace
}  // namespace mder
