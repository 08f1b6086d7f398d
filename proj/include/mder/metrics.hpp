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

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mder/corpus.hpp"
#include "mder/error.hpp"

namespace mder {

struct Prf {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

inline double f1_score(double precision, double recall) {
  const double d = precision + recall;
  return d > 0 ? 2.0 * precision * recall / d : 0.0;
}

// P = correct/identified, R = correct/annotated, F1 their harmonic mean.
// Any 0/0 is reported as 0.
inline Prf prf(std::size_t identified, std::size_t correct, std::size_t annotated) {
  if (correct > identified || correct > annotated) {
    throw CountError("correct (" + std::to_string(correct) +
                     ") exceeds identified (" + std::to_string(identified) +
                     ") or annotated (" + std::to_string(annotated) + ")");
  }
  Prf r;
  r.precision = identified ? static_cast<double>(correct) / identified : 0.0;
  r.recall = annotated ? static_cast<double>(correct) / annotated : 0.0;
  r.f1 = f1_score(r.precision, r.recall);
  return r;
}

namespace detail {

inline void check_non_overlapping(const std::vector<EntitySpan>& spans, const char* what) {
  std::vector<EntitySpan> sorted = spans;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i].start < sorted[i - 1].end) {
      throw AnnotationError(std::string(what) + " spans overlap");
    }
  }
}

}  // namespace detail

// Exact (start, end, kind) matches; each gold span is used at most once.
inline std::size_t match_entities(const std::vector<EntitySpan>& pred,
                                  const std::vector<EntitySpan>& gold) {
  detail::check_non_overlapping(pred, "predicted");
  detail::check_non_overlapping(gold, "gold");
  std::vector<EntitySpan> g = gold;
  std::sort(g.begin(), g.end());
  std::vector<bool> used(g.size(), false);
  std::size_t correct = 0;
  for (const auto& p : pred) {
    const auto it = std::lower_bound(g.begin(), g.end(), p);
    if (it != g.end() && *it == p) {
      const auto k = static_cast<std::size_t>(it - g.begin());
      if (!used[k]) {
        used[k] = true;
        ++correct;
      }
    }
  }
  return correct;
}

struct EntityCounts {
  std::size_t identified = 0;
  std::size_t correct = 0;
  std::size_t annotated = 0;

  EntityCounts& operator+=(const EntityCounts& o) {
    identified += o.identified;
    correct += o.correct;
    annotated += o.annotated;
    return *this;
  }
  Prf scores() const { return prf(identified, correct, annotated); }
};

// Micro-averaged scores over all entities plus a breakdown per kind.
struct MetricsReport {
  EntityCounts counts;
  EntityCounts methods;
  EntityCounts datasets;

  double precision() const { return counts.scores().precision; }
  double recall() const { return counts.scores().recall; }
  double f1() const { return counts.scores().f1; }

  void add(const std::vector<EntitySpan>& pred, const std::vector<EntitySpan>& gold) {
    const auto select = [](const std::vector<EntitySpan>& v, EntityKind k) {
      std::vector<EntitySpan> out;
      for (const auto& e : v) {
        if (e.kind == k) out.push_back(e);
      }
      return out;
    };
    const auto pm = select(pred, EntityKind::Method), gm = select(gold, EntityKind::Method);
    const auto pd = select(pred, EntityKind::Dataset), gd = select(gold, EntityKind::Dataset);
    EntityCounts m{pm.size(), match_entities(pm, gm), gm.size()};
    EntityCounts d{pd.size(), match_entities(pd, gd), gd.size()};
    methods += m;
    datasets += d;
    counts += m;
    counts += d;
  }
};

inline nlohmann::json counts_json(const EntityCounts& c) {
  const Prf s = c.scores();
  return {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1},
          {"identified", c.identified}, {"correct", c.correct},
          {"annotated", c.annotated}};
}

inline void to_json(nlohmann::json& j, const MetricsReport& r) {
  j = counts_json(r.counts);
  j["per_type"] = {{"M", counts_json(r.methods)}, {"D", counts_json(r.datasets)}};
}

inline EntityCounts counts_from_json(const nlohmann::json& j) {
  return {j.at("identified").get<std::size_t>(), j.at("correct").get<std::size_t>(),
          j.at("annotated").get<std::size_t>()};
}

inline void from_json(const nlohmann::json& j, MetricsReport& r) {
  r.counts = counts_from_json(j);
  r.methods = counts_from_json(j.at("per_type").at("M"));
  r.datasets = counts_from_json(j.at("per_type").at("D"));
}

struct MeanStd {
  double mean = 0;
  double std = 0;  // population standard deviation
};

inline MeanStd mean_std(const std::vector<double>& v) {
  MeanStd r;
  if (v.empty()) return r;
  for (double x : v) r.mean += x;
  r.mean /= static_cast<double>(v.size());
  for (double x : v) r.std += (x - r.mean) * (x - r.mean);
  r.std = std::sqrt(r.std / static_cast<double>(v.size()));
  return r;
}

// Aggregate of repeated runs. `f1` averages the per-run F1 values;
// `f1_of_means` recomputes F1 from the averaged precision and recall. The
// two differ in general and both are reported.
struct RepeatedMetrics {
  std::vector<MetricsReport> runs;
  MeanStd precision, recall, f1;
  double f1_of_means = 0;
};

inline RepeatedMetrics aggregate(std::vector<MetricsReport> runs) {
  RepeatedMetrics r;
  std::vector<double> p, rc, f;
  for (const auto& m : runs) {
    p.push_back(m.precision());
    rc.push_back(m.recall());
    f.push_back(m.f1());
  }
  r.precision = mean_std(p);
  r.recall = mean_std(rc);
  r.f1 = mean_std(f);
  r.f1_of_means = f1_score(r.precision.mean, r.recall.mean);
  r.runs = std::move(runs);
  return r;
}

inline void to_json(nlohmann::json& j, const RepeatedMetrics& r) {
  j = {{"runs", r.runs},
       {"precision", {{"mean", r.precision.mean}, {"std", r.precision.std}}},
       {"recall", {{"mean", r.recall.mean}, {"std", r.recall.std}}},
       {"f1", {{"mean", r.f1.mean}, {"std", r.f1.std}}},
       {"f1_of_means", r.f1_of_means}};
}

}  // namespace mder
