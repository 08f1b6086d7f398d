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
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mder/corpus.hpp"
#include "mder/error.hpp"
#include "mder/metrics.hpp"
#include "mder/model/config.hpp"
#include "mder/model/network.hpp"
#include "mder/model/params.hpp"
#include "mder/model/vocab.hpp"
#include "mder/optim.hpp"
#include "mder/rules.hpp"
#include "mder/tagscheme.hpp"

namespace mder {

// Training and inference run in single precision.
using Real = float;

struct TrainConfig {
  std::size_t batch_size = 16;
  double learning_rate = 0.001;
  double dropout = 0.5;
  std::size_t max_epochs = 100;
  std::size_t patience = 10;
  std::uint64_t seed = 1;
  AblationFlags ablation;
  double clip_norm = 5.0;
  // Stop as soon as validation F1 reaches this value.
  std::optional<double> target_f1;
};

inline void validate(const TrainConfig& c) {
  if (c.batch_size == 0) throw ConfigError("batch_size must be positive");
  if (!(c.learning_rate >= 0) || !std::isfinite(c.learning_rate)) {
    throw ConfigError("learning_rate must be finite and non-negative");
  }
  if (!(c.dropout >= 0 && c.dropout < 1)) throw ConfigError("dropout must lie in [0, 1)");
  if (c.max_epochs == 0) throw ConfigError("max_epochs must be positive");
  if (c.patience == 0) throw ConfigError("patience must be positive");
  if (!(c.clip_norm > 0)) throw ConfigError("clip_norm must be positive");
}

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"batch_size", c.batch_size}, {"learning_rate", c.learning_rate},
       {"dropout", c.dropout},       {"max_epochs", c.max_epochs},
       {"patience", c.patience},     {"seed", c.seed},
       {"ablation", c.ablation},     {"clip_norm", c.clip_norm}};
  j["target_f1"] = c.target_f1 ? nlohmann::json(*c.target_f1) : nlohmann::json(nullptr);
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  TrainConfig d;
  c.batch_size = j.value("batch_size", d.batch_size);
  c.learning_rate = j.value("learning_rate", d.learning_rate);
  c.dropout = j.value("dropout", d.dropout);
  c.max_epochs = j.value("max_epochs", d.max_epochs);
  c.patience = j.value("patience", d.patience);
  c.seed = j.value("seed", d.seed);
  c.ablation = j.contains("ablation") ? j.at("ablation").get<AblationFlags>() : d.ablation;
  c.clip_norm = j.value("clip_norm", d.clip_norm);
  c.target_f1.reset();
  if (j.contains("target_f1") && !j.at("target_f1").is_null()) {
    c.target_f1 = j.at("target_f1").get<double>();
  }
  validate(c);
}

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double loss = 0;        // mean per-character training loss
  double val_f1 = 0;
  double seconds = 0;     // wall clock of the optimisation pass
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::size_t selected_epoch = 0;  // epoch whose parameters were kept
  double best_val_f1 = 0;
  std::size_t parameter_count = 0;
  bool stopped_early = false;

  std::vector<double> losses() const {
    std::vector<double> out;
    for (const auto& e : epochs) out.push_back(e.loss);
    return out;
  }
  double train_seconds() const {
    double s = 0;
    for (const auto& e : epochs) s += e.seconds;
    return s;
  }
};

inline void to_json(nlohmann::json& j, const EpochRecord& e) {
  j = {{"epoch", e.epoch}, {"loss", e.loss}, {"val_f1", e.val_f1}, {"seconds", e.seconds}};
}

inline void to_json(nlohmann::json& j, const TrainReport& r) {
  j = {{"epochs", r.epochs},
       {"selected_epoch", r.selected_epoch},
       {"best_val_f1", r.best_val_f1},
       {"parameter_count", r.parameter_count},
       {"stopped_early", r.stopped_early}};
}

// Everything needed to tag new text.
struct Tagger {
  CharVocabulary vocab;
  RuleLexicon lexicon;
  ModelParams<Real> params;

  const ModelConfig& config() const { return params.config; }
  const AblationFlags& ablation() const { return params.ablation; }

  EncodedSequence encode(std::u32string_view text) const {
    return encode_sequence(text, vocab, lexicon, params.config.max_length);
  }

  // Tags for the first min(|text|, max_length) characters.
  TagSequence tag(std::u32string_view text) const {
    if (text.empty()) return {};
    const EncodedSequence seq = encode(text);
    const Matrix<Real> z = forward(seq, params);
    return decode(z, seq, params);
  }

  std::vector<EntitySpan> entities(std::string_view text) const {
    const std::u32string cps = utf8::decode(text);
    const TagSequence tags = tag(cps);
    return decode_entities(std::u32string_view(cps).substr(0, tags.size()), tags);
  }
};

inline MetricsReport evaluate(const Tagger& tagger, const Corpus& corpus) {
  MetricsReport report;
  for (const auto& s : corpus.sentences) report.add(tagger.entities(s.text), s.entities);
  return report;
}

struct Example {
  EncodedSequence seq;
  TagSequence gold;
};

inline std::vector<Example> make_examples(const Corpus& corpus, const CharVocabulary& vocab,
                                          const RuleLexicon& lexicon, std::size_t max_length) {
  std::vector<Example> out;
  out.reserve(corpus.sentences.size());
  for (const auto& s : corpus.sentences) {
    Example e;
    TagSequence tags = encode_tags(s);
    if (tags.empty()) continue;
    e.seq = encode_sequence(utf8::decode(s.text), vocab, lexicon, max_length);
    tags.resize(e.seq.real_length());
    e.gold = std::move(tags);
    out.push_back(std::move(e));
  }
  return out;
}

using TrainLog = std::function<void(const nlohmann::json&)>;

struct TrainResult {
  Tagger tagger;
  TrainReport report;
};

namespace detail {

template <class S>
bool all_finite(const ModelParams<S>& p) {
  bool ok = true;
  p.for_each([&](const std::string& name, const Matrix<S>& m) {
    if (name == "crf.A") {
      ok = ok && !m.array().isNaN().any() &&
           (m.array() != std::numeric_limits<S>::infinity()).all();
    } else {
      ok = ok && m.allFinite();
    }
  });
  return ok;
}

}  // namespace detail

// Mini-batch Adam on the mean per-character loss. Each epoch shuffles the
// training set, then scores the validation set; the parameters of the
// earliest epoch with the best validation F1 are returned. Training stops
// after `patience` epochs without improvement (counted once validation F1
// is above zero), at `max_epochs`, or when `target_f1` is reached.
inline TrainResult train(const Corpus& train_corpus, const Corpus& val_corpus,
                         const RuleLexicon& lexicon, const ModelConfig& model_config,
                         const TrainConfig& config, const TrainLog& log = {}) {
  validate(config);
  validate(model_config, config.ablation);
  if (train_corpus.sentences.empty()) throw ConfigError("training corpus is empty");
  if (val_corpus.sentences.empty()) throw ConfigError("validation corpus is empty");

  std::mt19937_64 rng(config.seed);
  Tagger tagger;
  tagger.vocab = CharVocabulary::build(train_corpus);
  tagger.lexicon = lexicon;
  tagger.params =
      init_params<Real>(model_config, config.ablation, tagger.vocab.size(), rng);

  const std::vector<Example> examples =
      make_examples(train_corpus, tagger.vocab, lexicon, model_config.max_length);
  if (examples.empty()) throw ConfigError("training corpus has no non-empty sentence");

  Adam<Real> adam(tagger.params, AdamOptions{.learning_rate = config.learning_rate});
  Dropout dropout(config.dropout, rng);
  ModelParams<Real> grad = tagger.params.zeros_like();
  ForwardTrace<Real> trace;

  TrainResult result;
  result.report.parameter_count = tagger.params.parameter_count();
  ModelParams<Real> best = tagger.params;
  double best_f1 = -1;
  std::size_t stale = 0;
  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0;
    std::size_t epoch_chars = 0;
    for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
      const std::size_t e = std::min(order.size(), b + config.batch_size);
      std::size_t chars = 0;
      for (std::size_t i = b; i < e; ++i) chars += examples[order[i]].gold.size();
      const Real scale = Real(1) / static_cast<Real>(chars);
      grad.for_each([](const std::string&, Matrix<Real>& m) { m.setZero(); });
      for (std::size_t i = b; i < e; ++i) {
        const Example& ex = examples[order[i]];
        const Matrix<Real> z = forward(ex.seq, tagger.params, &trace, &dropout);
        SequenceLoss<Real> sl = sequence_loss(z, ex.seq, ex.gold, tagger.params);
        if (!std::isfinite(static_cast<double>(sl.loss))) {
          throw TrainingError("non-finite loss at epoch " + std::to_string(epoch));
        }
        epoch_loss += static_cast<double>(sl.loss);
        sl.d_z *= scale;
        backward(trace, sl.d_z, tagger.params, grad);
        if (!tagger.params.ablation.no_crf) grad.transitions += scale * sl.d_transitions;
      }
      epoch_chars += chars;
      const double norm = clip_global_norm(grad, config.clip_norm);
      if (!std::isfinite(norm)) {
        throw TrainingError("non-finite gradient at epoch " + std::to_string(epoch));
      }
      adam.step(tagger.params, grad);
    }
    if (!detail::all_finite(tagger.params)) {
      throw TrainingError("parameters diverged at epoch " + std::to_string(epoch));
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    EpochRecord rec;
    rec.epoch = epoch;
    rec.loss = epoch_loss / static_cast<double>(epoch_chars);
    rec.seconds = seconds;
    rec.val_f1 = evaluate(tagger, val_corpus).f1();
    result.report.epochs.push_back(rec);
    if (log) log(nlohmann::json(rec));

    if (rec.val_f1 > best_f1) {
      best_f1 = rec.val_f1;
      best = tagger.params;
      result.report.selected_epoch = epoch;
      stale = 0;
    } else if (best_f1 > 0 && ++stale >= config.patience) {
      result.report.stopped_early = true;
      break;
    }
    if (config.target_f1 && rec.val_f1 >= *config.target_f1) {
      result.report.stopped_early = epoch < config.max_epochs;
      break;
    }
  }
  result.report.best_val_f1 = best_f1;
  tagger.params = std::move(best);
  result.tagger = std::move(tagger);
  return result;
}

// ---------------------------------------------------------------------------
// Experiment harnesses.

// Cross-corpus protocol: a model trained on fold i's train part (selected on
// its validation part) is scored on every corpus's test part.
struct GridResult {
  std::vector<std::string> names;
  std::vector<std::vector<MetricsReport>> reports;  // [train][test]

  std::vector<std::vector<double>> f1() const {
    std::vector<std::vector<double>> out;
    for (const auto& row : reports) {
      std::vector<double> r;
      for (const auto& m : row) r.push_back(m.f1());
      out.push_back(std::move(r));
    }
    return out;
  }

  // Rows whose diagonal entry is the row maximum.
  std::vector<bool> diagonal_is_max() const {
    const auto m = f1();
    std::vector<bool> out;
    for (std::size_t i = 0; i < m.size(); ++i) {
      out.push_back(*std::max_element(m[i].begin(), m[i].end()) <= m[i][i]);
    }
    return out;
  }
};

inline void to_json(nlohmann::json& j, const GridResult& g) {
  const auto m = g.f1();
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < m.size(); ++i) {
    const MeanStd ms = mean_std(m[i]);
    rows.push_back({{"train", g.names[i]}, {"f1", m[i]}, {"mean", ms.mean},
                    {"std", ms.std}, {"reports", g.reports[i]}});
  }
  j = {{"corpora", g.names}, {"f1", m}, {"rows", rows}};
}

inline GridResult run_grid(const std::vector<CorpusSplit>& folds,
                           const std::vector<std::string>& names,
                           const RuleLexicon& lexicon, const ModelConfig& model_config,
                           const TrainConfig& config, const TrainLog& log = {}) {
  if (folds.size() != names.size()) throw ConfigError("one name per corpus is required");
  GridResult g;
  g.names = names;
  for (std::size_t i = 0; i < folds.size(); ++i) {
    const TrainLog row_log = log ? TrainLog([&, i](const nlohmann::json& rec) {
      nlohmann::json r = rec;
      r["train"] = names[i];
      log(r);
    })
                                 : TrainLog{};
    const TrainResult tr = train(folds[i].train, folds[i].val, lexicon, model_config,
                                 config, row_log);
    std::vector<MetricsReport> row;
    for (const auto& f : folds) row.push_back(evaluate(tr.tagger, f.test));
    g.reports.push_back(std::move(row));
  }
  return g;
}

// Trains `n` times with seeds seed, seed+1, ... and scores each run on `test`.
inline RepeatedMetrics run_repeats(const Corpus& train_corpus, const Corpus& val_corpus,
                                   const Corpus& test_corpus, const RuleLexicon& lexicon,
                                   const ModelConfig& model_config, TrainConfig config,
                                   std::size_t n, const TrainLog& log = {}) {
  if (n == 0) throw ConfigError("repeats must be positive");
  std::vector<MetricsReport> runs;
  const std::uint64_t base = config.seed;
  for (std::size_t r = 0; r < n; ++r) {
    config.seed = base + r;
    const TrainResult tr = train(train_corpus, val_corpus, lexicon, model_config, config, log);
    runs.push_back(evaluate(tr.tagger, test_corpus));
  }
  return aggregate(std::move(runs));
}

}  // namespace mder
