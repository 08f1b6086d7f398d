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

#include <cstdint>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mder/corpus.hpp"
#include "mder/error.hpp"
#include "mder/utf8.hpp"

// Template grammar for synthetic annotated corpora. A template is literal
// text with {M} and {D} slots; each slot is filled with a uniformly chosen
// term from the matching pool and becomes a gold span.
namespace mder {

struct SentenceTemplate {
  std::string text;
  double weight = 1.0;
};

struct SyntheticSpec {
  std::string name = "synthetic";
  std::vector<SentenceTemplate> templates;
  std::vector<std::string> methods;
  std::vector<std::string> datasets;
};

namespace detail {

struct TemplatePiece {
  std::u32string literal;  // used when !is_slot
  bool is_slot = false;
  EntityKind kind = EntityKind::Method;
};

inline std::vector<TemplatePiece> parse_template(const std::string& text) {
  const std::u32string t = utf8::decode(text);
  std::vector<TemplatePiece> pieces;
  std::u32string lit;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] == U'{') {
      if (i + 2 >= t.size() || t[i + 2] != U'}' ||
          (t[i + 1] != U'M' && t[i + 1] != U'D')) {
        throw ConfigError("template '" + text +
                          "': only {M} and {D} slots are allowed");
      }
      if (!lit.empty()) pieces.push_back({std::move(lit), false, {}});
      lit.clear();
      pieces.push_back({{}, true,
                        t[i + 1] == U'M' ? EntityKind::Method
                                         : EntityKind::Dataset});
      i += 2;
    } else if (t[i] == U'}') {
      throw ConfigError("template '" + text + "': unmatched '}'");
    } else {
      lit.push_back(t[i]);
    }
  }
  if (!lit.empty()) pieces.push_back({std::move(lit), false, {}});
  return pieces;
}

}  // namespace detail

// Number of {M} and {D} slots in one template.
inline std::pair<std::size_t, std::size_t> slot_counts(
    const SentenceTemplate& t) {
  std::size_t m = 0, d = 0;
  for (const auto& p : detail::parse_template(t.text)) {
    if (!p.is_slot) continue;
    (p.kind == EntityKind::Method ? m : d) += 1;
  }
  return {m, d};
}

inline void check_spec(const SyntheticSpec& spec) {
  if (spec.templates.empty()) throw ConfigError("grammar has no templates");
  for (const auto& t : spec.templates) {
    if (!(t.weight > 0)) {
      throw ConfigError("template '" + t.text + "' has non-positive weight");
    }
    const auto [m, d] = slot_counts(t);
    if (m > 0 && spec.methods.empty()) {
      throw ConfigError("template '" + t.text +
                        "' uses {M} but the method pool is empty");
    }
    if (d > 0 && spec.datasets.empty()) {
      throw ConfigError("template '" + t.text +
                        "' uses {D} but the dataset pool is empty");
    }
  }
  for (const auto* pool : {&spec.methods, &spec.datasets}) {
    for (const auto& term : *pool) {
      const auto cps = utf8::decode(term);
      if (cps.empty() || utf8::is_space(cps.front()) ||
          utf8::is_space(cps.back())) {
        throw ConfigError("pool term '" + term +
                          "' is empty or has surrounding whitespace");
      }
    }
  }
}

inline Corpus generate_synthetic(const SyntheticSpec& spec, std::size_t n,
                                 std::uint64_t seed) {
  check_spec(spec);
  std::vector<std::vector<detail::TemplatePiece>> parsed;
  std::vector<double> weights;
  for (const auto& t : spec.templates) {
    parsed.push_back(detail::parse_template(t.text));
    weights.push_back(t.weight);
  }
  std::vector<std::u32string> methods, datasets;
  for (const auto& s : spec.methods) methods.push_back(utf8::decode(s));
  for (const auto& s : spec.datasets) datasets.push_back(utf8::decode(s));

  std::mt19937_64 rng(seed);
  std::discrete_distribution<std::size_t> pick_template(weights.begin(),
                                                        weights.end());
  Corpus out{spec.name, {}};
  out.sentences.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& pieces = parsed[pick_template(rng)];
    std::u32string text;
    AnnotatedSentence s;
    for (const auto& p : pieces) {
      if (!p.is_slot) {
        text += p.literal;
        continue;
      }
      const auto& pool = p.kind == EntityKind::Method ? methods : datasets;
      std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
      const std::u32string& term = pool[pick(rng)];
      s.entities.push_back({text.size(), text.size() + term.size(), p.kind});
      text += term;
    }
    s.text = utf8::encode(text);
    out.sentences.push_back(std::move(s));
  }
  return out;
}

// Config file layout:
//   {"name": "nlp",
//    "templates": [{"text": "We evaluate {M} on {D} .", "weight": 2.0}, ...],
//    "methods": ["SVM", ...], "datasets": ["Wiki", ...]}
// A template may also be given as a bare string (weight 1).
inline SyntheticSpec spec_from_json(const nlohmann::json& j) {
  SyntheticSpec spec;
  try {
    spec.name = j.value("name", std::string("synthetic"));
    for (const auto& t : j.at("templates")) {
      if (t.is_string()) {
        spec.templates.push_back({t.get<std::string>(), 1.0});
      } else {
        spec.templates.push_back(
            {t.at("text").get<std::string>(), t.value("weight", 1.0)});
      }
    }
    spec.methods = j.value("methods", std::vector<std::string>{});
    spec.datasets = j.value("datasets", std::vector<std::string>{});
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad grammar config: ") + e.what());
  }
  check_spec(spec);
  return spec;
}

inline SyntheticSpec load_synthetic_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open grammar file: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return spec_from_json(j);
}

}  // namespace mder
