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
#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "mder/corpus.hpp"
#include "mder/error.hpp"
#include "mder/utf8.hpp"

namespace mder {

// Distinct gold surface forms per entity kind, sorted.
struct Glossary {
  std::vector<std::string> methods;
  std::vector<std::string> datasets;

  const std::vector<std::string>& terms(EntityKind k) const {
    return k == EntityKind::Method ? methods : datasets;
  }
};

inline Glossary build_glossaries(const Corpus& corpus) {
  std::set<std::string> m, d;
  for (const auto& s : corpus.sentences) {
    for (const auto& e : s.entities) {
      (e.kind == EntityKind::Method ? m : d).insert(entity_text(s, e));
    }
  }
  return {{m.begin(), m.end()}, {d.begin(), d.end()}};
}

struct AugmentOptions {
  double multiplier = 1.0;
  std::uint64_t seed = 1;
  bool allow_self = true;  // a span may be replaced by its own surface form
};

// Output size for `n` input sentences: round(multiplier * n), half away
// from zero.
inline std::size_t augmented_size(std::size_t n, double multiplier) {
  if (!(multiplier >= 1.0) || !std::isfinite(multiplier)) {
    throw ConfigError("multiplier must be a finite value >= 1");
  }
  return static_cast<std::size_t>(std::llround(multiplier * static_cast<double>(n)));
}

// Copy of `s` with every span replaced by a same-kind glossary term.
inline AnnotatedSentence substitute_entities(const AnnotatedSentence& s, const Glossary& g,
                                             bool allow_self, std::mt19937_64& rng) {
  const std::u32string text = utf8::decode(s.text);
  std::vector<EntitySpan> spans = s.entities;
  std::sort(spans.begin(), spans.end());
  AnnotatedSentence out;
  std::u32string result;
  std::size_t pos = 0;
  for (const auto& e : spans) {
    const auto& pool = g.terms(e.kind);
    const std::string original = utf8::encode(text.substr(e.start, e.end - e.start));
    std::vector<const std::string*> choices;
    for (const auto& t : pool) {
      if (allow_self || t != original) choices.push_back(&t);
    }
    if (choices.empty()) {
      throw ConfigError(std::string("no ") + (allow_self ? "" : "alternative ") +
                        (e.kind == EntityKind::Method ? "method" : "dataset") +
                        " term available for substitution");
    }
    std::uniform_int_distribution<std::size_t> pick(0, choices.size() - 1);
    const std::u32string term = utf8::decode(*choices[pick(rng)]);
    result.append(text, pos, e.start - pos);
    const std::size_t start = result.size();
    result += term;
    out.entities.push_back({start, result.size(), e.kind});
    pos = e.end;
  }
  result.append(text, pos, std::u32string::npos);
  out.text = utf8::encode(result);
  return out;
}

// The input followed by round(m*n) - n synthetic sentences. Each synthetic
// sentence copies a uniformly drawn original and substitutes every span.
inline Corpus augment(const Corpus& corpus, const Glossary& glossary,
                      const AugmentOptions& opt) {
  const std::size_t n = corpus.sentences.size();
  const std::size_t total = augmented_size(n, opt.multiplier);
  Corpus out;
  out.name = corpus.name;
  out.sentences = corpus.sentences;
  if (total == n) return out;
  std::mt19937_64 rng(opt.seed);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  out.sentences.reserve(total);
  while (out.sentences.size() < total) {
    const AnnotatedSentence& src = corpus.sentences[pick(rng)];
    out.sentences.push_back(substitute_entities(src, glossary, opt.allow_self, rng));
  }
  return out;
}

}  // namespace mder
