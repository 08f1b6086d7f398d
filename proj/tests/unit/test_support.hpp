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
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "mder/mder.hpp"

namespace mder::testing {

inline std::string data_dir() { return MDER_SOURCE_DATA_DIR; }
inline std::string fixture_dir() { return MDER_FIXTURE_DIR; }

inline RuleLexicon demo_lexicon() { return load_lexicon_dir(data_dir() + "/lexicon"); }

inline SyntheticSpec area_spec(const std::string& area) {
  return load_synthetic_spec(data_dir() + "/synth/" + area + ".json");
}

// d_r=2, d_c=3, d_h=4, k=2 and a 3-wide attention space.
inline ModelConfig tiny_config() {
  ModelConfig c;
  c.rule_dim = 2;
  c.char_dim = 3;
  c.hidden_dim = 4;
  c.cnn_kernels = 2;
  c.attention_dim = 3;
  return c;
}

// Small but trainable dimensions for fast unit tests.
inline ModelConfig small_config() {
  ModelConfig c;
  c.rule_dim = 8;
  c.char_dim = 24;
  c.hidden_dim = 24;
  c.cnn_kernels = 8;
  c.attention_dim = 48;
  return c;
}

// Random sentence over a small alphabet with random non-overlapping spans.
inline AnnotatedSentence random_sentence(std::mt19937_64& rng, std::size_t max_len = 40) {
  static const std::u32string alphabet = U"abcXYZ01 -é字";
  std::uniform_int_distribution<std::size_t> len(1, max_len);
  std::uniform_int_distribution<std::size_t> ch(0, alphabet.size() - 1);
  std::u32string text(len(rng), U'a');
  for (auto& c : text) c = alphabet[ch(rng)];
  AnnotatedSentence s;
  std::bernoulli_distribution coin(0.3), kind(0.5);
  std::size_t i = 0;
  while (i < text.size()) {
    if (!coin(rng) || text[i] == U' ') {
      ++i;
      continue;
    }
    std::uniform_int_distribution<std::size_t> span(1, std::min<std::size_t>(6, text.size() - i));
    std::size_t end = i + span(rng);
    while (end > i + 1 && text[end - 1] == U' ') --end;
    s.entities.push_back({i, end, kind(rng) ? EntityKind::Method : EntityKind::Dataset});
    i = end;
  }
  s.text = utf8::encode(text);
  return s;
}

}  // namespace mder::testing
