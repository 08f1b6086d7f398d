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
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mder/corpus.hpp"
#include "mder/error.hpp"
#include "mder/model/params.hpp"
#include "mder/rules.hpp"
#include "mder/tagscheme.hpp"
#include "mder/utf8.hpp"

namespace mder {

// Character lookup table indices. 0 is PAD, 1 is UNK, the rest are the
// training characters in code point order.
class CharVocabulary {
 public:
  CharVocabulary() = default;

  static CharVocabulary build(const Corpus& corpus) {
    std::set<char32_t> chars;
    for (const auto& s : corpus.sentences) {
      for (char32_t c : utf8::decode(s.text)) chars.insert(c);
    }
    return CharVocabulary(std::vector<char32_t>(chars.begin(), chars.end()));
  }

  explicit CharVocabulary(std::vector<char32_t> chars) : chars_(std::move(chars)) {
    for (std::size_t i = 0; i < chars_.size(); ++i) {
      if (!index_.emplace(chars_[i], i + 2).second) {
        throw VocabularyError("duplicate character in vocabulary");
      }
    }
  }

  std::size_t size() const { return chars_.size() + 2; }
  const std::vector<char32_t>& chars() const { return chars_; }

  std::uint32_t index(char32_t c) const {
    const auto it = index_.find(c);
    return it == index_.end() ? static_cast<std::uint32_t>(kUnkChar)
                              : static_cast<std::uint32_t>(it->second);
  }

 private:
  std::vector<char32_t> chars_;
  std::map<char32_t, std::size_t> index_;
};

// Model input for one sentence. mask[t] is 1 at real characters and 0 at
// padding; padding carries char id 0 and rule id PAD.
struct EncodedSequence {
  std::vector<std::uint32_t> char_ids;
  std::vector<std::uint32_t> rule_ids;
  std::vector<std::uint8_t> mask;

  std::size_t size() const { return char_ids.size(); }
  std::size_t real_length() const {
    std::size_t n = 0;
    for (auto m : mask) n += m;
    return n;
  }
};

// Encodes at most `max_length` characters; longer text is truncated with a
// warning on stderr. `pad_to` appends padding up to that length.
inline EncodedSequence encode_sequence(std::u32string_view text,
                                       const CharVocabulary& vocab,
                                       const RuleLexicon& lexicon,
                                       std::size_t max_length,
                                       std::size_t pad_to = 0) {
  std::size_t m = text.size();
  if (m > max_length) {
    std::cerr << "warning: sentence of " << m << " characters truncated to "
              << max_length << "\n";
    m = max_length;
  }
  const RuleTagSequence rules = rule_tags(text.substr(0, m), lexicon);
  EncodedSequence seq;
  const std::size_t total = std::max(m, pad_to);
  seq.char_ids.assign(total, static_cast<std::uint32_t>(kPadChar));
  seq.rule_ids.assign(total, static_cast<std::uint32_t>(kPadRule));
  seq.mask.assign(total, 0);
  for (std::size_t i = 0; i < m; ++i) {
    seq.char_ids[i] = vocab.index(text[i]);
    seq.rule_ids[i] = static_cast<std::uint32_t>(rules[i]);
    seq.mask[i] = 1;
  }
  return seq;
}

inline EncodedSequence encode_sequence(std::string_view text,
                                       const CharVocabulary& vocab,
                                       const RuleLexicon& lexicon,
                                       std::size_t max_length,
                                       std::size_t pad_to = 0) {
  const std::u32string cps = utf8::decode(text);
  return encode_sequence(std::u32string_view(cps), vocab, lexicon, max_length, pad_to);
}

}  // namespace mder
