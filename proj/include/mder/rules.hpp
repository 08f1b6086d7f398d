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
#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "mder/error.hpp"
#include "mder/utf8.hpp"

namespace mder {

// Rule tag per character; the numeric value indexes the rule embedding table.
enum class RuleTag : std::uint8_t {
  BM = 0,
  IM = 1,
  BD = 2,
  ID = 3,
  O = 4,
  UNK = 5,
  PAD = 6
};

inline constexpr std::size_t kNumRuleTags = 7;

inline constexpr std::array<std::string_view, kNumRuleTags> kRuleTagNames = {
    "B-M", "I-M", "B-D", "I-D", "O", "UNK", "PAD"};

inline std::string_view rule_tag_name(RuleTag t) {
  return kRuleTagNames[static_cast<std::size_t>(t)];
}

using RuleTagSequence = std::vector<RuleTag>;

namespace detail {

inline bool is_word_char(char32_t c) {
  return utf8::is_ascii_alnum(c) || c == U'_' ||
         (c >= 0x80 && !utf8::is_space(c));
}

struct Token {
  std::size_t start;
  std::size_t end;
};

inline std::vector<Token> tokenize(std::u32string_view text) {
  std::vector<Token> toks;
  std::size_t i = 0;
  while (i < text.size()) {
    if (!is_word_char(text[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && is_word_char(text[j])) ++j;
    toks.push_back({i, j});
    i = j;
  }
  return toks;
}

inline std::string fold(std::u32string_view s) {
  std::string out;
  for (char32_t c : s) utf8::append(out, utf8::ascii_lower(c));
  return out;
}

inline std::string trim_ascii(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace detail

// One blacklist of general words and two whitelists of known entities.
// Matching is case-insensitive (ASCII folding) and token-aligned.
class RuleLexicon {
 public:
  RuleLexicon() = default;

  RuleLexicon(const std::vector<std::string>& methods,
              const std::vector<std::string>& datasets,
              const std::vector<std::string>& blacklist) {
    add(methods, methods_, "method whitelist");
    add(datasets, datasets_, "dataset whitelist");
    add(blacklist, blacklist_, "blacklist");
  }

  const std::vector<std::string>& methods() const { return method_terms_; }
  const std::vector<std::string>& datasets() const { return dataset_terms_; }
  const std::vector<std::string>& blacklist() const { return black_terms_; }

  std::size_t max_tokens() const { return max_tokens_; }
  bool empty() const {
    return methods_.empty() && datasets_.empty() && blacklist_.empty();
  }

  // Which list a folded token window belongs to; UNK when none.
  RuleTag lookup(const std::string& folded) const {
    if (methods_.count(folded)) return RuleTag::BM;
    if (datasets_.count(folded)) return RuleTag::BD;
    if (blacklist_.count(folded)) return RuleTag::O;
    return RuleTag::UNK;
  }

  // Stable 64-bit FNV-1a hash over the folded, sorted contents.
  std::string fingerprint() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    const auto mix = [&](std::string_view s) {
      for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
      }
      h ^= 0xff;
      h *= 0x100000001b3ULL;
    };
    for (const auto* set : {&methods_, &datasets_, &blacklist_}) {
      std::vector<std::string> sorted(set->begin(), set->end());
      std::sort(sorted.begin(), sorted.end());
      for (const auto& s : sorted) mix(s);
      mix("\x1e");
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(h));
    return buf;
  }

 private:
  void add(const std::vector<std::string>& terms,
           std::unordered_set<std::string>& dst, const char* list_name) {
    std::vector<std::string>& keep = &dst == &methods_    ? method_terms_
                                     : &dst == &datasets_ ? dataset_terms_
                                                          : black_terms_;
    for (const auto& raw : terms) {
      const std::string term = detail::trim_ascii(raw);
      if (term.empty()) throw LexiconError(std::string(list_name) + " has an empty entry");
      if (term.find('\n') != std::string::npos) {
        throw LexiconError("lexicon entry '" + term + "' contains a newline");
      }
      const std::u32string cps = utf8::decode(term);
      const auto toks = detail::tokenize(cps);
      if (toks.empty()) {
        throw LexiconError("lexicon entry '" + term + "' has no word characters");
      }
      const std::string key = detail::fold(cps);
      for (const auto* other : {&methods_, &datasets_, &blacklist_}) {
        if (other != &dst && other->count(key)) {
          throw LexiconError("term '" + term + "' appears in more than one list");
        }
      }
      if (dst.insert(key).second) keep.push_back(term);
      max_tokens_ = std::max(max_tokens_, toks.size());
    }
  }

  std::unordered_set<std::string> methods_, datasets_, blacklist_;
  std::vector<std::string> method_terms_, dataset_terms_, black_terms_;
  std::size_t max_tokens_ = 0;
};

// One term per line, '#' starts a comment line, blank lines ignored.
inline std::vector<std::string> read_term_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open lexicon file: " + path);
  std::vector<std::string> terms;
  std::string line;
  while (std::getline(in, line)) {
    const std::string t = detail::trim_ascii(line);
    if (t.empty() || t.front() == '#') continue;
    terms.push_back(t);
  }
  return terms;
}

inline RuleLexicon load_lexicon(const std::string& method_path,
                                const std::string& dataset_path,
                                const std::string& blacklist_path) {
  return RuleLexicon(read_term_file(method_path), read_term_file(dataset_path),
                     read_term_file(blacklist_path));
}

// Directory layout: methods.txt, datasets.txt, blacklist.txt.
inline RuleLexicon load_lexicon_dir(const std::filesystem::path& dir) {
  return load_lexicon((dir / "methods.txt").string(),
                      (dir / "datasets.txt").string(),
                      (dir / "blacklist.txt").string());
}

inline RuleTagSequence rule_tags(std::u32string_view text,
                                 const RuleLexicon& lexicon) {
  RuleTagSequence tags(text.size(), RuleTag::UNK);
  if (lexicon.empty()) return tags;
  const auto toks = detail::tokenize(text);
  std::size_t i = 0;
  while (i < toks.size()) {
    std::size_t matched = 0;
    RuleTag kind = RuleTag::UNK;
    const std::size_t longest = std::min(lexicon.max_tokens(), toks.size() - i);
    for (std::size_t len = longest; len >= 1; --len) {
      const std::size_t b = toks[i].start;
      const std::size_t e = toks[i + len - 1].end;
      const RuleTag hit = lexicon.lookup(detail::fold(text.substr(b, e - b)));
      if (hit != RuleTag::UNK) {
        matched = len;
        kind = hit;
        break;
      }
    }
    if (matched == 0) {
      ++i;
      continue;
    }
    const std::size_t b = toks[i].start;
    const std::size_t e = toks[i + matched - 1].end;
    if (kind == RuleTag::O) {
      std::fill(tags.begin() + b, tags.begin() + e, RuleTag::O);
    } else {
      const RuleTag inside = kind == RuleTag::BM ? RuleTag::IM : RuleTag::ID;
      tags[b] = kind;
      std::fill(tags.begin() + b + 1, tags.begin() + e, inside);
    }
    i += matched;
  }
  return tags;
}

inline RuleTagSequence rule_tags(std::string_view text,
                                 const RuleLexicon& lexicon) {
  const std::u32string cps = utf8::decode(text);
  return rule_tags(std::u32string_view(cps), lexicon);
}

}  // namespace mder
