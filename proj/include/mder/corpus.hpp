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
#include <compare>
#include <cstdint>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mder/error.hpp"
#include "mder/utf8.hpp"

namespace mder {

enum class EntityKind : std::uint8_t { Method, Dataset };

inline const char* kind_name(EntityKind k) {
  return k == EntityKind::Method ? "M" : "D";
}

inline EntityKind parse_kind(std::string_view s) {
  if (s == "M") return EntityKind::Method;
  if (s == "D") return EntityKind::Dataset;
  throw FormatError("unknown entity kind '" + std::string(s) +
                    "' (expected M or D)");
}

// Half-open code point range [start, end) of one entity mention.
struct EntitySpan {
  std::size_t start = 0;
  std::size_t end = 0;
  EntityKind kind = EntityKind::Method;

  std::size_t size() const { return end - start; }
  friend auto operator<=>(const EntitySpan&, const EntitySpan&) = default;
};

struct AnnotatedSentence {
  std::string text;  // UTF-8
  std::vector<EntitySpan> entities;

  friend bool operator==(const AnnotatedSentence&,
                         const AnnotatedSentence&) = default;
};

struct Corpus {
  std::string name;
  std::vector<AnnotatedSentence> sentences;

  std::size_t size() const { return sentences.size(); }
  bool empty() const { return sentences.empty(); }
};

// Throws AnnotationError describing the first violated invariant.
inline void validate(const AnnotatedSentence& s) {
  const std::u32string text = utf8::decode(s.text);
  if (text.empty()) throw AnnotationError("sentence text is empty");
  std::size_t prev_end = 0;
  for (std::size_t k = 0; k < s.entities.size(); ++k) {
    const EntitySpan& e = s.entities[k];
    const std::string where = "entity " + std::to_string(k) + " [" +
                              std::to_string(e.start) + "," +
                              std::to_string(e.end) + ")";
    if (e.start >= e.end || e.end > text.size()) {
      throw AnnotationError(where + " is out of range for text of length " +
                            std::to_string(text.size()));
    }
    if (k > 0 && e.start < prev_end) {
      throw AnnotationError(where + " overlaps or is out of order");
    }
    if (utf8::is_space(text[e.start]) || utf8::is_space(text[e.end - 1])) {
      throw AnnotationError(where + " has leading or trailing whitespace");
    }
    prev_end = e.end;
  }
}

inline void validate(const Corpus& c) {
  if (c.name.empty()) throw AnnotationError("corpus name is empty");
  for (std::size_t i = 0; i < c.sentences.size(); ++i) {
    try {
      validate(c.sentences[i]);
    } catch (const AnnotationError& e) {
      throw AnnotationError("sentence " + std::to_string(i) + ": " + e.what());
    }
  }
}

inline std::string entity_text(const AnnotatedSentence& s,
                               const EntitySpan& e) {
  const std::u32string text = utf8::decode(s.text);
  return utf8::encode(std::u32string_view(text).substr(e.start, e.size()));
}

// ---------------------------------------------------------------------------
// JSON Lines corpus format.
//
//   {"text": "...", "entities": [{"start": 0, "end": 4, "kind": "M"}]}
//
// One object per line, offsets in code points. The writer emits exactly the
// layout above so corpora diff cleanly.

inline std::string to_jsonl(const AnnotatedSentence& s) {
  std::string line = "{\"text\": ";
  line += nlohmann::json(s.text).dump();
  line += ", \"entities\": [";
  for (std::size_t k = 0; k < s.entities.size(); ++k) {
    const EntitySpan& e = s.entities[k];
    if (k) line += ", ";
    line += "{\"start\": " + std::to_string(e.start) +
            ", \"end\": " + std::to_string(e.end) + ", \"kind\": \"" +
            kind_name(e.kind) + "\"}";
  }
  line += "]}";
  return line;
}

inline AnnotatedSentence sentence_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("text") || !j["text"].is_string()) {
    throw FormatError("expected an object with a string \"text\" field");
  }
  AnnotatedSentence s;
  s.text = j["text"].get<std::string>();
  if (j.contains("entities")) {
    for (const auto& e : j["entities"]) {
      if (!e.contains("start") || !e.contains("end") || !e.contains("kind")) {
        throw FormatError("entity needs start, end and kind");
      }
      const auto start = e["start"].get<std::int64_t>();
      const auto end = e["end"].get<std::int64_t>();
      if (start < 0 || end < 0) throw FormatError("negative entity offset");
      s.entities.push_back({static_cast<std::size_t>(start),
                            static_cast<std::size_t>(end),
                            parse_kind(e["kind"].get<std::string>())});
    }
  }
  return s;
}

inline AnnotatedSentence parse_jsonl_line(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(std::string("malformed JSON: ") + e.what());
  }
  return sentence_from_json(j);
}

inline Corpus read_corpus(std::istream& in, std::string name) {
  Corpus c{std::move(name), {}};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      AnnotatedSentence s = parse_jsonl_line(line);
      validate(s);
      c.sentences.push_back(std::move(s));
    } catch (const Error& e) {
      throw FormatError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return c;
}

inline std::string stem_of(const std::string& path) {
  std::string base = path.substr(path.find_last_of("/\\") + 1);
  const auto dot = base.find('.');
  if (dot != std::string::npos && dot > 0) base.resize(dot);
  return base.empty() ? std::string("corpus") : base;
}

inline Corpus load_corpus(const std::string& path, std::string name = {}) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open corpus file: " + path);
  try {
    return read_corpus(in, name.empty() ? stem_of(path) : std::move(name));
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

inline void write_corpus(std::ostream& out, const Corpus& c) {
  for (const auto& s : c.sentences) out << to_jsonl(s) << '\n';
}

inline void write_corpus(const std::string& path, const Corpus& c) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write corpus file: " + path);
  write_corpus(out, c);
  if (!out) throw IoError("write failed: " + path);
}

// ---------------------------------------------------------------------------
// Sentence segmentation.

namespace detail {

inline bool is_terminator(char32_t c) {
  return c == U'.' || c == U'?' || c == U'!';
}

inline bool is_closer(char32_t c) {
  return c == U')' || c == U']' || c == U'"' || c == U'\'' || c == 0x201D ||
         c == 0x2019;
}

inline std::u32string lower_word(std::u32string_view w) {
  std::u32string out;
  for (char32_t c : w) out.push_back(utf8::ascii_lower(c));
  return out;
}

// Word immediately before position `dot`, stripped of opening brackets.
inline std::u32string_view word_before(std::u32string_view text,
                                       std::size_t dot) {
  std::size_t b = dot;
  while (b > 0 && !utf8::is_space(text[b - 1])) --b;
  std::u32string_view w = text.substr(b, dot - b);
  while (!w.empty() && (w.front() == U'(' || w.front() == U'[' ||
                        w.front() == U'"' || w.front() == 0x201C)) {
    w.remove_prefix(1);
  }
  return w;
}

inline bool is_abbreviation_period(std::u32string_view text, std::size_t dot) {
  const std::u32string w = lower_word(word_before(text, dot));
  static const std::set<std::u32string> kAbbreviations = {
      U"e.g", U"i.e", U"cf", U"vs", U"fig", U"figs", U"eq", U"eqs", U"sec",
      U"secs", U"tab", U"ref", U"refs", U"approx", U"resp", U"dr", U"prof"};
  if (kAbbreviations.count(w)) return true;
  if (w == U"al") {
    // "et al."
    std::size_t b = dot - 2;
    while (b > 0 && utf8::is_space(text[b - 1])) --b;
    return b >= 2 && lower_word(text.substr(b - 2, 2)) == U"et";
  }
  return false;
}

inline bool is_decimal_period(std::u32string_view text, std::size_t dot) {
  const auto digit = [](char32_t c) { return c >= U'0' && c <= U'9'; };
  return dot > 0 && dot + 1 < text.size() && digit(text[dot - 1]) &&
         digit(text[dot + 1]);
}

inline std::u32string_view trim(std::u32string_view s) {
  while (!s.empty() && utf8::is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && utf8::is_space(s.back())) s.remove_suffix(1);
  return s;
}

}  // namespace detail

// Splits on '.', '?' and '!' runs that are followed by whitespace or the end
// of input. Periods closing a known abbreviation ("e.g.", "i.e.", "et al.",
// "Fig.", "Eq.", "Sec.", "vs.", ...) or sitting inside a decimal number never
// split.
// Closing quotes and brackets stay with the sentence they close.
inline std::vector<std::string> segment_sentences(std::string_view text) {
  const std::u32string t = utf8::decode(text);
  std::vector<std::string> out;
  std::size_t begin = 0;
  std::size_t i = 0;
  const auto emit = [&](std::size_t end) {
    const auto piece =
        detail::trim(std::u32string_view(t).substr(begin, end - begin));
    if (!piece.empty()) out.push_back(utf8::encode(piece));
    begin = end;
  };
  while (i < t.size()) {
    if (!detail::is_terminator(t[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < t.size() && detail::is_terminator(t[j])) ++j;
    std::size_t k = j;
    while (k < t.size() && detail::is_closer(t[k])) ++k;
    const bool at_break = k == t.size() || utf8::is_space(t[k]);
    bool boundary = at_break;
    if (boundary && j - i == 1 && t[i] == U'.') {
      boundary = !detail::is_abbreviation_period(t, i) &&
                 !detail::is_decimal_period(t, i);
    }
    if (boundary) emit(k);
    i = k;
  }
  emit(t.size());
  return out;
}

// Plain text ingestion: paragraphs are separated by blank lines. Line breaks
// inside a paragraph are folded to single spaces before segmentation.
inline std::vector<std::string> read_paragraphs(std::istream& in) {
  std::vector<std::string> paragraphs;
  std::string current;
  std::string line;
  const auto flush = [&] {
    if (!current.empty()) paragraphs.push_back(std::move(current));
    current.clear();
  };
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) {
      flush();
      continue;
    }
    if (!current.empty()) current.push_back(' ');
    current += line;
  }
  flush();
  return paragraphs;
}

inline Corpus prepare_corpus(std::istream& in, std::string name) {
  Corpus c{std::move(name), {}};
  for (const auto& p : read_paragraphs(in)) {
    for (auto& s : segment_sentences(p)) {
      c.sentences.push_back({std::move(s), {}});
    }
  }
  return c;
}

// ---------------------------------------------------------------------------
// Splitting and mixing.

struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;
};

struct SplitSpec {
  Rational train{7, 10};
  Rational val{1, 10};
  Rational test{2, 10};
  std::uint64_t seed = 0;
};

// Parses "7:1:2" (parts) or "7/10,1/10,2/10" (explicit fractions).
inline SplitSpec parse_split_ratio(std::string_view text, std::uint64_t seed) {
  SplitSpec spec;
  spec.seed = seed;
  const std::string s(text);
  try {
    if (s.find(':') != std::string::npos) {
      std::array<std::int64_t, 3> parts{};
      std::stringstream ss(s);
      std::string tok;
      std::size_t n = 0;
      while (std::getline(ss, tok, ':')) {
        if (n == 3) throw ConfigError("split ratio needs exactly 3 parts");
        parts[n++] = std::stoll(tok);
      }
      if (n != 3) throw ConfigError("split ratio needs exactly 3 parts");
      const std::int64_t total = parts[0] + parts[1] + parts[2];
      spec.train = {parts[0], total};
      spec.val = {parts[1], total};
      spec.test = {parts[2], total};
    } else {
      std::array<Rational, 3> fr{};
      std::stringstream ss(s);
      std::string tok;
      std::size_t n = 0;
      while (std::getline(ss, tok, ',')) {
        if (n == 3) throw ConfigError("split fractions need exactly 3 values");
        const auto slash = tok.find('/');
        if (slash == std::string::npos) {
          throw ConfigError("split fraction '" + tok + "' is not p/q");
        }
        fr[n++] = {std::stoll(tok.substr(0, slash)),
                   std::stoll(tok.substr(slash + 1))};
      }
      if (n != 3) throw ConfigError("split fractions need exactly 3 values");
      spec.train = fr[0];
      spec.val = fr[1];
      spec.test = fr[2];
    }
  } catch (const std::logic_error&) {
    throw ConfigError("cannot parse split ratio '" + s + "'");
  }
  return spec;
}

inline void check_split(const SplitSpec& spec) {
  for (const Rational& r : {spec.train, spec.val, spec.test}) {
    if (r.den <= 0 || r.num <= 0) {
      throw ConfigError("split fractions must be positive");
    }
  }
  // a/b + c/d + e/f == 1  <=>  a*d*f + c*b*f + e*b*d == b*d*f
  const auto& [a, b] = spec.train;
  const auto& [c, d] = spec.val;
  const auto& [e, f] = spec.test;
  if (a * d * f + c * b * f + e * b * d != b * d * f) {
    throw ConfigError("split fractions do not sum to 1");
  }
}

struct CorpusSplit {
  Corpus train;
  Corpus val;
  Corpus test;
};

// Shuffles with the split seed, then takes floor(n * val) and
// floor(n * test) sentences for the held-out folds; the remainder trains.
inline CorpusSplit split_corpus(const Corpus& corpus, const SplitSpec& spec) {
  check_split(spec);
  if (corpus.empty()) throw SizeError("cannot split an empty corpus");
  const auto n = static_cast<std::int64_t>(corpus.size());
  const std::size_t n_val = static_cast<std::size_t>(n * spec.val.num / spec.val.den);
  const std::size_t n_test =
      static_cast<std::size_t>(n * spec.test.num / spec.test.den);
  const std::size_t n_train = corpus.size() - n_val - n_test;

  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(spec.seed);
  std::shuffle(order.begin(), order.end(), rng);

  CorpusSplit out{{corpus.name + "/train", {}},
                  {corpus.name + "/val", {}},
                  {corpus.name + "/test", {}}};
  for (std::size_t i = 0; i < order.size(); ++i) {
    Corpus& dst = i < n_train ? out.train
                  : i < n_train + n_val ? out.val
                                        : out.test;
    dst.sentences.push_back(corpus.sentences[order[i]]);
  }
  return out;
}

// Samples `per_area` sentences without replacement from every corpus, then
// shuffles the union.
inline Corpus build_mixed(const std::vector<Corpus>& corpora,
                          std::size_t per_area, std::uint64_t seed,
                          std::string name = "mixed") {
  if (corpora.empty()) throw SizeError("build_mixed needs at least one corpus");
  for (const auto& c : corpora) {
    if (c.size() < per_area) {
      throw SizeError("corpus '" + c.name + "' has " +
                      std::to_string(c.size()) + " sentences, fewer than " +
                      std::to_string(per_area) + " requested per area");
    }
  }
  std::mt19937_64 rng(seed);
  Corpus out{std::move(name), {}};
  out.sentences.reserve(per_area * corpora.size());
  for (const auto& c : corpora) {
    std::vector<std::size_t> order(c.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i = 0; i < per_area; ++i) {
      out.sentences.push_back(c.sentences[order[i]]);
    }
  }
  std::shuffle(out.sentences.begin(), out.sentences.end(), rng);
  return out;
}

}  // namespace mder
