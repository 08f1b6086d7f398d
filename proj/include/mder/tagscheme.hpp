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

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mder/corpus.hpp"
#include "mder/error.hpp"
#include "mder/utf8.hpp"

namespace mder {

// Character tag alphabet. The numeric values are the CRF state indices.
enum class Tag : std::uint8_t { BM = 0, IM = 1, BD = 2, ID = 3, O = 4, PAD = 5 };

inline constexpr std::size_t kNumTags = 6;

using TagSequence = std::vector<Tag>;

inline constexpr std::array<std::string_view, kNumTags> kTagNames = {
    "B-M", "I-M", "B-D", "I-D", "O", "PAD"};

inline std::string_view tag_name(Tag t) {
  return kTagNames[static_cast<std::size_t>(t)];
}

inline Tag parse_tag(std::string_view s) {
  for (std::size_t i = 0; i < kNumTags; ++i) {
    if (kTagNames[i] == s) return static_cast<Tag>(i);
  }
  throw FormatError("unknown tag '" + std::string(s) + "'");
}

inline Tag begin_tag(EntityKind k) {
  return k == EntityKind::Method ? Tag::BM : Tag::BD;
}
inline Tag inside_tag(EntityKind k) {
  return k == EntityKind::Method ? Tag::IM : Tag::ID;
}

inline TagSequence encode_tags(const AnnotatedSentence& s) {
  const std::size_t m = utf8::length(s.text);
  TagSequence tags(m, Tag::O);
  std::size_t prev_end = 0;
  for (std::size_t k = 0; k < s.entities.size(); ++k) {
    const EntitySpan& e = s.entities[k];
    if (e.start >= e.end || e.end > m) {
      throw AnnotationError("entity [" + std::to_string(e.start) + "," +
                            std::to_string(e.end) + ") out of range");
    }
    if (k > 0 && e.start < prev_end) {
      throw AnnotationError("entity [" + std::to_string(e.start) + "," +
                            std::to_string(e.end) +
                            ") overlaps the previous entity");
    }
    tags[e.start] = begin_tag(e.kind);
    for (std::size_t i = e.start + 1; i < e.end; ++i) tags[i] = inside_tag(e.kind);
    prev_end = e.end;
  }
  return tags;
}

// Maximal B-X I-X* runs become spans. A stray I-X (not continuing a run of
// the same type) opens a new span. PAD at a real position reads as O.
// Decoded spans are trimmed of edge whitespace; all-space runs are dropped.
inline std::vector<EntitySpan> decode_entities(std::u32string_view text,
                                               std::span<const Tag> tags) {
  if (tags.size() != text.size()) {
    throw ShapeError("tag sequence length " + std::to_string(tags.size()) +
                     " != text length " + std::to_string(text.size()));
  }
  std::vector<EntitySpan> out;
  const auto flush = [&](std::size_t start, std::size_t end, EntityKind kind) {
    while (start < end && utf8::is_space(text[start])) ++start;
    while (end > start && utf8::is_space(text[end - 1])) --end;
    if (start < end) out.push_back({start, end, kind});
  };
  std::size_t i = 0;
  while (i < tags.size()) {
    const Tag t = tags[i];
    if (t == Tag::O || t == Tag::PAD) {
      ++i;
      continue;
    }
    const EntityKind kind =
        (t == Tag::BM || t == Tag::IM) ? EntityKind::Method : EntityKind::Dataset;
    std::size_t j = i + 1;
    while (j < tags.size() && tags[j] == inside_tag(kind)) ++j;
    flush(i, j, kind);
    i = j;
  }
  return out;
}

inline std::vector<EntitySpan> decode_entities(std::string_view text,
                                               std::span<const Tag> tags) {
  const std::u32string cps = utf8::decode(text);
  return decode_entities(std::u32string_view(cps), tags);
}

}  // namespace mder
