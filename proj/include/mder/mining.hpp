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
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <queue>
#include <set>
#include <sstream>
#include <stack>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "mder/error.hpp"
#include "mder/utf8.hpp"

namespace mder {

struct PaperEntities {
  std::string paper_id;
  int year = 0;
  std::set<std::string> methods;
  std::set<std::string> datasets;
};

inline constexpr int kMinYear = 1950;
inline constexpr int kMaxYear = 2100;

inline void check_year(int year) {
  if (year < kMinYear || year > kMaxYear) {
    throw ConfigError("year " + std::to_string(year) + " outside [" +
                      std::to_string(kMinYear) + ", " + std::to_string(kMaxYear) + "]");
  }
}

// ---------------------------------------------------------------------------
// Canonical names.

// Lowercase, trim, collapse internal whitespace, strip leading and trailing
// punctuation.
inline std::string normalize_surface(std::string_view surface) {
  const std::u32string in = utf8::decode(surface);
  std::u32string out;
  bool pending_space = false;
  for (char32_t c : in) {
    if (utf8::is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(U' ');
    pending_space = false;
    out.push_back(utf8::ascii_lower(c));
  }
  const auto is_punct = [](char32_t c) {
    return c < 0x80 && !utf8::is_ascii_alnum(c) && !utf8::is_space(c);
  };
  std::size_t b = 0, e = out.size();
  while (b < e && (is_punct(out[b]) || utf8::is_space(out[b]))) ++b;
  while (e > b && (is_punct(out[e - 1]) || utf8::is_space(out[e - 1]))) --e;
  return utf8::encode(std::u32string_view(out).substr(b, e - b));
}

// Normalized surface -> canonical name. Chains are resolved when the map is
// built, so applying it twice changes nothing.
class AliasMap {
 public:
  AliasMap() = default;

  explicit AliasMap(const std::vector<std::pair<std::string, std::string>>& pairs) {
    std::map<std::string, std::string> raw;
    for (const auto& [from, to] : pairs) {
      const std::string f = normalize_surface(from), t = normalize_surface(to);
      if (f.empty() || t.empty()) throw ConfigError("empty alias entry");
      if (f == t) continue;
      const auto [it, ok] = raw.emplace(f, t);
      if (!ok && it->second != t) {
        throw ConfigError("alias '" + f + "' maps to both '" + it->second + "' and '" + t + "'");
      }
    }
    for (const auto& [from, to] : raw) {
      std::string cur = to;
      std::set<std::string> seen = {from};
      while (true) {
        if (!seen.insert(cur).second) throw ConfigError("alias cycle through '" + from + "'");
        const auto it = raw.find(cur);
        if (it == raw.end()) break;
        cur = it->second;
      }
      map_.emplace(from, cur);
    }
  }

  const std::string& resolve(const std::string& normalized) const {
    const auto it = map_.find(normalized);
    return it == map_.end() ? normalized : it->second;
  }
  std::size_t size() const { return map_.size(); }

 private:
  std::map<std::string, std::string> map_;
};

inline std::string canonicalize(std::string_view surface, const AliasMap& aliases) {
  return aliases.resolve(normalize_surface(surface));
}

namespace detail {

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    lines.push_back(line);
  }
  return lines;
}

// "left<TAB>right" or "left => right".
inline std::pair<std::string, std::string> split_pair(const std::string& line,
                                                      const std::string& path) {
  auto pos = line.find('\t');
  std::size_t width = 1;
  if (pos == std::string::npos) {
    pos = line.find("=>");
    width = 2;
  }
  if (pos == std::string::npos) {
    throw FormatError(path + ": expected 'term<TAB>value' or 'term => value': " + line);
  }
  return {line.substr(0, pos), line.substr(pos + width)};
}

}  // namespace detail

inline AliasMap load_alias_file(const std::string& path) {
  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& line : detail::read_lines(path)) {
    pairs.push_back(detail::split_pair(line, path));
  }
  return AliasMap(pairs);
}

// Normalized surface forms to drop before canonicalization.
inline std::set<std::string> load_exclude_file(const std::string& path) {
  std::set<std::string> out;
  for (const auto& line : detail::read_lines(path)) out.insert(normalize_surface(line));
  return out;
}

// Canonical name -> category label, for graph export.
inline std::map<std::string, std::string> load_category_file(const std::string& path,
                                                             const AliasMap& aliases) {
  std::map<std::string, std::string> out;
  for (const auto& line : detail::read_lines(path)) {
    auto [term, cat] = detail::split_pair(line, path);
    const auto b = cat.find_first_not_of(" \t"), e = cat.find_last_not_of(" \t");
    out[canonicalize(term, aliases)] = b == std::string::npos ? "" : cat.substr(b, e - b + 1);
  }
  return out;
}

// Canonical set of the surfaces that are not excluded and not empty.
inline std::set<std::string> canonical_set(const std::vector<std::string>& surfaces,
                                           const AliasMap& aliases,
                                           const std::set<std::string>& exclude) {
  std::set<std::string> out;
  for (const auto& s : surfaces) {
    const std::string n = normalize_surface(s);
    if (n.empty() || exclude.count(n)) continue;
    out.insert(aliases.resolve(n));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Co-occurrence networks.

using Edge = std::pair<std::string, std::string>;  // first < second

struct CooccurrenceGraph {
  std::set<std::string> nodes;
  std::map<Edge, std::size_t> edges;

  std::size_t weight(const std::string& a, const std::string& b) const {
    const auto it = edges.find(a < b ? Edge{a, b} : Edge{b, a});
    return it == edges.end() ? 0 : it->second;
  }
};

// Nodes are the methods of the year's papers; each paper adds 1 to every
// unordered pair of its methods.
inline CooccurrenceGraph build_graph(const std::vector<PaperEntities>& papers, int year) {
  CooccurrenceGraph g;
  for (const auto& p : papers) {
    if (p.year != year) continue;
    const std::vector<std::string> m(p.methods.begin(), p.methods.end());
    for (std::size_t i = 0; i < m.size(); ++i) {
      g.nodes.insert(m[i]);
      for (std::size_t j = i + 1; j < m.size(); ++j) ++g.edges[{m[i], m[j]}];
    }
  }
  return g;
}

// Keeps edges with weight >= min_weight (the strict "> min_weight - 1") and
// the nodes they touch.
inline CooccurrenceGraph filter_edges(const CooccurrenceGraph& g, std::size_t min_weight) {
  if (min_weight < 1) throw ConfigError("min_weight must be at least 1");
  CooccurrenceGraph out;
  for (const auto& [e, w] : g.edges) {
    if (w < min_weight) continue;
    out.edges.emplace(e, w);
    out.nodes.insert(e.first);
    out.nodes.insert(e.second);
  }
  return out;
}

// Unnormalized shortest-path betweenness on the unweighted skeleton. Each
// unordered pair {s, t} contributes sigma_st(v) / sigma_st to every inner
// node v.
inline std::map<std::string, double> betweenness(const CooccurrenceGraph& g) {
  const std::vector<std::string> names(g.nodes.begin(), g.nodes.end());
  const std::size_t n = names.size();
  std::map<std::string, std::size_t> id;
  for (std::size_t i = 0; i < n; ++i) id[names[i]] = i;
  std::vector<std::vector<std::size_t>> adj(n);
  for (const auto& [e, w] : g.edges) {
    const std::size_t a = id.at(e.first), b = id.at(e.second);
    adj[a].push_back(b);
    adj[b].push_back(a);
  }
  std::vector<double> cb(n, 0.0);
  std::vector<std::vector<std::size_t>> pred(n);
  std::vector<double> sigma(n), delta(n);
  std::vector<long> dist(n);
  for (std::size_t s = 0; s < n; ++s) {
    std::stack<std::size_t> order;
    for (std::size_t v = 0; v < n; ++v) {
      pred[v].clear();
      sigma[v] = 0;
      dist[v] = -1;
      delta[v] = 0;
    }
    sigma[s] = 1;
    dist[s] = 0;
    std::queue<std::size_t> q;
    q.push(s);
    while (!q.empty()) {
      const std::size_t v = q.front();
      q.pop();
      order.push(v);
      for (std::size_t w : adj[v]) {
        if (dist[w] < 0) {
          dist[w] = dist[v] + 1;
          q.push(w);
        }
        if (dist[w] == dist[v] + 1) {
          sigma[w] += sigma[v];
          pred[w].push_back(v);
        }
      }
    }
    while (!order.empty()) {
      const std::size_t w = order.top();
      order.pop();
      for (std::size_t v : pred[w]) delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
      if (w != s) cb[w] += delta[w];
    }
  }
  std::map<std::string, double> out;
  for (std::size_t i = 0; i < n; ++i) out[names[i]] = cb[i] / 2.0;
  return out;
}

struct Ranked {
  std::string entity;
  double score = 0;
};

// Descending by score, ties by name.
inline std::vector<Ranked> top_k(const std::map<std::string, double>& scores, std::size_t k) {
  if (k < 1) throw ConfigError("k must be at least 1");
  std::vector<Ranked> all;
  for (const auto& [name, s] : scores) all.push_back({name, s});
  std::stable_sort(all.begin(), all.end(), [](const Ranked& a, const Ranked& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.entity < b.entity;
  });
  if (all.size() > k) all.resize(k);
  return all;
}

// Papers of `year` mentioning each dataset.
inline std::map<std::string, std::size_t> dataset_frequency(
    const std::vector<PaperEntities>& papers, int year) {
  std::map<std::string, std::size_t> out;
  for (const auto& p : papers) {
    if (p.year != year) continue;
    for (const auto& d : p.datasets) ++out[d];
  }
  return out;
}

inline std::set<int> years_of(const std::vector<PaperEntities>& papers) {
  std::set<int> out;
  for (const auto& p : papers) out.insert(p.year);
  return out;
}

// ---------------------------------------------------------------------------
// Input and export.

// One paper per record. Accepted shapes:
//   {"paper_id": .., "year": .., "methods": [..], "datasets": [..]}
//   {"paper_id": .., "year": .., "text": .., "entities": [{start, end, kind}]}
// Records sharing a paper_id are merged; their years must agree.
inline std::vector<PaperEntities> read_papers(std::istream& in, const AliasMap& aliases,
                                              const std::set<std::string>& exclude) {
  std::map<std::string, PaperEntities> by_id;
  std::vector<std::string> order;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "line " + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(where + ": " + e.what());
    }
    std::vector<std::string> methods, datasets;
    std::string id;
    int year = 0;
    try {
      id = j.at("paper_id").is_string() ? j.at("paper_id").get<std::string>()
                                        : j.at("paper_id").dump();
      year = j.at("year").get<int>();
      if (j.contains("methods") || j.contains("datasets")) {
        methods = j.value("methods", std::vector<std::string>{});
        datasets = j.value("datasets", std::vector<std::string>{});
      } else {
        const std::u32string text = utf8::decode(j.at("text").get<std::string>());
        for (const auto& e : j.at("entities")) {
          const auto s = e.at("start").get<std::size_t>(), t = e.at("end").get<std::size_t>();
          if (s >= t || t > text.size()) throw FormatError(where + ": span out of range");
          const std::string surface = utf8::encode(text.substr(s, t - s));
          (e.at("kind").get<std::string>() == "M" ? methods : datasets).push_back(surface);
        }
      }
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(where + ": " + e.what());
    }
    check_year(year);
    auto [it, fresh] = by_id.try_emplace(id);
    PaperEntities& p = it->second;
    if (fresh) {
      p.paper_id = id;
      p.year = year;
      order.push_back(id);
    } else if (p.year != year) {
      throw FormatError(where + ": paper " + id + " appears with two years");
    }
    for (auto& m : canonical_set(methods, aliases, exclude)) p.methods.insert(m);
    for (auto& d : canonical_set(datasets, aliases, exclude)) p.datasets.insert(d);
  }
  std::vector<PaperEntities> out;
  for (const auto& id : order) out.push_back(by_id.at(id));
  return out;
}

// networkx-style node-link document.
inline nlohmann::json to_node_link(const CooccurrenceGraph& g, int year,
                                   const std::map<std::string, double>& centrality,
                                   const std::map<std::string, std::string>& categories = {}) {
  nlohmann::json nodes = nlohmann::json::array(), links = nlohmann::json::array();
  for (const auto& n : g.nodes) {
    nlohmann::json node = {{"id", n}};
    if (const auto it = centrality.find(n); it != centrality.end()) {
      node["betweenness"] = it->second;
    }
    if (const auto it = categories.find(n); it != categories.end()) {
      node["category"] = it->second;
    }
    nodes.push_back(node);
  }
  for (const auto& [e, w] : g.edges) {
    links.push_back({{"source", e.first}, {"target", e.second}, {"weight", w}});
  }
  return {{"directed", false}, {"multigraph", false}, {"graph", {{"year", year}}},
          {"nodes", nodes}, {"links", links}};
}

namespace detail {

inline std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace detail

inline void write_graphml(std::ostream& out, const CooccurrenceGraph& g, int year,
                          const std::map<std::string, double>& centrality,
                          const std::map<std::string, std::string>& categories = {}) {
  using detail::xml_escape;
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n"
      << "  <key id=\"weight\" for=\"edge\" attr.name=\"weight\" attr.type=\"int\"/>\n"
      << "  <key id=\"betweenness\" for=\"node\" attr.name=\"betweenness\" "
         "attr.type=\"double\"/>\n"
      << "  <key id=\"category\" for=\"node\" attr.name=\"category\" attr.type=\"string\"/>\n"
      << "  <graph id=\"" << year << "\" edgedefault=\"undirected\">\n";
  out << std::setprecision(17);
  for (const auto& n : g.nodes) {
    out << "    <node id=\"" << xml_escape(n) << "\">";
    if (const auto it = centrality.find(n); it != centrality.end()) {
      out << "<data key=\"betweenness\">" << it->second << "</data>";
    }
    if (const auto it = categories.find(n); it != categories.end()) {
      out << "<data key=\"category\">" << xml_escape(it->second) << "</data>";
    }
    out << "</node>\n";
  }
  for (const auto& [e, w] : g.edges) {
    out << "    <edge source=\"" << xml_escape(e.first) << "\" target=\""
        << xml_escape(e.second) << "\"><data key=\"weight\">" << w << "</data></edge>\n";
  }
  out << "  </graph>\n</graphml>\n";
}

inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline void write_rankings_header(std::ostream& out) { out << "year,rank,entity,score\n"; }

inline void write_rankings(std::ostream& out, int year, const std::vector<Ranked>& ranked) {
  out << std::setprecision(17);
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    out << year << ',' << (i + 1) << ',' << csv_field(ranked[i].entity) << ','
        << ranked[i].score << '\n';
  }
}

}  // namespace mder
