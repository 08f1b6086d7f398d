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

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mder/error.hpp"
#include "mder/rules.hpp"
#include "mder/tagscheme.hpp"

namespace mder {

// Architecture hyperparameters. Defaults are the published settings.
struct ModelConfig {
  std::size_t rule_dim = 40;         // d_r
  std::size_t char_dim = 200;        // d_c
  std::size_t hidden_dim = 200;      // d_h, per LSTM direction
  std::size_t lstm_layers = 2;
  std::size_t cnn_kernels = 30;      // k == d_cnn
  std::size_t kernel_rows = 1;       // p, position axis
  std::size_t kernel_cols = 1;       // q, feature axis
  std::size_t stride_rows = 1;       // s
  std::size_t stride_cols = 2;       // t
  std::size_t attention_dim = 400;   // d_Q
  std::size_t max_length = 600;      // m_max
  double dropout = 0.5;
  std::size_t num_tags = kNumTags;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

// Component switches for the ablation variants.
struct AblationFlags {
  bool no_rule = false;
  bool no_cnn = false;
  bool no_attention = false;
  bool no_crf = false;

  bool any() const { return no_rule || no_cnn || no_attention || no_crf; }
  friend bool operator==(const AblationFlags&, const AblationFlags&) = default;
};

inline std::string ablation_label(const AblationFlags& a) {
  if (!a.any()) return "full";
  std::string s;
  const auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!s.empty()) s += "+";
    s += name;
  };
  add(a.no_rule, "rule");
  add(a.no_cnn, "cnn");
  add(a.no_attention, "attention");
  add(a.no_crf, "crf");
  return "w/o " + s;
}

// Parses names as accepted by --ablation: rule, cnn, attention, crf.
inline AblationFlags parse_ablation(const std::vector<std::string>& names) {
  AblationFlags a;
  for (const auto& n : names) {
    if (n == "rule") a.no_rule = true;
    else if (n == "cnn") a.no_cnn = true;
    else if (n == "attention" || n == "self-attention") a.no_attention = true;
    else if (n == "crf") a.no_crf = true;
    else throw ConfigError("unknown ablation '" + n +
                           "' (expected rule, cnn, attention or crf)");
  }
  return a;
}

inline std::vector<std::string> ablation_names(const AblationFlags& a) {
  std::vector<std::string> out;
  if (a.no_rule) out.push_back("rule");
  if (a.no_cnn) out.push_back("cnn");
  if (a.no_attention) out.push_back("attention");
  if (a.no_crf) out.push_back("crf");
  return out;
}

// Width of x'_t.
inline std::size_t input_dim(const ModelConfig& c, const AblationFlags& a) {
  return (a.no_rule ? 0 : c.rule_dim) + c.char_dim;
}

// Feature-axis length of each convolution feature map.
inline std::size_t cnn_map_width(const ModelConfig& c, const AblationFlags& a) {
  return (input_dim(c, a) - c.kernel_cols) / c.stride_cols + 1;
}

// Width of g_t.
inline std::size_t encoder_dim(const ModelConfig& c, const AblationFlags& a) {
  return 2 * c.hidden_dim + (a.no_cnn ? 0 : c.cnn_kernels);
}

inline void validate(const ModelConfig& c, const AblationFlags& a = {}) {
  const auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw ConfigError(std::string(name) + " must be positive");
  };
  if (!a.no_rule) positive(c.rule_dim, "rule_dim");
  positive(c.char_dim, "char_dim");
  positive(c.hidden_dim, "hidden_dim");
  positive(c.lstm_layers, "lstm_layers");
  positive(c.max_length, "max_length");
  if (!a.no_cnn) {
    positive(c.cnn_kernels, "cnn_kernels");
    positive(c.kernel_rows, "kernel_rows");
    positive(c.kernel_cols, "kernel_cols");
    positive(c.stride_cols, "stride_cols");
    if (c.kernel_rows % 2 == 0) {
      throw ConfigError("kernel_rows must be odd (same padding on the position axis)");
    }
    if (c.stride_rows != 1) {
      throw ConfigError("stride_rows must be 1 to keep one output per character");
    }
    if (input_dim(c, a) < c.kernel_cols) {
      throw ConfigError("convolution kernel is wider than the feature dimension");
    }
  }
  if (!a.no_attention) positive(c.attention_dim, "attention_dim");
  if (c.num_tags != kNumTags) throw ConfigError("num_tags must be 6");
  if (!(c.dropout >= 0.0 && c.dropout < 1.0)) {
    throw ConfigError("dropout must be in [0, 1)");
  }
}

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"rule_dim", c.rule_dim},
                     {"char_dim", c.char_dim},
                     {"hidden_dim", c.hidden_dim},
                     {"lstm_layers", c.lstm_layers},
                     {"cnn_kernels", c.cnn_kernels},
                     {"kernel", {c.kernel_rows, c.kernel_cols}},
                     {"stride", {c.stride_rows, c.stride_cols}},
                     {"attention_dim", c.attention_dim},
                     {"max_length", c.max_length},
                     {"dropout", c.dropout},
                     {"num_tags", c.num_tags}};
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  c.rule_dim = j.value("rule_dim", c.rule_dim);
  c.char_dim = j.value("char_dim", c.char_dim);
  c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
  c.lstm_layers = j.value("lstm_layers", c.lstm_layers);
  c.cnn_kernels = j.value("cnn_kernels", c.cnn_kernels);
  if (j.contains("kernel")) {
    c.kernel_rows = j["kernel"].at(0).get<std::size_t>();
    c.kernel_cols = j["kernel"].at(1).get<std::size_t>();
  }
  if (j.contains("stride")) {
    c.stride_rows = j["stride"].at(0).get<std::size_t>();
    c.stride_cols = j["stride"].at(1).get<std::size_t>();
  }
  c.attention_dim = j.value("attention_dim", c.attention_dim);
  c.max_length = j.value("max_length", c.max_length);
  c.dropout = j.value("dropout", c.dropout);
  c.num_tags = j.value("num_tags", c.num_tags);
}

inline void to_json(nlohmann::json& j, const AblationFlags& a) {
  j = ablation_names(a);
}

inline void from_json(const nlohmann::json& j, AblationFlags& a) {
  a = parse_ablation(j.get<std::vector<std::string>>());
}

}  // namespace mder
