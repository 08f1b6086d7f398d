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
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "mder/crf.hpp"
#include "mder/error.hpp"
#include "mder/model/config.hpp"
#include "mder/rules.hpp"
#include "mder/tensor.hpp"

namespace mder {

inline constexpr std::size_t kPadChar = 0;
inline constexpr std::size_t kUnkChar = 1;
inline constexpr std::size_t kPadRule = static_cast<std::size_t>(RuleTag::PAD);

// Weights of one LSTM direction. Row blocks of `w` and `b` are the gates
// in the order input, forget, output, candidate; columns of `w` are
// [h_{t-1}; x_t].
template <class S>
struct LstmWeights {
  Matrix<S> w;  // 4*d_h x (d_h + d_in)
  Matrix<S> b;  // 4*d_h x 1
};

inline constexpr std::array<const char*, 4> kGateNames = {"i", "f", "o", "c"};

// All learned tensors plus the configuration that fixes their shapes.
// Tensors of ablated components are left empty.
template <class S>
struct ModelParams {
  ModelConfig config;
  AblationFlags ablation;
  std::size_t vocab_size = 2;

  Matrix<S> rule_embedding;  // 7 x d_r
  Matrix<S> char_embedding;  // |V| x d_c
  std::vector<std::array<LstmWeights<S>, 2>> lstm;  // [layer][fwd, bwd]
  Matrix<S> cnn_kernels;     // k x (p*q)
  Matrix<S> cnn_bias;        // k x 1
  Matrix<S> query;           // D x d_Q
  Matrix<S> key;             // D x d_Q
  Matrix<S> proj_weight;     // D x 6
  Matrix<S> proj_bias;       // 6 x 1
  Matrix<S> transitions;     // 8 x 8

  template <class F>
  void for_each(F&& f) {
    for_each_impl(*this, std::forward<F>(f));
  }
  template <class F>
  void for_each(F&& f) const {
    for_each_impl(*this, std::forward<F>(f));
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for_each([&](const std::string&, const Matrix<S>& m) {
      n += static_cast<std::size_t>(m.size());
    });
    return n;
  }

  // Same shapes, all zeros; used as a gradient accumulator.
  ModelParams zeros_like() const {
    ModelParams g = *this;
    g.for_each([](const std::string&, Matrix<S>& m) { m.setZero(); });
    return g;
  }

  template <class T>
  ModelParams<T> cast() const {
    ModelParams<T> out;
    out.config = config;
    out.ablation = ablation;
    out.vocab_size = vocab_size;
    out.rule_embedding = rule_embedding.template cast<T>();
    out.char_embedding = char_embedding.template cast<T>();
    out.lstm.resize(lstm.size());
    for (std::size_t l = 0; l < lstm.size(); ++l) {
      for (std::size_t d = 0; d < 2; ++d) {
        out.lstm[l][d].w = lstm[l][d].w.template cast<T>();
        out.lstm[l][d].b = lstm[l][d].b.template cast<T>();
      }
    }
    out.cnn_kernels = cnn_kernels.template cast<T>();
    out.cnn_bias = cnn_bias.template cast<T>();
    out.query = query.template cast<T>();
    out.key = key.template cast<T>();
    out.proj_weight = proj_weight.template cast<T>();
    out.proj_bias = proj_bias.template cast<T>();
    out.transitions = transitions.template cast<T>();
    return out;
  }

 private:
  template <class P, class F>
  static void for_each_impl(P& p, F&& f) {
    const auto visit = [&](const std::string& name, auto& m) {
      if (m.size() > 0) f(name, m);
    };
    visit("embedding.rule", p.rule_embedding);
    visit("embedding.char", p.char_embedding);
    for (std::size_t l = 0; l < p.lstm.size(); ++l) {
      for (std::size_t d = 0; d < 2; ++d) {
        const std::string prefix =
            "bilstm.l" + std::to_string(l) + (d == 0 ? ".fwd" : ".bwd");
        visit(prefix + ".W", p.lstm[l][d].w);
        visit(prefix + ".b", p.lstm[l][d].b);
      }
    }
    visit("cnn.kernels", p.cnn_kernels);
    visit("cnn.bias", p.cnn_bias);
    visit("attention.W_Q", p.query);
    visit("attention.W_K", p.key);
    visit("linear.W_a", p.proj_weight);
    visit("linear.b_a", p.proj_bias);
    visit("crf.A", p.transitions);
  }
};

// Tensors with the declared shapes, all zero (CRF forbidden transitions at
// -inf).
template <class S>
ModelParams<S> zero_params(const ModelConfig& config, const AblationFlags& ablation,
                           std::size_t vocab_size) {
  validate(config, ablation);
  if (vocab_size < 2) throw ConfigError("vocabulary must hold PAD and UNK");
  ModelParams<S> p;
  p.config = config;
  p.ablation = ablation;
  p.vocab_size = vocab_size;
  const auto dh = static_cast<Eigen::Index>(config.hidden_dim);
  if (!ablation.no_rule) p.rule_embedding = Matrix<S>::Zero(kNumRuleTags, config.rule_dim);
  p.char_embedding = Matrix<S>::Zero(vocab_size, config.char_dim);
  p.lstm.resize(config.lstm_layers);
  for (std::size_t l = 0; l < config.lstm_layers; ++l) {
    const Eigen::Index din =
        l == 0 ? static_cast<Eigen::Index>(input_dim(config, ablation)) : 2 * dh;
    for (auto& dir : p.lstm[l]) {
      dir.w = Matrix<S>::Zero(4 * dh, dh + din);
      dir.b = Matrix<S>::Zero(4 * dh, 1);
    }
  }
  const auto d = static_cast<Eigen::Index>(encoder_dim(config, ablation));
  if (!ablation.no_cnn) {
    p.cnn_kernels = Matrix<S>::Zero(config.cnn_kernels,
                                    config.kernel_rows * config.kernel_cols);
    p.cnn_bias = Matrix<S>::Zero(config.cnn_kernels, 1);
  }
  if (!ablation.no_attention) {
    p.query = Matrix<S>::Zero(d, config.attention_dim);
    p.key = Matrix<S>::Zero(d, config.attention_dim);
  }
  p.proj_weight = Matrix<S>::Zero(d, kNumTags);
  p.proj_bias = Matrix<S>::Zero(kNumTags, 1);
  if (!ablation.no_crf) p.transitions = crf::make_transitions<S>();
  return p;
}

// Random initialisation, deterministic given the generator state.
//  - embeddings: U(-1, 1); PAD rows pinned to zero
//  - weight matrices: U(-1/sqrt(fan_in), 1/sqrt(fan_in))
//  - W_K starts as a copy of W_Q, so initial attention favours each
//    position's own representation
//  - biases zero except the LSTM forget gate (1.0)
//  - CRF transitions zero (finite part)
template <class S>
ModelParams<S> init_params(const ModelConfig& config, const AblationFlags& ablation,
                           std::size_t vocab_size, std::mt19937_64& rng) {
  ModelParams<S> p = zero_params<S>(config, ablation, vocab_size);
  const auto fill = [&](Matrix<S>& m, double bound) {
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = static_cast<S>(u(rng));
    }
  };
  if (!ablation.no_rule) {
    fill(p.rule_embedding, 1.0);
    p.rule_embedding.row(kPadRule).setZero();
  }
  fill(p.char_embedding, 1.0);
  p.char_embedding.row(kPadChar).setZero();
  const auto dh = static_cast<Eigen::Index>(config.hidden_dim);
  for (auto& layer : p.lstm) {
    for (auto& dir : layer) {
      fill(dir.w, 1.0 / std::sqrt(static_cast<double>(dir.w.cols())));
      dir.b.setZero();
      dir.b.middleRows(dh, dh).setConstant(S(1));
    }
  }
  if (!ablation.no_cnn) {
    fill(p.cnn_kernels, 1.0 / std::sqrt(static_cast<double>(p.cnn_kernels.cols())));
  }
  const double fan_in = static_cast<double>(p.proj_weight.rows());
  if (!ablation.no_attention) {
    fill(p.query, 1.0 / std::sqrt(fan_in));
    p.key = p.query;
  }
  fill(p.proj_weight, 1.0 / std::sqrt(fan_in));
  return p;
}

// Checks every tensor against the shapes implied by the configuration and
// that all learnable values are finite.
template <class S>
void check_params(const ModelParams<S>& p) {
  const ModelParams<S> expect = zero_params<S>(p.config, p.ablation, p.vocab_size);
  std::vector<std::pair<std::string, std::pair<Eigen::Index, Eigen::Index>>> want, got;
  expect.for_each([&](const std::string& n, const Matrix<S>& m) {
    want.push_back({n, {m.rows(), m.cols()}});
  });
  p.for_each([&](const std::string& n, const Matrix<S>& m) {
    got.push_back({n, {m.rows(), m.cols()}});
  });
  if (want != got) throw ShapeError("parameter tensors do not match the model configuration");
  p.for_each([&](const std::string& n, const Matrix<S>& m) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      for (Eigen::Index r = 0; r < m.rows(); ++r) {
        if (n == "crf.A" && (static_cast<std::size_t>(c) == crf::kStart ||
                             static_cast<std::size_t>(r) == crf::kStop)) {
          continue;
        }
        if (!std::isfinite(static_cast<double>(m(r, c)))) {
          throw ShapeError("non-finite value in " + n);
        }
      }
    }
  });
}

}  // namespace mder
