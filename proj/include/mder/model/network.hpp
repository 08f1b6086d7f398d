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
#include <random>
#include <span>
#include <vector>

#include "mder/crf.hpp"
#include "mder/error.hpp"
#include "mder/model/layers.hpp"
#include "mder/model/params.hpp"
#include "mder/model/vocab.hpp"
#include "mder/tagscheme.hpp"

namespace mder {

// Inverted dropout driven by the run's generator.
class Dropout {
 public:
  Dropout(double rate, std::mt19937_64& rng) : rate_(rate), rng_(&rng) {}

  double rate() const { return rate_; }

  // Returns a mask of 0 and 1/(1-rate) with the shape of `like`.
  template <class S>
  Matrix<S> sample(Eigen::Index rows, Eigen::Index cols) {
    Matrix<S> mask(rows, cols);
    const S keep = static_cast<S>(1.0 / (1.0 - rate_));
    for (Eigen::Index c = 0; c < cols; ++c) {
      for (Eigen::Index r = 0; r < rows; ++r) {
        const double u = static_cast<double>((*rng_)() >> 11) * 0x1.0p-53;
        mask(r, c) = u < rate_ ? S(0) : keep;
      }
    }
    return mask;
  }

 private:
  double rate_;
  std::mt19937_64* rng_;
};

template <class S>
struct ForwardTrace {
  EncodedSequence seq;
  Matrix<S> x_drop;  // dropout mask on x' (empty when inactive)
  layers::BilstmTrace<S> lstm;
  layers::CnnTrace<S> cnn;
  Matrix<S> g_drop;  // dropout mask on G
  layers::AttentionTrace<S> attention;
  Matrix<S> head_input;  // input of the linear layer
};

// x' = embed(seq), G = [bilstm(x'); cnn(x')], H^a = attention(G),
// Z = project(H^a). Ablated components are skipped. Passing `dropout`
// enables training-time dropout on x' and on G.
template <class S>
Matrix<S> forward(const EncodedSequence& seq, const ModelParams<S>& p,
                  ForwardTrace<S>* trace = nullptr, Dropout* dropout = nullptr) {
  if (seq.size() == 0) throw ShapeError("cannot run the network on an empty sequence");
  if (seq.rule_ids.size() != seq.size() || seq.mask.size() != seq.size()) {
    throw ShapeError("encoded sequence fields differ in length");
  }
  const layers::Mask mask(seq.mask);
  Matrix<S> x = layers::embed(seq, p);
  if (dropout && dropout->rate() > 0) {
    Matrix<S> dm = dropout->template sample<S>(x.rows(), x.cols());
    x.array() *= dm.array();
    if (trace) trace->x_drop = std::move(dm);
  }
  Matrix<S> h = layers::bilstm_forward(x, p, mask, trace ? &trace->lstm : nullptr);
  Matrix<S> g;
  if (p.ablation.no_cnn) {
    g = std::move(h);
  } else {
    const Matrix<S> hc = layers::cnn_forward(x, p, mask, trace ? &trace->cnn : nullptr);
    g.resize(h.rows(), h.cols() + hc.cols());
    g << h, hc;
  }
  if (dropout && dropout->rate() > 0) {
    Matrix<S> dm = dropout->template sample<S>(g.rows(), g.cols());
    g.array() *= dm.array();
    if (trace) trace->g_drop = std::move(dm);
  }
  Matrix<S> ha = p.ablation.no_attention
                     ? std::move(g)
                     : layers::attention_forward(g, mask, p,
                                                 trace ? &trace->attention : nullptr);
  Matrix<S> z = layers::project(ha, p);
  if (trace) {
    trace->seq = seq;
    trace->head_input = std::move(ha);
  }
  return z;
}

// Accumulates dLoss/dparams into `grad` given dLoss/dZ.
template <class S>
void backward(const ForwardTrace<S>& tr, const Matrix<S>& dz, const ModelParams<S>& p,
              ModelParams<S>& grad) {
  Matrix<S> d = layers::project_backward(tr.head_input, dz, p, grad);
  if (!p.ablation.no_attention) d = layers::attention_backward(tr.attention, d, p, grad);
  if (tr.g_drop.size() > 0) d.array() *= tr.g_drop.array();
  const Eigen::Index lstm_width = 2 * static_cast<Eigen::Index>(p.config.hidden_dim);
  Matrix<S> dx = layers::bilstm_backward(tr.lstm, Matrix<S>(d.leftCols(lstm_width)), p, grad);
  if (!p.ablation.no_cnn) {
    dx += layers::cnn_backward(tr.cnn, Matrix<S>(d.rightCols(d.cols() - lstm_width)), p, grad);
  }
  if (tr.x_drop.size() > 0) dx.array() *= tr.x_drop.array();
  layers::embed_backward(tr.seq, dx, grad);
}

// G = [bilstm(x'); cnn(x')] without tracing; G = bilstm(x') when the CNN is
// ablated.
template <class S>
Matrix<S> encode(const Matrix<S>& x, const ModelParams<S>& p, layers::Mask mask) {
  Matrix<S> h = layers::bilstm_forward(x, p, mask);
  if (p.ablation.no_cnn) return h;
  const Matrix<S> hc = layers::cnn_forward(x, p, mask);
  if (hc.rows() != h.rows()) throw ShapeError("encoder streams differ in length");
  Matrix<S> g(h.rows(), h.cols() + hc.cols());
  g << h, hc;
  return g;
}

namespace detail {

template <class S>
Matrix<S> real_rows(const Matrix<S>& z, std::span<const std::uint8_t> mask) {
  std::size_t n = 0;
  for (auto v : mask) n += v;
  Matrix<S> out(static_cast<Eigen::Index>(n), z.cols());
  Eigen::Index r = 0;
  for (std::size_t t = 0; t < mask.size(); ++t) {
    if (mask[t]) out.row(r++) = z.row(static_cast<Eigen::Index>(t));
  }
  return out;
}

}  // namespace detail

template <class S>
struct SequenceLoss {
  S loss = 0;
  Matrix<S> d_z;  // same shape as Z; zero at padding rows
  Matrix<S> d_transitions;
};

// Negative log-likelihood of the gold tags at the real positions (CRF), or
// the summed per-position cross entropy when the CRF is ablated.
template <class S>
SequenceLoss<S> sequence_loss(const Matrix<S>& z, const EncodedSequence& seq,
                              std::span<const Tag> gold, const ModelParams<S>& p) {
  const Matrix<S> zr = detail::real_rows(z, seq.mask);
  if (static_cast<std::size_t>(zr.rows()) != gold.size()) {
    throw ShapeError("gold tag count " + std::to_string(gold.size()) +
                     " != real positions " + std::to_string(zr.rows()));
  }
  std::vector<int> y(gold.size());
  for (std::size_t i = 0; i < gold.size(); ++i) y[i] = static_cast<int>(gold[i]);
  const auto g = p.ablation.no_crf
                     ? crf::softmax_loss_with_gradient(zr, std::span<const int>(y))
                     : crf::nll_loss_with_gradient(zr, std::span<const int>(y), p.transitions);
  SequenceLoss<S> out;
  out.loss = g.loss;
  out.d_transitions = g.d_transitions;
  out.d_z = Matrix<S>::Zero(z.rows(), z.cols());
  Eigen::Index r = 0;
  for (std::size_t t = 0; t < seq.mask.size(); ++t) {
    if (seq.mask[t]) out.d_z.row(static_cast<Eigen::Index>(t)) = g.d_emissions.row(r++);
  }
  return out;
}

// Best tag sequence over the real positions.
template <class S>
TagSequence decode(const Matrix<S>& z, const EncodedSequence& seq, const ModelParams<S>& p) {
  const Matrix<S> zr = detail::real_rows(z, seq.mask);
  if (zr.rows() == 0) return {};
  const crf::TagPath path =
      p.ablation.no_crf ? crf::softmax_decode(zr) : crf::viterbi(zr, p.transitions).path;
  TagSequence tags(path.size());
  for (std::size_t i = 0; i < path.size(); ++i) tags[i] = static_cast<Tag>(path[i]);
  return tags;
}

}  // namespace mder
