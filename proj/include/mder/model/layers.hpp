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
#include <limits>
#include <span>
#include <vector>

#include "mder/error.hpp"
#include "mder/model/params.hpp"
#include "mder/model/vocab.hpp"
#include "mder/tensor.hpp"

// Forward and backward passes of the individual network components.
// Sequences are m x d matrices with one row per character position.
// Backward functions accumulate parameter gradients into `grad` and return
// the gradient with respect to their input.
namespace mder::layers {

using Mask = std::span<const std::uint8_t>;

// ---------------------------------------------------------------------------
// Embedding: x'_t = [e^r(rule_t); e^c(char_t)]

template <class S>
Matrix<S> embed(const EncodedSequence& seq, const ModelParams<S>& p) {
  const auto m = static_cast<Eigen::Index>(seq.size());
  const bool rule = !p.ablation.no_rule;
  const Eigen::Index dr = rule ? p.rule_embedding.cols() : 0;
  const Eigen::Index dc = p.char_embedding.cols();
  Matrix<S> x(m, dr + dc);
  for (Eigen::Index t = 0; t < m; ++t) {
    const auto cid = static_cast<Eigen::Index>(seq.char_ids[t]);
    if (cid >= p.char_embedding.rows()) {
      throw VocabularyError("character id " + std::to_string(cid) +
                            " outside the embedding table");
    }
    if (rule) {
      const auto rid = static_cast<Eigen::Index>(seq.rule_ids[t]);
      if (rid >= p.rule_embedding.rows()) {
        throw VocabularyError("rule id " + std::to_string(rid) +
                              " outside the embedding table");
      }
      x.row(t).head(dr) = p.rule_embedding.row(rid);
    }
    x.row(t).tail(dc) = p.char_embedding.row(cid);
  }
  return x;
}

// PAD rows of both tables never receive gradient.
template <class S>
void embed_backward(const EncodedSequence& seq, const Matrix<S>& dx,
                    ModelParams<S>& grad) {
  const bool rule = !grad.ablation.no_rule;
  const Eigen::Index dr = rule ? grad.rule_embedding.cols() : 0;
  const Eigen::Index dc = grad.char_embedding.cols();
  for (std::size_t t = 0; t < seq.size(); ++t) {
    if (!seq.mask[t]) continue;
    const auto row = static_cast<Eigen::Index>(t);
    if (rule && seq.rule_ids[t] != kPadRule) {
      grad.rule_embedding.row(seq.rule_ids[t]) += dx.row(row).head(dr);
    }
    if (seq.char_ids[t] != kPadChar) {
      grad.char_embedding.row(seq.char_ids[t]) += dx.row(row).tail(dc);
    }
  }
}

// ---------------------------------------------------------------------------
// One LSTM direction.
//   i = s(W_i[h;x]+b_i)  f = s(W_f[h;x]+b_f)  o = s(W_o[h;x]+b_o)
//   c~ = tanh(W_c[h;x]+b_c)  c = f*c_prev + i*c~  h = o*tanh(c)
// At masked positions the state is carried through unchanged and the
// output row is zero.

template <class S>
struct LstmTrace {
  Matrix<S> input;      // m x d_in
  Matrix<S> gates;      // 4d_h x m activations (i, f, o, c~), one column per step
  Matrix<S> cell_tanh;  // d_h x m
  Matrix<S> h_prev;     // d_h x m, state entering each step
  Matrix<S> c_prev;     // d_h x m
  std::vector<std::uint8_t> mask;
  bool reverse = false;
};

template <class S>
Matrix<S> lstm_forward(const Matrix<S>& x, const LstmWeights<S>& w, Mask mask,
                       bool reverse, LstmTrace<S>* trace = nullptr) {
  const Eigen::Index m = x.rows();
  const Eigen::Index dh = w.b.rows() / 4;
  const Eigen::Index din = x.cols();
  if (w.w.cols() != dh + din) throw ShapeError("LSTM input width mismatch");
  Matrix<S> pre = w.w.rightCols(din) * x.transpose();  // 4d_h x m
  pre.colwise() += w.b.col(0);
  Vector<S> h = Vector<S>::Zero(dh);
  Vector<S> c = Vector<S>::Zero(dh);
  Vector<S> a(4 * dh);
  Vector<S> tc(dh);
  Matrix<S> out = Matrix<S>::Zero(dh, m);
  if (trace) {
    trace->input = x;
    trace->gates = Matrix<S>::Zero(4 * dh, m);
    trace->cell_tanh = Matrix<S>::Zero(dh, m);
    trace->h_prev = Matrix<S>::Zero(dh, m);
    trace->c_prev = Matrix<S>::Zero(dh, m);
    trace->mask.assign(mask.begin(), mask.end());
    trace->reverse = reverse;
  }
  for (Eigen::Index s = 0; s < m; ++s) {
    const Eigen::Index t = reverse ? m - 1 - s : s;
    if (!mask[t]) continue;
    if (trace) {
      trace->h_prev.col(t) = h;
      trace->c_prev.col(t) = c;
    }
    a = pre.col(t);
    a.noalias() += w.w.leftCols(dh) * h;
    a.head(3 * dh) = (S(1) + (-a.head(3 * dh).array()).exp()).inverse();
    a.tail(dh) = a.tail(dh).array().tanh();
    c = a.segment(dh, dh).cwiseProduct(c) + a.head(dh).cwiseProduct(a.tail(dh));
    tc = c.array().tanh();
    h = a.segment(2 * dh, dh).cwiseProduct(tc);
    out.col(t) = h;
    if (trace) {
      trace->gates.col(t) = a;
      trace->cell_tanh.col(t) = tc;
    }
  }
  return out.transpose();
}

template <class S>
Matrix<S> lstm_backward(const LstmTrace<S>& tr, const Matrix<S>& d_out,
                        const LstmWeights<S>& w, LstmWeights<S>& grad) {
  const Eigen::Index m = tr.input.rows();
  const Eigen::Index din = tr.input.cols();
  const Eigen::Index dh = w.b.rows() / 4;
  const Matrix<S> d_out_t = d_out.transpose();  // d_h x m
  Matrix<S> da = Matrix<S>::Zero(4 * dh, m);
  Vector<S> dh_next = Vector<S>::Zero(dh);
  Vector<S> dc_next = Vector<S>::Zero(dh);
  Vector<S> dhv(dh), dc(dh);
  for (Eigen::Index s = m - 1; s >= 0; --s) {
    const Eigen::Index t = tr.reverse ? m - 1 - s : s;
    if (!tr.mask[t]) continue;
    const auto gates = tr.gates.col(t).array();
    const auto i = gates.head(dh);
    const auto f = gates.segment(dh, dh);
    const auto o = gates.segment(2 * dh, dh);
    const auto g = gates.tail(dh);
    const auto tc = tr.cell_tanh.col(t).array();
    dhv = d_out_t.col(t) + dh_next;
    dc = dc_next.array() + dhv.array() * o * (S(1) - tc * tc);
    auto dat = da.col(t);
    dat.head(dh) = dc.array() * g * i * (S(1) - i);
    dat.segment(dh, dh) = dc.array() * tr.c_prev.col(t).array() * f * (S(1) - f);
    dat.segment(2 * dh, dh) = dhv.array() * tc * o * (S(1) - o);
    dat.tail(dh) = dc.array() * i * (S(1) - g * g);
    dc_next = dc.array() * f;
    dh_next.noalias() = w.w.leftCols(dh).transpose() * dat;
  }
  grad.w.leftCols(dh).noalias() += da * tr.h_prev.transpose();
  grad.w.rightCols(din).noalias() += da * tr.input;
  grad.b += da.rowwise().sum();
  return da.transpose() * w.w.rightCols(din);
}

// ---------------------------------------------------------------------------
// Stacked bidirectional LSTM; layer l output is [fwd_t; bwd_t].

template <class S>
struct BilstmTrace {
  std::vector<std::array<LstmTrace<S>, 2>> layers;
};

template <class S>
Matrix<S> bilstm_forward(const Matrix<S>& x, const ModelParams<S>& p, Mask mask,
                         BilstmTrace<S>* trace = nullptr) {
  if (trace) trace->layers.assign(p.lstm.size(), {});
  Matrix<S> in = x;
  for (std::size_t l = 0; l < p.lstm.size(); ++l) {
    const Matrix<S> fwd = lstm_forward(in, p.lstm[l][0], mask, false,
                                       trace ? &trace->layers[l][0] : nullptr);
    const Matrix<S> bwd = lstm_forward(in, p.lstm[l][1], mask, true,
                                       trace ? &trace->layers[l][1] : nullptr);
    Matrix<S> out(in.rows(), fwd.cols() + bwd.cols());
    out << fwd, bwd;
    in = std::move(out);
  }
  return in;
}

template <class S>
Matrix<S> bilstm_backward(const BilstmTrace<S>& tr, const Matrix<S>& d_out,
                          const ModelParams<S>& p, ModelParams<S>& grad) {
  Matrix<S> d = d_out;
  const Eigen::Index dh = static_cast<Eigen::Index>(p.config.hidden_dim);
  for (std::size_t l = p.lstm.size(); l-- > 0;) {
    const Matrix<S> d_fwd = d.leftCols(dh);
    const Matrix<S> d_bwd = d.rightCols(dh);
    Matrix<S> dx = lstm_backward(tr.layers[l][0], d_fwd, p.lstm[l][0], grad.lstm[l][0]);
    dx += lstm_backward(tr.layers[l][1], d_bwd, p.lstm[l][1], grad.lstm[l][1]);
    d = std::move(dx);
  }
  return d;
}

// ---------------------------------------------------------------------------
// Convolution over the m x F input. Kernel i (p x q, position stride 1,
// feature stride t) produces a map M^i of shape m x W; after ReLU each
// position keeps the maximum over the feature axis, so h'_t[i] =
// max_j relu(M^i[t, j]). Rows outside the sequence and padding rows read
// as zero.

template <class S>
struct CnnTrace {
  Matrix<S> input;
  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic> argmax;  // -1: inactive
  std::vector<std::uint8_t> mask;
};

template <class S>
Matrix<S> cnn_forward(const Matrix<S>& x, const ModelParams<S>& p, Mask mask,
                      CnnTrace<S>* trace = nullptr) {
  const ModelConfig& c = p.config;
  const Eigen::Index m = x.rows();
  const Eigen::Index k = p.cnn_kernels.rows();
  const auto rows = static_cast<Eigen::Index>(c.kernel_rows);
  const auto cols = static_cast<Eigen::Index>(c.kernel_cols);
  const auto stride = static_cast<Eigen::Index>(c.stride_cols);
  const Eigen::Index half = rows / 2;
  if (x.cols() < cols) throw ConfigError("feature dimension smaller than kernel");
  const Eigen::Index width = (x.cols() - cols) / stride + 1;
  Matrix<S> out = Matrix<S>::Zero(m, k);
  if (trace) {
    trace->input = x;
    trace->argmax.setConstant(m, k, -1);
    trace->mask.assign(mask.begin(), mask.end());
  }
  for (Eigen::Index t = 0; t < m; ++t) {
    if (!mask[t]) continue;
    for (Eigen::Index i = 0; i < k; ++i) {
      S best = -std::numeric_limits<S>::infinity();
      int best_j = -1;
      for (Eigen::Index j = 0; j < width; ++j) {
        S v = p.cnn_bias(i, 0);
        for (Eigen::Index a = 0; a < rows; ++a) {
          const Eigen::Index r = t + a - half;
          if (r < 0 || r >= m || !mask[r]) continue;
          for (Eigen::Index b = 0; b < cols; ++b) {
            v += p.cnn_kernels(i, a * cols + b) * x(r, j * stride + b);
          }
        }
        if (v > best) {
          best = v;
          best_j = static_cast<int>(j);
        }
      }
      if (best > S(0)) {
        out(t, i) = best;
        if (trace) trace->argmax(t, i) = best_j;
      }
    }
  }
  return out;
}

template <class S>
Matrix<S> cnn_backward(const CnnTrace<S>& tr, const Matrix<S>& d_out,
                       const ModelParams<S>& p, ModelParams<S>& grad) {
  const ModelConfig& c = p.config;
  const Matrix<S>& x = tr.input;
  const Eigen::Index m = x.rows();
  const auto rows = static_cast<Eigen::Index>(c.kernel_rows);
  const auto cols = static_cast<Eigen::Index>(c.kernel_cols);
  const auto stride = static_cast<Eigen::Index>(c.stride_cols);
  const Eigen::Index half = rows / 2;
  Matrix<S> dx = Matrix<S>::Zero(m, x.cols());
  for (Eigen::Index t = 0; t < m; ++t) {
    for (Eigen::Index i = 0; i < tr.argmax.cols(); ++i) {
      const int j = tr.argmax(t, i);
      if (j < 0) continue;
      const S dv = d_out(t, i);
      grad.cnn_bias(i, 0) += dv;
      for (Eigen::Index a = 0; a < rows; ++a) {
        const Eigen::Index r = t + a - half;
        if (r < 0 || r >= m || !tr.mask[r]) continue;
        for (Eigen::Index b = 0; b < cols; ++b) {
          const Eigen::Index col = j * stride + b;
          grad.cnn_kernels(i, a * cols + b) += dv * x(r, col);
          dx(r, col) += dv * p.cnn_kernels(i, a * cols + b);
        }
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// Self-attention without value projection or score scaling:
//   Q = G W^Q, K = G W^K, alpha = softmax_rows(Q K^T), H^a = alpha G.
// Padding columns are excluded from every softmax row; padding rows of the
// output are zero.

template <class S>
struct AttentionTrace {
  Matrix<S> g, q, k, alpha;
  std::vector<std::uint8_t> mask;
};

template <class S>
Matrix<S> attention_weights(const Matrix<S>& q, const Matrix<S>& k, Mask mask) {
  Matrix<S> alpha = q * k.transpose();
  const Eigen::Index m = alpha.rows();
  for (Eigen::Index i = 0; i < m; ++i) {
    S mx = -std::numeric_limits<S>::infinity();
    for (Eigen::Index j = 0; j < m; ++j) {
      if (mask[j]) mx = std::max(mx, alpha(i, j));
    }
    S sum = 0;
    for (Eigen::Index j = 0; j < m; ++j) {
      alpha(i, j) = mask[j] ? std::exp(alpha(i, j) - mx) : S(0);
      sum += alpha(i, j);
    }
    alpha.row(i) /= sum;
  }
  return alpha;
}

template <class S>
Matrix<S> attention_forward(const Matrix<S>& g, Mask mask, const ModelParams<S>& p,
                            AttentionTrace<S>* trace = nullptr) {
  Matrix<S> q = g * p.query;
  Matrix<S> k = g * p.key;
  Matrix<S> alpha = attention_weights(q, k, mask);
  Matrix<S> out = alpha * g;
  for (Eigen::Index t = 0; t < out.rows(); ++t) {
    if (!mask[t]) out.row(t).setZero();
  }
  if (trace) {
    trace->g = g;
    trace->q = std::move(q);
    trace->k = std::move(k);
    trace->alpha = std::move(alpha);
    trace->mask.assign(mask.begin(), mask.end());
  }
  return out;
}

template <class S>
Matrix<S> attention_backward(const AttentionTrace<S>& tr, const Matrix<S>& d_out,
                             const ModelParams<S>& p, ModelParams<S>& grad) {
  Matrix<S> dh = d_out;
  for (Eigen::Index t = 0; t < dh.rows(); ++t) {
    if (!tr.mask[t]) dh.row(t).setZero();
  }
  const Matrix<S> d_alpha = dh * tr.g.transpose();
  const Vector<S> row_dot = (d_alpha.array() * tr.alpha.array()).rowwise().sum();
  const Matrix<S> d_scores =
      (tr.alpha.array() * (d_alpha.colwise() - row_dot).array()).matrix();
  const Matrix<S> dq = d_scores * tr.k;
  const Matrix<S> dk = d_scores.transpose() * tr.q;
  grad.query.noalias() += tr.g.transpose() * dq;
  grad.key.noalias() += tr.g.transpose() * dk;
  Matrix<S> dg = tr.alpha.transpose() * dh;
  dg.noalias() += dq * p.query.transpose();
  dg.noalias() += dk * p.key.transpose();
  return dg;
}

// ---------------------------------------------------------------------------
// Linear projection into tag space: Z = H^a W^a + b^a.

template <class S>
Matrix<S> project(const Matrix<S>& h, const ModelParams<S>& p) {
  Matrix<S> z = h * p.proj_weight;
  z.rowwise() += p.proj_bias.col(0).transpose();
  return z;
}

template <class S>
Matrix<S> project_backward(const Matrix<S>& h, const Matrix<S>& dz,
                           const ModelParams<S>& p, ModelParams<S>& grad) {
  grad.proj_weight.noalias() += h.transpose() * dz;
  grad.proj_bias += dz.colwise().sum().transpose();
  return dz * p.proj_weight.transpose();
}

}  // namespace mder::layers
