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

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "mder/error.hpp"
#include "mder/tagscheme.hpp"
#include "mder/tensor.hpp"

// Linear-chain CRF over per-character tag scores.
//
// Z is m x 6 (rows are positions, columns the tags B-M, I-M, B-D, I-D, O,
// PAD). The transition matrix A is 8 x 8 with two virtual states: START
// (row 6) and STOP (column 7). A path y_1..y_m scores
//
//   A[START, y_1] + sum_i Z[i, y_i] + sum_i A[y_i, y_{i+1}] + A[y_m, STOP].
//
// Column START and row STOP are never read; they are kept at -inf.
namespace mder::crf {

inline constexpr std::size_t kStart = kNumTags;
inline constexpr std::size_t kStop = kNumTags + 1;
inline constexpr std::size_t kStates = kNumTags + 2;

using TagPath = std::vector<int>;

template <class S>
Matrix<S> make_transitions() {
  Matrix<S> a = Matrix<S>::Zero(kStates, kStates);
  a.col(kStart).setConstant(-std::numeric_limits<S>::infinity());
  a.row(kStop).setConstant(-std::numeric_limits<S>::infinity());
  return a;
}

namespace detail {

template <class S>
void check_shapes(const Matrix<S>& z, const Matrix<S>& a) {
  if (z.rows() < 1) throw ShapeError("CRF needs at least one position");
  if (static_cast<std::size_t>(z.cols()) != kNumTags) {
    throw ShapeError("CRF emission matrix must have 6 columns");
  }
  if (static_cast<std::size_t>(a.rows()) != kStates ||
      static_cast<std::size_t>(a.cols()) != kStates) {
    throw ShapeError("CRF transition matrix must be 8 x 8");
  }
}

template <class S>
void check_path(const Matrix<S>& z, std::span<const int> y) {
  if (y.size() != static_cast<std::size_t>(z.rows())) {
    throw ShapeError("tag path length " + std::to_string(y.size()) +
                     " != emission rows " + std::to_string(z.rows()));
  }
  for (int t : y) {
    if (t < 0 || t >= static_cast<int>(kNumTags)) {
      throw ShapeError("tag index out of range: " + std::to_string(t));
    }
  }
}

// Forward log-potentials: alpha(i, j) = log-sum over prefixes ending in j.
template <class S>
Matrix<S> forward_table(const Matrix<S>& z, const Matrix<S>& a) {
  const Eigen::Index m = z.rows();
  const Eigen::Index n = kNumTags;
  Matrix<S> alpha(m, n);
  for (Eigen::Index j = 0; j < n; ++j) alpha(0, j) = a(kStart, j) + z(0, j);
  for (Eigen::Index i = 1; i < m; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      S mx = -std::numeric_limits<S>::infinity();
      for (Eigen::Index k = 0; k < n; ++k) mx = std::max(mx, alpha(i - 1, k) + a(k, j));
      S sum = 0;
      for (Eigen::Index k = 0; k < n; ++k) sum += std::exp(alpha(i - 1, k) + a(k, j) - mx);
      alpha(i, j) = z(i, j) + mx + std::log(sum);
    }
  }
  return alpha;
}

// beta(i, j) = log-sum over suffixes after position i given y_i = j.
template <class S>
Matrix<S> backward_table(const Matrix<S>& z, const Matrix<S>& a) {
  const Eigen::Index m = z.rows();
  const Eigen::Index n = kNumTags;
  Matrix<S> beta(m, n);
  for (Eigen::Index j = 0; j < n; ++j) beta(m - 1, j) = a(j, kStop);
  for (Eigen::Index i = m - 2; i >= 0; --i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      S mx = -std::numeric_limits<S>::infinity();
      for (Eigen::Index k = 0; k < n; ++k) {
        mx = std::max(mx, a(j, k) + z(i + 1, k) + beta(i + 1, k));
      }
      S sum = 0;
      for (Eigen::Index k = 0; k < n; ++k) {
        sum += std::exp(a(j, k) + z(i + 1, k) + beta(i + 1, k) - mx);
      }
      beta(i, j) = mx + std::log(sum);
    }
  }
  return beta;
}

template <class S>
S final_log_sum(const Matrix<S>& alpha, const Matrix<S>& a) {
  const Eigen::Index last = alpha.rows() - 1;
  S mx = -std::numeric_limits<S>::infinity();
  for (std::size_t j = 0; j < kNumTags; ++j) mx = std::max(mx, alpha(last, j) + a(j, kStop));
  S sum = 0;
  for (std::size_t j = 0; j < kNumTags; ++j) sum += std::exp(alpha(last, j) + a(j, kStop) - mx);
  return mx + std::log(sum);
}

}  // namespace detail

// Accumulation order matches viterbi() so the two agree bit for bit.
template <class S>
S path_score(const Matrix<S>& z, std::span<const int> y, const Matrix<S>& a) {
  detail::check_shapes(z, a);
  detail::check_path(z, y);
  S s = a(kStart, y[0]) + z(0, y[0]);
  for (std::size_t i = 1; i < y.size(); ++i) {
    s = (s + a(y[i - 1], y[i])) + z(static_cast<Eigen::Index>(i), y[i]);
  }
  return s + a(y.back(), kStop);
}

template <class S>
S log_partition(const Matrix<S>& z, const Matrix<S>& a) {
  detail::check_shapes(z, a);
  return detail::final_log_sum(detail::forward_table(z, a), a);
}

template <class S>
S nll_loss(const Matrix<S>& z, std::span<const int> gold, const Matrix<S>& a) {
  return log_partition(z, a) - path_score(z, gold, a);
}

template <class S>
struct NllGradient {
  S loss = 0;
  Matrix<S> d_emissions;    // m x 6
  Matrix<S> d_transitions;  // 8 x 8, zero where A is fixed
};

// Loss and its gradient from forward-backward marginals.
template <class S>
NllGradient<S> nll_loss_with_gradient(const Matrix<S>& z,
                                      std::span<const int> gold,
                                      const Matrix<S>& a) {
  detail::check_shapes(z, a);
  detail::check_path(z, gold);
  const Eigen::Index m = z.rows();
  const Eigen::Index n = kNumTags;
  const Matrix<S> alpha = detail::forward_table(z, a);
  const Matrix<S> beta = detail::backward_table(z, a);
  const S log_z = detail::final_log_sum(alpha, a);

  NllGradient<S> g;
  g.loss = log_z - path_score(z, gold, a);
  g.d_emissions = (alpha + beta).array() - log_z;
  g.d_emissions = g.d_emissions.array().exp();
  g.d_transitions = Matrix<S>::Zero(kStates, kStates);
  for (Eigen::Index j = 0; j < n; ++j) {
    g.d_transitions(kStart, j) = g.d_emissions(0, j);
    g.d_transitions(j, kStop) = g.d_emissions(m - 1, j);
  }
  for (Eigen::Index i = 1; i < m; ++i) {
    for (Eigen::Index k = 0; k < n; ++k) {
      for (Eigen::Index j = 0; j < n; ++j) {
        g.d_transitions(k, j) +=
            std::exp(alpha(i - 1, k) + a(k, j) + z(i, j) + beta(i, j) - log_z);
      }
    }
  }
  for (Eigen::Index i = 0; i < m; ++i) g.d_emissions(i, gold[i]) -= S(1);
  g.d_transitions(kStart, gold.front()) -= S(1);
  g.d_transitions(gold.back(), kStop) -= S(1);
  for (Eigen::Index i = 1; i < m; ++i) g.d_transitions(gold[i - 1], gold[i]) -= S(1);
  return g;
}

template <class S>
struct Decoded {
  TagPath path;
  S score = 0;
};

// Ties resolve to the lowest tag index at every backtracking step.
template <class S>
Decoded<S> viterbi(const Matrix<S>& z, const Matrix<S>& a) {
  detail::check_shapes(z, a);
  const Eigen::Index m = z.rows();
  const Eigen::Index n = kNumTags;
  Matrix<S> delta(m, n);
  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic> back(m, n);
  for (Eigen::Index j = 0; j < n; ++j) delta(0, j) = a(kStart, j) + z(0, j);
  for (Eigen::Index i = 1; i < m; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      int best = 0;
      S best_v = delta(i - 1, 0) + a(0, j);
      for (Eigen::Index k = 1; k < n; ++k) {
        const S v = delta(i - 1, k) + a(k, j);
        if (v > best_v) {
          best_v = v;
          best = static_cast<int>(k);
        }
      }
      delta(i, j) = best_v + z(i, j);
      back(i, j) = best;
    }
  }
  int last = 0;
  S best_v = delta(m - 1, 0) + a(0, kStop);
  for (Eigen::Index j = 1; j < n; ++j) {
    const S v = delta(m - 1, j) + a(j, kStop);
    if (v > best_v) {
      best_v = v;
      last = static_cast<int>(j);
    }
  }
  Decoded<S> out;
  out.score = best_v;
  out.path.resize(static_cast<std::size_t>(m));
  out.path.back() = last;
  for (Eigen::Index i = m - 1; i > 0; --i) {
    out.path[i - 1] = back(i, out.path[i]);
  }
  return out;
}

// Per-position argmax, used when the CRF layer is ablated.
template <class S>
TagPath softmax_decode(const Matrix<S>& z) {
  if (z.rows() < 1) throw ShapeError("softmax_decode needs at least one position");
  TagPath y(static_cast<std::size_t>(z.rows()));
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < z.cols(); ++j) {
      if (z(i, j) > z(i, best)) best = j;
    }
    y[i] = static_cast<int>(best);
  }
  return y;
}

// Sum of per-position softmax cross entropies, and its gradient.
template <class S>
NllGradient<S> softmax_loss_with_gradient(const Matrix<S>& z,
                                          std::span<const int> gold) {
  detail::check_path(z, gold);
  NllGradient<S> g;
  g.d_emissions.resize(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    const S mx = z.row(i).maxCoeff();
    const auto e = (z.row(i).array() - mx).exp();
    const S sum = e.sum();
    g.loss += mx + std::log(sum) - z(i, gold[i]);
    g.d_emissions.row(i) = e / sum;
    g.d_emissions(i, gold[i]) -= S(1);
  }
  return g;
}

template <class S>
struct BruteForce {
  TagPath best_path;
  S best_score = 0;
  S log_partition = 0;
};

// Exhaustive enumeration of all 6^m paths (test oracle). The first path in
// lexicographic order wins exact ties.
template <class S>
BruteForce<S> brute_force(const Matrix<S>& z, const Matrix<S>& a,
                          std::size_t max_paths = 1000000) {
  detail::check_shapes(z, a);
  const std::size_t m = static_cast<std::size_t>(z.rows());
  std::size_t total = 1;
  for (std::size_t i = 0; i < m; ++i) {
    total *= kNumTags;
    if (total > max_paths) {
      throw OracleSizeError("6^" + std::to_string(m) +
                            " paths exceed the enumeration limit");
    }
  }
  std::vector<S> scores(total);
  TagPath y(m, 0);
  BruteForce<S> out;
  out.best_score = -std::numeric_limits<S>::infinity();
  for (std::size_t p = 0; p < total; ++p) {
    std::size_t code = p;
    for (std::size_t i = m; i-- > 0;) {
      y[i] = static_cast<int>(code % kNumTags);
      code /= kNumTags;
    }
    scores[p] = path_score(z, std::span<const int>(y), a);
    if (scores[p] > out.best_score) {
      out.best_score = scores[p];
      out.best_path = y;
    }
  }
  S sum = 0;
  for (S s : scores) sum += std::exp(s - out.best_score);
  out.log_partition = out.best_score + std::log(sum);
  return out;
}

}  // namespace mder::crf
