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
#include <string>
#include <vector>

#include "mder/model/params.hpp"

namespace mder {

struct AdamOptions {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam with bias correction over every tensor of a ModelParams.
template <class S>
class Adam {
 public:
  Adam(const ModelParams<S>& like, AdamOptions options)
      : options_(options), m_(like.zeros_like()), v_(like.zeros_like()) {}

  void step(ModelParams<S>& params, ModelParams<S>& grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(options_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(options_.beta2, static_cast<double>(t_));
    const S lr = static_cast<S>(options_.learning_rate * std::sqrt(c2) / c1);
    const S b1 = static_cast<S>(options_.beta1);
    const S b2 = static_cast<S>(options_.beta2);
    const S eps = static_cast<S>(options_.epsilon * std::sqrt(c2));
    std::vector<Matrix<S>*> ps, gs, ms, vs;
    params.for_each([&](const std::string&, Matrix<S>& x) { ps.push_back(&x); });
    grad.for_each([&](const std::string&, Matrix<S>& x) { gs.push_back(&x); });
    m_.for_each([&](const std::string&, Matrix<S>& x) { ms.push_back(&x); });
    v_.for_each([&](const std::string&, Matrix<S>& x) { vs.push_back(&x); });
    for (std::size_t k = 0; k < ps.size(); ++k) {
      auto p = ps[k]->array();
      const auto g = gs[k]->array();
      auto m = ms[k]->array();
      auto v = vs[k]->array();
      m = b1 * m + (S(1) - b1) * g;
      v = b2 * v + (S(1) - b2) * g * g;
      // Entries with no gradient history (fixed CRF entries, PAD rows) stay put.
      p -= (v > S(0)).select(lr * m / (v.sqrt() + eps), S(0));
    }
  }

  std::uint64_t steps() const { return t_; }

 private:
  AdamOptions options_;
  ModelParams<S> m_, v_;
  std::uint64_t t_ = 0;
};

// L2 norm over all gradient tensors.
template <class S>
double global_norm(const ModelParams<S>& grad) {
  double sum = 0;
  grad.for_each([&](const std::string&, const Matrix<S>& g) {
    sum += static_cast<double>(g.squaredNorm());
  });
  return std::sqrt(sum);
}

// Rescales the gradient so its global norm is at most `max_norm`.
template <class S>
double clip_global_norm(ModelParams<S>& grad, double max_norm) {
  const double norm = global_norm(grad);
  if (norm > max_norm && norm > 0) {
    const S scale = static_cast<S>(max_norm / norm);
    grad.for_each([&](const std::string&, Matrix<S>& g) { g *= scale; });
  }
  return norm;
}

}  // namespace mder
