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

#include <cmath>
#include <random>
#include <string>

#include <gtest/gtest.h>

#include "test_support.hpp"

namespace mder {
namespace {

struct Problem {
  ModelParams<double> params;
  EncodedSequence seq;
  TagSequence gold;
};

// Five real characters, optionally followed by padding.
Problem make_problem(const AblationFlags& ablation, std::size_t pad_to, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Problem pr;
  const std::size_t vocab = 6;
  pr.params = init_params<double>(testing::tiny_config(), ablation, vocab, rng);
  // Untie the attention projections and move biases and transitions off
  // zero, away from the ReLU kink.
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (Eigen::Index i = 0; i < pr.params.key.size(); ++i) pr.params.key.data()[i] = u(rng);
  for (Eigen::Index i = 0; i < pr.params.cnn_bias.size(); ++i) {
    pr.params.cnn_bias.data()[i] = 0.1 + 0.2 * (u(rng) + 0.5);
  }
  if (!ablation.no_crf) {
    for (std::size_t a = 0; a < crf::kStates; ++a) {
      for (std::size_t b = 0; b < crf::kStates; ++b) {
        if (std::isfinite(pr.params.transitions(a, b))) pr.params.transitions(a, b) = u(rng);
      }
    }
  }
  const std::size_t m = 5, total = std::max(m, pad_to);
  pr.seq.char_ids.assign(total, 0);
  pr.seq.rule_ids.assign(total, static_cast<std::uint32_t>(RuleTag::PAD));
  pr.seq.mask.assign(total, 0);
  std::uniform_int_distribution<std::uint32_t> ch(1, vocab - 1), rt(0, 5), tg(0, 4);
  for (std::size_t t = 0; t < m; ++t) {
    pr.seq.char_ids[t] = ch(rng);
    pr.seq.rule_ids[t] = rt(rng);
    pr.seq.mask[t] = 1;
    pr.gold.push_back(static_cast<Tag>(tg(rng)));
  }
  return pr;
}

double loss_of(const Problem& pr, const ModelParams<double>& p, double dropout,
               std::uint64_t dropout_seed) {
  std::mt19937_64 rng(dropout_seed);
  Dropout d(dropout, rng);
  const Matrix<double> z = forward<double>(pr.seq, p, nullptr, dropout > 0 ? &d : nullptr);
  return sequence_loss(z, pr.seq, pr.gold, p).loss;
}

ModelParams<double> analytic(const Problem& pr, double dropout, std::uint64_t dropout_seed) {
  std::mt19937_64 rng(dropout_seed);
  Dropout d(dropout, rng);
  ForwardTrace<double> trace;
  const Matrix<double> z = forward(pr.seq, pr.params, &trace, dropout > 0 ? &d : nullptr);
  const auto sl = sequence_loss(z, pr.seq, pr.gold, pr.params);
  ModelParams<double> grad = pr.params.zeros_like();
  backward(trace, sl.d_z, pr.params, grad);
  if (!pr.params.ablation.no_crf) grad.transitions += sl.d_transitions;
  return grad;
}

// Largest entrywise relative error |a - n| / max(|a|, |n|, 1e-6) per tensor.
void expect_gradients_match(const Problem& pr, double dropout = 0.0) {
  const std::uint64_t dseed = 99;
  const ModelParams<double> grad = analytic(pr, dropout, dseed);
  std::vector<const Matrix<double>*> g;
  grad.for_each([&](const std::string&, const Matrix<double>& m) { g.push_back(&m); });
  ModelParams<double> p = pr.params;
  std::size_t k = 0;
  const double h = 1e-3;
  p.for_each([&](const std::string& name, Matrix<double>& m) {
    const Matrix<double>& gm = *g[k++];
    double worst = 0;
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      double& x = m.data()[i];
      if (!std::isfinite(x)) continue;
      const double x0 = x;
      const auto at = [&](double v) {
        x = v;
        return loss_of(pr, p, dropout, dseed);
      };
      // Five-point central stencil, O(h^4).
      const double numeric = (-at(x0 + 2 * h) + 8 * at(x0 + h) - 8 * at(x0 - h) +
                              at(x0 - 2 * h)) / (12 * h);
      x = x0;
      const double a = gm.data()[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
    EXPECT_LT(worst, 1e-4) << name;
  });
}

TEST(GradientTest, FullModelMatchesFiniteDifferences) {
  expect_gradients_match(make_problem({}, 0, 1));
}

TEST(GradientTest, PaddedSequenceMatchesFiniteDifferences) {
  expect_gradients_match(make_problem({}, 8, 2));
}

TEST(GradientTest, DropoutPathMatchesFiniteDifferences) {
  expect_gradients_match(make_problem({}, 0, 3), 0.3);
}

TEST(GradientTest, EveryAblationMatchesFiniteDifferences) {
  for (const char* name : {"rule", "cnn", "attention", "crf"}) {
    SCOPED_TRACE(name);
    AblationFlags a = parse_ablation({name});
    expect_gradients_match(make_problem(a, 0, 4));
  }
}

TEST(GradientTest, WiderKernelsMatchFiniteDifferences) {
  Problem pr = make_problem({}, 7, 5);
  ModelConfig c = testing::tiny_config();
  c.kernel_rows = 3;
  c.kernel_cols = 2;
  c.stride_cols = 1;
  std::mt19937_64 rng(5);
  pr.params = init_params<double>(c, {}, 6, rng);
  pr.params.cnn_bias.setConstant(0.2);
  expect_gradients_match(pr);
}

TEST(GradientTest, PaddingDoesNotChangeLossOrPrediction) {
  const Problem a = make_problem({}, 0, 6);
  Problem b = a;
  for (int i = 0; i < 4; ++i) {
    b.seq.char_ids.push_back(0);
    b.seq.rule_ids.push_back(static_cast<std::uint32_t>(RuleTag::PAD));
    b.seq.mask.push_back(0);
  }
  EXPECT_NEAR(loss_of(a, a.params, 0, 1), loss_of(b, b.params, 0, 1), 1e-12);
  const auto za = forward(a.seq, a.params), zb = forward(b.seq, b.params);
  EXPECT_EQ(decode(za, a.seq, a.params), decode(zb, b.seq, b.params));
}

}  // namespace
}  // namespace mder
