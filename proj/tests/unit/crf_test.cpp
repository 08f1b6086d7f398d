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

#include <gtest/gtest.h>

#include "mder/crf.hpp"
#include "mder/error.hpp"

namespace mder::crf {
namespace {

struct Instance {
  Matrix<double> z;
  Matrix<double> a;
};

Instance random_instance(std::mt19937_64& rng, int m) {
  std::normal_distribution<double> n(0.0, 1.5);
  Instance in{Matrix<double>(m, kNumTags), make_transitions<double>()};
  for (Eigen::Index i = 0; i < in.z.size(); ++i) in.z.data()[i] = n(rng);
  for (std::size_t r = 0; r < kStates; ++r) {
    for (std::size_t c = 0; c < kStates; ++c) {
      if (std::isfinite(in.a(r, c))) in.a(r, c) = n(rng);
    }
  }
  return in;
}

TEST(CrfTest, FixedTransitionsAreMinusInfinity) {
  const auto a = make_transitions<double>();
  for (std::size_t j = 0; j < kStates; ++j) {
    EXPECT_TRUE(std::isinf(a(j, kStart)) && a(j, kStart) < 0);
    EXPECT_TRUE(std::isinf(a(kStop, j)) && a(kStop, j) < 0);
  }
  EXPECT_EQ(a(kStart, 0), 0.0);
  EXPECT_EQ(a(3, kStop), 0.0);
}

TEST(CrfTest, SingleCharacterScoreIsStartEmissionStop) {
  Matrix<double> z = Matrix<double>::Zero(1, kNumTags);
  z(0, 2) = 1.5;
  Matrix<double> a = make_transitions<double>();
  a(kStart, 2) = 0.25;
  a(2, kStop) = -0.5;
  const std::vector<int> y = {2};
  EXPECT_DOUBLE_EQ(path_score(z, std::span<const int>(y), a), 1.25);
}

TEST(CrfTest, ViterbiAndPartitionMatchEnumeration) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 60; ++trial) {
    const Instance in = random_instance(rng, 1 + trial % 5);
    const auto bf = brute_force(in.z, in.a);
    const auto v = viterbi(in.z, in.a);
    EXPECT_EQ(v.path, bf.best_path);
    EXPECT_NEAR(v.score, bf.best_score, 1e-10);
    EXPECT_NEAR(log_partition(in.z, in.a), bf.log_partition, 1e-10);
  }
}

TEST(CrfTest, ProbabilitiesSumToOne) {
  std::mt19937_64 rng(12);
  const Instance in = random_instance(rng, 4);
  const double log_z = log_partition(in.z, in.a);
  double total = 0;
  std::vector<int> y(4);
  for (int code = 0; code < 6 * 6 * 6 * 6; ++code) {
    int c = code;
    for (int i = 3; i >= 0; --i) {
      y[i] = c % 6;
      c /= 6;
    }
    total += std::exp(path_score(in.z, std::span<const int>(y), in.a) - log_z);
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(CrfTest, TiesResolveToLowestIndex) {
  const Matrix<double> z = Matrix<double>::Zero(3, kNumTags);
  const auto v = viterbi(z, make_transitions<double>());
  EXPECT_EQ(v.path, (TagPath{0, 0, 0}));
  EXPECT_EQ(brute_force(z, make_transitions<double>()).best_path, v.path);
}

TEST(CrfTest, NllIsNonNegativeAndZeroForCertainPath) {
  std::mt19937_64 rng(13);
  const Instance in = random_instance(rng, 3);
  const std::vector<int> y = {1, 4, 0};
  EXPECT_GE(nll_loss(in.z, std::span<const int>(y), in.a), 0.0);
  Matrix<double> z = Matrix<double>::Constant(3, kNumTags, -200.0);
  for (int i = 0; i < 3; ++i) z(i, y[i]) = 200.0;
  EXPECT_NEAR(nll_loss(z, std::span<const int>(y), make_transitions<double>()), 0.0, 1e-12);
}

TEST(CrfTest, NllGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(14);
  Instance in = random_instance(rng, 4);
  const std::vector<int> y = {0, 1, 4, 2};
  const std::span<const int> ys(y);
  const auto g = nll_loss_with_gradient(in.z, ys, in.a);
  EXPECT_NEAR(g.loss, nll_loss(in.z, ys, in.a), 1e-12);
  const double h = 1e-5;
  for (Eigen::Index i = 0; i < in.z.size(); ++i) {
    const double x0 = in.z.data()[i];
    in.z.data()[i] = x0 + h;
    const double up = nll_loss(in.z, ys, in.a);
    in.z.data()[i] = x0 - h;
    const double down = nll_loss(in.z, ys, in.a);
    in.z.data()[i] = x0;
    EXPECT_NEAR(g.d_emissions.data()[i], (up - down) / (2 * h), 1e-7);
  }
  for (Eigen::Index i = 0; i < in.a.size(); ++i) {
    const double x0 = in.a.data()[i];
    if (!std::isfinite(x0)) {
      EXPECT_EQ(g.d_transitions.data()[i], 0.0);
      continue;
    }
    in.a.data()[i] = x0 + h;
    const double up = nll_loss(in.z, ys, in.a);
    in.a.data()[i] = x0 - h;
    const double down = nll_loss(in.z, ys, in.a);
    in.a.data()[i] = x0;
    EXPECT_NEAR(g.d_transitions.data()[i], (up - down) / (2 * h), 1e-7);
  }
}

TEST(CrfTest, EmissionGradientRowsSumToZero) {
  std::mt19937_64 rng(15);
  const Instance in = random_instance(rng, 5);
  const std::vector<int> y = {0, 1, 1, 4, 5};
  const auto g = nll_loss_with_gradient(in.z, std::span<const int>(y), in.a);
  for (Eigen::Index i = 0; i < g.d_emissions.rows(); ++i) {
    EXPECT_NEAR(g.d_emissions.row(i).sum(), 0.0, 1e-12);
  }
}

TEST(CrfTest, SoftmaxLossGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(16);
  Instance in = random_instance(rng, 3);
  const std::vector<int> y = {2, 3, 4};
  const std::span<const int> ys(y);
  const auto g = softmax_loss_with_gradient(in.z, ys);
  const double h = 1e-5;
  for (Eigen::Index i = 0; i < in.z.size(); ++i) {
    const double x0 = in.z.data()[i];
    in.z.data()[i] = x0 + h;
    const double up = softmax_loss_with_gradient(in.z, ys).loss;
    in.z.data()[i] = x0 - h;
    const double down = softmax_loss_with_gradient(in.z, ys).loss;
    in.z.data()[i] = x0;
    EXPECT_NEAR(g.d_emissions.data()[i], (up - down) / (2 * h), 1e-7);
  }
}

TEST(CrfTest, SoftmaxDecodeIsRowArgmax) {
  Matrix<double> z = Matrix<double>::Zero(2, kNumTags);
  z(0, 3) = 1;
  z(1, 5) = 2;
  EXPECT_EQ(softmax_decode(z), (TagPath{3, 5}));
}

TEST(CrfTest, RejectsBadShapesAndOversizedOracle) {
  const Matrix<double> z = Matrix<double>::Zero(3, 5);
  EXPECT_THROW(viterbi(z, make_transitions<double>()), ShapeError);
  const Matrix<double> big = Matrix<double>::Zero(9, kNumTags);
  EXPECT_THROW(brute_force(big, make_transitions<double>()), OracleSizeError);
  const Matrix<double> ok = Matrix<double>::Zero(2, kNumTags);
  const std::vector<int> bad = {0, 7};
  EXPECT_THROW(nll_loss(ok, std::span<const int>(bad), make_transitions<double>()),
               ShapeError);
}

}  // namespace
}  // namespace mder::crf
