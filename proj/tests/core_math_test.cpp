// Copyright 2026 The c2v Authors.
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
#include <limits>
#include <random>

#include <gtest/gtest.h>

#include "c2v/core_math.hpp"

namespace c2v {
namespace {

TEST(Sigmoid, Examples) {
  EXPECT_EQ(sigmoid(0.0), 0.5);
  EXPECT_NEAR(sigmoid(40.0), 1.0, 1e-15);
  // 1 / (1 + e^2), e^2 = 7.38905609893065.
  EXPECT_NEAR(sigmoid(-2.0), 0.11920292202211755, 1e-15);
  EXPECT_NEAR(sigmoid(-2.0), 0.11920292, 1e-8);
}

TEST(Sigmoid, SymmetryProperty) {
  for (double x = -30.0; x <= 30.0; x += 0.125) {
    EXPECT_NEAR(sigmoid(x) + sigmoid(-x), 1.0, 1e-15) << x;
  }
}

TEST(Sigmoid, ExtremeInputsStayFinite) {
  EXPECT_EQ(sigmoid(-1000.0), 0.0);
  EXPECT_EQ(sigmoid(1000.0), 1.0);
  EXPECT_TRUE(std::isfinite(softplus(1000.0)));
  EXPECT_NEAR(softplus(0.0), std::log(2.0), 1e-15);
}

TEST(InnerProduct, Examples) {
  EXPECT_EQ(inner_product(DenseVector{1, 2}, DenseVector{3, 4}), 11.0);
  EXPECT_EQ(inner_product(DenseVector{1, -2, 7}, DenseVector{0, 0, 0}), 0.0);
  Rng rng(3);
  std::normal_distribution<double> n;
  for (int t = 0; t < 50; ++t) {
    DenseVector u(7);
    for (double& x : u) x = n(rng);
    EXPECT_GE(inner_product(u, u), 0.0);
  }
}

TEST(InnerProduct, DimensionMismatchThrows) {
  EXPECT_THROW(inner_product(DenseVector{1, 2}, DenseVector{1}), DimensionError);
}

TEST(ReluLayerForward, Examples) {
  EXPECT_EQ(relu_layer_forward(DenseMatrix::identity(2), DenseVector{0, 0}, DenseVector{-1, 2}),
            (DenseVector{0, 2}));
  EXPECT_EQ(relu_layer_forward(DenseMatrix(2, 3), DenseVector{-3, 5}, DenseVector{9, -4, 1}),
            (DenseVector{0, 5}));
  DenseMatrix w(1, 2);
  w(0, 0) = 1;
  w(0, 1) = 1;
  EXPECT_EQ(relu_layer_forward(w, DenseVector{0}, DenseVector{2, 3}), DenseVector{5});
}

TEST(ReluLayerForward, OutputsAreNonNegative) {
  Rng rng(11);
  for (int t = 0; t < 20; ++t) {
    const DenseMatrix w = DenseMatrix::gaussian(6, 5, 1.0, rng);
    DenseVector b(6), x(5);
    std::normal_distribution<double> n;
    for (double& v : b) v = n(rng);
    for (double& v : x) v = n(rng);
    for (double y : relu_layer_forward(w, b, x)) EXPECT_GE(y, 0.0);
  }
}

TEST(ReluLayerBackward, DeadUnitsGiveZeroGradients) {
  DenseMatrix w = DenseMatrix::identity(2);
  const auto g = relu_layer_backward(w, DenseVector{-5, -5}, DenseVector{1, 2}, DenseVector{1, 1});
  for (double v : g.weights.values) EXPECT_EQ(v, 0.0);
  for (double v : g.bias) EXPECT_EQ(v, 0.0);
  for (double v : g.input) EXPECT_EQ(v, 0.0);
}

TEST(ReluLayerBackward, IdentityPassesUpstreamThrough) {
  const auto g = relu_layer_backward(DenseMatrix::identity(3), DenseVector{0, 0, 0},
                                     DenseVector{1, 2, 3}, DenseVector{1, 1, 1});
  EXPECT_EQ(g.input, (DenseVector{1, 1, 1}));
}

// f(W, b, x) = <u, relu(Wx + b)> checked against central differences.
TEST(ReluLayerBackward, MatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    std::normal_distribution<double> n;
    const std::size_t rows = 1 + seed % 5, cols = 1 + (seed * 3) % 7;
    DenseMatrix w = DenseMatrix::gaussian(rows, cols, 1.0, rng);
    DenseVector b(rows), x(cols), u(rows);
    for (double& v : b) v = n(rng);
    for (double& v : x) v = n(rng);
    for (double& v : u) v = n(rng);
    const DenseVector pre = affine(w, b, x);
    bool near_kink = false;
    for (double p : pre) near_kink |= std::abs(p) < 1e-3;
    if (near_kink) continue;

    const auto g = relu_layer_backward(w, b, x, u);
    std::vector<double> flat = w.values;
    flat.insert(flat.end(), b.begin(), b.end());
    flat.insert(flat.end(), x.begin(), x.end());
    auto f = [&](std::span<const double> z) {
      DenseMatrix w2(rows, cols);
      std::copy_n(z.begin(), rows * cols, w2.values.begin());
      const DenseVector b2(z.begin() + rows * cols, z.begin() + rows * cols + rows);
      const DenseVector x2(z.begin() + rows * cols + rows, z.end());
      return inner_product(u, relu_layer_forward(w2, b2, x2));
    };
    std::vector<double> analytic = g.weights.values;
    analytic.insert(analytic.end(), g.bias.begin(), g.bias.end());
    analytic.insert(analytic.end(), g.input.begin(), g.input.end());
    EXPECT_LT(gradient_relative_error(analytic, finite_diff_grad(f, flat)), 1e-4) << seed;
  }
}

TEST(Adam, ZeroGradientLeavesParamsAndCountsStep) {
  std::vector<double> p{1.5, -2.0};
  AdamState s = AdamState::for_size(2, 0.1);
  adam_step(p, std::vector<double>{0.0, 0.0}, s);
  EXPECT_EQ(p, (std::vector<double>{1.5, -2.0}));
  EXPECT_EQ(s.step_count, 1u);
}

TEST(Adam, FirstStepClosedForm) {
  std::vector<double> p{0.0};
  AdamState s = AdamState::for_size(1, 0.1);
  adam_step(p, std::vector<double>{4.0}, s);
  // -lr * g / (sqrt(g^2) + eps)
  EXPECT_NEAR(p[0], -0.1 * 4.0 / (4.0 + 1e-8), 1e-12);
  EXPECT_NEAR(p[0], -0.1, 1e-6);
}

TEST(Adam, ConstantGradientStepsDoNotGrow) {
  std::vector<double> p{0.0};
  AdamState s = AdamState::for_size(1, 0.1);
  double prev = p[0];
  double last_change = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 2; ++i) {
    adam_step(p, std::vector<double>{4.0}, s);
    const double change = std::abs(p[0] - prev);
    EXPECT_LE(change, last_change + 1e-15);
    last_change = change;
    prev = p[0];
  }
}

TEST(Adam, DeterministicBitwise) {
  auto run = [] {
    std::vector<double> p{0.3, -0.7, 1.1};
    AdamState s = AdamState::for_size(3, 0.01);
    for (int i = 0; i < 10; ++i) adam_step(p, std::vector<double>{0.5 * i, -1.0, 1e-3}, s);
    return p;
  };
  EXPECT_EQ(run(), run());
}

TEST(FiniteDiff, Examples) {
  auto sq = [](std::span<const double> x) { return x[0] * x[0]; };
  EXPECT_NEAR(finite_diff_grad(sq, std::vector<double>{3.0})[0], 6.0, 1e-6);
  const DenseVector v{0.5, -2.0, 3.0};
  auto lin = [&](std::span<const double> x) { return inner_product(v, x); };
  const auto g = finite_diff_grad(lin, std::vector<double>{1.0, 1.0, 1.0});
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_NEAR(g[i], v[i], 1e-9);
}

TEST(DeriveSeed, DeterministicAndKeySensitive) {
  EXPECT_EQ(derive_seed(1, 2, 3), derive_seed(1, 2, 3));
  EXPECT_NE(derive_seed(1, 2, 3), derive_seed(1, 3, 2));
  EXPECT_NE(derive_seed(1, 2), derive_seed(2, 2));
}

struct Toy {
  DenseMatrix w{2, 2};
  DenseVector b{1.0, 2.0};
  double s = 3.0;
  template <class Self>
  static auto params(Self& self) {
    return std::vector{view("w", self.w), view("b", self.b), view("s", self.s)};
  }
};

TEST(ParamBlocks, FlattenRoundTrip) {
  Toy t;
  t.w(1, 0) = 5.0;
  EXPECT_EQ(param_count(t), 7u);
  const auto flat = flatten(t);
  EXPECT_EQ(flat, (std::vector<double>{0, 0, 5, 0, 1, 2, 3}));
  Toy u = zeros_like(t);
  EXPECT_EQ(flatten(u), std::vector<double>(7, 0.0));
  unflatten(u, flat);
  EXPECT_EQ(flatten(u), flat);
  u.s = std::nan("");
  EXPECT_FALSE(params_finite(u));
}

}  // namespace
}  // namespace c2v
