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

// Skip-gram with negative sampling: the shared objective behind the word
// embedding trainer and the co-purchase product embeddings.

#pragma once

#include <cstdint>
#include <vector>

#include "c2v/core_math.hpp"

namespace c2v {

// Input ("center") and output ("context") vectors, one row per symbol.
struct SkipGramTables {
  DenseMatrix in;
  DenseMatrix out;

  template <class Self>
  static auto params(Self& self) {
    return std::vector{view("in", self.in), view("out", self.out)};
  }

  bool operator==(const SkipGramTables&) const = default;
};

struct SkipGramExample {
  std::uint32_t center = 0;
  std::uint32_t target = 0;
  std::vector<std::uint32_t> negatives;
  double weight = 1.0;
};

// weight * -(log sigmoid(<in_c, out_t>) + sum_n log sigmoid(-<in_c, out_n>)).
// When `grad` is non-null the gradient is added into it.
inline double skipgram_loss_and_grad(const SkipGramTables& t, const SkipGramExample& ex,
                                     SkipGramTables* grad) {
  const auto center = t.in.row(ex.center);
  double loss = 0.0;
  auto term = [&](std::uint32_t row, bool positive) {
    const auto o = t.out.row(row);
    const double z = inner_product(center, o);
    loss += ex.weight * (positive ? softplus(-z) : softplus(z));
    if (grad == nullptr) return;
    const double dz = ex.weight * (positive ? sigmoid(z) - 1.0 : sigmoid(z));
    auto gc = grad->in.row(ex.center);
    auto go = grad->out.row(row);
    for (std::size_t k = 0; k < center.size(); ++k) {
      gc[k] += dz * o[k];
      go[k] += dz * center[k];
    }
  };
  term(ex.target, true);
  for (std::uint32_t n : ex.negatives) term(n, false);
  return loss;
}

inline double skipgram_loss(const SkipGramTables& t, const std::vector<SkipGramExample>& batch) {
  double loss = 0.0;
  for (const auto& ex : batch) loss += skipgram_loss_and_grad(t, ex, nullptr);
  return loss;
}

// One plain SGD step on a single example, word2vec style: output rows are
// updated in turn, the center row once at the end from the accumulated
// gradient. `scratch` must hold one row.
inline void skipgram_sgd_step(SkipGramTables& t, const SkipGramExample& ex, double lr,
                              std::vector<double>& scratch) {
  auto center = t.in.row(ex.center);
  std::fill(scratch.begin(), scratch.end(), 0.0);
  auto term = [&](std::uint32_t row, bool positive) {
    auto o = t.out.row(row);
    const double z = inner_product(center, o);
    const double dz = ex.weight * (positive ? sigmoid(z) - 1.0 : sigmoid(z));
    for (std::size_t k = 0; k < center.size(); ++k) {
      scratch[k] += dz * o[k];
      o[k] -= lr * dz * center[k];
    }
  };
  term(ex.target, true);
  for (std::uint32_t n : ex.negatives) term(n, false);
  for (std::size_t k = 0; k < center.size(); ++k) center[k] -= lr * scratch[k];
}

// Linearly decayed learning rate with a floor of 1e-4 * lr0.
inline double decayed_learning_rate(double lr0, std::uint64_t done, std::uint64_t total) {
  if (total == 0) return lr0;
  const double frac = 1.0 - static_cast<double>(done) / static_cast<double>(total);
  return lr0 * std::max(1e-4, frac);
}

}  // namespace c2v
