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

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "c2v/data.hpp"
#include "c2v/error.hpp"

namespace c2v {

struct Scored {
  double score = 0.0;
  Label label = Label::negative;
};

using ScoredSet = std::vector<Scored>;

namespace detail {

inline void check_scores(const ScoredSet& s) {
  for (const Scored& x : s) {
    if (!std::isfinite(x.score)) fail<NumericError>("non-finite score in scored set");
  }
}

}  // namespace detail

// P(score(pos) > score(neg)) with ties counted one half. O(n log n): sort
// ascending, then walk groups of equal scores.
inline double roc_auc(const ScoredSet& s) {
  detail::check_scores(s);
  std::vector<std::size_t> order(s.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return s[a].score < s[b].score; });
  double n_pos = 0.0;
  double n_neg = 0.0;
  double correct = 0.0;  // counted in half units below to stay exact
  double neg_below = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    double pos_here = 0.0;
    double neg_here = 0.0;
    while (j < order.size() && s[order[j]].score == s[order[i]].score) {
      (s[order[j]].label == Label::positive ? pos_here : neg_here) += 1.0;
      ++j;
    }
    correct += 2.0 * pos_here * neg_below + pos_here * neg_here;
    neg_below += neg_here;
    n_pos += pos_here;
    n_neg += neg_here;
    i = j;
  }
  if (n_pos == 0.0 || n_neg == 0.0) {
    fail("roc_auc needs at least one positive and one negative (got ", n_pos, " / ", n_neg, ")");
  }
  return correct / (2.0 * n_pos * n_neg);
}

// Average precision: the mean, over positives in descending score order, of
// the precision at each positive's rank. Equal scores keep their input order.
inline double auprc(const ScoredSet& s) {
  detail::check_scores(s);
  std::vector<std::size_t> order(s.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return s[a].score > s[b].score; });
  double hits = 0.0;
  double sum = 0.0;
  for (std::size_t r = 0; r < order.size(); ++r) {
    if (s[order[r]].label == Label::positive) {
      hits += 1.0;
      sum += hits / static_cast<double>(r + 1);
    }
  }
  if (hits == 0.0) fail("auprc needs at least one positive");
  return sum / hits;
}

}  // namespace c2v
