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

// Link-prediction evaluation: fixed seeded negatives, both ranking metrics,
// category slices and table rendering.

#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"

#include "c2v/data.hpp"
#include "c2v/metrics.hpp"
#include "c2v/training.hpp"

namespace c2v {

struct LinkMetrics {
  double roc_auc = 0.0;
  double auprc = 0.0;
};

inline constexpr std::uint64_t kTestStream = 0x74657374ULL;

// Test positives (unit weight) plus ceil(neg_ratio * n) negatives drawn from
// the test products' frequencies, never a known positive. Identical for
// every model evaluated with the same seed.
inline LabeledBatch make_test_batch(const PairSet& test, const PairKeySet& all_positives,
                                    double neg_ratio, double freq_power, std::uint64_t seed) {
  if (test.empty()) fail("evaluation: empty test set");
  return make_eval_batch(test, neg_ratio, freq_power, all_positives,
                         derive_seed(seed, kTestStream));
}

inline ScoredSet score_batch(const PairScorer& scorer, const LabeledBatch& batch) {
  ScoredSet s;
  s.reserve(batch.size());
  for (const auto& ex : batch) s.push_back({scorer(ex.a, ex.b), ex.label});
  return s;
}

inline LinkMetrics link_metrics(const ScoredSet& s) { return {roc_auc(s), auprc(s)}; }

inline LinkMetrics evaluate_link_prediction(const PairScorer& scorer, const PairSet& test,
                                            const PairKeySet& all_positives, double neg_ratio,
                                            double freq_power, std::uint64_t seed) {
  return link_metrics(
      score_batch(scorer, make_test_batch(test, all_positives, neg_ratio, freq_power, seed)));
}

// ---------------------------------------------------------------------------
// Category slices

enum class CategorySlice { same, other, mixed };

inline const char* slice_name(CategorySlice s) {
  switch (s) {
    case CategorySlice::same: return "same";
    case CategorySlice::other: return "other";
    case CategorySlice::mixed: return "mixed";
  }
  return "?";
}

// Pairs with both endpoints in `home` (same), both outside it (other), or one
// on each side (mixed).
inline bool in_slice(const Catalog& catalog, const std::string& home, CategorySlice s,
                     ProductIndex a, ProductIndex b) {
  const bool ha = catalog[a].category == home;
  const bool hb = catalog[b].category == home;
  switch (s) {
    case CategorySlice::same: return ha && hb;
    case CategorySlice::other: return !ha && !hb;
    case CategorySlice::mixed: return ha != hb;
  }
  return false;
}

inline PairSet restrict_to_slice(const PairSet& pairs, const Catalog& catalog,
                                 const std::string& home, CategorySlice s) {
  std::vector<Pair> kept;
  for (const Pair& p : pairs) {
    if (in_slice(catalog, home, s, p.a, p.b)) kept.push_back(p);
  }
  return PairSet::from_pairs(std::move(kept));
}

// Slice positives plus negatives that satisfy the same slice predicate, so
// the category composition of positives and negatives matches.
inline LabeledBatch make_slice_batch(const PairSet& slice, const Catalog& catalog,
                                     const std::string& home, CategorySlice s,
                                     const PairKeySet& all_positives, double neg_ratio,
                                     double freq_power, std::uint64_t seed) {
  if (slice.empty()) fail("cross-category evaluation: empty `", slice_name(s), "` slice");
  const NegativeSampler sampler(slice, freq_power);
  LabeledBatch batch;
  for (const Pair& p : slice) batch.push_back({p.a, p.b, Label::positive, 1});
  const auto n_neg = static_cast<std::size_t>(
      std::ceil(neg_ratio * static_cast<double>(slice.size()) - 1e-9));
  Rng rng(derive_seed(seed, kTestStream, static_cast<std::uint64_t>(s) + 1));
  int rejected = 0;
  while (batch.size() < slice.size() + n_neg) {
    const auto [a, b] = sampler.draw_pair(rng, all_positives);
    if (!in_slice(catalog, home, s, a, b)) {
      if (++rejected >= kMaxConsecutiveRejections * 100) {
        fail("cross-category evaluation: cannot draw `", slice_name(s), "` negatives");
      }
      continue;
    }
    rejected = 0;
    batch.push_back({a, b, Label::negative, 1});
  }
  return batch;
}

struct ResultRow {
  std::string model;
  std::string slice;
  std::string metric;
  double value = 0.0;

  bool operator==(const ResultRow&) const = default;
};

using ResultTable = std::vector<ResultRow>;

inline void add_metrics(ResultTable& table, const std::string& model, const std::string& slice,
                        const LinkMetrics& m) {
  table.push_back({model, slice, "roc_auc", m.roc_auc});
  table.push_back({model, slice, "auprc", m.auprc});
}

// Same-category, other-category and mixed slices of `test`, relative to the
// category the model was trained on.
inline ResultTable evaluate_cross_category(const std::string& model_name, const PairScorer& scorer,
                                           const Catalog& catalog, const PairSet& test,
                                           const std::string& home_category,
                                           const PairKeySet& all_positives, double neg_ratio,
                                           double freq_power, std::uint64_t seed) {
  ResultTable rows;
  for (CategorySlice s : {CategorySlice::same, CategorySlice::other, CategorySlice::mixed}) {
    const PairSet slice = restrict_to_slice(test, catalog, home_category, s);
    const LabeledBatch batch = make_slice_batch(slice, catalog, home_category, s, all_positives,
                                                neg_ratio, freq_power, seed);
    add_metrics(rows, model_name, slice_name(s), link_metrics(score_batch(scorer, batch)));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Rendering

struct RenderedTable {
  std::string text;
  std::string json;
};

inline std::string format_percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f%%", 100.0 * v);
  return buf;
}

inline RenderedTable render_table(const ResultTable& rows) {
  const std::vector<std::string> header{"model", "slice", "metric", "value"};
  std::vector<std::vector<std::string>> cells{header};
  for (const auto& r : rows) {
    if (!(r.value >= 0.0 && r.value <= 1.0)) {
      fail<NumericError>("result value out of [0, 1]: ", r.model, "/", r.slice, "/", r.metric);
    }
    cells.push_back({r.model, r.slice, r.metric, format_percent(r.value)});
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& line : cells) {
    for (std::size_t c = 0; c < line.size(); ++c) width[c] = std::max(width[c], line[c].size());
  }
  RenderedTable out;
  for (const auto& line : cells) {
    std::string s;
    for (std::size_t c = 0; c < line.size(); ++c) {
      if (c + 1 == line.size()) {
        s += std::string(width[c] - line[c].size(), ' ') + line[c];
      } else {
        s += line[c] + std::string(width[c] - line[c].size() + 2, ' ');
      }
    }
    out.text += s + "\n";
  }
  nlohmann::ordered_json j = nlohmann::ordered_json::array();
  for (const auto& r : rows) {
    j.push_back({{"model", r.model}, {"slice", r.slice}, {"metric", r.metric}, {"value", r.value}});
  }
  out.json = j.dump(2) + "\n";
  return out;
}

}  // namespace c2v
