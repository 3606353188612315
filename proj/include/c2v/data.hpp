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

// Catalog and co-purchase pair containers, cold-start splits and the
// frequency-proportional negative sampler.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "c2v/core_math.hpp"
#include "c2v/error.hpp"

namespace c2v {

using ProductIndex = std::uint32_t;

struct ProductRecord {
  std::string id;
  std::string category;
  std::vector<std::string> tokens;  // title words then description words
  DenseVector image_features;

  bool operator==(const ProductRecord&) const = default;
};

// Immutable product table. Products are stored in ascending id order, so a
// ProductIndex comparison is a lexicographic id comparison.
class Catalog {
 public:
  Catalog() = default;

  static Catalog from_records(std::vector<ProductRecord> records) {
    Catalog c;
    std::sort(records.begin(), records.end(),
              [](const ProductRecord& a, const ProductRecord& b) { return a.id < b.id; });
    for (std::size_t i = 0; i < records.size(); ++i) {
      const ProductRecord& r = records[i];
      if (r.id.empty()) fail("catalog: empty product id");
      if (i > 0 && records[i - 1].id == r.id) fail("catalog: duplicate product id `", r.id, "`");
      if (!all_finite(r.image_features)) {
        fail("catalog: non-finite image feature in product `", r.id, "`");
      }
      if (i > 0 && r.image_features.size() != records[0].image_features.size()) {
        fail<DimensionError>("catalog: product `", r.id, "` has ", r.image_features.size(),
                             " image features, expected ", records[0].image_features.size());
      }
    }
    c.products_ = std::move(records);
    c.index_.reserve(c.products_.size());
    for (std::size_t i = 0; i < c.products_.size(); ++i) {
      c.index_.emplace(c.products_[i].id, static_cast<ProductIndex>(i));
    }
    return c;
  }

  std::size_t size() const { return products_.size(); }
  bool empty() const { return products_.empty(); }
  const ProductRecord& operator[](ProductIndex i) const { return products_[i]; }
  auto begin() const { return products_.begin(); }
  auto end() const { return products_.end(); }

  std::size_t image_dim() const {
    return products_.empty() ? 0 : products_.front().image_features.size();
  }

  std::optional<ProductIndex> find(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  ProductIndex index_of(const std::string& id) const {
    auto i = find(id);
    if (!i) fail("unknown product id `", id, "`");
    return *i;
  }

  // Sorted distinct category names.
  std::vector<std::string> categories() const {
    std::vector<std::string> out;
    for (const auto& p : products_) out.push_back(p.category);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  bool operator==(const Catalog& o) const { return products_ == o.products_; }

 private:
  std::vector<ProductRecord> products_;
  std::unordered_map<std::string, ProductIndex> index_;
};

// ---------------------------------------------------------------------------
// Pairs

struct Pair {
  ProductIndex a = 0;  // a < b
  ProductIndex b = 0;
  std::uint32_t count = 1;

  bool operator==(const Pair&) const = default;
};

inline std::uint64_t pair_key(ProductIndex a, ProductIndex b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | b;
}

using PairKeySet = std::unordered_set<std::uint64_t>;

// Unordered positive pairs with multiplicities, canonicalized (a < b) and
// sorted by (a, b).
class PairSet {
 public:
  PairSet() = default;

  // Canonicalizes orientation, aggregates duplicates and rejects self-pairs.
  static PairSet from_pairs(std::vector<Pair> raw) {
    for (Pair& p : raw) {
      if (p.a == p.b) fail("self-pair on product index ", p.a);
      if (p.count == 0) fail("pair count must be positive");
      if (p.a > p.b) std::swap(p.a, p.b);
    }
    std::sort(raw.begin(), raw.end(), [](const Pair& x, const Pair& y) {
      return std::tie(x.a, x.b) < std::tie(y.a, y.b);
    });
    PairSet s;
    for (const Pair& p : raw) {
      if (!s.pairs_.empty() && s.pairs_.back().a == p.a && s.pairs_.back().b == p.b) {
        s.pairs_.back().count += p.count;
      } else {
        s.pairs_.push_back(p);
      }
    }
    return s;
  }

  std::size_t size() const { return pairs_.size(); }
  bool empty() const { return pairs_.empty(); }
  const Pair& operator[](std::size_t i) const { return pairs_[i]; }
  auto begin() const { return pairs_.begin(); }
  auto end() const { return pairs_.end(); }
  const std::vector<Pair>& pairs() const { return pairs_; }

  bool contains(ProductIndex a, ProductIndex b) const {
    if (a > b) std::swap(a, b);
    auto it = std::lower_bound(pairs_.begin(), pairs_.end(), Pair{a, b, 0},
                               [](const Pair& x, const Pair& y) {
                                 return std::tie(x.a, x.b) < std::tie(y.a, y.b);
                               });
    return it != pairs_.end() && it->a == a && it->b == b;
  }

  // Sorted distinct products appearing in any pair.
  std::vector<ProductIndex> products() const {
    std::vector<ProductIndex> out;
    out.reserve(pairs_.size() * 2);
    for (const Pair& p : pairs_) {
      out.push_back(p.a);
      out.push_back(p.b);
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  PairKeySet keys() const {
    PairKeySet k;
    k.reserve(pairs_.size() * 2);
    for (const Pair& p : pairs_) k.insert(pair_key(p.a, p.b));
    return k;
  }

  bool operator==(const PairSet&) const = default;

 private:
  std::vector<Pair> pairs_;
};

inline PairKeySet union_keys(std::initializer_list<const PairSet*> sets) {
  PairKeySet k;
  for (const PairSet* s : sets) {
    for (const Pair& p : *s) k.insert(pair_key(p.a, p.b));
  }
  return k;
}

// Each product's total count across the pairs it appears in.
inline std::map<ProductIndex, std::uint64_t> product_frequency(const PairSet& pairs) {
  std::map<ProductIndex, std::uint64_t> freq;
  for (const Pair& p : pairs) {
    freq[p.a] += p.count;
    freq[p.b] += p.count;
  }
  return freq;
}

// ---------------------------------------------------------------------------
// Splits

enum class Regime { hard, soft };

inline const char* regime_name(Regime r) { return r == Regime::hard ? "hard" : "soft"; }

struct DatasetSplit {
  PairSet train;
  PairSet validation;
  PairSet test;
  Regime regime = Regime::soft;

  PairKeySet all_positive_keys() const {
    return union_keys({&train, &validation, &test});
  }
};

struct SplitFractions {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
};

namespace detail {

inline void check_fractions(const SplitFractions& f, bool allow_zero_holdout) {
  const bool ok_train = f.train > 0.0;
  const bool ok_holdout = allow_zero_holdout ? (f.validation >= 0.0 && f.test >= 0.0)
                                             : (f.validation > 0.0 && f.test > 0.0);
  if (!ok_train || !ok_holdout || std::abs(f.train + f.validation + f.test - 1.0) > 1e-9) {
    fail<ConfigError>("split fractions must be positive and sum to 1 (got ", f.train, ", ",
                      f.validation, ", ", f.test, ")");
  }
}

}  // namespace detail

// Partitions products (seeded shuffle) into train/validation/test sets and
// keeps only pairs whose endpoints both fall in the same partition.
inline DatasetSplit make_hard_cold_start_split(const PairSet& pairs,
                                               const SplitFractions& fractions,
                                               std::uint64_t seed) {
  detail::check_fractions(fractions, /*allow_zero_holdout=*/false);
  std::vector<ProductIndex> products = pairs.products();
  Rng rng(derive_seed(seed, 0x6861726471ULL));
  std::shuffle(products.begin(), products.end(), rng);

  const std::size_t n = products.size();
  const auto n_val = static_cast<std::size_t>(std::llround(fractions.validation * n));
  const auto n_test = static_cast<std::size_t>(std::llround(fractions.test * n));
  std::unordered_map<ProductIndex, int> part;
  for (std::size_t i = 0; i < n; ++i) {
    part[products[i]] = i < n_val ? 1 : (i < n_val + n_test ? 2 : 0);
  }
  std::vector<Pair> buckets[3];
  for (const Pair& p : pairs) {
    const int pa = part[p.a];
    if (pa == part[p.b]) buckets[pa].push_back(p);
  }
  DatasetSplit split{PairSet::from_pairs(std::move(buckets[0])),
                     PairSet::from_pairs(std::move(buckets[1])),
                     PairSet::from_pairs(std::move(buckets[2])), Regime::hard};
  if (split.train.empty() || split.validation.empty() || split.test.empty()) {
    fail("hard cold-start split produced an empty partition (train=", split.train.size(),
         ", validation=", split.validation.size(), ", test=", split.test.size(), ")");
  }
  return split;
}

// Restricts to the `top_k` most connected products, keeps a seeded
// `link_fraction` sample of the pairs among them and splits those pairs.
inline DatasetSplit make_soft_cold_start_split(const PairSet& pairs, std::size_t top_k,
                                               double link_fraction,
                                               double validation_fraction,
                                               double test_fraction, std::uint64_t seed) {
  if (!(link_fraction > 0.0 && link_fraction <= 1.0)) {
    fail<ConfigError>("link_fraction must be in (0, 1], got ", link_fraction);
  }
  detail::check_fractions({1.0 - validation_fraction - test_fraction, validation_fraction,
                           test_fraction},
                          /*allow_zero_holdout=*/true);
  const auto freq = product_frequency(pairs);
  if (top_k == 0 || top_k > freq.size()) {
    fail<ConfigError>("top_k must be in [1, ", freq.size(), "], got ", top_k);
  }
  std::vector<std::pair<std::uint64_t, ProductIndex>> ranked;
  ranked.reserve(freq.size());
  for (const auto& [p, f] : freq) ranked.emplace_back(f, p);
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& x, const auto& y) { return x.first > y.first; });
  std::unordered_set<ProductIndex> top;
  for (std::size_t i = 0; i < top_k; ++i) top.insert(ranked[i].second);

  std::vector<Pair> restricted;
  for (const Pair& p : pairs) {
    if (top.count(p.a) != 0 && top.count(p.b) != 0) restricted.push_back(p);
  }
  Rng rng(derive_seed(seed, 0x736f6674ULL));
  std::shuffle(restricted.begin(), restricted.end(), rng);
  const auto n_keep = static_cast<std::size_t>(
      std::llround(link_fraction * static_cast<double>(restricted.size())));
  restricted.resize(std::min(n_keep, restricted.size()));

  const std::size_t n = restricted.size();
  const auto n_val = static_cast<std::size_t>(std::llround(validation_fraction * n));
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * n));
  std::vector<Pair> val(restricted.begin(), restricted.begin() + n_val);
  std::vector<Pair> test(restricted.begin() + n_val, restricted.begin() + n_val + n_test);
  std::vector<Pair> train(restricted.begin() + n_val + n_test, restricted.end());
  DatasetSplit split{PairSet::from_pairs(std::move(train)), PairSet::from_pairs(std::move(val)),
                     PairSet::from_pairs(std::move(test)), Regime::soft};
  if (split.train.empty() || (validation_fraction > 0.0 && split.validation.empty()) ||
      (test_fraction > 0.0 && split.test.empty())) {
    fail("soft cold-start split produced an empty partition (train=", split.train.size(),
         ", validation=", split.validation.size(), ", test=", split.test.size(), ")");
  }
  return split;
}

// ---------------------------------------------------------------------------
// Negative sampling

enum class Label : std::uint8_t { negative = 0, positive = 1 };

struct LabeledPair {
  ProductIndex a = 0;
  ProductIndex b = 0;
  Label label = Label::negative;
  std::uint32_t count = 1;

  bool operator==(const LabeledPair&) const = default;
};

using LabeledBatch = std::vector<LabeledPair>;

inline constexpr int kMaxConsecutiveRejections = 1000;

// Draws pair endpoints independently from freq(p)^power / sum freq(q)^power
// over the products of a positive PairSet.
class NegativeSampler {
 public:
  NegativeSampler(const PairSet& positives, double freq_power) {
    const auto freq = product_frequency(positives);
    if (freq.size() < 2) fail("negative sampling needs at least two products");
    products_.reserve(freq.size());
    std::vector<double> weights;
    weights.reserve(freq.size());
    for (const auto& [p, f] : freq) {
      products_.push_back(p);
      weights.push_back(std::pow(static_cast<double>(f), freq_power));
    }
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    probabilities_.reserve(weights.size());
    for (double w : weights) probabilities_.push_back(w / total);
    dist_ = std::discrete_distribution<std::size_t>(weights.begin(), weights.end());
  }

  ProductIndex draw_endpoint(Rng& rng) const { return products_[dist_(rng)]; }

  // A canonical (a < b) pair that is neither a self-pair nor forbidden.
  std::pair<ProductIndex, ProductIndex> draw_pair(Rng& rng, const PairKeySet& forbidden) const {
    for (int attempt = 0; attempt < kMaxConsecutiveRejections; ++attempt) {
      ProductIndex a = draw_endpoint(rng);
      ProductIndex b = draw_endpoint(rng);
      if (a == b || forbidden.count(pair_key(a, b)) != 0) continue;
      if (a > b) std::swap(a, b);
      return {a, b};
    }
    fail("negative sampler: ", kMaxConsecutiveRejections,
         " consecutive rejections (every candidate pair is forbidden or a self-pair)");
  }

  const std::vector<ProductIndex>& products() const { return products_; }
  const std::vector<double>& probabilities() const { return probabilities_; }

 private:
  std::vector<ProductIndex> products_;
  std::vector<double> probabilities_;
  // discrete_distribution::operator() is non-const but stateless in practice.
  mutable std::discrete_distribution<std::size_t> dist_;
};

// All positives (with their counts) followed by ceil(ratio * #positives)
// negatives. Negatives for positive i come from an RNG stream keyed by
// (stream_seed, pair), so the batch does not depend on the order in which
// positives were produced.
inline LabeledBatch sample_negatives_keyed(const PairSet& positives, double ratio,
                                           const NegativeSampler& sampler,
                                           const PairKeySet& forbidden,
                                           std::uint64_t stream_seed) {
  if (!(ratio > 0.0)) fail<ConfigError>("negative ratio must be positive, got ", ratio);
  LabeledBatch batch;
  const std::size_t n = positives.size();
  const auto n_neg = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(n) - 1e-9));
  batch.reserve(n + n_neg);
  for (const Pair& p : positives) batch.push_back({p.a, p.b, Label::positive, p.count});
  if (n == 0) return batch;
  const std::size_t base = n_neg / n;
  const std::size_t extra = n_neg % n;
  for (std::size_t i = 0; i < n; ++i) {
    const Pair& p = positives[i];
    Rng rng(derive_seed(stream_seed, p.a, p.b));
    const std::size_t k = base + (i < extra ? 1 : 0);
    for (std::size_t j = 0; j < k; ++j) {
      auto [a, b] = sampler.draw_pair(rng, forbidden);
      batch.push_back({a, b, Label::negative, 1});
    }
  }
  return batch;
}

inline LabeledBatch sample_negatives(const PairSet& positives, double ratio, double freq_power,
                                     const PairKeySet& forbidden, Rng& rng) {
  const NegativeSampler sampler(positives, freq_power);
  return sample_negatives_keyed(positives, ratio, sampler, forbidden, rng());
}

}  // namespace c2v
