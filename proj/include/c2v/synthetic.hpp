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

// Synthetic catalog + co-purchase generator with planted multimodal structure.
//
// Every product has a latent cluster, a category, an image attribute and a
// text attribute, each attribute taking one of `attribute_values` values. The
// image features encode (cluster, category, image attribute); the title
// encodes (cluster, text attribute). Ordinary co-purchases link products of
// the same cluster and the same attributes. A `gamma` fraction of
// co-purchases are cross-cluster "interaction" pairs (a, b) whose attributes
// are cross-matched: image attribute of a == text attribute of b and text
// attribute of a == image attribute of b. Whether the image attributes of a
// and b agree is independent of that event, and likewise for the text
// attributes, so neither modality alone nor an additive blend of the two
// per-modality similarities can recover it.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "c2v/core_math.hpp"
#include "c2v/data.hpp"
#include "c2v/toml.hpp"

namespace c2v {

struct SynthConfig {
  std::size_t n_products = 2000;
  std::size_t n_clusters = 20;
  std::size_t d_img_in = 64;
  std::size_t vocab_size = 400;
  std::size_t tokens_per_product = 12;
  double gamma = 0.0;
  std::size_t n_categories = 2;
  std::uint64_t seed = 13;

  // Generator constants; not part of the config file.
  double pairs_per_product = 8.0;
  std::size_t attribute_values = 4;  // per modality
  double attribute_amplitude = 6.0;
  std::size_t attribute_copies = 3;  // attribute words per title

  static const std::set<std::string>& keys() {
    static const std::set<std::string> k{"n_products", "n_clusters",         "d_img_in",
                                         "vocab_size", "tokens_per_product", "gamma",
                                         "n_categories", "seed"};
    return k;
  }

  static SynthConfig from_table(const toml::FlatTable& t) {
    t.expect_only(keys());
    SynthConfig c;
    auto get_size = [&](const char* key) {
      const auto v = t.get_int(key);
      if (v < 0) fail<ConfigError>("config key `", key, "` must be non-negative");
      return static_cast<std::size_t>(v);
    };
    c.n_products = get_size("n_products");
    c.n_clusters = get_size("n_clusters");
    c.d_img_in = get_size("d_img_in");
    c.vocab_size = get_size("vocab_size");
    c.tokens_per_product = get_size("tokens_per_product");
    c.gamma = t.get_double("gamma");
    c.n_categories = get_size("n_categories");
    c.seed = static_cast<std::uint64_t>(t.get_int("seed"));
    c.validate();
    return c;
  }

  std::string to_toml() const {
    std::ostringstream o;
    o << "n_products = " << n_products << "\n"
      << "n_clusters = " << n_clusters << "\n"
      << "d_img_in = " << d_img_in << "\n"
      << "vocab_size = " << vocab_size << "\n"
      << "tokens_per_product = " << tokens_per_product << "\n";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", gamma);
    std::string g = buf;
    if (g.find_first_of(".eE") == std::string::npos) g += ".0";
    o << "gamma = " << g << "\n"
      << "n_categories = " << n_categories << "\n"
      << "seed = " << seed << "\n";
    return o.str();
  }

  void validate() const {
    if (n_products < 4) fail<ConfigError>("n_products must be >= 4");
    if (n_clusters < 1 || n_clusters * 8 > n_products) {
      fail<ConfigError>("n_clusters must be in [1, n_products / 8]");
    }
    if (d_img_in < 1) fail<ConfigError>("d_img_in must be >= 1");
    if (tokens_per_product < 1) fail<ConfigError>("tokens_per_product must be >= 1");
    if (attribute_values < 2) fail<ConfigError>("attribute_values must be >= 2");
    if (vocab_size < attribute_tokens() + 2 * n_clusters) {
      fail<ConfigError>("vocab_size must be >= ", attribute_tokens() + 2 * n_clusters);
    }
    if (!(gamma >= 0.0 && gamma <= 1.0)) fail<ConfigError>("gamma must be in [0, 1]");
    if (gamma > 0.0 && n_clusters < 2) {
      fail<ConfigError>("gamma > 0 needs at least two clusters");
    }
    if (n_categories < 1) fail<ConfigError>("n_categories must be >= 1");
    if (!(pairs_per_product > 0.0)) fail<ConfigError>("pairs_per_product must be positive");
  }

  // Attribute words: one pool of kPoolSize words per attribute value.
  static constexpr std::size_t kPoolSize = 3;
  std::size_t attribute_tokens() const { return kPoolSize * attribute_values; }
};

// Latent labels, indexed by ProductIndex.
struct SynthTruth {
  std::vector<std::uint32_t> cluster;
  std::vector<std::uint32_t> category;
  std::vector<std::uint8_t> image_attr;
  std::vector<std::uint8_t> text_attr;

  std::uint32_t attribute_values = 0;

  // (cluster, image attribute, text attribute) packed into one id.
  std::uint32_t group(ProductIndex p) const {
    return (cluster[p] * attribute_values + image_attr[p]) * attribute_values + text_attr[p];
  }
  std::uint32_t combo(ProductIndex p) const {
    return image_attr[p] * attribute_values + text_attr[p];
  }
  // The combo whose image and text attributes are those of `p` swapped.
  std::uint32_t swapped_combo(ProductIndex p) const {
    return text_attr[p] * attribute_values + image_attr[p];
  }
  // Interaction rule: the image attribute of each side equals the text
  // attribute of the other.
  bool cross_matched(ProductIndex a, ProductIndex b) const {
    return image_attr[a] == text_attr[b] && text_attr[a] == image_attr[b];
  }
};

struct SyntheticData {
  Catalog catalog;
  PairSet pairs;
  SynthTruth truth;
};

namespace synth_detail {

inline constexpr double kPrototypeStd = 1.0;
inline constexpr double kCategoryStd = 0.6;
inline constexpr double kNoiseStd = 1.0;
inline constexpr double kTopicProbability = 0.7;
inline constexpr double kPopularitySigma = 0.5;
// Attribute words are placed among the leading title words.
inline constexpr std::size_t kLeadTokens = 10;
inline constexpr int kMaxPairAttempts = 100000;

inline std::string product_id(std::size_t i, std::size_t n) {
  const int width = static_cast<int>(std::to_string(n - 1).size());
  char buf[32];
  std::snprintf(buf, sizeof buf, "p%0*zu", width, i);
  return buf;
}

}  // namespace synth_detail

inline SyntheticData generate_synthetic(const SynthConfig& config, std::uint64_t seed) {
  using namespace synth_detail;
  config.validate();
  const std::size_t n = config.n_products;
  const std::size_t d = config.d_img_in;
  Rng rng(derive_seed(seed, 0x73796e7468ULL));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  SynthTruth truth;
  const std::size_t k_attr = config.attribute_values;
  truth.attribute_values = static_cast<std::uint32_t>(k_attr);
  truth.cluster.resize(n);
  truth.category.resize(n);
  truth.image_attr.resize(n);
  truth.text_attr.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    // Round-robin clusters keep every cluster populated.
    truth.cluster[i] = static_cast<std::uint32_t>(i % config.n_clusters);
    truth.category[i] = static_cast<std::uint32_t>(rng() % config.n_categories);
    truth.image_attr[i] = static_cast<std::uint8_t>(rng() % k_attr);
    truth.text_attr[i] = static_cast<std::uint8_t>(rng() % k_attr);
  }

  // Image model: prototype[cluster] + offset[cluster][category]
  //              + amplitude * direction[image attribute] + noise.
  std::vector<DenseVector> prototype(config.n_clusters, DenseVector(d));
  for (auto& v : prototype) {
    for (double& x : v) x = kPrototypeStd * normal(rng);
  }
  std::vector<DenseVector> offset(config.n_clusters * config.n_categories, DenseVector(d));
  for (auto& v : offset) {
    for (double& x : v) x = kCategoryStd * normal(rng);
  }
  std::vector<DenseVector> direction(k_attr, DenseVector(d));
  for (auto& v : direction) {
    for (double& x : v) x = normal(rng);
    const double norm = std::sqrt(squared_norm(v));
    for (double& x : v) x /= norm;
  }

  // Vocabulary: attribute words first (pool v holds kPoolSize consecutive
  // words), then disjoint per-cluster topic sets, then the background.
  const std::size_t attr = config.attribute_tokens();
  const std::size_t topic_size = std::max<std::size_t>(
      2, (config.vocab_size - attr) / (2 * config.n_clusters));
  auto word = [](std::size_t w) { return "w" + std::to_string(w); };

  std::vector<ProductRecord> records(n);
  for (std::size_t i = 0; i < n; ++i) {
    ProductRecord& r = records[i];
    r.id = product_id(i, n);
    const std::uint32_t c = truth.cluster[i];
    r.category = "cat" + std::to_string(truth.category[i]);
    r.image_features.resize(d);
    const DenseVector& off = offset[c * config.n_categories + truth.category[i]];
    for (std::size_t k = 0; k < d; ++k) {
      r.image_features[k] = prototype[c][k] + off[k] +
                            config.attribute_amplitude * direction[truth.image_attr[i]][k] +
                            kNoiseStd * normal(rng);
    }
    const std::size_t t = config.tokens_per_product;
    // Distinct attribute positions among the leading words.
    std::vector<std::size_t> lead(std::min(t, kLeadTokens));
    std::iota(lead.begin(), lead.end(), 0);
    std::shuffle(lead.begin(), lead.end(), rng);
    lead.resize(std::min(lead.size(), config.attribute_copies));
    r.tokens.reserve(t);
    for (std::size_t k = 0; k < t; ++k) {
      if (std::find(lead.begin(), lead.end(), k) != lead.end()) {
        r.tokens.push_back(word(truth.text_attr[i] * SynthConfig::kPoolSize +
                                rng() % SynthConfig::kPoolSize));
      } else if (unit(rng) < kTopicProbability) {
        r.tokens.push_back(word(attr + c * topic_size + rng() % topic_size));
      } else {
        r.tokens.push_back(word(attr + rng() % (config.vocab_size - attr)));
      }
    }
  }

  // Popularity skews both pair endpoints.
  std::vector<double> popularity(n);
  for (double& w : popularity) w = std::exp(kPopularitySigma * normal(rng));

  std::vector<std::vector<ProductIndex>> groups(config.n_clusters * k_attr * k_attr);
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = static_cast<ProductIndex>(i);
    groups[truth.group(p)].push_back(p);
  }
  auto weighted = [&](const std::vector<ProductIndex>& members) {
    std::vector<double> w;
    w.reserve(members.size());
    for (ProductIndex p : members) w.push_back(popularity[p]);
    return std::discrete_distribution<std::size_t>(w.begin(), w.end());
  };
  std::vector<std::discrete_distribution<std::size_t>> group_dist;
  group_dist.reserve(groups.size());
  for (const auto& g : groups) {
    group_dist.push_back(g.empty() ? std::discrete_distribution<std::size_t>() : weighted(g));
  }

  // Products by attribute combo; interaction partners of p come from
  // swapped_combo(p).
  std::vector<std::vector<ProductIndex>> cross(k_attr * k_attr);
  for (std::size_t i = 0; i < n; ++i) {
    const auto p = static_cast<ProductIndex>(i);
    cross[truth.combo(p)].push_back(p);
  }
  std::vector<std::discrete_distribution<std::size_t>> cross_dist;
  for (const auto& c : cross) {
    cross_dist.push_back(c.empty() ? std::discrete_distribution<std::size_t>() : weighted(c));
  }

  std::vector<ProductIndex> everyone(n);
  std::iota(everyone.begin(), everyone.end(), 0);
  auto anchor_dist = weighted(everyone);

  const auto n_draws = static_cast<std::size_t>(std::llround(config.pairs_per_product * n));
  std::vector<Pair> raw;
  raw.reserve(n_draws);
  // The kind of each pair is fixed before its anchor is drawn, so exactly
  // a gamma share of draws (in expectation) are interaction pairs.
  auto draw_partner = [&](bool interaction) -> std::optional<Pair> {
    const auto a = static_cast<ProductIndex>(anchor_dist(rng));
    if (interaction) {
      const std::uint32_t combo = truth.swapped_combo(a);
      if (cross[combo].empty()) return std::nullopt;
      const ProductIndex b = cross[combo][cross_dist[combo](rng)];
      if (truth.cluster[b] == truth.cluster[a]) return std::nullopt;
      return Pair{a, b, 1};
    }
    const auto& g = groups[truth.group(a)];
    if (g.size() < 2) return std::nullopt;
    const ProductIndex b = g[group_dist[truth.group(a)](rng)];
    if (b == a) return std::nullopt;
    return Pair{a, b, 1};
  };
  while (raw.size() < n_draws) {
    const bool interaction = unit(rng) < config.gamma;
    std::optional<Pair> p;
    for (int attempt = 0; !p; ++attempt) {
      if (attempt == kMaxPairAttempts) {
        fail<ConfigError>("synthetic generator could not draw a ",
                          interaction ? "interaction" : "within-group", " pair");
      }
      p = draw_partner(interaction);
    }
    raw.push_back(*p);
  }
  return {Catalog::from_records(std::move(records)), PairSet::from_pairs(std::move(raw)),
          std::move(truth)};
}

inline SyntheticData generate_synthetic(const SynthConfig& config) {
  return generate_synthetic(config, config.seed);
}

}  // namespace c2v
