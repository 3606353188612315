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

// Co-purchase modality: skip-gram product embeddings over training pairs,
// optionally co-embedded with category tokens. Each directed pair update
// x -> y then adds four side terms weighted by lambda_side: x -> cat(y),
// cat(x) -> y, x -> cat(x) and cat(x) -> x.

#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "c2v/core_math.hpp"
#include "c2v/data.hpp"
#include "c2v/skipgram.hpp"
#include "c2v/toml.hpp"
#include "c2v/training.hpp"

namespace c2v {

struct CFConfig {
  std::size_t d_cf = 50;
  std::size_t n_negatives = 5;
  std::size_t epochs = 5;
  double learning_rate = 0.025;
  double freq_power = 0.75;
  double lambda_side = 0.0;
  std::uint64_t seed = 1;

  void validate() const {
    if (d_cf == 0) fail<ConfigError>("d_cf must be positive");
    if (!(lambda_side >= 0.0)) fail<ConfigError>("lambda_side must be >= 0");
    if (!(learning_rate >= 0.0)) fail<ConfigError>("cf learning rate must be >= 0");
  }

  static CFConfig from_table(const toml::FlatTable& t, const TrainConfig& base) {
    CFConfig c;
    c.d_cf = t.get_or("d_cf", c.d_cf);
    c.n_negatives = t.get_or("cf_negatives", c.n_negatives);
    c.epochs = t.get_or("cf_epochs", c.epochs);
    c.learning_rate = t.get_or("cf_learning_rate", c.learning_rate);
    c.freq_power = base.freq_power;
    c.lambda_side = t.get_or("lambda_side", c.lambda_side);
    c.seed = base.seed;
    c.validate();
    return c;
  }
};

// Product (and category) vectors are the sum of the input and output
// skip-gram rows. Rows of products absent from training are zero and
// reported as missing.
struct CFEmbeddings {
  DenseMatrix product_vectors;  // one row per catalog index
  std::vector<std::uint8_t> trained;
  std::vector<std::string> categories;
  DenseMatrix category_vectors;  // empty unless side information was used
  double alpha = 1.0;
  double beta = 0.0;

  std::size_t dim() const { return product_vectors.cols; }

  std::optional<std::span<const double>> vector(ProductIndex p) const {
    if (p >= trained.size() || trained[p] == 0) return std::nullopt;
    return product_vectors.row(p);
  }

  template <class Self>
  static auto params(Self& self) {
    return std::vector{view("product_vectors", self.product_vectors),
                       view("category_vectors", self.category_vectors),
                       view("alpha", self.alpha), view("beta", self.beta)};
  }

  bool operator==(const CFEmbeddings&) const = default;
};

inline std::optional<double> cf_pair_logit(const CFEmbeddings& e, ProductIndex a, ProductIndex b) {
  const auto va = e.vector(a);
  const auto vb = e.vector(b);
  if (!va || !vb) return std::nullopt;
  return e.alpha * inner_product(*va, *vb) + e.beta;
}

// Raw skip-gram state; exposed for tests that inspect trajectories.
struct CFTrainingState {
  SkipGramTables tables;  // rows [0, n_products) products, then categories
  std::size_t n_products = 0;
};

namespace cf_detail {

inline constexpr std::uint64_t kStream = 0x70726f64ULL;
inline constexpr std::uint64_t kSideStream = 0x73696465ULL;

// Category index of each catalog product (empty when not using side info).
struct SideInfo {
  std::vector<std::string> names;
  std::vector<std::uint32_t> of_product;
};

inline SideInfo side_info(const Catalog& catalog) {
  SideInfo s;
  s.names = catalog.categories();
  s.of_product.reserve(catalog.size());
  for (const auto& r : catalog) {
    s.of_product.push_back(static_cast<std::uint32_t>(
        std::lower_bound(s.names.begin(), s.names.end(), r.category) - s.names.begin()));
  }
  return s;
}

inline CFTrainingState run(const PairSet& pairs, std::size_t n_products, const SideInfo* side,
                           const CFConfig& config) {
  config.validate();
  if (pairs.empty()) fail("prod2vec: empty training pairs");
  for (const Pair& p : pairs) {
    if (p.b >= n_products) fail("prod2vec: pair references product ", p.b, " beyond catalog");
  }
  const std::size_t d = config.d_cf;
  const std::size_t n_cat = side ? side->names.size() : 0;
  CFTrainingState st;
  st.n_products = n_products;
  st.tables.in = DenseMatrix(n_products + n_cat, d);
  st.tables.out = DenseMatrix(n_products + n_cat, d);

  const auto freq = product_frequency(pairs);
  {
    Rng rng(derive_seed(config.seed, kStream));
    std::normal_distribution<double> init(0.0, 1.0 / std::sqrt(static_cast<double>(d)));
    for (const auto& [p, _] : freq) {
      for (double& x : st.tables.in.row(p)) x = init(rng);
    }
    Rng side_rng(derive_seed(config.seed, kSideStream));
    for (std::size_t c = 0; c < n_cat; ++c) {
      for (double& x : st.tables.in.row(n_products + c)) x = init(side_rng);
    }
  }

  std::vector<ProductIndex> noise_ids;
  std::vector<double> noise_w;
  std::vector<double> cat_w(n_cat, 0.0);
  for (const auto& [p, f] : freq) {
    noise_ids.push_back(p);
    noise_w.push_back(std::pow(static_cast<double>(f), config.freq_power));
    if (side) cat_w[side->of_product[p]] += static_cast<double>(f);
  }
  for (double& w : cat_w) w = std::pow(w, config.freq_power);
  std::discrete_distribution<std::size_t> noise(noise_w.begin(), noise_w.end());
  std::discrete_distribution<std::uint32_t> cat_noise;
  const bool use_side = side != nullptr && config.lambda_side > 0.0;
  if (use_side) cat_noise = std::discrete_distribution<std::uint32_t>(cat_w.begin(), cat_w.end());

  std::uint64_t updates_per_epoch = 0;
  for (const Pair& p : pairs) updates_per_epoch += 2ULL * p.count;
  const std::uint64_t total = updates_per_epoch * config.epochs;
  std::uint64_t done = 0;

  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> scratch(d);
  SkipGramExample ex;
  auto draw_products = [&](Rng& rng, std::uint32_t target) {
    ex.negatives.clear();
    for (std::size_t k = 0; k < config.n_negatives; ++k) {
      const auto n = static_cast<std::uint32_t>(noise_ids[noise(rng)]);
      if (n != target) ex.negatives.push_back(n);
    }
  };
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng(derive_seed(config.seed, kStream, epoch + 1));
    Rng side_rng(derive_seed(config.seed, kSideStream, epoch + 1));
    auto draw_categories = [&](std::uint32_t target) {
      ex.negatives.clear();
      for (std::size_t k = 0; k < config.n_negatives; ++k) {
        const auto n = static_cast<std::uint32_t>(n_products + cat_noise(side_rng));
        if (n != target) ex.negatives.push_back(n);
      }
    };
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i : order) {
      const Pair& p = pairs[i];
      for (std::uint32_t c = 0; c < p.count; ++c) {
        for (int dir = 0; dir < 2; ++dir) {
          const ProductIndex x = dir == 0 ? p.a : p.b;
          const ProductIndex y = dir == 0 ? p.b : p.a;
          const double lr = decayed_learning_rate(config.learning_rate, done++, total);
          ex.center = x;
          ex.target = y;
          ex.weight = 1.0;
          draw_products(rng, y);
          skipgram_sgd_step(st.tables, ex, lr, scratch);
          if (!use_side) continue;
          // x predicts category(y).
          const auto cat_y = static_cast<std::uint32_t>(n_products + side->of_product[y]);
          ex.center = x;
          ex.target = cat_y;
          ex.weight = config.lambda_side;
          draw_categories(cat_y);
          skipgram_sgd_step(st.tables, ex, lr, scratch);
          // category(x) predicts y.
          const auto cat_x = static_cast<std::uint32_t>(n_products + side->of_product[x]);
          ex.center = cat_x;
          ex.target = y;
          draw_products(side_rng, y);
          skipgram_sgd_step(st.tables, ex, lr, scratch);
          // x predicts category(x), and category(x) predicts x.
          ex.center = x;
          ex.target = cat_x;
          draw_categories(cat_x);
          skipgram_sgd_step(st.tables, ex, lr, scratch);
          ex.center = cat_x;
          ex.target = x;
          draw_products(side_rng, x);
          skipgram_sgd_step(st.tables, ex, lr, scratch);
        }
      }
    }
  }
  if (!params_finite(st.tables)) fail<NumericError>("prod2vec produced non-finite vectors");
  return st;
}

inline CFEmbeddings finish(const CFTrainingState& st, const PairSet& pairs,
                           const SideInfo* side, const CFConfig& config) {
  CFEmbeddings e;
  const std::size_t d = st.tables.in.cols;
  e.product_vectors = DenseMatrix(st.n_products, d);
  e.trained.assign(st.n_products, 0);
  for (const auto& [p, _] : product_frequency(pairs)) {
    e.trained[p] = 1;
    auto dst = e.product_vectors.row(p);
    const auto in = st.tables.in.row(p);
    const auto out = st.tables.out.row(p);
    for (std::size_t k = 0; k < d; ++k) dst[k] = in[k] + out[k];
  }
  if (side) {
    e.categories = side->names;
    e.category_vectors = DenseMatrix(side->names.size(), d);
    for (std::size_t c = 0; c < side->names.size(); ++c) {
      const auto in = st.tables.in.row(st.n_products + c);
      const auto out = st.tables.out.row(st.n_products + c);
      auto dst = e.category_vectors.row(c);
      for (std::size_t k = 0; k < d; ++k) dst[k] = in[k] + out[k];
    }
  }
  // alpha, beta: one-feature logistic regression on training positives and
  // seed-derived negatives.
  const LabeledBatch batch = make_eval_batch(pairs, 2.0, config.freq_power, pairs.keys(),
                                             derive_seed(config.seed, kStream, 0xca1ULL));
  std::vector<std::vector<double>> x;
  std::vector<Label> y;
  x.reserve(batch.size());
  for (const auto& ex : batch) {
    x.push_back({inner_product(e.product_vectors.row(ex.a), e.product_vectors.row(ex.b))});
    y.push_back(ex.label);
  }
  const auto w = fit_logistic_regression(x, y, 1e-3);
  e.alpha = w[0];
  e.beta = w[1];
  return e;
}

}  // namespace cf_detail

inline CFTrainingState train_prod2vec_state(const PairSet& pairs, std::size_t n_products,
                                            const CFConfig& config) {
  return cf_detail::run(pairs, n_products, nullptr, config);
}

inline CFTrainingState train_meta_prod2vec_state(const PairSet& pairs, const Catalog& catalog,
                                                 const CFConfig& config) {
  const auto side = cf_detail::side_info(catalog);
  return cf_detail::run(pairs, catalog.size(), &side, config);
}

inline CFEmbeddings train_prod2vec(const PairSet& pairs, std::size_t n_products,
                                   const CFConfig& config) {
  return cf_detail::finish(train_prod2vec_state(pairs, n_products, config), pairs, nullptr,
                           config);
}

inline CFEmbeddings train_meta_prod2vec(const PairSet& pairs, const Catalog& catalog,
                                        const CFConfig& config) {
  const auto side = cf_detail::side_info(catalog);
  return cf_detail::finish(cf_detail::run(pairs, catalog.size(), &side, config), pairs, &side,
                           config);
}

// Prod2Vec when lambda_side == 0, Meta-Prod2Vec otherwise.
inline CFEmbeddings train_cf(const PairSet& pairs, const Catalog& catalog,
                             const CFConfig& config) {
  return config.lambda_side > 0.0 ? train_meta_prod2vec(pairs, catalog, config)
                                   : train_prod2vec(pairs, catalog.size(), config);
}

}  // namespace c2v
