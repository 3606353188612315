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

// Joint product embeddings on top of frozen modality encoders: linear
// similarity combination, the cross interaction unit (linear + residual
// similarity), the compressed single-vector embedding, the bucketized
// cross-feature baseline and the "+" ensemble with co-purchase logits.

#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "c2v/cf.hpp"
#include "c2v/core_math.hpp"
#include "c2v/data.hpp"
#include "c2v/image.hpp"
#include "c2v/text.hpp"
#include "c2v/toml.hpp"
#include "c2v/training.hpp"

namespace c2v {

enum class Modality { image, text, cf };

inline const char* modality_name(Modality m) {
  switch (m) {
    case Modality::image: return "image";
    case Modality::text: return "text";
    case Modality::cf: return "cf";
  }
  return "?";
}

// Frozen modality vectors of one product, in (image, text, cf) order.
struct ModalityVectorSet {
  std::optional<DenseVector> image;
  std::optional<DenseVector> text;
  std::optional<DenseVector> cf;

  DenseVector concat() const {
    DenseVector out;
    for (const auto* v : {&image, &text, &cf}) {
      if (*v) out.insert(out.end(), (*v)->begin(), (*v)->end());
    }
    return out;
  }
};

// Per-product modality vectors of a whole catalog, computed once from frozen
// encoders, with each modality's calibrated similarity. The concatenated
// representation rescales every block to unit mean squared norm over the
// catalog so that no modality dominates the fused layers by scale alone.
struct ModalityInputs {
  std::vector<Modality> modalities;
  std::vector<DenseMatrix> vectors;  // per modality: n_products x d_m
  std::vector<double> alpha;
  std::vector<double> beta;
  std::vector<double> block_scale;
  std::vector<std::uint8_t> cf_present;  // per product; all 1 without cf
  DenseMatrix concat;                    // n_products x d_concat

  std::size_t size() const { return modalities.size(); }
  std::size_t n_products() const { return concat.rows; }
  std::size_t concat_dim() const { return concat.cols; }
  std::span<const double> concat_row(ProductIndex p) const { return concat.row(p); }

  // Calibrated logit of modality m; a missing cf vector scores 0.
  double sim(std::size_t m, ProductIndex a, ProductIndex b) const {
    if (modalities[m] == Modality::cf && (cf_present[a] == 0 || cf_present[b] == 0)) return 0.0;
    return alpha[m] * inner_product(vectors[m].row(a), vectors[m].row(b)) + beta[m];
  }

  DenseVector sims(ProductIndex a, ProductIndex b) const {
    DenseVector s(size());
    for (std::size_t m = 0; m < size(); ++m) s[m] = sim(m, a, b);
    return s;
  }

  void add(Modality m, DenseMatrix v, double a, double b) {
    modalities.push_back(m);
    vectors.push_back(std::move(v));
    alpha.push_back(a);
    beta.push_back(b);
  }

  // Builds block_scale and concat from `vectors`.
  void finalize() {
    if (modalities.empty()) fail<ConfigError>("fusion needs at least one modality");
    const std::size_t n = vectors.front().rows;
    std::size_t width = 0;
    block_scale.clear();
    for (const auto& v : vectors) {
      check_dims(v.rows, n, "modality inputs (products)");
      width += v.cols;
      double ms = 0.0;
      for (std::size_t p = 0; p < n; ++p) ms += squared_norm(v.row(p));
      ms /= static_cast<double>(std::max<std::size_t>(n, 1));
      block_scale.push_back(ms > 0.0 ? 1.0 / std::sqrt(ms) : 1.0);
    }
    if (cf_present.empty()) cf_present.assign(n, 1);
    concat = DenseMatrix(n, width);
    for (std::size_t p = 0; p < n; ++p) {
      auto dst = concat.row(p);
      std::size_t off = 0;
      for (std::size_t m = 0; m < vectors.size(); ++m) {
        const auto src = vectors[m].row(p);
        for (std::size_t k = 0; k < src.size(); ++k) dst[off + k] = src[k] * block_scale[m];
        off += src.size();
      }
    }
  }
};

struct Encoders {
  const ImageHead* image = nullptr;
  const TextEncoder* text = nullptr;
  const WordEmbeddings* words = nullptr;
  const CFEmbeddings* cf = nullptr;
};

// Runs every available frozen encoder over the catalog.
inline ModalityInputs build_modality_inputs(const Catalog& catalog, const Encoders& enc) {
  ModalityInputs in;
  const std::size_t n = catalog.size();
  if (enc.image) {
    DenseMatrix v(n, enc.image->output_dim());
    for (std::size_t p = 0; p < n; ++p) {
      const DenseVector e = embed_image(*enc.image, catalog[static_cast<ProductIndex>(p)].image_features);
      std::copy(e.begin(), e.end(), v.row(p).begin());
    }
    in.add(Modality::image, std::move(v), enc.image->alpha, enc.image->beta);
  }
  if (enc.text) {
    if (!enc.words) fail<ConfigError>("text encoder given without word embeddings");
    DenseMatrix v(n, enc.text->output_dim());
    for (std::size_t p = 0; p < n; ++p) {
      const TokenIds ids =
          encode_tokens(*enc.words, catalog[static_cast<ProductIndex>(p)].tokens, enc.text->max_len);
      const DenseVector e = embed_ids(*enc.text, enc.words->vectors, ids);
      std::copy(e.begin(), e.end(), v.row(p).begin());
    }
    in.add(Modality::text, std::move(v), enc.text->alpha, enc.text->beta);
  }
  if (enc.cf) {
    check_dims(enc.cf->product_vectors.rows, n, "cf embeddings (products)");
    in.cf_present = enc.cf->trained;
    in.add(Modality::cf, enc.cf->product_vectors, enc.cf->alpha, enc.cf->beta);
  }
  in.finalize();
  return in;
}

// ---------------------------------------------------------------------------
// Linear

struct LinearFusion {
  DenseVector w;

  template <class Self>
  static auto params(Self& self) {
    return std::vector{view("w", self.w)};
  }
  static LinearFusion initialize(std::size_t n_modalities) {
    return {DenseVector(n_modalities, 1.0 / static_cast<double>(n_modalities))};
  }
  bool operator==(const LinearFusion&) const = default;
};

inline double sim_linear(const LinearFusion& f, std::span<const double> sims) {
  check_dims(sims.size(), f.w.size(), "sim_linear (modalities)");
  return inner_product(f.w, sims);
}

struct LinearTask {
  using Model = LinearFusion;
  const ModalityInputs* inputs = nullptr;

  double logit(const LinearFusion& m, ProductIndex a, ProductIndex b) const {
    return sim_linear(m, inputs->sims(a, b));
  }
  double loss_and_grad(const LinearFusion& m, const LabeledPair& ex, LinearFusion& g) const {
    const DenseVector s = inputs->sims(ex.a, ex.b);
    const double z = sim_linear(m, s);
    const double dz = logistic_pair_loss_grad(z, ex.label, ex.count);
    for (std::size_t i = 0; i < s.size(); ++i) g.w[i] += dz * s[i];
    return logistic_pair_loss(z, ex.label, ex.count);
  }
};

// ---------------------------------------------------------------------------
// Cross interaction unit

struct CIUFusion {
  DenseVector w;  // per modality
  double w_res = 0.0;
  DenseMatrix f_w;  // d_res x d_concat
  DenseVector f_b;
  double alpha_res = 1.0;
  double beta_res = 0.0;

  template <class Self>
  static auto params(Self& self) {
    return std::vector{view("w", self.w),         view("w_res", self.w_res),
                       view("f_w", self.f_w),     view("f_b", self.f_b),
                       view("alpha_res", self.alpha_res), view("beta_res", self.beta_res)};
  }

  // Starts as the uniform linear model with a dormant residual:
  // w_m = 1/|M|, w_res = 0, F_W ~ N(0, 1/sqrt(d_concat)), F_b = 0.
  static CIUFusion initialize(std::size_t n_modalities, std::size_t d_concat, std::size_t d_res,
                              std::uint64_t seed) {
    if (d_res == 0 || d_concat == 0) fail<ConfigError>("CIU dimensions must be positive");
    Rng rng(seed);
    CIUFusion f;
    f.w.assign(n_modalities, 1.0 / static_cast<double>(n_modalities));
    f.f_w = DenseMatrix::gaussian(d_res, d_concat, 1.0 / std::sqrt(static_cast<double>(d_concat)),
                                  rng);
    f.f_b.assign(d_res, 0.0);
    return f;
  }
  bool operator==(const CIUFusion&) const = default;
};

inline double residual_logit(const CIUFusion& f, std::span<const double> x1,
                             std::span<const double> x2) {
  return f.alpha_res *
             inner_product(relu_layer_forward(f.f_w, f.f_b, x1), relu_layer_forward(f.f_w, f.f_b, x2)) +
         f.beta_res;
}

// sum_m w_m sim_m + w_res * (alpha_res <F(x1), F(x2)> + beta_res).
inline double sim_ciu(const CIUFusion& f, std::span<const double> x1, std::span<const double> x2,
                      std::span<const double> sims) {
  check_dims(sims.size(), f.w.size(), "sim_ciu (modalities)");
  check_dims(x1.size(), f.f_w.cols, "sim_ciu (X1 concat)");
  check_dims(x2.size(), f.f_w.cols, "sim_ciu (X2 concat)");
  const double linear = inner_product(f.w, sims);
  if (f.w_res == 0.0) return linear;
  return linear + f.w_res * residual_logit(f, x1, x2);
}

inline double sim_ciu(const CIUFusion& f, const ModalityVectorSet& x1, const ModalityVectorSet& x2,
                      std::span<const double> sims) {
  return sim_ciu(f, x1.concat(), x2.concat(), sims);
}

struct CIUTask {
  using Model = CIUFusion;
  const ModalityInputs* inputs = nullptr;

  double logit(const CIUFusion& m, ProductIndex a, ProductIndex b) const {
    return sim_ciu(m, inputs->concat_row(a), inputs->concat_row(b), inputs->sims(a, b));
  }

  double loss_and_grad(const CIUFusion& m, const LabeledPair& ex, CIUFusion& g) const {
    const auto xa = inputs->concat_row(ex.a);
    const auto xb = inputs->concat_row(ex.b);
    const DenseVector s = inputs->sims(ex.a, ex.b);
    const DenseVector pre_a = affine(m.f_w, m.f_b, xa);
    const DenseVector pre_b = affine(m.f_w, m.f_b, xb);
    DenseVector za(pre_a.size());
    DenseVector zb(pre_b.size());
    for (std::size_t i = 0; i < za.size(); ++i) {
      za[i] = std::max(0.0, pre_a[i]);
      zb[i] = std::max(0.0, pre_b[i]);
    }
    const double q = inner_product(za, zb);
    const double r = m.alpha_res * q + m.beta_res;
    const double z = inner_product(m.w, s) + m.w_res * r;
    const double dz = logistic_pair_loss_grad(z, ex.label, ex.count);
    for (std::size_t i = 0; i < s.size(); ++i) g.w[i] += dz * s[i];
    g.w_res += dz * r;
    g.alpha_res += dz * m.w_res * q;
    g.beta_res += dz * m.w_res;
    const double c = dz * m.w_res * m.alpha_res;
    if (c != 0.0) {
      DenseVector up_a(zb.size());
      DenseVector up_b(za.size());
      for (std::size_t i = 0; i < za.size(); ++i) {
        up_a[i] = c * zb[i];
        up_b[i] = c * za[i];
      }
      relu_layer_backward_accumulate(m.f_w, xa, pre_a, up_a, g.f_w, g.f_b, {});
      relu_layer_backward_accumulate(m.f_w, xb, pre_b, up_b, g.f_w, g.f_b, {});
    }
    return logistic_pair_loss(z, ex.label, ex.count);
  }
};

// ---------------------------------------------------------------------------
// Compressed single-vector embedding

struct CompressedFusion {
  DenseMatrix c_w;  // d_z x d_concat
  DenseVector c_b;
  double alpha_z = 1.0;
  double beta_z = 0.0;
  std::vector<ProductIndex> sources;  // products whose vectors seeded c_w

  template <class Self>
  static auto params(Self& self) {
    return std::vector{view("c_w", self.c_w), view("c_b", self.c_b), view("alpha_z", self.alpha_z),
                       view("beta_z", self.beta_z)};
  }
  bool operator==(const CompressedFusion& o) const {
    return c_w == o.c_w && c_b == o.c_b && alpha_z == o.alpha_z && beta_z == o.beta_z;
  }
};

inline DenseVector embed_compressed(const CompressedFusion& f, std::span<const double> concat) {
  check_dims(concat.size(), f.c_w.cols, "embed_compressed (concat)");
  return relu_layer_forward(f.c_w, f.c_b, concat);
}

inline DenseVector embed_compressed(const CompressedFusion& f, const ModalityVectorSet& x) {
  return embed_compressed(f, x.concat());
}

inline double compressed_pair_logit(const CompressedFusion& f, std::span<const double> x1,
                                    std::span<const double> x2) {
  return f.alpha_z * inner_product(embed_compressed(f, x1), embed_compressed(f, x2)) + f.beta_z;
}

// Rows of C_W are the unit-normalized joint representations of d_z products
// sampled without replacement; C_b = 0. alpha_z is set to the inverse mean
// squared norm of the source products' outputs, beta_z = 0.
inline CompressedFusion init_compressed_from_products(const ModalityInputs& inputs,
                                                      std::size_t d_z, std::uint64_t seed) {
  const std::size_t n = inputs.n_products();
  if (d_z == 0) fail<ConfigError>("d_z must be positive");
  if (d_z > n) fail("init_compressed_from_products: d_z=", d_z, " exceeds catalog size ", n);
  std::vector<ProductIndex> all(n);
  std::iota(all.begin(), all.end(), 0);
  Rng rng(seed);
  std::vector<ProductIndex> picked;
  std::sample(all.begin(), all.end(), std::back_inserter(picked), d_z, rng);
  std::shuffle(picked.begin(), picked.end(), rng);

  CompressedFusion f;
  f.c_w = DenseMatrix(d_z, inputs.concat_dim());
  f.c_b.assign(d_z, 0.0);
  for (std::size_t j = 0; j < d_z; ++j) {
    const auto src = inputs.concat_row(picked[j]);
    const double norm = std::sqrt(squared_norm(src));
    if (!(norm > 0.0)) fail<NumericError>("source product ", picked[j], " has a zero representation");
    auto row = f.c_w.row(j);
    for (std::size_t k = 0; k < src.size(); ++k) row[k] = src[k] / norm;
  }
  f.sources = picked;
  double mean_sq = 0.0;
  for (ProductIndex p : picked) mean_sq += squared_norm(embed_compressed(f, inputs.concat_row(p)));
  mean_sq /= static_cast<double>(d_z);
  f.alpha_z = mean_sq > 0.0 ? 1.0 / mean_sq : 1.0;
  return f;
}

struct CompressedTask {
  using Model = CompressedFusion;
  const ModalityInputs* inputs = nullptr;

  double logit(const CompressedFusion& m, ProductIndex a, ProductIndex b) const {
    return compressed_pair_logit(m, inputs->concat_row(a), inputs->concat_row(b));
  }

  double loss_and_grad(const CompressedFusion& m, const LabeledPair& ex, CompressedFusion& g) const {
    const auto xa = inputs->concat_row(ex.a);
    const auto xb = inputs->concat_row(ex.b);
    const DenseVector pre_a = affine(m.c_w, m.c_b, xa);
    const DenseVector pre_b = affine(m.c_w, m.c_b, xb);
    DenseVector za(pre_a.size());
    DenseVector zb(pre_b.size());
    for (std::size_t i = 0; i < za.size(); ++i) {
      za[i] = std::max(0.0, pre_a[i]);
      zb[i] = std::max(0.0, pre_b[i]);
    }
    const double q = inner_product(za, zb);
    const double z = m.alpha_z * q + m.beta_z;
    const double dz = logistic_pair_loss_grad(z, ex.label, ex.count);
    g.alpha_z += dz * q;
    g.beta_z += dz;
    DenseVector up_a(zb.size());
    DenseVector up_b(za.size());
    for (std::size_t i = 0; i < za.size(); ++i) {
      up_a[i] = dz * m.alpha_z * zb[i];
      up_b[i] = dz * m.alpha_z * za[i];
    }
    relu_layer_backward_accumulate(m.c_w, xa, pre_a, up_a, g.c_w, g.c_b, {});
    relu_layer_backward_accumulate(m.c_w, xb, pre_b, up_b, g.c_w, g.c_b, {});
    return logistic_pair_loss(z, ex.label, ex.count);
  }
};

// ---------------------------------------------------------------------------
// Bucketized cross features over two modality logits

// Bucket index of x: the number of boundaries <= x.
inline std::size_t bucket_of(std::span<const double> boundaries, double x) {
  return static_cast<std::size_t>(std::upper_bound(boundaries.begin(), boundaries.end(), x) -
                                  boundaries.begin());
}

// Distinct order statistics sorted[floor(k n / B)], k = 1..B-1. A statistic
// equal to the sample minimum moves up to the next distinct value, so every
// bucket below the last boundary is non-empty. Repeated values collapse, so
// heavily tied logits yield fewer than B buckets.
inline DenseVector quantile_boundaries(std::vector<double> values, std::size_t n_buckets,
                                       std::string_view what = "logits") {
  if (n_buckets == 0) fail<ConfigError>("n_buckets must be positive");
  if (values.empty()) fail("quantile boundaries of an empty sample");
  std::sort(values.begin(), values.end());
  if (n_buckets > 1 && !(values.back() > values.front())) {
    fail("degenerate quantiles for ", what, ": constant values");
  }
  DenseVector b;
  for (std::size_t k = 1; k < n_buckets; ++k) {
    double q = values[k * values.size() / n_buckets];
    if (q == values.front()) q = *std::upper_bound(values.begin(), values.end(), q);
    if (b.empty() || q > b.back()) b.push_back(q);
  }
  return b;
}

struct CrossfeatFusion {
  DenseVector boundaries_a;  // first modality
  DenseVector boundaries_b;  // second modality
  DenseVector w_a;           // B_a single-bucket weights
  DenseVector w_b;           // B_b
  DenseVector w_ab;          // B_a * B_b conjunctions, row-major in (bucket_a, bucket_b)
  double bias = 0.0;

  std::size_t buckets_a() const { return boundaries_a.size() + 1; }
  std::size_t buckets_b() const { return boundaries_b.size() + 1; }

  template <class Self>
  static auto params(Self& self) {
    return std::vector{view("w_a", self.w_a), view("w_b", self.w_b), view("w_ab", self.w_ab),
                       view("bias", self.bias)};
  }
  bool operator==(const CrossfeatFusion&) const = default;
};

inline double crossfeat_logit(const CrossfeatFusion& f, double sim_a, double sim_b) {
  const std::size_t i = bucket_of(f.boundaries_a, sim_a);
  const std::size_t j = bucket_of(f.boundaries_b, sim_b);
  return f.bias + f.w_a[i] + f.w_b[j] + f.w_ab[i * f.buckets_b() + j];
}

struct CrossfeatTask {
  using Model = CrossfeatFusion;
  const ModalityInputs* inputs = nullptr;

  double logit(const CrossfeatFusion& m, ProductIndex a, ProductIndex b) const {
    return crossfeat_logit(m, inputs->sim(0, a, b), inputs->sim(1, a, b));
  }
  double loss_and_grad(const CrossfeatFusion& m, const LabeledPair& ex, CrossfeatFusion& g) const {
    const std::size_t i = bucket_of(m.boundaries_a, inputs->sim(0, ex.a, ex.b));
    const std::size_t j = bucket_of(m.boundaries_b, inputs->sim(1, ex.a, ex.b));
    const double z = m.bias + m.w_a[i] + m.w_b[j] + m.w_ab[i * m.buckets_b() + j];
    const double dz = logistic_pair_loss_grad(z, ex.label, ex.count);
    g.bias += dz;
    g.w_a[i] += dz;
    g.w_b[j] += dz;
    g.w_ab[i * m.buckets_b() + j] += dz;
    return logistic_pair_loss(z, ex.label, ex.count);
  }
};

// ---------------------------------------------------------------------------
// Ensemble with co-purchase logits

struct EnsembleWeights {
  double w_content = 1.0;
  double w_cf = 0.0;
  double bias = 0.0;

  template <class Self>
  static auto params(Self& self) {
    return std::vector{view("w_content", self.w_content), view("w_cf", self.w_cf),
                       view("bias", self.bias)};
  }
  bool operator==(const EnsembleWeights&) const = default;
};

// Falls back to the raw content logit when the cf logit is absent.
inline double ensemble_plus(double content_logit, std::optional<double> cf_logit,
                            const EnsembleWeights& e) {
  if (!cf_logit) return content_logit;
  return e.w_content * content_logit + e.w_cf * *cf_logit + e.bias;
}

// Logistic regression over (content, cf) on the examples where cf exists.
// Leaves the pass-through weights when those examples lack a class.
inline EnsembleWeights fit_ensemble(const std::vector<double>& content,
                                    const std::vector<std::optional<double>>& cf,
                                    const std::vector<Label>& labels) {
  std::vector<std::vector<double>> x;
  std::vector<Label> y;
  bool has_pos = false;
  bool has_neg = false;
  for (std::size_t i = 0; i < content.size(); ++i) {
    if (!cf[i]) continue;
    x.push_back({content[i], *cf[i]});
    y.push_back(labels[i]);
    (labels[i] == Label::positive ? has_pos : has_neg) = true;
  }
  if (!has_pos || !has_neg) return {};
  const auto w = fit_logistic_regression(x, y, 1e-3);
  return {w[0], w[1], w[2]};
}

// ---------------------------------------------------------------------------
// Configuration and trainers

enum class FusionKind { linear, ciu, compressed, crossfeat };

inline const char* fusion_kind_name(FusionKind k) {
  switch (k) {
    case FusionKind::linear: return "linear";
    case FusionKind::ciu: return "ciu";
    case FusionKind::compressed: return "compressed";
    case FusionKind::crossfeat: return "crossfeat";
  }
  return "?";
}

inline FusionKind parse_fusion_kind(std::string_view s) {
  if (s == "linear") return FusionKind::linear;
  if (s == "ciu" || s == "perf") return FusionKind::ciu;
  if (s == "compressed") return FusionKind::compressed;
  if (s == "crossfeat") return FusionKind::crossfeat;
  fail<UsageError>("unknown fusion kind `", s, "` (linear, ciu, compressed, crossfeat)");
}

struct FusionConfig {
  std::size_t d_res = 128;
  std::size_t d_z = 200;
  std::size_t n_buckets = 8;
  bool use_cf = false;  // feed cf vectors into the fused input
  TrainConfig train;

  static FusionConfig from_table(const toml::FlatTable& t, const TrainConfig& base) {
    FusionConfig c;
    c.d_res = t.get_or("d_res", c.d_res);
    c.d_z = t.get_or("d_z", c.d_z);
    c.n_buckets = t.get_or("n_buckets", c.n_buckets);
    c.use_cf = t.get_or("fusion_use_cf", c.use_cf);
    c.train = base;
    c.train.learning_rate = t.get_or("fusion_learning_rate", base.learning_rate);
    return c;
  }
};

inline constexpr std::uint64_t kFusionInitStream = 0x667573696f6eULL;

inline TrainResult<LinearFusion> train_linear(const ModalityInputs& inputs,
                                              const DatasetSplit& split,
                                              const FusionConfig& config) {
  const SplitContext ctx = make_split_context(split, config.train);
  return train_pairwise(LinearTask{&inputs}, LinearFusion::initialize(inputs.size()),
                        ctx.data(split.train), config.train);
}

inline TrainResult<CIUFusion> train_ciu(const ModalityInputs& inputs, const DatasetSplit& split,
                                        const FusionConfig& config) {
  const SplitContext ctx = make_split_context(split, config.train);
  CIUFusion init = CIUFusion::initialize(inputs.size(), inputs.concat_dim(), config.d_res,
                                         derive_seed(config.train.seed, kFusionInitStream, 1));
  return train_pairwise(CIUTask{&inputs}, std::move(init), ctx.data(split.train), config.train);
}

inline TrainResult<CompressedFusion> train_compressed(const ModalityInputs& inputs,
                                                      CompressedFusion init,
                                                      const DatasetSplit& split,
                                                      const FusionConfig& config) {
  const SplitContext ctx = make_split_context(split, config.train);
  return train_pairwise(CompressedTask{&inputs}, std::move(init), ctx.data(split.train),
                        config.train);
}

inline TrainResult<CompressedFusion> train_compressed(const ModalityInputs& inputs,
                                                      const DatasetSplit& split,
                                                      const FusionConfig& config) {
  return train_compressed(
      inputs,
      init_compressed_from_products(inputs, config.d_z,
                                    derive_seed(config.train.seed, kFusionInitStream, 2)),
      split, config);
}

// Boundaries from the quantiles of both content logits over training
// positives plus one seed-derived negative sample; weights by Adam on the
// logistic loss.
inline TrainResult<CrossfeatFusion> fit_crossfeat(const ModalityInputs& inputs,
                                                  const DatasetSplit& split,
                                                  const FusionConfig& config) {
  if (inputs.size() < 2) fail<ConfigError>("crossfeat needs two content modalities");
  const SplitContext ctx = make_split_context(split, config.train);
  const NegativeSampler sampler(split.train, config.train.freq_power);
  const LabeledBatch sample =
      sample_negatives_keyed(split.train, config.train.neg_ratio, sampler, ctx.train_keys,
                             derive_seed(config.train.seed, kFusionInitStream, 3));
  std::vector<double> sa;
  std::vector<double> sb;
  for (const auto& ex : sample) {
    sa.push_back(inputs.sim(0, ex.a, ex.b));
    sb.push_back(inputs.sim(1, ex.a, ex.b));
  }
  CrossfeatFusion f;
  f.boundaries_a = quantile_boundaries(std::move(sa), config.n_buckets,
                                       modality_name(inputs.modalities[0]));
  f.boundaries_b = quantile_boundaries(std::move(sb), config.n_buckets,
                                       modality_name(inputs.modalities[1]));
  f.w_a.assign(f.buckets_a(), 0.0);
  f.w_b.assign(f.buckets_b(), 0.0);
  f.w_ab.assign(f.buckets_a() * f.buckets_b(), 0.0);
  return train_pairwise(CrossfeatTask{&inputs}, std::move(f), ctx.data(split.train), config.train);
}

// ---------------------------------------------------------------------------
// A trained fusion of any kind, scored over precomputed modality inputs.

struct FusionModel {
  FusionKind kind = FusionKind::linear;
  LinearFusion linear;
  CIUFusion ciu;
  CompressedFusion compressed;
  CrossfeatFusion crossfeat;

  double logit(const ModalityInputs& in, ProductIndex a, ProductIndex b) const {
    switch (kind) {
      case FusionKind::linear: return LinearTask{&in}.logit(linear, a, b);
      case FusionKind::ciu: return CIUTask{&in}.logit(ciu, a, b);
      case FusionKind::compressed: return CompressedTask{&in}.logit(compressed, a, b);
      case FusionKind::crossfeat: return CrossfeatTask{&in}.logit(crossfeat, a, b);
    }
    return 0.0;
  }
};

}  // namespace c2v
