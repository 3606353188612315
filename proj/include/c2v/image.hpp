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

// Image modality: a trainable fully-connected ReLU head over fixed,
// precomputed image feature vectors.

#pragma once

#include <cstdint>
#include <vector>

#include "c2v/core_math.hpp"
#include "c2v/data.hpp"
#include "c2v/toml.hpp"
#include "c2v/training.hpp"

namespace c2v {

struct ImageHead {
  DenseMatrix w;  // d_img_out x d_img_in
  DenseVector b;
  double alpha = 1.0;
  double beta = 0.0;

  std::size_t input_dim() const { return w.cols; }
  std::size_t output_dim() const { return w.rows; }

  template <class Self>
  static auto params(Self& self) {
    return std::vector{view("w", self.w), view("b", self.b), view("alpha", self.alpha),
                       view("beta", self.beta)};
  }

  // W ~ N(0, 1/sqrt(d_in)), b = 0, alpha = 1, beta = 0.
  static ImageHead initialize(std::size_t d_in, std::size_t d_out, std::uint64_t seed) {
    if (d_in == 0 || d_out == 0) fail<ConfigError>("image head dimensions must be positive");
    Rng rng(seed);
    ImageHead h;
    h.w = DenseMatrix::gaussian(d_out, d_in, 1.0 / std::sqrt(static_cast<double>(d_in)), rng);
    h.b.assign(d_out, 0.0);
    return h;
  }

  bool operator==(const ImageHead&) const = default;
};

inline DenseVector embed_image(const ImageHead& head, std::span<const double> features) {
  check_dims(features.size(), head.input_dim(), "embed_image (features)");
  return relu_layer_forward(head.w, head.b, features);
}

inline double image_pair_logit(const ImageHead& head, std::span<const double> feat_a,
                               std::span<const double> feat_b) {
  return head.alpha * inner_product(embed_image(head, feat_a), embed_image(head, feat_b)) +
         head.beta;
}

struct ImageConfig {
  std::size_t d_out = 4096;
  TrainConfig train;

  static ImageConfig from_table(const toml::FlatTable& t, const TrainConfig& base) {
    ImageConfig c;
    c.d_out = t.get_or<std::size_t>("d_img_out", c.d_out);
    c.train = base;
    c.train.learning_rate = t.get_or("image_learning_rate", base.learning_rate);
    return c;
  }
};

// Siamese pair task over catalog features; one head encodes both sides.
struct ImagePairTask {
  using Model = ImageHead;
  const Catalog* catalog = nullptr;

  double logit(const ImageHead& m, ProductIndex a, ProductIndex b) const {
    return image_pair_logit(m, (*catalog)[a].image_features, (*catalog)[b].image_features);
  }

  double loss_and_grad(const ImageHead& m, const LabeledPair& ex, ImageHead& g) const {
    const auto& xa = (*catalog)[ex.a].image_features;
    const auto& xb = (*catalog)[ex.b].image_features;
    const DenseVector pre_a = affine(m.w, m.b, xa);
    const DenseVector pre_b = affine(m.w, m.b, xb);
    DenseVector ea(pre_a.size());
    DenseVector eb(pre_b.size());
    for (std::size_t i = 0; i < ea.size(); ++i) {
      ea[i] = std::max(0.0, pre_a[i]);
      eb[i] = std::max(0.0, pre_b[i]);
    }
    const double s = inner_product(ea, eb);
    const double z = m.alpha * s + m.beta;
    const double dz = logistic_pair_loss_grad(z, ex.label, ex.count);
    g.alpha += dz * s;
    g.beta += dz;
    DenseVector up_a(eb.size());
    DenseVector up_b(ea.size());
    for (std::size_t i = 0; i < ea.size(); ++i) {
      up_a[i] = dz * m.alpha * eb[i];
      up_b[i] = dz * m.alpha * ea[i];
    }
    relu_layer_backward_accumulate(m.w, xa, pre_a, up_a, g.w, g.b, {});
    relu_layer_backward_accumulate(m.w, xb, pre_b, up_b, g.w, g.b, {});
    return logistic_pair_loss(z, ex.label, ex.count);
  }
};

inline constexpr std::uint64_t kImageInitStream = 0x696d616765ULL;

inline TrainResult<ImageHead> train_image_head(const Catalog& catalog, const DatasetSplit& split,
                                               const ImageConfig& config) {
  if (split.train.empty()) fail("train_image_head: empty training split");
  const ImagePairTask task{&catalog};
  const SplitContext ctx = make_split_context(split, config.train);
  ImageHead init = ImageHead::initialize(catalog.image_dim(), config.d_out,
                                         derive_seed(config.train.seed, kImageInitStream));
  return train_pairwise(task, std::move(init), ctx.data(split.train), config.train);
}

}  // namespace c2v
