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

// Pairwise logistic loss, negative-sampling epochs, early stopping and the
// generic mini-batch Adam trainer shared by every siamese model.

#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <functional>
#include <numeric>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "c2v/core_math.hpp"
#include "c2v/data.hpp"
#include "c2v/metrics.hpp"
#include "c2v/toml.hpp"

namespace c2v {

struct TrainConfig {
  double learning_rate = 0.01;
  std::size_t batch_size = 256;
  std::size_t max_epochs = 30;
  std::size_t patience = 3;
  double neg_ratio = 2.0;
  double freq_power = 0.75;
  std::uint64_t seed = 1;

  void validate() const {
    if (!(learning_rate >= 0.0)) fail<ConfigError>("learning_rate must be >= 0");
    if (batch_size < 1) fail<ConfigError>("batch_size must be >= 1");
    if (patience < 1) fail<ConfigError>("patience must be >= 1");
    if (!(neg_ratio > 0.0)) fail<ConfigError>("neg_ratio must be > 0");
    if (!(freq_power >= 0.0)) fail<ConfigError>("freq_power must be >= 0");
  }

  static TrainConfig from_table(const toml::FlatTable& t, TrainConfig base) {
    base.learning_rate = t.get_or("learning_rate", base.learning_rate);
    base.batch_size = t.get_or("batch_size", base.batch_size);
    base.max_epochs = t.get_or("max_epochs", base.max_epochs);
    base.patience = t.get_or("patience", base.patience);
    base.neg_ratio = t.get_or("neg_ratio", base.neg_ratio);
    base.freq_power = t.get_or("freq_power", base.freq_power);
    base.seed = t.get_or<std::uint64_t>("seed", base.seed);
    base.validate();
    return base;
  }
  static TrainConfig from_table(const toml::FlatTable& t) { return from_table(t, TrainConfig{}); }
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_metric = 0.0;
};

struct TrainingLog {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 0 when nothing was trained

  void write_tsv(std::ostream& out) const {
    out << "epoch\tloss\tval_metric\n";
    for (const auto& e : epochs) {
      out << e.epoch << '\t' << e.train_loss << '\t' << e.val_metric << '\n';
    }
  }
};

// ---------------------------------------------------------------------------
// Loss

// count * -log(sigmoid(+-logit)).
inline double logistic_pair_loss(double logit, Label label, std::uint32_t count = 1) {
  const double c = static_cast<double>(count);
  return label == Label::positive ? c * softplus(-logit) : c * softplus(logit);
}

// d loss / d logit.
inline double logistic_pair_loss_grad(double logit, Label label, std::uint32_t count = 1) {
  const double c = static_cast<double>(count);
  return label == Label::positive ? c * (sigmoid(logit) - 1.0) : c * sigmoid(logit);
}

using PairScorer = std::function<double(ProductIndex, ProductIndex)>;

struct EpochLoss {
  double total = 0.0;
  std::size_t examples = 0;
  double mean() const { return examples == 0 ? 0.0 : total / static_cast<double>(examples); }
};

// Sums the loss over a labeled batch in batch order.
inline EpochLoss batch_loss(const PairScorer& scorer, const LabeledBatch& batch) {
  EpochLoss l;
  for (const LabeledPair& ex : batch) {
    l.total += logistic_pair_loss(scorer(ex.a, ex.b), ex.label, ex.count);
  }
  l.examples = batch.size();
  return l;
}

// Produces the labeled examples (positives first) of one epoch.
using BatchSource = std::function<LabeledBatch(const PairSet&)>;

// Summed and mean logistic loss over the batch `source` builds.
inline EpochLoss ns_epoch_loss(const PairScorer& scorer, const PairSet& positives,
                               const BatchSource& source) {
  if (positives.empty()) fail("ns_epoch_loss: no positive pairs");
  return batch_loss(scorer, source(positives));
}

// Negative-sampling loss of one epoch: all positives plus freshly sampled
// negatives (stream keyed by seed and epoch).
inline EpochLoss ns_epoch_loss(const PairScorer& scorer, const PairSet& positives,
                               double neg_ratio, double freq_power, const PairKeySet& forbidden,
                               std::uint64_t seed, std::uint64_t epoch) {
  return ns_epoch_loss(scorer, positives, [&](const PairSet& pos) {
    const NegativeSampler sampler(pos, freq_power);
    return sample_negatives_keyed(pos, neg_ratio, sampler, forbidden, derive_seed(seed, epoch));
  });
}

// Every unordered non-positive pair over the positives' products, as
// negatives with unit weight, after the positives.
inline LabeledBatch enumerate_all_pairs(const PairSet& positives) {
  LabeledBatch batch;
  for (const Pair& p : positives) batch.push_back({p.a, p.b, Label::positive, p.count});
  const auto products = positives.products();
  for (std::size_t i = 0; i < products.size(); ++i) {
    for (std::size_t j = i + 1; j < products.size(); ++j) {
      if (!positives.contains(products[i], products[j])) {
        batch.push_back({products[i], products[j], Label::negative, 1});
      }
    }
  }
  return batch;
}

// ---------------------------------------------------------------------------
// Early stopping

struct StopDecision {
  bool stop = false;
  std::size_t best_epoch = 0;
};

// Stop once `patience` consecutive epochs pass without a new best validation
// metric. The best epoch is the first one reaching the maximum.
inline StopDecision early_stop(const TrainingLog& log, std::size_t patience) {
  if (log.epochs.empty()) fail("early_stop: empty training log");
  std::size_t best = 0;
  for (std::size_t i = 1; i < log.epochs.size(); ++i) {
    if (log.epochs[i].val_metric > log.epochs[best].val_metric) best = i;
  }
  const std::size_t since = log.epochs.size() - 1 - best;
  return {since >= patience, log.epochs[best].epoch};
}

// ---------------------------------------------------------------------------
// Generic trainer

// A siamese pair model trained with the logistic loss. `loss_and_grad` adds
// the gradient of logistic_pair_loss(logit(a, b), label, count) with respect
// to every trainable parameter into `grad` and returns the loss.
template <class T>
concept PairTask = requires(const T& task, const typename T::Model& m, typename T::Model& g,
                            const LabeledPair& ex) {
  { task.logit(m, ex.a, ex.b) } -> std::convertible_to<double>;
  { task.loss_and_grad(m, ex, g) } -> std::convertible_to<double>;
};

struct PairTrainingData {
  const PairSet* train = nullptr;
  // Pairs never drawn as training negatives (the training positives).
  const PairKeySet* forbidden = nullptr;
  // Fixed validation positives + negatives for the stopping metric.
  const LabeledBatch* validation = nullptr;
};

template <class Model>
struct TrainResult {
  Model model;
  TrainingLog log;
};

// Fixed evaluation batch: positives of `positives` (unit weight) plus
// seed-derived negatives drawn from their products.
inline LabeledBatch make_eval_batch(const PairSet& positives, double neg_ratio, double freq_power,
                                    const PairKeySet& forbidden, std::uint64_t seed) {
  const NegativeSampler sampler(positives, freq_power);
  LabeledBatch b = sample_negatives_keyed(positives, neg_ratio, sampler, forbidden, seed);
  for (auto& ex : b) ex.count = 1;
  return b;
}

// Training-side view of a split: the keys never drawn as training negatives
// and the fixed validation batch used for early stopping.
struct SplitContext {
  PairKeySet train_keys;
  LabeledBatch validation;

  PairTrainingData data(const PairSet& train) const { return {&train, &train_keys, &validation}; }
};

inline constexpr std::uint64_t kValidationStream = 0x76616c6964ULL;

inline SplitContext make_split_context(const DatasetSplit& split, const TrainConfig& config) {
  SplitContext ctx;
  ctx.train_keys = split.train.keys();
  if (!split.validation.empty()) {
    ctx.validation = make_eval_batch(split.validation, config.neg_ratio, config.freq_power,
                                     split.all_positive_keys(),
                                     derive_seed(config.seed, kValidationStream));
  }
  return ctx;
}

template <class Scorer>
double batch_roc_auc(const Scorer& score, const LabeledBatch& batch) {
  ScoredSet s;
  s.reserve(batch.size());
  for (const auto& ex : batch) s.push_back({score(ex.a, ex.b), ex.label});
  return roc_auc(s);
}

template <PairTask Task>
TrainResult<typename Task::Model> train_pairwise(const Task& task, typename Task::Model init,
                                                 const PairTrainingData& data,
                                                 const TrainConfig& config) {
  using Model = typename Task::Model;
  config.validate();
  if (data.train == nullptr || data.train->empty()) fail("training split is empty");
  TrainResult<Model> result{std::move(init), {}};
  if (config.max_epochs == 0) return result;

  Model model = result.model;
  Model best = model;
  const NegativeSampler sampler(*data.train, config.freq_power);
  std::vector<double> flat = flatten(model);
  AdamState adam = AdamState::for_size(flat.size(), config.learning_rate);
  auto validate_metric = [&](const Model& m) {
    if (data.validation == nullptr || data.validation->empty()) return 0.0;
    return batch_roc_auc([&](ProductIndex a, ProductIndex b) { return task.logit(m, a, b); },
                         *data.validation);
  };

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    LabeledBatch batch = sample_negatives_keyed(*data.train, config.neg_ratio, sampler,
                                                *data.forbidden, derive_seed(config.seed, epoch));
    Rng shuffle_rng(derive_seed(config.seed, epoch, 0x73687566ULL));
    std::shuffle(batch.begin(), batch.end(), shuffle_rng);

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < batch.size(); start += config.batch_size) {
      const std::size_t stop = std::min(batch.size(), start + config.batch_size);
      Model grad = zeros_like(model);
      double loss = 0.0;
      for (std::size_t i = start; i < stop; ++i) loss += task.loss_and_grad(model, batch[i], grad);
      if (!std::isfinite(loss)) {
        fail<NumericError>("non-finite training loss at epoch ", epoch, ", examples [", start,
                           ", ", stop, ")");
      }
      epoch_loss += loss;
      std::vector<double> g = flatten(grad);
      const double inv = 1.0 / static_cast<double>(stop - start);
      for (double& x : g) x *= inv;
      adam_step(flat, g, adam);
      unflatten(model, flat);
    }
    if (!params_finite(model)) fail<NumericError>("non-finite parameters after epoch ", epoch);

    result.log.epochs.push_back(
        {epoch, epoch_loss / static_cast<double>(batch.size()), validate_metric(model)});
    const StopDecision d = early_stop(result.log, config.patience);
    if (d.best_epoch == epoch) best = model;
    result.log.best_epoch = d.best_epoch;
    if (d.stop) break;
  }
  result.model = std::move(best);
  return result;
}

// ---------------------------------------------------------------------------
// Small dense logistic regression (Newton / IRLS with a light ridge), used
// for calibration and ensemble weights. Returns one weight per feature
// followed by the bias.
inline std::vector<double> fit_logistic_regression(const std::vector<std::vector<double>>& x,
                                                   const std::vector<Label>& y,
                                                   double ridge = 1e-6,
                                                   std::size_t iterations = 50) {
  if (x.empty() || x.size() != y.size()) fail("fit_logistic_regression: bad input sizes");
  const std::size_t k = x.front().size() + 1;
  std::vector<double> w(k, 0.0);
  for (std::size_t it = 0; it < iterations; ++it) {
    std::vector<double> grad(k, 0.0);
    std::vector<double> hess(k * k, 0.0);
    for (std::size_t n = 0; n < x.size(); ++n) {
      double z = w[k - 1];
      for (std::size_t j = 0; j + 1 < k; ++j) z += w[j] * x[n][j];
      const double p = sigmoid(z);
      const double r = p - (y[n] == Label::positive ? 1.0 : 0.0);
      const double s = std::max(p * (1.0 - p), 1e-12);
      for (std::size_t i = 0; i < k; ++i) {
        const double xi = i + 1 < k ? x[n][i] : 1.0;
        grad[i] += r * xi;
        for (std::size_t j = 0; j < k; ++j) {
          const double xj = j + 1 < k ? x[n][j] : 1.0;
          hess[i * k + j] += s * xi * xj;
        }
      }
    }
    for (std::size_t i = 0; i < k; ++i) {
      grad[i] += ridge * w[i];
      hess[i * k + i] += ridge;
    }
    // Solve hess * step = grad by Gaussian elimination with partial pivoting.
    std::vector<double> step = grad;
    std::vector<double> a = hess;
    for (std::size_t c = 0; c < k; ++c) {
      std::size_t piv = c;
      for (std::size_t r = c + 1; r < k; ++r) {
        if (std::abs(a[r * k + c]) > std::abs(a[piv * k + c])) piv = r;
      }
      if (std::abs(a[piv * k + c]) < 1e-300) fail<NumericError>("singular logistic Hessian");
      if (piv != c) {
        for (std::size_t j = 0; j < k; ++j) std::swap(a[c * k + j], a[piv * k + j]);
        std::swap(step[c], step[piv]);
      }
      for (std::size_t r = c + 1; r < k; ++r) {
        const double f = a[r * k + c] / a[c * k + c];
        for (std::size_t j = c; j < k; ++j) a[r * k + j] -= f * a[c * k + j];
        step[r] -= f * step[c];
      }
    }
    for (std::size_t c = k; c-- > 0;) {
      for (std::size_t j = c + 1; j < k; ++j) step[c] -= a[c * k + j] * step[j];
      step[c] /= a[c * k + c];
    }
    double change = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      w[i] -= step[i];
      change = std::max(change, std::abs(step[i]));
    }
    if (!all_finite(w)) fail<NumericError>("logistic regression diverged");
    if (change < 1e-10) break;
  }
  return w;
}

}  // namespace c2v
