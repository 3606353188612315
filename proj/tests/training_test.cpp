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
#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>

#include "c2v/training.hpp"

namespace c2v {
namespace {

TEST(LogisticPairLoss, Examples) {
  EXPECT_NEAR(logistic_pair_loss(0.0, Label::positive), std::log(2.0), 1e-15);
  EXPECT_NEAR(logistic_pair_loss(0.0, Label::negative), 0.6931471805599453, 1e-15);
  EXPECT_LT(logistic_pair_loss(40.0, Label::positive), 1e-15);
  // 3 * log(1 + e^2), 40-digit decimal evaluation.
  EXPECT_NEAR(logistic_pair_loss(2.0, Label::negative, 3), 6.380784033128917, 1e-12);
  EXPECT_NEAR(logistic_pair_loss(2.0, Label::negative, 3), 6.3808, 1e-4);
  EXPECT_TRUE(std::isfinite(logistic_pair_loss(-800.0, Label::positive)));
  EXPECT_NEAR(logistic_pair_loss(-800.0, Label::positive), 800.0, 1e-9);
}

TEST(LogisticPairLoss, LabelSymmetryIsExact) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 10.0);
  for (int i = 0; i < 1000; ++i) {
    const double x = n(rng);
    EXPECT_EQ(logistic_pair_loss(x, Label::positive), logistic_pair_loss(-x, Label::negative));
  }
}

TEST(LogisticPairLoss, GradientMatchesFiniteDifference) {
  for (double x : {-5.0, -0.3, 0.0, 0.7, 4.0}) {
    for (Label y : {Label::positive, Label::negative}) {
      const double h = 1e-6;
      const double fd =
          (logistic_pair_loss(x + h, y, 2) - logistic_pair_loss(x - h, y, 2)) / (2 * h);
      EXPECT_NEAR(logistic_pair_loss_grad(x, y, 2), fd, 1e-8);
    }
  }
}

// Exact summed loss over every unordered pair of the products: observed
// pairs weighted by their count, unobserved ones by 1.
double exact_loss(const PairScorer& s, const PairSet& pos, std::size_t n_products) {
  double total = 0.0;
  for (ProductIndex a = 0; a < n_products; ++a) {
    for (ProductIndex b = a + 1; b < n_products; ++b) {
      double x_pos = 0.0;
      for (const Pair& p : pos) {
        if (p.a == a && p.b == b) x_pos = p.count;
      }
      const double z = s(a, b);
      if (x_pos > 0) {
        total -= x_pos * std::log(1.0 / (1.0 + std::exp(-z)));
      } else {
        total -= std::log(1.0 / (1.0 + std::exp(z)));
      }
    }
  }
  return total;
}

TEST(NsEpochLoss, EnumerationEqualsExactLoss) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  int instances = 0;
  for (std::size_t n = 2; n <= 5; ++n) {
    for (int trial = 0; trial < 25; ++trial) {
      std::vector<Pair> raw;
      for (ProductIndex a = 0; a < n; ++a) {
        for (ProductIndex b = a + 1; b < n; ++b) {
          if (rng() % 2) raw.push_back({a, b, static_cast<std::uint32_t>(1 + rng() % 4)});
        }
      }
      if (raw.empty()) raw.push_back({0, 1, 1});
      const PairSet pos = PairSet::from_pairs(raw);
      // Every product must occur for enumeration over pos.products() to span
      // the instance.
      if (pos.products().size() != n) continue;
      std::vector<double> table(n * n);
      for (double& v : table) v = u(rng);
      const PairScorer scorer = [&](ProductIndex a, ProductIndex b) {
        return table[std::min(a, b) * n + std::max(a, b)];
      };
      const EpochLoss l = ns_epoch_loss(scorer, pos, enumerate_all_pairs);
      EXPECT_NEAR(l.total, exact_loss(scorer, pos, n), 1e-10);
      EXPECT_EQ(l.examples, n * (n - 1) / 2);
      ++instances;
    }
  }
  EXPECT_GT(instances, 40);
}

TEST(NsEpochLoss, PerfectAndConstantScorers) {
  const PairSet pos = PairSet::from_pairs({{0, 1, 1}, {2, 3, 1}, {4, 5, 1}, {1, 2, 1}});
  const auto keys = pos.keys();
  const PairScorer perfect = [&](ProductIndex a, ProductIndex b) {
    return keys.count(pair_key(a, b)) ? 40.0 : -40.0;
  };
  EXPECT_LT(ns_epoch_loss(perfect, pos, 2.0, 0.75, keys, 1, 1).mean(), 1e-10);
  const PairScorer zero = [](ProductIndex, ProductIndex) { return 0.0; };
  EXPECT_NEAR(ns_epoch_loss(zero, pos, 2.0, 0.75, keys, 1, 1).mean(), std::log(2.0), 1e-15);
  EXPECT_THROW(ns_epoch_loss(zero, PairSet{}, 2.0, 0.75, keys, 1, 1), DataError);
}

TEST(NsEpochLoss, InvariantUnderPositiveOrder) {
  std::vector<Pair> raw;
  for (ProductIndex a = 0; a < 30; ++a) raw.push_back({a, a + 1 + (a * 7) % 5, 1});
  std::mt19937_64 rng(2);
  const PairScorer s = [](ProductIndex a, ProductIndex b) { return std::sin(a * 1.3 + b * 0.7); };
  const PairSet base = PairSet::from_pairs(raw);
  const double ref = ns_epoch_loss(s, base, 2.0, 0.75, base.keys(), 9, 4).total;
  for (int t = 0; t < 5; ++t) {
    std::shuffle(raw.begin(), raw.end(), rng);
    for (Pair& p : raw) std::swap(p.a, p.b);
    const PairSet shuffled = PairSet::from_pairs(raw);
    EXPECT_EQ(ns_epoch_loss(s, shuffled, 2.0, 0.75, shuffled.keys(), 9, 4).total, ref);
  }
}

TrainingLog log_of(std::vector<double> metrics) {
  TrainingLog log;
  for (std::size_t i = 0; i < metrics.size(); ++i) log.epochs.push_back({i + 1, 0.0, metrics[i]});
  return log;
}

TEST(EarlyStop, Examples) {
  const StopDecision d = early_stop(log_of({0.8, 0.7, 0.7}), 2);
  EXPECT_TRUE(d.stop);
  EXPECT_EQ(d.best_epoch, 1u);
  EXPECT_FALSE(early_stop(log_of({0.8, 0.7}), 2).stop);
  // Ties do not count as improvement; the first maximum is the best.
  EXPECT_EQ(early_stop(log_of({0.5, 0.9, 0.9, 0.9}), 5).best_epoch, 2u);
  EXPECT_THROW(early_stop(TrainingLog{}, 1), DataError);
}

TEST(EarlyStop, StrictlyImprovingNeverStops) {
  std::vector<double> m;
  for (int i = 0; i < 50; ++i) {
    m.push_back(0.5 + 0.001 * i);
    EXPECT_FALSE(early_stop(log_of(m), 1).stop);
  }
}

TEST(TrainingLog, WritesTsv) {
  TrainingLog log;
  log.epochs = {{1, 0.5, 0.75}, {2, 0.25, 0.875}};
  std::ostringstream o;
  log.write_tsv(o);
  EXPECT_EQ(o.str(), "epoch\tloss\tval_metric\n1\t0.5\t0.75\n2\t0.25\t0.875\n");
}

// Free per-product embeddings; logit = <e_a, e_b>.
struct Table {
  DenseMatrix e{1, 1};
  template <class Self>
  static auto params(Self& self) {
    return std::vector{view("e", self.e)};
  }
};

struct TableTask {
  using Model = Table;
  double logit(const Table& m, ProductIndex a, ProductIndex b) const {
    double z = 0.0;
    for (std::size_t k = 0; k < m.e.cols; ++k) z += m.e(a, k) * m.e(b, k);
    return z;
  }
  double loss_and_grad(const Table& m, const LabeledPair& ex, Table& g) const {
    const double z = logit(m, ex.a, ex.b);
    const double dz = logistic_pair_loss_grad(z, ex.label, ex.count);
    for (std::size_t k = 0; k < m.e.cols; ++k) {
      g.e(ex.a, k) += dz * m.e(ex.b, k);
      g.e(ex.b, k) += dz * m.e(ex.a, k);
    }
    return logistic_pair_loss(z, ex.label, ex.count);
  }
};

// Four cliques of ten products; every within-clique pair is positive.
DatasetSplit clique_split() {
  std::vector<Pair> raw;
  for (ProductIndex c = 0; c < 4; ++c) {
    for (ProductIndex i = 0; i < 10; ++i) {
      for (ProductIndex j = i + 1; j < 10; ++j) raw.push_back({c * 10 + i, c * 10 + j, 1});
    }
  }
  return make_soft_cold_start_split(PairSet::from_pairs(raw), 40, 1.0, 0.2, 0.2, 5);
}

Table random_table(std::uint64_t seed) {
  Table t;
  t.e = DenseMatrix(40, 4);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 0.1);
  for (double& v : t.e.values) v = n(rng);
  return t;
}

TEST(TrainPairwise, LearnsCliquesWithLogInvariants) {
  const DatasetSplit split = clique_split();
  TrainConfig cfg;
  cfg.learning_rate = 0.05;
  cfg.batch_size = 32;
  cfg.max_epochs = 60;
  cfg.patience = 10;
  const SplitContext ctx = make_split_context(split, cfg);
  const auto r = train_pairwise(TableTask{}, random_table(1), ctx.data(split.train), cfg);
  ASSERT_FALSE(r.log.epochs.empty());
  double best = 0.0;
  for (std::size_t i = 0; i < r.log.epochs.size(); ++i) {
    EXPECT_EQ(r.log.epochs[i].epoch, i + 1);
    best = std::max(best, r.log.epochs[i].val_metric);
  }
  EXPECT_EQ(r.log.epochs[r.log.best_epoch - 1].val_metric, best);
  EXPECT_GE(best, 0.95);
  // The returned model is the best epoch's.
  const double returned = batch_roc_auc(
      [&](ProductIndex a, ProductIndex b) { return TableTask{}.logit(r.model, a, b); },
      ctx.validation);
  EXPECT_EQ(returned, best);
}

TEST(TrainPairwise, DeterministicGivenSeed) {
  const DatasetSplit split = clique_split();
  TrainConfig cfg;
  cfg.max_epochs = 5;
  const SplitContext ctx = make_split_context(split, cfg);
  const auto a = train_pairwise(TableTask{}, random_table(1), ctx.data(split.train), cfg);
  const auto b = train_pairwise(TableTask{}, random_table(1), ctx.data(split.train), cfg);
  EXPECT_EQ(flatten(a.model), flatten(b.model));
}

TEST(TrainPairwise, ZeroLearningRateLeavesParametersUnchanged) {
  const DatasetSplit split = clique_split();
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.max_epochs = 3;
  const SplitContext ctx = make_split_context(split, cfg);
  const Table init = random_table(4);
  const auto r = train_pairwise(TableTask{}, init, ctx.data(split.train), cfg);
  EXPECT_EQ(flatten(r.model), flatten(init));
}

TEST(TrainPairwise, PatienceAtLeastMaxEpochsRunsToEnd) {
  const DatasetSplit split = clique_split();
  TrainConfig cfg;
  cfg.learning_rate = 0.0;
  cfg.max_epochs = 4;
  cfg.patience = 4;
  const SplitContext ctx = make_split_context(split, cfg);
  const auto r = train_pairwise(TableTask{}, random_table(4), ctx.data(split.train), cfg);
  EXPECT_EQ(r.log.epochs.size(), 4u);
  cfg.patience = 1;
  const auto s = train_pairwise(TableTask{}, random_table(4), ctx.data(split.train), cfg);
  EXPECT_EQ(s.log.epochs.size(), 2u);
}

TEST(TrainPairwise, EmptyTrainRejected) {
  const PairSet empty;
  const PairTrainingData data{&empty, nullptr, nullptr};
  EXPECT_THROW(train_pairwise(TableTask{}, random_table(1), data, TrainConfig{}), DataError);
}

TEST(TrainConfig, TomlAndValidation) {
  const auto t = toml::FlatTable::parse("learning_rate = 0.5\npatience = 7\nseed = 11\n");
  const TrainConfig c = TrainConfig::from_table(t);
  EXPECT_EQ(c.learning_rate, 0.5);
  EXPECT_EQ(c.patience, 7u);
  EXPECT_EQ(c.seed, 11u);
  EXPECT_EQ(c.neg_ratio, 2.0);
  EXPECT_THROW(TrainConfig::from_table(toml::FlatTable::parse("patience = 0")), ConfigError);
  EXPECT_THROW(TrainConfig::from_table(toml::FlatTable::parse("neg_ratio = 0.0")), ConfigError);
}

TEST(FitLogisticRegression, RecoversPlantedWeights) {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double w0 = 1.5;
  const double w1 = -0.75;
  const double bias = 0.25;
  std::vector<std::vector<double>> x;
  std::vector<Label> y;
  for (int i = 0; i < 20000; ++i) {
    const double a = n(rng);
    const double b = n(rng);
    x.push_back({a, b});
    const double p = 1.0 / (1.0 + std::exp(-(w0 * a + w1 * b + bias)));
    y.push_back(u(rng) < p ? Label::positive : Label::negative);
  }
  const auto w = fit_logistic_regression(x, y);
  ASSERT_EQ(w.size(), 3u);
  EXPECT_NEAR(w[0], w0, 0.08);
  EXPECT_NEAR(w[1], w1, 0.08);
  EXPECT_NEAR(w[2], bias, 0.08);
}

TEST(FitLogisticRegression, RejectsBadInput) {
  EXPECT_THROW(fit_logistic_regression({}, {}), DataError);
  EXPECT_THROW(fit_logistic_regression({{1.0}}, {}), DataError);
}

}  // namespace
}  // namespace c2v
