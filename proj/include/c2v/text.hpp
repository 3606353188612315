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

// Text modality: skip-gram word vectors over catalog text and a 1-D
// convolutional encoder over the leading title tokens.

#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "c2v/core_math.hpp"
#include "c2v/data.hpp"
#include "c2v/skipgram.hpp"
#include "c2v/tokenizer.hpp"
#include "c2v/toml.hpp"
#include "c2v/training.hpp"

namespace c2v {

// ---------------------------------------------------------------------------
// Word embeddings

struct WordEmbeddings {
  static constexpr std::uint32_t kPad = 0;
  static constexpr std::uint32_t kUnk = 1;

  std::vector<std::string> tokens;  // index -> token
  std::unordered_map<std::string, std::uint32_t> index;
  DenseMatrix vectors;  // V x d_word

  std::size_t size() const { return tokens.size(); }
  std::size_t dim() const { return vectors.cols; }

  std::uint32_t lookup(const std::string& token) const {
    if (token == kPadToken) return kPad;
    auto it = index.find(token);
    return it == index.end() ? kUnk : it->second;
  }

  // Rebuilds `index` from `tokens`.
  void reindex() {
    index.clear();
    for (std::uint32_t i = 0; i < tokens.size(); ++i) index.emplace(tokens[i], i);
  }

  bool operator==(const WordEmbeddings& o) const {
    return tokens == o.tokens && vectors == o.vectors;
  }
};

struct Word2VecConfig {
  std::size_t d_word = 50;
  std::size_t window = 4;
  std::size_t n_negatives = 5;
  std::size_t min_count = 2;
  std::size_t epochs = 5;
  double learning_rate = 0.025;
  double freq_power = 0.75;
  std::uint64_t seed = 1;

  static Word2VecConfig from_table(const toml::FlatTable& t, std::uint64_t seed) {
    Word2VecConfig c;
    c.d_word = t.get_or("d_word", c.d_word);
    c.window = t.get_or("w2v_window", c.window);
    c.n_negatives = t.get_or("w2v_negatives", c.n_negatives);
    c.min_count = t.get_or("w2v_min_count", c.min_count);
    c.epochs = t.get_or("w2v_epochs", c.epochs);
    c.learning_rate = t.get_or("w2v_learning_rate", c.learning_rate);
    c.freq_power = t.get_or("freq_power", c.freq_power);
    c.seed = seed;
    return c;
  }
};

// Skip-gram with negative sampling over each sentence, fixed window, noise
// distribution unigram^freq_power, SGD with a linearly decayed step.
// Tokens below min_count are dropped from the corpus. PAD and UNK stay zero.
inline WordEmbeddings train_word2vec(const std::vector<std::vector<std::string>>& corpus,
                                     const Word2VecConfig& config) {
  if (config.d_word == 0) fail<ConfigError>("d_word must be positive");
  if (config.window == 0) fail<ConfigError>("word2vec window must be positive");
  std::map<std::string, std::uint64_t> counts;
  for (const auto& sentence : corpus) {
    for (const auto& tok : sentence) {
      if (tok != kPadToken && tok != kUnkToken) ++counts[tok];
    }
  }
  std::vector<std::pair<std::string, std::uint64_t>> kept;
  for (const auto& [tok, c] : counts) {
    if (c >= config.min_count) kept.emplace_back(tok, c);
  }
  if (kept.empty()) fail("word2vec: empty vocabulary (min_count=", config.min_count, ")");
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& x, const auto& y) { return x.second > y.second; });

  WordEmbeddings words;
  words.tokens = {std::string(kPadToken), std::string(kUnkToken)};
  for (const auto& [tok, _] : kept) words.tokens.push_back(tok);
  words.reindex();
  const std::size_t v = words.size();
  const std::size_t d = config.d_word;

  Rng rng(derive_seed(config.seed, 0x77327623ULL));
  SkipGramTables tables{DenseMatrix(v, d), DenseMatrix(v, d)};
  std::uniform_real_distribution<double> init(-0.5 / static_cast<double>(d),
                                              0.5 / static_cast<double>(d));
  for (std::size_t r = 2; r < v; ++r) {
    for (double& x : tables.in.row(r)) x = init(rng);
  }

  std::vector<std::vector<std::uint32_t>> sentences;
  std::uint64_t total_tokens = 0;
  for (const auto& sentence : corpus) {
    std::vector<std::uint32_t> ids;
    for (const auto& tok : sentence) {
      auto it = words.index.find(tok);
      if (it != words.index.end() && it->second >= 2) ids.push_back(it->second);
    }
    total_tokens += ids.size();
    sentences.push_back(std::move(ids));
  }

  std::vector<double> noise_weights(v, 0.0);
  for (std::size_t i = 0; i < kept.size(); ++i) {
    noise_weights[i + 2] = std::pow(static_cast<double>(kept[i].second), config.freq_power);
  }
  std::discrete_distribution<std::uint32_t> noise(noise_weights.begin(), noise_weights.end());

  std::vector<std::size_t> order(sentences.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> scratch(d);
  SkipGramExample ex;
  const std::uint64_t total = total_tokens * config.epochs;
  std::uint64_t done = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    Rng epoch_rng(derive_seed(config.seed, 0x77327623ULL, epoch + 1));
    std::shuffle(order.begin(), order.end(), epoch_rng);
    for (std::size_t s : order) {
      const auto& ids = sentences[s];
      for (std::size_t i = 0; i < ids.size(); ++i) {
        const double lr = decayed_learning_rate(config.learning_rate, done++, total);
        const std::size_t lo = i >= config.window ? i - config.window : 0;
        const std::size_t hi = std::min(ids.size(), i + config.window + 1);
        for (std::size_t j = lo; j < hi; ++j) {
          if (j == i) continue;
          ex.center = ids[i];
          ex.target = ids[j];
          ex.negatives.clear();
          for (std::size_t k = 0; k < config.n_negatives; ++k) {
            const std::uint32_t n = noise(epoch_rng);
            if (n != ex.target) ex.negatives.push_back(n);
          }
          skipgram_sgd_step(tables, ex, lr, scratch);
        }
      }
    }
  }
  if (!all_finite(tables.in.values)) fail<NumericError>("word2vec produced non-finite vectors");
  words.vectors = std::move(tables.in);
  return words;
}

inline WordEmbeddings train_word2vec(const Catalog& catalog, const Word2VecConfig& config) {
  if (catalog.size() == 0) fail("train_word2vec: empty catalog");
  std::vector<std::vector<std::string>> corpus;
  corpus.reserve(catalog.size());
  for (const auto& r : catalog) corpus.push_back(r.tokens);
  return train_word2vec(corpus, config);
}

// ---------------------------------------------------------------------------
// Convolutional text encoder

struct TextEncoder {
  std::size_t max_len = 10;
  std::vector<std::size_t> widths;
  std::vector<DenseMatrix> filters;  // bank k: n_filters x (widths[k] * d_word)
  std::vector<DenseVector> biases;
  double alpha = 1.0;
  double beta = 0.0;
  std::vector<std::string> block_names;

  std::size_t output_dim() const {
    std::size_t n = 0;
    for (const auto& f : filters) n += f.rows;
    return n;
  }
  std::size_t word_dim() const { return filters.empty() ? 0 : filters[0].cols / widths[0]; }

  template <class Self>
  static auto params(Self& self) {
    using View = decltype(view("", self.alpha));
    std::vector<View> out;
    for (std::size_t k = 0; k < self.filters.size(); ++k) {
      out.push_back(view(self.block_names[2 * k], self.filters[k]));
      out.push_back(view(self.block_names[2 * k + 1], self.biases[k]));
    }
    out.push_back(view("alpha", self.alpha));
    out.push_back(view("beta", self.beta));
    return out;
  }

  void name_blocks() {
    block_names.clear();
    for (std::size_t w : widths) {
      block_names.push_back("filters_w" + std::to_string(w));
      block_names.push_back("bias_w" + std::to_string(w));
    }
  }

  // d_txt is split as evenly as possible across widths (earlier widths take
  // the remainder). Filters ~ N(0, 1/sqrt(width * d_word)), biases 0.
  static TextEncoder initialize(std::size_t d_word, std::size_t d_txt,
                                std::vector<std::size_t> widths, std::size_t max_len,
                                std::uint64_t seed) {
    if (widths.empty()) fail<ConfigError>("text encoder needs at least one filter width");
    if (d_word == 0 || d_txt < widths.size()) {
      fail<ConfigError>("text encoder: d_word must be positive and d_txt >= #widths");
    }
    for (std::size_t w : widths) {
      if (w == 0 || w > max_len) {
        fail<ConfigError>("filter width ", w, " must be in [1, max_len=", max_len, "]");
      }
    }
    TextEncoder e;
    e.max_len = max_len;
    e.widths = std::move(widths);
    Rng rng(seed);
    for (std::size_t k = 0; k < e.widths.size(); ++k) {
      const std::size_t n = d_txt / e.widths.size() + (k < d_txt % e.widths.size() ? 1 : 0);
      const std::size_t fan_in = e.widths[k] * d_word;
      e.filters.push_back(
          DenseMatrix::gaussian(n, fan_in, 1.0 / std::sqrt(static_cast<double>(fan_in)), rng));
      e.biases.emplace_back(n, 0.0);
    }
    e.name_blocks();
    return e;
  }

  bool operator==(const TextEncoder& o) const {
    return max_len == o.max_len && widths == o.widths && filters == o.filters &&
           biases == o.biases && alpha == o.alpha && beta == o.beta;
  }
};

using TokenIds = std::vector<std::uint32_t>;

// First max_len tokens mapped to word ids, right-padded with PAD.
inline TokenIds encode_tokens(const WordEmbeddings& words, const std::vector<std::string>& tokens,
                              std::size_t max_len) {
  TokenIds ids(max_len, WordEmbeddings::kPad);
  for (std::size_t i = 0; i < std::min(max_len, tokens.size()); ++i) ids[i] = words.lookup(tokens[i]);
  return ids;
}

// Per output unit: the winning position and its pre-activation.
struct ConvTrace {
  std::vector<std::size_t> argmax;
  std::vector<double> pre_max;
};

inline DenseVector embed_ids(const TextEncoder& enc, const DenseMatrix& word_vectors,
                             const TokenIds& ids, ConvTrace* trace = nullptr) {
  check_dims(ids.size(), enc.max_len, "embed_text (token count)");
  const std::size_t d = word_vectors.cols;
  check_dims(enc.word_dim(), d, "embed_text (word dim)");
  DenseVector out;
  out.reserve(enc.output_dim());
  if (trace) {
    trace->argmax.clear();
    trace->pre_max.clear();
  }
  for (std::size_t k = 0; k < enc.filters.size(); ++k) {
    const DenseMatrix& f = enc.filters[k];
    const std::size_t w = enc.widths[k];
    const std::size_t positions = enc.max_len - w + 1;
    for (std::size_t r = 0; r < f.rows; ++r) {
      const auto fr = f.row(r);
      double best = 0.0;
      std::size_t best_pos = 0;
      for (std::size_t p = 0; p < positions; ++p) {
        double pre = enc.biases[k][r];
        for (std::size_t j = 0; j < w; ++j) {
          const auto wv = word_vectors.row(ids[p + j]);
          const double* fw = fr.data() + j * d;
          for (std::size_t c = 0; c < d; ++c) pre += fw[c] * wv[c];
        }
        if (p == 0 || pre > best) {
          best = pre;
          best_pos = p;
        }
      }
      out.push_back(std::max(0.0, best));
      if (trace) {
        trace->argmax.push_back(best_pos);
        trace->pre_max.push_back(best);
      }
    }
  }
  return out;
}

inline DenseVector embed_text(const TextEncoder& enc, const WordEmbeddings& words,
                              const std::vector<std::string>& tokens) {
  check_dims(tokens.size(), enc.max_len, "embed_text (token count)");
  return embed_ids(enc, words.vectors, encode_tokens(words, tokens, enc.max_len));
}

inline double text_pair_logit(const TextEncoder& enc, const WordEmbeddings& words,
                              const std::vector<std::string>& tokens_a,
                              const std::vector<std::string>& tokens_b) {
  return enc.alpha * inner_product(embed_text(enc, words, tokens_a),
                                   embed_text(enc, words, tokens_b)) +
         enc.beta;
}

// Adds d(upstream . embed)/d(filters, biases) into `g`.
inline void conv_backward_accumulate(const TextEncoder& enc, const DenseMatrix& word_vectors,
                                     const TokenIds& ids, const ConvTrace& trace,
                                     std::span<const double> upstream, TextEncoder& g) {
  const std::size_t d = word_vectors.cols;
  std::size_t o = 0;
  for (std::size_t k = 0; k < enc.filters.size(); ++k) {
    const std::size_t w = enc.widths[k];
    for (std::size_t r = 0; r < enc.filters[k].rows; ++r, ++o) {
      if (!(trace.pre_max[o] > 0.0) || upstream[o] == 0.0) continue;
      const double u = upstream[o];
      g.biases[k][r] += u;
      auto gr = g.filters[k].row(r);
      const std::size_t p = trace.argmax[o];
      for (std::size_t j = 0; j < w; ++j) {
        const auto wv = word_vectors.row(ids[p + j]);
        for (std::size_t c = 0; c < d; ++c) gr[j * d + c] += u * wv[c];
      }
    }
  }
}

struct TextConfig {
  Word2VecConfig word2vec;
  std::size_t d_txt = 256;
  std::size_t max_len = 10;
  std::vector<std::size_t> widths{2, 3};
  TrainConfig train;

  static TextConfig from_table(const toml::FlatTable& t, const TrainConfig& base) {
    TextConfig c;
    c.word2vec = Word2VecConfig::from_table(t, base.seed);
    c.d_txt = t.get_or("d_txt", c.d_txt);
    c.max_len = t.get_or("max_len", c.max_len);
    c.train = base;
    c.train.learning_rate = t.get_or("text_learning_rate", base.learning_rate);
    return c;
  }
};

// Siamese pair task over frozen word vectors.
struct TextPairTask {
  using Model = TextEncoder;
  const WordEmbeddings* words = nullptr;
  std::vector<TokenIds> product_ids;

  TextPairTask(const Catalog& catalog, const WordEmbeddings& w, std::size_t max_len) : words(&w) {
    product_ids.reserve(catalog.size());
    for (const auto& r : catalog) product_ids.push_back(encode_tokens(w, r.tokens, max_len));
  }

  double logit(const TextEncoder& m, ProductIndex a, ProductIndex b) const {
    return m.alpha * inner_product(embed_ids(m, words->vectors, product_ids[a]),
                                   embed_ids(m, words->vectors, product_ids[b])) +
           m.beta;
  }

  double loss_and_grad(const TextEncoder& m, const LabeledPair& ex, TextEncoder& g) const {
    ConvTrace ta;
    ConvTrace tb;
    const DenseVector ea = embed_ids(m, words->vectors, product_ids[ex.a], &ta);
    const DenseVector eb = embed_ids(m, words->vectors, product_ids[ex.b], &tb);
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
    conv_backward_accumulate(m, words->vectors, product_ids[ex.a], ta, up_a, g);
    conv_backward_accumulate(m, words->vectors, product_ids[ex.b], tb, up_b, g);
    return logistic_pair_loss(z, ex.label, ex.count);
  }
};

inline constexpr std::uint64_t kTextInitStream = 0x74657874ULL;

inline TrainResult<TextEncoder> train_text_encoder(const Catalog& catalog,
                                                   const WordEmbeddings& words,
                                                   const DatasetSplit& split,
                                                   const TextConfig& config) {
  if (split.train.empty()) fail("train_text_encoder: empty training split");
  const TextPairTask task(catalog, words, config.max_len);
  const SplitContext ctx = make_split_context(split, config.train);
  TextEncoder init =
      TextEncoder::initialize(words.dim(), config.d_txt, config.widths, config.max_len,
                              derive_seed(config.train.seed, kTextInitStream));
  return train_pairwise(task, std::move(init), ctx.data(split.train), config.train);
}

}  // namespace c2v
