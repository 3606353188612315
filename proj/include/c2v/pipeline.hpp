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

// Module-by-module training: modality encoders first, then a fusion over
// the frozen encoders, then ensemble weights fitted on validation pairs.

#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "c2v/cf.hpp"
#include "c2v/evaluation.hpp"
#include "c2v/fusion.hpp"
#include "c2v/image.hpp"
#include "c2v/io.hpp"
#include "c2v/text.hpp"
#include "c2v/toml.hpp"
#include "c2v/training.hpp"

namespace c2v {

enum class Stage { image, text, cf, fusion };

inline const char* stage_name(Stage s) {
  switch (s) {
    case Stage::image: return "image";
    case Stage::text: return "text";
    case Stage::cf: return "cf";
    case Stage::fusion: return "fusion";
  }
  return "?";
}

// "all" or a comma-separated list of stage names.
inline std::set<Stage> parse_stages(std::string_view s) {
  if (s == "all") return {Stage::image, Stage::text, Stage::cf, Stage::fusion};
  std::set<Stage> out;
  std::string item;
  std::stringstream ss{std::string(s)};
  while (std::getline(ss, item, ',')) {
    if (item == "image") {
      out.insert(Stage::image);
    } else if (item == "text") {
      out.insert(Stage::text);
    } else if (item == "cf") {
      out.insert(Stage::cf);
    } else if (item == "fusion") {
      out.insert(Stage::fusion);
    } else {
      fail<UsageError>("unknown stage `", item, "` (image, text, cf, fusion, all)");
    }
  }
  if (out.empty()) fail<UsageError>("no stage given");
  return out;
}

struct PipelineConfig {
  TrainConfig train;
  ImageConfig image;
  TextConfig text;
  CFConfig cf;
  FusionConfig fusion;
  FusionKind fusion_kind = FusionKind::ciu;

  static const std::set<std::string>& keys() {
    static const std::set<std::string> k{
        "seed", "learning_rate", "batch_size", "max_epochs", "patience", "neg_ratio",
        "freq_power", "d_img_out", "image_learning_rate", "d_word", "w2v_window",
        "w2v_negatives", "w2v_min_count", "w2v_epochs", "w2v_learning_rate", "d_txt", "max_len",
        "text_learning_rate", "d_cf", "cf_negatives", "cf_epochs", "cf_learning_rate",
        "lambda_side", "fusion", "d_res", "d_z", "n_buckets", "fusion_use_cf",
        "fusion_learning_rate"};
    return k;
  }

  static PipelineConfig from_table(const toml::FlatTable& t) {
    t.expect_only(keys());
    PipelineConfig c;
    c.train = TrainConfig::from_table(t);
    c.image = ImageConfig::from_table(t, c.train);
    c.text = TextConfig::from_table(t, c.train);
    c.cf = CFConfig::from_table(t, c.train);
    c.fusion = FusionConfig::from_table(t, c.train);
    c.fusion_kind = parse_fusion_kind(t.get_or<std::string>("fusion", "ciu"));
    return c;
  }

  static PipelineConfig from_file(const std::string& path) {
    return from_table(toml::FlatTable::parse_file(path));
  }

  // Re-seeds every stage.
  void set_seed(std::uint64_t seed) {
    train.seed = image.train.seed = text.train.seed = fusion.train.seed = seed;
    text.word2vec.seed = cf.seed = seed;
  }
};

struct ModelBundle {
  std::optional<ImageHead> image;
  std::optional<WordEmbeddings> words;
  std::optional<TextEncoder> text;
  std::optional<CFEmbeddings> cf;
  std::optional<FusionModel> fusion;
  bool fusion_uses_cf = false;
  std::optional<EnsembleWeights> ensemble;
  std::map<std::string, TrainingLog> logs;

  Encoders encoders(bool with_cf) const {
    Encoders e;
    if (image) e.image = &*image;
    if (text) {
      e.text = &*text;
      e.words = &*words;
    }
    if (with_cf && cf) e.cf = &*cf;
    return e;
  }

  ModalityInputs fusion_inputs(const Catalog& catalog) const {
    if (!image || !text) fail<ConfigError>("fusion needs trained image and text encoders");
    return build_modality_inputs(catalog, encoders(fusion_uses_cf));
  }
};

inline TrainResult<FusionModel> train_fusion(const ModalityInputs& inputs, const DatasetSplit& split,
                                             FusionKind kind, const FusionConfig& config) {
  TrainResult<FusionModel> r;
  r.model.kind = kind;
  switch (kind) {
    case FusionKind::linear: {
      auto t = train_linear(inputs, split, config);
      r.model.linear = std::move(t.model);
      r.log = std::move(t.log);
      break;
    }
    case FusionKind::ciu: {
      auto t = train_ciu(inputs, split, config);
      r.model.ciu = std::move(t.model);
      r.log = std::move(t.log);
      break;
    }
    case FusionKind::compressed: {
      auto t = train_compressed(inputs, split, config);
      r.model.compressed = std::move(t.model);
      r.log = std::move(t.log);
      break;
    }
    case FusionKind::crossfeat: {
      auto t = fit_crossfeat(inputs, split, config);
      r.model.crossfeat = std::move(t.model);
      r.log = std::move(t.log);
      break;
    }
  }
  return r;
}

// Fits ensemble weights of (fusion logit, cf logit) on the validation batch.
inline EnsembleWeights fit_ensemble_on_validation(const FusionModel& fusion,
                                                  const ModalityInputs& inputs,
                                                  const CFEmbeddings& cf,
                                                  const DatasetSplit& split,
                                                  const TrainConfig& config) {
  const SplitContext ctx = make_split_context(split, config);
  std::vector<double> content;
  std::vector<std::optional<double>> cf_logits;
  std::vector<Label> labels;
  for (const auto& ex : ctx.validation) {
    content.push_back(fusion.logit(inputs, ex.a, ex.b));
    cf_logits.push_back(cf_pair_logit(cf, ex.a, ex.b));
    labels.push_back(ex.label);
  }
  return fit_ensemble(content, cf_logits, labels);
}

// Trains the requested stages into `bundle`, reusing whatever earlier stages
// it already holds. Stage-1 artifacts present in `bundle` and not requested
// are left untouched.
inline void run_pipeline(const Catalog& catalog, const DatasetSplit& split,
                         const std::set<Stage>& stages, FusionKind fusion_kind,
                         const PipelineConfig& config, ModelBundle& bundle) {
  if (stages.count(Stage::image)) {
    auto r = train_image_head(catalog, split, config.image);
    bundle.image = std::move(r.model);
    bundle.logs["image"] = std::move(r.log);
  }
  if (stages.count(Stage::text)) {
    bundle.words = train_word2vec(catalog, config.text.word2vec);
    auto r = train_text_encoder(catalog, *bundle.words, split, config.text);
    bundle.text = std::move(r.model);
    bundle.logs["text"] = std::move(r.log);
  }
  if (stages.count(Stage::cf)) {
    bundle.cf = train_cf(split.train, catalog, config.cf);
  }
  if (stages.count(Stage::fusion)) {
    if (!bundle.image || !bundle.text) {
      fail<ConfigError>("stage `fusion` requires trained image and text encoders");
    }
    bundle.fusion_uses_cf = config.fusion.use_cf && bundle.cf.has_value();
    const ModalityInputs inputs = bundle.fusion_inputs(catalog);
    auto r = train_fusion(inputs, split, fusion_kind, config.fusion);
    bundle.fusion = std::move(r.model);
    bundle.logs["fusion"] = std::move(r.log);
    bundle.ensemble.reset();
    if (bundle.cf && !split.validation.empty()) {
      bundle.ensemble =
          fit_ensemble_on_validation(*bundle.fusion, inputs, *bundle.cf, split, config.train);
    }
  }
}

inline ModelBundle run_pipeline(const Catalog& catalog, const DatasetSplit& split,
                                const std::set<Stage>& stages, FusionKind fusion_kind,
                                const PipelineConfig& config) {
  ModelBundle b;
  run_pipeline(catalog, split, stages, fusion_kind, config, b);
  return b;
}

// ---------------------------------------------------------------------------
// Scoring

inline const char* fusion_display_name(FusionKind k) {
  switch (k) {
    case FusionKind::linear: return "Content2Vec-linear";
    case FusionKind::ciu: return "Content2Vec-perf";
    case FusionKind::compressed: return "Content2Vec-compressed";
    case FusionKind::crossfeat: return "Fusion-crossfeat";
  }
  return "?";
}

struct NamedScorer {
  std::string name;
  PairScorer scorer;
};

// One scorer per trained model in the bundle, in a fixed order. A missing
// co-purchase vector scores as the cf model's beta (the logit of two zero
// vectors).
inline std::vector<NamedScorer> bundle_scorers(const ModelBundle& b, const Catalog& catalog) {
  std::vector<NamedScorer> out;
  auto single = [&](Encoders e) {
    return std::make_shared<const ModalityInputs>(build_modality_inputs(catalog, e));
  };
  if (b.image) {
    auto in = single({&*b.image, nullptr, nullptr, nullptr});
    out.push_back({"ImageCNN", [in](ProductIndex x, ProductIndex y) { return in->sim(0, x, y); }});
  }
  if (b.text) {
    auto in = single({nullptr, &*b.text, &*b.words, nullptr});
    out.push_back({"TextCNN", [in](ProductIndex x, ProductIndex y) { return in->sim(0, x, y); }});
  }
  std::shared_ptr<const CFEmbeddings> cf;
  if (b.cf) {
    cf = std::make_shared<const CFEmbeddings>(*b.cf);
    const std::string name = cf->category_vectors.rows > 0 ? "Meta-Prod2Vec" : "Prod2Vec";
    out.push_back({name, [cf](ProductIndex x, ProductIndex y) {
                     return cf_pair_logit(*cf, x, y).value_or(cf->beta);
                   }});
  }
  if (b.fusion) {
    auto in = std::make_shared<const ModalityInputs>(b.fusion_inputs(catalog));
    auto fm = std::make_shared<const FusionModel>(*b.fusion);
    out.push_back({fusion_display_name(fm->kind),
                   [in, fm](ProductIndex x, ProductIndex y) { return fm->logit(*in, x, y); }});
    if (b.ensemble && cf) {
      const EnsembleWeights e = *b.ensemble;
      out.push_back({std::string(fusion_display_name(fm->kind)) + "+",
                     [in, fm, cf, e](ProductIndex x, ProductIndex y) {
                       return ensemble_plus(fm->logit(*in, x, y), cf_pair_logit(*cf, x, y), e);
                     }});
    }
  }
  return out;
}

// ROC-AUC and AUPRC of every bundle model on the test partition.
inline ResultTable evaluate_bundle(const ModelBundle& b, const Catalog& catalog,
                                   const DatasetSplit& split, const TrainConfig& config,
                                   std::uint64_t seed) {
  const LabeledBatch batch = make_test_batch(split.test, split.all_positive_keys(),
                                             config.neg_ratio, config.freq_power, seed);
  ResultTable rows;
  for (const auto& s : bundle_scorers(b, catalog)) {
    add_metrics(rows, s.name, "test", link_metrics(score_batch(s.scorer, batch)));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Persistence of a bundle as a directory of files

inline std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string model_file_bytes(const ModelFile& f) {
  std::ostringstream o(std::ios::binary);
  write_model_file(o, f);
  return o.str();
}

inline void save_bundle(const std::string& dir, const ModelBundle& b) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  const fs::path d(dir);
  if (b.image) save_model_file((d / "image.c2vm").string(), to_model_file(*b.image));
  if (b.words) save_word_embeddings((d / "words.txt").string(), *b.words);
  if (b.text) save_model_file((d / "text.c2vm").string(), to_model_file(*b.text));
  if (b.cf) save_model_file((d / "cf.c2vm").string(), to_model_file(*b.cf));
  if (b.fusion) {
    std::vector<Modality> mods{Modality::image, Modality::text};
    if (b.fusion_uses_cf) mods.push_back(Modality::cf);
    save_model_file((d / "fusion.c2vm").string(), to_model_file(*b.fusion, mods));
  } else {
    fs::remove(d / "fusion.c2vm");
  }
  if (b.ensemble) {
    save_model_file((d / "ensemble.c2vm").string(), to_model_file(*b.ensemble));
  } else {
    fs::remove(d / "ensemble.c2vm");
  }
  for (const auto& [name, log] : b.logs) {
    std::ofstream out(d / ("train_" + name + ".tsv"), std::ios::binary);
    log.write_tsv(out);
  }
}

inline ModelBundle load_bundle(const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path d(dir);
  if (!fs::is_directory(d)) fail("model directory ", dir, " does not exist");
  ModelBundle b;
  auto has = [&](const char* f) { return fs::exists(d / f); };
  if (has("image.c2vm")) b.image = image_head_from(load_model_file((d / "image.c2vm").string()));
  if (has("text.c2vm")) {
    b.text = text_encoder_from(load_model_file((d / "text.c2vm").string()));
    if (!has("words.txt")) fail("model directory has a text encoder but no words.txt");
    b.words = load_word_embeddings((d / "words.txt").string());
  }
  if (has("cf.c2vm")) b.cf = cf_embeddings_from(load_model_file((d / "cf.c2vm").string()));
  if (has("fusion.c2vm")) {
    const ModelFile f = load_model_file((d / "fusion.c2vm").string());
    b.fusion = fusion_model_from(f);
    b.fusion_uses_cf = f.get("modalities").find("cf") != std::string::npos;
    if (b.fusion_uses_cf && !b.cf) fail("fusion uses cf vectors but cf.c2vm is missing");
  }
  if (has("ensemble.c2vm")) b.ensemble = ensemble_from(load_model_file((d / "ensemble.c2vm").string()));
  return b;
}

// ---------------------------------------------------------------------------
// Embedding export

// Store kinds: image, text, cf, linear, ciu, compressed. Single modalities
// and compressed hold raw vectors (pair score = alpha <u, v> + beta, alpha
// and beta in the header). linear and ciu hold the concatenated modality
// blocks scaled by sqrt(max(0, w_m alpha_m)), so the inner product is the
// linear part of the fused score; `exact=0` marks that the ciu residual is
// not included. Products without a cf vector get a zero cf block and are
// listed in `cold=`.
inline EmbeddingStore export_embeddings(const ModelBundle& b, const Catalog& catalog,
                                        const std::string& kind, std::uint64_t seed) {
  EmbeddingStore s;
  s.kind = kind;
  s.seed = seed;
  for (const auto& r : catalog) s.ids.push_back(r.id);
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  auto hash_file = [&](const ModelFile& f) { hash = fnv1a64(model_file_bytes(f), hash); };
  auto real = [](double x) {
    std::string out;
    io_detail::append_real(out, x);
    return out;
  };
  std::vector<std::string> cold;
  auto note_cold = [&](const std::vector<std::uint8_t>& present) {
    for (std::size_t p = 0; p < present.size(); ++p) {
      if (!present[p]) cold.push_back(catalog[static_cast<ProductIndex>(p)].id);
    }
  };
  std::string exact = "1";

  if (kind == "image" || kind == "text" || kind == "cf") {
    Encoders e;
    if (kind == "image") {
      if (!b.image) fail("export: bundle has no image head");
      e.image = &*b.image;
      hash_file(to_model_file(*b.image));
    } else if (kind == "text") {
      if (!b.text) fail("export: bundle has no text encoder");
      e.text = &*b.text;
      e.words = &*b.words;
      hash_file(to_model_file(*b.text));
    } else {
      if (!b.cf) fail("export: bundle has no cf embeddings");
      e.cf = &*b.cf;
      hash_file(to_model_file(*b.cf));
      note_cold(b.cf->trained);
    }
    const ModalityInputs in = build_modality_inputs(catalog, e);
    s.vectors = in.vectors[0];
    s.attributes.emplace_back("alpha", real(in.alpha[0]));
    s.attributes.emplace_back("beta", real(in.beta[0]));
  } else if (kind == "linear" || kind == "ciu" || kind == "compressed") {
    if (!b.fusion || fusion_kind_name(b.fusion->kind) != kind) {
      fail("export: bundle fusion is not `", kind, "`");
    }
    std::vector<Modality> mods{Modality::image, Modality::text};
    if (b.fusion_uses_cf) mods.push_back(Modality::cf);
    hash_file(to_model_file(*b.fusion, mods));
    const ModalityInputs in = b.fusion_inputs(catalog);
    if (b.fusion_uses_cf) note_cold(in.cf_present);
    if (kind == "compressed") {
      const auto& f = b.fusion->compressed;
      s.vectors = DenseMatrix(catalog.size(), f.c_w.rows);
      for (std::size_t p = 0; p < catalog.size(); ++p) {
        const DenseVector z = embed_compressed(f, in.concat_row(static_cast<ProductIndex>(p)));
        std::copy(z.begin(), z.end(), s.vectors.row(p).begin());
      }
      s.attributes.emplace_back("alpha", real(f.alpha_z));
      s.attributes.emplace_back("beta", real(f.beta_z));
    } else {
      const DenseVector& w = kind == "linear" ? b.fusion->linear.w : b.fusion->ciu.w;
      std::size_t width = 0;
      for (const auto& v : in.vectors) width += v.cols;
      s.vectors = DenseMatrix(catalog.size(), width);
      std::string scales;
      std::size_t off = 0;
      for (std::size_t m = 0; m < in.size(); ++m) {
        const double wa = w[m] * in.alpha[m];
        if (wa < 0.0) exact = "0";
        const double scale = std::sqrt(std::max(0.0, wa));
        scales += (scales.empty() ? "" : ",") + real(scale);
        for (std::size_t p = 0; p < catalog.size(); ++p) {
          const auto src = in.vectors[m].row(p);
          auto dst = s.vectors.row(p);
          for (std::size_t k = 0; k < src.size(); ++k) dst[off + k] = scale * src[k];
        }
        off += in.vectors[m].cols;
      }
      s.attributes.emplace_back("scales", scales);
      if (kind == "ciu") exact = "0";
    }
  } else {
    fail<UsageError>("unknown store kind `", kind, "` (image, text, cf, linear, ciu, compressed)");
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(hash));
  s.attributes.emplace_back("model", hex);
  s.attributes.emplace_back("exact", exact);
  if (!cold.empty()) {
    std::string ids;
    for (const auto& id : cold) ids += (ids.empty() ? "" : ",") + id;
    s.attributes.emplace_back("cold", ids);
  }
  if (!all_finite(s.vectors.values)) fail<NumericError>("export: non-finite embedding");
  return s;
}

}  // namespace c2v
