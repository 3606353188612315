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
#include <filesystem>
#include <set>
#include <string>

#include <gtest/gtest.h>

#include "c2v/pipeline.hpp"
#include "c2v/synthetic.hpp"

namespace c2v {
namespace {

namespace fs = std::filesystem;

PipelineConfig tiny_config(const std::string& fusion = "ciu", bool use_cf = false) {
  return PipelineConfig::from_table(toml::FlatTable::parse(
      "seed = 3\nmax_epochs = 3\nbatch_size = 128\n"
      "d_img_out = 8\nd_word = 4\nw2v_epochs = 2\nd_txt = 6\nmax_len = 6\n"
      "d_cf = 5\ncf_epochs = 3\n"
      "d_res = 4\nd_z = 8\nn_buckets = 4\nfusion = \"" + fusion + "\"\n" +
      "fusion_use_cf = " + (use_cf ? "true" : "false") + "\n"));
}

struct TinyData {
  SyntheticData data;
  DatasetSplit soft;
  DatasetSplit hard;
};

const TinyData& tiny() {
  static const TinyData d = [] {
    SynthConfig c;
    c.n_products = 200;
    c.n_clusters = 5;
    c.d_img_in = 8;
    c.vocab_size = 120;
    TinyData t{generate_synthetic(c, 4), {}, {}};
    t.soft = make_soft_cold_start_split(t.data.pairs, t.data.pairs.products().size(), 1.0, 0.1,
                                        0.1, 1);
    t.hard = make_hard_cold_start_split(t.data.pairs, {0.7, 0.15, 0.15}, 1);
    return t;
  }();
  return d;
}

const ModelBundle& tiny_bundle() {
  static const ModelBundle b = run_pipeline(tiny().data.catalog, tiny().soft,
                                            parse_stages("all"), FusionKind::ciu, tiny_config());
  return b;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("c2v_pipeline_" + name);
  fs::remove_all(p);
  return p;
}

std::string bytes(const ModelFile& f) { return model_file_bytes(f); }

TEST(ParseStages, NamesListsAndErrors) {
  EXPECT_EQ(parse_stages("all").size(), 4u);
  EXPECT_EQ(parse_stages("image"), std::set<Stage>{Stage::image});
  EXPECT_EQ(parse_stages("fusion,image"), (std::set<Stage>{Stage::image, Stage::fusion}));
  EXPECT_THROW(parse_stages("image,audio"), UsageError);
  EXPECT_THROW(parse_stages(""), UsageError);
  for (Stage s : {Stage::image, Stage::text, Stage::cf, Stage::fusion}) {
    EXPECT_EQ(parse_stages(stage_name(s)), std::set<Stage>{s});
  }
}

TEST(PipelineConfig, UnknownKeyRejectedAndSeedPropagates) {
  EXPECT_THROW(PipelineConfig::from_table(toml::FlatTable::parse("d_image = 3\n")), ConfigError);
  PipelineConfig c = tiny_config();
  EXPECT_EQ(c.image.d_out, 8u);
  EXPECT_EQ(c.fusion.d_res, 4u);
  c.set_seed(99);
  EXPECT_EQ(c.train.seed, 99u);
  EXPECT_EQ(c.image.train.seed, 99u);
  EXPECT_EQ(c.text.train.seed, 99u);
  EXPECT_EQ(c.text.word2vec.seed, 99u);
  EXPECT_EQ(c.cf.seed, 99u);
  EXPECT_EQ(c.fusion.train.seed, 99u);
}

TEST(RunPipeline, SingleStageTrainsOnlyThatStage) {
  const ModelBundle b = run_pipeline(tiny().data.catalog, tiny().soft, parse_stages("image"),
                                     FusionKind::ciu, tiny_config());
  EXPECT_TRUE(b.image.has_value());
  EXPECT_FALSE(b.text.has_value());
  EXPECT_FALSE(b.cf.has_value());
  EXPECT_FALSE(b.fusion.has_value());
  EXPECT_THROW(run_pipeline(tiny().data.catalog, tiny().soft, parse_stages("fusion"),
                            FusionKind::ciu, tiny_config()),
               ConfigError);
}

TEST(RunPipeline, FusionStageReusesAndFreezesEncoders) {
  const Catalog& cat = tiny().data.catalog;
  const PipelineConfig config = tiny_config();
  ModelBundle staged =
      run_pipeline(cat, tiny().soft, parse_stages("image,text,cf"), FusionKind::ciu, config);
  const std::string image_before = bytes(to_model_file(*staged.image));
  const std::string text_before = bytes(to_model_file(*staged.text));
  const std::string cf_before = bytes(to_model_file(*staged.cf));
  run_pipeline(cat, tiny().soft, parse_stages("fusion"), FusionKind::ciu, config, staged);
  EXPECT_EQ(bytes(to_model_file(*staged.image)), image_before);
  EXPECT_EQ(bytes(to_model_file(*staged.text)), text_before);
  EXPECT_EQ(bytes(to_model_file(*staged.cf)), cf_before);
  const ModelBundle& all = tiny_bundle();
  EXPECT_EQ(bytes(to_model_file(*all.image)), image_before);
  const std::vector<Modality> mods{Modality::image, Modality::text};
  EXPECT_EQ(bytes(to_model_file(*staged.fusion, mods)), bytes(to_model_file(*all.fusion, mods)));
  ASSERT_TRUE(staged.ensemble.has_value());
  EXPECT_EQ(*staged.ensemble, *all.ensemble);
}

TEST(RunPipeline, EveryFusionKindTrains) {
  const Catalog& cat = tiny().data.catalog;
  ModelBundle b = tiny_bundle();
  for (FusionKind k : {FusionKind::linear, FusionKind::compressed, FusionKind::crossfeat}) {
    run_pipeline(cat, tiny().soft, {Stage::fusion}, k, tiny_config(), b);
    ASSERT_TRUE(b.fusion.has_value());
    EXPECT_EQ(b.fusion->kind, k);
  }
}

TEST(Bundle, SaveLoadRoundTripIsBitwise) {
  const ModelBundle& b = tiny_bundle();
  const fs::path dir = scratch("roundtrip");
  save_bundle(dir.string(), b);
  for (const char* f : {"image.c2vm", "text.c2vm", "words.txt", "cf.c2vm", "fusion.c2vm",
                        "ensemble.c2vm", "train_image.tsv", "train_fusion.tsv"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  const ModelBundle c = load_bundle(dir.string());
  const std::vector<Modality> mods{Modality::image, Modality::text};
  EXPECT_EQ(bytes(to_model_file(*c.image)), bytes(to_model_file(*b.image)));
  EXPECT_EQ(bytes(to_model_file(*c.text)), bytes(to_model_file(*b.text)));
  EXPECT_EQ(bytes(to_model_file(*c.cf)), bytes(to_model_file(*b.cf)));
  EXPECT_EQ(bytes(to_model_file(*c.fusion, mods)), bytes(to_model_file(*b.fusion, mods)));
  EXPECT_EQ(*c.words, *b.words);
  EXPECT_EQ(*c.ensemble, *b.ensemble);
  const fs::path again = scratch("roundtrip2");
  save_bundle(again.string(), c);
  for (const char* f : {"image.c2vm", "text.c2vm", "words.txt", "cf.c2vm", "fusion.c2vm"}) {
    std::ifstream x(dir / f, std::ios::binary);
    std::ifstream y(again / f, std::ios::binary);
    const std::string sx((std::istreambuf_iterator<char>(x)), {});
    const std::string sy((std::istreambuf_iterator<char>(y)), {});
    EXPECT_EQ(sx, sy) << f;
  }
  fs::remove_all(dir);
  fs::remove_all(again);
  EXPECT_THROW(load_bundle("/nonexistent/bundle"), DataError);
}

TEST(BundleScorers, NamesAndDeterministicEvaluation) {
  const ModelBundle& b = tiny_bundle();
  const auto scorers = bundle_scorers(b, tiny().data.catalog);
  std::vector<std::string> names;
  for (const auto& s : scorers) names.push_back(s.name);
  EXPECT_EQ(names, (std::vector<std::string>{"ImageCNN", "TextCNN", "Prod2Vec",
                                             "Content2Vec-perf", "Content2Vec-perf+"}));
  const TrainConfig& tc = tiny_config().train;
  const ResultTable r1 = evaluate_bundle(b, tiny().data.catalog, tiny().soft, tc, 7);
  EXPECT_EQ(r1.size(), 2 * scorers.size());
  EXPECT_EQ(evaluate_bundle(b, tiny().data.catalog, tiny().soft, tc, 7), r1);
  for (const auto& row : r1) {
    EXPECT_GE(row.value, 0.0);
    EXPECT_LE(row.value, 1.0);
  }
}

// ---------------------------------------------------------------------------
// Embedding export

TEST(ExportEmbeddings, CompressedStoreReproducesFusedLogit) {
  const Catalog& cat = tiny().data.catalog;
  ModelBundle b = tiny_bundle();
  run_pipeline(cat, tiny().soft, {Stage::fusion}, FusionKind::compressed, tiny_config(), b);
  const EmbeddingStore s = export_embeddings(b, cat, "compressed", 5);
  EXPECT_EQ(s.dim(), 8u);
  EXPECT_EQ(s.size(), cat.size());
  const ModalityInputs in = b.fusion_inputs(cat);
  const auto& f = b.fusion->compressed;
  for (ProductIndex a = 0; a < 20; ++a) {
    const ProductIndex c = (a * 13 + 5) % static_cast<ProductIndex>(cat.size());
    const double store_logit =
        f.alpha_z * inner_product(s.vectors.row(a), s.vectors.row(c)) + f.beta_z;
    EXPECT_EQ(store_logit, b.fusion->logit(in, a, c));
  }
  for (double v : s.vectors.values) EXPECT_GE(v, 0.0);
  EXPECT_THROW(export_embeddings(b, cat, "ciu", 5), DataError);
  EXPECT_THROW(export_embeddings(b, cat, "bogus", 5), UsageError);
}

TEST(ExportEmbeddings, LinearStoreHoldsTheLinearScore) {
  const Catalog& cat = tiny().data.catalog;
  ModelBundle b = tiny_bundle();
  run_pipeline(cat, tiny().soft, {Stage::fusion}, FusionKind::linear, tiny_config(), b);
  const EmbeddingStore s = export_embeddings(b, cat, "linear", 5);
  const ModalityInputs in = b.fusion_inputs(cat);
  const DenseVector& w = b.fusion->linear.w;
  double offset = 0.0;
  bool exact = true;
  for (std::size_t m = 0; m < w.size(); ++m) {
    offset += w[m] * in.beta[m];
    exact = exact && w[m] * in.alpha[m] >= 0.0;
  }
  const auto attr = [&](const std::string& k) {
    for (const auto& [key, v] : s.attributes) {
      if (key == k) return v;
    }
    return std::string();
  };
  EXPECT_EQ(attr("exact"), exact ? "1" : "0");
  if (exact) {
    for (ProductIndex a = 0; a < 20; ++a) {
      const ProductIndex c = (a * 7 + 3) % static_cast<ProductIndex>(cat.size());
      EXPECT_NEAR(inner_product(s.vectors.row(a), s.vectors.row(c)) + offset,
                  b.fusion->logit(in, a, c), 1e-9);
    }
  }
}

TEST(ExportEmbeddings, ColdProductsFlaggedWithZeroCfBlock) {
  const Catalog& cat = tiny().data.catalog;
  const ModelBundle b = run_pipeline(cat, tiny().hard, parse_stages("all"), FusionKind::compressed,
                                     tiny_config("compressed", true));
  ASSERT_TRUE(b.fusion_uses_cf);
  const EmbeddingStore cf = export_embeddings(b, cat, "cf", 1);
  std::string cold;
  for (const auto& [k, v] : cf.attributes) {
    if (k == "cold") cold = v;
  }
  ASSERT_FALSE(cold.empty());
  std::size_t n_cold = 0;
  for (std::size_t p = 0; p < cat.size(); ++p) {
    if (b.cf->trained[p]) continue;
    ++n_cold;
    EXPECT_NE(cold.find(cat[static_cast<ProductIndex>(p)].id), std::string::npos);
    for (double v : cf.vectors.row(p)) EXPECT_EQ(v, 0.0);
  }
  EXPECT_EQ(static_cast<std::size_t>(std::count(cold.begin(), cold.end(), ',')) + 1, n_cold);
  for (const Pair& p : tiny().hard.test) {
    EXPECT_FALSE(cf_pair_logit(*b.cf, p.a, p.b).has_value());
  }
  const EmbeddingStore comp = export_embeddings(b, cat, "compressed", 1);
  bool flagged = false;
  for (const auto& [k, v] : comp.attributes) flagged = flagged || (k == "cold" && v == cold);
  EXPECT_TRUE(flagged);
}

TEST(ExportEmbeddings, StoreRoundTripsAndIsDeterministic) {
  const Catalog& cat = tiny().data.catalog;
  const EmbeddingStore s = export_embeddings(tiny_bundle(), cat, "image", 2);
  EXPECT_EQ(export_embeddings(tiny_bundle(), cat, "image", 2), s);
  const fs::path dir = scratch("store");
  fs::create_directories(dir);
  save_store((dir / "image.store").string(), s);
  EXPECT_EQ(load_store((dir / "image.store").string()), s);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace c2v
