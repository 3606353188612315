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

// c2v command-line tool: synth, split, train, eval, embed, retrieve.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "c2v/data_io.hpp"
#include "c2v/pipeline.hpp"
#include "c2v/synthetic.hpp"

namespace fs = std::filesystem;
using namespace c2v;

namespace {

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write ", path.string());
  return out;
}

// C2V_THREADS caps worker threads. All stages currently run on one thread,
// so the value is validated and otherwise has no effect.
std::size_t thread_cap() {
  const char* v = std::getenv("C2V_THREADS");
  if (v == nullptr || *v == '\0') return 1;
  char* end = nullptr;
  const long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 1) fail<UsageError>("C2V_THREADS must be a positive integer, got `", v, "`");
  return static_cast<std::size_t>(n);
}

void write_split(const fs::path& dir, const DatasetSplit& split, const Catalog& catalog,
                 std::uint64_t seed) {
  fs::create_directories(dir);
  save_pairs((dir / "train.tsv").string(), split.train, catalog);
  save_pairs((dir / "validation.tsv").string(), split.validation, catalog);
  save_pairs((dir / "test.tsv").string(), split.test, catalog);
  auto meta = open_out(dir / "split.toml");
  meta << "regime = \"" << regime_name(split.regime) << "\"\n"
       << "seed = " << seed << "\n"
       << "train = " << split.train.size() << "\n"
       << "validation = " << split.validation.size() << "\n"
       << "test = " << split.test.size() << "\n";
}

DatasetSplit read_split(const fs::path& dir, const Catalog& catalog) {
  if (!fs::is_directory(dir)) fail("split directory ", dir.string(), " does not exist");
  const auto meta = toml::FlatTable::parse_file((dir / "split.toml").string());
  DatasetSplit split;
  const std::string regime = meta.get_string("regime");
  if (regime == "hard") {
    split.regime = Regime::hard;
  } else if (regime == "soft") {
    split.regime = Regime::soft;
  } else {
    fail("split.toml: unknown regime `", regime, "`");
  }
  split.train = load_pairs((dir / "train.tsv").string(), catalog);
  split.validation = load_pairs((dir / "validation.tsv").string(), catalog);
  split.test = load_pairs((dir / "test.tsv").string(), catalog);
  return split;
}

PipelineConfig read_config(const std::string& path, std::optional<std::uint64_t> seed) {
  PipelineConfig c = path.empty() ? PipelineConfig{} : PipelineConfig::from_file(path);
  if (seed) c.set_seed(*seed);
  return c;
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void run_synth(const SynthArgs& a) {
  SynthConfig c = a.config.empty() ? SynthConfig{}
                                   : SynthConfig::from_table(toml::FlatTable::parse_file(a.config));
  if (a.seed) c.seed = *a.seed;
  const SyntheticData data = generate_synthetic(c);
  const fs::path dir(a.out);
  fs::create_directories(dir);
  save_catalog((dir / "catalog.jsonl").string(), data.catalog);
  save_pairs((dir / "pairs.tsv").string(), data.pairs, data.catalog);
  open_out(dir / "synth.toml") << c.to_toml();
  std::cout << "products " << data.catalog.size() << ", pairs " << data.pairs.size() << "\n";
}

struct SplitArgs {
  std::string catalog;
  std::string pairs;
  std::string regime = "soft";
  std::size_t top_k = 0;
  double link_fraction = 1.0;
  double validation = 0.1;
  double test = 0.1;
  std::uint64_t seed = 1;
  std::string out;
};

void run_split(const SplitArgs& a) {
  const Catalog catalog = load_catalog(a.catalog);
  const PairSet pairs = load_pairs(a.pairs, catalog);
  DatasetSplit split;
  if (a.regime == "hard") {
    split = make_hard_cold_start_split(pairs, {1.0 - a.validation - a.test, a.validation, a.test},
                                       a.seed);
  } else if (a.regime == "soft") {
    const std::size_t k = a.top_k == 0 ? pairs.products().size() : a.top_k;
    split = make_soft_cold_start_split(pairs, k, a.link_fraction, a.validation, a.test, a.seed);
  } else {
    fail<UsageError>("--regime must be soft or hard, got `", a.regime, "`");
  }
  write_split(a.out, split, catalog, a.seed);
  std::cout << "train " << split.train.size() << ", validation " << split.validation.size()
            << ", test " << split.test.size() << "\n";
}

struct TrainArgs {
  std::string config;
  std::string catalog;
  std::string split;
  std::string stage = "all";
  std::string fusion;
  std::string model;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void run_train(const TrainArgs& a) {
  const PipelineConfig config = read_config(a.config, a.seed);
  const FusionKind kind = a.fusion.empty() ? config.fusion_kind : parse_fusion_kind(a.fusion);
  const auto stages = parse_stages(a.stage);
  const Catalog catalog = load_catalog(a.catalog);
  const DatasetSplit split = read_split(a.split, catalog);
  // Earlier stages come from --model, or from --out when it already holds a bundle.
  ModelBundle bundle;
  if (!a.model.empty()) {
    bundle = load_bundle(a.model);
  } else if (fs::is_directory(a.out)) {
    bundle = load_bundle(a.out);
  }
  run_pipeline(catalog, split, stages, kind, config, bundle);
  save_bundle(a.out, bundle);
  for (const auto& [name, log] : bundle.logs) {
    const auto& best = log.epochs.at(log.best_epoch - 1);
    std::cout << name << ": best epoch " << log.best_epoch << " of " << log.epochs.size()
              << ", validation auc " << format_percent(best.val_metric) << "\n";
  }
}

struct EvalArgs {
  std::string config;
  std::string catalog;
  std::string split;
  std::string model;
  std::string home;
  std::uint64_t seed = 1;
  std::string out;
};

void run_eval(const EvalArgs& a) {
  const PipelineConfig config = read_config(a.config, std::nullopt);
  const Catalog catalog = load_catalog(a.catalog);
  const DatasetSplit split = read_split(a.split, catalog);
  const ModelBundle bundle = load_bundle(a.model);
  ResultTable rows = evaluate_bundle(bundle, catalog, split, config.train, a.seed);
  if (!a.home.empty()) {
    const PairKeySet positives = split.all_positive_keys();
    for (const auto& s : bundle_scorers(bundle, catalog)) {
      const ResultTable slices =
          evaluate_cross_category(s.name, s.scorer, catalog, split.test, a.home, positives,
                                  config.train.neg_ratio, config.train.freq_power, a.seed);
      rows.insert(rows.end(), slices.begin(), slices.end());
    }
  }
  const RenderedTable report = render_table(rows);
  const fs::path dir(a.out);
  fs::create_directories(dir);
  open_out(dir / "report.txt") << report.text;
  open_out(dir / "report.json") << report.json;
  std::cout << report.text;
}

struct EmbedArgs {
  std::string catalog;
  std::string model;
  std::string fusion = "compressed";
  std::uint64_t seed = 1;
  std::string out;
};

void run_embed(const EmbedArgs& a) {
  const Catalog catalog = load_catalog(a.catalog);
  const ModelBundle bundle = load_bundle(a.model);
  const std::string kind = a.fusion == "perf" ? "ciu" : a.fusion;
  const EmbeddingStore store = export_embeddings(bundle, catalog, kind, a.seed);
  const fs::path dir(a.out);
  fs::create_directories(dir);
  save_store((dir / (kind + ".store")).string(), store);
  std::cout << kind << ": " << store.ids.size() << " vectors of dim " << store.vectors.cols << "\n";
}

struct RetrieveArgs {
  std::string store;
  std::string query;
  std::size_t k = 10;
  std::string out;
};

void run_retrieve(const RetrieveArgs& a) {
  const EmbeddingStore store = load_store(a.store);
  const auto hits = topk_retrieve(store, a.query, a.k);
  std::string text;
  for (std::size_t r = 0; r < hits.size(); ++r) {
    text += std::to_string(r + 1) + '\t' + hits[r].id + '\t';
    io_detail::append_real(text, hits[r].score);
    text += '\n';
  }
  if (!a.out.empty()) {
    fs::create_directories(a.out);
    open_out(fs::path(a.out) / "retrieve.tsv") << text;
  }
  std::cout << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"c2v: multimodal product embeddings for co-purchase prediction"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "generate a synthetic catalog and co-purchase pairs");
  s->add_option("--config", synth.config, "synthetic config (flat TOML)");
  s->add_option("--seed", synth.seed, "overrides the config seed");
  s->add_option("--out", synth.out, "output directory")->required();

  SplitArgs split;
  auto* sp = app.add_subcommand("split", "split pairs into train/validation/test");
  sp->add_option("--catalog", split.catalog, "catalog (JSON Lines)")->required();
  sp->add_option("--pairs", split.pairs, "pairs (TSV)")->required();
  sp->add_option("--regime", split.regime, "soft or hard")->check(CLI::IsMember({"soft", "hard"}));
  sp->add_option("--top-k", split.top_k, "soft: most connected products kept (0 = all)");
  sp->add_option("--link-fraction", split.link_fraction, "soft: fraction of links kept");
  sp->add_option("--validation", split.validation, "validation fraction");
  sp->add_option("--test", split.test, "test fraction");
  sp->add_option("--seed", split.seed, "split seed");
  sp->add_option("--out", split.out, "output directory")->required();

  TrainArgs train;
  auto* t = app.add_subcommand("train", "train encoders and fusion");
  t->add_option("--config", train.config, "model config (flat TOML)");
  t->add_option("--catalog", train.catalog, "catalog (JSON Lines)")->required();
  t->add_option("--split", train.split, "split directory")->required();
  t->add_option("--stage", train.stage, "image, text, cf, fusion, a comma list, or all");
  t->add_option("--fusion", train.fusion, "linear, ciu (perf), compressed or crossfeat");
  t->add_option("--model", train.model, "bundle holding earlier stages (default: --out)");
  t->add_option("--seed", train.seed, "overrides every seed in the config");
  t->add_option("--out", train.out, "model directory")->required();

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "evaluate a trained bundle on the test split");
  e->add_option("--config", eval.config, "model config (negative sampling settings)");
  e->add_option("--catalog", eval.catalog, "catalog (JSON Lines)")->required();
  e->add_option("--split", eval.split, "split directory")->required();
  e->add_option("--model", eval.model, "model directory")->required();
  e->add_option("--home", eval.home, "home category for same/other/mixed slices");
  e->add_option("--seed", eval.seed, "test negative seed");
  e->add_option("--out", eval.out, "report directory")->required();

  EmbedArgs embed;
  auto* em = app.add_subcommand("embed", "export an embedding store");
  em->add_option("--catalog", embed.catalog, "catalog (JSON Lines)")->required();
  em->add_option("--model", embed.model, "model directory")->required();
  em->add_option("--fusion", embed.fusion, "image, text, cf, linear, ciu (perf) or compressed");
  em->add_option("--seed", embed.seed, "seed recorded in the store header");
  em->add_option("--out", embed.out, "output directory")->required();

  RetrieveArgs retrieve;
  auto* r = app.add_subcommand("retrieve", "exact top-k inner-product retrieval");
  r->add_option("--store", retrieve.store, "embedding store")->required();
  r->add_option("--query", retrieve.query, "query product id")->required();
  r->add_option("--k", retrieve.k, "number of results")->check(CLI::PositiveNumber);
  r->add_option("--out", retrieve.out, "optional output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    if (code != 0) std::cerr << app.help();
    return code == 0 ? 0 : 1;
  }

  try {
    thread_cap();
    if (*s) run_synth(synth);
    if (*sp) run_split(split);
    if (*t) run_train(train);
    if (*e) run_eval(eval);
    if (*em) run_embed(embed);
    if (*r) run_retrieve(retrieve);
  } catch (const UsageError& err) {
    std::cerr << "usage error: " << err.what() << "\n";
    return 1;
  } catch (const NumericError& err) {
    std::cerr << "numeric error: " << err.what() << "\n";
    return 3;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  }
  return 0;
}
