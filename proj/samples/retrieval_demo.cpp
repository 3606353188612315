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

// Trains image and text encoders plus the compressed fusion on a small
// synthetic catalog, exports one vector per product and runs exact top-k
// retrieval for a few query products.

#include <cstdio>
#include <iostream>

#include "c2v/pipeline.hpp"
#include "c2v/synthetic.hpp"

int main() {
  using namespace c2v;
  SynthConfig sc;
  sc.n_products = 400;
  sc.n_clusters = 8;
  const SyntheticData data = generate_synthetic(sc);
  const DatasetSplit split = make_soft_cold_start_split(
      data.pairs, data.pairs.products().size(), 1.0, 0.1, 0.1, /*seed=*/7);

  PipelineConfig pc;
  pc.train.max_epochs = 15;
  pc.train.patience = 5;
  pc.image.d_out = 16;
  pc.image.train = pc.train;
  pc.image.train.learning_rate = 0.005;
  pc.text.d_txt = 16;
  pc.text.word2vec.d_word = 8;
  pc.text.word2vec.min_count = 1;
  pc.text.word2vec.epochs = 10;
  pc.text.train = pc.train;
  pc.fusion.d_z = 32;
  pc.fusion.train = pc.train;

  const ModelBundle bundle = run_pipeline(data.catalog, split,
                                          {Stage::image, Stage::text, Stage::fusion},
                                          FusionKind::compressed, pc);
  const EmbeddingStore store = export_embeddings(bundle, data.catalog, "compressed", 7);
  std::cout << "store: " << store.size() << " products, dim " << store.dim() << "\n";

  for (ProductIndex q : {0u, 1u, 2u}) {
    const std::string& id = data.catalog[q].id;
    std::cout << "\nquery " << id << " (cluster " << data.truth.cluster[q] << ")\n";
    for (const Hit& h : topk_retrieve(store, id, 5)) {
      const ProductIndex p = *data.catalog.find(h.id);
      std::printf("  %s  score %8.3f  cluster %u\n", h.id.c_str(), h.score,
                  static_cast<unsigned>(data.truth.cluster[p]));
    }
  }
  return 0;
}
