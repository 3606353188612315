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

// Binary model files, text embedding stores and exact top-k retrieval.
//
// Model file layout (all integers little-endian):
//   "C2V1"
//   u32 metadata byte length, then UTF-8 `key=value` lines
//   u32 block count, then per block:
//     u32 name length, name bytes, u64 rows, u64 cols, rows*cols f64 values

#pragma once

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "json.hpp"

#include "c2v/cf.hpp"
#include "c2v/core_math.hpp"
#include "c2v/fusion.hpp"
#include "c2v/image.hpp"
#include "c2v/text.hpp"

namespace c2v {

// ---------------------------------------------------------------------------
// Model file

struct ModelBlock {
  std::string name;
  std::uint64_t rows = 0;
  std::uint64_t cols = 0;
  std::vector<double> values;

  bool operator==(const ModelBlock& o) const {
    if (name != o.name || rows != o.rows || cols != o.cols || values.size() != o.values.size()) {
      return false;
    }
    // Bitwise, so that -0.0 and NaN payloads count.
    return values.empty() ||
           std::memcmp(values.data(), o.values.data(), values.size() * sizeof(double)) == 0;
  }
};

struct ModelFile {
  std::vector<std::pair<std::string, std::string>> metadata;  // in file order
  std::vector<ModelBlock> blocks;

  void set(const std::string& key, const std::string& value) {
    if (key.empty() || key.find_first_of("=\n") != std::string::npos ||
        value.find('\n') != std::string::npos) {
      fail("model file: invalid metadata entry `", key, "`");
    }
    for (auto& [k, v] : metadata) {
      if (k == key) {
        v = value;
        return;
      }
    }
    metadata.emplace_back(key, value);
  }

  std::optional<std::string> find(const std::string& key) const {
    for (const auto& [k, v] : metadata) {
      if (k == key) return v;
    }
    return std::nullopt;
  }

  std::string get(const std::string& key) const {
    auto v = find(key);
    if (!v) fail("model file: missing metadata key `", key, "`");
    return *v;
  }

  std::string kind() const { return get("kind"); }

  void add(std::string name, std::uint64_t rows, std::uint64_t cols,
           std::span<const double> values) {
    check_dims(values.size(), rows * cols, "model block size");
    blocks.push_back({std::move(name), rows, cols, {values.begin(), values.end()}});
  }
  void add(std::string name, const DenseMatrix& m) { add(std::move(name), m.rows, m.cols, m.values); }
  void add(std::string name, const DenseVector& v) { add(std::move(name), v.size(), 1, v); }
  void add(std::string name, double x) { add(std::move(name), 1, 1, std::span<const double>(&x, 1)); }

  const ModelBlock& block(const std::string& name) const {
    for (const auto& b : blocks) {
      if (b.name == name) return b;
    }
    fail("model file: missing parameter block `", name, "`");
  }

  DenseMatrix matrix(const std::string& name) const {
    const auto& b = block(name);
    DenseMatrix m(b.rows, b.cols);
    m.values = b.values;
    return m;
  }
  DenseVector vector(const std::string& name) const {
    const auto& b = block(name);
    if (b.cols != 1 && b.rows * b.cols != 0) fail("model file: block `", name, "` is not a vector");
    return b.values;
  }
  double scalar(const std::string& name) const {
    const auto& b = block(name);
    if (b.values.size() != 1) fail("model file: block `", name, "` is not a scalar");
    return b.values[0];
  }

  bool operator==(const ModelFile&) const = default;
};

namespace io_detail {

inline void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  out.write(b, 4);
}
inline void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xffu);
  out.write(b, 8);
}
inline std::uint64_t get_uint(std::istream& in, int bytes, const char* what) {
  unsigned char b[8] = {};
  if (!in.read(reinterpret_cast<char*>(b), bytes)) fail("model file: truncated ", what);
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}
inline std::string get_bytes(std::istream& in, std::uint64_t n, const char* what) {
  if (n > (1ULL << 32)) fail("model file: implausible ", what, " length ", n);
  std::string s(n, '\0');
  if (n > 0 && !in.read(s.data(), static_cast<std::streamsize>(n))) {
    fail("model file: truncated ", what);
  }
  return s;
}

}  // namespace io_detail

inline void write_model_file(std::ostream& out, const ModelFile& f) {
  using namespace io_detail;
  out.write("C2V1", 4);
  std::string meta;
  for (const auto& [k, v] : f.metadata) meta += k + "=" + v + "\n";
  put_u32(out, static_cast<std::uint32_t>(meta.size()));
  out.write(meta.data(), static_cast<std::streamsize>(meta.size()));
  put_u32(out, static_cast<std::uint32_t>(f.blocks.size()));
  for (const auto& b : f.blocks) {
    put_u32(out, static_cast<std::uint32_t>(b.name.size()));
    out.write(b.name.data(), static_cast<std::streamsize>(b.name.size()));
    put_u64(out, b.rows);
    put_u64(out, b.cols);
    for (double x : b.values) put_u64(out, std::bit_cast<std::uint64_t>(x));
  }
}

inline ModelFile read_model_file(std::istream& in) {
  using namespace io_detail;
  char magic[4];
  if (!in.read(magic, 4) || std::string_view(magic, 4) != "C2V1") {
    fail("model file: bad magic (expected C2V1)");
  }
  ModelFile f;
  const std::string meta = get_bytes(in, get_uint(in, 4, "metadata length"), "metadata");
  std::istringstream lines(meta);
  std::string line;
  while (std::getline(lines, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail("model file: malformed metadata line `", line, "`");
    f.metadata.emplace_back(line.substr(0, eq), line.substr(eq + 1));
  }
  const auto n_blocks = get_uint(in, 4, "block count");
  for (std::uint64_t i = 0; i < n_blocks; ++i) {
    ModelBlock b;
    b.name = get_bytes(in, get_uint(in, 4, "block name length"), "block name");
    b.rows = get_uint(in, 8, "block rows");
    b.cols = get_uint(in, 8, "block cols");
    if (b.cols != 0 && b.rows > (1ULL << 40) / b.cols) fail("model file: implausible block shape");
    b.values.resize(b.rows * b.cols);
    for (double& x : b.values) x = std::bit_cast<double>(get_uint(in, 8, "block values"));
    f.blocks.push_back(std::move(b));
  }
  return f;
}

inline void save_model_file(const std::string& path, const ModelFile& f) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write model file ", path);
  write_model_file(out, f);
  if (!out) fail("error writing model file ", path);
}

inline ModelFile load_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open model file ", path);
  return read_model_file(in);
}

// Every named parameter block of a model, plus `kind`.
template <class M>
ModelFile params_to_model_file(const M& model, const std::string& kind) {
  ModelFile f;
  f.set("format", "1");
  f.set("kind", kind);
  for (const auto& p : M::params(model)) f.add(std::string(p.name), p.rows, p.cols, p.values);
  return f;
}

inline void expect_kind(const ModelFile& f, const std::string& kind) {
  if (f.kind() != kind) fail("model file holds kind `", f.kind(), "`, expected `", kind, "`");
}

inline ModelFile to_model_file(const ImageHead& h) { return params_to_model_file(h, "image"); }

inline ImageHead image_head_from(const ModelFile& f) {
  expect_kind(f, "image");
  ImageHead h;
  h.w = f.matrix("w");
  h.b = f.vector("b");
  h.alpha = f.scalar("alpha");
  h.beta = f.scalar("beta");
  check_dims(h.b.size(), h.w.rows, "image head bias");
  return h;
}

inline std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t x : v) s += (s.empty() ? "" : ",") + std::to_string(x);
  return s;
}

inline ModelFile to_model_file(const TextEncoder& e) {
  ModelFile f = params_to_model_file(e, "text");
  f.set("max_len", std::to_string(e.max_len));
  f.set("widths", join_sizes(e.widths));
  return f;
}

inline TextEncoder text_encoder_from(const ModelFile& f) {
  expect_kind(f, "text");
  TextEncoder e;
  e.max_len = std::stoul(f.get("max_len"));
  std::stringstream ws(f.get("widths"));
  for (std::string w; std::getline(ws, w, ',');) e.widths.push_back(std::stoul(w));
  e.name_blocks();
  for (std::size_t k = 0; k < e.widths.size(); ++k) {
    e.filters.push_back(f.matrix(e.block_names[2 * k]));
    e.biases.push_back(f.vector(e.block_names[2 * k + 1]));
  }
  e.alpha = f.scalar("alpha");
  e.beta = f.scalar("beta");
  return e;
}

inline ModelFile to_model_file(const CFEmbeddings& e) {
  ModelFile f = params_to_model_file(e, "cf");
  f.set("categories", nlohmann::json(e.categories).dump());
  std::vector<double> trained(e.trained.begin(), e.trained.end());
  f.add("trained", trained.size(), 1, trained);
  return f;
}

inline CFEmbeddings cf_embeddings_from(const ModelFile& f) {
  expect_kind(f, "cf");
  CFEmbeddings e;
  e.product_vectors = f.matrix("product_vectors");
  e.category_vectors = f.matrix("category_vectors");
  e.alpha = f.scalar("alpha");
  e.beta = f.scalar("beta");
  e.categories = nlohmann::json::parse(f.get("categories")).get<std::vector<std::string>>();
  for (double x : f.vector("trained")) e.trained.push_back(x != 0.0 ? 1 : 0);
  check_dims(e.trained.size(), e.product_vectors.rows, "cf trained flags");
  return e;
}

inline ModelFile to_model_file(const FusionModel& m, const std::vector<Modality>& modalities) {
  ModelFile f;
  switch (m.kind) {
    case FusionKind::linear: f = params_to_model_file(m.linear, "linear"); break;
    case FusionKind::ciu: f = params_to_model_file(m.ciu, "ciu"); break;
    case FusionKind::compressed:
      f = params_to_model_file(m.compressed, "compressed");
      f.set("sources", nlohmann::json(m.compressed.sources).dump());
      break;
    case FusionKind::crossfeat:
      f = params_to_model_file(m.crossfeat, "crossfeat");
      f.add("boundaries_a", m.crossfeat.boundaries_a);
      f.add("boundaries_b", m.crossfeat.boundaries_b);
      break;
  }
  std::string mods;
  for (Modality x : modalities) mods += (mods.empty() ? "" : ",") + std::string(modality_name(x));
  f.set("modalities", mods);
  return f;
}

inline FusionModel fusion_model_from(const ModelFile& f) {
  FusionModel m;
  m.kind = parse_fusion_kind(f.kind());
  switch (m.kind) {
    case FusionKind::linear: m.linear.w = f.vector("w"); break;
    case FusionKind::ciu:
      m.ciu.w = f.vector("w");
      m.ciu.w_res = f.scalar("w_res");
      m.ciu.f_w = f.matrix("f_w");
      m.ciu.f_b = f.vector("f_b");
      m.ciu.alpha_res = f.scalar("alpha_res");
      m.ciu.beta_res = f.scalar("beta_res");
      break;
    case FusionKind::compressed:
      m.compressed.c_w = f.matrix("c_w");
      m.compressed.c_b = f.vector("c_b");
      m.compressed.alpha_z = f.scalar("alpha_z");
      m.compressed.beta_z = f.scalar("beta_z");
      m.compressed.sources =
          nlohmann::json::parse(f.get("sources")).get<std::vector<ProductIndex>>();
      break;
    case FusionKind::crossfeat:
      m.crossfeat.w_a = f.vector("w_a");
      m.crossfeat.w_b = f.vector("w_b");
      m.crossfeat.w_ab = f.vector("w_ab");
      m.crossfeat.bias = f.scalar("bias");
      m.crossfeat.boundaries_a = f.vector("boundaries_a");
      m.crossfeat.boundaries_b = f.vector("boundaries_b");
      break;
  }
  return m;
}

inline ModelFile to_model_file(const EnsembleWeights& e) {
  return params_to_model_file(e, "ensemble");
}

inline EnsembleWeights ensemble_from(const ModelFile& f) {
  expect_kind(f, "ensemble");
  return {f.scalar("w_content"), f.scalar("w_cf"), f.scalar("bias")};
}

// ---------------------------------------------------------------------------
// Text vectors

namespace io_detail {

inline void append_real(std::string& s, double x) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  s.append(buf, r.ptr);
}

inline std::vector<double> parse_reals(std::string_view s, std::string_view where) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos < s.size()) {
    while (pos < s.size() && s[pos] == ' ') ++pos;
    if (pos >= s.size()) break;
    double x = 0.0;
    const auto r = std::from_chars(s.data() + pos, s.data() + s.size(), x);
    if (r.ec != std::errc()) fail(where, ": malformed number");
    pos = static_cast<std::size_t>(r.ptr - s.data());
    if (pos < s.size() && s[pos] != ' ') fail(where, ": malformed number");
    out.push_back(x);
  }
  return out;
}

// "key=value" attributes of a header line after the first `skip` words.
inline std::vector<std::pair<std::string, std::string>> header_attributes(
    const std::string& line, std::size_t skip, std::string_view where) {
  std::istringstream ss(line);
  std::vector<std::pair<std::string, std::string>> out;
  std::string word;
  for (std::size_t i = 0; ss >> word; ++i) {
    if (i < skip) continue;
    const auto eq = word.find('=');
    if (eq == std::string::npos) fail(where, ": malformed header attribute `", word, "`");
    out.emplace_back(word.substr(0, eq), word.substr(eq + 1));
  }
  return out;
}

inline void write_rows(std::ostream& out, const std::vector<std::string>& names,
                       const DenseMatrix& m) {
  std::string line;
  for (std::size_t r = 0; r < m.rows; ++r) {
    line = names[r];
    line.push_back('\t');
    const auto row = m.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c > 0) line.push_back(' ');
      append_real(line, row[c]);
    }
    line.push_back('\n');
    out << line;
  }
}

inline void read_rows(std::istream& in, std::size_t dim, std::string_view source,
                      std::vector<std::string>& names, DenseMatrix& m) {
  std::string line;
  std::size_t line_no = 1;
  m = DenseMatrix(0, dim);
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    const std::string where = std::string(source) + ":" + std::to_string(line_no);
    if (tab == std::string::npos) fail(where, ": expected `name<TAB>values`");
    auto values = parse_reals(std::string_view(line).substr(tab + 1), where);
    if (values.size() != dim) {
      fail<DimensionError>(where, ": ", values.size(), " values, expected ", dim);
    }
    names.push_back(line.substr(0, tab));
    m.values.insert(m.values.end(), values.begin(), values.end());
    ++m.rows;
  }
}

}  // namespace io_detail

inline void write_word_embeddings(std::ostream& out, const WordEmbeddings& w) {
  out << "c2v-words v1 dim=" << w.dim() << " vocab=" << w.size() << "\n";
  io_detail::write_rows(out, w.tokens, w.vectors);
}

inline WordEmbeddings read_word_embeddings(std::istream& in, std::string_view source = "<words>") {
  std::string header;
  if (!std::getline(in, header) || header.rfind("c2v-words v1", 0) != 0) {
    fail(source, ": missing `c2v-words v1` header");
  }
  std::size_t dim = 0;
  std::size_t vocab = 0;
  for (const auto& [k, v] : io_detail::header_attributes(header, 2, source)) {
    if (k == "dim") dim = std::stoul(v);
    if (k == "vocab") vocab = std::stoul(v);
  }
  WordEmbeddings w;
  io_detail::read_rows(in, dim, source, w.tokens, w.vectors);
  if (w.size() != vocab) fail(source, ": header says vocab=", vocab, ", found ", w.size());
  w.reindex();
  return w;
}

inline void save_word_embeddings(const std::string& path, const WordEmbeddings& w) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write ", path);
  write_word_embeddings(out, w);
}

inline WordEmbeddings load_word_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open ", path);
  return read_word_embeddings(in, path);
}

// ---------------------------------------------------------------------------
// Embedding store

struct EmbeddingStore {
  std::string kind;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> attributes;  // extra header fields
  std::vector<std::string> ids;
  DenseMatrix vectors;

  std::size_t dim() const { return vectors.cols; }
  std::size_t size() const { return ids.size(); }

  std::optional<std::size_t> find(const std::string& id) const {
    if (index_.size() != ids.size()) {
      index_.clear();
      for (std::size_t i = 0; i < ids.size(); ++i) index_.emplace(ids[i], i);
    }
    auto it = index_.find(id);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  bool operator==(const EmbeddingStore& o) const {
    return kind == o.kind && seed == o.seed && attributes == o.attributes && ids == o.ids &&
           vectors.rows == o.vectors.rows && vectors.cols == o.vectors.cols &&
           (vectors.values.empty() ||
            std::memcmp(vectors.values.data(), o.vectors.values.data(),
                        vectors.values.size() * sizeof(double)) == 0);
  }

 private:
  mutable std::unordered_map<std::string, std::size_t> index_;
};

inline void write_store(std::ostream& out, const EmbeddingStore& s) {
  out << "c2v-store v1 dim=" << s.dim() << " kind=" << s.kind << " seed=" << s.seed;
  for (const auto& [k, v] : s.attributes) out << ' ' << k << '=' << v;
  out << '\n';
  io_detail::write_rows(out, s.ids, s.vectors);
}

inline EmbeddingStore read_store(std::istream& in, std::string_view source = "<store>") {
  std::string header;
  if (!std::getline(in, header) || header.rfind("c2v-store v1", 0) != 0) {
    fail(source, ": missing `c2v-store v1` header");
  }
  EmbeddingStore s;
  std::optional<std::size_t> dim;
  for (auto& [k, v] : io_detail::header_attributes(header, 2, source)) {
    if (k == "dim") {
      dim = std::stoul(v);
    } else if (k == "kind") {
      s.kind = v;
    } else if (k == "seed") {
      s.seed = std::stoull(v);
    } else {
      s.attributes.emplace_back(std::move(k), std::move(v));
    }
  }
  if (!dim || *dim == 0) fail(source, ": header lacks a positive dim");
  io_detail::read_rows(in, *dim, source, s.ids, s.vectors);
  std::vector<std::string> sorted = s.ids;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
    fail(source, ": duplicate id in store");
  }
  return s;
}

inline void save_store(const std::string& path, const EmbeddingStore& s) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write store ", path);
  write_store(out, s);
}

inline EmbeddingStore load_store(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open store ", path);
  return read_store(in, path);
}

// ---------------------------------------------------------------------------
// Retrieval

struct Hit {
  std::string id;
  double score = 0.0;
  bool operator==(const Hit&) const = default;
};

// Exact top-k by inner product, descending; ties by ascending id. `exclude`
// (a store row) is skipped.
inline std::vector<Hit> topk_retrieve(const EmbeddingStore& store, std::span<const double> query,
                                      std::size_t k,
                                      std::optional<std::size_t> exclude = std::nullopt) {
  if (k == 0) fail<UsageError>("k must be >= 1");
  check_dims(query.size(), store.dim(), "topk_retrieve (query)");
  std::vector<Hit> all;
  all.reserve(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) {
    if (exclude && *exclude == i) continue;
    all.push_back({store.ids[i], inner_product(query, store.vectors.row(i))});
  }
  auto better = [](const Hit& a, const Hit& b) {
    return a.score != b.score ? a.score > b.score : a.id < b.id;
  };
  const std::size_t n = std::min(k, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n), all.end(), better);
  all.resize(n);
  return all;
}

inline std::vector<Hit> topk_retrieve(const EmbeddingStore& store, const std::string& query_id,
                                      std::size_t k) {
  const auto row = store.find(query_id);
  if (!row) fail("unknown product id `", query_id, "` in store");
  return topk_retrieve(store, store.vectors.row(*row), k, row);
}

}  // namespace c2v
