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

// Catalog (JSON Lines) and pair (TSV) files.

#pragma once

#include <charconv>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "json.hpp"

#include "c2v/data.hpp"
#include "c2v/tokenizer.hpp"

namespace c2v {

// One JSON object per line:
//   {"id": str, "category": str, "text": str, "image_features": [num, ...]}
// `expected_image_dim`, when given, is enforced for every record.
inline Catalog parse_catalog(std::istream& in, std::string_view source = "<catalog>",
                             std::optional<std::size_t> expected_image_dim = std::nullopt) {
  std::vector<ProductRecord> records;
  std::unordered_map<std::string, std::size_t> seen;  // id -> line
  std::string line;
  std::size_t line_no = 0;
  std::optional<std::size_t> dim = expected_image_dim;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      fail(source, ":", line_no, ": invalid JSON (", e.what(), ")");
    }
    ProductRecord r;
    try {
      r.id = j.at("id").get<std::string>();
      r.category = j.at("category").get<std::string>();
      r.tokens = split_words(j.at("text").get<std::string>());
      r.image_features = j.at("image_features").get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
      fail(source, ":", line_no, ": malformed product record (", e.what(), ")");
    }
    if (r.id.empty()) fail(source, ":", line_no, ": empty product id");
    if (auto it = seen.find(r.id); it != seen.end()) {
      fail(source, ":", line_no, ": duplicate product id `", r.id, "` (first seen on line ",
           it->second, ")");
    }
    if (!all_finite(r.image_features)) {
      fail(source, ":", line_no, ": non-finite image feature for `", r.id, "`");
    }
    if (!dim) dim = r.image_features.size();
    if (r.image_features.size() != *dim) {
      fail<DimensionError>(source, ":", line_no, ": product `", r.id, "` has ",
                           r.image_features.size(), " image features, expected ", *dim);
    }
    seen.emplace(r.id, line_no);
    records.push_back(std::move(r));
  }
  return Catalog::from_records(std::move(records));
}

inline Catalog load_catalog(const std::string& path,
                            std::optional<std::size_t> expected_image_dim = std::nullopt) {
  std::ifstream in(path);
  if (!in) fail("cannot open catalog file ", path);
  return parse_catalog(in, path, expected_image_dim);
}

inline void write_catalog(std::ostream& out, const Catalog& catalog) {
  for (const ProductRecord& r : catalog) {
    std::string text;
    for (const auto& t : r.tokens) {
      if (!text.empty()) text.push_back(' ');
      text += t;
    }
    nlohmann::ordered_json j;
    j["id"] = r.id;
    j["category"] = r.category;
    j["text"] = text;
    j["image_features"] = r.image_features;
    out << j.dump() << '\n';
  }
}

inline void save_catalog(const std::string& path, const Catalog& catalog) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write catalog file ", path);
  write_catalog(out, catalog);
}

// `id_a<TAB>id_b<TAB>count` lines, no header. Duplicate lines aggregate.
inline PairSet parse_pairs(std::istream& in, const Catalog& catalog,
                           std::string_view source = "<pairs>") {
  std::vector<Pair> raw;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::size_t pos = 0;
    while (true) {
      const auto tab = line.find('\t', pos);
      cols.push_back(line.substr(pos, tab - pos));
      if (tab == std::string::npos) break;
      pos = tab + 1;
    }
    if (cols.size() != 3) fail(source, ":", line_no, ": expected 3 tab-separated columns");
    const auto a = catalog.find(cols[0]);
    const auto b = catalog.find(cols[1]);
    if (!a) fail(source, ":", line_no, ": unknown product id `", cols[0], "`");
    if (!b) fail(source, ":", line_no, ": unknown product id `", cols[1], "`");
    if (*a == *b) fail(source, ":", line_no, ": self-pair on `", cols[0], "`");
    std::uint32_t count = 0;
    const char* first = cols[2].data();
    const char* last = first + cols[2].size();
    auto [p, ec] = std::from_chars(first, last, count);
    if (ec != std::errc() || p != last || count == 0) {
      fail(source, ":", line_no, ": count must be a positive integer, got `", cols[2], "`");
    }
    raw.push_back({*a, *b, count});
  }
  return PairSet::from_pairs(std::move(raw));
}

inline PairSet load_pairs(const std::string& path, const Catalog& catalog) {
  std::ifstream in(path);
  if (!in) fail("cannot open pairs file ", path);
  return parse_pairs(in, catalog, path);
}

inline void write_pairs(std::ostream& out, const PairSet& pairs, const Catalog& catalog) {
  for (const Pair& p : pairs) {
    out << catalog[p.a].id << '\t' << catalog[p.b].id << '\t' << p.count << '\n';
  }
}

inline void save_pairs(const std::string& path, const PairSet& pairs, const Catalog& catalog) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write pairs file ", path);
  write_pairs(out, pairs, catalog);
}

}  // namespace c2v
