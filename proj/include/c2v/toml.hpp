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

// Reader for flat TOML documents: `key = value` lines with integer, float,
// boolean or basic-string values and `#` comments. Tables and arrays are
// rejected.

#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>

#include "c2v/error.hpp"

namespace c2v::toml {

using Value = std::variant<std::int64_t, double, bool, std::string>;

class FlatTable {
 public:
  static FlatTable parse(std::string_view text, std::string_view source = "<string>") {
    FlatTable t;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
      const std::size_t end = std::min(text.find('\n', pos), text.size());
      std::string_view line = text.substr(pos, end - pos);
      pos = end + 1;
      ++line_no;
      line = strip_comment(line);
      line = trim(line);
      if (line.empty()) {
        if (end == text.size()) break;
        continue;
      }
      if (line.front() == '[') {
        fail<ConfigError>(source, ":", line_no, ": tables are not supported in flat config");
      }
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) {
        fail<ConfigError>(source, ":", line_no, ": expected `key = value`");
      }
      const std::string key(trim(line.substr(0, eq)));
      const std::string_view raw = trim(line.substr(eq + 1));
      if (key.empty() || raw.empty()) {
        fail<ConfigError>(source, ":", line_no, ": empty key or value");
      }
      if (t.values_.count(key) != 0) {
        fail<ConfigError>(source, ":", line_no, ": duplicate key `", key, "`");
      }
      t.values_.emplace(key, parse_value(raw, source, line_no));
      if (end == text.size()) break;
    }
    return t;
  }

  static FlatTable parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail<DataError>("cannot open config file ", path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path);
  }

  bool contains(const std::string& key) const { return values_.count(key) != 0; }

  std::int64_t get_int(const std::string& key) const {
    const Value& v = at(key);
    if (const auto* i = std::get_if<std::int64_t>(&v)) return *i;
    fail<ConfigError>("config key `", key, "` must be an integer");
  }

  double get_double(const std::string& key) const {
    const Value& v = at(key);
    if (const auto* d = std::get_if<double>(&v)) return *d;
    if (const auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
    fail<ConfigError>("config key `", key, "` must be a number");
  }

  bool get_bool(const std::string& key) const {
    const Value& v = at(key);
    if (const auto* b = std::get_if<bool>(&v)) return *b;
    fail<ConfigError>("config key `", key, "` must be a boolean");
  }

  std::string get_string(const std::string& key) const {
    const Value& v = at(key);
    if (const auto* s = std::get_if<std::string>(&v)) return *s;
    fail<ConfigError>("config key `", key, "` must be a string");
  }

  template <class T>
  T get_or(const std::string& key, T fallback) const {
    if (!contains(key)) return fallback;
    if constexpr (std::is_same_v<T, bool>) {
      return get_bool(key);
    } else if constexpr (std::is_integral_v<T>) {
      const auto v = get_int(key);
      if (v < 0 && std::is_unsigned_v<T>) {
        fail<ConfigError>("config key `", key, "` must be non-negative");
      }
      return static_cast<T>(v);
    } else if constexpr (std::is_floating_point_v<T>) {
      return static_cast<T>(get_double(key));
    } else {
      return get_string(key);
    }
  }

  // Rejects keys outside `allowed`.
  void expect_only(const std::set<std::string>& allowed) const {
    for (const auto& [k, _] : values_) {
      if (allowed.count(k) == 0) fail<ConfigError>("unknown config key `", k, "`");
    }
  }

  const std::map<std::string, Value>& values() const { return values_; }

 private:
  const Value& at(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) fail<ConfigError>("missing config key `", key, "`");
    return it->second;
  }

  static std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  // Drops a trailing comment, ignoring `#` inside a quoted string.
  static std::string_view strip_comment(std::string_view s) {
    bool quoted = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] == '"' && (i == 0 || s[i - 1] != '\\')) quoted = !quoted;
      if (s[i] == '#' && !quoted) return s.substr(0, i);
    }
    return s;
  }

  static Value parse_value(std::string_view raw, std::string_view source,
                           std::size_t line_no) {
    if (raw == "true") return true;
    if (raw == "false") return false;
    if (raw.front() == '"') {
      if (raw.size() < 2 || raw.back() != '"') {
        fail<ConfigError>(source, ":", line_no, ": unterminated string");
      }
      std::string out;
      for (std::size_t i = 1; i + 1 < raw.size(); ++i) {
        if (raw[i] == '\\' && i + 2 < raw.size()) {
          const char n = raw[++i];
          out.push_back(n == 'n' ? '\n' : n == 't' ? '\t' : n);
        } else {
          out.push_back(raw[i]);
        }
      }
      return out;
    }
    std::string cleaned;
    for (char c : raw) {
      if (c != '_') cleaned.push_back(c);
    }
    const char* first = cleaned.data();
    const char* last = first + cleaned.size();
    if (*first == '+') ++first;
    const bool looks_float = cleaned.find_first_of(".eE") != std::string::npos ||
                             cleaned == "inf" || cleaned == "nan";
    if (!looks_float) {
      std::int64_t i = 0;
      auto [p, ec] = std::from_chars(first, last, i);
      if (ec == std::errc() && p == last) return i;
    } else {
      double d = 0.0;
      auto [p, ec] = std::from_chars(first, last, d);
      if (ec == std::errc() && p == last) return d;
    }
    fail<ConfigError>(source, ":", line_no, ": cannot parse value `", raw, "`");
  }

  std::map<std::string, Value> values_;
};

}  // namespace c2v::toml
