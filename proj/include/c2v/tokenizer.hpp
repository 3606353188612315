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

#pragma once

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

namespace c2v {

inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr std::string_view kUnkToken = "<unk>";

namespace detail {

// Byte length of a UTF-8 whitespace code point starting at s[i], or 0.
inline std::size_t utf8_space_len(std::string_view s, std::size_t i) {
  const auto at = [&](std::size_t k) {
    return k < s.size() ? static_cast<unsigned char>(s[k]) : 0u;
  };
  const unsigned c = at(i);
  if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f') return 1;
  if (c == 0xC2 && (at(i + 1) == 0x85 || at(i + 1) == 0xA0)) return 2;
  if (c == 0xE1 && at(i + 1) == 0x9A && at(i + 2) == 0x80) return 3;  // U+1680
  if (c == 0xE2 && at(i + 1) == 0x80) {
    const unsigned n = at(i + 2);
    if ((n >= 0x80 && n <= 0x8A) || n == 0xA8 || n == 0xA9 || n == 0xAF) return 3;
  }
  if (c == 0xE2 && at(i + 1) == 0x81 && at(i + 2) == 0x9F) return 3;  // U+205F
  if (c == 0xE3 && at(i + 1) == 0x80 && at(i + 2) == 0x80) return 3;  // U+3000
  return 0;
}

inline bool is_ascii_punct(char c) {
  return static_cast<unsigned char>(c) < 0x80 && std::ispunct(static_cast<unsigned char>(c));
}

}  // namespace detail

// Lowercases (ASCII), splits on Unicode whitespace and strips leading and
// trailing ASCII punctuation from each token. Tokens that end up empty are
// dropped.
inline std::vector<std::string> split_words(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    std::size_t b = 0;
    std::size_t e = cur.size();
    while (b < e && detail::is_ascii_punct(cur[b])) ++b;
    while (e > b && detail::is_ascii_punct(cur[e - 1])) --e;
    if (e > b) out.emplace_back(cur.substr(b, e - b));
    cur.clear();
  };
  for (std::size_t i = 0; i < text.size();) {
    if (const std::size_t n = detail::utf8_space_len(text, i); n > 0) {
      flush();
      i += n;
      continue;
    }
    const unsigned char c = static_cast<unsigned char>(text[i]);
    cur.push_back(c < 0x80 ? static_cast<char>(std::tolower(c)) : text[i]);
    ++i;
  }
  flush();
  return out;
}

// The first `max_len` words of title followed by description, right-padded
// with the PAD token.
inline std::vector<std::string> tokenize(std::string_view title, std::string_view description,
                                         std::size_t max_len = 10) {
  std::vector<std::string> words = split_words(title);
  for (auto& w : split_words(description)) words.push_back(std::move(w));
  if (words.size() > max_len) words.resize(max_len);
  while (words.size() < max_len) words.emplace_back(kPadToken);
  return words;
}

}  // namespace c2v
