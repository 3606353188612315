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
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "c2v/tokenizer.hpp"
#include "c2v/toml.hpp"

namespace c2v {
namespace {

std::vector<std::string> padded(std::vector<std::string> words, std::size_t len = 10) {
  while (words.size() < len) words.emplace_back(kPadToken);
  return words;
}

TEST(Tokenize, TitleThenDescription) {
  EXPECT_EQ(tokenize("Red Shoes", "comfortable running shoes"),
            padded({"red", "shoes", "comfortable", "running", "shoes"}));
}

TEST(Tokenize, EmptyInputIsAllPadding) { EXPECT_EQ(tokenize("", ""), padded({})); }

TEST(Tokenize, KeepsFirstTenWords) {
  const auto t = tokenize("a b c d e f g h", "i j k l m n o");
  EXPECT_EQ(t, (std::vector<std::string>{"a", "b", "c", "d", "e", "f", "g", "h", "i", "j"}));
}

TEST(Tokenize, CustomLength) {
  EXPECT_EQ(tokenize("one two three", "", 2), (std::vector<std::string>{"one", "two"}));
  EXPECT_EQ(tokenize("one", "", 3), padded({"one"}, 3));
}

TEST(SplitWords, StripsEdgePunctuationOnly) {
  EXPECT_EQ(split_words("\"Hello,\" (world)! don't x-ray ..."),
            (std::vector<std::string>{"hello", "world", "don't", "x-ray"}));
}

TEST(SplitWords, UnicodeWhitespace) {
  // NBSP, em space, ideographic space.
  EXPECT_EQ(split_words("a\xC2\xA0" "b\xE2\x80\x83" "c\xE3\x80\x80" "d\te\nf"),
            (std::vector<std::string>{"a", "b", "c", "d", "e", "f"}));
}

TEST(SplitWords, NonAsciiBytesPreserved) {
  EXPECT_EQ(split_words("CAF\xC3\x89 Caf\xC3\xA9"),
            (std::vector<std::string>{"caf\xC3\x89", "caf\xC3\xA9"}));
}

TEST(SplitWords, OutputIsLowercaseWithoutPadding) {
  for (const auto& w : split_words("ABC DeF ;; ghi")) {
    for (char c : w) EXPECT_FALSE(c >= 'A' && c <= 'Z') << w;
    EXPECT_FALSE(w.empty());
  }
}

TEST(FlatToml, ParsesScalarTypes) {
  const auto t = toml::FlatTable::parse(R"(
# comment line
n = 2_000
x = 0.25   # trailing comment
e = 1e-3
flag = true
name = "ci#u"
neg = -3
)");
  EXPECT_EQ(t.get_int("n"), 2000);
  EXPECT_DOUBLE_EQ(t.get_double("x"), 0.25);
  EXPECT_DOUBLE_EQ(t.get_double("e"), 1e-3);
  EXPECT_DOUBLE_EQ(t.get_double("n"), 2000.0);
  EXPECT_TRUE(t.get_bool("flag"));
  EXPECT_EQ(t.get_string("name"), "ci#u");
  EXPECT_EQ(t.get_int("neg"), -3);
  EXPECT_EQ(t.get_or<std::size_t>("missing", 7), 7u);
}

TEST(FlatToml, Errors) {
  EXPECT_THROW(toml::FlatTable::parse("a = 1\na = 2"), ConfigError);
  EXPECT_THROW(toml::FlatTable::parse("[section]"), ConfigError);
  EXPECT_THROW(toml::FlatTable::parse("novalue"), ConfigError);
  EXPECT_THROW(toml::FlatTable::parse("a = \"open"), ConfigError);
  EXPECT_THROW(toml::FlatTable::parse("a = 1x"), ConfigError);
  const auto t = toml::FlatTable::parse("a = 1.5\nb = -1\nc = \"s\"");
  EXPECT_THROW(t.get_int("a"), ConfigError);
  EXPECT_THROW(t.get_int("missing"), ConfigError);
  EXPECT_THROW(t.get_or<std::size_t>("b", 1), ConfigError);
  EXPECT_THROW(t.get_double("c"), ConfigError);
  EXPECT_THROW(t.expect_only({"a", "b"}), ConfigError);
  EXPECT_NO_THROW(t.expect_only({"a", "b", "c"}));
}

}  // namespace
}  // namespace c2v
