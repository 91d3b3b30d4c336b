// Copyright 2026 The salsa Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "salsa/tokenizer.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <random>

namespace salsa {
namespace {

const Vocabulary& vocab() {
  static const Vocabulary v = Vocabulary::standard();
  return v;
}

TEST(VocabularyTest, StandardHas128Tokens) { EXPECT_EQ(vocab().size(), 128u); }

TEST(VocabularyTest, IdsAndTokensAreInverse) {
  for (TokenId id = 0; id < vocab().size(); ++id) {
    EXPECT_EQ(vocab().id(vocab().token(id)), id);
  }
}

TEST(VocabularyTest, EveryAlphabetCharacterIsPresent) {
  for (char c : kStandardAlphabet) {
    EXPECT_TRUE(vocab().find(std::string(1, c)).has_value()) << int(c);
  }
}

TEST(VocabularyTest, SpecialTokensAreMarkedAndPlaceholderIsNotTheLetter) {
  EXPECT_TRUE(vocab().is_special(vocab().placeholder_id()));
  EXPECT_NE(vocab().placeholder_id(), vocab().id("X"));
  EXPECT_FALSE(vocab().is_special(vocab().id("X")));
  std::size_t specials = 0;
  for (TokenId id = 0; id < vocab().size(); ++id) specials += vocab().is_special(id);
  EXPECT_EQ(specials, 5u);
}

TEST(VocabularyTest, DuplicateTokensAreRejected) {
  EXPECT_THROW(Vocabulary({"a", "b", "a"}), Error);
}

TEST(EncodeTest, EmptyTextIsEmpty) { EXPECT_TRUE(vocab().encode("").empty()); }

TEST(EncodeTest, ClassTokenIsOneId) {
  auto ids = vocab().encode("0");
  ASSERT_EQ(ids.size(), 1u);
  EXPECT_EQ(ids[0], vocab().id("0"));
}

TEST(EncodeTest, GreedyLongestMatchPrefersAtomicTokens) {
  auto ids = vocab().encode("<ANSWER><|X|></ANSWER>");
  ASSERT_EQ(ids.size(), 3u);
  EXPECT_EQ(ids[1], vocab().placeholder_id());
  // A lone '<' still falls back to the character token.
  EXPECT_EQ(vocab().encode("<A").size(), 2u);
}

TEST(EncodeTest, UnknownCharacterReportsCharacterAndOffset) {
  try {
    vocab().encode("ab~c");
    FAIL() << "expected an encoding error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kEncoding);
    const std::string message = e.what();
    EXPECT_NE(message.find("'~'"), std::string::npos) << message;
    EXPECT_NE(message.find("offset 2"), std::string::npos) << message;
  }
}

TEST(DecodeTest, EmptyAndSingle) {
  EXPECT_EQ(vocab().decode({}), "");
  std::vector<TokenId> ids = {vocab().id("A")};
  EXPECT_EQ(vocab().decode(ids), "A");
}

TEST(DecodeTest, OutOfRangeIdIsDecodingError) {
  std::vector<TokenId> ids = {vocab().size()};
  try {
    vocab().decode(ids);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kDecoding);
  }
}

TEST(RoundTripTest, RandomAlphabetStrings) {
  std::mt19937_64 rng(2024);
  // Mix raw characters with fragments of atomic tokens so greedy matching is
  // exercised on partial overlaps.
  std::vector<std::string> pieces;
  for (char c : kStandardAlphabet) pieces.emplace_back(1, c);
  for (const std::string& t : vocab().tokens()) {
    pieces.push_back(t);
    if (t.size() > 2) pieces.push_back(t.substr(0, t.size() / 2));
  }
  std::uniform_int_distribution<std::size_t> pick(0, pieces.size() - 1);
  std::uniform_int_distribution<int> length(0, 40);
  for (int trial = 0; trial < 1000; ++trial) {
    std::string text;
    for (int i = length(rng); i > 0; --i) text += pieces[pick(rng)];
    auto ids = vocab().encode(text);
    EXPECT_EQ(vocab().decode(ids), text);
    EXPECT_EQ(vocab().encode(text), ids);  // deterministic
  }
}

TEST(AssertSingleTokenTest, AcceptsPaperLabels) {
  EXPECT_EQ(vocab().assert_single_token("1"), vocab().id("1"));
  EXPECT_EQ(vocab().assert_single_token("Y"), vocab().id("Y"));
  EXPECT_EQ(vocab().assert_single_token("N"), vocab().id("N"));
}

TEST(AssertSingleTokenTest, RejectsWordWithSegmentation) {
  try {
    vocab().assert_single_token("entailment");
    FAIL() << "expected a mapping error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kMapping);
    const std::string message = e.what();
    EXPECT_NE(message.find("10 tokens"), std::string::npos) << message;
    EXPECT_NE(message.find("'e' | 'n' | 't'"), std::string::npos) << message;
  }
}

TEST(AssertSingleTokenTest, EveryAlphabetSymbolAndAtomicTokenPasses) {
  for (TokenId id = 0; id < vocab().size(); ++id) {
    EXPECT_EQ(vocab().assert_single_token(vocab().token(id)), id);
  }
}

TEST(VocabularyFileTest, SaveLoadRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "salsa_vocab_test.txt";
  vocab().save(path.string());
  Vocabulary loaded = Vocabulary::load(path.string());
  EXPECT_EQ(loaded.tokens(), vocab().tokens());
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace salsa
