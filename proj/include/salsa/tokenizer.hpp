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

// Closed-vocabulary tokenizer: every alphabet character is a token, plus a
// registry of atomic multi-character tokens (structural markers wrapped in
// "<|" "|>" and optional word tokens). Encoding is greedy longest match.

#ifndef SALSA_TOKENIZER_HPP_
#define SALSA_TOKENIZER_HPP_

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "salsa/error.hpp"

namespace salsa {

using TokenId = std::size_t;

namespace tokens {
inline constexpr std::string_view kBeginOfText = "<|begin_of_text|>";
inline constexpr std::string_view kStartHeader = "<|start_header_id|>";
inline constexpr std::string_view kEndHeader = "<|end_header_id|>";
inline constexpr std::string_view kEndOfTurn = "<|eot_id|>";
// Answer-slot mask. Distinct from the content letter "X".
inline constexpr std::string_view kPlaceholder = "<|X|>";
}  // namespace tokens

inline bool is_special_token(std::string_view token) {
  return token.size() > 4 && token.substr(0, 2) == "<|" &&
         token.substr(token.size() - 2) == "|>";
}

class Vocabulary {
 public:
  Vocabulary() = default;

  /// Builds a vocabulary from an ordered token list (index = id).
  explicit Vocabulary(std::vector<std::string> tokens) : id_to_token_(std::move(tokens)) {
    for (TokenId id = 0; id < id_to_token_.size(); ++id) {
      const std::string& token = id_to_token_[id];
      if (token.empty()) raise(ErrorKind::kFormat, "empty token at id ", id);
      if (!token_to_id_.emplace(token, id).second) {
        raise(ErrorKind::kFormat, "duplicate token '", escape(token), "' at id ", id);
      }
      max_token_length_ = std::max(max_token_length_, token.size());
    }
  }

  /// Default desk vocabulary: 128 tokens covering the bundled prompt presets.
  static Vocabulary standard();

  std::size_t size() const { return id_to_token_.size(); }

  std::optional<TokenId> find(std::string_view token) const {
    auto it = token_to_id_.find(token);
    if (it == token_to_id_.end()) return std::nullopt;
    return it->second;
  }

  TokenId id(std::string_view token) const {
    auto found = find(token);
    if (!found) raise(ErrorKind::kEncoding, "unknown token '", escape(token), "'");
    return *found;
  }

  const std::string& token(TokenId id) const {
    if (id >= size()) raise(ErrorKind::kDecoding, "token id ", id, " >= vocabulary size ", size());
    return id_to_token_[id];
  }

  bool is_special(TokenId id) const { return is_special_token(token(id)); }

  TokenId placeholder_id() const { return id(tokens::kPlaceholder); }

  std::vector<TokenId> encode(std::string_view text) const {
    std::vector<TokenId> ids;
    std::size_t pos = 0;
    while (pos < text.size()) {
      const std::size_t longest = std::min(max_token_length_, text.size() - pos);
      bool matched = false;
      for (std::size_t len = longest; len >= 1; --len) {
        auto it = token_to_id_.find(text.substr(pos, len));
        if (it != token_to_id_.end()) {
          ids.push_back(it->second);
          pos += len;
          matched = true;
          break;
        }
      }
      if (!matched) {
        const unsigned char c = static_cast<unsigned char>(text[pos]);
        char shown[16];
        if (c >= 0x20 && c < 0x7f) {
          std::snprintf(shown, sizeof shown, "'%c'", c);
        } else {
          std::snprintf(shown, sizeof shown, "0x%02x", c);
        }
        raise(ErrorKind::kEncoding, "character ", shown, " at byte offset ", pos,
              " is outside the alphabet");
      }
    }
    return ids;
  }

  std::string decode(std::span<const TokenId> ids) const {
    std::string text;
    for (TokenId id : ids) {
      if (id >= size()) {
        raise(ErrorKind::kDecoding, "token id ", id, " >= vocabulary size ", size());
      }
      text += id_to_token_[id];
    }
    return text;
  }

  /// Returns the id of `label` iff it encodes to exactly one token.
  TokenId assert_single_token(std::string_view label) const {
    std::vector<TokenId> ids;
    try {
      ids = encode(label);
    } catch (const Error& e) {
      raise(ErrorKind::kMapping, "label '", label, "' cannot be encoded: ", e.what());
    }
    if (ids.size() != 1) {
      std::string segmentation;
      for (std::size_t i = 0; i < ids.size(); ++i) {
        if (i > 0) segmentation += " | ";
        segmentation += "'" + escape(id_to_token_[ids[i]]) + "'";
      }
      raise(ErrorKind::kMapping, "label '", label, "' is not a single token; it encodes to ",
            ids.size(), " tokens: ", segmentation);
    }
    return ids.front();
  }

  // One token per line, line number = id. Newline, tab and backslash are
  // written as \n, \t and \\.
  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise(ErrorKind::kIo, "cannot write vocabulary to ", path);
    for (const std::string& token : id_to_token_) out << escape(token) << '\n';
  }

  static Vocabulary load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(ErrorKind::kIo, "cannot read vocabulary from ", path);
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) tokens.push_back(unescape(line));
    return Vocabulary(std::move(tokens));
  }

  const std::vector<std::string>& tokens() const { return id_to_token_; }

  static std::string escape(std::string_view token) {
    std::string out;
    for (char c : token) {
      switch (c) {
        case '\n': out += "\\n"; break;
        case '\t': out += "\\t"; break;
        case '\\': out += "\\\\"; break;
        default: out += c;
      }
    }
    return out;
  }

  static std::string unescape(std::string_view line) {
    std::string out;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '\\' && i + 1 < line.size()) {
        const char next = line[++i];
        if (next == 'n') out += '\n';
        else if (next == 't') out += '\t';
        else if (next == '\\') out += '\\';
        else raise(ErrorKind::kFormat, "bad escape '\\", next, "' in vocabulary line");
      } else {
        out += line[i];
      }
    }
    return out;
  }

 private:
  std::vector<std::string> id_to_token_;
  std::map<std::string, TokenId, std::less<>> token_to_id_;
  std::size_t max_token_length_ = 0;
};

/// Characters every standard vocabulary contains as single tokens.
inline constexpr std::string_view kStandardAlphabet =
    "abcdefghijklmnopqrstuvwxyz"
    "ABCDEFGHIJKLMNOPQRSTUVWXYZ"
    "0123456789"
    " \n.,:;?!'\"-_#<>/|()=+*&%$@[]{}\\";

/// Atomic word tokens used by the bundled prompt presets.
inline const std::vector<std::string>& standard_word_tokens() {
  static const std::vector<std::string> words = {
      "system",
      "user",
      "assistant",
      "You are a precise text classifier.",
      "Given the text:",
      "Given the premise:",
      "and hypothesis:",
      "Given the first text:",
      "and the second text:",
      "<TEXT>",
      "</TEXT>",
      "<PREMISE>",
      "</PREMISE>",
      "<HYPOTHESIS>",
      "</HYPOTHESIS>",
      "Does the text contain the letter ",
      "Is the hypothesis entailed by the premise?",
      "Which topic does the text belong to?",
      "Was the text written by a human or an ai?",
      "How similar are the two texts?",
      "Provide answer in format: ",
      "where the number is one of the following:",
      "<ANSWER>",
      "</ANSWER>",
      "<SOURCE>",
      "</SOURCE>",
      " - ",
      "Example:",
      "#Number",
      "#Score",
  };
  return words;
}

inline Vocabulary Vocabulary::standard() {
  std::vector<std::string> tokens;
  for (char c : kStandardAlphabet) tokens.emplace_back(1, c);
  for (std::string_view s : {tokens::kBeginOfText, tokens::kStartHeader, tokens::kEndHeader,
                             tokens::kEndOfTurn, tokens::kPlaceholder}) {
    tokens.emplace_back(s);
  }
  for (const std::string& w : standard_word_tokens()) tokens.push_back(w);
  return Vocabulary(std::move(tokens));
}

}  // namespace salsa

#endif  // SALSA_TOKENIZER_HPP_
