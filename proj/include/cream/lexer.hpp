// Copyright 2026 The CREAM Authors
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

#include <algorithm>
#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "cream/error.hpp"

// Tokenizer for the closed C-like mini-language used throughout the project,
// plus the rule deciding which tokens are user-defined identifiers.
//
//   Identifier  [A-Za-z_][A-Za-z0-9_]*   (keywords excluded)
//   IntLiteral  [0-9]+
//   StrLiteral  "..." with backslash escapes, single line
//   Operator    = == != < <= > >= + - * / % && || !
//   Punct       ( ) { } [ ] ; ,
//
// Whitespace, `//` line comments and `/* */` block comments are skipped.

namespace cream::lex {

enum class TokenKind { Keyword, Identifier, IntLiteral, StrLiteral, Operator, Punct };

inline std::string_view to_string(TokenKind k) {
  switch (k) {
    case TokenKind::Keyword: return "Keyword";
    case TokenKind::Identifier: return "Identifier";
    case TokenKind::IntLiteral: return "IntLiteral";
    case TokenKind::StrLiteral: return "StrLiteral";
    case TokenKind::Operator: return "Operator";
    case TokenKind::Punct: return "Punct";
  }
  return "?";
}

struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;  // one past the last byte

  friend bool operator==(const Span&, const Span&) = default;
};

struct Token {
  std::string text;
  TokenKind kind = TokenKind::Punct;
  Span span;

  friend bool operator==(const Token&, const Token&) = default;
};

/// Tokens of one source text. The source is kept so that the skipped gaps
/// (whitespace and comments) can be reproduced when rendering.
class TokenList {
 public:
  TokenList() = default;
  TokenList(std::string source, std::vector<Token> tokens)
      : source_(std::move(source)), tokens_(std::move(tokens)) {}

  const std::vector<Token>& tokens() const noexcept { return tokens_; }
  const std::string& source() const noexcept { return source_; }
  std::size_t source_len() const noexcept { return source_.size(); }

  std::size_t size() const noexcept { return tokens_.size(); }
  bool empty() const noexcept { return tokens_.empty(); }
  const Token& operator[](std::size_t i) const { return tokens_[i]; }
  auto begin() const noexcept { return tokens_.begin(); }
  auto end() const noexcept { return tokens_.end(); }

  /// Text between token i-1 and token i (i == size() gives the trailer).
  std::string_view gap_before(std::size_t i) const {
    const std::size_t from = i == 0 ? 0 : tokens_[i - 1].span.end;
    const std::size_t to = i == tokens_.size() ? source_.size() : tokens_[i].span.begin;
    return std::string_view(source_).substr(from, to - from);
  }

  /// Concatenate gaps and token texts. Equals source() for an untouched list.
  std::string render() const {
    std::string out;
    out.reserve(source_.size());
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      out += gap_before(i);
      out += tokens_[i].text;
    }
    out += gap_before(tokens_.size());
    return out;
  }

 private:
  std::string source_;
  std::vector<Token> tokens_;
};

inline constexpr std::array<std::string_view, 11> kKeywords = {
    "int", "float", "return", "if", "else", "while", "for", "void", "char", "break", "continue"};

inline bool is_keyword(std::string_view s) {
  return std::find(kKeywords.begin(), kKeywords.end(), s) != kKeywords.end();
}

inline bool is_ident_start(char c) {
  return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c == '_';
}
inline bool is_digit(char c) { return c >= '0' && c <= '9'; }
inline bool is_ident_char(char c) { return is_ident_start(c) || is_digit(c); }

/// True for any text that lexes as exactly one Identifier token.
inline bool is_valid_identifier(std::string_view s) {
  if (s.empty() || !is_ident_start(s.front())) return false;
  if (!std::all_of(s.begin(), s.end(), is_ident_char)) return false;
  return !is_keyword(s);
}

/// Reserved placeholder spelled VAR_<digits>, produced by code abstraction.
inline bool is_abstraction_placeholder(std::string_view s) {
  constexpr std::string_view prefix = "VAR_";
  if (s.size() <= prefix.size() || s.substr(0, prefix.size()) != prefix) return false;
  return std::all_of(s.begin() + prefix.size(), s.end(), is_digit);
}

namespace detail {

inline bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

// Two-character operators first: maximal munch.
inline constexpr std::array<std::string_view, 6> kOps2 = {"==", "!=", "<=", ">=", "&&", "||"};
inline constexpr std::string_view kOps1 = "=<>+-*/%!";
inline constexpr std::string_view kPuncts = "(){}[];,";

}  // namespace detail

/// Maximal-munch tokenization. Throws LexError carrying the byte offset of
/// the first character no rule accepts.
inline TokenList tokenize(std::string source) {
  std::vector<Token> out;
  const std::string_view s = source;
  const std::size_t n = s.size();
  std::size_t i = 0;

  auto push = [&](std::size_t begin, std::size_t end, TokenKind kind) {
    out.push_back(Token{std::string(s.substr(begin, end - begin)), kind, Span{begin, end}});
  };

  while (i < n) {
    const char c = s[i];
    if (detail::is_space(c)) {
      ++i;
      continue;
    }
    if (c == '/' && i + 1 < n && s[i + 1] == '/') {
      while (i < n && s[i] != '\n') ++i;
      continue;
    }
    if (c == '/' && i + 1 < n && s[i + 1] == '*') {
      const std::size_t close = s.find("*/", i + 2);
      if (close == std::string_view::npos) throw LexError(i, "unterminated block comment");
      i = close + 2;
      continue;
    }
    const std::size_t start = i;
    if (is_ident_start(c)) {
      while (i < n && is_ident_char(s[i])) ++i;
      push(start, i, is_keyword(s.substr(start, i - start)) ? TokenKind::Keyword
                                                            : TokenKind::Identifier);
      continue;
    }
    if (is_digit(c)) {
      while (i < n && is_digit(s[i])) ++i;
      push(start, i, TokenKind::IntLiteral);
      continue;
    }
    if (c == '"') {
      ++i;
      while (true) {
        if (i >= n || s[i] == '\n') throw LexError(start, "unterminated string literal");
        if (s[i] == '\\') {
          if (i + 1 >= n || s[i + 1] == '\n') throw LexError(i, "dangling escape");
          i += 2;
          continue;
        }
        if (s[i] == '"') break;
        ++i;
      }
      ++i;
      push(start, i, TokenKind::StrLiteral);
      continue;
    }
    if (i + 1 < n) {
      const std::string_view two = s.substr(i, 2);
      if (std::find(detail::kOps2.begin(), detail::kOps2.end(), two) != detail::kOps2.end()) {
        i += 2;
        push(start, i, TokenKind::Operator);
        continue;
      }
    }
    if (detail::kOps1.find(c) != std::string_view::npos) {
      ++i;
      push(start, i, TokenKind::Operator);
      continue;
    }
    if (detail::kPuncts.find(c) != std::string_view::npos) {
      ++i;
      push(start, i, TokenKind::Punct);
      continue;
    }
    throw LexError(i, std::string("unexpected character '") + c + "'");
  }
  return TokenList(std::move(source), std::move(out));
}

/// Sorted token indices of user identifiers.
using IdentifierSet = std::vector<std::size_t>;

/// Every Identifier token except call heads (an identifier whose very next
/// token is '(') and the reserved VAR_<n> placeholders.
inline IdentifierSet classify_identifiers(const TokenList& toks) {
  IdentifierSet ids;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    const Token& t = toks[i];
    if (t.kind != TokenKind::Identifier) continue;
    if (is_abstraction_placeholder(t.text)) continue;
    if (i + 1 < toks.size() && toks[i + 1].text == "(") continue;
    ids.push_back(i);
  }
  return ids;
}

/// Replace the text of selected tokens and re-lex the result, so the returned
/// list has spans consistent with its own source. `replacement(i)` returns
/// the new text for token i; indices outside `which` are left as-is.
template <typename Fn>
TokenList substitute(const TokenList& toks, const IdentifierSet& which, Fn&& replacement) {
  std::string out;
  out.reserve(toks.source_len());
  std::size_t w = 0;
  for (std::size_t i = 0; i < toks.size(); ++i) {
    out += toks.gap_before(i);
    if (w < which.size() && which[w] == i) {
      out += replacement(i);
      ++w;
    } else {
      out += toks[i].text;
    }
  }
  out += toks.gap_before(toks.size());
  return tokenize(std::move(out));
}

}  // namespace cream::lex
