#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace codelm {

enum class TokenKind {
  identifier,
  keyword,
  number_literal,
  string_literal,
  char_literal,
  op,
  punctuation,
  special,  // generated tokens: <num>, <str>, <unk>
};

struct Token {
  std::string text;
  TokenKind kind = TokenKind::identifier;

  bool operator==(const Token&) const = default;
};

struct TokenSequence {
  std::vector<Token> tokens;
  std::string source_id;
};

inline constexpr std::string_view kNumToken = "<num>";
inline constexpr std::string_view kStrToken = "<str>";
inline constexpr std::string_view kUnkToken = "<unk>";

// Lexes Java-like surface syntax: identifiers, the 50 Java keywords,
// number/string/char literals, multi-character operators and punctuation.
// Comments and blank lines contribute no tokens. Raises ErrorKind::lex with
// a line number for unterminated string/char literals and block comments.
TokenSequence lex_source(std::string_view text, std::string source_id = "");

// Number literals (integer, real, exponential, hexadecimal) map to <num>,
// string and char literals to <str>; everything else is unchanged.
Token normalize_token(const Token& t);

void normalize_sequence(TokenSequence& seq);

// Token texts after normalization, in source order.
std::vector<std::string> normalized_texts(const TokenSequence& seq);

// Space-separated token stream (tokens are whitespace-free after lexing).
std::string join_token_stream(const std::vector<std::string>& texts);

bool is_java_keyword(std::string_view s);

}  // namespace codelm
