#include "lexer.hpp"

#include <array>
#include <cctype>
#include <unordered_set>

#include "error.hpp"

namespace codelm {

namespace {

bool is_ident_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$';
}

bool is_ident_body(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$';
}

bool is_digit(char c) { return c >= '0' && c <= '9'; }

const std::unordered_set<std::string_view>& keyword_set() {
  static const std::unordered_set<std::string_view> kw = {
      "abstract", "assert",       "boolean",  "break",    "byte",
      "case",     "catch",        "char",     "class",    "const",
      "continue", "default",      "do",       "double",   "else",
      "enum",     "extends",      "final",    "finally",  "float",
      "for",      "goto",         "if",       "implements", "import",
      "instanceof", "int",        "interface", "long",    "native",
      "new",      "package",      "private",  "protected", "public",
      "return",   "short",        "static",   "strictfp", "super",
      "switch",   "synchronized", "this",     "throw",    "throws",
      "transient", "try",         "void",     "volatile", "while",
  };
  return kw;
}

// Multi-character operators, longest first so maximal munch works by probing
// in order.
constexpr std::array<std::string_view, 24> kMultiOps = {
    ">>>=", ">>>", ">>=", "<<=", "...", "==", "!=", "<=", ">=",
    "&&",   "||",  "++",  "--",  "+=",  "-=", "*=", "/=", "%=",
    "&=",   "|=",  "^=",  "<<",  ">>",  "->",
};

bool is_single_op(char c) {
  switch (c) {
    case '+': case '-': case '*': case '/': case '%': case '=':
    case '<': case '>': case '!': case '~': case '&': case '|':
    case '^': case '?': case ':':
      return true;
    default:
      // Everything else single-character ((){}[];,.@ and stray bytes)
      // lexes as punctuation.
      return false;
  }
}

struct Cursor {
  std::string_view text;
  size_t pos = 0;
  size_t line = 1;

  bool done() const { return pos >= text.size(); }
  char peek(size_t ahead = 0) const {
    return pos + ahead < text.size() ? text[pos + ahead] : '\0';
  }
  char advance() {
    char c = text[pos++];
    if (c == '\n') ++line;
    return c;
  }
};

void skip_line_comment(Cursor& cur) {
  while (!cur.done() && cur.peek() != '\n') cur.advance();
}

void skip_block_comment(Cursor& cur) {
  const size_t start_line = cur.line;
  cur.advance();  // '/'
  cur.advance();  // '*'
  while (!cur.done()) {
    if (cur.peek() == '*' && cur.peek(1) == '/') {
      cur.advance();
      cur.advance();
      return;
    }
    cur.advance();
  }
  raise(ErrorKind::lex, "unterminated block comment starting at line " +
                            std::to_string(start_line));
}

Token lex_quoted(Cursor& cur, char quote) {
  const size_t start_line = cur.line;
  const char* what = quote == '"' ? "string" : "char";
  std::string text(1, quote);
  cur.advance();
  while (!cur.done()) {
    char c = cur.peek();
    if (c == '\n') break;
    cur.advance();
    text.push_back(c);
    if (c == '\\') {
      if (cur.done()) break;
      text.push_back(cur.advance());
      continue;
    }
    if (c == quote) {
      return Token{std::move(text), quote == '"' ? TokenKind::string_literal
                                                 : TokenKind::char_literal};
    }
  }
  raise(ErrorKind::lex, std::string("unterminated ") + what +
                            " literal at line " + std::to_string(start_line));
}

Token lex_number(Cursor& cur) {
  std::string text;
  auto take = [&] { text.push_back(cur.advance()); };

  if (cur.peek() == '0' && (cur.peek(1) == 'x' || cur.peek(1) == 'X' ||
                            cur.peek(1) == 'b' || cur.peek(1) == 'B')) {
    take();
    take();
    while (std::isalnum(static_cast<unsigned char>(cur.peek())) ||
           cur.peek() == '_') {
      take();
    }
    return Token{std::move(text), TokenKind::number_literal};
  }

  while (is_digit(cur.peek()) || cur.peek() == '_') take();
  if (cur.peek() == '.' && is_digit(cur.peek(1))) {
    take();
    while (is_digit(cur.peek()) || cur.peek() == '_') take();
  }
  if ((cur.peek() == 'e' || cur.peek() == 'E') &&
      (is_digit(cur.peek(1)) ||
       ((cur.peek(1) == '+' || cur.peek(1) == '-') && is_digit(cur.peek(2))))) {
    take();
    if (cur.peek() == '+' || cur.peek() == '-') take();
    while (is_digit(cur.peek())) take();
  }
  char suffix = cur.peek();
  if (suffix == 'l' || suffix == 'L' || suffix == 'f' || suffix == 'F' ||
      suffix == 'd' || suffix == 'D') {
    take();
  }
  return Token{std::move(text), TokenKind::number_literal};
}

}  // namespace

bool is_java_keyword(std::string_view s) { return keyword_set().contains(s); }

TokenSequence lex_source(std::string_view text, std::string source_id) {
  TokenSequence seq;
  seq.source_id = std::move(source_id);
  Cursor cur{text};

  while (!cur.done()) {
    const char c = cur.peek();
    if (std::isspace(static_cast<unsigned char>(c))) {
      cur.advance();
      continue;
    }
    if (c == '/' && cur.peek(1) == '/') {
      skip_line_comment(cur);
      continue;
    }
    if (c == '/' && cur.peek(1) == '*') {
      skip_block_comment(cur);
      continue;
    }
    if (c == '"' || c == '\'') {
      seq.tokens.push_back(lex_quoted(cur, c));
      continue;
    }
    if (is_digit(c) || (c == '.' && is_digit(cur.peek(1)))) {
      seq.tokens.push_back(lex_number(cur));
      continue;
    }
    if (is_ident_start(c)) {
      std::string word;
      while (is_ident_body(cur.peek())) word.push_back(cur.advance());
      const TokenKind kind =
          is_java_keyword(word) ? TokenKind::keyword : TokenKind::identifier;
      seq.tokens.push_back(Token{std::move(word), kind});
      continue;
    }
    bool matched = false;
    for (std::string_view op : kMultiOps) {
      if (text.substr(cur.pos, op.size()) == op) {
        for (size_t i = 0; i < op.size(); ++i) cur.advance();
        seq.tokens.push_back(Token{std::string(op), TokenKind::op});
        matched = true;
        break;
      }
    }
    if (matched) continue;
    cur.advance();
    const TokenKind kind =
        is_single_op(c) ? TokenKind::op : TokenKind::punctuation;
    seq.tokens.push_back(Token{std::string(1, c), kind});
  }
  return seq;
}

Token normalize_token(const Token& t) {
  switch (t.kind) {
    case TokenKind::number_literal:
      return Token{std::string(kNumToken), TokenKind::special};
    case TokenKind::string_literal:
    case TokenKind::char_literal:
      return Token{std::string(kStrToken), TokenKind::special};
    default:
      return t;
  }
}

void normalize_sequence(TokenSequence& seq) {
  for (Token& t : seq.tokens) t = normalize_token(t);
}

std::vector<std::string> normalized_texts(const TokenSequence& seq) {
  std::vector<std::string> out;
  out.reserve(seq.tokens.size());
  for (const Token& t : seq.tokens) out.push_back(normalize_token(t).text);
  return out;
}

std::string join_token_stream(const std::vector<std::string>& texts) {
  std::string out;
  for (size_t i = 0; i < texts.size(); ++i) {
    if (i) out.push_back(' ');
    out += texts[i];
  }
  return out;
}

}  // namespace codelm
