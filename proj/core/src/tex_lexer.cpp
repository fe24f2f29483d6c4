#include "tikzkit/tex_lexer.hpp"

namespace tikzkit {
namespace {

bool is_letter(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'); }
bool is_digit(char c) { return c >= '0' && c <= '9'; }
bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// Byte length of the UTF-8 sequence starting at s[i] (1 for stray bytes).
std::size_t code_point_len(std::string_view s, std::size_t i) {
  const auto b = static_cast<unsigned char>(s[i]);
  std::size_t n = 1;
  if (b >= 0xF0) n = 4;
  else if (b >= 0xE0) n = 3;
  else if (b >= 0xC0) n = 2;
  if (i + n > s.size()) return 1;
  for (std::size_t k = 1; k < n; ++k) {
    if ((static_cast<unsigned char>(s[i + k]) & 0xC0) != 0x80) return 1;
  }
  return n;
}

}  // namespace

std::string_view to_string(TokenKind k) {
  switch (k) {
    case TokenKind::command: return "command";
    case TokenKind::begin_group: return "begin_group";
    case TokenKind::end_group: return "end_group";
    case TokenKind::math_shift: return "math_shift";
    case TokenKind::text_word: return "text_word";
    case TokenKind::number: return "number";
    case TokenKind::symbol: return "symbol";
    case TokenKind::whitespace_collapsed: return "whitespace_collapsed";
  }
  return "symbol";
}

std::vector<TexToken> tex_tokenize(std::string_view s) {
  std::vector<TexToken> out;
  std::size_t i = 0;
  const std::size_t n = s.size();
  while (i < n) {
    const char c = s[i];
    std::size_t j = i + 1;
    TokenKind kind = TokenKind::symbol;
    if (c == '\\') {
      if (j < n && is_letter(s[j])) {
        while (j < n && is_letter(s[j])) ++j;
        kind = TokenKind::command;
      } else if (j < n) {
        j += code_point_len(s, j);
        kind = TokenKind::command;
      }
    } else if (c == '{') {
      kind = TokenKind::begin_group;
    } else if (c == '}') {
      kind = TokenKind::end_group;
    } else if (c == '$') {
      kind = TokenKind::math_shift;
    } else if (is_digit(c)) {
      while (j < n && is_digit(s[j])) ++j;
      if (j + 1 < n && s[j] == '.' && is_digit(s[j + 1])) {
        j += 1;
        while (j < n && is_digit(s[j])) ++j;
      }
      kind = TokenKind::number;
    } else if (is_letter(c)) {
      while (j < n && is_letter(s[j])) ++j;
      kind = TokenKind::text_word;
    } else if (is_space(c)) {
      while (j < n && is_space(s[j])) ++j;
      out.push_back({TokenKind::whitespace_collapsed, " "});
      i = j;
      continue;
    } else {
      j = i + code_point_len(s, i);
    }
    out.push_back({kind, std::string(s.substr(i, j - i))});
    i = j;
  }
  return out;
}

std::vector<std::string> significant_lexemes(std::string_view code) {
  std::vector<std::string> out;
  for (auto& t : tex_tokenize(code)) {
    if (t.kind != TokenKind::whitespace_collapsed) out.push_back(std::move(t.lexeme));
  }
  return out;
}

}  // namespace tikzkit
