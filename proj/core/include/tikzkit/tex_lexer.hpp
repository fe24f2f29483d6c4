#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace tikzkit {

enum class TokenKind {
  command,
  begin_group,
  end_group,
  math_shift,
  text_word,
  number,
  symbol,
  whitespace_collapsed
};

std::string_view to_string(TokenKind k);

struct TexToken {
  TokenKind kind = TokenKind::symbol;
  std::string lexeme;  // whitespace_collapsed tokens carry a single space

  bool operator==(const TexToken&) const = default;
};

// Rules, applied left to right with maximal munch:
//   \ + ASCII letters      -> command
//   \ + one code point     -> command (e.g. \%, \\)
//   {  }  $                -> begin_group, end_group, math_shift
//   digits [. digits]      -> number
//   ASCII letters          -> text_word
//   whitespace run         -> whitespace_collapsed
//   any other code point   -> symbol
std::vector<TexToken> tex_tokenize(std::string_view code);

// Lexemes with whitespace tokens removed; the edit-distance alphabet.
std::vector<std::string> significant_lexemes(std::string_view code);

}  // namespace tikzkit
