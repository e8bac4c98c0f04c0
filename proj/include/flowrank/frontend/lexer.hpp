#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "flowrank/frontend/ast.hpp"

namespace flowrank::frontend {

enum class LexKind {
  Name,
  Number,
  String,
  FString,
  Op,
  Newline,
  Indent,
  Dedent,
  End,
};

struct LexToken {
  LexKind kind;
  std::string text;
  Position pos;
  bool synthetic = false;  // inserted to close an incomplete trailing statement
};

struct LexOptions {
  /// Close open brackets and accept an unterminated final line at end of input.
  bool tolerate_incomplete_tail = false;
  int first_line = 1;
  int first_column = 0;
  /// Lex a bare expression (f-string replacement field): no layout tokens.
  bool expression_only = false;
};

/// Python 3 tokenizer with INDENT/DEDENT tracking and implicit line joining
/// inside brackets. Throws ParseError on malformed input.
std::vector<LexToken> lex(std::string_view source, const LexOptions& options = {});

bool is_keyword(std::string_view word);

/// Byte range of one replacement-field expression inside an f-string token.
struct FieldSpan {
  std::size_t begin;
  std::size_t end;
};

/// Expression spans of the replacement fields of an f-string literal (prefix
/// and quotes included in `literal`). Nested fields in format specs are listed
/// after their parent. Conversions and `=` suffixes are excluded.
std::vector<FieldSpan> fstring_field_spans(std::string_view literal);

/// Source position of byte `offset` within a (possibly multi-line) token.
Position offset_position(const LexToken& token, std::size_t offset);

}  // namespace flowrank::frontend
