#include "flowrank/frontend/lexer.hpp"

#include <algorithm>
#include <array>
#include <string>

#include "flowrank/errors.hpp"

namespace flowrank::frontend {
namespace {

constexpr std::array<std::string_view, 35> kKeywords = {
    "False", "None",   "True",    "and",      "as",       "assert", "async",
    "await", "break",  "class",   "continue", "def",      "del",    "elif",
    "else",  "except", "finally", "for",      "from",     "global", "if",
    "import", "in",    "is",      "lambda",   "nonlocal", "not",    "or",
    "pass",  "raise",  "return",  "try",      "while",    "with",   "yield"};

// Longest first so that a prefix scan picks the maximal operator.
constexpr std::array<std::string_view, 47> kOperators = {
    "**=", "//=", ">>=", "<<=", "...", "->", ":=", "**", "//", "<<", ">>", "<=",
    ">=",  "==",  "!=",  "+=",  "-=",  "*=", "/=", "%=", "&=", "|=", "^=", "@=",
    "+",   "-",   "*",   "/",   "%",   "@",  "&",  "|",  "^",  "~",  "<",  ">",
    "(",   ")",   "[",   "]",   "{",   "}",  ",",  ":",  ";",  ".",  "="};

bool ident_start(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_' || c >= 0x80;
}

bool ident_char(unsigned char c) { return ident_start(c) || (c >= '0' && c <= '9'); }

bool is_digit(char c) { return c >= '0' && c <= '9'; }

bool is_string_prefix(std::string_view word) {
  if (word.size() > 2) return false;
  int r = 0, b = 0, u = 0, f = 0;
  for (char c : word) {
    switch (c) {
      case 'r': case 'R': ++r; break;
      case 'b': case 'B': ++b; break;
      case 'u': case 'U': ++u; break;
      case 'f': case 'F': ++f; break;
      default: return false;
    }
  }
  if (r > 1 || b > 1 || u > 1 || f > 1) return false;
  if (u && word.size() > 1) return false;
  if (b && f) return false;
  return true;
}

class Lexer {
public:
  Lexer(std::string_view src, const LexOptions& opt) : src_(src), opt_(opt), line_(opt.first_line) {
    at_line_start_ = !opt.expression_only;
  }

  std::vector<LexToken> run() {
    while (i_ < src_.size()) {
      if (at_line_start_) {
        handle_indentation();
        if (i_ >= src_.size()) break;
        continue;
      }
      char c = src_[i_];
      if (c == ' ' || c == '\t' || c == '\f' || c == '\r') {
        ++i_;
      } else if (c == '\n') {
        newline();
      } else if (c == '#') {
        while (i_ < src_.size() && src_[i_] != '\n') ++i_;
      } else if (c == '\\' && next_is_newline(i_ + 1)) {
        ++i_;
        if (src_[i_] == '\r') ++i_;
        ++i_;
        ++line_;
        line_start_ = i_;
      } else if (ident_start(static_cast<unsigned char>(c))) {
        identifier_or_prefixed_string();
      } else if (is_digit(c) || (c == '.' && i_ + 1 < src_.size() && is_digit(src_[i_ + 1]))) {
        number();
      } else if (c == '"' || c == '\'') {
        string_literal(i_, here());
      } else {
        op();
      }
    }
    finish();
    return std::move(out_);
  }

private:
  Position here() const {
    int col = static_cast<int>(i_ - line_start_);
    if (line_ == opt_.first_line) col += opt_.first_column;
    return {line_, col};
  }

  bool next_is_newline(std::size_t j) const {
    if (j < src_.size() && src_[j] == '\n') return true;
    return j + 1 < src_.size() && src_[j] == '\r' && src_[j + 1] == '\n';
  }

  void emit(LexKind kind, std::string text, Position pos, bool synthetic = false) {
    out_.push_back(LexToken{kind, std::move(text), pos, synthetic});
  }

  bool line_has_content() const {
    if (out_.empty()) return false;
    auto k = out_.back().kind;
    return k != LexKind::Newline && k != LexKind::Indent && k != LexKind::Dedent;
  }

  void newline() {
    if (brackets_.empty() && !opt_.expression_only && line_has_content())
      emit(LexKind::Newline, "", here());
    ++i_;
    ++line_;
    line_start_ = i_;
    if (brackets_.empty() && !opt_.expression_only) at_line_start_ = true;
  }

  void handle_indentation() {
    int width = 0;
    std::size_t j = i_;
    while (j < src_.size()) {
      char c = src_[j];
      if (c == ' ') {
        ++width;
      } else if (c == '\t') {
        width = (width / 8 + 1) * 8;
      } else if (c == '\f') {
        width = 0;
      } else {
        break;
      }
      ++j;
    }
    // Blank and comment-only lines do not affect indentation.
    if (j >= src_.size() || src_[j] == '\n' || src_[j] == '#' || (src_[j] == '\r' && next_is_newline(j)) ||
        (src_[j] == '\\' && next_is_newline(j + 1) && !line_has_content())) {
      i_ = j;
      while (i_ < src_.size() && src_[i_] != '\n') ++i_;
      if (i_ < src_.size()) {
        ++i_;
        ++line_;
        line_start_ = i_;
      }
      return;
    }
    i_ = j;
    at_line_start_ = false;
    Position pos = here();
    if (width > indents_.back()) {
      indents_.push_back(width);
      emit(LexKind::Indent, "", pos);
    } else {
      while (width < indents_.back()) {
        indents_.pop_back();
        emit(LexKind::Dedent, "", pos);
      }
      if (width != indents_.back())
        throw ParseError("unindent does not match any outer indentation level", pos.line, pos.column);
    }
  }

  void identifier_or_prefixed_string() {
    Position start = here();
    std::size_t begin = i_;
    while (i_ < src_.size() && ident_char(static_cast<unsigned char>(src_[i_]))) ++i_;
    std::string_view word = src_.substr(begin, i_ - begin);
    if (i_ < src_.size() && (src_[i_] == '"' || src_[i_] == '\'') && is_string_prefix(word)) {
      string_literal(begin, start);
      return;
    }
    emit(LexKind::Name, std::string(word), start);
  }

  void number() {
    Position start = here();
    std::size_t begin = i_;
    auto alnum = [&](char c) { return ident_char(static_cast<unsigned char>(c)); };
    if (src_[i_] == '0' && i_ + 1 < src_.size() &&
        std::string_view("xXoObB").find(src_[i_ + 1]) != std::string_view::npos) {
      i_ += 2;
      while (i_ < src_.size() && alnum(src_[i_])) ++i_;
    } else {
      while (i_ < src_.size() && (is_digit(src_[i_]) || src_[i_] == '_')) ++i_;
      if (i_ < src_.size() && src_[i_] == '.') {
        ++i_;
        while (i_ < src_.size() && (is_digit(src_[i_]) || src_[i_] == '_')) ++i_;
      }
      if (i_ < src_.size() && (src_[i_] == 'e' || src_[i_] == 'E')) {
        std::size_t j = i_ + 1;
        if (j < src_.size() && (src_[j] == '+' || src_[j] == '-')) ++j;
        if (j < src_.size() && is_digit(src_[j])) {
          i_ = j;
          while (i_ < src_.size() && (is_digit(src_[i_]) || src_[i_] == '_')) ++i_;
        }
      }
      if (i_ < src_.size() && (src_[i_] == 'j' || src_[i_] == 'J')) ++i_;
    }
    emit(LexKind::Number, std::string(src_.substr(begin, i_ - begin)), start);
  }

  // `begin` points at the prefix (or the quote when unprefixed).
  void string_literal(std::size_t begin, Position start) {
    bool is_f = false;
    for (std::size_t k = begin; k < i_; ++k)
      if (src_[k] == 'f' || src_[k] == 'F') is_f = true;
    char q = src_[i_];
    bool triple = i_ + 2 < src_.size() && src_[i_ + 1] == q && src_[i_ + 2] == q;
    i_ += triple ? 3 : 1;
    for (;;) {
      if (i_ >= src_.size())
        throw ParseError("unterminated string literal", start.line, start.column);
      char c = src_[i_];
      if (c == '\\') {
        if (i_ + 1 < src_.size() && src_[i_ + 1] == '\n') {
          i_ += 2;
          ++line_;
          line_start_ = i_;
        } else {
          i_ += 2;
        }
        continue;
      }
      if (c == '\n') {
        if (!triple) throw ParseError("unterminated string literal", start.line, start.column);
        ++i_;
        ++line_;
        line_start_ = i_;
        continue;
      }
      if (c == q) {
        if (!triple) {
          ++i_;
          break;
        }
        if (i_ + 2 < src_.size() && src_[i_ + 1] == q && src_[i_ + 2] == q) {
          i_ += 3;
          break;
        }
      }
      ++i_;
    }
    emit(is_f ? LexKind::FString : LexKind::String, std::string(src_.substr(begin, i_ - begin)), start);
  }

  void op() {
    Position start = here();
    std::string_view rest = src_.substr(i_);
    for (auto candidate : kOperators) {
      if (rest.substr(0, candidate.size()) == candidate) {
        i_ += candidate.size();
        if (candidate == "(" || candidate == "[" || candidate == "{") {
          brackets_.push_back(candidate[0]);
        } else if (candidate == ")" || candidate == "]" || candidate == "}") {
          if (brackets_.empty())
            throw ParseError("unmatched '" + std::string(candidate) + "'", start.line, start.column);
          brackets_.pop_back();
        }
        emit(LexKind::Op, std::string(candidate), start);
        return;
      }
    }
    if (rest[0] == '!' && opt_.expression_only) {
      ++i_;
      emit(LexKind::Op, "!", start);
      return;
    }
    throw ParseError(std::string("invalid character '") + rest[0] + "'", start.line, start.column);
  }

  void finish() {
    Position end = here();
    if (!brackets_.empty()) {
      if (!opt_.tolerate_incomplete_tail)
        throw ParseError("unexpected end of input inside brackets", end.line, end.column);
      while (!brackets_.empty()) {
        char open = brackets_.back();
        brackets_.pop_back();
        emit(LexKind::Op, open == '(' ? ")" : open == '[' ? "]" : "}", end, true);
      }
    }
    if (!opt_.expression_only) {
      if (line_has_content()) emit(LexKind::Newline, "", end);
      while (indents_.size() > 1) {
        indents_.pop_back();
        emit(LexKind::Dedent, "", end);
      }
    }
    emit(LexKind::End, "", end);
  }

  std::string_view src_;
  LexOptions opt_;
  std::size_t i_ = 0;
  std::size_t line_start_ = 0;
  int line_;
  bool at_line_start_;
  std::vector<int> indents_{0};
  std::vector<char> brackets_;
  std::vector<LexToken> out_;
};

}  // namespace

bool is_keyword(std::string_view word) {
  return std::find(kKeywords.begin(), kKeywords.end(), word) != kKeywords.end();
}

std::vector<LexToken> lex(std::string_view source, const LexOptions& options) {
  return Lexer(source, options).run();
}

namespace {

void scan_fields(std::string_view s, std::size_t k, std::size_t end, bool raw, std::vector<FieldSpan>& out) {
  while (k < end) {
    char c = s[k];
    if (c == '\\' && !raw && k + 2 < end && s[k + 1] == 'N' && s[k + 2] == '{') {
      std::size_t close = s.find('}', k + 3);
      k = close == std::string_view::npos ? end : close + 1;
      continue;
    }
    if (c == '\\' && !raw) {
      k += 2;
      continue;
    }
    if (c == '}' && k + 1 < end && s[k + 1] == '}') {
      k += 2;
      continue;
    }
    if (c != '{') {
      ++k;
      continue;
    }
    if (k + 1 < end && s[k + 1] == '{') {
      k += 2;
      continue;
    }
    std::size_t expr_begin = k + 1;
    std::size_t j = expr_begin;
    int depth = 0;
    char quote = 0;
    while (j < end) {
      char d = s[j];
      if (quote) {
        if (d == '\\') {
          j += 2;
          continue;
        }
        if (d == quote) quote = 0;
      } else if (d == '\'' || d == '"') {
        quote = d;
      } else if (d == '(' || d == '[' || d == '{') {
        ++depth;
      } else if (d == ')' || d == ']' || d == '}') {
        if (depth == 0) break;
        --depth;
      } else if (depth == 0 && d == '!' && j + 1 < end && s[j + 1] != '=') {
        break;
      } else if (depth == 0 && d == ':') {
        break;
      }
      ++j;
    }
    std::size_t expr_end = j;
    std::size_t trim = expr_end;
    while (trim > expr_begin && (s[trim - 1] == ' ' || s[trim - 1] == '\t')) --trim;
    if (trim > expr_begin && s[trim - 1] == '=' &&
        !(trim > expr_begin + 1 && std::string_view("=!<>").find(s[trim - 2]) != std::string_view::npos))
      expr_end = trim - 1;
    out.push_back({expr_begin, expr_end});
    std::size_t close = j;
    if (close < end && s[close] == '!') {
      while (close < end && s[close] != ':' && s[close] != '}') ++close;
    }
    if (close < end && s[close] == ':') {
      std::size_t spec_begin = close + 1;
      int d = 0;
      std::size_t m = spec_begin;
      while (m < end) {
        if (s[m] == '{') {
          ++d;
        } else if (s[m] == '}') {
          if (d == 0) break;
          --d;
        }
        ++m;
      }
      scan_fields(s, spec_begin, m, raw, out);
      close = m;
    }
    k = close + 1;
  }
}

}  // namespace

std::vector<FieldSpan> fstring_field_spans(std::string_view literal) {
  std::vector<FieldSpan> out;
  std::size_t q = literal.find_first_of("'\"");
  if (q == std::string_view::npos) return out;
  bool triple = q + 2 < literal.size() && literal[q + 1] == literal[q] && literal[q + 2] == literal[q];
  std::size_t width = triple ? 3 : 1;
  if (literal.size() < q + 2 * width) return out;
  bool raw = literal.substr(0, q).find_first_of("rR") != std::string_view::npos;
  scan_fields(literal, q + width, literal.size() - width, raw, out);
  return out;
}

Position offset_position(const LexToken& token, std::size_t offset) {
  Position p = token.pos;
  for (std::size_t k = 0; k < offset && k < token.text.size(); ++k) {
    if (token.text[k] == '\n') {
      ++p.line;
      p.column = 0;
    } else {
      ++p.column;
    }
  }
  return p;
}

}  // namespace flowrank::frontend
