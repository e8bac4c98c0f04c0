#include <algorithm>
#include <cctype>

#include "flowrank/errors.hpp"
#include "flowrank/frontend/frontend.hpp"
#include "flowrank/frontend/lexer.hpp"
#include "flowrank/frontend/parser.hpp"
#include "units_internal.hpp"

namespace flowrank::frontend {
namespace {

constexpr int kMaxRepairs = 5;

void append_code_tokens(const std::vector<LexToken>& toks, std::vector<Token>& out, int depth = 0) {
  for (const auto& t : toks) {
    if (t.synthetic) continue;
    if (t.kind == LexKind::Name) {
      out.push_back(Token{t.text, is_keyword(t.text) ? TokenKind::Keyword : TokenKind::Identifier, t.pos});
    } else if (t.kind == LexKind::FString && depth < 8) {
      for (const auto& span : fstring_field_spans(t.text)) {
        if (span.end <= span.begin) continue;
        Position at = offset_position(t, span.begin);
        LexOptions lo;
        lo.expression_only = true;
        lo.first_line = at.line;
        lo.first_column = at.column;
        try {
          append_code_tokens(lex(std::string_view(t.text).substr(span.begin, span.end - span.begin), lo), out,
                             depth + 1);
        } catch (const ParseError&) {
          // Malformed replacement field: the parser reports it, the bag skips it.
        }
      }
    }
  }
}

// First physical line of the logical line containing `line`: walks back over
// bracket continuations and triple-quoted strings.
int logical_start(std::string_view src, int line) {
  int depth = 0;
  char quote = 0;
  bool triple = false;
  int current = 1;
  int start = 1;
  bool continued = false;
  for (std::size_t i = 0; i < src.size() && current <= line; ++i) {
    char c = src[i];
    if (quote) {
      if (c == '\\') {
        if (i + 1 < src.size() && src[i + 1] == '\n') ++current;
        ++i;
      } else if (c == '\n') {
        ++current;
        if (!triple) quote = 0;  // unterminated single-quoted string
      } else if (c == quote && (!triple || (i + 2 < src.size() && src[i + 1] == quote && src[i + 2] == quote))) {
        if (triple) i += 2;
        quote = 0;
      }
      continue;
    }
    if (c == '#') {
      while (i + 1 < src.size() && src[i + 1] != '\n') ++i;
    } else if (c == '\'' || c == '"') {
      quote = c;
      triple = i + 2 < src.size() && src[i + 1] == c && src[i + 2] == c;
      if (triple) i += 2;
    } else if (c == '(' || c == '[' || c == '{') {
      ++depth;
    } else if (c == ')' || c == ']' || c == '}') {
      depth = std::max(0, depth - 1);
    } else if (c == '\\' && i + 1 < src.size() && src[i + 1] == '\n') {
      continued = true;
    } else if (c == '\n') {
      ++current;
      if (depth == 0 && !continued && current <= line) start = current;
      continued = false;
    }
  }
  return start;
}

// Replaces the logical line containing `line` with a no-op of the same
// indentation. Returns the first repaired physical line, or 0.
int repair_line(std::string& source, int line) {
  int first = logical_start(source, line);
  std::size_t begin = byte_offset(source, first, 0);
  std::size_t last_begin = byte_offset(source, line, 0);
  if (begin == std::string::npos || last_begin == std::string::npos) return 0;
  std::size_t end = source.find('\n', last_begin);
  if (end == std::string::npos) end = source.size();
  std::size_t first_end = source.find('\n', begin);
  std::string_view head(source.data() + begin, std::min(first_end, end) - begin);
  std::string_view tail(source.data() + last_begin, end - last_begin);
  std::size_t indent = head.find_first_not_of(" \t");
  if (indent == std::string_view::npos) return 0;
  std::size_t last = tail.find_last_not_of(" \t\r");
  bool opens_block = last != std::string_view::npos && tail[last] == ':';
  std::string replacement = std::string(head.substr(0, indent)) + (opens_block ? "if 1:" : "pass");
  // Keep the line count so positions on later lines stay valid.
  replacement += std::string(static_cast<std::size_t>(line - first), '\n');
  source.replace(begin, end - begin, replacement);
  return first;
}

std::string receiver_text(std::string_view text, Position begin, Position dot) {
  std::size_t from = byte_offset(text, begin.line, begin.column);
  std::size_t to = byte_offset(text, dot.line, dot.column);
  if (from == std::string_view::npos || to == std::string_view::npos || from > to) return "";
  // A parenthesized receiver starts before its first inner token.
  auto unbalanced = [&](std::size_t f) {
    int depth = 0;
    for (std::size_t k = f; k < to; ++k) {
      char c = text[k];
      if (c == '(' || c == '[' || c == '{') ++depth;
      if (c == ')' || c == ']' || c == '}') --depth;
    }
    return depth < 0;
  };
  while (unbalanced(from)) {
    std::size_t k = from;
    while (k > 0 && std::isspace(static_cast<unsigned char>(text[k - 1]))) --k;
    if (k == 0) break;
    from = k - 1;
  }
  std::string_view s = text.substr(from, to - from);
  std::size_t b = s.find_first_not_of(" \t\r\n");
  std::size_t e = s.find_last_not_of(" \t\r\n");
  if (b == std::string_view::npos) return "";
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

std::size_t byte_offset(std::string_view text, int line, int column) {
  if (line < 1 || column < 0) return std::string_view::npos;
  std::size_t pos = 0;
  for (int l = 1; l < line; ++l) {
    pos = text.find('\n', pos);
    if (pos == std::string_view::npos) return std::string_view::npos;
    ++pos;
  }
  std::size_t eol = text.find('\n', pos);
  if (eol == std::string_view::npos) eol = text.size();
  if (pos + static_cast<std::size_t>(column) > eol) return std::string_view::npos;
  return pos + static_cast<std::size_t>(column);
}

std::string source_slice(std::string_view text, Position begin, Position end) {
  std::size_t from = byte_offset(text, begin.line, begin.column);
  std::size_t to = byte_offset(text, end.line, end.column);
  if (from == std::string_view::npos || to == std::string_view::npos || from > to) return "";
  return std::string(text.substr(from, to - from));
}

std::vector<Token> code_tokens(std::string_view source) {
  LexOptions lo;
  lo.tolerate_incomplete_tail = true;
  std::vector<Token> out;
  append_code_tokens(lex(source, lo), out);
  return out;
}

SourceContext parse_context(std::string_view text, const RecommendationPoint& point) {
  std::size_t off = byte_offset(text, point.line, point.column);
  if (off == std::string_view::npos || off >= text.size() || text[off] != '.')
    throw ParseError("recommendation point " + std::to_string(point.line) + ":" + std::to_string(point.column) +
                         " is not a '.'",
                     point.line, point.column);

  std::string source(text.substr(0, off));
  source += ".";
  source += kHoleName;
  source += "()";

  SourceContext ctx;
  ctx.file_id = point.file_id;
  ctx.text = std::string(text.substr(0, off));

  LexOptions lo;
  lo.tolerate_incomplete_tail = true;
  ParseOptions po;
  po.tolerate_incomplete_tail = true;
  for (int attempt = 0;; ++attempt) {
    try {
      auto toks = lex(source, lo);
      auto module = std::make_shared<Module>(parse_tokens(toks, po));
      Hole hole;
      auto units = extract_units_with_hole(*module, &hole);
      if (hole.label < 0) throw ParseError("recommendation point is not in code", point.line, point.column);

      ctx.module = module;
      ctx.units = std::move(units);
      ctx.hole = hole;
      if (hole.receiver_node) ctx.hole.receiver_expr = receiver_text(ctx.text, hole.receiver_node->pos, hole.dot);

      std::vector<Token> all;
      append_code_tokens(toks, all);
      for (auto& t : all) {
        if (t.pos >= hole.dot) break;
        if (std::find(ctx.repaired_lines.begin(), ctx.repaired_lines.end(), t.pos.line) != ctx.repaired_lines.end())
          continue;
        ctx.token_bag.push_back(std::move(t));
      }
      return ctx;
    } catch (const ParseError& e) {
      if (attempt >= kMaxRepairs || e.line() < 1 || e.line() >= point.line) throw;
      if (std::find(ctx.repaired_lines.begin(), ctx.repaired_lines.end(), e.line()) != ctx.repaired_lines.end())
        throw;
      int first = repair_line(source, e.line());
      if (first == 0) throw;
      for (int l = first; l <= e.line(); ++l) ctx.repaired_lines.push_back(l);
    }
  }
}

std::vector<std::string> split_identifier(std::string_view name) {
  std::vector<std::string> parts;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) parts.push_back(std::move(current));
    current.clear();
  };
  auto upper = [](char c) { return c >= 'A' && c <= 'Z'; };
  auto lower = [](char c) { return (c >= 'a' && c <= 'z') || static_cast<unsigned char>(c) >= 0x80; };
  auto digit = [](char c) { return c >= '0' && c <= '9'; };
  for (std::size_t i = 0; i < name.size(); ++i) {
    char c = name[i];
    if (c == '_') {
      flush();
      continue;
    }
    if (upper(c) && !current.empty()) {
      char prev = name[i - 1];
      bool next_lower = i + 1 < name.size() && lower(name[i + 1]);
      if (lower(prev) || digit(prev) || (upper(prev) && next_lower)) flush();
    }
    current += upper(c) ? static_cast<char>(c - 'A' + 'a') : c;
  }
  flush();
  return parts;
}

std::vector<BagEntry> collect_token_bag(const SourceContext& ctx, const RecommendationPoint& point, int window) {
  if (window < 1) throw ConfigError("token window must be at least 1");
  Position limit{point.line, point.column};
  std::vector<const Token*> before;
  for (const auto& t : ctx.token_bag)
    if (t.pos < limit) before.push_back(&t);
  std::size_t n = std::min(before.size(), static_cast<std::size_t>(window));
  std::vector<BagEntry> out;
  out.reserve(n);
  for (std::size_t k = before.size() - n; k < before.size(); ++k)
    out.push_back(BagEntry{*before[k], static_cast<int>(before.size() - k)});
  return out;
}

}  // namespace flowrank::frontend
