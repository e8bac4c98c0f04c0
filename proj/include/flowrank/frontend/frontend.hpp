#pragma once

#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "flowrank/frontend/ast.hpp"

namespace flowrank::frontend {

/// Placeholder call name spliced in after the dot of a recommendation point.
inline constexpr std::string_view kHoleName = "__HOLE__";

struct RecommendationPoint {
  std::string file_id;
  int line = 1;    // 1-based
  int column = 0;  // 0-based byte column of the '.'
  std::string receiver_expr;
};

enum class TokenKind { Identifier, Keyword, Literal, Punct };

struct Token {
  std::string text;
  TokenKind kind = TokenKind::Identifier;
  Position pos;
};

struct BagEntry {
  Token token;
  int dist = 1;
};

enum class UnitKind { Assign, For, Invoke, Access, Para };

/// An identifier occurrence taking part in a unit. Variables are keyed by the
/// scope they resolve to; members (attribute names) are keyed by occurrence.
struct Operand {
  std::string name;
  Position pos;
  bool member = false;
  std::string scope;

  std::string node_key() const;
};

/// One abstract syntax unit.
///   Assign/For: sources = VM(e), target = bound name (variable, member, or container head)
///   Invoke:     sources = {head of the receiver}, target = attribute
///   Access:     sources = VM(index), target = head of the container
///   Para:       sources = VM(arguments), target = head of the callee
struct AstUnit {
  UnitKind kind = UnitKind::Assign;
  int label = 0;
  int line = 0;
  std::vector<Operand> sources;
  std::optional<Operand> target;
  bool kills = false;  // strong update of a rebound variable
};

struct Hole {
  int label = -1;         // statement containing the placeholder call
  Position dot;           // position of the '.'
  Position name_pos;      // position of the placeholder attribute name
  std::optional<Operand> receiver;
  std::string receiver_expr;
  const Expr* receiver_node = nullptr;
  const Expr* attribute_node = nullptr;
};

struct SourceContext {
  std::string file_id;
  std::string text;  // prefix up to the point (without the placeholder)
  std::shared_ptr<const Module> module;
  std::vector<AstUnit> units;  // ordered by statement label, then source order
  std::vector<Token> token_bag;
  Hole hole;
  std::vector<int> repaired_lines;
};

const char* to_string(UnitKind kind);

/// Builds the context for a recommendation point. Throws ParseError.
SourceContext parse_context(std::string_view text, const RecommendationPoint& point);

/// Abstract syntax units of a parsed module, in statement order.
std::vector<AstUnit> extract_units(const Module& module);

std::vector<std::string> split_identifier(std::string_view name);

/// Last `window` identifier/keyword tokens before the point, nearest has dist 1.
std::vector<BagEntry> collect_token_bag(const SourceContext& ctx, const RecommendationPoint& point,
                                        int window = 30);

/// Identifier and keyword tokens of `source` (f-string fields included).
std::vector<Token> code_tokens(std::string_view source);

/// Byte offset of (line, column) in `text`, or npos when out of range.
std::size_t byte_offset(std::string_view text, int line, int column);

/// Literal source text covering an expression, from its start to `end`.
std::string source_slice(std::string_view text, Position begin, Position end);

}  // namespace flowrank::frontend
