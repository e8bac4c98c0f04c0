#pragma once

#include <memory>
#include <string>
#include <vector>

namespace flowrank::frontend {

/// Source position: 1-based line, 0-based byte column.
struct Position {
  int line = 0;
  int column = 0;

  friend bool operator==(const Position&, const Position&) = default;
  friend auto operator<=>(const Position&, const Position&) = default;
};

enum class ExprKind {
  Name,
  Attribute,     // children[0] = value, name = attribute, op_pos = '.'
  Call,          // children[0] = callee, children[1..] = arguments
  Subscript,     // children[0] = value, children[1] = index
  Literal,       // name holds the literal class: str, bytes, int, float, complex, None, True, False, Ellipsis
  FString,       // children = embedded replacement-field expressions
  Operation,     // name = operator text, children = operands
  Tuple,
  List,
  Set,
  Dict,          // children are KeyValue or DoubleStarred entries
  KeyValue,      // children[0] = key, children[1] = value
  Comprehension, // name = list|set|dict|gen, children[0] = element, generators
  Lambda,        // params, children[0] = body
  Conditional,   // children = body, test, orelse
  Starred,       // children[0]
  DoubleStarred, // children[0]
  KeywordArg,    // name = keyword, children[0] = value
  NamedExpr,     // children[0] = target name, children[1] = value
  Await,
  Yield,         // children optional
  YieldFrom,
  Slice,         // present bounds only
};

struct Expr;
using ExprPtr = std::unique_ptr<Expr>;

struct Param {
  enum class Kind { Positional, VarArgs, KeywordOnly, VarKeywords };
  std::string name;
  Position pos;
  Kind kind = Kind::Positional;
  ExprPtr annotation;
  ExprPtr default_value;
};

struct Generator {
  ExprPtr target;
  ExprPtr iter;
  std::vector<ExprPtr> conditions;
  bool is_async = false;
};

struct Expr {
  ExprKind kind;
  Position pos;
  Position op_pos;  // '.' of an Attribute, '(' of a Call, '[' of a Subscript
  Position name_pos;
  std::string name;
  std::vector<ExprPtr> children;
  std::vector<Generator> generators;
  std::vector<Param> params;
  bool in_fstring = false;  // parsed from inside an f-string replacement field

  Expr(ExprKind k, Position p) : kind(k), pos(p) {}
};

enum class StmtKind {
  Expr,
  Assign,
  AugAssign,
  AnnAssign,
  For,
  While,
  If,
  With,
  FunctionDef,
  ClassDef,
  Return,
  Delete,
  Raise,
  Try,
  Assert,
  Import,
  ImportFrom,
  Global,
  Nonlocal,
  Pass,
  Break,
  Continue,
  Match,
};

struct Stmt;
using StmtPtr = std::unique_ptr<Stmt>;

struct WithItem {
  ExprPtr context;
  ExprPtr target;
};

struct Handler {
  ExprPtr type;
  std::string name;
  Position pos;
  std::vector<StmtPtr> body;
};

struct Alias {
  std::string name;  // dotted module or imported symbol
  std::string asname;
};

struct MatchCase {
  ExprPtr pattern;
  ExprPtr guard;
  std::vector<StmtPtr> body;
};

/// One statement. Field use by kind:
///   Expr/Return/Raise: value (Raise keeps its `from` cause in extra)
///   Assign: targets (one per `=`), value
///   AugAssign: targets[0], op, value;  AnnAssign: targets[0], annotation, value
///   For: targets[0], value = iterable, body, orelse
///   While/If: value = test, body, orelse
///   With: items, body
///   FunctionDef: name, params, extra = decorators, annotation = returns, body
///   ClassDef: name, extra = decorators, targets = bases/keywords, body
///   Delete: targets;  Assert: extra
///   Try: body, handlers, orelse, finalbody
///   Import/ImportFrom: aliases, module, level;  Global/Nonlocal: names
///   Match: value = subject, cases
struct Stmt {
  StmtKind kind;
  Position pos;
  int end_line = 0;
  int label = 0;  // pre-order statement index within the module
  std::string name;
  std::string op;
  std::string module;
  int level = 0;
  bool is_async = false;
  std::vector<ExprPtr> targets;
  ExprPtr value;
  ExprPtr annotation;
  std::vector<ExprPtr> extra;
  std::vector<Param> params;
  std::vector<StmtPtr> body;
  std::vector<StmtPtr> orelse;
  std::vector<StmtPtr> finalbody;
  std::vector<Handler> handlers;
  std::vector<WithItem> items;
  std::vector<Alias> aliases;
  std::vector<std::string> names;
  std::vector<MatchCase> cases;

  Stmt(StmtKind k, Position p) : kind(k), pos(p) {}
};

struct Module {
  std::vector<StmtPtr> body;
  int statement_count = 0;
};

/// Visits every direct sub-expression of `e` (not recursing).
template <class Fn>
void for_each_child(const Expr& e, Fn&& fn) {
  for (const auto& c : e.children)
    if (c) fn(*c);
  for (const auto& p : e.params)
    if (p.default_value) fn(*p.default_value);
  for (const auto& g : e.generators) {
    if (g.target) fn(*g.target);
    if (g.iter) fn(*g.iter);
    for (const auto& c : g.conditions)
      if (c) fn(*c);
  }
}

const char* to_string(StmtKind kind);
const char* to_string(ExprKind kind);

}  // namespace flowrank::frontend

namespace flowrank::frontend {

/// Visits the expressions held directly by `s` (nested statements excluded).
/// Match patterns are skipped.
template <class Fn>
void for_each_expr(const Stmt& s, Fn&& fn) {
  auto one = [&](const ExprPtr& e) {
    if (e) fn(*e);
  };
  for (const auto& e : s.extra) one(e);
  for (const auto& p : s.params) {
    one(p.annotation);
    one(p.default_value);
  }
  one(s.annotation);
  for (const auto& e : s.targets) one(e);
  one(s.value);
  for (const auto& w : s.items) {
    one(w.context);
    one(w.target);
  }
  for (const auto& h : s.handlers) one(h.type);
  for (const auto& c : s.cases) one(c.guard);
}

}  // namespace flowrank::frontend
