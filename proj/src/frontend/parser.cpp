#include "flowrank/frontend/parser.hpp"

#include <string>
#include <utility>

#include "flowrank/errors.hpp"

namespace flowrank::frontend {
namespace {

const LexToken kEndToken{LexKind::End, "", {}, false};

class Parser {
public:
  Parser(std::vector<LexToken> tokens, const ParseOptions& opt, bool in_fstring = false)
      : toks_(std::move(tokens)), tolerant_(opt.tolerate_incomplete_tail), in_fstring_(in_fstring) {
    tail_ = toks_.size();
    if (tolerant_) {
      // The tail is everything after the last token that was actually typed.
      std::size_t k = toks_.size();
      while (k > 0) {
        const auto& t = toks_[k - 1];
        bool filler = t.synthetic || t.kind == LexKind::Newline || t.kind == LexKind::Dedent ||
                      t.kind == LexKind::End;
        if (!filler) break;
        --k;
      }
      tail_ = k;
    }
  }

  Module module() {
    Module m;
    while (cur().kind != LexKind::End) {
      if (cur().kind == LexKind::Newline) {
        advance();
        continue;
      }
      if (cur().kind == LexKind::Indent) fail("unexpected indent");
      if (cur().kind == LexKind::Dedent) {
        advance();
        continue;
      }
      statement(m.body);
    }
    m.statement_count = label_;
    return m;
  }

  ExprPtr standalone_expression() {
    ExprPtr e = testlist_star_expr();
    if (cur().kind != LexKind::End) fail("unexpected token in expression");
    return e;
  }

  int labels_used() const { return label_; }
  void set_label_base(int base) { label_ = base; }

private:
  // ---------------------------------------------------------------- tokens
  const LexToken& cur() const { return p_ < toks_.size() ? toks_[p_] : kEndToken; }
  const LexToken& peek(std::size_t k = 1) const {
    return p_ + k < toks_.size() ? toks_[p_ + k] : kEndToken;
  }
  const LexToken& advance() {
    const LexToken& t = cur();
    if (p_ < toks_.size()) {
      last_line_ = t.pos.line;
      ++p_;
    }
    return t;
  }
  bool at_tail() const { return tolerant_ && p_ >= tail_; }

  bool is_op(std::string_view op) const { return cur().kind == LexKind::Op && cur().text == op; }
  bool is_kw(std::string_view kw) const { return cur().kind == LexKind::Name && cur().text == kw; }
  bool is_name() const { return cur().kind == LexKind::Name && !is_keyword(cur().text); }
  bool peek_is_op(std::size_t k, std::string_view op) const {
    return peek(k).kind == LexKind::Op && peek(k).text == op;
  }

  bool accept_op(std::string_view op) {
    if (!is_op(op)) return false;
    advance();
    return true;
  }
  bool accept_kw(std::string_view kw) {
    if (!is_kw(kw)) return false;
    advance();
    return true;
  }
  void expect_op(std::string_view op) {
    if (accept_op(op)) return;
    if (at_tail()) return;
    fail("expected '" + std::string(op) + "'");
  }
  void expect_kw(std::string_view kw) {
    if (accept_kw(kw)) return;
    if (at_tail()) return;
    fail("expected '" + std::string(kw) + "'");
  }
  std::pair<std::string, Position> expect_name() {
    if (!is_name()) fail("expected a name");
    const auto& t = advance();
    return {t.text, t.pos};
  }

  [[noreturn]] void fail(const std::string& msg) const {
    const auto& t = cur();
    std::string near = t.kind == LexKind::End       ? "end of input"
                       : t.kind == LexKind::Newline ? "end of line"
                       : t.kind == LexKind::Indent  ? "indent"
                       : t.kind == LexKind::Dedent  ? "dedent"
                                                    : "'" + t.text + "'";
    throw ParseError(msg + " near " + near + " at line " + std::to_string(t.pos.line), t.pos.line,
                     t.pos.column);
  }

  StmtPtr make_stmt(StmtKind kind, Position pos) {
    auto s = std::make_unique<Stmt>(kind, pos);
    s->label = label_++;
    return s;
  }
  static ExprPtr make_expr(ExprKind kind, Position pos) { return std::make_unique<Expr>(kind, pos); }
  ExprPtr tag(ExprPtr e) const {
    if (in_fstring_) e->in_fstring = true;
    return e;
  }

  // ------------------------------------------------------------ statements
  void statement(std::vector<StmtPtr>& out) {
    if (is_kw("if")) return out.push_back(if_stmt());
    if (is_kw("while")) return out.push_back(while_stmt());
    if (is_kw("for")) return out.push_back(for_stmt(false, cur().pos));
    if (is_kw("try")) return out.push_back(try_stmt());
    if (is_kw("with")) return out.push_back(with_stmt(false, cur().pos));
    if (is_kw("def")) return out.push_back(funcdef({}, false, cur().pos));
    if (is_kw("class")) return out.push_back(classdef({}, cur().pos));
    if (is_op("@")) return out.push_back(decorated());
    if (is_kw("async")) {
      Position pos = advance().pos;
      if (is_kw("def")) return out.push_back(funcdef({}, true, pos));
      if (is_kw("for")) return out.push_back(for_stmt(true, pos));
      if (is_kw("with")) return out.push_back(with_stmt(true, pos));
      fail("expected def, for or with after async");
    }
    if (cur().kind == LexKind::Name && cur().text == "match" && looks_like_match()) {
      if (auto s = try_match_stmt()) return out.push_back(std::move(s));
    }
    simple_stmts(out);
  }

  void simple_stmts(std::vector<StmtPtr>& out) {
    for (;;) {
      out.push_back(simple_stmt());
      if (!accept_op(";")) break;
      if (cur().kind == LexKind::Newline || cur().kind == LexKind::End) break;
    }
    if (cur().kind == LexKind::Newline) {
      advance();
      return;
    }
    if (cur().kind == LexKind::End || at_tail()) return;
    fail("expected end of statement");
  }

  StmtPtr simple_stmt() {
    Position pos = cur().pos;
    if (accept_kw("pass")) return finish(make_stmt(StmtKind::Pass, pos));
    if (accept_kw("break")) return finish(make_stmt(StmtKind::Break, pos));
    if (accept_kw("continue")) return finish(make_stmt(StmtKind::Continue, pos));
    if (is_kw("return")) {
      auto s = make_stmt(StmtKind::Return, pos);
      advance();
      if (!end_of_simple()) s->value = testlist_star_expr();
      return finish(std::move(s));
    }
    if (is_kw("raise")) {
      auto s = make_stmt(StmtKind::Raise, pos);
      advance();
      if (!end_of_simple()) {
        s->value = test();
        if (accept_kw("from")) s->extra.push_back(test());
      }
      return finish(std::move(s));
    }
    if (is_kw("global") || is_kw("nonlocal")) {
      auto s = make_stmt(is_kw("global") ? StmtKind::Global : StmtKind::Nonlocal, pos);
      advance();
      do {
        s->names.push_back(expect_name().first);
      } while (accept_op(","));
      return finish(std::move(s));
    }
    if (is_kw("del")) {
      auto s = make_stmt(StmtKind::Delete, pos);
      advance();
      s->targets.push_back(exprlist());
      return finish(std::move(s));
    }
    if (is_kw("assert")) {
      auto s = make_stmt(StmtKind::Assert, pos);
      advance();
      s->extra.push_back(test());
      if (accept_op(",")) s->extra.push_back(test());
      return finish(std::move(s));
    }
    if (is_kw("import")) return import_stmt();
    if (is_kw("from")) return import_from();
    return expr_stmt();
  }

  bool end_of_simple() const {
    return cur().kind == LexKind::Newline || cur().kind == LexKind::End || is_op(";") || at_tail();
  }

  StmtPtr finish(StmtPtr s) {
    s->end_line = last_line_;
    return s;
  }

  std::string dotted_name() {
    std::string name = expect_name().first;
    while (is_op(".")) {
      advance();
      name += "." + expect_name().first;
    }
    return name;
  }

  StmtPtr import_stmt() {
    auto s = make_stmt(StmtKind::Import, cur().pos);
    advance();
    do {
      Alias a;
      a.name = dotted_name();
      if (accept_kw("as")) a.asname = expect_name().first;
      s->aliases.push_back(std::move(a));
    } while (accept_op(","));
    return finish(std::move(s));
  }

  StmtPtr import_from() {
    auto s = make_stmt(StmtKind::ImportFrom, cur().pos);
    advance();
    for (;;) {
      if (accept_op(".")) {
        s->level += 1;
      } else if (accept_op("...")) {
        s->level += 3;
      } else {
        break;
      }
    }
    if (!is_kw("import")) s->module = dotted_name();
    expect_kw("import");
    if (accept_op("*")) {
      s->aliases.push_back(Alias{"*", ""});
      return finish(std::move(s));
    }
    bool paren = accept_op("(");
    do {
      if (paren && is_op(")")) break;
      Alias a;
      a.name = expect_name().first;
      if (accept_kw("as")) a.asname = expect_name().first;
      s->aliases.push_back(std::move(a));
    } while (accept_op(","));
    if (paren) expect_op(")");
    return finish(std::move(s));
  }

  static bool is_augassign(const LexToken& t) {
    if (t.kind != LexKind::Op) return false;
    static constexpr std::string_view ops[] = {"+=", "-=", "*=", "/=", "//=", "%=", "@=",
                                               "&=", "|=", "^=", ">>=", "<<=", "**="};
    for (auto op : ops)
      if (t.text == op) return true;
    return false;
  }

  StmtPtr expr_stmt() {
    Position pos = cur().pos;
    int label = label_++;
    ExprPtr first = testlist_star_expr();
    StmtPtr s;
    if (is_op(":") && !at_tail()) {
      advance();
      s = std::make_unique<Stmt>(StmtKind::AnnAssign, pos);
      s->targets.push_back(std::move(first));
      s->annotation = test();
      if (accept_op("=")) s->value = is_kw("yield") ? yield_expr() : testlist_star_expr();
    } else if (is_augassign(cur())) {
      s = std::make_unique<Stmt>(StmtKind::AugAssign, pos);
      s->op = advance().text;
      s->targets.push_back(std::move(first));
      s->value = is_kw("yield") ? yield_expr() : testlist();
    } else if (is_op("=")) {
      s = std::make_unique<Stmt>(StmtKind::Assign, pos);
      ExprPtr rhs = std::move(first);
      while (accept_op("=")) {
        s->targets.push_back(std::move(rhs));
        rhs = is_kw("yield") ? yield_expr() : testlist_star_expr();
      }
      s->value = std::move(rhs);
    } else {
      s = std::make_unique<Stmt>(StmtKind::Expr, pos);
      s->value = std::move(first);
    }
    s->label = label;
    return finish(std::move(s));
  }

  // Parses ':' followed by a block; tolerates a missing block at the tail.
  void suite(std::vector<StmtPtr>& body) {
    expect_op(":");
    if (cur().kind != LexKind::Newline) {
      if (at_tail() && (cur().kind == LexKind::End || cur().kind == LexKind::Dedent)) return;
      simple_stmts(body);
      return;
    }
    advance();
    if (cur().kind != LexKind::Indent) {
      if (at_tail()) return;
      fail("expected an indented block");
    }
    advance();
    while (cur().kind != LexKind::Dedent && cur().kind != LexKind::End) {
      if (cur().kind == LexKind::Newline) {
        advance();
        continue;
      }
      if (cur().kind == LexKind::Indent) fail("unexpected indent");
      statement(body);
    }
    if (cur().kind == LexKind::Dedent) advance();
  }

  StmtPtr if_stmt() {
    auto s = make_stmt(StmtKind::If, cur().pos);
    advance();
    s->value = namedexpr_test();
    suite(s->body);
    s->end_line = last_line_;
    if (is_kw("elif")) {
      s->orelse.push_back(if_stmt());
    } else if (accept_kw("else")) {
      suite(s->orelse);
    }
    s->end_line = last_line_;
    return s;
  }

  StmtPtr while_stmt() {
    auto s = make_stmt(StmtKind::While, cur().pos);
    advance();
    s->value = namedexpr_test();
    suite(s->body);
    if (accept_kw("else")) suite(s->orelse);
    s->end_line = last_line_;
    return s;
  }

  StmtPtr for_stmt(bool is_async, Position pos) {
    auto s = make_stmt(StmtKind::For, pos);
    s->is_async = is_async;
    expect_kw("for");
    s->targets.push_back(exprlist());
    expect_kw("in");
    s->value = testlist();
    suite(s->body);
    if (accept_kw("else")) suite(s->orelse);
    s->end_line = last_line_;
    return s;
  }

  StmtPtr try_stmt() {
    auto s = make_stmt(StmtKind::Try, cur().pos);
    advance();
    suite(s->body);
    while (is_kw("except")) {
      Handler h;
      h.pos = advance().pos;
      accept_op("*");
      if (!is_op(":")) {
        h.type = test();
        if (accept_kw("as")) h.name = expect_name().first;
        else if (accept_op(",")) h.type = test();  // tolerated legacy form
      }
      suite(h.body);
      s->handlers.push_back(std::move(h));
    }
    if (accept_kw("else")) suite(s->orelse);
    if (accept_kw("finally")) suite(s->finalbody);
    if (s->handlers.empty() && s->finalbody.empty() && !at_tail()) fail("try without except or finally");
    s->end_line = last_line_;
    return s;
  }

  WithItem with_item() {
    WithItem item;
    item.context = test();
    if (accept_kw("as")) item.target = star_target_expr();
    return item;
  }

  StmtPtr with_stmt(bool is_async, Position pos) {
    auto s = make_stmt(StmtKind::With, pos);
    s->is_async = is_async;
    expect_kw("with");
    bool parsed = false;
    if (is_op("(")) {
      // Parenthesized with-items; fall back to an ordinary expression if not.
      std::size_t save = p_;
      int save_label = label_;
      try {
        advance();
        std::vector<WithItem> items;
        while (!is_op(")")) {
          items.push_back(with_item());
          if (!accept_op(",")) break;
        }
        expect_op(")");
        if (is_op(":") || at_tail()) {
          s->items = std::move(items);
          parsed = true;
        }
      } catch (const ParseError&) {
      }
      if (!parsed) {
        p_ = save;
        label_ = save_label;
      }
    }
    if (!parsed) {
      do {
        s->items.push_back(with_item());
      } while (accept_op(","));
    }
    suite(s->body);
    s->end_line = last_line_;
    return s;
  }

  StmtPtr decorated() {
    Position pos = cur().pos;
    std::vector<ExprPtr> decorators;
    while (accept_op("@")) {
      decorators.push_back(namedexpr_test());
      if (cur().kind == LexKind::Newline) advance();
      else if (!at_tail()) fail("expected newline after decorator");
    }
    if (is_kw("def")) return funcdef(std::move(decorators), false, pos);
    if (is_kw("class")) return classdef(std::move(decorators), pos);
    if (is_kw("async")) {
      advance();
      return funcdef(std::move(decorators), true, pos);
    }
    if (at_tail()) {
      // A decorator being typed: keep its expression so data-flow sees it.
      auto s = make_stmt(StmtKind::Expr, pos);
      s->value = std::move(decorators.back());
      decorators.pop_back();
      s->extra = std::move(decorators);
      return finish(std::move(s));
    }
    fail("expected def or class after decorator");
  }

  StmtPtr funcdef(std::vector<ExprPtr> decorators, bool is_async, Position pos) {
    auto s = make_stmt(StmtKind::FunctionDef, pos);
    s->is_async = is_async;
    s->extra = std::move(decorators);
    expect_kw("def");
    s->name = expect_name().first;
    expect_op("(");
    s->params = parameters(")", true);
    expect_op(")");
    if (accept_op("->")) s->annotation = test();
    suite(s->body);
    s->end_line = last_line_;
    return s;
  }

  // Parameter list up to `close` (not consumed).
  std::vector<Param> parameters(std::string_view close, bool annotations) {
    std::vector<Param> params;
    bool keyword_only = false;
    while (!is_op(close) && !(close == ":" && at_tail())) {
      if (at_tail() && cur().kind != LexKind::Name && !is_op("*") && !is_op("**")) break;
      if (accept_op("/")) {
        if (!accept_op(",")) break;
        continue;
      }
      Param p;
      if (is_op("**")) {
        advance();
        p.kind = Param::Kind::VarKeywords;
      } else if (is_op("*")) {
        advance();
        if (is_op(",") || is_op(close)) {
          keyword_only = true;
          if (!accept_op(",")) break;
          continue;
        }
        p.kind = Param::Kind::VarArgs;
        keyword_only = true;
      } else if (keyword_only) {
        p.kind = Param::Kind::KeywordOnly;
      }
      auto [name, npos] = expect_name();
      p.name = name;
      p.pos = npos;
      if (annotations && accept_op(":")) p.annotation = test();
      if (accept_op("=")) p.default_value = test();
      params.push_back(std::move(p));
      if (!accept_op(",")) break;
    }
    return params;
  }

  StmtPtr classdef(std::vector<ExprPtr> decorators, Position pos) {
    auto s = make_stmt(StmtKind::ClassDef, pos);
    s->extra = std::move(decorators);
    expect_kw("class");
    s->name = expect_name().first;
    if (accept_op("(")) {
      while (!is_op(")")) {
        if (at_tail() && cur().kind != LexKind::Name) break;
        s->targets.push_back(argument());
        if (!accept_op(",")) break;
      }
      expect_op(")");
    }
    suite(s->body);
    s->end_line = last_line_;
    return s;
  }

  bool looks_like_match() const {
    const auto& n = peek(1);
    if (n.kind == LexKind::Newline || n.kind == LexKind::End) return false;
    if (n.kind == LexKind::Op) {
      static constexpr std::string_view no[] = {"=", ".", ",", ")", "]", "}", ":", ";", "+=", "-=",
                                                "*=", "/=", "|=", "&=", "==", "!=", "<", ">", "%"};
      for (auto op : no)
        if (n.text == op) return false;
    }
    return true;
  }

  StmtPtr try_match_stmt() {
    std::size_t save = p_;
    int save_label = label_;
    try {
      auto s = make_stmt(StmtKind::Match, cur().pos);
      advance();
      s->value = testlist_star_expr();
      if (at_tail() && !is_op(":")) {
        s->end_line = last_line_;
        return s;
      }
      expect_op(":");
      if (cur().kind != LexKind::Newline) fail("expected newline after match");
      advance();
      if (cur().kind != LexKind::Indent) {
        if (at_tail()) return s;
        fail("expected case block");
      }
      advance();
      while (cur().kind != LexKind::Dedent && cur().kind != LexKind::End) {
        if (cur().kind == LexKind::Newline) {
          advance();
          continue;
        }
        if (!(cur().kind == LexKind::Name && cur().text == "case")) fail("expected case");
        advance();
        MatchCase c;
        pattern_depth_++;
        no_conditional_ = true;
        c.pattern = testlist_star_expr();
        no_conditional_ = false;
        pattern_depth_--;
        if (accept_kw("if")) c.guard = namedexpr_test();
        suite(c.body);
        s->cases.push_back(std::move(c));
      }
      if (cur().kind == LexKind::Dedent) advance();
      s->end_line = last_line_;
      return s;
    } catch (const ParseError&) {
      pattern_depth_ = 0;
      no_conditional_ = false;
      p_ = save;
      label_ = save_label;
      return nullptr;
    }
  }

  // ----------------------------------------------------------- expressions
  ExprPtr testlist_star_expr() {
    Position pos = cur().pos;
    ExprPtr first = star_or_namedexpr();
    if (!is_op(",")) return first;
    auto tuple = tag(make_expr(ExprKind::Tuple, pos));
    tuple->children.push_back(std::move(first));
    while (accept_op(",")) {
      if (!starts_expression()) break;
      tuple->children.push_back(star_or_namedexpr());
    }
    return tuple;
  }

  ExprPtr testlist() {
    Position pos = cur().pos;
    ExprPtr first = test();
    if (!is_op(",")) return first;
    auto tuple = tag(make_expr(ExprKind::Tuple, pos));
    tuple->children.push_back(std::move(first));
    while (accept_op(",")) {
      if (!starts_expression()) break;
      tuple->children.push_back(star_or_test());
    }
    return tuple;
  }

  // Target list for `for` and `del`: bitwise-or level expressions.
  ExprPtr exprlist() {
    Position pos = cur().pos;
    ExprPtr first = star_target_expr();
    if (!is_op(",")) return first;
    auto tuple = tag(make_expr(ExprKind::Tuple, pos));
    tuple->children.push_back(std::move(first));
    while (accept_op(",")) {
      if (!starts_expression() || is_kw("in")) break;
      tuple->children.push_back(star_target_expr());
    }
    return tuple;
  }

  ExprPtr star_target_expr() {
    if (is_op("*")) {
      Position pos = advance().pos;
      auto e = tag(make_expr(ExprKind::Starred, pos));
      e->children.push_back(bitor_expr());
      return e;
    }
    return bitor_expr();
  }

  bool starts_expression() const {
    const auto& t = cur();
    switch (t.kind) {
      case LexKind::Name:
        if (!is_keyword(t.text)) return true;
        return t.text == "None" || t.text == "True" || t.text == "False" || t.text == "not" ||
               t.text == "lambda" || t.text == "await" || t.text == "yield";
      case LexKind::Number:
      case LexKind::String:
      case LexKind::FString:
        return true;
      case LexKind::Op:
        if (t.synthetic) return false;
        return t.text == "(" || t.text == "[" || t.text == "{" || t.text == "-" || t.text == "+" ||
               t.text == "~" || t.text == "*" || t.text == "**" || t.text == "...";
      default:
        return false;
    }
  }

  ExprPtr star_or_namedexpr() {
    if (is_op("*")) {
      Position pos = advance().pos;
      auto e = tag(make_expr(ExprKind::Starred, pos));
      e->children.push_back(bitor_expr());
      return e;
    }
    return namedexpr_test();
  }

  ExprPtr star_or_test() {
    if (is_op("*")) {
      Position pos = advance().pos;
      auto e = tag(make_expr(ExprKind::Starred, pos));
      e->children.push_back(bitor_expr());
      return e;
    }
    return test();
  }

  ExprPtr namedexpr_test() {
    ExprPtr e = test();
    if (is_op(":=") && e->kind == ExprKind::Name) {
      Position pos = e->pos;
      advance();
      auto named = tag(make_expr(ExprKind::NamedExpr, pos));
      named->children.push_back(std::move(e));
      named->children.push_back(test());
      return named;
    }
    return e;
  }

  ExprPtr test() {
    if (is_kw("lambda")) return lambdef(true);
    ExprPtr body = or_test();
    if (is_kw("if") && !no_conditional_) {
      Position pos = body->pos;
      advance();
      ExprPtr cond = or_test();
      if (!is_kw("else") && at_tail()) {
        auto e = tag(make_expr(ExprKind::Conditional, pos));
        e->children.push_back(std::move(body));
        e->children.push_back(std::move(cond));
        return e;
      }
      expect_kw("else");
      auto e = tag(make_expr(ExprKind::Conditional, pos));
      e->children.push_back(std::move(body));
      e->children.push_back(std::move(cond));
      e->children.push_back(test());
      return e;
    }
    if (pattern_depth_ > 0 && is_kw("as")) {
      // Capture pattern `p as name`; kept as a NamedExpr-like binding.
      Position pos = body->pos;
      advance();
      auto [name, npos] = expect_name();
      auto target = tag(make_expr(ExprKind::Name, npos));
      target->name = name;
      auto e = tag(make_expr(ExprKind::NamedExpr, pos));
      e->children.push_back(std::move(target));
      e->children.push_back(std::move(body));
      return e;
    }
    return body;
  }

  ExprPtr test_nocond() {
    if (is_kw("lambda")) return lambdef(false);
    return or_test();
  }

  ExprPtr lambdef(bool allow_conditional) {
    Position pos = advance().pos;
    auto e = tag(make_expr(ExprKind::Lambda, pos));
    e->params = parameters(":", false);
    expect_op(":");
    e->children.push_back(allow_conditional ? test() : test_nocond());
    return e;
  }

  ExprPtr binary(ExprPtr left, std::string op, ExprPtr right) {
    Position pos = left->pos;
    auto e = tag(make_expr(ExprKind::Operation, pos));
    e->name = std::move(op);
    e->children.push_back(std::move(left));
    e->children.push_back(std::move(right));
    return e;
  }

  ExprPtr or_test() {
    ExprPtr left = and_test();
    while (is_kw("or")) {
      advance();
      left = binary(std::move(left), "or", and_test());
    }
    return left;
  }

  ExprPtr and_test() {
    ExprPtr left = not_test();
    while (is_kw("and")) {
      advance();
      left = binary(std::move(left), "and", not_test());
    }
    return left;
  }

  ExprPtr not_test() {
    if (is_kw("not")) {
      Position pos = advance().pos;
      auto e = tag(make_expr(ExprKind::Operation, pos));
      e->name = "not";
      e->children.push_back(not_test());
      return e;
    }
    return comparison();
  }

  ExprPtr comparison() {
    ExprPtr left = bitor_expr();
    for (;;) {
      std::string op;
      const auto& t = cur();
      if (t.kind == LexKind::Op &&
          (t.text == "<" || t.text == ">" || t.text == "==" || t.text == ">=" || t.text == "<=" ||
           t.text == "!=")) {
        op = advance().text;
      } else if (is_kw("in")) {
        advance();
        op = "in";
      } else if (is_kw("not") && peek().kind == LexKind::Name && peek().text == "in") {
        advance();
        advance();
        op = "not in";
      } else if (is_kw("is")) {
        advance();
        op = accept_kw("not") ? "is not" : "is";
      } else {
        break;
      }
      left = binary(std::move(left), op, bitor_expr());
    }
    return left;
  }

  template <class Next>
  ExprPtr left_assoc(Next next, std::initializer_list<std::string_view> ops) {
    ExprPtr left = (this->*next)();
    for (;;) {
      bool matched = false;
      if (cur().kind == LexKind::Op && !cur().synthetic) {
        for (auto op : ops) {
          if (cur().text == op) {
            matched = true;
            break;
          }
        }
      }
      if (!matched) return left;
      std::string op = advance().text;
      left = binary(std::move(left), op, (this->*next)());
    }
  }

  ExprPtr bitor_expr() { return left_assoc(&Parser::xor_expr, {"|"}); }
  ExprPtr xor_expr() { return left_assoc(&Parser::and_expr, {"^"}); }
  ExprPtr and_expr() { return left_assoc(&Parser::shift_expr, {"&"}); }
  ExprPtr shift_expr() { return left_assoc(&Parser::arith_expr, {"<<", ">>"}); }
  ExprPtr arith_expr() { return left_assoc(&Parser::term, {"+", "-"}); }
  ExprPtr term() { return left_assoc(&Parser::factor, {"*", "/", "%", "//", "@"}); }

  ExprPtr factor() {
    if (cur().kind == LexKind::Op && (cur().text == "+" || cur().text == "-" || cur().text == "~")) {
      const auto& t = advance();
      auto e = tag(make_expr(ExprKind::Operation, t.pos));
      e->name = t.text;
      e->children.push_back(factor());
      return e;
    }
    return power();
  }

  ExprPtr power() {
    ExprPtr base;
    if (is_kw("await")) {
      Position pos = advance().pos;
      base = tag(make_expr(ExprKind::Await, pos));
      base->children.push_back(primary());
    } else {
      base = primary();
    }
    if (is_op("**")) {
      advance();
      return binary(std::move(base), "**", factor());
    }
    return base;
  }

  ExprPtr primary() {
    ExprPtr e = atom();
    bool saved = no_conditional_;
    struct Restore {
      bool& flag;
      bool value;
      ~Restore() { flag = value; }
    } restore{no_conditional_, saved};
    no_conditional_ = false;
    for (;;) {
      if (is_op(".")) {
        Position dot = advance().pos;
        auto [name, npos] = expect_name_or_keyword_attr();
        auto attr = tag(make_expr(ExprKind::Attribute, e->pos));
        attr->op_pos = dot;
        attr->name = name;
        attr->name_pos = npos;
        attr->children.push_back(std::move(e));
        e = std::move(attr);
      } else if (is_op("(")) {
        Position paren = advance().pos;
        auto call = tag(make_expr(ExprKind::Call, e->pos));
        call->op_pos = paren;
        call->children.push_back(std::move(e));
        arglist(*call);
        expect_op(")");
        e = std::move(call);
      } else if (is_op("[")) {
        Position bracket = advance().pos;
        auto sub = tag(make_expr(ExprKind::Subscript, e->pos));
        sub->op_pos = bracket;
        sub->children.push_back(std::move(e));
        sub->children.push_back(subscriptlist());
        expect_op("]");
        e = std::move(sub);
      } else {
        return e;
      }
    }
  }

  std::pair<std::string, Position> expect_name_or_keyword_attr() {
    if (cur().kind != LexKind::Name) fail("expected attribute name");
    const auto& t = advance();
    return {t.text, t.pos};
  }

  void arglist(Expr& call) {
    while (!is_op(")")) {
      if (at_tail() && !starts_expression()) break;
      ExprPtr arg = argument();
      if (is_kw("for") || is_kw("async")) {
        auto gen = tag(make_expr(ExprKind::Comprehension, arg->pos));
        gen->name = "gen";
        gen->children.push_back(std::move(arg));
        comp_for(*gen);
        arg = std::move(gen);
      }
      call.children.push_back(std::move(arg));
      if (!accept_op(",")) break;
    }
  }

  ExprPtr argument() {
    Position pos = cur().pos;
    if (accept_op("**")) {
      auto e = tag(make_expr(ExprKind::DoubleStarred, pos));
      e->children.push_back(test());
      return e;
    }
    if (accept_op("*")) {
      auto e = tag(make_expr(ExprKind::Starred, pos));
      e->children.push_back(test());
      return e;
    }
    if (is_name() && peek_is_op(1, "=")) {
      auto [name, npos] = expect_name();
      advance();
      auto e = tag(make_expr(ExprKind::KeywordArg, npos));
      e->name = name;
      e->children.push_back(test());
      return e;
    }
    return namedexpr_test();
  }

  ExprPtr subscriptlist() {
    Position pos = cur().pos;
    ExprPtr first = subscript();
    if (!is_op(",")) return first;
    auto tuple = tag(make_expr(ExprKind::Tuple, pos));
    tuple->children.push_back(std::move(first));
    while (accept_op(",")) {
      if (is_op("]")) break;
      tuple->children.push_back(subscript());
    }
    return tuple;
  }

  ExprPtr subscript() {
    Position pos = cur().pos;
    ExprPtr lower;
    if (!is_op(":")) {
      lower = star_or_namedexpr();
      if (!is_op(":")) return lower;
    }
    auto slice = tag(make_expr(ExprKind::Slice, pos));
    if (lower) slice->children.push_back(std::move(lower));
    advance();  // ':'
    if (!is_op(":") && !is_op("]") && !is_op(",") && starts_expression()) slice->children.push_back(test());
    if (accept_op(":")) {
      if (!is_op("]") && !is_op(",") && starts_expression()) slice->children.push_back(test());
    }
    return slice;
  }

  void comp_for(Expr& comp) {
    while (is_kw("for") || is_kw("async")) {
      Generator g;
      if (accept_kw("async")) g.is_async = true;
      expect_kw("for");
      g.target = exprlist();
      expect_kw("in");
      bool saved = no_conditional_;
      no_conditional_ = true;
      g.iter = or_test();
      no_conditional_ = saved;
      while (is_kw("if")) {
        advance();
        bool saved_cond = no_conditional_;
        no_conditional_ = true;
        g.conditions.push_back(test_nocond());
        no_conditional_ = saved_cond;
      }
      comp.generators.push_back(std::move(g));
    }
  }

  ExprPtr yield_expr() {
    Position pos = advance().pos;
    if (accept_kw("from")) {
      auto e = tag(make_expr(ExprKind::YieldFrom, pos));
      e->children.push_back(test());
      return e;
    }
    auto e = tag(make_expr(ExprKind::Yield, pos));
    if (starts_expression() && !is_kw("yield")) e->children.push_back(testlist_star_expr());
    return e;
  }

  ExprPtr atom() {
    const auto& t = cur();
    Position pos = t.pos;
    switch (t.kind) {
      case LexKind::Name: {
        if (t.text == "None" || t.text == "True" || t.text == "False") {
          auto e = tag(make_expr(ExprKind::Literal, pos));
          e->name = t.text;
          advance();
          return e;
        }
        if (t.text == "yield") return yield_expr();
        if (is_keyword(t.text)) fail("unexpected keyword");
        auto e = tag(make_expr(ExprKind::Name, pos));
        e->name = t.text;
        advance();
        return e;
      }
      case LexKind::Number: {
        auto e = tag(make_expr(ExprKind::Literal, pos));
        const std::string& txt = t.text;
        bool is_complex = !txt.empty() && (txt.back() == 'j' || txt.back() == 'J');
        bool is_hex = txt.size() > 1 && txt[0] == '0' && (txt[1] == 'x' || txt[1] == 'X');
        bool is_float = !is_hex && txt.find_first_of(".eE") != std::string::npos;
        e->name = is_complex ? "complex" : is_float ? "float" : "int";
        advance();
        return e;
      }
      case LexKind::String:
      case LexKind::FString:
        return strings();
      case LexKind::Op:
        if (t.text == "(" || t.text == "[" || t.text == "{") {
          // Conditionals are allowed again inside brackets.
          bool saved = no_conditional_;
          no_conditional_ = false;
          ExprPtr e = t.text == "(" ? paren_atom() : t.text == "[" ? list_atom() : brace_atom();
          no_conditional_ = saved;
          return e;
        }
        if (t.text == "...") {
          auto e = tag(make_expr(ExprKind::Literal, pos));
          e->name = "Ellipsis";
          advance();
          return e;
        }
        break;
      default:
        break;
    }
    fail("expected an expression");
  }

  ExprPtr strings() {
    Position pos = cur().pos;
    bool any_f = false;
    bool is_bytes = false;
    std::vector<ExprPtr> fields;
    while (cur().kind == LexKind::String || cur().kind == LexKind::FString) {
      const auto& t = advance();
      std::size_t q = t.text.find_first_of("'\"");
      for (std::size_t k = 0; k < q; ++k)
        if (t.text[k] == 'b' || t.text[k] == 'B') is_bytes = true;
      if (t.kind == LexKind::FString) {
        any_f = true;
        fstring_fields(t, fields);
      }
    }
    if (!any_f) {
      auto e = tag(make_expr(ExprKind::Literal, pos));
      e->name = is_bytes ? "bytes" : "str";
      return e;
    }
    auto e = tag(make_expr(ExprKind::FString, pos));
    e->children = std::move(fields);
    return e;
  }

  void fstring_fields(const LexToken& tok, std::vector<ExprPtr>& out) {
    for (const auto& span : fstring_field_spans(tok.text)) parse_fstring_field(tok, span.begin, span.end, out);
  }

  void parse_fstring_field(const LexToken& tok, std::size_t begin, std::size_t end,
                           std::vector<ExprPtr>& out) {
    if (end <= begin) return;
    std::string_view text(tok.text.data() + begin, end - begin);
    if (text.find_first_not_of(" \t\n") == std::string_view::npos) return;
    Position at = offset_position(tok, begin);
    LexOptions lo;
    lo.expression_only = true;
    lo.first_line = at.line;
    lo.first_column = at.column;
    Parser sub(lex(text, lo), ParseOptions{}, true);
    sub.set_label_base(label_);
    out.push_back(sub.standalone_expression());
  }

  ExprPtr paren_atom() {
    Position pos = advance().pos;
    if (is_op(")")) {
      advance();
      return tag(make_expr(ExprKind::Tuple, pos));
    }
    if (is_kw("yield")) {
      ExprPtr y = yield_expr();
      expect_op(")");
      return y;
    }
    ExprPtr first = star_or_namedexpr();
    if (is_kw("for") || is_kw("async")) {
      auto gen = tag(make_expr(ExprKind::Comprehension, pos));
      gen->name = "gen";
      gen->children.push_back(std::move(first));
      comp_for(*gen);
      expect_op(")");
      return gen;
    }
    if (!is_op(",")) {
      expect_op(")");
      return first;
    }
    auto tuple = tag(make_expr(ExprKind::Tuple, pos));
    tuple->children.push_back(std::move(first));
    while (accept_op(",")) {
      if (is_op(")") || !starts_expression()) break;
      tuple->children.push_back(star_or_namedexpr());
    }
    expect_op(")");
    return tuple;
  }

  ExprPtr list_atom() {
    Position pos = advance().pos;
    if (is_op("]")) {
      advance();
      return tag(make_expr(ExprKind::List, pos));
    }
    ExprPtr first = star_or_namedexpr();
    if (is_kw("for") || is_kw("async")) {
      auto comp = tag(make_expr(ExprKind::Comprehension, pos));
      comp->name = "list";
      comp->children.push_back(std::move(first));
      comp_for(*comp);
      expect_op("]");
      return comp;
    }
    auto list = tag(make_expr(ExprKind::List, pos));
    list->children.push_back(std::move(first));
    while (accept_op(",")) {
      if (is_op("]") || !starts_expression()) break;
      list->children.push_back(star_or_namedexpr());
    }
    expect_op("]");
    return list;
  }

  ExprPtr brace_atom() {
    Position pos = advance().pos;
    if (is_op("}")) {
      advance();
      return tag(make_expr(ExprKind::Dict, pos));
    }
    auto entry = [&]() -> std::pair<ExprPtr, bool> {
      Position epos = cur().pos;
      if (accept_op("**")) {
        auto e = tag(make_expr(ExprKind::DoubleStarred, epos));
        e->children.push_back(bitor_expr());
        return {std::move(e), true};
      }
      ExprPtr key = star_or_namedexpr();
      if (accept_op(":")) {
        auto kv = tag(make_expr(ExprKind::KeyValue, epos));
        kv->children.push_back(std::move(key));
        if (at_tail() && !starts_expression()) return {std::move(kv), true};
        kv->children.push_back(test());
        return {std::move(kv), true};
      }
      return {std::move(key), false};
    };
    auto [first, is_dict] = entry();
    if (is_kw("for") || is_kw("async")) {
      auto comp = tag(make_expr(ExprKind::Comprehension, pos));
      comp->name = is_dict ? "dict" : "set";
      comp->children.push_back(std::move(first));
      comp_for(*comp);
      expect_op("}");
      return comp;
    }
    auto display = tag(make_expr(is_dict ? ExprKind::Dict : ExprKind::Set, pos));
    display->children.push_back(std::move(first));
    while (accept_op(",")) {
      if (is_op("}") || (!starts_expression() && !is_op("**"))) break;
      auto [next, next_dict] = entry();
      display->children.push_back(std::move(next));
    }
    expect_op("}");
    return display;
  }

  std::vector<LexToken> toks_;
  std::size_t p_ = 0;
  std::size_t tail_ = 0;
  bool tolerant_;
  bool in_fstring_;
  bool no_conditional_ = false;
  int pattern_depth_ = 0;
  int label_ = 0;
  int last_line_ = 1;
};

}  // namespace

Module parse_tokens(std::vector<LexToken> tokens, const ParseOptions& options) {
  Parser parser(std::move(tokens), options);
  return parser.module();
}

Module parse_module(std::string_view source, const ParseOptions& options) {
  LexOptions lo;
  lo.tolerate_incomplete_tail = options.tolerate_incomplete_tail;
  return parse_tokens(lex(source, lo), options);
}

const char* to_string(StmtKind kind) {
  switch (kind) {
    case StmtKind::Expr: return "Expr";
    case StmtKind::Assign: return "Assign";
    case StmtKind::AugAssign: return "AugAssign";
    case StmtKind::AnnAssign: return "AnnAssign";
    case StmtKind::For: return "For";
    case StmtKind::While: return "While";
    case StmtKind::If: return "If";
    case StmtKind::With: return "With";
    case StmtKind::FunctionDef: return "FunctionDef";
    case StmtKind::ClassDef: return "ClassDef";
    case StmtKind::Return: return "Return";
    case StmtKind::Delete: return "Delete";
    case StmtKind::Raise: return "Raise";
    case StmtKind::Try: return "Try";
    case StmtKind::Assert: return "Assert";
    case StmtKind::Import: return "Import";
    case StmtKind::ImportFrom: return "ImportFrom";
    case StmtKind::Global: return "Global";
    case StmtKind::Nonlocal: return "Nonlocal";
    case StmtKind::Pass: return "Pass";
    case StmtKind::Break: return "Break";
    case StmtKind::Continue: return "Continue";
    case StmtKind::Match: return "Match";
  }
  return "?";
}

const char* to_string(ExprKind kind) {
  switch (kind) {
    case ExprKind::Name: return "Name";
    case ExprKind::Attribute: return "Attribute";
    case ExprKind::Call: return "Call";
    case ExprKind::Subscript: return "Subscript";
    case ExprKind::Literal: return "Literal";
    case ExprKind::FString: return "FString";
    case ExprKind::Operation: return "Operation";
    case ExprKind::Tuple: return "Tuple";
    case ExprKind::List: return "List";
    case ExprKind::Set: return "Set";
    case ExprKind::Dict: return "Dict";
    case ExprKind::KeyValue: return "KeyValue";
    case ExprKind::Comprehension: return "Comprehension";
    case ExprKind::Lambda: return "Lambda";
    case ExprKind::Conditional: return "Conditional";
    case ExprKind::Starred: return "Starred";
    case ExprKind::DoubleStarred: return "DoubleStarred";
    case ExprKind::KeywordArg: return "KeywordArg";
    case ExprKind::NamedExpr: return "NamedExpr";
    case ExprKind::Await: return "Await";
    case ExprKind::Yield: return "Yield";
    case ExprKind::YieldFrom: return "YieldFrom";
    case ExprKind::Slice: return "Slice";
  }
  return "?";
}

}  // namespace flowrank::frontend
