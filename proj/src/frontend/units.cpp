#include <algorithm>
#include <set>
#include <unordered_map>

#include "flowrank/frontend/frontend.hpp"
#include "units_internal.hpp"

namespace flowrank::frontend {

std::string Operand::node_key() const {
  if (member) return "@" + std::to_string(pos.line) + ":" + std::to_string(pos.column) + ":" + name;
  return scope + "::" + name;
}

const char* to_string(UnitKind kind) {
  switch (kind) {
    case UnitKind::Assign: return "Assign";
    case UnitKind::For: return "For";
    case UnitKind::Invoke: return "Invoke";
    case UnitKind::Access: return "Access";
    case UnitKind::Para: return "Para";
  }
  return "?";
}

namespace {

struct Scope {
  enum class Kind { Module, Function, Class };
  Kind kind = Kind::Module;
  int parent = -1;
  std::string key;
  std::set<std::string, std::less<>> locals;
  std::set<std::string, std::less<>> globals;
  std::set<std::string, std::less<>> nonlocals;
};

// Python name resolution restricted to the code that was parsed. Comprehensions
// share the enclosing scope; lambdas get their own.
class ScopeTable {
public:
  explicit ScopeTable(const Module& m) {
    scopes_.push_back(Scope{});
    collect_block(m.body, 0);
  }

  int scope_of(const void* node) const {
    auto it = by_node_.find(node);
    return it == by_node_.end() ? 0 : it->second;
  }

  std::string resolve(std::string_view name, int s) const {
    const Scope& sc = scopes_[s];
    if (sc.kind == Scope::Kind::Module || sc.globals.count(name)) return "";
    if (sc.nonlocals.count(name)) return enclosing(name, sc.parent);
    if (sc.locals.count(name)) return sc.key;
    return enclosing(name, sc.parent);
  }

private:
  std::string enclosing(std::string_view name, int p) const {
    while (p > 0) {
      const Scope& sc = scopes_[p];
      if (sc.kind != Scope::Kind::Class) {
        if (sc.globals.count(name)) return "";
        if (sc.locals.count(name) && !sc.nonlocals.count(name)) return sc.key;
      }
      p = sc.parent;
    }
    return "";
  }

  int open(const void* node, Scope::Kind kind, int parent, const std::string& name, int line) {
    Scope sc;
    sc.kind = kind;
    sc.parent = parent;
    sc.key = scopes_[parent].key + "/" + name + "@" + std::to_string(line);
    scopes_.push_back(std::move(sc));
    int id = static_cast<int>(scopes_.size()) - 1;
    by_node_[node] = id;
    return id;
  }

  void bind_names(const Expr& target, int s) {
    switch (target.kind) {
      case ExprKind::Name:
        scopes_[s].locals.insert(target.name);
        break;
      case ExprKind::Tuple:
      case ExprKind::List:
      case ExprKind::Starred:
        for (const auto& c : target.children) bind_names(*c, s);
        break;
      default:
        break;
    }
  }

  void collect_expr(const Expr& e, int s) {
    if (e.kind == ExprKind::Lambda) {
      for (const auto& p : e.params)
        if (p.default_value) collect_expr(*p.default_value, s);
      int inner = open(&e, Scope::Kind::Function, s, "lambda", e.pos.line);
      for (const auto& p : e.params) scopes_[inner].locals.insert(p.name);
      collect_expr(*e.children[0], inner);
      return;
    }
    if (e.kind == ExprKind::NamedExpr) {
      bind_names(*e.children[0], s);
    }
    if (e.kind == ExprKind::Comprehension) {
      for (const auto& g : e.generators) bind_names(*g.target, s);
    }
    for_each_child(e, [&](const Expr& c) { collect_expr(c, s); });
  }

  void collect_block(const std::vector<StmtPtr>& body, int s) {
    for (const auto& st : body) collect_stmt(*st, s);
  }

  void collect_stmt(const Stmt& st, int s) {
    auto exprs = [&](const std::vector<ExprPtr>& v) {
      for (const auto& e : v)
        if (e) collect_expr(*e, s);
    };
    switch (st.kind) {
      case StmtKind::Assign:
      case StmtKind::AugAssign:
      case StmtKind::AnnAssign:
      case StmtKind::For:
      case StmtKind::Delete:
        for (const auto& t : st.targets) bind_names(*t, s);
        break;
      case StmtKind::With:
        for (const auto& item : st.items) {
          if (item.target) bind_names(*item.target, s);
          collect_expr(*item.context, s);
        }
        break;
      case StmtKind::Import:
        for (const auto& a : st.aliases) {
          if (!a.asname.empty()) {
            scopes_[s].locals.insert(a.asname);
          } else {
            scopes_[s].locals.insert(a.name.substr(0, a.name.find('.')));
          }
        }
        break;
      case StmtKind::ImportFrom:
        for (const auto& a : st.aliases)
          if (a.name != "*") scopes_[s].locals.insert(a.asname.empty() ? a.name : a.asname);
        break;
      case StmtKind::Global:
        for (const auto& n : st.names) scopes_[s].globals.insert(n);
        break;
      case StmtKind::Nonlocal:
        for (const auto& n : st.names) scopes_[s].nonlocals.insert(n);
        break;
      case StmtKind::FunctionDef: {
        scopes_[s].locals.insert(st.name);
        exprs(st.extra);
        for (const auto& p : st.params)
          if (p.default_value) collect_expr(*p.default_value, s);
        int inner = open(&st, Scope::Kind::Function, s, st.name, st.pos.line);
        for (const auto& p : st.params) scopes_[inner].locals.insert(p.name);
        collect_block(st.body, inner);
        return;
      }
      case StmtKind::ClassDef: {
        scopes_[s].locals.insert(st.name);
        exprs(st.extra);
        exprs(st.targets);
        int inner = open(&st, Scope::Kind::Class, s, st.name, st.pos.line);
        collect_block(st.body, inner);
        return;
      }
      case StmtKind::Try:
        for (const auto& h : st.handlers) {
          if (!h.name.empty()) scopes_[s].locals.insert(h.name);
          if (h.type) collect_expr(*h.type, s);
          collect_block(h.body, s);
        }
        break;
      case StmtKind::Match:
        for (const auto& c : st.cases) {
          if (c.guard) collect_expr(*c.guard, s);
          collect_block(c.body, s);
        }
        break;
      default:
        break;
    }
    if (st.kind != StmtKind::FunctionDef && st.kind != StmtKind::ClassDef) {
      exprs(st.targets);
      if (st.value) collect_expr(*st.value, s);
      exprs(st.extra);
    }
    collect_block(st.body, s);
    collect_block(st.orelse, s);
    collect_block(st.finalbody, s);
  }

  std::vector<Scope> scopes_;
  std::unordered_map<const void*, int> by_node_;
};

class UnitBuilder {
public:
  UnitBuilder(const Module& m, Hole* hole) : scopes_(m), hole_(hole) {}

  std::vector<AstUnit> run(const Module& m) {
    block(m.body);
    std::stable_sort(out_.begin(), out_.end(),
                     [](const AstUnit& a, const AstUnit& b) { return a.label < b.label; });
    return std::move(out_);
  }

private:
  Operand var(const std::string& name, Position pos) const {
    return Operand{name, pos, false, scopes_.resolve(name, scope_)};
  }
  static Operand member(const Expr& attr) { return Operand{attr.name, attr.name_pos, true, ""}; }

  void emit(UnitKind kind, std::vector<Operand> sources, std::optional<Operand> target, bool kills = false) {
    AstUnit u;
    u.kind = kind;
    u.label = label_;
    u.line = line_;
    u.sources = std::move(sources);
    u.target = std::move(target);
    u.kills = kills;
    out_.push_back(std::move(u));
  }

  // Objects of an expression: every Name and every attribute name.
  void vm(const Expr& e, std::vector<Operand>& out) {
    switch (e.kind) {
      case ExprKind::Name:
        out.push_back(var(e.name, e.pos));
        return;
      case ExprKind::Attribute:
        vm(*e.children[0], out);
        out.push_back(member(e));
        return;
      case ExprKind::Lambda: {
        for (const auto& p : e.params)
          if (p.default_value) vm(*p.default_value, out);
        int saved = scope_;
        scope_ = scopes_.scope_of(&e);
        vm(*e.children[0], out);
        scope_ = saved;
        return;
      }
      default:
        for_each_child(e, [&](const Expr& c) { vm(c, out); });
    }
  }

  std::vector<Operand> vm(const Expr& e) {
    std::vector<Operand> out;
    vm(e, out);
    return out;
  }

  std::optional<Operand> head(const Expr& e) const {
    switch (e.kind) {
      case ExprKind::Name: return var(e.name, e.pos);
      case ExprKind::Attribute: return member(e);
      case ExprKind::Call:
      case ExprKind::Subscript: return head(*e.children[0]);
      default: return std::nullopt;
    }
  }

  static bool has_starred(const Expr& e) {
    return std::any_of(e.children.begin(), e.children.end(),
                       [](const ExprPtr& c) { return c->kind == ExprKind::Starred; });
  }

  void bind(const Expr& target, const Expr* value, const std::vector<Operand>& sources, UnitKind rule,
            bool kill) {
    switch (target.kind) {
      case ExprKind::Name:
        emit(rule, sources, var(target.name, target.pos), kill);
        return;
      case ExprKind::Attribute:
        emit(rule, sources, member(target));
        return;
      case ExprKind::Subscript:
        emit(rule, sources, head(*target.children[0]));
        return;
      case ExprKind::Starred:
        bind(*target.children[0], nullptr, sources, rule, kill);
        return;
      case ExprKind::Tuple:
      case ExprKind::List:
        if (value && (value->kind == ExprKind::Tuple || value->kind == ExprKind::List) &&
            value->children.size() == target.children.size() && !has_starred(target) && !has_starred(*value)) {
          for (std::size_t i = 0; i < target.children.size(); ++i)
            bind(*target.children[i], value->children[i].get(), vm(*value->children[i]), rule, kill);
        } else {
          for (const auto& c : target.children) bind(*c, nullptr, sources, rule, kill);
        }
        return;
      default:
        return;
    }
  }

  void walk(const Expr& e) {
    switch (e.kind) {
      case ExprKind::Attribute: {
        if (hole_ && e.name == kHoleName && hole_->label < 0) {
          hole_->label = label_;
          hole_->dot = e.op_pos;
          hole_->name_pos = e.name_pos;
          hole_->receiver = head(*e.children[0]);
          hole_->receiver_node = e.children[0].get();
          hole_->attribute_node = &e;
        }
        std::vector<Operand> src;
        if (auto h = head(*e.children[0])) src.push_back(*h);
        emit(UnitKind::Invoke, std::move(src), member(e));
        walk(*e.children[0]);
        return;
      }
      case ExprKind::Call: {
        walk(*e.children[0]);
        if (e.children.size() > 1) {
          std::vector<Operand> src;
          for (std::size_t i = 1; i < e.children.size(); ++i) vm(*e.children[i], src);
          emit(UnitKind::Para, std::move(src), head(*e.children[0]));
        }
        for (std::size_t i = 1; i < e.children.size(); ++i) walk(*e.children[i]);
        return;
      }
      case ExprKind::Subscript:
        walk(*e.children[0]);
        emit(UnitKind::Access, vm(*e.children[1]), head(*e.children[0]));
        walk(*e.children[1]);
        return;
      case ExprKind::NamedExpr:
        walk(*e.children[1]);
        bind(*e.children[0], e.children[1].get(), vm(*e.children[1]), UnitKind::Assign, true);
        return;
      case ExprKind::Lambda: {
        for (const auto& p : e.params)
          if (p.default_value) walk(*p.default_value);
        int saved = scope_;
        scope_ = scopes_.scope_of(&e);
        walk(*e.children[0]);
        scope_ = saved;
        return;
      }
      case ExprKind::Comprehension:
        for (const auto& g : e.generators) {
          walk(*g.iter);
          bind(*g.target, nullptr, vm(*g.iter), UnitKind::For, true);
          walk(*g.target);
          for (const auto& c : g.conditions) walk(*c);
        }
        walk(*e.children[0]);
        return;
      default:
        for_each_child(e, [&](const Expr& c) { walk(c); });
    }
  }

  void walk_all(const std::vector<ExprPtr>& v) {
    for (const auto& e : v)
      if (e) walk(*e);
  }

  void block(const std::vector<StmtPtr>& body) {
    for (const auto& s : body) stmt(*s);
  }

  void at(const Stmt& s) {
    label_ = s.label;
    line_ = s.pos.line;
  }

  void stmt(const Stmt& s) {
    at(s);
    switch (s.kind) {
      case StmtKind::Expr:
        walk_all(s.extra);
        if (s.value) walk(*s.value);
        break;
      case StmtKind::Assign: {
        auto sources = vm(*s.value);
        for (const auto& t : s.targets) bind(*t, s.value.get(), sources, UnitKind::Assign, true);
        walk(*s.value);
        walk_all(s.targets);
        break;
      }
      case StmtKind::AugAssign:
        bind(*s.targets[0], nullptr, vm(*s.value), UnitKind::Assign, false);
        walk(*s.value);
        walk(*s.targets[0]);
        break;
      case StmtKind::AnnAssign:
        if (s.value) {
          bind(*s.targets[0], s.value.get(), vm(*s.value), UnitKind::Assign, true);
          walk(*s.value);
        }
        walk(*s.targets[0]);
        break;
      case StmtKind::For:
        bind(*s.targets[0], nullptr, vm(*s.value), UnitKind::For, true);
        walk(*s.value);
        walk(*s.targets[0]);
        block(s.body);
        block(s.orelse);
        break;
      case StmtKind::While:
      case StmtKind::If:
        walk(*s.value);
        block(s.body);
        block(s.orelse);
        break;
      case StmtKind::With:
        for (const auto& item : s.items) {
          if (item.target) bind(*item.target, item.context.get(), vm(*item.context), UnitKind::Assign, true);
          walk(*item.context);
          if (item.target) walk(*item.target);
        }
        block(s.body);
        break;
      case StmtKind::FunctionDef: {
        walk_all(s.extra);
        for (const auto& p : s.params)
          if (p.default_value) walk(*p.default_value);
        int saved = scope_;
        scope_ = scopes_.scope_of(&s);
        block(s.body);
        scope_ = saved;
        break;
      }
      case StmtKind::ClassDef: {
        walk_all(s.extra);
        walk_all(s.targets);
        int saved = scope_;
        scope_ = scopes_.scope_of(&s);
        block(s.body);
        scope_ = saved;
        break;
      }
      case StmtKind::Return:
        if (s.value) walk(*s.value);
        break;
      case StmtKind::Raise:
        if (s.value) walk(*s.value);
        walk_all(s.extra);
        break;
      case StmtKind::Delete:
        walk_all(s.targets);
        break;
      case StmtKind::Assert:
        walk_all(s.extra);
        break;
      case StmtKind::Try:
        block(s.body);
        for (const auto& h : s.handlers) {
          if (h.type) {
            at(s);
            walk(*h.type);
          }
          block(h.body);
        }
        block(s.orelse);
        block(s.finalbody);
        break;
      case StmtKind::Match:
        walk(*s.value);
        for (const auto& c : s.cases) {
          if (c.guard) {
            at(s);
            walk(*c.guard);
          }
          block(c.body);
        }
        break;
      default:
        break;
    }
  }

  ScopeTable scopes_;
  Hole* hole_;
  int scope_ = 0;
  int label_ = 0;
  int line_ = 0;
  std::vector<AstUnit> out_;
};

}  // namespace

std::vector<AstUnit> extract_units_with_hole(const Module& module, Hole* hole) {
  return UnitBuilder(module, hole).run(module);
}

std::vector<AstUnit> extract_units(const Module& module) { return extract_units_with_hole(module, nullptr); }

}  // namespace flowrank::frontend
