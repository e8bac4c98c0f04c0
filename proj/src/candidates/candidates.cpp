#include "flowrank/candidates/candidates.hpp"

#include <algorithm>
#include <mutex>
#include <set>
#include <unordered_set>

#include <json.hpp>

#include "embedded_data.hpp"
#include "flowrank/errors.hpp"

namespace flowrank::candidates {

using frontend::Expr;
using frontend::ExprKind;
using frontend::Module;
using frontend::SourceContext;
using frontend::Stmt;
using frontend::StmtKind;
using frontend::StmtPtr;

const char* to_string(Source source) {
  switch (source) {
    case Source::InferredType: return "inferred_type";
    case Source::ScopeMethod: return "scope_method";
    case Source::ImportedLibrary: return "imported_library";
    case Source::StandardLibrary: return "standard_library";
  }
  return "?";
}

namespace {

NameTable read_table(const char* text, const char* key) {
  auto j = nlohmann::json::parse(text);
  NameTable out;
  for (auto& [name, entries] : j.at(key).items()) out[name] = entries.get<std::vector<std::string>>();
  return out;
}

template <class Fn>
void walk_statements(const std::vector<StmtPtr>& body, Fn&& fn) {
  for (const auto& s : body) {
    fn(*s);
    walk_statements(s->body, fn);
    walk_statements(s->orelse, fn);
    walk_statements(s->finalbody, fn);
    for (const auto& h : s->handlers) walk_statements(h.body, fn);
    for (const auto& c : s->cases) walk_statements(c.body, fn);
  }
}

bool is_dunder(const std::string& name) {
  return name.size() > 4 && name.rfind("__", 0) == 0 && name.compare(name.size() - 2, 2, "__") == 0;
}

const std::set<std::string, std::less<>> kConstructors = {"str",   "bytes",     "bytearray", "list",
                                                          "dict",  "set",       "frozenset", "tuple",
                                                          "int",   "float",     "complex",   "bool"};

// ------------------------------------------------------------ type inference

std::optional<std::string> annotation_type(const Expr& a) {
  switch (a.kind) {
    case ExprKind::Name: {
      if (kConstructors.count(a.name)) return a.name;
      static const std::map<std::string, std::string> typing = {
          {"List", "list"}, {"Dict", "dict"}, {"Set", "set"}, {"FrozenSet", "frozenset"}, {"Tuple", "tuple"}};
      auto it = typing.find(a.name);
      if (it != typing.end()) return it->second;
      return std::nullopt;
    }
    case ExprKind::Attribute:
      if (a.children[0]->kind == ExprKind::Name && a.children[0]->name == "typing") {
        Expr bare(ExprKind::Name, a.pos);
        bare.name = a.name;
        return annotation_type(bare);
      }
      return std::nullopt;
    case ExprKind::Subscript:
      return annotation_type(*a.children[0]);
    default:
      return std::nullopt;
  }
}

class Inferrer {
public:
  Inferrer(const SourceContext& ctx) : ctx_(ctx) {
    walk_statements(ctx.module->body, [&](const Stmt& s) {
      if (s.kind == StmtKind::FunctionDef || s.kind == StmtKind::ClassDef) shadowed_.insert(s.name);
    });
  }

  std::optional<std::string> value_type(const Expr& e, int depth = 0) const {
    switch (e.kind) {
      case ExprKind::Literal:
        if (e.name == "True" || e.name == "False") return "bool";
        if (kConstructors.count(e.name)) return e.name;
        return std::nullopt;
      case ExprKind::FString: return "str";
      case ExprKind::List: return "list";
      case ExprKind::Tuple: return "tuple";
      case ExprKind::Dict: return "dict";
      case ExprKind::Set: return "set";
      case ExprKind::Comprehension:
        if (e.name == "gen") return std::nullopt;
        return e.name;
      case ExprKind::Call: {
        const Expr& f = *e.children[0];
        if (f.kind == ExprKind::Name && kConstructors.count(f.name) && !shadowed_.count(f.name)) return f.name;
        return std::nullopt;
      }
      case ExprKind::Operation:
        if (e.children.size() == 2 && (e.name == "+" || e.name == "%" || e.name == "*")) {
          auto left = value_type(*e.children[0], depth);
          if (left && (*left == "str" || *left == "bytes" || *left == "list" || *left == "tuple")) return left;
        }
        return std::nullopt;
      case ExprKind::Name:
        if (depth > 0) return std::nullopt;
        return name_type(e.name);
      case ExprKind::Attribute: {
        if (depth > 0) return std::nullopt;
        auto base = value_type(*e.children[0], depth);
        if (base && base->rfind(kModulePrefix, 0) == 0) return *base + "." + e.name;
        return std::nullopt;
      }
      default:
        return std::nullopt;
    }
  }

private:
  // Innermost function or class whose body holds the point.
  const Stmt* enclosing_scope(const std::vector<StmtPtr>& body) const {
    const Stmt* found = nullptr;
    walk_statements(body, [&](const Stmt& s) {
      if ((s.kind == StmtKind::FunctionDef || s.kind == StmtKind::ClassDef) && s.label < ctx_.hole.label &&
          !s.body.empty() && ctx_.hole.label >= s.body.front()->label && ctx_.hole.label <= last_label(s))
        found = &s;  // pre-order: later matches are nested deeper
    });
    return found;
  }

  static int last_label(const Stmt& s) {
    int last = s.label;
    walk_statements(s.body, [&](const Stmt& c) { last = std::max(last, c.label); });
    walk_statements(s.orelse, [&](const Stmt& c) { last = std::max(last, c.label); });
    walk_statements(s.finalbody, [&](const Stmt& c) { last = std::max(last, c.label); });
    for (const auto& h : s.handlers) walk_statements(h.body, [&](const Stmt& c) { last = std::max(last, c.label); });
    for (const auto& c : s.cases) walk_statements(c.body, [&](const Stmt& x) { last = std::max(last, x.label); });
    return last;
  }

  static bool binds(const Expr& target, const std::string& name) {
    if (target.kind == ExprKind::Name) return target.name == name;
    if (target.kind == ExprKind::Tuple || target.kind == ExprKind::List || target.kind == ExprKind::Starred)
      return std::any_of(target.children.begin(), target.children.end(),
                         [&](const auto& c) { return binds(*c, name); });
    return false;
  }

  // Last binding of `name` in a scope body (not descending into nested scopes).
  // Returns true when the name is bound there; `type` holds the inferred type.
  bool last_binding(const std::vector<StmtPtr>& body, const std::string& name, std::optional<std::string>& type) const {
    bool bound = false;
    std::function<void(const std::vector<StmtPtr>&)> visit = [&](const std::vector<StmtPtr>& b) {
      for (const auto& sp : b) {
        const Stmt& s = *sp;
        if (s.label >= ctx_.hole.label) return;
        switch (s.kind) {
          case StmtKind::Assign:
            for (const auto& t : s.targets) {
              if (t->kind == ExprKind::Name && t->name == name) {
                bound = true;
                type = value_type(*s.value, 1);
              } else if (binds(*t, name)) {
                bound = true;
                type.reset();
              }
            }
            break;
          case StmtKind::AnnAssign:
            if (binds(*s.targets[0], name)) {
              bound = true;
              type = annotation_type(*s.annotation);
              if (!type && s.value) type = value_type(*s.value, 1);
            }
            break;
          case StmtKind::For:
            if (binds(*s.targets[0], name)) {
              bound = true;
              type.reset();
            }
            break;
          case StmtKind::With:
            for (const auto& item : s.items)
              if (item.target && binds(*item.target, name)) {
                bound = true;
                type.reset();
              }
            break;
          case StmtKind::FunctionDef:
          case StmtKind::ClassDef:
            if (s.name == name) {
              bound = true;
              type.reset();
            }
            continue;  // nested scope
          case StmtKind::Import:
            for (const auto& a : s.aliases) {
              std::string top = a.name.substr(0, a.name.find('.'));
              if ((a.asname.empty() ? top : a.asname) == name) {
                bound = true;
                type = std::string(kModulePrefix) + (a.asname.empty() ? top : a.name);
              }
            }
            break;
          case StmtKind::ImportFrom:
            for (const auto& a : s.aliases) {
              if ((a.asname.empty() ? a.name : a.asname) != name) continue;
              bound = true;
              type.reset();
              // `from pkg import sub` may bind a module; generation falls back when it is not indexed
              if (s.level == 0 && !s.module.empty()) type = std::string(kModulePrefix) + s.module + "." + a.name;
            }
            break;
          default:
            break;
        }
        visit(s.body);
        visit(s.orelse);
        visit(s.finalbody);
        for (const auto& h : s.handlers) {
          if (h.name == name) {
            bound = true;
            type.reset();
          }
          visit(h.body);
        }
        for (const auto& c : s.cases) visit(c.body);
      }
    };
    visit(body);
    return bound;
  }

  std::optional<std::string> name_type(const std::string& name) const {
    const Stmt* scope = enclosing_scope(ctx_.module->body);
    std::optional<std::string> type;
    if (scope) {
      if (last_binding(scope->body, name, type)) return type;
      if (scope->kind == StmtKind::FunctionDef) {
        for (const auto& p : scope->params) {
          if (p.name != name) continue;
          if (p.annotation) return annotation_type(*p.annotation);
          if (p.default_value) {
            auto t = value_type(*p.default_value, 1);
            if (t && *t != "bool") return t;  // a None default hides the real type
          }
          return std::nullopt;
        }
      }
    }
    if (last_binding(ctx_.module->body, name, type)) return type;
    return std::nullopt;
  }

  const SourceContext& ctx_;
  std::set<std::string, std::less<>> shadowed_;
};

}  // namespace

Indexes Indexes::builtin_defaults() {
  static std::once_flag once;
  static Indexes defaults;
  std::call_once(once, [] {
    defaults.stdlib = read_table(embedded::kStdlibIndexJson, "modules");
    defaults.types = read_table(embedded::kTypeIndexJson, "types");
  });
  return defaults;
}

std::optional<std::string> TypeInference::infer(const SourceContext& ctx, const Expr& receiver) const {
  return Inferrer(ctx).value_type(receiver);
}

std::optional<std::string> infer_type(const SourceContext& ctx, const Expr* receiver, const TypeInference* inference) {
  if (!receiver || !ctx.module) return std::nullopt;
  static const TypeInference fallback;
  return (inference ? inference : &fallback)->infer(ctx, *receiver);
}

bool is_class_expression(const SourceContext& ctx, const Expr* receiver) {
  if (!receiver) return false;
  if (receiver->kind == ExprKind::Call) {
    const Expr& f = *receiver->children[0];
    return f.kind == ExprKind::Name && f.name == "super";
  }
  if (receiver->kind != ExprKind::Name) return false;
  if (receiver->name == "cls") return true;
  bool found = false;
  walk_statements(ctx.module->body, [&](const Stmt& s) {
    if (s.kind == StmtKind::ClassDef && s.name == receiver->name) found = true;
  });
  return found;
}

std::string dotted_name(const Expr* receiver) {
  if (!receiver) return "";
  if (receiver->kind == ExprKind::Name) return receiver->name;
  if (receiver->kind == ExprKind::Attribute) {
    std::string base = dotted_name(receiver->children[0].get());
    if (base.empty()) return "";
    return base + "." + receiver->name;
  }
  return "";
}

std::vector<std::string> imported_modules(const Module& module) {
  std::set<std::string> out;
  walk_statements(module.body, [&](const Stmt& s) {
    if (s.kind == StmtKind::Import) {
      for (const auto& a : s.aliases) out.insert(a.name);
    } else if (s.kind == StmtKind::ImportFrom && s.level == 0 && !s.module.empty()) {
      out.insert(s.module);
      for (const auto& a : s.aliases)
        if (a.name != "*") out.insert(s.module + "." + a.name);
    }
  });
  return {out.begin(), out.end()};
}

std::vector<std::string> defined_names(const Module& module) {
  std::vector<std::string> out;
  walk_statements(module.body, [&](const Stmt& s) {
    if (s.kind == StmtKind::FunctionDef || s.kind == StmtKind::ClassDef) out.push_back(s.name);
  });
  return out;
}

CandidateQuery make_query(const SourceContext& ctx, const TypeInference* inference) {
  CandidateQuery q;
  q.defined = defined_names(*ctx.module);
  q.imports = imported_modules(*ctx.module);
  q.inferred_type = infer_type(ctx, ctx.hole.receiver_node, inference);
  q.class_receiver = is_class_expression(ctx, ctx.hole.receiver_node);
  return q;
}

CandidateSet generate(const SourceContext& ctx, const frontend::RecommendationPoint& point, const Indexes& indexes,
                      const GenerateOptions& options) {
  return generate(make_query(ctx, options.inference), point, indexes, options.project);
}

CandidateSet generate(const CandidateQuery& query, const frontend::RecommendationPoint& point,
                      const Indexes& indexes, const std::string& project) {
  CandidateSet set;
  set.point = point;
  std::unordered_set<std::string> seen;
  auto add = [&](const std::string& name, Source source, const std::string& owner) {
    if (name.empty() || (!query.class_receiver && is_dunder(name))) return;
    if (!seen.insert(name).second) return;
    set.candidates.push_back(ApiCandidate{name, source, owner});
  };

  set.inferred_type = query.inferred_type;
  if (set.inferred_type && set.inferred_type->rfind(kModulePrefix, 0) == 0) {
    std::string module = set.inferred_type->substr(std::string_view(kModulePrefix).size());
    for (const NameTable* table : {&indexes.stdlib, &indexes.modules}) {
      auto it = table->find(module);
      if (it == table->end()) continue;
      for (const auto& m : it->second) add(m, Source::InferredType, it->first);
    }
    if (!set.candidates.empty()) return set;
  } else if (set.inferred_type) {
    auto it = indexes.types.find(*set.inferred_type);
    if (it != indexes.types.end()) {
      for (const auto& m : it->second) add(m, Source::InferredType, it->first);
      if (!set.candidates.empty()) return set;
    }
  }

  for (const auto& d : query.defined) add(d, Source::ScopeMethod, "");
  if (!project.empty()) {
    auto it = indexes.projects.find(project);
    if (it != indexes.projects.end())
      for (const auto& n : it->second) add(n, Source::ScopeMethod, project);
  }

  auto top_of = [](const std::string& m) { return m.substr(0, m.find('.')); };
  std::set<std::string> third_party;
  std::vector<std::string> std_modules;
  for (const auto& m : query.imports) {
    std::string top = top_of(m);
    auto it = indexes.stdlib.lower_bound(top);
    bool is_std = it != indexes.stdlib.end() && (it->first == top || it->first.rfind(top + ".", 0) == 0);
    if (is_std)
      std_modules.push_back(m);
    else
      third_party.insert(top);
  }
  for (const auto& top : third_party) {
    for (auto it = indexes.modules.lower_bound(top); it != indexes.modules.end(); ++it) {
      if (it->first != top && it->first.rfind(top + ".", 0) != 0) break;
      for (const auto& n : it->second) add(n, Source::ImportedLibrary, it->first);
    }
  }
  for (const auto& m : std_modules) {
    for (auto it = indexes.stdlib.lower_bound(m); it != indexes.stdlib.end(); ++it) {
      if (it->first != m && it->first.rfind(m + ".", 0) != 0) break;
      for (const auto& n : it->second) add(n, Source::StandardLibrary, it->first);
    }
  }
  if (!set.candidates.empty() || !query.imports.empty()) {
    auto it = indexes.stdlib.find("builtins");
    if (it != indexes.stdlib.end())
      for (const auto& n : it->second) add(n, Source::StandardLibrary, "builtins");
  }
  if (set.candidates.empty())
    throw EmptyCandidates("no candidate APIs at " + point.file_id + ":" + std::to_string(point.line) + ":" +
                          std::to_string(point.column) + " (no imports, definitions or indexed project)");
  return set;
}

}  // namespace flowrank::candidates
