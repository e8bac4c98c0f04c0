#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "flowrank/frontend/frontend.hpp"

namespace flowrank::candidates {

enum class Source { InferredType, ScopeMethod, ImportedLibrary, StandardLibrary };

const char* to_string(Source source);

struct ApiCandidate {
  std::string name;
  Source source = Source::ScopeMethod;
  std::string owner;  // type, module or project the name came from
};

struct CandidateSet {
  frontend::RecommendationPoint point;
  std::vector<ApiCandidate> candidates;
  std::optional<std::string> inferred_type;
};

using NameTable = std::map<std::string, std::vector<std::string>>;

/// Name tables candidates are drawn from.
struct Indexes {
  NameTable stdlib;    // standard-library module -> callables ("builtins" included)
  NameTable types;     // builtin type -> methods
  NameTable modules;   // corpus module (dotted) -> defined functions, classes, methods
  NameTable projects;  // project id -> names defined in its ingested files

  /// Standard-library and type tables shipped with the library.
  static Indexes builtin_defaults();
};

/// Inferred "type" of a receiver naming an imported module: "module:<dotted name>".
inline constexpr const char* kModulePrefix = "module:";

/// Pluggable receiver type inference. The default understands literals,
/// displays, builtin constructor calls, builtin annotations, and variables
/// whose last binding in the enclosing scope is one of those. Names bound by
/// absolute imports (and attributes of them) infer to a module.
class TypeInference {
public:
  virtual ~TypeInference() = default;
  virtual std::optional<std::string> infer(const frontend::SourceContext& ctx, const frontend::Expr& receiver) const;
};

std::optional<std::string> infer_type(const frontend::SourceContext& ctx, const frontend::Expr* receiver,
                                      const TypeInference* inference = nullptr);

struct GenerateOptions {
  std::string project;  // project id of the file, for the project index
  const TypeInference* inference = nullptr;
};

/// What candidate generation needs from a context; independent of the indexes.
struct CandidateQuery {
  std::vector<std::string> defined;  // defined_names of the prefix
  std::vector<std::string> imports;  // imported_modules of the prefix
  std::optional<std::string> inferred_type;
  bool class_receiver = false;
};

CandidateQuery make_query(const frontend::SourceContext& ctx, const TypeInference* inference = nullptr);

/// Candidate APIs for the point. Throws EmptyCandidates.
CandidateSet generate(const frontend::SourceContext& ctx, const frontend::RecommendationPoint& point,
                      const Indexes& indexes, const GenerateOptions& options = {});
CandidateSet generate(const CandidateQuery& query, const frontend::RecommendationPoint& point,
                      const Indexes& indexes, const std::string& project = "");

/// True when the receiver denotes a class: a class defined in the prefix, `cls`, or `super()`.
bool is_class_expression(const frontend::SourceContext& ctx, const frontend::Expr* receiver);

/// Dotted name text of a receiver (`self.session`), or empty when not a pure name chain.
std::string dotted_name(const frontend::Expr* receiver);

/// Module names imported anywhere in the prefix (absolute imports only).
std::vector<std::string> imported_modules(const frontend::Module& module);

/// Names of functions and classes defined at any depth in a module, in source
/// order; classes also contribute their method names.
std::vector<std::string> defined_names(const frontend::Module& module);

}  // namespace flowrank::candidates
