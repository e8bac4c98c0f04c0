#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "flowrank/frontend/frontend.hpp"

namespace flowrank::dataflow {

using frontend::AstUnit;
using frontend::UnitKind;

struct FlowEdge {
  std::string src;  // identifier text
  std::string dst;
  std::string src_key;  // node identity (scoped variable or member occurrence)
  std::string dst_key;
  int label = 0;
  int line = 0;
  UnitKind rule = UnitKind::Assign;
};

/// Edges of one unit. Pairs whose endpoints share a name are dropped.
std::vector<FlowEdge> derive_edges(const AstUnit& unit);

/// Append-only edge storage shared by the states of one analysis.
struct EdgeStore {
  std::vector<FlowEdge> edges;
  std::unordered_map<std::string, std::vector<std::size_t>> by_dst;
};

/// Set of live edges at a program point.
class FlowState {
public:
  FlowState() : store_(std::make_shared<EdgeStore>()) {}
  explicit FlowState(std::shared_ptr<EdgeStore> store) : store_(std::move(store)) {}

  void add(const FlowEdge& edge);
  /// Drops every live edge into `node_key`.
  void kill(const std::string& node_key);
  /// Union with another state over the same store.
  void join(const FlowState& other);

  bool alive(std::size_t id) const;
  std::vector<const FlowEdge*> live_edges() const;
  std::vector<const FlowEdge*> incoming(const std::string& node_key) const;
  const std::shared_ptr<EdgeStore>& store() const { return store_; }

private:
  std::shared_ptr<EdgeStore> store_;
  std::vector<std::uint64_t> bits_;
};

/// Applies the units of one statement: kills first, then the new edges.
FlowState aggregate(const std::vector<AstUnit>& units, FlowState state);

/// Units grouped by statement label.
class UnitIndex {
public:
  explicit UnitIndex(const std::vector<AstUnit>& units);
  const std::vector<AstUnit>& at(int label) const;

private:
  std::unordered_map<int, std::vector<AstUnit>> by_label_;
  std::vector<AstUnit> empty_;
};

/// State after one statement (compound statements included: arms are joined).
FlowState propagate(const FlowState& before, const frontend::Stmt& stmt, const UnitIndex& units);

/// State after a whole module.
FlowState analyze_module(const frontend::Module& module, const std::vector<AstUnit>& units);

struct FlowAnalysis {
  FlowState before_hole;              // state before the statement holding the point
  std::vector<FlowEdge> hole_edges;   // edges derived by that statement
  std::optional<frontend::Operand> receiver;
  std::string hole_key;
};

FlowAnalysis analyze(const frontend::SourceContext& ctx);

struct FlowPath {
  std::vector<std::string> nodes;
  std::optional<std::size_t> hole_index;
  bool merged = false;  // multi-sink rendering `k|v`, not used for feature counting
};

struct PathLimits {
  std::size_t max_nodes = 8;       // non-hole nodes per path
  std::size_t max_downstream = 4;  // nodes after the hole
  std::size_t max_paths = 32;
};

/// Paths through the receiver into the hole and on to its sinks. Throws
/// EmptyFlow when neither the receiver nor the hole has any relation.
std::vector<FlowPath> paths_to(const FlowAnalysis& analysis, const PathLimits& limits = {});
std::optional<std::vector<FlowPath>> try_paths_to(const FlowAnalysis& analysis, const PathLimits& limits = {});

/// Maximal backward paths ending at `node_key` over the live edges (DFS(v)).
std::vector<FlowPath> incoming_paths(const FlowState& state, const std::string& node_key,
                                     std::size_t max_nodes = 8);

std::string render(const FlowPath& path, std::string_view hole_text = "HOLE");

/// All edges of a complete file, in statement order.
std::vector<FlowEdge> file_edges(const frontend::Module& module);

std::string edge_json(const FlowEdge& edge);
std::string edges_dot(const std::vector<FlowEdge>& edges);

}  // namespace flowrank::dataflow
