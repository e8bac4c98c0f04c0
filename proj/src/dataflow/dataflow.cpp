#include "flowrank/dataflow/dataflow.hpp"

#include <algorithm>
#include <climits>
#include <functional>
#include <set>
#include <sstream>

#include <json.hpp>

#include "flowrank/errors.hpp"

namespace flowrank::dataflow {

using frontend::Module;
using frontend::Stmt;
using frontend::StmtKind;
using frontend::StmtPtr;

std::vector<FlowEdge> derive_edges(const AstUnit& unit) {
  std::vector<FlowEdge> out;
  if (!unit.target) return out;
  const auto& dst = *unit.target;
  std::string dst_key = dst.node_key();
  std::set<std::string> seen;
  for (const auto& src : unit.sources) {
    if (src.name == dst.name) continue;
    std::string src_key = src.node_key();
    if (!seen.insert(src_key).second) continue;
    out.push_back(FlowEdge{src.name, dst.name, std::move(src_key), dst_key, unit.label, unit.line, unit.kind});
  }
  return out;
}

// ------------------------------------------------------------------ FlowState

void FlowState::add(const FlowEdge& edge) {
  std::size_t id = store_->edges.size();
  store_->edges.push_back(edge);
  store_->by_dst[edge.dst_key].push_back(id);
  if (bits_.size() <= id / 64) bits_.resize(id / 64 + 1, 0);
  bits_[id / 64] |= std::uint64_t{1} << (id % 64);
}

void FlowState::kill(const std::string& node_key) {
  auto it = store_->by_dst.find(node_key);
  if (it == store_->by_dst.end()) return;
  for (std::size_t id : it->second)
    if (id / 64 < bits_.size()) bits_[id / 64] &= ~(std::uint64_t{1} << (id % 64));
}

void FlowState::join(const FlowState& other) {
  if (bits_.size() < other.bits_.size()) bits_.resize(other.bits_.size(), 0);
  for (std::size_t i = 0; i < other.bits_.size(); ++i) bits_[i] |= other.bits_[i];
}

bool FlowState::alive(std::size_t id) const {
  return id / 64 < bits_.size() && (bits_[id / 64] >> (id % 64)) & 1U;
}

std::vector<const FlowEdge*> FlowState::live_edges() const {
  std::vector<const FlowEdge*> out;
  for (std::size_t id = 0; id < store_->edges.size(); ++id)
    if (alive(id)) out.push_back(&store_->edges[id]);
  return out;
}

std::vector<const FlowEdge*> FlowState::incoming(const std::string& node_key) const {
  std::vector<const FlowEdge*> out;
  auto it = store_->by_dst.find(node_key);
  if (it == store_->by_dst.end()) return out;
  for (std::size_t id : it->second)
    if (alive(id)) out.push_back(&store_->edges[id]);
  return out;
}

FlowState aggregate(const std::vector<AstUnit>& units, FlowState state) {
  for (const auto& u : units)
    if (u.kills && u.target && !u.target->member) state.kill(u.target->node_key());
  for (const auto& u : units)
    for (const auto& e : derive_edges(u)) state.add(e);
  return state;
}

UnitIndex::UnitIndex(const std::vector<AstUnit>& units) {
  for (const auto& u : units) by_label_[u.label].push_back(u);
}

const std::vector<AstUnit>& UnitIndex::at(int label) const {
  auto it = by_label_.find(label);
  return it == by_label_.end() ? empty_ : it->second;
}

// ----------------------------------------------------------------- propagation
namespace {

int last_label(const Stmt& s) {
  int last = s.label;
  auto block = [&](const std::vector<StmtPtr>& b) {
    if (!b.empty()) last = std::max(last, last_label(*b.back()));
  };
  block(s.body);
  block(s.orelse);
  block(s.finalbody);
  for (const auto& h : s.handlers) block(h.body);
  for (const auto& c : s.cases) block(c.body);
  return last;
}

bool contains(const Stmt& s, int label) { return label >= s.label && label <= last_label(s); }
bool contains(const std::vector<StmtPtr>& block, int label) {
  return !block.empty() && label >= block.front()->label && label <= last_label(*block.back());
}

class Propagator {
public:
  Propagator(const UnitIndex& units, int hole_label) : units_(units), hole_(hole_label) {}

  bool reached() const { return reached_; }
  const FlowState& before_hole() const { return before_hole_; }
  const std::vector<FlowEdge>& hole_edges() const { return hole_edges_; }

  FlowState block(const std::vector<StmtPtr>& body, FlowState state) {
    for (const auto& s : body) {
      state = stmt(*s, std::move(state));
      if (reached_) break;
    }
    return state;
  }

  FlowState stmt(const Stmt& s, FlowState state) {
    if (s.label == hole_) {
      reached_ = true;
      before_hole_ = state;
      for (const auto& u : units_.at(s.label))
        for (auto& e : derive_edges(u)) hole_edges_.push_back(std::move(e));
      return state;
    }
    state = aggregate(units_.at(s.label), std::move(state));
    bool on_hole_path = hole_ >= 0 && contains(s, hole_);

    switch (s.kind) {
      case StmtKind::If: {
        if (on_hole_path) return contains(s.body, hole_) ? block(s.body, state) : block(s.orelse, state);
        FlowState a = block(s.body, state);
        FlowState b = block(s.orelse, state);
        a.join(b);
        return a;
      }
      case StmtKind::For:
      case StmtKind::While: {
        if (on_hole_path && contains(s.body, hole_)) return block(s.body, state);
        FlowState looped = block(s.body, state);
        looped.join(state);
        return block(s.orelse, looped);
      }
      case StmtKind::FunctionDef: {
        if (on_hole_path) return block(s.body, state);
        FlowState inner = block(s.body, state);
        inner.join(state);
        return inner;
      }
      case StmtKind::ClassDef:
      case StmtKind::With:
        return block(s.body, state);
      case StmtKind::Try: {
        if (on_hole_path && contains(s.body, hole_)) return block(s.body, state);
        FlowState after_body = block(s.body, state);
        if (on_hole_path) {
          for (const auto& h : s.handlers)
            if (contains(h.body, hole_)) return block(h.body, after_body);
          if (contains(s.orelse, hole_)) return block(s.orelse, after_body);
        }
        FlowState joined = block(s.orelse, after_body);
        for (const auto& h : s.handlers) joined.join(block(h.body, after_body));
        return block(s.finalbody, joined);
      }
      case StmtKind::Match: {
        if (on_hole_path) {
          for (const auto& c : s.cases)
            if (contains(c.body, hole_)) return block(c.body, state);
        }
        FlowState joined = state;
        for (const auto& c : s.cases) joined.join(block(c.body, state));
        return joined;
      }
      default:
        return state;
    }
  }

private:
  const UnitIndex& units_;
  int hole_;
  bool reached_ = false;
  FlowState before_hole_;
  std::vector<FlowEdge> hole_edges_;
};

}  // namespace

FlowState propagate(const FlowState& before, const Stmt& stmt, const UnitIndex& units) {
  Propagator p(units, -1);
  return p.stmt(stmt, before);
}

FlowState analyze_module(const Module& module, const std::vector<AstUnit>& units) {
  UnitIndex index(units);
  Propagator p(index, -1);
  return p.block(module.body, FlowState{});
}

FlowAnalysis analyze(const frontend::SourceContext& ctx) {
  UnitIndex index(ctx.units);
  Propagator p(index, ctx.hole.label);
  FlowState end = p.block(ctx.module->body, FlowState{});
  FlowAnalysis a;
  a.before_hole = p.reached() ? p.before_hole() : end;
  a.hole_edges = p.hole_edges();
  a.receiver = ctx.hole.receiver;
  a.hole_key = frontend::Operand{std::string(frontend::kHoleName), ctx.hole.name_pos, true, ""}.node_key();
  return a;
}

// ---------------------------------------------------------------------- paths
namespace {

using EdgeMap = std::unordered_map<std::string, std::vector<const FlowEdge*>>;

void sort_edges(std::vector<const FlowEdge*>& v, bool by_src) {
  std::sort(v.begin(), v.end(), [by_src](const FlowEdge* a, const FlowEdge* b) {
    if (a->label != b->label) return a->label > b->label;
    const auto& na = by_src ? a->src : a->dst;
    const auto& nb = by_src ? b->src : b->dst;
    if (na != nb) return na < nb;
    return (by_src ? a->src_key : a->dst_key) < (by_src ? b->src_key : b->dst_key);
  });
}

constexpr int kSearchBudget = 4000;

// Maximal backward chains into `start`; edges must not get newer going back.
std::vector<std::vector<std::string>> backward_chains(const EdgeMap& incoming, const std::string& start_key,
                                                      const std::string& start_name, std::size_t max_nodes) {
  std::vector<std::vector<std::string>> out;
  std::vector<std::string> names{start_name};
  std::set<std::string> on_path{start_key};
  int budget = kSearchBudget;
  std::set<std::vector<std::string>> seen;
  std::function<void(const std::string&, int)> go = [&](const std::string& key, int limit) {
    --budget;
    std::vector<const FlowEdge*> next;
    if (names.size() < max_nodes && budget > 0) {
      auto it = incoming.find(key);
      if (it != incoming.end())
        for (const FlowEdge* e : it->second)
          if (e->label <= limit && !on_path.count(e->src_key)) next.push_back(e);
    }
    if (next.empty()) {
      std::vector<std::string> chain(names.rbegin(), names.rend());
      if (seen.insert(chain).second) out.push_back(std::move(chain));
      return;
    }
    for (const FlowEdge* e : next) {
      names.push_back(e->src);
      on_path.insert(e->src_key);
      go(e->src_key, e->label);
      on_path.erase(e->src_key);
      names.pop_back();
    }
  };
  go(start_key, INT_MAX);
  return out;
}

std::vector<std::vector<std::string>> forward_chains(const EdgeMap& outgoing, const std::string& start_key,
                                                     std::size_t max_nodes) {
  std::vector<std::vector<std::string>> out;
  std::vector<std::string> names;
  std::set<std::string> on_path{start_key};
  std::set<std::vector<std::string>> seen;
  std::function<void(const std::string&)> go = [&](const std::string& key) {
    std::vector<const FlowEdge*> next;
    if (names.size() < max_nodes) {
      auto it = outgoing.find(key);
      if (it != outgoing.end())
        for (const FlowEdge* e : it->second)
          if (!on_path.count(e->dst_key)) next.push_back(e);
    }
    if (next.empty()) {
      if (!names.empty() && seen.insert(names).second) out.push_back(names);
      return;
    }
    for (const FlowEdge* e : next) {
      names.push_back(e->dst);
      on_path.insert(e->dst_key);
      go(e->dst_key);
      on_path.erase(e->dst_key);
      names.pop_back();
    }
  };
  go(start_key);
  return out;
}

}  // namespace

std::vector<FlowPath> incoming_paths(const FlowState& state, const std::string& node_key, std::size_t max_nodes) {
  EdgeMap incoming;
  std::string name;
  for (const FlowEdge* e : state.live_edges()) {
    incoming[e->dst_key].push_back(e);
    if (e->dst_key == node_key) name = e->dst;
    if (e->src_key == node_key) name = e->src;
  }
  for (auto& [k, v] : incoming) sort_edges(v, true);
  std::vector<FlowPath> out;
  if (name.empty()) return out;
  for (auto& chain : backward_chains(incoming, node_key, name, max_nodes)) out.push_back(FlowPath{chain, {}, false});
  return out;
}

std::optional<std::vector<FlowPath>> try_paths_to(const FlowAnalysis& a, const PathLimits& limits) {
  EdgeMap incoming;
  EdgeMap outgoing;
  bool receiver_related = false;
  std::string recv_key = a.receiver ? a.receiver->node_key() : std::string();
  auto consider = [&](const FlowEdge* e) {
    incoming[e->dst_key].push_back(e);
    if (a.receiver && e->dst_key != a.hole_key && (e->src_key == recv_key || e->dst_key == recv_key))
      receiver_related = true;
  };
  for (const FlowEdge* e : a.before_hole.live_edges()) consider(e);
  for (const auto& e : a.hole_edges) {
    if (e.rule != UnitKind::Assign && e.rule != UnitKind::For) consider(&e);
    outgoing[e.src_key].push_back(&e);
  }
  for (auto& [k, v] : incoming) sort_edges(v, true);
  for (auto& [k, v] : outgoing) sort_edges(v, false);

  auto downstream = forward_chains(outgoing, a.hole_key, limits.max_downstream);
  if (!receiver_related && downstream.empty()) return std::nullopt;

  std::vector<std::vector<std::string>> upstream;
  if (a.receiver) upstream = backward_chains(incoming, recv_key, a.receiver->name, limits.max_nodes);
  if (upstream.empty()) upstream.push_back({});
  std::vector<std::vector<std::string>> sinks = downstream;
  if (sinks.empty()) sinks.push_back({});

  std::vector<FlowPath> out;
  std::set<std::vector<std::string>> seen;
  const std::string hole(frontend::kHoleName);
  std::vector<std::vector<std::string>> trimmed_upstream;
  for (const auto& up : upstream) {
    for (const auto& down : sinks) {
      if (out.size() >= limits.max_paths) break;
      std::size_t room = limits.max_nodes > down.size() ? limits.max_nodes - down.size() : 1;
      std::vector<std::string> nodes(up.size() > room ? up.end() - static_cast<std::ptrdiff_t>(room) : up.begin(),
                                     up.end());
      std::size_t hole_index = nodes.size();
      if (std::find(trimmed_upstream.begin(), trimmed_upstream.end(), nodes) == trimmed_upstream.end())
        trimmed_upstream.push_back(nodes);
      nodes.push_back(hole);
      nodes.insert(nodes.end(), down.begin(), down.end());
      if (seen.insert(nodes).second) out.push_back(FlowPath{std::move(nodes), hole_index, false});
    }
  }
  if (downstream.size() > 1) {
    std::vector<std::string> firsts;
    for (const auto& d : downstream)
      if (std::find(firsts.begin(), firsts.end(), d.front()) == firsts.end()) firsts.push_back(d.front());
    std::string joined;
    for (const auto& f : firsts) joined += (joined.empty() ? "" : "|") + f;
    for (const auto& up : trimmed_upstream) {
      if (out.size() >= limits.max_paths) break;
      std::vector<std::string> nodes = up;
      std::size_t hole_index = nodes.size();
      nodes.push_back(hole);
      nodes.push_back(joined);
      out.push_back(FlowPath{std::move(nodes), hole_index, true});
    }
  }
  return out;
}

std::vector<FlowPath> paths_to(const FlowAnalysis& a, const PathLimits& limits) {
  auto paths = try_paths_to(a, limits);
  if (!paths) {
    throw EmptyFlow("receiver " + (a.receiver ? "'" + a.receiver->name + "'" : std::string("expression")) +
                    " has no data-flow relations");
  }
  return std::move(*paths);
}

std::string render(const FlowPath& path, std::string_view hole_text) {
  std::string out;
  for (std::size_t i = 0; i < path.nodes.size(); ++i) {
    if (i) out += "→";
    if (path.hole_index && *path.hole_index == i)
      out += hole_text;
    else
      out += path.nodes[i];
  }
  return out;
}

std::vector<FlowEdge> file_edges(const Module& module) {
  std::vector<FlowEdge> out;
  for (const auto& u : frontend::extract_units(module))
    for (auto& e : derive_edges(u)) out.push_back(std::move(e));
  return out;
}

std::string edge_json(const FlowEdge& edge) {
  nlohmann::json j = {{"src", edge.src}, {"dst", edge.dst}, {"line", edge.line}, {"rule", to_string(edge.rule)}};
  return j.dump();
}

std::string edges_dot(const std::vector<FlowEdge>& edges) {
  std::ostringstream os;
  os << "digraph flow {\n";
  auto quote = [](const std::string& s) { return nlohmann::json(s).dump(); };
  for (const auto& e : edges)
    os << "  " << quote(e.src) << " -> " << quote(e.dst) << " [label=" << quote(std::string(to_string(e.rule)) + "@" +
                                                                                 std::to_string(e.line))
       << "];\n";
  os << "}\n";
  return os.str();
}

}  // namespace flowrank::dataflow
