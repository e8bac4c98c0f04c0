#include <algorithm>
#include <cmath>
#include <map>

#include "flowrank/candidates/candidates.hpp"
#include "flowrank/features/features.hpp"

namespace flowrank::features {

std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j)
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double sim_split(const std::vector<std::string>& x, const std::vector<std::string>& api, int d) {
  if (x.empty() || api.empty() || d < 1) return 0.0;
  double common = static_cast<double>(lcs_length(x, api));
  return 2.0 * common / (static_cast<double>(d) * static_cast<double>(x.size() + api.size()));
}

double sim(std::string_view x, std::string_view api, int d) {
  return sim_split(frontend::split_identifier(x), frontend::split_identifier(api), d);
}

// ------------------------------------------------------------- linearization

namespace {

void permutations_of(std::vector<std::string> group, std::vector<std::vector<std::string>>& out) {
  std::sort(group.begin(), group.end());
  if (group.size() <= 3) {
    do out.push_back(group);
    while (std::next_permutation(group.begin(), group.end()));
  } else {
    out.push_back(group);
    std::reverse(group.begin(), group.end());
    out.push_back(group);
  }
}

}  // namespace

std::vector<Sequence> Linearization::variants(const std::string& api, std::size_t max_variants) const {
  Sequence head = upstream;
  head.push_back(api);
  std::vector<Sequence> out{head};
  for (const auto& group : downstream) {
    std::vector<std::vector<std::string>> perms;
    permutations_of(group, perms);
    std::vector<Sequence> next;
    for (const auto& prefix : out) {
      for (const auto& perm : perms) {
        if (next.size() >= max_variants) break;
        Sequence s = prefix;
        s.insert(s.end(), perm.begin(), perm.end());
        next.push_back(std::move(s));
      }
    }
    out = std::move(next);
  }
  return out;
}

Sequence Linearization::canonical(const std::string& api) const {
  Sequence s = upstream;
  s.push_back(api);
  for (auto group : downstream) {
    std::sort(group.begin(), group.end());
    s.insert(s.end(), group.begin(), group.end());
  }
  return s;
}

Linearization linearize(const std::vector<dataflow::FlowPath>& paths) {
  std::map<std::string, std::size_t> up, down;  // token -> minimum distance
  for (const auto& p : paths) {
    if (p.merged || !p.hole_index) continue;
    std::size_t h = *p.hole_index;
    for (std::size_t i = 0; i < p.nodes.size(); ++i) {
      if (i == h) continue;
      auto& table = i < h ? up : down;
      std::size_t d = i < h ? h - i : i - h;
      auto [it, fresh] = table.emplace(p.nodes[i], d);
      if (!fresh) it->second = std::min(it->second, d);
    }
  }
  Linearization lin;
  std::vector<std::pair<std::size_t, std::string>> ups;
  for (const auto& [t, d] : up) ups.emplace_back(d, t);
  std::sort(ups.begin(), ups.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  for (auto& [d, t] : ups) lin.upstream.push_back(t);
  std::map<std::size_t, std::vector<std::string>> groups;
  for (const auto& [t, d] : down) groups[d].push_back(t);
  for (auto& [d, g] : groups) lin.downstream.push_back(std::move(g));
  return lin;
}

PointData point_data(const std::vector<dataflow::FlowPath>& paths, std::string receiver_key,
                     std::vector<frontend::BagEntry> bag) {
  PointData pd;
  pd.receiver_key = std::move(receiver_key);
  pd.bag = std::move(bag);
  pd.order = linearize(paths);
  for (const auto& p : paths) {
    if (p.merged || !p.hole_index) continue;
    pd.has_flow = true;
    std::size_t h = *p.hole_index;
    for (std::size_t i = 0; i < p.nodes.size(); ++i) {
      if (i == h) continue;
      int d = static_cast<int>(i < h ? h - i : i - h);
      pd.flow_tokens.push_back({p.nodes[i], frontend::split_identifier(p.nodes[i]), d});
    }
  }
  return pd;
}

std::string receiver_key(const frontend::SourceContext& ctx, const std::optional<std::string>& inferred_type) {
  if (inferred_type) return *inferred_type;
  std::string dotted = candidates::dotted_name(ctx.hole.receiver_node);
  if (!dotted.empty()) return dotted;
  if (ctx.hole.receiver) return ctx.hole.receiver->name;
  return ctx.hole.receiver_expr;
}

// ------------------------------------------------------------------ encoders

double encode_t1(const NGramModel& model, const Linearization& order, bool has_flow, const std::string& api,
                 const NGramCounts* exclude) {
  if (!has_flow) return model.floor();
  double best = -INFINITY;
  for (const auto& seq : order.variants(api)) best = std::max(best, model.score(seq, exclude));
  return best;
}

double encode_t1(const NGramModel& model, const std::vector<dataflow::FlowPath>& paths, const std::string& api) {
  auto pd = point_data(paths, "", {});
  return encode_t1(model, pd.order, pd.has_flow, api);
}

double encode_t2(const std::vector<PointData::FlowToken>& tokens, const std::string& api) {
  if (tokens.empty()) return 0.0;
  auto parts = frontend::split_identifier(api);
  double total = 0;
  for (const auto& t : tokens) total += sim_split(t.parts, parts, t.distance);
  double divisor = std::max<double>(1.0, static_cast<double>(tokens.size()) - 1.0);
  return total / divisor;
}

double encode_t2(const std::vector<dataflow::FlowPath>& paths, const std::string& api) {
  return encode_t2(point_data(paths, "", {}).flow_tokens, api);
}

double encode_t3(const CooccurTables& tables, const std::string& receiver, const std::string& api,
                 std::optional<std::size_t> exclude) {
  return tables.object_confidence(receiver, api, exclude);
}

double encode_t4(const CooccurTables& tables, const std::vector<frontend::BagEntry>& bag, const std::string& api,
                 std::optional<std::size_t> exclude) {
  if (bag.empty()) return 0.0;
  double total = 0;
  for (const auto& e : bag) total += tables.context_confidence(e.token.text, api, exclude) / std::max(1, e.dist);
  return total / static_cast<double>(bag.size());
}

FeatureVector build_vector(const PointData& point, const std::string& api, const FeatureModel& model,
                           const Holdout* holdout) {
  std::optional<std::size_t> file;
  if (holdout) file = holdout->file;
  FeatureVector v;
  v.t1 = encode_t1(model.ngram, point.order, point.has_flow, api, holdout ? holdout->ngram : nullptr);
  v.t2 = encode_t2(point.flow_tokens, api);
  v.t3 = encode_t3(model.cooccur, point.receiver_key, api, file);
  v.t4 = encode_t4(model.cooccur, point.bag, api, file);
  return v;
}

}  // namespace flowrank::features
