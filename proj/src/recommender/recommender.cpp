#include "flowrank/recommender/recommender.hpp"

#include <algorithm>
#include <chrono>

#include "flowrank/dataflow/dataflow.hpp"

namespace flowrank::recommender {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

features::PointData flow_data(const frontend::SourceContext& ctx, const frontend::RecommendationPoint& point,
                              const features::FeatureConfig& config, const std::optional<std::string>& type) {
  auto analysis = dataflow::analyze(ctx);
  auto paths = dataflow::try_paths_to(analysis, config.limits);
  return features::point_data(paths ? *paths : std::vector<dataflow::FlowPath>{},
                              features::receiver_key(ctx, type),
                              frontend::collect_token_bag(ctx, point, config.window));
}

}  // namespace

PointAnalysis analyze_point(const frontend::SourceContext& ctx, const frontend::RecommendationPoint& point,
                            const features::FeatureConfig& config, const candidates::TypeInference* inference) {
  PointAnalysis a;
  a.query = candidates::make_query(ctx, inference);
  a.data = flow_data(ctx, point, config, a.query.inferred_type);
  return a;
}

forest::Vector forest_input(const features::FeatureVector& v, const std::array<bool, 4>& dropped) {
  forest::Vector x = v.values();
  for (std::size_t i = 0; i < x.size(); ++i)
    if (dropped[i]) x[i] = 0.0;
  return x;
}

std::vector<Scored> rank(const features::PointData& data, const std::vector<candidates::ApiCandidate>& candidates,
                         const ModelBundle& bundle) {
  std::vector<Scored> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) {
    Scored s;
    s.candidate = c;
    s.vector = features::build_vector(data, c.name, bundle.features);
    s.probability = bundle.forest.predict_proba(forest_input(s.vector, bundle.dropped));
    out.push_back(std::move(s));
  }
  std::sort(out.begin(), out.end(), [](const Scored& a, const Scored& b) {
    if (a.probability != b.probability) return a.probability > b.probability;
    return a.candidate.name < b.candidate.name;
  });
  return out;
}

Recommendation recommend(std::string_view text, const frontend::RecommendationPoint& point,
                         const ModelBundle& bundle, const RecommendOptions& options) {
  Recommendation rec;
  rec.point = point;
  auto start = Clock::now();

  auto t = Clock::now();
  frontend::SourceContext ctx = frontend::parse_context(text, point);
  rec.timing.parse_ms = ms_since(t);
  if (rec.point.receiver_expr.empty()) rec.point.receiver_expr = ctx.hole.receiver_expr;

  t = Clock::now();
  candidates::CandidateQuery query = candidates::make_query(ctx, options.inference);
  auto set = candidates::generate(query, point, bundle.indexes, options.project);
  rec.inferred_type = set.inferred_type;
  rec.timing.candidates_ms = ms_since(t);

  t = Clock::now();
  features::PointData data = flow_data(ctx, point, bundle.features.config, query.inferred_type);
  rec.timing.dataflow_ms = ms_since(t);

  t = Clock::now();
  rec.ranked = rank(data, set.candidates, bundle);
  if (options.k && rec.ranked.size() > *options.k) rec.ranked.resize(*options.k);
  rec.timing.features_ms = ms_since(t);

  rec.timing.total_ms = ms_since(start);
  return rec;
}

nlohmann::json to_json(const Recommendation& rec) {
  nlohmann::json cands = nlohmann::json::array();
  for (const auto& s : rec.ranked) {
    cands.push_back({{"name", s.candidate.name},
                     {"source", candidates::to_string(s.candidate.source)},
                     {"owner", s.candidate.owner},
                     {"score", s.probability},
                     {"features", {s.vector.t1, s.vector.t2, s.vector.t3, s.vector.t4}}});
  }
  return {{"point",
           {{"file_id", rec.point.file_id},
            {"line", rec.point.line},
            {"column", rec.point.column},
            {"receiver_expr", rec.point.receiver_expr}}},
          {"inferred_type", rec.inferred_type ? nlohmann::json(*rec.inferred_type) : nlohmann::json()},
          {"candidates", std::move(cands)},
          {"timings",
           {{"parse_ms", rec.timing.parse_ms},
            {"dataflow_ms", rec.timing.dataflow_ms},
            {"candidates_ms", rec.timing.candidates_ms},
            {"features_ms", rec.timing.features_ms},
            {"total_ms", rec.timing.total_ms}}}};
}

}  // namespace flowrank::recommender
