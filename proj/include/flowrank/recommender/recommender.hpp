#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "flowrank/candidates/candidates.hpp"
#include "flowrank/features/features.hpp"
#include "flowrank/forest/forest.hpp"
#include "flowrank/frontend/frontend.hpp"

namespace flowrank::recommender {

inline constexpr int kBundleVersion = 1;

/// Everything a trained recommender needs.
struct ModelBundle {
  features::FeatureModel features;
  forest::ForestModel forest;
  candidates::Indexes indexes;          // stdlib/types come from the built-in tables
  std::array<bool, 4> dropped{};        // ablated feature columns (zeroed at train and test time)
  std::vector<std::string> provenance;  // file ids every count was built from
};

/// Candidate-independent analysis of one point.
struct PointAnalysis {
  features::PointData data;
  candidates::CandidateQuery query;
};

/// Parses the context and runs the data-flow analysis. Throws ParseError.
PointAnalysis analyze_point(const frontend::SourceContext& ctx, const frontend::RecommendationPoint& point,
                            const features::FeatureConfig& config, const candidates::TypeInference* inference = nullptr);

struct Scored {
  candidates::ApiCandidate candidate;
  double probability = 0;
  features::FeatureVector vector;
};

/// Zeroes the dropped columns.
forest::Vector forest_input(const features::FeatureVector& v, const std::array<bool, 4>& dropped);

/// Scores and sorts candidates by (-probability, name).
std::vector<Scored> rank(const features::PointData& data, const std::vector<candidates::ApiCandidate>& candidates,
                         const ModelBundle& bundle);

struct Timings {
  double parse_ms = 0;
  double dataflow_ms = 0;
  double candidates_ms = 0;
  double features_ms = 0;  // features and forest
  double total_ms = 0;
};

struct Recommendation {
  frontend::RecommendationPoint point;
  std::vector<Scored> ranked;
  std::optional<std::string> inferred_type;
  Timings timing;
};

struct RecommendOptions {
  std::optional<std::size_t> k = 10;  // nullopt = all
  std::string project;                // project id for the project index
  const candidates::TypeInference* inference = nullptr;
};

/// Full pipeline. ParseError and EmptyCandidates propagate with their stage.
Recommendation recommend(std::string_view text, const frontend::RecommendationPoint& point,
                         const ModelBundle& bundle, const RecommendOptions& options = {});

nlohmann::json to_json(const Recommendation& rec);

}  // namespace flowrank::recommender
