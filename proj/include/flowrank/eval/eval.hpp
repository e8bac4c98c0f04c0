#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "flowrank/corpus/corpus.hpp"

namespace flowrank::eval {

/// 1-based rank of the true API, or nullopt for a miss.
using Rank = std::optional<std::size_t>;

/// Fraction of queries with rank <= k; 0 for empty input. Throws ConfigError when k < 1.
double topk_accuracy(const std::vector<Rank>& ranks, std::size_t k);
/// Mean reciprocal rank; misses contribute 0.
double mrr(const std::vector<Rank>& ranks);
/// Area under the ROC curve (ties count one half).
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

struct Prf {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

using EdgePair = std::pair<std::string, std::string>;
/// Set-based precision/recall/F1 over (src, dst) pairs.
Prf dataflow_score(const std::vector<EdgePair>& predicted, const std::vector<EdgePair>& golden);

/// Edge identity used for golden scoring: (src, dst) qualified by the statement line.
EdgePair edge_key(const std::string& src, const std::string& dst, int line);

struct GoldenFile {
  std::string name;  // fixture stem
  std::size_t lines = 0;
  std::size_t predicted = 0;
  std::size_t golden = 0;
  std::size_t matched = 0;
  Prf score;
};

struct GoldenReport {
  std::vector<GoldenFile> files;
  Prf micro;  // over the pooled edge sets
  double seconds = 0;

  nlohmann::json to_json() const;
};

/// Scores `file_edges` of every `<stem>.py` in `dir` against `<stem>.edges.jsonl`.
/// Throws ConfigError for a missing or malformed golden file.
GoldenReport score_golden(const std::string& dir);

inline constexpr std::array<std::size_t, 6> kTopK = {1, 2, 3, 4, 5, 10};

struct Metrics {
  std::size_t queries = 0;
  std::array<double, kTopK.size()> topk{};
  double mrr = 0;
  double containment = 0;
  std::map<std::string, std::size_t> skips;  // reason -> count
  double latency_median_ms = 0;
  double latency_p95_ms = 0;

  double top(std::size_t k) const;
};

/// One test query.
struct QueryResult {
  std::string point_id;
  std::string project;
  std::string truth;
  Rank rank;                // learned ranker
  Rank alphabetical;        // baseline: candidates by name
  Rank frequency;           // baseline: candidates by training frequency of the API
  std::optional<std::string> skip;  // reason the point got no candidates/context
  bool contained = false;
  double latency_ms = 0;
};

Metrics summarize(const std::vector<QueryResult>& results, Rank QueryResult::*which);

struct EvalConfig {
  corpus::SplitPlan plan;
  corpus::TrainingConfig training;
  std::vector<std::uint64_t> seeds = {1};
  std::map<std::string, int> assigned_folds;
};

struct RunReport {
  std::uint64_t seed = 0;
  std::map<std::string, Metrics> projects;  // per project, plus "all"
  std::map<std::string, Metrics> alphabetical;
  std::map<std::string, Metrics> frequency;
  std::vector<QueryResult> results;
};

struct EvalReport {
  std::vector<RunReport> runs;
  std::string mode;
  int folds = 0;
  std::array<bool, 4> dropped{};
  double seconds = 0;

  nlohmann::json to_json(bool include_queries = false) const;
  std::string table() const;
};

/// Trains per fold and ranks every test point, once per seed.
EvalReport evaluate(const corpus::Prepared& prepared, const EvalConfig& config);
RunReport evaluate_run(const corpus::Prepared& prepared, const EvalConfig& config, std::uint64_t seed);

struct AblationRow {
  std::string feature;  // "none" for the full model
  std::vector<double> top1, top10, mrr;  // one value per seed
};

struct AblationReport {
  std::vector<std::uint64_t> seeds;
  std::vector<AblationRow> rows;  // full model first

  nlohmann::json to_json() const;
  std::string table() const;
};

/// Full model plus each feature dropped in turn, for every seed.
AblationReport ablate(const corpus::Prepared& prepared, const EvalConfig& config);

}  // namespace flowrank::eval
