#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "flowrank/forest/forest.hpp"
#include "flowrank/recommender/recommender.hpp"

namespace flowrank::corpus {

struct SourceFile {
  std::string file_id;  // "<project>/<path relative to the project root>"
  std::string project;
  std::string module;   // dotted module name; a package's __init__ maps to the package
  std::string text;
};

struct ProjectSpec {
  std::string name;
  std::string root;
};

/// Corpus manifest: project roots plus optional fixed fold assignments.
struct Manifest {
  std::vector<ProjectSpec> projects;
  std::map<std::string, int> folds;  // file_id -> fold index

  /// Relative roots are resolved against the manifest's directory. Throws ConfigError.
  static Manifest load(const std::string& path);
  static Manifest from_json(const nlohmann::json& j, const std::string& base_dir = ".");
  nlohmann::json to_json() const;
};

/// .py files under `root`, sorted by relative path.
std::vector<SourceFile> load_project(const ProjectSpec& project);
std::vector<SourceFile> load_corpus(const Manifest& manifest);

struct MinedPoint {
  std::string file_id;
  std::string project;
  frontend::RecommendationPoint point;  // at the '.'
  std::string truth;
  std::uint64_t context_hash = 0;  // FNV-1a of the prefix up to the dot

  std::string id() const;
};

struct MineStats {
  std::size_t files = 0;
  std::size_t skipped_files = 0;
  std::size_t points = 0;
  std::vector<std::string> skipped;  // file ids that failed to parse
};

/// Points of one file, top to bottom. Throws ParseError.
std::vector<MinedPoint> mine_file(const SourceFile& file);
/// Every attribute call in every file; unparseable files are skipped and counted.
std::vector<MinedPoint> mine_points(const std::vector<SourceFile>& files, MineStats* stats = nullptr);
std::vector<MinedPoint> mine_points(const std::string& project_root, MineStats* stats = nullptr);

nlohmann::json to_json(const MinedPoint& p);

std::uint64_t fnv1a64(std::string_view data);

// ------------------------------------------------------------------ splits

enum class SplitMode { IntraProjectKFold, CrossProject };

struct SplitPlan {
  SplitMode mode = SplitMode::IntraProjectKFold;
  int folds = 10;
  std::uint64_t seed = 1;
};

struct Fold {
  std::string name;     // "<project>/fold<i>" or "<project>" for cross-project
  std::string project;  // project under test
  std::vector<std::string> train;
  std::vector<std::string> test;
};

/// Intra-project: each project's files are sorted, shuffled by seed and dealt
/// round-robin into folds (or taken from `assigned`). Cross-project: each
/// project is tested on a model trained on all the others.
std::vector<Fold> make_folds(const std::vector<SourceFile>& files, const SplitPlan& plan,
                             const std::map<std::string, int>& assigned = {});

// ------------------------------------------------------------------ training

/// Per-file data reused by every fold.
struct FileInfo {
  std::string file_id;
  std::string project;
  std::string module;
  bool parsed = false;
  std::vector<std::string> defined;  // functions, classes and methods
  std::vector<std::string> tokens;   // unique identifier/keyword tokens
  std::vector<std::string> apis;     // unique mined truths
};

/// Per-point analysis reused by every fold.
struct AnalyzedPoint {
  MinedPoint mined;
  bool usable = false;
  std::string error;  // stage: message, when not usable
  recommender::PointAnalysis analysis;
  double analysis_ms = 0;
};

struct Prepared {
  std::vector<FileInfo> files;
  std::vector<AnalyzedPoint> points;
  MineStats mine;
};

/// Mines and analyzes every point once.
Prepared prepare(const std::vector<SourceFile>& files, const features::FeatureConfig& config = {});

struct TrainingConfig {
  features::FeatureConfig features;
  forest::ForestConfig forest;
  int negatives = 20;  // negatives kept per point
  std::uint64_t seed = 1;
  std::array<bool, 4> dropped{};
};

struct TrainingStats {
  std::size_t points = 0;
  std::size_t unusable = 0;
  std::size_t empty_candidates = 0;
  std::size_t truth_missing = 0;
  std::size_t samples = 0;
  std::size_t positives = 0;
};

/// Module and project name tables of the given files.
candidates::Indexes build_indexes(const std::vector<const FileInfo*>& files);

/// Samples for one point: the truth plus up to `negatives` uniformly drawn
/// other candidates. Throws SkippedPoint when the truth is not a candidate.
std::vector<forest::TrainingSample> point_samples(const AnalyzedPoint& point, const recommender::ModelBundle& bundle,
                                                  const features::Holdout* holdout, int negatives,
                                                  std::uint64_t seed);

/// Trains a bundle on the files in `train` only.
recommender::ModelBundle train_bundle(const Prepared& prepared, const std::vector<std::string>& train,
                                      const TrainingConfig& config, TrainingStats* stats = nullptr);

// ------------------------------------------------------------------ bundles

nlohmann::json bundle_to_json(const recommender::ModelBundle& bundle);
/// Throws VersionMismatch or CorruptBundle.
recommender::ModelBundle bundle_from_json(const nlohmann::json& j);
void save_bundle(const recommender::ModelBundle& bundle, const std::string& path);
recommender::ModelBundle load_bundle(const std::string& path);

}  // namespace flowrank::corpus
