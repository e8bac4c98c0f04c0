#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace flowrank::forest {

inline constexpr std::size_t kFeatures = 4;
using Vector = std::array<double, kFeatures>;

struct TrainingSample {
  Vector x{};
  int label = 0;  // 1 = true API, 0 = negative candidate
  std::string point_id;
};

struct ForestConfig {
  int n_trees = 100;
  int max_depth = 12;
  int mtry = 2;  // features tried per split
  int max_bins = 256;
  int min_samples_split = 2;
  bool bootstrap = true;
  std::uint64_t seed = 1;
  int threads = 0;  // 0 = hardware concurrency
};

/// Node of a flattened tree. Internal nodes send x[feature] <= threshold left.
struct Node {
  int feature = -1;  // -1 for leaves
  double threshold = 0;
  int left = -1;
  int right = -1;
  std::uint64_t negatives = 0;  // leaf class counts (bootstrap weighted)
  std::uint64_t positives = 0;
};

struct Tree {
  std::vector<Node> nodes;  // root at 0

  double predict(const Vector& x) const;
  int depth() const;
};

class ForestModel {
public:
  ForestModel() = default;
  ForestModel(ForestConfig config, std::vector<Tree> trees) : config_(config), trees_(std::move(trees)) {}

  /// Mean over trees of the positive fraction of the reached leaf.
  double predict_proba(const Vector& x) const;

  const ForestConfig& config() const { return config_; }
  const std::vector<Tree>& trees() const { return trees_; }

  nlohmann::json to_json() const;
  static ForestModel from_json(const nlohmann::json& j);

private:
  ForestConfig config_;
  std::vector<Tree> trees_;
};

/// Throws DegenerateData when a class is absent, ConfigError on bad settings.
ForestModel train(const std::vector<TrainingSample>& samples, const ForestConfig& config = {});

/// Seed of tree `index` derived from the forest seed.
std::uint64_t tree_seed(std::uint64_t seed, std::size_t index);

}  // namespace flowrank::forest
