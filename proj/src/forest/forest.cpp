#include "flowrank/forest/forest.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <thread>

#include "flowrank/errors.hpp"

namespace flowrank::forest {

std::uint64_t tree_seed(std::uint64_t seed, std::size_t index) {
  // splitmix64 step
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (static_cast<std::uint64_t>(index) + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double Tree::predict(const Vector& x) const {
  int i = 0;
  while (nodes[static_cast<std::size_t>(i)].feature >= 0) {
    const Node& n = nodes[static_cast<std::size_t>(i)];
    i = x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
  const Node& leaf = nodes[static_cast<std::size_t>(i)];
  std::uint64_t total = leaf.negatives + leaf.positives;
  return total == 0 ? 0.0 : static_cast<double>(leaf.positives) / static_cast<double>(total);
}

int Tree::depth() const {
  std::vector<int> d(nodes.size(), 0);
  int best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    best = std::max(best, d[i]);
    if (nodes[i].feature >= 0) {
      d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
    }
  }
  return best;
}

double ForestModel::predict_proba(const Vector& x) const {
  if (trees_.empty()) return 0.0;
  double total = 0;
  for (const auto& t : trees_) total += t.predict(x);
  return total / static_cast<double>(trees_.size());
}

namespace {

struct Binned {
  std::array<std::vector<double>, kFeatures> edges;          // bin b holds x <= edges[b]
  std::array<std::vector<std::uint16_t>, kFeatures> bins;  // per sample
};

Binned bin_samples(const std::vector<TrainingSample>& samples, int max_bins) {
  Binned out;
  for (std::size_t f = 0; f < kFeatures; ++f) {
    std::vector<double> values;
    values.reserve(samples.size());
    for (const auto& s : samples) values.push_back(s.x[f]);
    std::sort(values.begin(), values.end());
    std::vector<double> uniq = values;
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    std::vector<double>& edges = out.edges[f];
    if (uniq.size() <= static_cast<std::size_t>(max_bins)) {
      edges = uniq;
    } else {
      for (int j = 1; j <= max_bins; ++j) edges.push_back(values[j * values.size() / max_bins - 1]);
      edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
      if (edges.back() < values.back()) edges.push_back(values.back());
    }
    out.bins[f].reserve(samples.size());
    for (const auto& s : samples) {
      auto it = std::lower_bound(edges.begin(), edges.end(), s.x[f]);
      out.bins[f].push_back(static_cast<std::uint16_t>(it - edges.begin()));
    }
  }
  return out;
}

double gini(double neg, double pos) {
  double w = neg + pos;
  if (w <= 0) return 0.0;
  double p = pos / w, n = neg / w;
  return 1.0 - p * p - n * n;
}

class Builder {
public:
  Builder(const std::vector<TrainingSample>& samples, const Binned& binned, const ForestConfig& config,
          std::uint64_t seed)
      : samples_(samples), binned_(binned), config_(config), rng_(seed) {}

  Tree build() {
    std::size_t n = samples_.size();
    weight_.assign(n, 0);
    if (config_.bootstrap) {
      for (std::size_t i = 0; i < n; ++i) ++weight_[rng_() % n];
    } else {
      std::fill(weight_.begin(), weight_.end(), 1);
    }
    std::vector<std::uint32_t> idx;
    for (std::size_t i = 0; i < n; ++i)
      if (weight_[i] > 0) idx.push_back(static_cast<std::uint32_t>(i));
    grow(idx, 0, idx.size(), 0);
    return std::move(tree_);
  }

private:
  int grow(std::vector<std::uint32_t>& idx, std::size_t begin, std::size_t end, int depth) {
    int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    std::uint64_t neg = 0, pos = 0;
    for (std::size_t i = begin; i < end; ++i) (samples_[idx[i]].label ? pos : neg) += weight_[idx[i]];

    auto leaf = [&] {
      Node& node = tree_.nodes[static_cast<std::size_t>(id)];
      node.negatives = neg;
      node.positives = pos;
      return id;
    };
    if (neg == 0 || pos == 0 || depth >= config_.max_depth ||
        neg + pos < static_cast<std::uint64_t>(config_.min_samples_split))
      return leaf();

    std::array<std::size_t, kFeatures> order;
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = kFeatures - 1; i > 0; --i) std::swap(order[i], order[rng_() % (i + 1)]);

    const double total = static_cast<double>(neg + pos);
    const double parent = gini(static_cast<double>(neg), static_cast<double>(pos)) * total;
    double best_gain = 1e-12;
    int best_feature = -1;
    std::size_t best_bin = 0;
    for (std::size_t k = 0; k < kFeatures; ++k) {
      if (k >= static_cast<std::size_t>(config_.mtry) && best_feature >= 0) break;
      std::size_t f = order[k];
      std::size_t nb = binned_.edges[f].size();
      hist_.assign(nb * 2, 0);
      for (std::size_t i = begin; i < end; ++i) {
        std::uint32_t s = idx[i];
        hist_[binned_.bins[f][s] * 2 + static_cast<std::size_t>(samples_[s].label)] += weight_[s];
      }
      double ln = 0, lp = 0;
      for (std::size_t b = 0; b + 1 < nb; ++b) {
        ln += static_cast<double>(hist_[b * 2]);
        lp += static_cast<double>(hist_[b * 2 + 1]);
        double rn = static_cast<double>(neg) - ln, rp = static_cast<double>(pos) - lp;
        if (ln + lp == 0) continue;
        if (rn + rp == 0) break;
        double gain = parent - gini(ln, lp) * (ln + lp) - gini(rn, rp) * (rn + rp);
        if (gain > best_gain) {
          best_gain = gain;
          best_feature = static_cast<int>(f);
          best_bin = b;
        }
      }
    }
    if (best_feature < 0) return leaf();

    const auto& bins = binned_.bins[static_cast<std::size_t>(best_feature)];
    auto mid = std::partition(idx.begin() + static_cast<std::ptrdiff_t>(begin),
                              idx.begin() + static_cast<std::ptrdiff_t>(end),
                              [&](std::uint32_t s) { return bins[s] <= best_bin; });
    std::size_t split = static_cast<std::size_t>(mid - idx.begin());
    int left = grow(idx, begin, split, depth + 1);
    int right = grow(idx, split, end, depth + 1);
    Node& node = tree_.nodes[static_cast<std::size_t>(id)];
    node.feature = best_feature;
    node.threshold = binned_.edges[static_cast<std::size_t>(best_feature)][best_bin];
    node.left = left;
    node.right = right;
    return id;
  }

  const std::vector<TrainingSample>& samples_;
  const Binned& binned_;
  const ForestConfig& config_;
  std::mt19937_64 rng_;
  std::vector<std::uint64_t> weight_;
  std::vector<std::uint64_t> hist_;
  Tree tree_;
};

}  // namespace

ForestModel train(const std::vector<TrainingSample>& samples, const ForestConfig& config) {
  if (config.n_trees < 1 || config.max_depth < 0 || config.mtry < 1 || config.mtry > static_cast<int>(kFeatures) ||
      config.max_bins < 2 || config.max_bins > 65535)
    throw ConfigError("invalid forest configuration");
  bool has_pos = false, has_neg = false;
  for (const auto& s : samples) (s.label ? has_pos : has_neg) = true;
  if (!has_pos || !has_neg)
    throw DegenerateData("training samples need both labels (got " + std::to_string(samples.size()) +
                         " samples, positives " + (has_pos ? "present" : "absent") + ")");

  Binned binned = bin_samples(samples, config.max_bins);
  std::vector<Tree> trees(static_cast<std::size_t>(config.n_trees));
  auto work = [&](std::size_t first, std::size_t step) {
    for (std::size_t t = first; t < trees.size(); t += step)
      trees[t] = Builder(samples, binned, config, tree_seed(config.seed, t)).build();
  };
  std::size_t threads = config.threads > 0 ? static_cast<std::size_t>(config.threads)
                                           : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, trees.size());
  if (threads <= 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(work, i, threads);
    for (auto& th : pool) th.join();
  }
  return ForestModel(config, std::move(trees));
}

// ------------------------------------------------------------- serialization

namespace {

nlohmann::json node_json(const Tree& tree, int i) {
  const Node& n = tree.nodes[static_cast<std::size_t>(i)];
  if (n.feature < 0) return {{"leaf_counts", {n.negatives, n.positives}}};
  return {{"feature_index", n.feature},
          {"threshold", n.threshold},
          {"left", node_json(tree, n.left)},
          {"right", node_json(tree, n.right)}};
}

int read_node(const nlohmann::json& j, Tree& tree) {
  int id = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  if (j.contains("leaf_counts")) {
    tree.nodes.back().negatives = j.at("leaf_counts").at(0).get<std::uint64_t>();
    tree.nodes.back().positives = j.at("leaf_counts").at(1).get<std::uint64_t>();
    return id;
  }
  int feature = j.at("feature_index").get<int>();
  if (feature < 0 || feature >= static_cast<int>(kFeatures)) throw CorruptBundle("bad feature index in tree");
  double threshold = j.at("threshold").get<double>();
  int left = read_node(j.at("left"), tree);
  int right = read_node(j.at("right"), tree);
  Node& n = tree.nodes[static_cast<std::size_t>(id)];
  n.feature = feature;
  n.threshold = threshold;
  n.left = left;
  n.right = right;
  return id;
}

}  // namespace

nlohmann::json ForestModel::to_json() const {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : trees_) trees.push_back(node_json(t, 0));
  return {{"config",
           {{"n_trees", config_.n_trees},
            {"max_depth", config_.max_depth},
            {"mtry", config_.mtry},
            {"max_bins", config_.max_bins},
            {"min_samples_split", config_.min_samples_split},
            {"bootstrap", config_.bootstrap},
            {"seed", config_.seed}}},
          {"trees", std::move(trees)}};
}

ForestModel ForestModel::from_json(const nlohmann::json& j) {
  ForestConfig c;
  const auto& cj = j.at("config");
  c.n_trees = cj.at("n_trees").get<int>();
  c.max_depth = cj.at("max_depth").get<int>();
  c.mtry = cj.at("mtry").get<int>();
  c.max_bins = cj.at("max_bins").get<int>();
  c.min_samples_split = cj.at("min_samples_split").get<int>();
  c.bootstrap = cj.at("bootstrap").get<bool>();
  c.seed = cj.at("seed").get<std::uint64_t>();
  std::vector<Tree> trees;
  for (const auto& tj : j.at("trees")) {
    Tree t;
    read_node(tj, t);
    trees.push_back(std::move(t));
  }
  if (trees.empty()) throw CorruptBundle("forest has no trees");
  return ForestModel(c, std::move(trees));
}

}  // namespace flowrank::forest
