#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "flowrank/dataflow/dataflow.hpp"
#include "flowrank/frontend/frontend.hpp"

namespace flowrank::features {

inline constexpr const char* kBos = "<s>";
inline constexpr const char* kEos = "</s>";
inline constexpr const char* kUnk = "<unk>";

using Sequence = std::vector<std::string>;

/// k-gram counts (1 <= k <= order) over padded sequences. Keys are the
/// tokens joined with '\x1f'.
struct NGramCounts {
  std::unordered_map<std::string, std::uint64_t> grams;
  std::unordered_map<std::string, std::uint64_t> contexts;  // sum of counts of the grams extending a context
  std::uint64_t tokens = 0;                                   // predicted positions (unigram total)

  void add(const Sequence& sequence, int order);
};

/// Add-one smoothed n-gram model. A context never seen in training backs
/// off to the next shorter one, so every conditional distribution over the
/// vocabulary sums to one.
class NGramModel {
public:
  NGramModel() = default;

  /// Throws EmptyCorpus when `sequences` is empty or holds only empty sequences.
  static NGramModel train(const std::vector<Sequence>& sequences, int order = 3);

  int order() const { return order_; }
  /// Predictable tokens: training tokens, `</s>` and `<unk>`, sorted.
  const std::vector<std::string>& vocabulary() const { return vocabulary_; }
  bool in_vocabulary(const std::string& token) const;

  /// P(word | context); only the last order-1 context tokens are used, and a
  /// short context is padded with `<s>`. `exclude` holds counts to subtract
  /// (leave-one-out scoring of training points).
  double prob(const Sequence& context, const std::string& word, const NGramCounts* exclude = nullptr) const;

  /// Mean per-token log-probability of `sequence` followed by `</s>`.
  double score(const Sequence& sequence, const NGramCounts* exclude = nullptr) const;

  /// Log-probability of an unseen token in an unseen context; lower bound of every log-prob.
  double floor() const;

  std::uint64_t count(const Sequence& gram) const;
  std::uint64_t context_count(const Sequence& context) const;
  std::uint64_t token_count() const { return counts_.tokens; }

  nlohmann::json to_json() const;
  static NGramModel from_json(const nlohmann::json& j);

private:
  int order_ = 3;
  NGramCounts counts_;
  std::vector<std::string> vocabulary_;
  std::unordered_map<std::string, int> vocab_index_;

  double prob_keyed(std::string& key, std::size_t context_tokens, const std::string& word,
                    const NGramCounts* exclude) const;
  void index_vocabulary();
};

/// Object-API (occurrences) and context-API (files) co-occurrence tables.
class CooccurTables {
public:
  /// One receiver occurrence `x.api` in file `file`.
  void add_object(const std::string& x, const std::string& api, std::size_t file);
  /// Registers one file: its identifier/keyword tokens and the APIs it calls.
  std::size_t add_file(const std::vector<std::string>& tokens, const std::vector<std::string>& apis);

  std::size_t file_count() const { return file_count_; }

  /// N(x) and N(API, x) over receiver occurrences, optionally without one file.
  std::uint64_t object_count(const std::string& x, std::optional<std::size_t> exclude = {}) const;
  std::uint64_t object_pair_count(const std::string& x, const std::string& api,
                                  std::optional<std::size_t> exclude = {}) const;
  /// N(x) and N(API, x) in files, optionally without one file.
  std::uint64_t context_count(const std::string& x, std::optional<std::size_t> exclude = {}) const;
  std::uint64_t context_pair_count(const std::string& x, const std::string& api,
                                   std::optional<std::size_t> exclude = {}) const;

  double object_confidence(const std::string& x, const std::string& api,
                           std::optional<std::size_t> exclude = {}) const;
  double context_confidence(const std::string& x, const std::string& api,
                            std::optional<std::size_t> exclude = {}) const;

  nlohmann::json to_json() const;
  static CooccurTables from_json(const nlohmann::json& j);

private:
  using Bits = std::vector<std::uint64_t>;
  static void set_bit(Bits& bits, std::size_t i);
  static bool test_bit(const Bits& bits, std::size_t i);
  std::uint64_t and_count(const Bits& a, const Bits& b, std::optional<std::size_t> exclude) const;

  std::size_t file_count_ = 0;
  // x -> api -> file -> count
  std::unordered_map<std::string, std::unordered_map<std::string, std::unordered_map<std::size_t, std::uint64_t>>>
      object_;
  std::unordered_map<std::string, std::unordered_map<std::size_t, std::uint64_t>> object_totals_;
  std::unordered_map<std::string, Bits> token_files_;
  std::unordered_map<std::string, Bits> api_files_;
};

/// Eq-1 token similarity: 2|lcs| / (d (|x| + |api|)) over sub-tokens.
double sim(std::string_view x, std::string_view api, int d);
double sim_split(const std::vector<std::string>& x, const std::vector<std::string>& api, int d);
std::size_t lcs_length(const std::vector<std::string>& a, const std::vector<std::string>& b);

struct FeatureVector {
  double t1 = 0, t2 = 0, t3 = 0, t4 = 0;

  std::array<double, 4> values() const { return {t1, t2, t3, t4}; }
  bool operator==(const FeatureVector&) const = default;
};

inline constexpr std::array<const char*, 4> kFeatureNames = {"t1", "t2", "t3", "t4"};

/// Sequences fed to the n-gram for one candidate. The hole sits between the
/// upstream tokens (farthest first) and the downstream groups (nearest
/// first); tokens inside one downstream group are permuted.
struct Linearization {
  Sequence upstream;
  std::vector<std::vector<std::string>> downstream;  // grouped by distance

  /// Orderings with `api` in the hole; all permutations of groups up to 3
  /// tokens, sorted and reverse-sorted beyond; capped at `max_variants`.
  std::vector<Sequence> variants(const std::string& api, std::size_t max_variants = 36) const;
  /// First ordering (used for training).
  Sequence canonical(const std::string& api) const;
};

Linearization linearize(const std::vector<dataflow::FlowPath>& paths);

/// Candidate-independent data of one point, computed once and reused for
/// every candidate.
struct PointData {
  bool has_flow = false;
  Linearization order;
  struct FlowToken {
    std::string text;
    std::vector<std::string> parts;
    int distance = 1;
  };
  std::vector<FlowToken> flow_tokens;  // DFS multiset
  std::string receiver_key;           // inferred type, dotted receiver, or head
  std::vector<frontend::BagEntry> bag;
};

/// `paths` may be empty (no flow).
PointData point_data(const std::vector<dataflow::FlowPath>& paths, std::string receiver_key,
                     std::vector<frontend::BagEntry> bag);

/// Key used by the object-API table for the receiver of a point.
std::string receiver_key(const frontend::SourceContext& ctx, const std::optional<std::string>& inferred_type);

struct FeatureConfig {
  int ngram_order = 3;
  int window = 30;
  dataflow::PathLimits limits;
};

/// Trained encoders: n-gram and co-occurrence tables.
struct FeatureModel {
  FeatureConfig config;
  NGramModel ngram;
  CooccurTables cooccur;
};

/// Contributions of one training file, subtracted when encoding that file's
/// own training points.
struct Holdout {
  std::size_t file = 0;
  const NGramCounts* ngram = nullptr;
};

double encode_t1(const NGramModel& model, const Linearization& order, bool has_flow, const std::string& api,
                 const NGramCounts* exclude = nullptr);
double encode_t1(const NGramModel& model, const std::vector<dataflow::FlowPath>& paths, const std::string& api);
double encode_t2(const std::vector<PointData::FlowToken>& tokens, const std::string& api);
double encode_t2(const std::vector<dataflow::FlowPath>& paths, const std::string& api);
double encode_t3(const CooccurTables& tables, const std::string& receiver, const std::string& api,
                 std::optional<std::size_t> exclude = {});
double encode_t4(const CooccurTables& tables, const std::vector<frontend::BagEntry>& bag, const std::string& api,
                 std::optional<std::size_t> exclude = {});

FeatureVector build_vector(const PointData& point, const std::string& api, const FeatureModel& model,
                           const Holdout* holdout = nullptr);

}  // namespace flowrank::features
