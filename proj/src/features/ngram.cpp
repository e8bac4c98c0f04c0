#include <algorithm>
#include <cmath>

#include "flowrank/errors.hpp"
#include "flowrank/features/features.hpp"

namespace flowrank::features {

namespace {

constexpr char kSep = '\x1f';

Sequence padded(const Sequence& sequence, int order) {
  Sequence out(static_cast<std::size_t>(order - 1), kBos);
  out.insert(out.end(), sequence.begin(), sequence.end());
  out.emplace_back(kEos);
  return out;
}

// Tokens [begin, end) joined by the separator.
std::string join(const Sequence& tokens, std::size_t begin, std::size_t end) {
  std::string key;
  for (std::size_t i = begin; i < end; ++i) {
    if (i > begin) key += kSep;
    key += tokens[i];
  }
  return key;
}

std::uint64_t lookup(const std::unordered_map<std::string, std::uint64_t>& table, const std::string& key) {
  auto it = table.find(key);
  return it == table.end() ? 0 : it->second;
}

}  // namespace

void NGramCounts::add(const Sequence& sequence, int order) {
  Sequence p = padded(sequence, order);
  for (std::size_t i = static_cast<std::size_t>(order - 1); i < p.size(); ++i) {
    ++tokens;
    ++contexts[""];
    for (int k = 1; k <= order; ++k) {
      std::size_t begin = i + 1 - static_cast<std::size_t>(k);
      ++grams[join(p, begin, i + 1)];
      if (k > 1) ++contexts[join(p, begin, i)];
    }
  }
}

NGramModel NGramModel::train(const std::vector<Sequence>& sequences, int order) {
  if (order < 1) throw ConfigError("n-gram order must be at least 1");
  NGramModel model;
  model.order_ = order;
  for (const auto& s : sequences)
    if (!s.empty()) model.counts_.add(s, order);
  if (model.counts_.tokens == 0) throw EmptyCorpus("no data-flow sequences to train the n-gram model");
  model.index_vocabulary();
  return model;
}

void NGramModel::index_vocabulary() {
  std::vector<std::string> vocab{kEos, kUnk};
  for (const auto& [key, n] : counts_.grams)
    if (key.find(kSep) == std::string::npos) vocab.push_back(key);
  std::sort(vocab.begin(), vocab.end());
  vocab.erase(std::unique(vocab.begin(), vocab.end()), vocab.end());
  vocabulary_ = std::move(vocab);
  vocab_index_.clear();
  for (std::size_t i = 0; i < vocabulary_.size(); ++i) vocab_index_[vocabulary_[i]] = static_cast<int>(i);
}

bool NGramModel::in_vocabulary(const std::string& token) const { return vocab_index_.count(token) > 0; }

double NGramModel::prob_keyed(std::string& key, std::size_t context_tokens, const std::string& word,
                              const NGramCounts* exclude) const {
  // `key` holds the context tokens joined; shortened in place while backing off.
  const double v = static_cast<double>(vocabulary_.size());
  for (;;) {
    std::uint64_t c = lookup(counts_.contexts, key);
    if (exclude) c -= lookup(exclude->contexts, key);
    if (c > 0 || context_tokens == 0) {
      std::string gram = context_tokens == 0 ? word : key + kSep + word;
      std::uint64_t n = lookup(counts_.grams, gram);
      if (exclude) n -= lookup(exclude->grams, gram);
      return (static_cast<double>(n) + 1.0) / (static_cast<double>(c) + v);
    }
    --context_tokens;
    auto cut = key.find(kSep);
    key = cut == std::string::npos ? std::string() : key.substr(cut + 1);
  }
}

double NGramModel::prob(const Sequence& context, const std::string& word, const NGramCounts* exclude) const {
  std::size_t n = static_cast<std::size_t>(order_ - 1);
  Sequence ctx(n, kBos);
  for (std::size_t i = 0; i < n && i < context.size(); ++i) ctx[n - 1 - i] = context[context.size() - 1 - i];
  std::string key = join(ctx, 0, n);
  return prob_keyed(key, n, word, exclude);
}

double NGramModel::score(const Sequence& sequence, const NGramCounts* exclude) const {
  Sequence p = padded(sequence, order_);
  std::size_t n = static_cast<std::size_t>(order_ - 1);
  double total = 0;
  std::size_t count = 0;
  for (std::size_t i = n; i < p.size(); ++i) {
    std::string key = join(p, i - n, i);
    total += std::log(prob_keyed(key, n, p[i], exclude));
    ++count;
  }
  return total / static_cast<double>(count);
}

double NGramModel::floor() const {
  return -std::log(static_cast<double>(counts_.tokens) + static_cast<double>(vocabulary_.size()));
}

std::uint64_t NGramModel::count(const Sequence& gram) const {
  return lookup(counts_.grams, join(gram, 0, gram.size()));
}

std::uint64_t NGramModel::context_count(const Sequence& context) const {
  return lookup(counts_.contexts, join(context, 0, context.size()));
}

nlohmann::json NGramModel::to_json() const {
  std::vector<std::pair<std::string, std::uint64_t>> grams(counts_.grams.begin(), counts_.grams.end());
  std::sort(grams.begin(), grams.end());
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& [key, n] : grams) {
    nlohmann::json row = nlohmann::json::array();
    std::size_t start = 0;
    for (;;) {
      auto cut = key.find(kSep, start);
      row.push_back(key.substr(start, cut - start));
      if (cut == std::string::npos) break;
      start = cut + 1;
    }
    row.push_back(n);
    rows.push_back(std::move(row));
  }
  return {{"order", order_}, {"tokens", counts_.tokens}, {"grams", std::move(rows)}};
}

NGramModel NGramModel::from_json(const nlohmann::json& j) {
  NGramModel model;
  model.order_ = j.at("order").get<int>();
  model.counts_.tokens = j.at("tokens").get<std::uint64_t>();
  model.counts_.contexts[""] = model.counts_.tokens;
  for (const auto& row : j.at("grams")) {
    Sequence gram;
    for (std::size_t i = 0; i + 1 < row.size(); ++i) gram.push_back(row[i].get<std::string>());
    std::uint64_t n = row.back().get<std::uint64_t>();
    model.counts_.grams[join(gram, 0, gram.size())] = n;
    if (gram.size() > 1) model.counts_.contexts[join(gram, 0, gram.size() - 1)] += n;
  }
  model.index_vocabulary();
  return model;
}

}  // namespace flowrank::features
