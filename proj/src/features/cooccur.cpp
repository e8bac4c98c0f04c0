#include <algorithm>
#include <bit>
#include <map>
#include <set>

#include "flowrank/features/features.hpp"

namespace flowrank::features {

void CooccurTables::set_bit(Bits& bits, std::size_t i) {
  if (bits.size() <= i / 64) bits.resize(i / 64 + 1, 0);
  bits[i / 64] |= std::uint64_t{1} << (i % 64);
}

bool CooccurTables::test_bit(const Bits& bits, std::size_t i) {
  return i / 64 < bits.size() && (bits[i / 64] >> (i % 64)) & 1;
}

std::uint64_t CooccurTables::and_count(const Bits& a, const Bits& b, std::optional<std::size_t> exclude) const {
  std::uint64_t n = 0;
  std::size_t words = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < words; ++i) n += static_cast<std::uint64_t>(std::popcount(a[i] & b[i]));
  if (exclude && test_bit(a, *exclude) && test_bit(b, *exclude)) --n;
  return n;
}

void CooccurTables::add_object(const std::string& x, const std::string& api, std::size_t file) {
  ++object_[x][api][file];
  ++object_totals_[x][file];
}

std::size_t CooccurTables::add_file(const std::vector<std::string>& tokens, const std::vector<std::string>& apis) {
  std::size_t id = file_count_++;
  for (const auto& t : tokens) set_bit(token_files_[t], id);
  for (const auto& a : apis) set_bit(api_files_[a], id);
  return id;
}

std::uint64_t CooccurTables::object_count(const std::string& x, std::optional<std::size_t> exclude) const {
  auto it = object_totals_.find(x);
  if (it == object_totals_.end()) return 0;
  std::uint64_t n = 0;
  for (const auto& [file, c] : it->second)
    if (!exclude || file != *exclude) n += c;
  return n;
}

std::uint64_t CooccurTables::object_pair_count(const std::string& x, const std::string& api,
                                               std::optional<std::size_t> exclude) const {
  auto it = object_.find(x);
  if (it == object_.end()) return 0;
  auto jt = it->second.find(api);
  if (jt == it->second.end()) return 0;
  std::uint64_t n = 0;
  for (const auto& [file, c] : jt->second)
    if (!exclude || file != *exclude) n += c;
  return n;
}

std::uint64_t CooccurTables::context_count(const std::string& x, std::optional<std::size_t> exclude) const {
  auto it = token_files_.find(x);
  if (it == token_files_.end()) return 0;
  std::uint64_t n = 0;
  for (auto w : it->second) n += static_cast<std::uint64_t>(std::popcount(w));
  if (exclude && test_bit(it->second, *exclude)) --n;
  return n;
}

std::uint64_t CooccurTables::context_pair_count(const std::string& x, const std::string& api,
                                                std::optional<std::size_t> exclude) const {
  auto it = token_files_.find(x);
  auto jt = api_files_.find(api);
  if (it == token_files_.end() || jt == api_files_.end()) return 0;
  return and_count(it->second, jt->second, exclude);
}

double CooccurTables::object_confidence(const std::string& x, const std::string& api,
                                        std::optional<std::size_t> exclude) const {
  std::uint64_t n = object_count(x, exclude);
  if (n == 0) return 0.0;
  return static_cast<double>(object_pair_count(x, api, exclude)) / static_cast<double>(n);
}

double CooccurTables::context_confidence(const std::string& x, const std::string& api,
                                         std::optional<std::size_t> exclude) const {
  std::uint64_t n = context_count(x, exclude);
  if (n == 0) return 0.0;
  return static_cast<double>(context_pair_count(x, api, exclude)) / static_cast<double>(n);
}

namespace {

template <class Map>
std::vector<typename Map::key_type> sorted_keys(const Map& m) {
  std::vector<typename Map::key_type> keys;
  for (const auto& kv : m) keys.push_back(kv.first);
  std::sort(keys.begin(), keys.end());
  return keys;
}

}  // namespace

nlohmann::json CooccurTables::to_json() const {
  // object: [[x, api, file, count], ...]; postings: {token: [file, ...]}
  nlohmann::json object = nlohmann::json::array();
  for (const auto& x : sorted_keys(object_)) {
    const auto& apis = object_.at(x);
    for (const auto& api : sorted_keys(apis))
      for (const auto& [file, n] : std::map<std::size_t, std::uint64_t>(apis.at(api).begin(), apis.at(api).end()))
        object.push_back({x, api, file, n});
  }
  auto postings = [&](const std::unordered_map<std::string, Bits>& table) {
    nlohmann::json out = nlohmann::json::object();
    for (const auto& key : sorted_keys(table)) {
      nlohmann::json files = nlohmann::json::array();
      for (std::size_t i = 0; i < file_count_; ++i)
        if (test_bit(table.at(key), i)) files.push_back(i);
      out[key] = std::move(files);
    }
    return out;
  };
  return {{"files", file_count_}, {"object_api", std::move(object)}, {"token_files", postings(token_files_)},
          {"api_files", postings(api_files_)}};
}

CooccurTables CooccurTables::from_json(const nlohmann::json& j) {
  CooccurTables t;
  t.file_count_ = j.at("files").get<std::size_t>();
  for (const auto& row : j.at("object_api")) {
    auto x = row[0].get<std::string>();
    auto api = row[1].get<std::string>();
    auto file = row[2].get<std::size_t>();
    auto n = row[3].get<std::uint64_t>();
    t.object_[x][api][file] += n;
    t.object_totals_[x][file] += n;
  }
  for (auto& [key, files] : j.at("token_files").items())
    for (const auto& f : files) set_bit(t.token_files_[key], f.get<std::size_t>());
  for (auto& [key, files] : j.at("api_files").items())
    for (const auto& f : files) set_bit(t.api_files_[key], f.get<std::size_t>());
  return t;
}

}  // namespace flowrank::features
