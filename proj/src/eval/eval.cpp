#include "flowrank/eval/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <unordered_map>

#include <filesystem>
#include <fstream>

#include "flowrank/dataflow/dataflow.hpp"
#include "flowrank/errors.hpp"
#include "flowrank/frontend/parser.hpp"

namespace flowrank::eval {

double topk_accuracy(const std::vector<Rank>& ranks, std::size_t k) {
  if (k < 1) throw ConfigError("top-k needs k >= 1");
  if (ranks.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& r : ranks)
    if (r && *r <= k) ++hits;
  return static_cast<double>(hits) / static_cast<double>(ranks.size());
}

double mrr(const std::vector<Rank>& ranks) {
  if (ranks.empty()) return 0.0;
  double total = 0;
  for (const auto& r : ranks)
    if (r) total += 1.0 / static_cast<double>(*r);
  return total / static_cast<double>(ranks.size());
}

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  std::vector<std::size_t> order(scores.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Mann-Whitney U with average ranks for ties.
  double pos = 0, neg = 0, rank_sum = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    double avg = (static_cast<double>(i) + static_cast<double>(j) + 1.0) / 2.0;
    for (std::size_t t = i; t < j; ++t) {
      if (labels[order[t]]) {
        rank_sum += avg;
        ++pos;
      } else {
        ++neg;
      }
    }
    i = j;
  }
  if (pos == 0 || neg == 0) return 0.5;
  return (rank_sum - pos * (pos + 1) / 2.0) / (pos * neg);
}

Prf dataflow_score(const std::vector<EdgePair>& predicted, const std::vector<EdgePair>& golden) {
  std::set<EdgePair> p(predicted.begin(), predicted.end()), g(golden.begin(), golden.end());
  std::size_t common = 0;
  for (const auto& e : p) common += g.count(e);
  Prf r;
  if (!p.empty()) r.precision = static_cast<double>(common) / static_cast<double>(p.size());
  if (!g.empty()) r.recall = static_cast<double>(common) / static_cast<double>(g.size());
  if (r.precision + r.recall > 0) r.f1 = 2 * r.precision * r.recall / (r.precision + r.recall);
  return r;
}

EdgePair edge_key(const std::string& src, const std::string& dst, int line) {
  return {std::to_string(line) + ":" + src, dst};
}

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

GoldenReport score_golden(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw ConfigError("golden directory not found: " + dir);
  std::vector<fs::path> sources;
  for (const auto& entry : fs::directory_iterator(dir))
    if (entry.path().extension() == ".py") sources.push_back(entry.path());
  std::sort(sources.begin(), sources.end());

  GoldenReport report;
  auto start = std::chrono::steady_clock::now();
  std::vector<EdgePair> all_predicted, all_golden;
  for (const auto& src : sources) {
    GoldenFile gf;
    gf.name = src.stem().string();
    std::string text = read_file(src);
    gf.lines = static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));

    fs::path labels = src.parent_path() / (gf.name + ".edges.jsonl");
    std::istringstream in(read_file(labels));
    std::vector<EdgePair> golden;
    std::string row;
    while (std::getline(in, row)) {
      if (row.empty()) continue;
      try {
        auto j = nlohmann::json::parse(row);
        golden.push_back(edge_key(j.at("src"), j.at("dst"), j.at("line")));
      } catch (const nlohmann::json::exception& e) {
        throw ConfigError("bad golden row in " + labels.string() + ": " + e.what());
      }
    }

    std::vector<EdgePair> predicted;
    for (const auto& e : dataflow::file_edges(frontend::parse_module(text)))
      predicted.push_back(edge_key(e.src, e.dst, e.line));

    gf.score = dataflow_score(predicted, golden);
    std::set<EdgePair> p(predicted.begin(), predicted.end()), g(golden.begin(), golden.end());
    gf.predicted = p.size();
    gf.golden = g.size();
    for (const auto& e : p) gf.matched += g.count(e);
    for (const auto& e : p) all_predicted.push_back({gf.name + "/" + e.first, e.second});
    for (const auto& e : g) all_golden.push_back({gf.name + "/" + e.first, e.second});
    report.files.push_back(std::move(gf));
  }
  report.micro = dataflow_score(all_predicted, all_golden);
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

nlohmann::json GoldenReport::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& f : files)
    rows.push_back({{"file", f.name},
                    {"lines", f.lines},
                    {"predicted", f.predicted},
                    {"golden", f.golden},
                    {"matched", f.matched},
                    {"precision", f.score.precision},
                    {"recall", f.score.recall},
                    {"f1", f.score.f1}});
  return {{"files", rows},
          {"precision", micro.precision},
          {"recall", micro.recall},
          {"f1", micro.f1},
          {"seconds", seconds}};
}

double Metrics::top(std::size_t k) const {
  for (std::size_t i = 0; i < kTopK.size(); ++i)
    if (kTopK[i] == k) return topk[i];
  throw ConfigError("top-" + std::to_string(k) + " is not reported");
}

namespace {

double percentile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  double pos = q * static_cast<double>(v.size() - 1);
  auto lo = static_cast<std::size_t>(std::floor(pos));
  std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (v[hi] - v[lo]) * (pos - static_cast<double>(lo));
}

Rank rank_of(const std::vector<std::string>& ordered, const std::string& truth) {
  for (std::size_t i = 0; i < ordered.size(); ++i)
    if (ordered[i] == truth) return i + 1;
  return std::nullopt;
}

nlohmann::json metrics_json(const Metrics& m) {
  nlohmann::json topk = nlohmann::json::object();
  for (std::size_t i = 0; i < kTopK.size(); ++i) topk["top" + std::to_string(kTopK[i])] = m.topk[i];
  return {{"queries", m.queries},
          {"topk", topk},
          {"mrr", m.mrr},
          {"containment", m.containment},
          {"skips", m.skips},
          {"latency_ms", {{"median", m.latency_median_ms}, {"p95", m.latency_p95_ms}}}};
}

}  // namespace

Metrics summarize(const std::vector<QueryResult>& results, Rank QueryResult::*which) {
  Metrics m;
  m.queries = results.size();
  std::vector<Rank> ranks;
  std::vector<double> latency;
  std::size_t contained = 0;
  for (const auto& r : results) {
    ranks.push_back(r.*which);
    latency.push_back(r.latency_ms);
    if (r.contained) ++contained;
    if (r.skip) ++m.skips[*r.skip];
  }
  for (std::size_t i = 0; i < kTopK.size(); ++i) m.topk[i] = topk_accuracy(ranks, kTopK[i]);
  m.mrr = mrr(ranks);
  m.containment = results.empty() ? 0.0 : static_cast<double>(contained) / static_cast<double>(results.size());
  m.latency_median_ms = percentile(latency, 0.5);
  m.latency_p95_ms = percentile(latency, 0.95);
  return m;
}

RunReport evaluate_run(const corpus::Prepared& prepared, const EvalConfig& config, std::uint64_t seed) {
  using Clock = std::chrono::steady_clock;
  RunReport run;
  run.seed = seed;

  std::vector<corpus::SourceFile> ids;
  for (const auto& f : prepared.files) ids.push_back({f.file_id, f.project, f.module, ""});
  corpus::SplitPlan plan = config.plan;
  plan.seed = seed;
  auto folds = corpus::make_folds(ids, plan, config.assigned_folds);
  corpus::TrainingConfig training = config.training;
  training.seed = seed;

  std::unordered_map<std::string, std::vector<const corpus::AnalyzedPoint*>> by_file;
  for (const auto& p : prepared.points) by_file[p.mined.file_id].push_back(&p);

  for (const auto& fold : folds) {
    std::optional<recommender::ModelBundle> bundle;
    std::string train_error;
    try {
      bundle = corpus::train_bundle(prepared, fold.train, training);
    } catch (const Error& e) {
      train_error = std::string("training: ") + e.what();
    }
    std::unordered_map<std::string, std::size_t> freq;
    for (const auto& f : fold.train)
      for (const auto* p : by_file[f]) ++freq[p->mined.truth];

    for (const auto& f : fold.test) {
      for (const auto* p : by_file[f]) {
        QueryResult r;
        r.point_id = p->mined.id();
        r.project = p->mined.project;
        r.truth = p->mined.truth;
        r.latency_ms = p->analysis_ms;
        if (!bundle) {
          r.skip = train_error;
        } else if (!p->usable) {
          r.skip = "parse";
        } else {
          auto start = Clock::now();
          try {
            auto set = candidates::generate(p->analysis.query, p->mined.point, bundle->indexes, p->mined.project);
            auto ranked = recommender::rank(p->analysis.data, set.candidates, *bundle);
            r.latency_ms += std::chrono::duration<double, std::milli>(Clock::now() - start).count();
            std::vector<std::string> names;
            for (const auto& s : ranked) names.push_back(s.candidate.name);
            r.rank = rank_of(names, r.truth);
            r.contained = r.rank.has_value();
            if (!r.contained) r.skip = "truth_missing";

            std::sort(names.begin(), names.end());
            r.alphabetical = rank_of(names, r.truth);
            std::stable_sort(names.begin(), names.end(), [&](const std::string& a, const std::string& b) {
              auto fa = freq.count(a) ? freq.at(a) : 0, fb = freq.count(b) ? freq.at(b) : 0;
              return fa > fb;
            });
            r.frequency = rank_of(names, r.truth);
          } catch (const EmptyCandidates&) {
            r.latency_ms += std::chrono::duration<double, std::milli>(Clock::now() - start).count();
            r.skip = "empty_candidates";
          }
        }
        run.results.push_back(std::move(r));
      }
    }
  }

  std::map<std::string, std::vector<QueryResult>> groups;
  for (const auto& r : run.results) {
    groups[r.project].push_back(r);
    groups["all"].push_back(r);
  }
  for (const auto& [name, rs] : groups) {
    run.projects[name] = summarize(rs, &QueryResult::rank);
    run.alphabetical[name] = summarize(rs, &QueryResult::alphabetical);
    run.frequency[name] = summarize(rs, &QueryResult::frequency);
  }
  return run;
}

EvalReport evaluate(const corpus::Prepared& prepared, const EvalConfig& config) {
  auto start = std::chrono::steady_clock::now();
  EvalReport report;
  report.mode = config.plan.mode == corpus::SplitMode::CrossProject ? "cross_project" : "intra_project_kfold";
  report.folds = config.plan.folds;
  report.dropped = config.training.dropped;
  for (auto seed : config.seeds) report.runs.push_back(evaluate_run(prepared, config, seed));
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

nlohmann::json EvalReport::to_json(bool include_queries) const {
  nlohmann::json runs_json = nlohmann::json::array();
  for (const auto& run : runs) {
    nlohmann::json rj = {{"seed", run.seed}};
    for (const auto& [kind, table] : {std::pair{"ranker", &run.projects}, std::pair{"alphabetical", &run.alphabetical},
                                      std::pair{"frequency", &run.frequency}}) {
      nlohmann::json t = nlohmann::json::object();
      for (const auto& [name, m] : *table) t[name] = metrics_json(m);
      rj[kind] = t;
    }
    if (include_queries) {
      nlohmann::json qs = nlohmann::json::array();
      for (const auto& q : run.results) {
        auto rank = [](const Rank& r) { return r ? nlohmann::json(*r) : nlohmann::json(); };
        qs.push_back({{"point", q.point_id},
                      {"truth", q.truth},
                      {"rank", rank(q.rank)},
                      {"alphabetical", rank(q.alphabetical)},
                      {"frequency", rank(q.frequency)},
                      {"skip", q.skip ? nlohmann::json(*q.skip) : nlohmann::json()},
                      {"latency_ms", q.latency_ms}});
      }
      rj["queries"] = qs;
    }
    runs_json.push_back(std::move(rj));
  }
  nlohmann::json summary = nlohmann::json::object();
  if (!runs.empty()) {
    for (const auto& [name, first] : runs.front().projects) {
      nlohmann::json s = nlohmann::json::object();
      for (std::size_t i = 0; i <= kTopK.size(); ++i) {
        std::string key = i < kTopK.size() ? "top" + std::to_string(kTopK[i]) : "mrr";
        std::vector<double> v;
        for (const auto& run : runs) {
          const Metrics& m = run.projects.at(name);
          v.push_back(i < kTopK.size() ? m.topk[i] : m.mrr);
        }
        double mean = 0;
        for (double x : v) mean += x;
        mean /= static_cast<double>(v.size());
        s[key] = {{"mean", mean},
                  {"min", *std::min_element(v.begin(), v.end())},
                  {"max", *std::max_element(v.begin(), v.end())}};
      }
      summary[name] = s;
    }
  }
  return {{"mode", mode},
          {"folds", folds},
          {"dropped", dropped},
          {"misses_count_as_zero", true},
          {"seconds", seconds},
          {"summary", summary},
          {"runs", runs_json}};
}

namespace {

std::string row(const std::string& label, const Metrics& m) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-22s %6zu %6.3f %6.3f %6.3f %6.3f %6.3f %6.3f %6.3f %6.3f %8.1f %8.1f\n",
                label.c_str(), m.queries, m.topk[0], m.topk[1], m.topk[2], m.topk[3], m.topk[4], m.topk[5], m.mrr,
                m.containment, m.latency_median_ms, m.latency_p95_ms);
  return buf;
}

}  // namespace

std::string EvalReport::table() const {
  std::ostringstream out;
  out << "mode " << mode << ", folds " << folds << ", " << runs.size() << " seed(s), " << seconds << " s\n";
  for (const auto& run : runs) {
    out << "seed " << run.seed << "\n";
    out << "project                 query   top1   top2   top3   top4   top5  top10    mrr contain   p50 ms   p95 ms\n";
    for (const auto& [name, m] : run.projects) out << row(name, m);
    out << row("all/alphabetical", run.alphabetical.at("all"));
    out << row("all/frequency", run.frequency.at("all"));
    std::map<std::string, std::size_t> skips = run.projects.at("all").skips;
    out << "skips:";
    for (const auto& [reason, n] : skips) out << " " << reason << "=" << n;
    out << "\n";
  }
  return out.str();
}

AblationReport ablate(const corpus::Prepared& prepared, const EvalConfig& config) {
  AblationReport report;
  report.seeds = config.seeds;
  for (int drop = -1; drop < 4; ++drop) {
    AblationRow r;
    r.feature = drop < 0 ? "none" : features::kFeatureNames[static_cast<std::size_t>(drop)];
    EvalConfig c = config;
    c.training.dropped = {};
    if (drop >= 0) c.training.dropped[static_cast<std::size_t>(drop)] = true;
    for (auto seed : config.seeds) {
      auto run = evaluate_run(prepared, c, seed);
      const Metrics& m = run.projects.at("all");
      r.top1.push_back(m.top(1));
      r.top10.push_back(m.top(10));
      r.mrr.push_back(m.mrr);
    }
    report.rows.push_back(std::move(r));
  }
  return report;
}

namespace {

double mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

}  // namespace

nlohmann::json AblationReport::to_json() const {
  nlohmann::json rows_json = nlohmann::json::array();
  const AblationRow& full = rows.front();
  for (const auto& r : rows) {
    nlohmann::json delta = nlohmann::json::object();
    if (r.feature != "none") {
      std::vector<double> d1, d10, dm;
      for (std::size_t i = 0; i < r.top1.size(); ++i) {
        d1.push_back(r.top1[i] - full.top1[i]);
        d10.push_back(r.top10[i] - full.top10[i]);
        dm.push_back(r.mrr[i] - full.mrr[i]);
      }
      delta = {{"top1", d1}, {"top10", d10}, {"mrr", dm}, {"mean_top1", mean(d1)}, {"mean_top10", mean(d10)},
               {"mean_mrr", mean(dm)}};
    }
    rows_json.push_back({{"dropped", r.feature}, {"top1", r.top1}, {"top10", r.top10}, {"mrr", r.mrr},
                         {"delta", delta}});
  }
  return {{"seeds", seeds}, {"rows", rows_json}};
}

std::string AblationReport::table() const {
  std::ostringstream out;
  out << "dropped   top1    top10   mrr     d_top1   d_top10  d_mrr   (means over " << seeds.size() << " seeds)\n";
  const AblationRow& full = rows.front();
  for (const auto& r : rows) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-8s %6.3f  %6.3f  %6.3f  %+7.3f  %+7.3f  %+7.3f\n", r.feature.c_str(),
                  mean(r.top1), mean(r.top10), mean(r.mrr), mean(r.top1) - mean(full.top1),
                  mean(r.top10) - mean(full.top10), mean(r.mrr) - mean(full.mrr));
    out << buf;
  }
  return out.str();
}

}  // namespace flowrank::eval
