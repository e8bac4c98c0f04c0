// flowrank command-line tool: train, recommend, evaluate, ablate, mine, dataflow dump/score.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "flowrank/corpus/corpus.hpp"
#include "flowrank/dataflow/dataflow.hpp"
#include "flowrank/errors.hpp"
#include "flowrank/eval/eval.hpp"
#include "flowrank/frontend/parser.hpp"

namespace fs = std::filesystem;
using namespace flowrank;

namespace {

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << text;
}

// Corpus selection shared by train/evaluate/ablate/mine: a manifest, or
// project directories whose basename becomes the project name.
struct CorpusArgs {
  std::string manifest;
  std::vector<std::string> projects;

  void add(CLI::App* cmd) {
    cmd->add_option("-m,--manifest", manifest, "corpus manifest (JSON: projects[{name, root}], folds{})");
    cmd->add_option("projects", projects, "project directories (used when no manifest is given)");
  }

  corpus::Manifest load() const {
    if (!manifest.empty()) return corpus::Manifest::load(manifest);
    if (projects.empty()) throw ConfigError("give --manifest or at least one project directory");
    corpus::Manifest m;
    for (const auto& p : projects) {
      fs::path root = fs::path(p).lexically_normal();
      if (root.filename().empty()) root = root.parent_path();
      m.projects.push_back({root.filename().string(), root.string()});
    }
    return m;
  }
};

struct ModelArgs {
  int trees = 100;
  int depth = 12;
  int mtry = 2;
  int min_split = 2;
  int negatives = 20;
  int ngram_order = 3;
  int window = 30;
  int threads = 0;
  std::uint64_t seed = 1;
  std::vector<std::string> drop;

  void add(CLI::App* cmd) {
    cmd->add_option("--trees", trees, "number of trees")->check(CLI::PositiveNumber);
    cmd->add_option("--depth", depth, "maximum tree depth")->check(CLI::PositiveNumber);
    cmd->add_option("--mtry", mtry, "features tried per split")->check(CLI::Range(1, 4));
    cmd->add_option("--min-split", min_split, "minimum samples to split a node")->check(CLI::Range(2, 1 << 30));
    cmd->add_option("--negatives", negatives, "negatives kept per training point")->check(CLI::NonNegativeNumber);
    cmd->add_option("--ngram-order", ngram_order, "n-gram order")->check(CLI::PositiveNumber);
    cmd->add_option("--window", window, "context token window")->check(CLI::PositiveNumber);
    cmd->add_option("--threads", threads, "forest training threads (0 = all cores)")->check(CLI::NonNegativeNumber);
    cmd->add_option("--seed", seed, "random seed");
    cmd->add_option("--drop-feature", drop, "zero a feature column (t1..t4), repeatable")
        ->check(CLI::IsMember({"t1", "t2", "t3", "t4"}));
  }

  corpus::TrainingConfig config() const {
    corpus::TrainingConfig c;
    c.features.ngram_order = ngram_order;
    c.features.window = window;
    c.forest.n_trees = trees;
    c.forest.max_depth = depth;
    c.forest.mtry = mtry;
    c.forest.min_samples_split = min_split;
    c.forest.threads = threads;
    c.negatives = negatives;
    c.seed = seed;
    for (const auto& d : drop) c.dropped[static_cast<std::size_t>(d[1] - '1')] = true;
    return c;
  }
};

std::vector<corpus::SourceFile> load_files(const corpus::Manifest& m) {
  auto files = corpus::load_corpus(m);
  if (files.empty()) throw EmptyCorpus("no .py files under the given projects");
  return files;
}

int run_train(const CorpusArgs& cargs, const ModelArgs& margs, const std::string& out, bool json) {
  auto files = load_files(cargs.load());
  auto config = margs.config();
  auto prepared = corpus::prepare(files, config.features);
  std::vector<std::string> ids;
  for (const auto& f : files) ids.push_back(f.file_id);
  corpus::TrainingStats stats;
  auto bundle = corpus::train_bundle(prepared, ids, config, &stats);
  corpus::save_bundle(bundle, out);
  nlohmann::json j = {{"model", out},
                      {"files", files.size()},
                      {"points", stats.points},
                      {"unusable", stats.unusable},
                      {"empty_candidates", stats.empty_candidates},
                      {"truth_missing", stats.truth_missing},
                      {"samples", stats.samples},
                      {"positives", stats.positives}};
  if (json) {
    std::cout << j.dump(2) << "\n";
  } else {
    std::printf("trained %s on %zu files: %zu points, %zu samples (%zu positive)\n", out.c_str(), files.size(),
                stats.points, stats.samples, stats.positives);
  }
  return 0;
}

int run_recommend(const std::string& file, int line, int col, const std::string& model, std::size_t k,
                  const std::string& project, bool json) {
  auto bundle = corpus::load_bundle(model);
  std::string text = read_text(file);
  frontend::RecommendationPoint point;
  point.file_id = file;
  point.line = line;
  point.column = col;
  recommender::RecommendOptions options;
  options.k = k == 0 ? std::nullopt : std::optional<std::size_t>(k);
  options.project = project;
  auto rec = recommender::recommend(text, point, bundle, options);
  if (json) {
    std::cout << recommender::to_json(rec).dump(2) << "\n";
    return 0;
  }
  std::printf("%s:%d:%d  %s.\n", file.c_str(), line, col, rec.point.receiver_expr.c_str());
  if (rec.inferred_type) std::printf("inferred type: %s\n", rec.inferred_type->c_str());
  int i = 0;
  for (const auto& s : rec.ranked)
    std::printf("%3d  %-32s %.4f  %s\n", ++i, s.candidate.name.c_str(), s.probability,
                candidates::to_string(s.candidate.source));
  std::printf("%.2f ms\n", rec.timing.total_ms);
  return 0;
}

eval::EvalConfig eval_config(const corpus::Manifest& m, const ModelArgs& margs, const std::string& mode, int folds,
                             const std::vector<std::uint64_t>& seeds) {
  eval::EvalConfig config;
  config.training = margs.config();
  config.plan.mode = mode == "cross" ? corpus::SplitMode::CrossProject : corpus::SplitMode::IntraProjectKFold;
  config.plan.folds = folds;
  config.plan.seed = margs.seed;
  config.seeds = seeds;
  config.assigned_folds = m.folds;
  return config;
}

int run_evaluate(const CorpusArgs& cargs, const ModelArgs& margs, const std::string& mode, int folds,
                 std::vector<std::uint64_t> seeds, bool json, bool queries, const std::string& out) {
  auto manifest = cargs.load();
  auto files = load_files(manifest);
  if (seeds.empty()) seeds = {margs.seed};
  auto config = eval_config(manifest, margs, mode, folds, seeds);
  auto prepared = corpus::prepare(files, config.training.features);
  auto report = eval::evaluate(prepared, config);
  if (!out.empty()) write_text(out, report.to_json(queries).dump(2) + "\n");
  if (json)
    std::cout << report.to_json(queries).dump(2) << "\n";
  else
    std::cout << report.table();
  return 0;
}

int run_ablate(const CorpusArgs& cargs, const ModelArgs& margs, const std::string& mode, int folds,
               std::vector<std::uint64_t> seeds, bool json) {
  auto manifest = cargs.load();
  auto files = load_files(manifest);
  if (seeds.empty()) seeds = {1, 2, 3};
  auto config = eval_config(manifest, margs, mode, folds, seeds);
  auto prepared = corpus::prepare(files, config.training.features);
  auto report = eval::ablate(prepared, config);
  if (json)
    std::cout << report.to_json().dump(2) << "\n";
  else
    std::cout << report.table();
  return 0;
}

int run_mine(const CorpusArgs& cargs) {
  auto files = load_files(cargs.load());
  corpus::MineStats stats;
  for (const auto& p : corpus::mine_points(files, &stats)) std::cout << corpus::to_json(p).dump() << "\n";
  std::fprintf(stderr, "%zu points from %zu files (%zu unparseable)\n", stats.points, stats.files,
               stats.skipped_files);
  return 0;
}

int run_dump(const std::string& file, bool dot) {
  auto edges = dataflow::file_edges(frontend::parse_module(read_text(file)));
  if (dot) {
    std::cout << dataflow::edges_dot(edges);
    return 0;
  }
  for (const auto& e : edges) std::cout << dataflow::edge_json(e) << "\n";
  return 0;
}

int run_score(const std::string& dir, bool json) {
  auto report = eval::score_golden(dir);
  if (json) {
    std::cout << report.to_json().dump(2) << "\n";
    return 0;
  }
  std::printf("%-44s %6s %6s %6s %9s %7s\n", "file", "lines", "pred", "gold", "precision", "recall");
  for (const auto& f : report.files)
    std::printf("%-44s %6zu %6zu %6zu %9.4f %7.4f\n", f.name.c_str(), f.lines, f.predicted, f.golden,
                f.score.precision, f.score.recall);
  std::printf("all: precision %.4f recall %.4f f1 %.4f (%.2f s)\n", report.micro.precision, report.micro.recall,
              report.micro.f1, report.seconds);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"flowrank: API recommendation for Python from data flow and context"};
  app.set_config("--config", "", "INI/TOML file with option defaults");
  app.require_subcommand(1);

  CorpusArgs train_corpus, eval_corpus, ablate_corpus, mine_corpus;
  ModelArgs train_model, eval_model, ablate_model;

  auto* train = app.add_subcommand("train", "train a model bundle on a corpus");
  std::string train_out = "model.json";
  bool train_json = false;
  train_corpus.add(train);
  train_model.add(train);
  train->add_option("-o,--out", train_out, "bundle path");
  train->add_flag("--json", train_json, "print training stats as JSON");

  auto* recommend = app.add_subcommand("recommend", "rank candidate APIs at a '.' in a file");
  std::string rec_file, rec_model, rec_project;
  int rec_line = 0, rec_col = 0;
  std::size_t rec_k = 10;
  bool rec_json = false;
  recommend->add_option("file", rec_file, "Python source")->required()->check(CLI::ExistingFile);
  recommend->add_option("--line", rec_line, "1-based line of the dot")->required();
  recommend->add_option("--col", rec_col, "0-based column of the dot")->required();
  recommend->add_option("--model", rec_model, "bundle produced by train")->required()->check(CLI::ExistingFile);
  recommend->add_option("--k", rec_k, "number of results (0 = all)");
  recommend->add_option("--project", rec_project, "project id for the project index");
  recommend->add_flag("--json", rec_json, "JSON output");

  auto* evaluate = app.add_subcommand("evaluate", "k-fold or cross-project evaluation");
  std::string eval_mode = "intra", eval_out;
  int eval_folds = 10;
  std::vector<std::uint64_t> eval_seeds;
  bool eval_json = false, eval_queries = false;
  eval_corpus.add(evaluate);
  eval_model.add(evaluate);
  evaluate->add_option("--mode", eval_mode, "intra (k-fold per project) or cross (leave one project out)")
      ->check(CLI::IsMember({"intra", "cross"}));
  evaluate->add_option("--folds", eval_folds, "folds per project")->check(CLI::Range(2, 1000));
  evaluate->add_option("--seeds", eval_seeds, "one run per seed (default: --seed)");
  evaluate->add_flag("--json", eval_json, "JSON output");
  evaluate->add_flag("--queries", eval_queries, "include per-query results in JSON");
  evaluate->add_option("-o,--out", eval_out, "also write the JSON report here");

  auto* ablate = app.add_subcommand("ablate", "accuracy with each feature dropped in turn");
  std::string ablate_mode = "intra";
  int ablate_folds = 10;
  std::vector<std::uint64_t> ablate_seeds;
  bool ablate_json = false;
  ablate_corpus.add(ablate);
  ablate_model.add(ablate);
  ablate->add_option("--mode", ablate_mode, "intra or cross")->check(CLI::IsMember({"intra", "cross"}));
  ablate->add_option("--folds", ablate_folds, "folds per project")->check(CLI::Range(2, 1000));
  ablate->add_option("--seeds", ablate_seeds, "seeds (default 1 2 3)");
  ablate->add_flag("--json", ablate_json, "JSON output");

  auto* mine = app.add_subcommand("mine", "print mined recommendation points as JSON lines");
  mine_corpus.add(mine);

  auto* dataflow_cmd = app.add_subcommand("dataflow", "data-flow inspection");
  dataflow_cmd->require_subcommand(1);
  auto* dump = dataflow_cmd->add_subcommand("dump", "edges of a file as JSON lines (or DOT)");
  std::string dump_file;
  bool dump_dot = false;
  dump->add_option("file", dump_file, "Python source")->required()->check(CLI::ExistingFile);
  dump->add_flag("--dot", dump_dot, "Graphviz output");
  auto* score = dataflow_cmd->add_subcommand("score", "precision/recall against golden edge files");
  std::string score_dir;
  bool score_json = false;
  score->add_option("dir", score_dir, "directory of <stem>.py + <stem>.edges.jsonl")->required();
  score->add_flag("--json", score_json, "JSON output");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) return run_train(train_corpus, train_model, train_out, train_json);
    if (*recommend) return run_recommend(rec_file, rec_line, rec_col, rec_model, rec_k, rec_project, rec_json);
    if (*evaluate)
      return run_evaluate(eval_corpus, eval_model, eval_mode, eval_folds, eval_seeds, eval_json, eval_queries,
                          eval_out);
    if (*ablate) return run_ablate(ablate_corpus, ablate_model, ablate_mode, ablate_folds, ablate_seeds, ablate_json);
    if (*mine) return run_mine(mine_corpus);
    if (*dump) return run_dump(dump_file, dump_dot);
    if (*score) return run_score(score_dir, score_json);
  } catch (const Error& e) {
    std::fprintf(stderr, "flowrank: %s error: %s\n", e.stage().c_str(), e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "flowrank: %s\n", e.what());
    return 2;
  }
  return 0;
}
