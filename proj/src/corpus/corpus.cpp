#include "flowrank/corpus/corpus.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "flowrank/errors.hpp"
#include "flowrank/frontend/parser.hpp"

namespace flowrank::corpus {

namespace fs = std::filesystem;
using frontend::Expr;
using frontend::ExprKind;
using frontend::Stmt;

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// ------------------------------------------------------------------ manifest

Manifest Manifest::from_json(const nlohmann::json& j, const std::string& base_dir) {
  Manifest m;
  try {
    for (const auto& p : j.at("projects")) {
      ProjectSpec spec;
      spec.name = p.at("name").get<std::string>();
      fs::path root = p.at("root").get<std::string>();
      spec.root = (root.is_absolute() ? root : fs::path(base_dir) / root).lexically_normal().string();
      m.projects.push_back(std::move(spec));
    }
    if (j.contains("folds"))
      for (auto& [file, fold] : j.at("folds").items()) m.folds[file] = fold.get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad manifest: ") + e.what());
  }
  return m;
}

Manifest Manifest::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read manifest " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("manifest " + path + " is not JSON: " + e.what());
  }
  return from_json(j, fs::path(path).parent_path().string());
}

nlohmann::json Manifest::to_json() const {
  nlohmann::json projects_json = nlohmann::json::array();
  for (const auto& p : projects) projects_json.push_back({{"name", p.name}, {"root", p.root}});
  nlohmann::json j = {{"projects", projects_json}};
  if (!folds.empty()) j["folds"] = folds;
  return j;
}

std::vector<SourceFile> load_project(const ProjectSpec& project) {
  if (!fs::is_directory(project.root)) throw ConfigError("project root not found: " + project.root);
  std::vector<fs::path> paths;
  for (const auto& entry : fs::recursive_directory_iterator(project.root))
    if (entry.is_regular_file() && entry.path().extension() == ".py") paths.push_back(entry.path());
  std::vector<SourceFile> files;
  for (const auto& p : paths) {
    fs::path rel = p.lexically_relative(project.root);
    SourceFile f;
    f.project = project.name;
    f.file_id = project.name + "/" + rel.generic_string();
    fs::path mod = rel;
    mod.replace_extension();
    if (mod.filename() == "__init__") mod = mod.parent_path();
    std::string dotted = mod.generic_string();
    std::replace(dotted.begin(), dotted.end(), '/', '.');
    f.module = dotted;
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    f.text = ss.str();
    files.push_back(std::move(f));
  }
  std::sort(files.begin(), files.end(), [](const auto& a, const auto& b) { return a.file_id < b.file_id; });
  return files;
}

std::vector<SourceFile> load_corpus(const Manifest& manifest) {
  std::vector<SourceFile> all;
  for (const auto& p : manifest.projects) {
    auto files = load_project(p);
    all.insert(all.end(), std::make_move_iterator(files.begin()), std::make_move_iterator(files.end()));
  }
  return all;
}

// -------------------------------------------------------------------- mining

std::string MinedPoint::id() const {
  return file_id + ":" + std::to_string(point.line) + ":" + std::to_string(point.column);
}

namespace {

template <class Fn>
void walk_expr(const Expr& e, Fn& fn) {
  fn(e);
  frontend::for_each_child(e, [&](const Expr& c) { walk_expr(c, fn); });
}

template <class Fn>
void walk_body(const std::vector<frontend::StmtPtr>& body, Fn& fn) {
  for (const auto& s : body) {
    frontend::for_each_expr(*s, [&](const Expr& e) { walk_expr(e, fn); });
    walk_body(s->body, fn);
    walk_body(s->orelse, fn);
    walk_body(s->finalbody, fn);
    for (const auto& h : s->handlers) walk_body(h.body, fn);
    for (const auto& c : s->cases) walk_body(c.body, fn);
  }
}

std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c) && c != '\\'; };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

}  // namespace

std::vector<MinedPoint> mine_file(const SourceFile& file) {
  frontend::Module module = frontend::parse_module(file.text);
  std::vector<MinedPoint> out;
  auto visit = [&](const Expr& e) {
    if (e.kind != ExprKind::Call || e.in_fstring) return;
    const Expr& callee = *e.children[0];
    if (callee.kind != ExprKind::Attribute || callee.in_fstring) return;
    std::size_t off = frontend::byte_offset(file.text, callee.op_pos.line, callee.op_pos.column);
    if (off == std::string::npos || file.text[off] != '.') return;
    MinedPoint p;
    p.file_id = file.file_id;
    p.project = file.project;
    p.point = {file.file_id, callee.op_pos.line, callee.op_pos.column,
               trim(frontend::source_slice(file.text, callee.children[0]->pos, callee.op_pos))};
    p.truth = callee.name;
    p.context_hash = fnv1a64(std::string_view(file.text).substr(0, off + 1));
    out.push_back(std::move(p));
  };
  walk_body(module.body, visit);
  std::stable_sort(out.begin(), out.end(), [](const MinedPoint& a, const MinedPoint& b) {
    return std::pair(a.point.line, a.point.column) < std::pair(b.point.line, b.point.column);
  });
  return out;
}

std::vector<MinedPoint> mine_points(const std::vector<SourceFile>& files, MineStats* stats) {
  std::vector<MinedPoint> out;
  MineStats local;
  for (const auto& f : files) {
    ++local.files;
    try {
      auto points = mine_file(f);
      local.points += points.size();
      out.insert(out.end(), std::make_move_iterator(points.begin()), std::make_move_iterator(points.end()));
    } catch (const ParseError&) {
      ++local.skipped_files;
      local.skipped.push_back(f.file_id);
    }
  }
  if (stats) *stats = local;
  return out;
}

std::vector<MinedPoint> mine_points(const std::string& project_root, MineStats* stats) {
  fs::path root(project_root);
  std::string name = root.filename().empty() ? root.parent_path().filename().string() : root.filename().string();
  return mine_points(load_project({name, project_root}), stats);
}

nlohmann::json to_json(const MinedPoint& p) {
  char hash[17];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(p.context_hash));
  return {{"file_id", p.file_id},         {"project", p.project},
          {"line", p.point.line},          {"column", p.point.column},
          {"receiver_expr", p.point.receiver_expr}, {"truth", p.truth},
          {"context_hash", hash}};
}

// -------------------------------------------------------------------- splits

std::vector<Fold> make_folds(const std::vector<SourceFile>& files, const SplitPlan& plan,
                             const std::map<std::string, int>& assigned) {
  std::map<std::string, std::vector<std::string>> by_project;
  for (const auto& f : files) by_project[f.project].push_back(f.file_id);
  for (auto& [p, ids] : by_project) std::sort(ids.begin(), ids.end());

  std::vector<Fold> folds;
  if (plan.mode == SplitMode::CrossProject) {
    if (by_project.size() < 2) throw ConfigError("cross-project split needs at least two projects");
    for (const auto& [project, ids] : by_project) {
      Fold fold;
      fold.name = project;
      fold.project = project;
      fold.test = ids;
      for (const auto& [other, other_ids] : by_project)
        if (other != project) fold.train.insert(fold.train.end(), other_ids.begin(), other_ids.end());
      std::sort(fold.train.begin(), fold.train.end());
      folds.push_back(std::move(fold));
    }
    return folds;
  }

  if (plan.folds < 2) throw ConfigError("k-fold split needs at least 2 folds");
  for (const auto& [project, ids] : by_project) {
    std::vector<std::string> order = ids;
    std::mt19937_64 rng(plan.seed ^ fnv1a64(project));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng() % i]);
    std::vector<int> fold_of(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
      auto it = assigned.find(order[i]);
      fold_of[i] = it != assigned.end() ? it->second % plan.folds : static_cast<int>(i % plan.folds);
    }
    for (int k = 0; k < plan.folds; ++k) {
      Fold fold;
      fold.name = project + "/fold" + std::to_string(k);
      fold.project = project;
      for (std::size_t i = 0; i < order.size(); ++i) (fold_of[i] == k ? fold.test : fold.train).push_back(order[i]);
      if (fold.test.empty() || fold.train.empty()) continue;
      std::sort(fold.train.begin(), fold.train.end());
      std::sort(fold.test.begin(), fold.test.end());
      folds.push_back(std::move(fold));
    }
  }
  return folds;
}

// ------------------------------------------------------------------ training

Prepared prepare(const std::vector<SourceFile>& files, const features::FeatureConfig& config) {
  Prepared out;
  out.mine.files = files.size();
  for (const auto& f : files) {
    FileInfo info;
    info.file_id = f.file_id;
    info.project = f.project;
    info.module = f.module;
    std::vector<MinedPoint> mined;
    try {
      frontend::Module module = frontend::parse_module(f.text);
      info.parsed = true;
      std::set<std::string> defined;
      for (auto& n : candidates::defined_names(module)) defined.insert(std::move(n));
      info.defined.assign(defined.begin(), defined.end());
      mined = mine_file(f);
    } catch (const ParseError&) {
      ++out.mine.skipped_files;
      out.mine.skipped.push_back(f.file_id);
      out.files.push_back(std::move(info));
      continue;
    }
    std::set<std::string> tokens, apis;
    for (const auto& t : frontend::code_tokens(f.text)) tokens.insert(t.text);
    for (const auto& p : mined) apis.insert(p.truth);
    info.tokens.assign(tokens.begin(), tokens.end());
    info.apis.assign(apis.begin(), apis.end());
    out.files.push_back(std::move(info));
    out.mine.points += mined.size();

    for (auto& p : mined) {
      AnalyzedPoint a;
      auto start = std::chrono::steady_clock::now();
      try {
        auto ctx = frontend::parse_context(f.text, p.point);
        a.analysis = recommender::analyze_point(ctx, p.point, config);
        a.usable = true;
      } catch (const Error& e) {
        a.error = std::string(e.stage()) + ": " + e.what();
      }
      a.analysis_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      a.mined = std::move(p);
      out.points.push_back(std::move(a));
    }
  }
  return out;
}

candidates::Indexes build_indexes(const std::vector<const FileInfo*>& files) {
  candidates::Indexes idx;
  std::map<std::string, std::set<std::string>> modules, projects;
  for (const FileInfo* f : files) {
    if (!f->parsed) continue;
    modules[f->module].insert(f->defined.begin(), f->defined.end());
    projects[f->project].insert(f->defined.begin(), f->defined.end());
  }
  for (auto& [k, v] : modules) idx.modules[k].assign(v.begin(), v.end());
  for (auto& [k, v] : projects) idx.projects[k].assign(v.begin(), v.end());
  return idx;
}

std::vector<forest::TrainingSample> point_samples(const AnalyzedPoint& point, const recommender::ModelBundle& bundle,
                                                  const features::Holdout* holdout, int negatives,
                                                  std::uint64_t seed) {
  auto set = candidates::generate(point.analysis.query, point.mined.point, bundle.indexes, point.mined.project);
  const std::string& truth = point.mined.truth;
  auto hit = std::find_if(set.candidates.begin(), set.candidates.end(),
                          [&](const candidates::ApiCandidate& c) { return c.name == truth; });
  if (hit == set.candidates.end())
    throw SkippedPoint("true API '" + truth + "' is not among the candidates of " + point.mined.id());

  std::vector<std::size_t> others;
  for (std::size_t i = 0; i < set.candidates.size(); ++i)
    if (set.candidates[i].name != truth) others.push_back(i);
  std::size_t keep = std::min(others.size(), static_cast<std::size_t>(std::max(0, negatives)));
  std::mt19937_64 rng(forest::tree_seed(seed, fnv1a64(point.mined.id())));
  for (std::size_t i = 0; i < keep; ++i) std::swap(others[i], others[i + rng() % (others.size() - i)]);
  others.resize(keep);

  std::vector<forest::TrainingSample> out;
  auto sample = [&](const std::string& name, int label) {
    forest::TrainingSample s;
    s.x = recommender::forest_input(features::build_vector(point.analysis.data, name, bundle.features, holdout),
                                    bundle.dropped);
    s.label = label;
    s.point_id = point.mined.id();
    out.push_back(std::move(s));
  };
  sample(truth, 1);
  for (std::size_t i : others) sample(set.candidates[i].name, 0);
  return out;
}

recommender::ModelBundle train_bundle(const Prepared& prepared, const std::vector<std::string>& train,
                                      const TrainingConfig& config, TrainingStats* stats) {
  std::set<std::string> train_set(train.begin(), train.end());
  std::vector<const FileInfo*> files;
  for (const auto& f : prepared.files)
    if (train_set.count(f.file_id)) files.push_back(&f);

  recommender::ModelBundle bundle;
  bundle.features.config = config.features;
  bundle.dropped = config.dropped;
  bundle.indexes = candidates::Indexes::builtin_defaults();
  auto local = build_indexes(files);
  bundle.indexes.modules = std::move(local.modules);
  bundle.indexes.projects = std::move(local.projects);
  for (const FileInfo* f : files) bundle.provenance.push_back(f->file_id);

  std::map<std::string, std::size_t> file_index;
  for (const FileInfo* f : files) file_index[f->file_id] = bundle.features.cooccur.add_file(f->tokens, f->apis);

  std::vector<const AnalyzedPoint*> points;
  for (const auto& p : prepared.points)
    if (train_set.count(p.mined.file_id)) points.push_back(&p);

  TrainingStats local_stats;
  std::vector<features::Sequence> sequences;
  std::map<std::string, features::NGramCounts> file_counts;
  for (const AnalyzedPoint* p : points) {
    ++local_stats.points;
    if (!p->usable) {
      ++local_stats.unusable;
      continue;
    }
    std::size_t file = file_index.at(p->mined.file_id);
    bundle.features.cooccur.add_object(p->analysis.data.receiver_key, p->mined.truth, file);
    if (p->analysis.data.has_flow) {
      sequences.push_back(p->analysis.data.order.canonical(p->mined.truth));
      file_counts[p->mined.file_id].add(sequences.back(), config.features.ngram_order);
    }
  }
  bundle.features.ngram = features::NGramModel::train(sequences, config.features.ngram_order);

  std::vector<forest::TrainingSample> samples;
  for (const AnalyzedPoint* p : points) {
    if (!p->usable) continue;
    features::Holdout holdout{file_index.at(p->mined.file_id), nullptr};
    auto fc = file_counts.find(p->mined.file_id);
    if (fc != file_counts.end()) holdout.ngram = &fc->second;
    try {
      auto s = point_samples(*p, bundle, &holdout, config.negatives, config.seed);
      ++local_stats.positives;
      samples.insert(samples.end(), std::make_move_iterator(s.begin()), std::make_move_iterator(s.end()));
    } catch (const EmptyCandidates&) {
      ++local_stats.empty_candidates;
    } catch (const SkippedPoint&) {
      ++local_stats.truth_missing;
    }
  }
  local_stats.samples = samples.size();
  forest::ForestConfig fc = config.forest;
  fc.seed = forest::tree_seed(config.seed, 0x5eed);
  bundle.forest = forest::train(samples, fc);
  if (stats) *stats = local_stats;
  return bundle;
}

// ------------------------------------------------------------------- bundles

namespace {

constexpr const char* kFormat = "flowrank-bundle";

std::string checksum(const nlohmann::json& payload) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "fnv1a64:%016llx", static_cast<unsigned long long>(fnv1a64(payload.dump())));
  return buf;
}

nlohmann::json name_table(const candidates::NameTable& t) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : t) j[k] = v;
  return j;
}

candidates::NameTable read_table(const nlohmann::json& j) {
  candidates::NameTable t;
  for (auto& [k, v] : j.items()) t[k] = v.get<std::vector<std::string>>();
  return t;
}

}  // namespace

nlohmann::json bundle_to_json(const recommender::ModelBundle& b) {
  const auto& c = b.features.config;
  nlohmann::json payload = {
      {"config",
       {{"ngram_order", c.ngram_order},
        {"window", c.window},
        {"path_limits",
         {{"max_nodes", c.limits.max_nodes},
          {"max_downstream", c.limits.max_downstream},
          {"max_paths", c.limits.max_paths}}}}},
      {"ngram", b.features.ngram.to_json()},
      {"cooccur", b.features.cooccur.to_json()},
      {"forest", b.forest.to_json()},
      {"indexes", {{"modules", name_table(b.indexes.modules)}, {"projects", name_table(b.indexes.projects)}}},
      {"dropped", b.dropped},
      {"provenance", b.provenance}};
  return {{"format", kFormat}, {"version", recommender::kBundleVersion}, {"checksum", checksum(payload)},
          {"payload", std::move(payload)}};
}

recommender::ModelBundle bundle_from_json(const nlohmann::json& j) {
  if (!j.is_object() || j.value("format", "") != kFormat) throw CorruptBundle("not a flowrank bundle");
  if (!j.contains("version")) throw CorruptBundle("bundle has no version");
  const auto& v = j.at("version");
  if (!v.is_number_integer() || v.get<int>() != recommender::kBundleVersion)
    throw VersionMismatch(std::to_string(recommender::kBundleVersion), v.dump());
  if (!j.contains("payload") || !j.contains("checksum")) throw CorruptBundle("bundle is missing its payload");
  const auto& payload = j.at("payload");
  if (j.at("checksum") != checksum(payload)) throw CorruptBundle("bundle checksum mismatch");
  try {
    recommender::ModelBundle b;
    const auto& c = payload.at("config");
    b.features.config.ngram_order = c.at("ngram_order").get<int>();
    b.features.config.window = c.at("window").get<int>();
    const auto& lim = c.at("path_limits");
    b.features.config.limits.max_nodes = lim.at("max_nodes").get<std::size_t>();
    b.features.config.limits.max_downstream = lim.at("max_downstream").get<std::size_t>();
    b.features.config.limits.max_paths = lim.at("max_paths").get<std::size_t>();
    b.features.ngram = features::NGramModel::from_json(payload.at("ngram"));
    b.features.cooccur = features::CooccurTables::from_json(payload.at("cooccur"));
    b.forest = forest::ForestModel::from_json(payload.at("forest"));
    b.indexes = candidates::Indexes::builtin_defaults();
    b.indexes.modules = read_table(payload.at("indexes").at("modules"));
    b.indexes.projects = read_table(payload.at("indexes").at("projects"));
    b.dropped = payload.at("dropped").get<std::array<bool, 4>>();
    b.provenance = payload.at("provenance").get<std::vector<std::string>>();
    return b;
  } catch (const nlohmann::json::exception& e) {
    throw CorruptBundle(std::string("malformed bundle payload: ") + e.what());
  }
}

void save_bundle(const recommender::ModelBundle& bundle, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write bundle " + path);
  out << bundle_to_json(bundle).dump() << "\n";
  if (!out) throw ConfigError("failed writing bundle " + path);
}

recommender::ModelBundle load_bundle(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read bundle " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw CorruptBundle("bundle " + path + " is not valid JSON: " + e.what());
  }
  return bundle_from_json(j);
}

}  // namespace flowrank::corpus
