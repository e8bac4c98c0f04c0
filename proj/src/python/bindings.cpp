// flowrank._core: thin bindings; structured results cross as JSON text.
#include <filesystem>
#include <optional>

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "flowrank/corpus/corpus.hpp"
#include "flowrank/dataflow/dataflow.hpp"
#include "flowrank/errors.hpp"
#include "flowrank/eval/eval.hpp"
#include "flowrank/features/features.hpp"
#include "flowrank/frontend/parser.hpp"

namespace py = pybind11;
namespace fs = std::filesystem;
using namespace flowrank;

namespace {

frontend::RecommendationPoint make_point(int line, int column) {
  frontend::RecommendationPoint p;
  p.file_id = "<string>";
  p.line = line;
  p.column = column;
  return p;
}

std::vector<eval::Rank> to_ranks(const std::vector<std::optional<std::size_t>>& ranks) {
  return {ranks.begin(), ranks.end()};
}

struct PyBundle {
  recommender::ModelBundle bundle;

  static PyBundle train(const std::optional<std::string>& manifest, const std::vector<std::string>& projects,
                        int trees, std::uint64_t seed, int negatives) {
    corpus::Manifest m;
    if (manifest) {
      m = corpus::Manifest::load(*manifest);
    } else {
      for (const auto& p : projects) {
        fs::path root = fs::path(p).lexically_normal();
        if (root.filename().empty()) root = root.parent_path();
        m.projects.push_back({root.filename().string(), root.string()});
      }
    }
    auto files = corpus::load_corpus(m);
    if (files.empty()) throw EmptyCorpus("no .py files under the given projects");
    corpus::TrainingConfig config;
    config.forest.n_trees = trees;
    config.seed = seed;
    config.negatives = negatives;
    py::gil_scoped_release release;
    auto prepared = corpus::prepare(files, config.features);
    std::vector<std::string> ids;
    for (const auto& f : files) ids.push_back(f.file_id);
    return {corpus::train_bundle(prepared, ids, config)};
  }

  std::string recommend(const std::string& source, int line, int column, std::size_t k,
                        const std::string& project) const {
    recommender::RecommendOptions options;
    options.k = k == 0 ? std::nullopt : std::optional<std::size_t>(k);
    options.project = project;
    return recommender::to_json(recommender::recommend(source, make_point(line, column), bundle, options)).dump();
  }
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "flowrank native core";
  m.attr("BUNDLE_VERSION") = recommender::kBundleVersion;

  PYBIND11_CONSTINIT static py::gil_safe_call_once_and_store<py::object> error_type;
  error_type.call_once_and_store_result([&]() -> py::object { return py::exception<Error>(m, "Error"); });
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      const py::object& type = error_type.get_stored();
      py::object inst = type(e.what());
      inst.attr("stage") = e.stage();
      PyErr_SetObject(type.ptr(), inst.ptr());
    }
  });

  m.def("split_identifier", [](const std::string& s) { return frontend::split_identifier(s); });
  m.def("sim", [](const std::string& x, const std::string& api, int d) { return features::sim(x, api, d); },
        py::arg("x"), py::arg("api"), py::arg("d") = 1);
  m.def("lcs_length", &features::lcs_length);
  m.def("topk_accuracy", [](const std::vector<std::optional<std::size_t>>& r, std::size_t k) {
    return eval::topk_accuracy(to_ranks(r), k);
  });
  m.def("mrr", [](const std::vector<std::optional<std::size_t>>& r) { return eval::mrr(to_ranks(r)); });

  m.def("file_edges_json", [](const std::string& source) {
    std::vector<std::string> out;
    for (const auto& e : dataflow::file_edges(frontend::parse_module(source))) out.push_back(dataflow::edge_json(e));
    return out;
  });
  m.def(
      "flow_paths",
      [](const std::string& source, int line, int column) {
        auto analysis = dataflow::analyze(frontend::parse_context(source, make_point(line, column)));
        std::vector<std::string> out;
        if (auto paths = dataflow::try_paths_to(analysis))
          for (const auto& p : *paths) out.push_back(dataflow::render(p));
        return out;
      },
      py::arg("source"), py::arg("line"), py::arg("column"));

  py::class_<PyBundle>(m, "Bundle")
      .def_static("load", [](const std::string& path) { return PyBundle{corpus::load_bundle(path)}; })
      .def_static("train", &PyBundle::train, py::arg("manifest") = std::nullopt,
                  py::arg("projects") = std::vector<std::string>{}, py::arg("trees") = 100, py::arg("seed") = 1,
                  py::arg("negatives") = 20)
      .def("save", [](const PyBundle& b, const std::string& path) { corpus::save_bundle(b.bundle, path); })
      .def("recommend_json", &PyBundle::recommend, py::arg("source"), py::arg("line"), py::arg("column"),
           py::arg("k") = 10, py::arg("project") = "")
      .def_property_readonly("provenance", [](const PyBundle& b) { return b.bundle.provenance; });
}
