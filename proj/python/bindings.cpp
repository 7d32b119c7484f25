#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <nlohmann/json.hpp>

#include "policyforge/classify.hpp"
#include "policyforge/cluster.hpp"
#include "policyforge/coherence.hpp"
#include "policyforge/corpus.hpp"
#include "policyforge/moderate.hpp"
#include "policyforge/pipeline.hpp"
#include "policyforge/reduce.hpp"
#include "policyforge/sweep.hpp"
#include "policyforge/topics.hpp"

namespace py = pybind11;
namespace pf = policyforge;
using nlohmann::json;

namespace {

// JSON crosses the boundary as text; the Python package decodes it.
json parse(const std::string& s) {
  try {
    return json::parse(s);
  } catch (const json::parse_error& e) {
    throw pf::ConfigError(std::string("invalid JSON: ") + e.what());
  }
}

pf::Matrix to_matrix(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw pf::ConfigError("expected a 2-d array");
  pf::Matrix m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), m.data().begin());
  return m;
}

py::array_t<double> to_array(const pf::Matrix& m) {
  py::array_t<double> out({m.rows(), m.cols()});
  std::copy(m.data().begin(), m.data().end(), out.mutable_data());
  return out;
}

std::string error_class_name(pf::ErrorClass c) {
  switch (c) {
    case pf::ErrorClass::Validation: return "validation";
    case pf::ErrorClass::NotFound: return "not_found";
    case pf::ErrorClass::Conflict: return "conflict";
    case pf::ErrorClass::Precondition: return "precondition";
    case pf::ErrorClass::Provider: return "provider";
    case pf::ErrorClass::Io: return "io";
  }
  return "unknown";
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "policyforge native core";

  // Instances carry .kind (e.g. "TooManyClusters") and .error_class.
  m.attr("PolicyforgeError") = py::reinterpret_steal<py::object>(
      PyErr_NewException("policyforge._core.PolicyforgeError", PyExc_RuntimeError, nullptr));
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const pf::Error& e) {
      py::object type = py::module_::import("policyforge._core").attr("PolicyforgeError");
      py::object exc = type(e.what());
      exc.attr("kind") = e.kind();
      exc.attr("error_class") = error_class_name(e.error_class());
      PyErr_SetObject(type.ptr(), exc.ptr());
    }
  });

  m.def("version", [] { return std::string("0.1.0"); });

  m.def("tokenize", [](const std::string& text) { return pf::topics::tokenize(text); });

  m.def("schema_json", [] { return pf::classify::schema_json().dump(); });

  m.def("classify", [](const std::string& text, const std::string& provider) {
    pf::classify::ProviderConfig config;
    config.name = provider;
    py::gil_scoped_release release;
    auto p = pf::classify::make_provider(config);
    return pf::classify::to_json(pf::classify::classify_statement(text, *p)).dump();
  }, py::arg("text"), py::arg("provider") = "rule");

  m.def("evaluate", [](const std::string& provider, const std::string& dataset_path) {
    py::gil_scoped_release release;
    const auto dataset = pf::classify::load_labeled_dataset(dataset_path);
    pf::classify::ProviderConfig config;
    config.name = provider;
    auto p = pf::classify::make_provider(config, &dataset);
    return pf::classify::report_csv(pf::classify::evaluate(*p, dataset));
  }, py::arg("provider"), py::arg("dataset_path"));

  m.def("load_corpus", [](const std::string& path) {
    return pf::corpus::to_json(pf::corpus::load_corpus(path)).dump();
  });

  m.def("segment_text", [](const std::string& text) { return pf::corpus::segment_text(text); });

  m.def("discover", [](const std::string& corpus_path, const std::string& config_json) {
    const auto config = pf::pipeline::discover_config_from_json(parse(config_json));
    py::gil_scoped_release release;
    const auto model = pf::pipeline::discover(pf::corpus::load_corpus(corpus_path), config);
    return pf::topics::to_json(model).dump();
  }, py::arg("corpus_path"), py::arg("config_json") = "{}");

  m.def("sweep", [](const std::string& plan_json, const std::string& corpus_path, const std::string& out_dir) {
    const auto plan = pf::sweep::plan_from_json(parse(plan_json));
    py::gil_scoped_release release;
    pf::sweep::SweepOptions options;
    if (!out_dir.empty()) {
      std::filesystem::create_directories(out_dir);
      options.journal = std::filesystem::path(out_dir) / pf::sweep::kJournalName;
    }
    const auto result = pf::sweep::run_sweep(plan, pf::corpus::load_corpus(corpus_path), options);
    if (!out_dir.empty()) pf::sweep::emit_report(result, out_dir);
    json rows = json::array();
    for (const auto& r : result.rows) {
      rows.push_back({{"fingerprint", r.fingerprint},
                      {"coherence", r.ok() ? json(r.coherence) : json(nullptr)},
                      {"n_topics", r.n_topics},
                      {"error", r.error}});
    }
    return json{{"best", result.best}, {"complete", result.complete}, {"rows", rows}}.dump();
  }, py::arg("plan_json"), py::arg("corpus_path"), py::arg("out_dir") = "");

  m.def("effective_settings", [](const std::string& values_json, const std::string& overrides_json) {
    const auto s = pf::moderate::effective_settings(parse(values_json).get<pf::classify::Values>(),
                                                    parse(overrides_json).get<pf::classify::Values>());
    return pf::moderate::to_json(s).dump();
  });

  m.def("decide", [](const std::string& settings_json, const std::string& kind, const std::string& question,
                     std::optional<double> assignment_similarity, std::optional<double> assessment_similarity,
                     const std::string& policy_json) {
    const auto j = parse(settings_json);
    auto s = pf::moderate::effective_settings(j.at("values").get<pf::classify::Values>(),
                                              j.value("overrides", pf::classify::Values{}));
    s.confirmed = j.value("confirmed", true);
    const auto policy = pf::moderate::policy_from_json(parse(policy_json));
    pf::moderate::TutorRequest req{"", pf::moderate::kind_from_string(kind), question};
    const auto d = pf::moderate::decide(s, req, {assignment_similarity, assessment_similarity}, policy);
    return pf::moderate::to_json(d).dump();
  }, py::arg("settings_json"), py::arg("kind"), py::arg("question"), py::arg("assignment_similarity") = py::none(),
     py::arg("assessment_similarity") = py::none(), py::arg("policy_json") = "{}");

  m.def("kmeans", [](py::array_t<double, py::array::c_style | py::array::forcecast> points, int k, std::uint64_t seed) {
    const auto x = to_matrix(points);
    pf::cluster::KMeansResult r;
    {
      py::gil_scoped_release release;
      r = pf::cluster::kmeans(x, k, seed);
    }
    return py::make_tuple(r.assignment.labels, r.assignment.inertia_or_stability);
  }, py::arg("points"), py::arg("k"), py::arg("seed") = 42);

  m.def("hdbscan", [](py::array_t<double, py::array::c_style | py::array::forcecast> points, int min_cluster_size,
                      std::optional<int> min_samples) {
    const auto x = to_matrix(points);
    pf::cluster::ClusterAssignment a;
    {
      py::gil_scoped_release release;
      a = pf::cluster::hdbscan_fit(x, min_cluster_size, min_samples);
    }
    return py::make_tuple(a.labels, a.inertia_or_stability);
  }, py::arg("points"), py::arg("min_cluster_size"), py::arg("min_samples") = py::none());

  m.def("umap", [](py::array_t<double, py::array::c_style | py::array::forcecast> points, const std::string& config_json) {
    const auto x = to_matrix(points);
    const auto config = pf::pipeline::umap_from_json(parse(config_json));
    pf::reduce::Embedding2 e;
    {
      py::gil_scoped_release release;
      e = pf::reduce::umap_fit(x, config);
    }
    return py::make_tuple(to_array(e.points), e.final_loss);
  }, py::arg("points"), py::arg("config_json") = "{}");

  m.def("ctfidf", [](const std::vector<std::vector<long long>>& counts) {
    pf::topics::ClassTermMatrix ctm;
    ctm.counts = counts;
    ctm.n_terms = counts.empty() ? 0 : counts.front().size();
    for (const auto& row : counts) {
      if (row.size() != ctm.n_terms) throw pf::ConfigError("ragged count matrix");
      long long total = 0;
      for (auto c : row) total += c;
      ctm.class_sizes.push_back(total);
    }
    return pf::topics::ctfidf(ctm);
  });

  m.def("coherence_cv", [](const std::vector<std::string>& words, const std::vector<std::vector<std::string>>& docs,
                           int window_size, double epsilon) {
    pf::coherence::CoherenceConfig config;
    config.window_size = window_size;
    config.epsilon = epsilon;
    config.top_n = static_cast<int>(words.size());
    return pf::coherence::coherence_cv(words, docs, config);
  }, py::arg("words"), py::arg("docs"), py::arg("window_size") = 110, py::arg("epsilon") = 1e-12);
}
