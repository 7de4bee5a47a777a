#include <pybind11/eigen.h>
#include <pybind11/gil_safe_call_once.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "siftkit/corpus.hpp"
#include "siftkit/error.hpp"
#include "siftkit/evalharness.hpp"
#include "siftkit/json_io.hpp"
#include "siftkit/porter.hpp"
#include "siftkit/server.hpp"
#include "siftkit/session.hpp"
#include "siftkit/topics.hpp"

namespace py = pybind11;
using namespace siftkit;

namespace {

Json to_json(const py::object& obj) {
  const auto text = py::module_::import("json").attr("dumps")(obj).cast<std::string>();
  return Json::parse(text);
}

py::object from_json(const Json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

SessionConfig config_of(const py::object& config) {
  return config.is_none() ? SessionConfig{} : config_from_json(to_json(config));
}

// Mutable wrapper; every call replaces the immutable session state.
class PySession {
 public:
  PySession(const std::string& corpus, const py::object& config) {
    SessionConfig c = config_of(config);
    c.corpus = corpus;
    py::gil_scoped_release release;
    state_ = init_session(c);
  }

  void iterate(const py::object& batch, const std::optional<std::string>& mode) {
    const FeedbackBatch b = batch.is_none() ? FeedbackBatch{} : batch_from_json(to_json(batch));
    std::optional<SiftMode> m;
    if (mode) m = parse_sift_mode(*mode);
    py::gil_scoped_release release;
    state_ = run_iteration(state_, b, m);
  }

  void change_topic_count(int delta) {
    py::gil_scoped_release release;
    state_ = siftkit::change_topic_count(state_, delta);
  }

  py::object view(int representatives) const {
    ViewOptions options;
    options.representatives = representatives;
    return from_json(state_view({}, state_, options));
  }

  py::object export_results() const { return from_json(siftkit::export_results(state_)); }

  std::vector<std::string> retrieved_ids() const {
    std::vector<std::string> ids;
    ids.reserve(state_.sift.retrieved.size());
    for (const int d : state_.sift.retrieved) ids.push_back(state_.corpus->documents[static_cast<std::size_t>(d)].id);
    return ids;
  }

  Eigen::VectorXd scores() const { return state_.sift.scores; }
  int iteration() const { return state_.iteration; }
  int topic_count() const { return static_cast<int>(state_.model.factors.v.cols()); }
  int n_docs() const { return state_.n_docs(); }

  void save(const std::string& path) const { save_snapshot(path, state_); }

  static PySession load(const std::string& path) {
    PySession s;
    py::gil_scoped_release release;
    s.state_ = load_snapshot(path);
    return s;
  }

 private:
  PySession() = default;

  SessionState state_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Targeted topic modeling and relevance sifting";

  PYBIND11_CONSTINIT static py::gil_safe_call_once_and_store<py::object> error_type;
  error_type.call_once_and_store_result([&]() { return py::object(py::exception<Error>(m, "SiftkitError")); });
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      const py::object& type = error_type.get_stored();
      py::object exc = type(std::string(to_string(e.code())) + ": " + e.what());
      exc.attr("code") = to_string(e.code());
      PyErr_SetObject(type.ptr(), exc.ptr());
    }
  });

  m.def("porter_stem", [](const std::string& word) { return porter_stem(word); }, py::arg("word"));
  m.def("tokenize", [](const std::string& text) { return tokenize_and_stem(text); }, py::arg("text"));

  m.def("precision_recall_f1",
        [](const std::vector<std::string>& retrieved, const std::vector<std::string>& relevant) {
          const auto r = precision_recall_f1(retrieved, IdSet(relevant.begin(), relevant.end()));
          return py::make_tuple(r.precision, r.recall, r.f1);
        },
        py::arg("retrieved"), py::arg("relevant"));
  m.def("pres",
        [](const std::vector<std::string>& ranking, const std::vector<std::string>& relevant, int n_max) {
          return pres(ranking, IdSet(relevant.begin(), relevant.end()), n_max);
        },
        py::arg("ranking"), py::arg("relevant"), py::arg("n_max"));
  m.def("harmonic_mean", &harmonic_mean, py::arg("precision"), py::arg("recall"));

  m.def("nmf",
        [](const Eigen::MatrixXd& x, int k, int max_outer, double tol, std::uint64_t seed) {
          if ((x.array() < 0.0).any()) throw Error(ErrorCode::invalid_argument, "x must be nonnegative");
          SolverOptions options;
          options.max_outer = max_outer;
          options.tol = tol;
          options.seed = seed;
          const SparseMatrix sx = x.sparseView(0.0, 0.0);
          FactorPair f;
          {
            py::gil_scoped_release release;
            f = nmf(sx, k, options);
          }
          return py::make_tuple(f.v, f.h, f.objective_trace);
        },
        py::arg("x"), py::arg("k"), py::arg("max_outer") = 50, py::arg("tol") = 1e-4, py::arg("seed") = 20190601,
        "Rank-k NMF of a dense nonnegative matrix; returns (V, H, objective trace).");

  py::class_<PySession>(m, "Session")
      .def(py::init<const std::string&, const py::object&>(), py::arg("corpus"), py::arg("config") = py::none(),
           "Loads a JSONL file or category directory and runs iteration 0.")
      .def("iterate", &PySession::iterate, py::arg("batch") = py::none(), py::arg("mode") = py::none())
      .def("change_topic_count", &PySession::change_topic_count, py::arg("delta"))
      .def("state", &PySession::view, py::arg("representatives") = 10)
      .def("export", &PySession::export_results)
      .def("retrieved_ids", &PySession::retrieved_ids)
      .def("scores", &PySession::scores)
      .def("save", &PySession::save, py::arg("path"))
      .def_static("load", &PySession::load, py::arg("path"))
      .def_property_readonly("iteration", &PySession::iteration)
      .def_property_readonly("topic_count", &PySession::topic_count)
      .def_property_readonly("n_docs", &PySession::n_docs);
}
