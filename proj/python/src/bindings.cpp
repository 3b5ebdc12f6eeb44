#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>
#include <tuple>

#include "pgp/commands.hpp"
#include "pgp/error.hpp"
#include "pgp/graphs.hpp"
#include "pgp/metrics.hpp"
#include "pgp/relational.hpp"
#include "pgp/tape.hpp"

namespace py = pybind11;
using pgp::num::Matrix;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;
using BoxTuple = std::tuple<double, double, double, double>;

Matrix to_matrix(const Array& a) {
  if (a.ndim() != 2) throw py::value_error("expected a 2-D array");
  Matrix m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), m.data().begin());
  return m;
}

Array to_array(const Matrix& m) {
  Array a({m.rows(), m.cols()});
  std::copy(m.data().begin(), m.data().end(), a.mutable_data());
  return a;
}

pgp::Box to_box(const BoxTuple& b) { return {std::get<0>(b), std::get<1>(b), std::get<2>(b), std::get<3>(b)}; }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Native core of pgpnet";

  py::register_exception<pgp::ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<pgp::ValidationError>(m, "ValidationError", PyExc_ValueError);

  m.def(
      "co_graph",
      [](const std::string& corpus_jsonl, std::size_t num_pills) {
        std::istringstream in(corpus_jsonl);
        const auto catalog = pgp::graphs::PillCatalog::numbered(num_pills);
        return to_array(pgp::graphs::build_co_graph(pgp::graphs::parse_corpus(in, catalog), catalog).weights);
      },
      py::arg("corpus_jsonl"), py::arg("num_pills"),
      "Pill co-occurrence weights from prescription JSON lines.");

  m.def(
      "size_graph",
      [](const std::string& annotations_jsonl, std::size_t num_pills) {
        std::istringstream in(annotations_jsonl);
        const auto catalog = pgp::graphs::PillCatalog::numbered(num_pills);
        const auto g = pgp::graphs::build_size_graph(pgp::graphs::parse_annotations(in, catalog), catalog);
        py::array_t<bool> known({num_pills, num_pills});
        auto k = known.mutable_unchecked<2>();
        for (std::size_t i = 0; i < num_pills; ++i)
          for (std::size_t j = 0; j < num_pills; ++j) k(i, j) = g.known[i][j];
        return py::make_tuple(to_array(g.weights), known);
      },
      py::arg("annotations_jsonl"), py::arg("num_pills"),
      "Relative-size weights and a mask of the entries that are connected.");

  m.def(
      "condense",
      [](const Array& class_graph, const Array& logits) {
        pgp::num::Tape t;
        return to_array(pgp::relational::condense(t.constant(to_matrix(class_graph)), t.constant(to_matrix(logits))).value());
      },
      py::arg("class_graph"), py::arg("logits"), "softmax(logits) A softmax(logits)^T.");

  m.def(
      "iou", [](const BoxTuple& a, const BoxTuple& b) { return pgp::iou(to_box(a), to_box(b)); }, py::arg("a"),
      py::arg("b"), "IoU of two (x, y, w, h) boxes.");

  m.def(
      "map_report_json",
      [](const std::vector<std::tuple<std::string, BoxTuple, std::size_t, double>>& detections,
         const std::vector<std::tuple<std::string, BoxTuple, std::size_t>>& truth, std::size_t num_classes) {
        std::vector<pgp::metrics::Detection> d;
        for (const auto& [img, box, label, conf] : detections) d.push_back({img, to_box(box), label, conf});
        std::vector<pgp::metrics::GroundTruth> g;
        for (const auto& [img, box, label] : truth) g.push_back({img, to_box(box), label});
        return pgp::metrics::report_json(pgp::metrics::map_report(d, g, num_classes));
      },
      py::arg("detections"), py::arg("truth"), py::arg("num_classes"));

  m.def(
      "run_command",
      [](const std::string& command, const std::string& config_path, const std::vector<std::string>& overrides) {
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = pgp::commands::run(command, config_path, overrides, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("command"), py::arg("config_path"), py::arg("overrides") = std::vector<std::string>{},
      "Runs a pgp command; returns (exit_code, stdout, stderr).");
}
