#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>
#include <sstream>

#include "minimalist/commands.hpp"
#include "minimalist/experiment.hpp"
#include "minimalist/quantities.hpp"
#include "minimalist/verify.hpp"

namespace py = pybind11;
using namespace minimalist;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Dataset to_dataset(const Array& X, const Array& y) {
  if (X.ndim() != 2) throw InvalidInput("X must be 2-D");
  if (y.ndim() != 1) throw InvalidInput("y must be 1-D");
  const auto n = static_cast<std::size_t>(X.shape(0));
  const auto d = static_cast<std::size_t>(X.shape(1));
  Dataset ds{linalg::Matrix<double>(n, d), std::vector<double>(y.data(), y.data() + y.size())};
  std::copy(X.data(), X.data() + X.size(), ds.X.entries().begin());
  ds.validate();
  return ds;
}

py::tuple from_dataset(const Dataset& ds) {
  Array X({ds.samples(), ds.features()});
  std::copy(ds.X.entries().begin(), ds.X.entries().end(), X.mutable_data());
  Array y(static_cast<py::ssize_t>(ds.y.size()));
  std::copy(ds.y.begin(), ds.y.end(), y.mutable_data());
  return py::make_tuple(X, y);
}

/// nlohmann json -> python object through the json module.
py::object to_python(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

ReparamState<double> state_of(const Array& X, const Array& y, const std::vector<double>& u,
                              const std::vector<double>& v, SpectralData<double>& sd) {
  sd = decompose<double>(to_dataset(X, y));
  return to_reparam(Params<double>{u, v}, sd);
}

py::dict run_to_python(const RunResult& run) {
  const std::size_t n = run.records.size();
  auto column = [n]() { return Array(static_cast<py::ssize_t>(n)); };
  std::map<std::string, Array> cols;
  for (const char* name : {"step", "time", "loss", "sharpness", "imbalance", "balance_dev", "grad_norm", "psi1",
                           "psi2", "omega1", "omega2", "t1", "t2"})
    cols.emplace(name, column());
  const double nan = std::nan("");
  auto opt = [nan](const std::optional<double>& x) { return x ? *x : nan; };
  for (std::size_t k = 0; k < n; ++k) {
    const auto& r = run.records[k];
    cols.at("step").mutable_data()[k] = static_cast<double>(r.step);
    cols.at("time").mutable_data()[k] = opt(r.time);
    cols.at("loss").mutable_data()[k] = r.loss;
    cols.at("sharpness").mutable_data()[k] = opt(r.sharpness);
    cols.at("imbalance").mutable_data()[k] = opt(r.imbalance);
    cols.at("balance_dev").mutable_data()[k] = opt(r.balance_dev);
    cols.at("grad_norm").mutable_data()[k] = r.grad_norm;
    cols.at("psi1").mutable_data()[k] = r.terms ? r.terms->psi1 : nan;
    cols.at("psi2").mutable_data()[k] = r.terms ? r.terms->psi2 : nan;
    cols.at("omega1").mutable_data()[k] = r.terms ? r.terms->omega1 : nan;
    cols.at("omega2").mutable_data()[k] = r.terms ? r.terms->omega2 : nan;
    cols.at("t1").mutable_data()[k] = r.terms ? opt(r.terms->t1) : nan;
    cols.at("t2").mutable_data()[k] = r.terms ? opt(r.terms->t2) : nan;
  }
  py::dict traj;
  for (auto& [k, v] : cols) traj[py::str(k)] = v;
  py::dict out;
  out["status"] = to_string(run.status);
  out["message"] = run.message;
  out["steps"] = run.steps;
  out["final_loss"] = run.final_loss;
  out["final_sharpness"] = run.final_sharpness ? py::cast(*run.final_sharpness) : py::none();
  out["loss_increases"] = run.loss_increases;
  out["trajectory"] = traj;
  return out;
}

ExperimentConfig config_from_text(const std::string& text) {
  std::istringstream in(text);
  ExperimentConfig c = parse_config(in);
  c.validate();
  return c;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Sharpness, layer imbalance and dataset difficulty for the minimalist deep linear model";

  py::register_exception<InvalidInput>(m, "InvalidInput", PyExc_ValueError);
  py::register_exception<UndefinedQuantity>(m, "UndefinedQuantity", PyExc_ArithmeticError);
  py::register_exception<IngestionError>(m, "IngestionError", PyExc_IOError);
  py::register_exception<DivergenceError>(m, "DivergenceError", PyExc_RuntimeError);

  m.def("load_csv", [](const std::string& path) { return from_dataset(load_csv(path)); }, py::arg("path"),
        "Read a CSV (features then label) into (X, y).");
  m.def("eos_demo_dataset", [] { return from_dataset(eos_demo_dataset()); });
  m.def(
      "synth_gaussian",
      [](std::size_t n, std::size_t d, bool balanced, std::uint64_t seed) {
        return from_dataset(synth_gaussian(n, d, balanced ? LabelMode::balanced_sign : LabelMode::gaussian, seed));
      },
      py::arg("samples"), py::arg("features"), py::arg("balanced") = false, py::arg("seed") = 0);
  m.def(
      "synth_minimal_data",
      [](std::size_t dim, double common, double signal, double alpha, double beta, std::uint64_t seed) {
        return from_dataset(synth_minimal_data(dim, common, signal, alpha, beta, seed));
      },
      py::arg("dim") = 100, py::arg("common") = 5.477, py::arg("signal") = 0.233, py::arg("alpha") = 0.3,
      py::arg("beta") = 1.414, py::arg("seed") = 0);

  m.def("difficulty", [](const Array& X, const Array& y) { return to_python(difficulty_report(to_dataset(X, y))); },
        py::arg("X"), py::arg("y"), "N, d, r, sigma, Q, C-tilde, sum d_i^2 and predicted sharpness for D = 2..5.");
  m.def(
      "bounds",
      [](const Array& X, const Array& y, int depth, std::optional<double> imbalance, std::optional<double> alpha,
         std::optional<double> beta) {
        py::list out;
        for (const auto& r : bounds_reports(to_dataset(X, y), depth, imbalance, alpha, beta))
          out.append(to_python(to_json(r)));
        return out;
      },
      py::arg("X"), py::arg("y"), py::arg("depth") = 2, py::arg("imbalance") = py::none(),
      py::arg("alpha") = py::none(), py::arg("beta") = py::none());

  m.def(
      "sharpness",
      [](const Array& X, const Array& y, const std::vector<double>& u, const std::vector<double>& v) {
        SpectralData<double> sd;
        const auto s = state_of(X, y, u, v, sd);
        return sharpness(s, sd);
      },
      py::arg("X"), py::arg("y"), py::arg("u"), py::arg("v"), "Top eigenvalue of the loss Hessian at (u, v).");
  m.def(
      "loss",
      [](const Array& X, const Array& y, const std::vector<double>& u, const std::vector<double>& v) {
        return residual_and_loss(cast_dataset<double>(to_dataset(X, y)), Params<double>{u, v}).loss;
      },
      py::arg("X"), py::arg("y"), py::arg("u"), py::arg("v"));
  m.def(
      "layer_imbalance",
      [](const Array& X, const Array& y, const std::vector<double>& u, double v) {
        SpectralData<double> sd;
        return layer_imbalance(state_of(X, y, u, {v}, sd));
      },
      py::arg("X"), py::arg("y"), py::arg("u"), py::arg("v"));
  m.def(
      "imbalance_terms",
      [](const Array& X, const Array& y, const std::vector<double>& u, double v) {
        SpectralData<double> sd;
        const auto t = imbalance_terms(state_of(X, y, u, {v}, sd), sd);
        py::dict d;
        d["psi1"] = t.psi1;
        d["psi2"] = t.psi2;
        d["omega1"] = t.omega1;
        d["omega2"] = t.omega2;
        d["t1"] = t.t1 ? py::cast(*t.t1) : py::none();
        d["t2"] = t.t2 ? py::cast(*t.t2) : py::none();
        return d;
      },
      py::arg("X"), py::arg("y"), py::arg("u"), py::arg("v"));
  m.def("v1_star_sq", &v1_star_sq, py::arg("q"), py::arg("c"));

  m.def("eos_demo_config", [] { return serialize(eos_demo_config()); }, "The edge-of-stability preset as config text.");
  m.def("default_config", [] { return serialize(ExperimentConfig{}); });
  m.def(
      "run",
      [](const std::string& config) {
        const ExperimentConfig cfg = config_from_text(config);
        RunResult result;
        {
          py::gil_scoped_release release;
          result = run_experiment(cfg);
        }
        return run_to_python(result);
      },
      py::arg("config"),
      "Run the experiment described by config text; returns status and trajectory columns.");
  m.def(
      "train", [](const std::string& config) { return run_to_python(train(config_from_text(config))); },
      py::arg("config"), "Like run, and also writes the output directory.");

  m.def("verify_suites", &verify_suite_names);
  m.def(
      "verify",
      [](const std::string& suite, std::uint64_t seed, double tolerance_scale) {
        py::list out;
        for (const auto& r : run_verify(suite, VerifyOptions{seed, tolerance_scale})) {
          py::dict d;
          d["name"] = r.name;
          d["passed"] = r.passed();
          d["cases"] = r.cases;
          d["failures"] = r.failures;
          d["max_error"] = r.max_error;
          d["tolerance"] = r.tolerance;
          d["seconds"] = r.seconds;
          out.append(d);
        }
        return out;
      },
      py::arg("suite") = "all", py::arg("seed") = 0, py::arg("tolerance_scale") = 1.0);
}
