#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "zimpute/config.hpp"
#include "zimpute/design.hpp"
#include "zimpute/errors.hpp"
#include "zimpute/impute.hpp"
#include "zimpute/io.hpp"
#include "zimpute/model.hpp"
#include "zimpute/random.hpp"
#include "zimpute/simlab.hpp"
#include "zimpute/variance.hpp"

namespace py = pybind11;
using namespace zimpute;

namespace {

// y may hold NaN for missing values when `responded` is not given.
SampleFrame make_sample(const Vector& y, const Matrix& z, const Matrix& u, const Vector& v,
                        const Vector& pi, std::optional<Vector> omega,
                        std::optional<std::vector<int>> responded,
                        std::optional<std::vector<int>> stratum, double population_size) {
  SampleColumns c;
  c.y = y;
  c.z = z;
  c.u = u;
  c.v = v;
  c.pi = pi;
  if (omega) c.omega = *omega;
  c.responded.resize(static_cast<std::size_t>(y.size()));
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    c.responded[k] = responded ? static_cast<std::uint8_t>(responded->at(k) != 0)
                               : static_cast<std::uint8_t>(std::isfinite(y[i]));
  }
  if (stratum) c.stratum = *stratum;
  c.population_size = population_size;
  return SampleFrame::build(std::move(c));
}

py::dict variance_dict(const VarianceReport& r) {
  py::dict d;
  d["method"] = std::string(method_name(r.method));
  d["estimate"] = r.estimate;
  d["v1"] = r.v1;
  d["v2"] = r.v2;
  d["v3"] = r.includes_v3 ? py::object(py::float_(r.v3)) : py::object(py::none());
  d["variance"] = r.total;
  d["ci95"] = py::make_tuple(r.ci_low, r.ci_high);
  return d;
}

py::list rows_list(const MonteCarloTable& t) {
  py::list out;
  for (const auto& r : t.rows) {
    py::dict d;
    d["method"] = std::string(method_name(r.method));
    d["estimand"] = r.estimand;
    d["truth"] = r.truth;
    d["mean"] = r.mean;
    d["rb"] = r.rb;
    d["mse"] = r.mse;
    d["re"] = r.re;
    d["mean_variance"] = r.mean_variance;
    d["variance_rb"] = r.variance_rb;
    d["coverage"] = r.coverage;
    out.append(d);
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Imputation of zero-inflated survey variables";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  auto conv = py::register_exception<ConvergenceError>(m, "ConvergenceError", base.ptr());
  py::register_exception<SeparationError>(m, "SeparationError", conv.ptr());
  py::register_exception<EmptyPoolError>(m, "EmptyPoolError", base.ptr());
  py::register_exception<SingularMatrixError>(m, "SingularMatrixError", base.ptr());
  py::register_exception<DesignError>(m, "DesignError", base.ptr());

  py::enum_<Method>(m, "Method")
      .value("RR", Method::RR)
      .value("BRR", Method::BRR)
      .value("MRR", Method::MRR)
      .value("BMRR", Method::BMRR);
  m.def("parse_method", [](const std::string& s) { return parse_method(s); });

  py::class_<SampleFrame>(m, "SampleFrame")
      .def(py::init(&make_sample), py::arg("y"), py::arg("z"), py::arg("u"), py::arg("v"),
           py::arg("pi"), py::arg("omega") = py::none(), py::arg("responded") = py::none(),
           py::arg("stratum") = py::none(), py::arg("population_size") = 0.0)
      .def("__len__", &SampleFrame::size)
      .def_property_readonly("respondent_count", &SampleFrame::respondent_count)
      .def_property_readonly("y", &SampleFrame::y_values)
      .def_property_readonly("d", &SampleFrame::d)
      .def_property_readonly("responded",
                             [](const SampleFrame& s) {
                               return std::vector<int>(s.r().begin(), s.r().end());
                             })
      .def_property_readonly("population_size", &SampleFrame::population_size);

  m.def(
      "read_sample_csv",
      [](const std::string& path, bool z_intercept, bool u_intercept, double population_size) {
        return load_sample_csv_file(path, {z_intercept, u_intercept, population_size}).frame;
      },
      py::arg("path"), py::arg("z_intercept") = false, py::arg("u_intercept") = false,
      py::arg("population_size") = 0.0);

  py::class_<FittedModel>(m, "FittedModel")
      .def_property_readonly("gamma", [](const FittedModel& f) { return f.phi.gamma; })
      .def_property_readonly("phi", [](const FittedModel& f) { return f.phi.phi; })
      .def_property_readonly("converged", [](const FittedModel& f) { return f.phi.converged; })
      .def_property_readonly("iterations", [](const FittedModel& f) { return f.phi.iterations; })
      .def_property_readonly("b_ar", [](const FittedModel& f) { return f.regression.b_ar; })
      .def_property_readonly("eigenvalues",
                             [](const FittedModel& f) { return f.regression.eigenvalues; })
      .def_property_readonly("regularization_active",
                             [](const FittedModel& f) { return f.regression.regularization_active; })
      .def_property_readonly("pool_size", [](const FittedModel& f) { return f.pool.size(); });
  m.def(
      "fit_model", [](const SampleFrame& s, double a) { return fit_model(s, a); }, py::arg("sample"),
      py::arg("reg_threshold") = kDefaultRegThreshold);

  py::class_<ImputationResult>(m, "ImputationResult")
      .def_readonly("method", &ImputationResult::method)
      .def_readonly("recipients", &ImputationResult::recipients)
      .def_readonly("y_star", &ImputationResult::y_star)
      .def_property_readonly("eta_star",
                             [](const ImputationResult& r) {
                               return std::vector<int>(r.eta_star.begin(), r.eta_star.end());
                             })
      .def_readonly("donor", &ImputationResult::donor)
      .def_readonly("seed", &ImputationResult::seed)
      .def_readonly("stream_id", &ImputationResult::stream_id)
      .def("__len__", &ImputationResult::size);

  m.def(
      "impute",
      [](Method method, const SampleFrame& s, const FittedModel& f, std::uint64_t seed,
         std::uint64_t stream_id) {
        RandomStream rs(seed, stream_id);
        return impute(method, s, f, rs);
      },
      py::arg("method"), py::arg("sample"), py::arg("model"), py::arg("seed"),
      py::arg("stream_id") = 0);
  m.def("imputed_total", &imputed_total, py::arg("sample"), py::arg("result"));
  m.def("imputed_cdf", &imputed_cdf, py::arg("sample"), py::arg("result"), py::arg("t"));
  m.def("completed_values", &completed_values, py::arg("sample"), py::arg("result"));

  m.def(
      "estimate_variance",
      [](const SampleFrame& s, const FittedModel& f, const ImputationResult& r,
         const std::string& v1) {
        VarianceDesign design;
        if (v1 == "stratified-srs") {
          design = VarianceDesign::joint_probabilities(stratified_joint_probabilities(s));
        } else if (v1 != "hajek-rosen") {
          throw ValidationError("v1 must be hajek-rosen or stratified-srs");
        }
        return variance_dict(estimate_variance(r.method, s, f, r, design));
      },
      py::arg("sample"), py::arg("model"), py::arg("result"), py::arg("v1") = "hajek-rosen");

  m.def(
      "run_monte_carlo",
      [](const std::string& config_json, double r_squared, double phi_bar, double p_bar) {
        SimulationPlan plan = parse_simulation_config(config_json);
        ScenarioConfig c = plan.base;
        c.r_squared = r_squared;
        c.phi_bar = phi_bar;
        c.p_bar = p_bar;
        c.validate();
        MonteCarloTable t;
        {
          py::gil_scoped_release release;
          t = run_monte_carlo(c);
        }
        py::dict d;
        d["completed"] = t.completed;
        d["failed"] = t.failed;
        d["population_total"] = t.population_total;
        d["sigma2"] = t.sigma2;
        d["reg_threshold"] = t.reg_threshold;
        d["rows"] = rows_list(t);
        return d;
      },
      py::arg("config_json") = "{}", py::arg("r_squared") = 0.5, py::arg("phi_bar") = 0.7,
      py::arg("p_bar") = 0.5);

  m.def(
      "run_application_scenario",
      [](const std::string& config_json) {
        ApplicationConfig c = config_json.empty() ? ApplicationConfig{}
                                                  : parse_application_config(config_json);
        ApplicationReport r;
        {
          py::gil_scoped_release release;
          r = run_application_scenario(c);
        }
        py::dict d;
        d["population_total"] = r.population_total;
        d["t_grid"] = r.config.t_grid;
        d["population_cdf"] = r.population_cdf;
        d["total"] = py::make_tuple(r.total[0], r.total[1]);
        d["cdf"] = py::make_tuple(r.cdf[0], r.cdf[1]);
        d["bootstrap_variance"] = py::make_tuple(r.bootstrap_variance[0], r.bootstrap_variance[1]);
        d["re"] = r.re;
        return d;
      },
      py::arg("config_json") = "");
}
