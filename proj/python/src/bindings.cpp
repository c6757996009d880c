// Python bindings. Vectors and matrices cross as numpy arrays; structured
// results cross as JSON text that the package decodes.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "lpflow/builtins.hpp"
#include "lpflow/config.hpp"
#include "lpflow/dissipative.hpp"
#include "lpflow/error.hpp"
#include "lpflow/pipeline.hpp"
#include "lpflow/serialize.hpp"
#include "lpflow/surgery.hpp"
#include "lpflow/version.hpp"

namespace py = pybind11;
using namespace lpflow;

namespace {

std::string dump(const Json& j) { return j.dump(); }

PeriodicOrbit find_orbit(const std::string& name, const ParamMap& params, const Vec3& seed, int section,
                         double tol) {
  const auto f = make_builtin(name, params);
  if (section < 0 || section >= static_cast<int>(f.sections.size())) {
    throw Error(ErrorCode::InvalidArgument, "section index out of range");
  }
  OrbitOptions opts;
  opts.tol = tol;
  return find_periodic_orbit(f.spec, f.sections[static_cast<std::size_t>(section)], seed, opts);
}

std::pair<int, std::string> run_command(const std::string& command, const std::string& config_text,
                                        const std::string& out_dir, int threads) {
  if (command == "report") return {0, dump(cmd_report(out_dir).summary)};
  AnalysisConfig cfg = parse_config(config_text, "<python>");
  if (!out_dir.empty()) cfg.output_dir = out_dir;
  if (threads > 0) cfg.threads = static_cast<unsigned>(threads);
  CommandResult res;
  if (command == "orbits") {
    res = cmd_orbits(cfg);
  } else if (command == "analyze") {
    res = cmd_analyze(cfg);
  } else if (command == "basin") {
    res = cmd_basin(cfg);
  } else if (command == "surgery") {
    res = cmd_surgery(cfg);
  } else {
    throw Error(ErrorCode::InvalidArgument, "unknown command '" + command + "'");
  }
  Json out = {{"exit_code", res.exit_code}, {"summary", res.summary}, {"files", res.files},
              {"warnings", res.warnings}};
  return {res.exit_code, dump(out)};
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Linear Poincare flow toolkit";
  m.attr("__version__") = std::string(kVersion);
  m.attr("SCHEMA_VERSION") = std::string(kSchemaVersion);

  // Messages start with the error code name, e.g. "NotDissipative: ...".
  py::register_exception<Error>(m, "LpflowError", PyExc_RuntimeError);

  m.def("builtin_names", &builtin_names);

  m.def(
      "field",
      [](const std::string& name, const ParamMap& params, const Vec3& x) {
        return evaluate_field(make_builtin(name, params).spec, x);
      },
      py::arg("name"), py::arg("params") = ParamMap{}, py::arg("x"));

  m.def(
      "divergence",
      [](const std::string& name, const ParamMap& params, const Vec3& x) {
        return divergence(make_builtin(name, params).spec, x);
      },
      py::arg("name"), py::arg("params") = ParamMap{}, py::arg("x"));

  m.def(
      "flow_with_tangent",
      [](const std::string& name, const ParamMap& params, const Vec3& x, double t, double tol) {
        const auto [seg, tan] = flow_with_tangent(make_builtin(name, params).spec, x, t, {tol, 0.0});
        return py::make_tuple(seg.end, tan.fundamental, tan.log_det);
      },
      py::arg("name"), py::arg("params") = ParamMap{}, py::arg("x"), py::arg("t"), py::arg("tol") = 1e-10);

  m.def(
      "linear_poincare",
      [](const std::string& name, const ParamMap& params, const Vec3& x, double t, double tol) {
        return linear_poincare(make_builtin(name, params).spec, x, t, tol).matrix;
      },
      py::arg("name"), py::arg("params") = ParamMap{}, py::arg("x"), py::arg("t"), py::arg("tol") = 1e-10);

  m.def(
      "find_periodic_orbit_json",
      [](const std::string& name, const ParamMap& params, const Vec3& seed, int section, double tol) {
        return dump(to_json(find_orbit(name, params, seed, section, tol)));
      },
      py::arg("name"), py::arg("params") = ParamMap{}, py::arg("seed"), py::arg("section") = 0,
      py::arg("tol") = 1e-11);

  m.def(
      "enumerate_orbits_json",
      [](const std::string& name, const ParamMap& params, int seeds, double period_bound, std::uint64_t seed,
         unsigned threads) {
        const auto f = make_builtin(name, params);
        CensusBudget budget;
        budget.seeds = seeds;
        budget.period_bound = period_bound;
        budget.rng_seed = seed;
        budget.threads = threads;
        py::gil_scoped_release release;
        return dump(to_json(enumerate_orbits(f.spec, f.sections, budget, 1e-10)));
      },
      py::arg("name"), py::arg("params") = ParamMap{}, py::arg("seeds") = 200, py::arg("period_bound") = 10.0,
      py::arg("seed") = 0, py::arg("threads") = 1);

  m.def(
      "sink_via_shear_json",
      [](double lambda, double mu, double gamma) { return dump(to_json(sink_via_shear({lambda, mu, gamma, 1.0}))); },
      py::arg("lambda_"), py::arg("mu"), py::arg("gamma"));

  m.def(
      "choose_budget_json",
      [](double C, double eps, double lambda_rate, double alpha) {
        return dump(to_json(choose_budget(C, eps, lambda_rate, alpha)));
      },
      py::arg("C"), py::arg("eps"), py::arg("lambda_rate"), py::arg("alpha"));

  m.def(
      "graph_perturbation_json",
      [](double lambda, double mu, double gamma, double tau, double C, double eps, double lambda_rate,
         double alpha) {
        const auto budget = choose_budget(C, eps, lambda_rate, alpha);
        return dump(to_json(graph_perturbation_family({lambda, mu, gamma, tau}, budget)));
      },
      py::arg("lambda_"), py::arg("mu"), py::arg("gamma"), py::arg("tau"), py::arg("C"), py::arg("eps"),
      py::arg("lambda_rate"), py::arg("alpha"));

  m.def("angle_collapse_bound", &angle_collapse_bound, py::arg("eps1"), py::arg("m"));

  m.def(
      "wilson_interval", [](int hits, int n) { return py::make_tuple(wilson_lower(hits, n), wilson_upper(hits, n)); },
      py::arg("hits"), py::arg("n"));

  m.def(
      "run_command",
      [](const std::string& command, const std::string& config_text, const std::string& out_dir, int threads) {
        py::gil_scoped_release release;
        return run_command(command, config_text, out_dir, threads);
      },
      py::arg("command"), py::arg("config_text") = "", py::arg("out_dir") = "", py::arg("threads") = 0);
}
