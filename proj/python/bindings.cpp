// Python extension: thin wrappers over the library. JSON crosses the boundary
// as text; the Python package decodes it.

#include <sstream>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "crtsace/cli.hpp"
#include "crtsace/diagnostics.hpp"
#include "crtsace/io.hpp"
#include "crtsace/simgen.hpp"

namespace py = pybind11;
using namespace crtsace;

namespace {

ScenarioConfig scenario_arg(const std::string& text) {
  // a JSON object, or a preset name / file path
  if (!text.empty() && text.front() == '{') return scenario_from_json(json::parse(text));
  return load_scenario(text);
}

std::string simulate_csv(const std::string& scenario, std::uint64_t seed, bool nmar) {
  auto sc = scenario_arg(scenario);
  if (nmar && !sc.nmar_violation) sc.nmar_violation = default_nmar_violation(sc.K);
  SimulatedTrial sim;
  {
    py::gil_scoped_release unlocked;
    RngHandle rng(seed, 0);
    sim = generate_dataset(sc, rng);
  }
  std::ostringstream os;
  write_dataset_csv(sim.data, os);
  return os.str();
}

std::string truth_json(const std::string& scenario, std::uint64_t seed, long min_individuals) {
  const auto sc = scenario_arg(scenario);
  py::gil_scoped_release unlocked;
  return truth_to_json(ground_truth(sc, seed, min_individuals, kTruthMinClusters)).dump();
}

py::dict fit(const std::string& csv_text, const std::string& config_json) {
  json cfg = json::parse(config_json);
  if (!cfg.is_object()) throw ConfigError("config must be a JSON object");
  ChainConfig probe;
  apply_chain_json(cfg, probe);
  const bool binary = cfg.value("binary_outcomes", false);
  std::istringstream in(csv_text);
  const auto ds = parse_dataset_csv(in, binary);
  const auto report = validate_dataset(ds);
  if (!report.ok()) throw DataError(report.to_string());
  FitData data = FitData::from_dataset(ds, probe.model);
  FitSettings s = fit_settings_from_json(cfg, data.ps(), data.po(), data.K);
  s.chain.validate();
  data.set_augmentation(s.chain.augmentation);
  s.prior.validate(data.ps(), data.po(), data.K);

  ChainResult chain;
  {
    py::gil_scoped_release unlocked;
    RngHandle rng(s.chain.seed, 0);
    chain = run_chain(data, s.prior, s.chain, rng);
  }
  const auto columns = trace_columns(chain);
  Eigen::MatrixXd draws(static_cast<Eigen::Index>(chain.size()), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t t = 0; t < chain.size(); ++t) draws(static_cast<Eigen::Index>(t), 0) = chain.iteration[t];
  for (std::size_t j = 1; j < columns.size(); ++j) {
    const auto series = chain.series(columns[j]);
    for (std::size_t t = 0; t < series.size(); ++t)
      draws(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j)) = series[t];
  }
  py::dict out;
  out["columns"] = columns;
  out["draws"] = draws;
  out["summary_csv"] = summary_csv(summarize(chain));
  out["config"] = fit_settings_to_json(s).dump();
  out["wall_seconds"] = chain.wall_seconds;
  return out;
}

std::string replicate(const std::string& scenario, const std::string& fit_json, int reps, std::uint64_t seed,
                      int jobs, long truth_individuals) {
  const auto sc = scenario_arg(scenario);
  const auto spec = sc.model_spec();
  FitSettings s = fit_settings_from_json(json::parse(fit_json), static_cast<int>(spec.strata_columns.size()),
                                         static_cast<int>(spec.outcome_columns.size()), sc.K);
  s.chain.model = spec;
  s.chain.validate();
  if (reps < 2) throw ConfigError("reps must be >= 2");
  py::gil_scoped_release unlocked;
  const auto truth = ground_truth(sc, seed, truth_individuals, kTruthMinClusters);
  return replicate_csv(run_replicates(sc, s.prior, s.chain, reps, seed, jobs, truth));
}

py::dict iccs(const Eigen::MatrixXd& sigma_eta, const Eigen::MatrixXd& sigma_e) {
  const auto r = compute_iccs(sigma_eta, sigma_e);
  py::dict out;
  out["rho1"] = r.rho1;
  out["rho2"] = r.rho2;
  out["rho12_between"] = r.rho12_between;
  out["rho12_within"] = r.rho12_within;
  return out;
}

py::tuple cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  int code;
  {
    py::gil_scoped_release unlocked;
    code = run_cli(args, out, err);
  }
  return py::make_tuple(code, out.str(), err.str());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Bayesian principal-stratification analysis of cluster-randomized trials";
  m.attr("__version__") = CRTSACE_VERSION;

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.def("preset_names", &preset_names);
  m.def("scenario_json", [](const std::string& s) { return scenario_to_json(scenario_arg(s)).dump(); },
        py::arg("scenario"));
  m.def("simulate_csv", &simulate_csv, py::arg("scenario"), py::arg("seed"), py::arg("nmar_violation") = false);
  m.def("truth_json", &truth_json, py::arg("scenario"), py::arg("seed"),
        py::arg("min_individuals") = kTruthMinIndividuals);
  m.def("fit", &fit, py::arg("csv_text"), py::arg("config_json"));
  m.def("replicate_csv", &replicate, py::arg("scenario"), py::arg("fit_json"), py::arg("reps"), py::arg("seed"),
        py::arg("jobs") = 1, py::arg("truth_individuals") = kTruthMinIndividuals);
  m.def("compute_iccs", &iccs, py::arg("sigma_eta"), py::arg("sigma_e"));
  m.def(
      "geweke",
      [](const std::vector<double>& series) {
        const auto r = geweke(series);
        return py::make_tuple(r.z, r.p);
      },
      py::arg("series"));
  m.def("run_cli", &cli, py::arg("args"));
}
