#include "crtsace/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "crtsace/io.hpp"

namespace crtsace {

namespace fs = std::filesystem;

namespace {

std::string default_out_dir() {
  if (const char* env = std::getenv("CRTSACE_OUT_DIR"); env && *env) return env;
  return ".";
}

std::string prepare_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw ConfigError("cannot create output directory " + dir);
  return dir;
}

std::string join(const std::string& dir, const std::string& file) { return (fs::path(dir) / file).string(); }

std::vector<int> parse_columns(const std::string& spec) {
  std::vector<int> cols;
  if (spec.empty()) return cols;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      cols.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("bad column list '" + spec + "'");
    }
  }
  return cols;
}

struct SimulateArgs {
  std::string scenario = "I";
  std::string config;
  std::uint64_t seed = 1;
  std::string out;
  bool nmar = false;
  long truth_individuals = kTruthMinIndividuals;
};

struct FitArgs {
  std::string data;
  std::string config;
  std::optional<int> iters, burnin, thin;
  std::optional<std::uint64_t> seed;
  std::string init;
  std::string augmentation;
  bool store_params = false;
  bool binary = false;
  std::string strata_columns, outcome_columns;
  std::string out;
};

struct ReplicateArgs {
  std::string scenario = "I";
  std::string config;
  int reps = 20;
  int iters = 10000;
  int burnin = 2500;
  int thin = 1;
  std::uint64_t seed = 1;
  int jobs = 1;
  bool nmar = false;
  std::string augmentation;
  std::string out;
  long truth_individuals = kTruthMinIndividuals;
};

// A --config file for simulate/replicate is either a scenario object or a
// fit config with a nested "scenario" object.
ScenarioConfig resolve_scenario(const std::string& name, const std::string& config_path, bool nmar,
                                json* fit_json) {
  ScenarioConfig sc = load_scenario(name);
  if (!config_path.empty()) {
    json j = read_json_file(config_path);
    if (j.contains("scenario")) {
      json s = j["scenario"];
      if (!s.contains("name")) s["name"] = sc.name;
      sc = scenario_from_json(s);
      j.erase("scenario");
      if (fit_json) *fit_json = j;
    } else if (j.contains("beta") || j.contains("n_clusters") || j.contains("alpha_11_1") || j.contains("cv") ||
               j.contains("mean_cluster_size") || j.contains("m1")) {
      if (!j.contains("name")) j["name"] = sc.name;
      sc = scenario_from_json(j);
    } else if (fit_json) {
      *fit_json = j;
    } else {
      throw ConfigError(config_path + ": expected a scenario object");
    }
  }
  if (nmar && !sc.nmar_violation) sc.nmar_violation = default_nmar_violation(sc.K);
  return sc;
}

int cmd_simulate(const SimulateArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  RunManifest m;
  m.command = "simulate";
  m.argv = argv;
  m.started_at = utc_now();
  m.seed = a.seed;
  const auto sc = resolve_scenario(a.scenario, a.config, a.nmar, nullptr);
  const std::string dir = prepare_dir(a.out.empty() ? default_out_dir() : a.out);

  RngHandle rng(a.seed, 0);
  const auto sim = generate_dataset(sc, rng);
  const std::string data_path = join(dir, "data.csv");
  write_dataset_csv(sim.data, data_path);

  const auto truth = ground_truth(sc, a.seed, a.truth_individuals, kTruthMinClusters);
  json tj = truth_to_json(truth);
  tj["scenario"] = sc.name;
  const std::string truth_path = join(dir, "truth.json");
  write_text_file(truth_path, tj.dump(2) + "\n");

  // Column selection matching the generating models, usable as fit --config.
  json model;
  model["strata_columns"] = sc.model_spec().strata_columns;
  model["outcome_columns"] = sc.model_spec().outcome_columns;
  model["binary_outcomes"] = sc.binary_mode;
  const std::string model_path = join(dir, "model.json");
  write_text_file(model_path, model.dump(2) + "\n");

  m.config = {{"scenario", scenario_to_json(sc)}, {"truth_individuals", a.truth_individuals}};
  m.outputs = {data_path, truth_path, model_path};
  m.finished_at = utc_now();
  const std::string manifest_path = join(dir, "manifest.json");
  write_text_file(manifest_path, m.to_json().dump(2) + "\n");
  out << "wrote " << data_path << " (" << sim.data.total_individuals() << " individuals, "
      << sim.data.clusters.size() << " clusters)\n";
  return kExitOk;
}

int cmd_fit(const FitArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
  RunManifest m;
  m.command = "fit";
  m.argv = argv;
  m.started_at = utc_now();

  json cfg = a.config.empty() ? json::object() : read_json_file(a.config);
  if (!cfg.is_object()) throw ConfigError("config must be a JSON object");
  cfg.erase("scenario");
  // Flags override the file.
  if (a.iters) cfg["iterations"] = *a.iters;
  if (a.burnin) cfg["burn_in"] = *a.burnin;
  if (a.thin) cfg["thin"] = *a.thin;
  if (a.seed) cfg["seed"] = *a.seed;
  if (!a.init.empty()) cfg["init_mode"] = a.init;
  if (!a.augmentation.empty()) cfg["augmentation"] = a.augmentation;
  if (a.store_params) cfg["store_full_params"] = true;
  if (a.binary) cfg["binary_outcomes"] = true;
  if (!a.strata_columns.empty()) cfg["strata_columns"] = parse_columns(a.strata_columns);
  if (!a.outcome_columns.empty()) cfg["outcome_columns"] = parse_columns(a.outcome_columns);
  // Resolve the binary flag and columns before the data dimensions are known.
  ChainConfig probe;
  apply_chain_json(cfg, probe);
  const bool binary = cfg.value("binary_outcomes", false);

  const TrialDataset ds = read_dataset_csv(a.data, binary);
  const auto report = validate_dataset(ds);
  if (!report.ok()) throw DataError(report.to_string());
  FitData data = FitData::from_dataset(ds, probe.model);
  FitSettings s = fit_settings_from_json(cfg, data.ps(), data.po(), data.K);
  s.chain.validate();
  data.set_augmentation(s.chain.augmentation);
  s.prior.validate(data.ps(), data.po(), data.K);
  const std::string dir = prepare_dir(a.out.empty() ? default_out_dir() : a.out);

  RngHandle rng(s.chain.seed, 0);
  const ChainResult chain = run_chain(data, s.prior, s.chain, rng);
  const std::string draws_path = join(dir, "draws.csv");
  trace_export(chain, draws_path);
  const auto summary = summarize(chain);
  // Short chains still get draws and a summary, just no convergence table.
  const bool diagnosable = chain.size() >= kGewekeMinValues;
  const auto diag = diagnosable ? geweke_table(chain) : std::vector<GewekeRow>{};
  const std::string summary_csv_path = join(dir, "summary.csv");
  const std::string summary_txt_path = join(dir, "summary.txt");
  const std::string diag_csv_path = join(dir, "diagnostics.csv");
  const std::string diag_txt_path = join(dir, "diagnostics.txt");
  write_text_file(summary_csv_path, summary_csv(summary));
  write_text_file(summary_txt_path, summary_text(summary));
  write_text_file(diag_csv_path, geweke_csv(diag));
  write_text_file(diag_txt_path, diagnosable ? geweke_text(diag)
                                             : "Geweke diagnostics skipped: " + std::to_string(chain.size()) +
                                                   " kept draws, need " + std::to_string(kGewekeMinValues) + "\n");

  m.config = fit_settings_to_json(s);
  m.seed = s.chain.seed;
  m.inputs = {a.data};
  m.outputs = {draws_path, summary_csv_path, summary_txt_path, diag_csv_path, diag_txt_path};
  m.finished_at = utc_now();
  json mj = m.to_json();
  mj["input_hash"] = hex64(fnv1a64([&] {
    std::ifstream in(a.data, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  }()));
  mj["wall_seconds"] = chain.wall_seconds;
  write_text_file(join(dir, "manifest.json"), mj.dump(2) + "\n");

  out << summary_text(summary);
  out << "\n" << chain.size() << " kept draws in " << draws_path << "\n";
  return kExitOk;
}

int cmd_replicate(const ReplicateArgs& a, const std::vector<std::string>& argv, std::ostream& out,
                  std::ostream& err) {
  if (a.reps < 2) throw ConfigError("--reps must be >= 2 (replicate metrics need at least 2 replicates)");
  if (a.jobs < 1) throw ConfigError("--jobs must be >= 1");
  RunManifest m;
  m.command = "replicate";
  m.argv = argv;
  m.started_at = utc_now();
  m.seed = a.seed;
  json fit_json = json::object();
  const auto sc = resolve_scenario(a.scenario, a.config, a.nmar, &fit_json);
  fit_json["iterations"] = a.iters;
  fit_json["burn_in"] = a.burnin;
  fit_json["thin"] = a.thin;
  if (!a.augmentation.empty()) fit_json["augmentation"] = a.augmentation;
  const auto spec = sc.model_spec();
  FitSettings s = fit_settings_from_json(fit_json, static_cast<int>(spec.strata_columns.size()),
                                         static_cast<int>(spec.outcome_columns.size()), sc.K);
  s.chain.model = spec;
  s.chain.validate();
  const std::string dir = prepare_dir(a.out.empty() ? default_out_dir() : a.out);

  const auto truth = ground_truth(sc, a.seed, a.truth_individuals, kTruthMinClusters);
  const auto table = run_replicates(sc, s.prior, s.chain, a.reps, a.seed, a.jobs, truth);

  const std::string metrics_path = join(dir, "metrics.csv");
  const std::string reps_path = join(dir, "replicates.csv");
  if (!table.rows.empty()) write_text_file(metrics_path, replicate_csv(table));
  {
    std::ostringstream os;
    os << "replicate,status,parameter,mean,lower,upper,sample_truth\n";
    for (std::size_t r = 0; r < table.replicates.size(); ++r) {
      const auto& rep = table.replicates[r];
      if (!rep.completed) {
        os << r << ",aborted,,,,,\n";
        continue;
      }
      for (const auto& row : rep.summary.rows) {
        os << r << ",ok," << row.name << ',' << row.mean << ',' << row.lower << ',' << row.upper << ',';
        for (Eigen::Index k = 0; k < rep.sample.delta_I.size(); ++k) {
          if (row.name == "delta_I_" + std::to_string(k + 1)) os << rep.sample.delta_I(k);
          if (row.name == "delta_C_" + std::to_string(k + 1)) os << rep.sample.delta_C(k);
        }
        os << '\n';
      }
    }
    write_text_file(reps_path, os.str());
  }
  m.config = {{"scenario", scenario_to_json(sc)},
              {"fit", fit_settings_to_json(s)},
              {"reps", a.reps},
              {"jobs", a.jobs},
              {"truth_individuals", a.truth_individuals}};
  m.outputs = {metrics_path, reps_path};
  m.finished_at = utc_now();
  json mj = m.to_json();
  mj["completed"] = table.completed;
  mj["aborted"] = table.aborted;
  write_text_file(join(dir, "manifest.json"), mj.dump(2) + "\n");

  for (std::size_t r = 0; r < table.replicates.size(); ++r) {
    if (!table.replicates[r].completed) err << "replicate " << r << " aborted: " << table.replicates[r].error << "\n";
  }
  if (!table.rows.empty()) out << replicate_csv(table);
  out << table.completed << " of " << a.reps << " replicates completed\n";
  if (10 * table.aborted > a.reps) {
    err << "more than 10% of replicates aborted\n";
    return kExitNumerical;
  }
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bayesian survivor average causal effects for cluster-randomized trials"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(CRTSACE_VERSION));

  SimulateArgs sa;
  auto* sim = app.add_subcommand("simulate", "Generate a synthetic trial, its truth, and a manifest");
  sim->add_option("--scenario", sa.scenario, "Preset I..VIII or a scenario JSON path");
  sim->add_option("--config", sa.config, "Scenario JSON overriding the preset");
  sim->add_option("--seed", sa.seed, "Random seed");
  sim->add_option("--out", sa.out, "Output directory");
  sim->add_flag("--nmar-violation", sa.nmar, "Add the hidden missingness covariate");
  sim->add_option("--truth-individuals", sa.truth_individuals, "Population size of the truth oracle");

  FitArgs fa;
  auto* fit = app.add_subcommand("fit", "Run the Gibbs sampler on a dataset CSV");
  fit->add_option("--data", fa.data, "Dataset CSV")->required();
  fit->add_option("--config", fa.config, "JSON with chain settings and prior hyperparameters");
  fit->add_option("--iters", fa.iters, "Total iterations");
  fit->add_option("--burnin", fa.burnin, "Burn-in iterations");
  fit->add_option("--thin", fa.thin, "Thinning interval");
  fit->add_option("--seed", fa.seed, "Random seed");
  fit->add_option("--init", fa.init, "Initialization: heuristic or random");
  fit->add_option("--augmentation", fa.augmentation, "Imputed data in parameter updates: collapsed or full");
  fit->add_flag("--store-params", fa.store_params, "Write all regression/covariance parameters to draws.csv");
  fit->add_flag("--binary", fa.binary, "Outcomes are binary (bivariate Probit)");
  fit->add_option("--strata-columns", fa.strata_columns, "Covariate columns for the strata model, e.g. 0,1,2");
  fit->add_option("--outcome-columns", fa.outcome_columns, "Covariate columns for the outcome model");
  fit->add_option("--out", fa.out, "Output directory");

  ReplicateArgs ra;
  auto* rep = app.add_subcommand("replicate", "Simulation study: bias, coverage, and MC error over replicates");
  rep->add_option("--scenario", ra.scenario, "Preset I..VIII or a scenario JSON path");
  rep->add_option("--config", ra.config, "Scenario JSON, or fit JSON with a nested \"scenario\"");
  rep->add_option("--reps", ra.reps, "Number of replicates (>= 2)");
  rep->add_option("--iters", ra.iters, "Total iterations per chain");
  rep->add_option("--burnin", ra.burnin, "Burn-in iterations per chain");
  rep->add_option("--thin", ra.thin, "Thinning interval");
  rep->add_option("--seed", ra.seed, "Random seed");
  rep->add_option("--jobs", ra.jobs, "Concurrent replicates");
  rep->add_option("--augmentation", ra.augmentation, "Imputed data in parameter updates: collapsed or full");
  rep->add_flag("--nmar-violation", ra.nmar, "Violate nested MAR with a hidden covariate");
  rep->add_option("--out", ra.out, "Output directory");
  rep->add_option("--truth-individuals", ra.truth_individuals, "Population size of the truth oracle");

  std::vector<std::string> full{"crtsace"};
  full.insert(full.end(), args.begin(), args.end());
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (sim->parsed()) return cmd_simulate(sa, full, out);
    if (fit->parsed()) return cmd_fit(fa, full, out);
    if (rep->parsed()) return cmd_replicate(ra, full, out, err);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    err << "data error:\n" << e.what();
    if (std::string(e.what()).back() != '\n') err << "\n";
    return kExitData;
  } catch (const NumericalError& e) {
    err << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const json::exception& e) {
    err << "config error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}

}  // namespace crtsace
