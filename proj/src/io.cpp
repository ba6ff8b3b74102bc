#include "crtsace/io.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#ifndef CRTSACE_PRESET_DIR
#define CRTSACE_PRESET_DIR "presets"
#endif
#ifndef CRTSACE_VERSION
#define CRTSACE_VERSION "0.0.0"
#endif

namespace crtsace {

namespace {

std::string fmt_num(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    if (cell.size() >= 2 && cell.front() == '"' && cell.back() == '"') cell = cell.substr(1, cell.size() - 2);
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

bool is_absent(const std::string& f) { return f.empty() || f == "NA" || f == "na" || f == "*"; }

double parse_double(const std::string& f, int line, const std::string& col) {
  const char* b = f.data();
  const char* e = f.data() + f.size();
  double v = 0.0;
  const auto res = std::from_chars(b, e, v);
  if (res.ec != std::errc() || res.ptr != e) {
    throw DataError("line " + std::to_string(line) + ": column " + col + ": not a number: '" + f + "'");
  }
  return v;
}

bool parse_flag(const std::string& f, int line, const std::string& col) {
  if (f == "1") return true;
  if (f == "0") return false;
  throw DataError("line " + std::to_string(line) + ": column " + col + " must be 0 or 1, got '" + f + "'");
}

// ---- JSON helpers ----

Eigen::MatrixXd matrix_from_json(const json& j, Eigen::Index rows, Eigen::Index cols, const std::string& name) {
  if (j.is_number()) {
    if (rows != cols) throw ConfigError(name + ": scalar shorthand needs a square matrix");
    return j.get<double>() * Eigen::MatrixXd::Identity(rows, cols);
  }
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows) {
    throw ConfigError(name + " must be a number or " + std::to_string(rows) + " rows");
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw ConfigError(name + " row " + std::to_string(r) + " must have " + std::to_string(cols) + " entries");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row[static_cast<std::size_t>(c)].get<double>();
  }
  return m;
}

Eigen::VectorXd vector_from_json(const json& j, Eigen::Index n, const std::string& name) {
  if (j.is_number()) return Eigen::VectorXd::Constant(n, j.get<double>());
  if (!j.is_array() || (n >= 0 && static_cast<Eigen::Index>(j.size()) != n)) {
    throw ConfigError(name + " must be a number or an array of " + std::to_string(n) + " entries");
  }
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  return v;
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

json vector_to_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

const char* group_key(int g) { return group_name(static_cast<OutcomeGroup>(g)); }

const std::set<std::string> kChainKeys = {"iterations",     "burn_in",         "thin",           "seed",
                                          "init_mode",      "store_full_params", "strata_columns", "outcome_columns",
                                          "binary_outcomes", "augmentation"};

bool is_prior_key(const std::string& k) {
  static const std::set<std::string> keys = {"a_11_1", "a_11_0",  "a_10_1", "Sigma_11_1", "Sigma_11_0", "Sigma_10_1",
                                             "d",      "V_eta",   "V_e",    "b",          "Lambda",     "r",
                                             "Gamma",  "g",       "h"};
  return keys.count(k) > 0;
}

}  // namespace

// ---- dataset CSV ----

TrialDataset parse_dataset_csv(std::istream& in, bool binary_outcomes, const std::string& origin) {
  std::string line;
  if (!std::getline(in, line)) throw DataError(origin + ": empty file");
  const auto header = split_csv_line(line);
  if (header.size() < 6 || header[0] != "cluster_id" || header[1] != "treat") {
    throw DataError(origin + ": header must start with cluster_id,treat");
  }
  std::size_t pos = 2;
  int nx = 0;
  while (pos < header.size() && header[pos] == "x" + std::to_string(nx + 1)) {
    ++nx;
    ++pos;
  }
  if (pos + 1 >= header.size() || header[pos] != "s" || header[pos + 1] != "r_s") {
    throw DataError(origin + ": expected columns x1..xq then s,r_s");
  }
  const std::size_t s_col = pos;
  pos += 2;
  int K = 0;
  while (pos < header.size() && header[pos] == "y" + std::to_string(K + 1)) {
    ++K;
    ++pos;
  }
  if (K == 0 || pos >= header.size() || header[pos] != "r_y" || pos + 1 != header.size()) {
    throw DataError(origin + ": expected columns y1..yK then r_y as the last column");
  }
  const std::size_t y_col = s_col + 2;
  const std::size_t ry_col = pos;

  TrialDataset ds;
  ds.K = K;
  ds.p = nx + 1;
  ds.binary_outcomes = binary_outcomes;
  std::map<std::string, std::size_t> index;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    if (f.size() != header.size()) {
      throw DataError(origin + ": line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                      " fields, got " + std::to_string(f.size()));
    }
    if (f[0].empty()) throw DataError(origin + ": line " + std::to_string(line_no) + ": empty cluster_id");
    IndividualRecord rec;
    rec.source_row = line_no;
    rec.treatment = parse_flag(f[1], line_no, "treat") ? 1 : 0;
    rec.covariates.resize(ds.p);
    rec.covariates(0) = 1.0;
    for (int j = 0; j < nx; ++j) {
      const std::string col = "x" + std::to_string(j + 1);
      if (is_absent(f[2 + j])) {
        throw DataError(origin + ": line " + std::to_string(line_no) + ": missing covariate " + col);
      }
      rec.covariates(j + 1) = parse_double(f[2 + j], line_no, col);
    }
    rec.r_s = parse_flag(f[s_col + 1], line_no, "r_s");
    if (!is_absent(f[s_col])) rec.survival = parse_flag(f[s_col], line_no, "s");
    rec.r_y = parse_flag(f[ry_col], line_no, "r_y");
    int present = 0;
    for (int k = 0; k < K; ++k) present += is_absent(f[y_col + k]) ? 0 : 1;
    if (present != 0 && present != K) {
      throw DataError(origin + ": line " + std::to_string(line_no) +
                      ": outcome components must be all present or all absent");
    }
    if (present == K) {
      rec.outcome_state = OutcomeState::Observed;
      rec.outcome.resize(K);
      for (int k = 0; k < K; ++k) rec.outcome(k) = parse_double(f[y_col + k], line_no, "y" + std::to_string(k + 1));
    } else if (rec.r_s && rec.survival.has_value() && !*rec.survival) {
      rec.outcome_state = OutcomeState::Truncated;
    } else {
      rec.outcome_state = OutcomeState::Missing;
    }
    auto it = index.find(f[0]);
    if (it == index.end()) {
      it = index.emplace(f[0], ds.clusters.size()).first;
      ClusterRecord cl;
      cl.cluster_id = f[0];
      cl.treatment = rec.treatment;
      ds.clusters.push_back(std::move(cl));
    }
    ds.clusters[it->second].individuals.push_back(std::move(rec));
  }
  return ds;
}

TrialDataset read_dataset_csv(const std::string& path, bool binary_outcomes) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path);
  return parse_dataset_csv(in, binary_outcomes, path);
}

void write_dataset_csv(const TrialDataset& ds, std::ostream& out) {
  out << "cluster_id,treat";
  for (int j = 1; j < ds.p; ++j) out << ",x" << j;
  out << ",s,r_s";
  for (int k = 1; k <= ds.K; ++k) out << ",y" << k;
  out << ",r_y\n";
  for (const auto& cl : ds.clusters) {
    for (const auto& rec : cl.individuals) {
      out << cl.cluster_id << ',' << cl.treatment;
      for (int j = 1; j < ds.p; ++j) out << ',' << fmt_num(rec.covariates(j));
      out << ',' << (rec.survival ? (*rec.survival ? "1" : "0") : "") << ',' << (rec.r_s ? 1 : 0);
      for (int k = 0; k < ds.K; ++k) {
        out << ',';
        if (rec.outcome_state == OutcomeState::Observed) out << fmt_num(rec.outcome(k));
      }
      out << ',' << (rec.r_y ? 1 : 0) << '\n';
    }
  }
}

void write_dataset_csv(const TrialDataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  write_dataset_csv(ds, out);
  if (!out) throw ConfigError("write failed for " + path);
}

// ---- fit settings ----

void apply_chain_json(const json& j, ChainConfig& c) {
  if (j.contains("iterations")) c.iterations = j.at("iterations").get<int>();
  if (j.contains("burn_in")) c.burn_in = j.at("burn_in").get<int>();
  if (j.contains("thin")) c.thin = j.at("thin").get<int>();
  if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("init_mode")) {
    const auto m = j.at("init_mode").get<std::string>();
    if (m == "random") {
      c.init_mode = InitMode::Random;
    } else if (m == "heuristic") {
      c.init_mode = InitMode::Heuristic;
    } else {
      throw ConfigError("init_mode must be 'random' or 'heuristic'");
    }
  }
  if (j.contains("store_full_params")) c.store_full_params = j.at("store_full_params").get<bool>();
  if (j.contains("augmentation")) {
    const auto m = j.at("augmentation").get<std::string>();
    if (m == "full") {
      c.augmentation = Augmentation::Full;
    } else if (m == "collapsed") {
      c.augmentation = Augmentation::Collapsed;
    } else {
      throw ConfigError("augmentation must be 'full' or 'collapsed'");
    }
  }
  if (j.contains("strata_columns")) c.model.strata_columns = j.at("strata_columns").get<std::vector<int>>();
  if (j.contains("outcome_columns")) c.model.outcome_columns = j.at("outcome_columns").get<std::vector<int>>();
}

FitSettings fit_settings_from_json(const json& j, int ps, int po, int K) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!kChainKeys.count(key) && !is_prior_key(key) && key != "scenario") {
      throw ConfigError("unknown config key '" + key + "'");
    }
  }
  FitSettings s;
  try {
    apply_chain_json(j, s.chain);
    if (j.contains("binary_outcomes")) s.binary_outcomes = j.at("binary_outcomes").get<bool>();
    s.prior = PriorSpec::diffuse(ps, po, K);
    auto& p = s.prior;
    for (int g = 0; g < kNumGroups; ++g) {
      const std::string a_key = std::string("a_") + group_key(g);
      const std::string s_key = std::string("Sigma_") + group_key(g);
      if (j.contains(a_key)) p.a[g] = vector_from_json(j.at(a_key), po * K, a_key);
      if (j.contains(s_key)) p.Sigma_a[g] = matrix_from_json(j.at(s_key), po * K, po * K, s_key);
    }
    if (j.contains("d")) p.d = j.at("d").get<double>();
    if (j.contains("V_eta")) p.V_eta = matrix_from_json(j.at("V_eta"), K, K, "V_eta");
    if (j.contains("V_e")) p.V_e = matrix_from_json(j.at("V_e"), K, K, "V_e");
    if (j.contains("b")) p.b = vector_from_json(j.at("b"), ps, "b");
    if (j.contains("Lambda")) p.Lambda = matrix_from_json(j.at("Lambda"), ps, ps, "Lambda");
    if (j.contains("r")) p.r = vector_from_json(j.at("r"), ps, "r");
    if (j.contains("Gamma")) p.Gamma = matrix_from_json(j.at("Gamma"), ps, ps, "Gamma");
    if (j.contains("g")) p.g = j.at("g").get<double>();
    if (j.contains("h")) p.h = j.at("h").get<double>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return s;
}

json fit_settings_to_json(const FitSettings& s) {
  json j;
  const auto& c = s.chain;
  j["iterations"] = c.iterations;
  j["burn_in"] = c.burn_in;
  j["thin"] = c.thin;
  j["seed"] = c.seed;
  j["init_mode"] = c.init_mode == InitMode::Random ? "random" : "heuristic";
  j["store_full_params"] = c.store_full_params;
  j["augmentation"] = c.augmentation == Augmentation::Full ? "full" : "collapsed";
  j["strata_columns"] = c.model.strata_columns;
  j["outcome_columns"] = c.model.outcome_columns;
  j["binary_outcomes"] = s.binary_outcomes;
  const auto& p = s.prior;
  for (int g = 0; g < kNumGroups; ++g) {
    if (p.a[g].size() > 0) j[std::string("a_") + group_key(g)] = vector_to_json(p.a[g]);
    if (p.Sigma_a[g].size() > 0) j[std::string("Sigma_") + group_key(g)] = matrix_to_json(p.Sigma_a[g]);
  }
  j["d"] = p.d;
  j["V_eta"] = matrix_to_json(p.V_eta);
  j["V_e"] = matrix_to_json(p.V_e);
  j["b"] = vector_to_json(p.b);
  j["Lambda"] = matrix_to_json(p.Lambda);
  j["r"] = vector_to_json(p.r);
  j["Gamma"] = matrix_to_json(p.Gamma);
  j["g"] = p.g;
  j["h"] = p.h;
  return j;
}

// ---- scenarios ----

ScenarioConfig scenario_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("scenario must be a JSON object");
  static const std::set<std::string> keys = {"name",      "n_clusters", "mean_cluster_size", "cv",      "K",
                                             "beta",      "gamma",      "alpha_11_1",        "alpha_11_0", "alpha_10_1",
                                             "Sigma_eta", "Sigma_e",    "phi2",              "m1",      "m2",
                                             "nmar_violation", "binary_mode", "seed"};
  for (const auto& [key, _] : j.items()) {
    if (!keys.count(key)) throw ConfigError("unknown scenario key '" + key + "'");
  }
  try {
    ScenarioConfig c;
    // Missing keys fall back to scenario I.
    if (j.contains("name") && j.at("name").is_string()) {
      const auto n = j.at("name").get<std::string>();
      const auto names = preset_names();
      c = std::find(names.begin(), names.end(), n) != names.end() ? scenario_preset(n) : scenario_preset("I");
      c.name = n;
    } else {
      c = scenario_preset("I");
      c.name = "custom";
    }
    if (j.contains("n_clusters")) c.n_clusters = j.at("n_clusters").get<int>();
    if (j.contains("mean_cluster_size")) c.mean_cluster_size = j.at("mean_cluster_size").get<double>();
    if (j.contains("cv")) c.cv = j.at("cv").get<double>();
    if (j.contains("K")) c.K = j.at("K").get<int>();
    if (j.contains("beta")) c.beta = vector_from_json(j.at("beta"), -1, "beta");
    if (j.contains("gamma")) c.gamma = vector_from_json(j.at("gamma"), -1, "gamma");
    for (int g = 0; g < kNumGroups; ++g) {
      const std::string key = std::string("alpha_") + group_key(g);
      if (j.contains(key)) c.alpha[g] = matrix_from_json(j.at(key), kSimCovariates, c.K, key);
    }
    if (j.contains("Sigma_eta")) c.Sigma_eta = matrix_from_json(j.at("Sigma_eta"), c.K, c.K, "Sigma_eta");
    if (j.contains("Sigma_e")) c.Sigma_e = matrix_from_json(j.at("Sigma_e"), c.K, c.K, "Sigma_e");
    if (j.contains("phi2")) c.phi2 = j.at("phi2").get<double>();
    if (j.contains("m1")) c.m1 = vector_from_json(j.at("m1"), kSimCovariates, "m1");
    if (j.contains("m2")) c.m2 = vector_from_json(j.at("m2"), kSimCovariates, "m2");
    if (j.contains("nmar_violation") && !j.at("nmar_violation").is_null()) {
      const auto& v = j.at("nmar_violation");
      NmarViolation nm = default_nmar_violation(c.K);
      if (v.contains("survival_coef")) nm.survival_coef = v.at("survival_coef").get<double>();
      if (v.contains("outcome_coef")) nm.outcome_coef = v.at("outcome_coef").get<double>();
      if (v.contains("outcome_shift")) nm.outcome_shift = vector_from_json(v.at("outcome_shift"), c.K, "outcome_shift");
      c.nmar_violation = nm;
    }
    if (j.contains("binary_mode")) c.binary_mode = j.at("binary_mode").get<bool>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  }
}

json scenario_to_json(const ScenarioConfig& c) {
  json j;
  j["name"] = c.name;
  j["n_clusters"] = c.n_clusters;
  j["mean_cluster_size"] = c.mean_cluster_size;
  j["cv"] = c.cv;
  j["K"] = c.K;
  j["beta"] = vector_to_json(c.beta);
  j["gamma"] = vector_to_json(c.gamma);
  for (int g = 0; g < kNumGroups; ++g) j[std::string("alpha_") + group_key(g)] = matrix_to_json(c.alpha[g]);
  j["Sigma_eta"] = matrix_to_json(c.Sigma_eta);
  j["Sigma_e"] = matrix_to_json(c.Sigma_e);
  j["phi2"] = c.phi2;
  j["m1"] = vector_to_json(c.m1);
  j["m2"] = vector_to_json(c.m2);
  if (c.nmar_violation) {
    j["nmar_violation"] = {{"survival_coef", c.nmar_violation->survival_coef},
                           {"outcome_coef", c.nmar_violation->outcome_coef},
                           {"outcome_shift", vector_to_json(c.nmar_violation->outcome_shift)}};
  } else {
    j["nmar_violation"] = nullptr;
  }
  j["binary_mode"] = c.binary_mode;
  return j;
}

ScenarioConfig load_scenario(const std::string& name_or_path) {
  const auto names = preset_names();
  if (std::find(names.begin(), names.end(), name_or_path) != names.end()) {
    const std::string path = std::string(CRTSACE_PRESET_DIR) + "/scenario_" + name_or_path + ".json";
    std::ifstream probe(path);
    if (probe) return scenario_from_json(read_json_file(path));
    return scenario_preset(name_or_path);
  }
  std::ifstream probe(name_or_path);
  if (probe) return scenario_from_json(read_json_file(name_or_path));
  return scenario_preset(name_or_path);  // throws with the list of presets
}

json truth_to_json(const GroundTruth& t) {
  json j;
  j["delta_I"] = vector_to_json(t.delta_I);
  j["delta_C"] = vector_to_json(t.delta_C);
  j["delta_I_mc_se"] = vector_to_json(t.delta_I_se);
  j["delta_C_mc_se"] = vector_to_json(t.delta_C_se);
  j["pi"] = {t.pi[0], t.pi[1], t.pi[2]};
  j["icc"] = {{"rho1", t.icc.rho1},
              {"rho2", t.icc.rho2},
              {"rho12_b", t.icc.rho12_between},
              {"rho12_w", t.icc.rho12_within}};
  j["population_individuals"] = t.individuals;
  j["population_clusters"] = t.clusters;
  return j;
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << text;
  if (!out) throw ConfigError("write failed for " + path);
}

// ---- tables ----

std::string summary_text(const PosteriorSummary& s) {
  std::ostringstream os;
  os << std::left << std::setw(12) << "Parameter" << std::right << std::setw(10) << "Mean" << std::setw(10)
     << "Median" << "   95% CrI\n";
  for (const auto& r : s.rows) {
    os << std::left << std::setw(12) << r.name << std::right << std::setw(10) << fixed(r.mean, 2) << std::setw(10)
       << fixed(r.median, 2) << "   [" << fixed(r.lower, 2) << ", " << fixed(r.upper, 2) << "]\n";
  }
  return os.str();
}

std::string summary_csv(const PosteriorSummary& s) {
  std::ostringstream os;
  os << "parameter,mean,median,lower_2.5,upper_97.5\n";
  for (const auto& r : s.rows) {
    os << r.name << ',' << fmt_num(r.mean) << ',' << fmt_num(r.median) << ',' << fmt_num(r.lower) << ','
       << fmt_num(r.upper) << '\n';
  }
  return os.str();
}

std::string geweke_text(const std::vector<GewekeRow>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(24) << "parameter" << std::right << std::setw(10) << "z" << std::setw(10) << "p"
     << '\n';
  for (const auto& r : rows) {
    os << std::left << std::setw(24) << r.name << std::right << std::setw(10) << fixed(r.result.z, 3)
       << std::setw(10) << fixed(r.result.p, 3) << '\n';
  }
  return os.str();
}

std::string geweke_csv(const std::vector<GewekeRow>& rows) {
  std::ostringstream os;
  os << "parameter,z,p\n";
  for (const auto& r : rows) os << r.name << ',' << fmt_num(r.result.z) << ',' << fmt_num(r.result.p) << '\n';
  return os.str();
}

std::string replicate_csv(const ReplicateTable& t) {
  std::ostringstream os;
  os << "parameter,truth,posterior_mean,percent_bias,coverage,mc_error,completed,sample_coverage\n";
  for (const auto& row : t.rows) {
    const auto& m = row.metrics;
    os << row.parameter << ',' << fmt_num(m.truth) << ',' << fmt_num(m.mean_of_means) << ','
       << (m.percent_bias ? fmt_num(*m.percent_bias) : "") << ',' << fmt_num(m.coverage) << ','
       << fmt_num(m.mc_error) << ',' << m.replicates << ','
       << (row.sample_coverage ? fmt_num(*row.sample_coverage) : "") << '\n';
  }
  return os.str();
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json RunManifest::to_json() const {
  json j;
  j["command"] = command;
  j["argv"] = argv;
  j["config"] = config;
  j["config_hash"] = hex64(fnv1a64(config.dump()));
  j["seed"] = seed;
  j["rng"] = "mt19937_64 per (seed, stream); fit: stream 0; replicate r: data stream r, chain stream r + 2^32";
  j["inputs"] = inputs;
  j["outputs"] = outputs;
  j["started_at"] = started_at;
  j["finished_at"] = finished_at;
  j["version"] = CRTSACE_VERSION;
  return j;
}

}  // namespace crtsace
