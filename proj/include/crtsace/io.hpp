// Files: the dataset CSV, JSON configs, summary tables, and run manifests.
//
// Dataset CSV columns: cluster_id,treat,x1..x{p-1},s,r_s,y1..yK,r_y. The
// intercept is implicit (prepended on load). Absent values are empty fields
// ("NA" is also accepted). Decedents carry s=0, r_y=1 and empty outcomes.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crtsace/diagnostics.hpp"
#include "crtsace/gibbs.hpp"
#include "crtsace/simgen.hpp"
#include "json.hpp"

namespace crtsace {

using json = nlohmann::json;

/// Parses the dataset CSV. Syntax problems throw DataError naming the line;
/// structural rules are left to validate_dataset.
TrialDataset read_dataset_csv(const std::string& path, bool binary_outcomes = false);
TrialDataset parse_dataset_csv(std::istream& in, bool binary_outcomes = false, const std::string& origin = "<input>");
void write_dataset_csv(const TrialDataset& ds, const std::string& path);
void write_dataset_csv(const TrialDataset& ds, std::ostream& out);

/// Everything `fit` needs besides the data.
struct FitSettings {
  ChainConfig chain;
  PriorSpec prior;  // empty fields are filled from PriorSpec::diffuse
  bool binary_outcomes = false;
};

/// Flat JSON object with ChainConfig and PriorSpec field names, e.g.
/// {"iterations": 4000, "burn_in": 1000, "seed": 3, "Lambda": 100, "d": 3}.
/// Matrices accept a scalar (times identity) or nested arrays; vectors accept
/// a scalar (constant) or an array. Unknown keys are rejected.
FitSettings fit_settings_from_json(const json& j, int ps, int po, int K);
json fit_settings_to_json(const FitSettings& s);
/// Applies only the chain keys of `j` (ignores prior keys).
void apply_chain_json(const json& j, ChainConfig& c);

ScenarioConfig scenario_from_json(const json& j);
json scenario_to_json(const ScenarioConfig& c);
/// Preset file presets/<name>.json when present, else the built-in preset.
ScenarioConfig load_scenario(const std::string& name_or_path);

json truth_to_json(const GroundTruth& t);

json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

/// Table 5 layout: Parameter, Mean, Median, 95% CrI.
std::string summary_text(const PosteriorSummary& s);
std::string summary_csv(const PosteriorSummary& s);
std::string geweke_text(const std::vector<GewekeRow>& rows);
std::string geweke_csv(const std::vector<GewekeRow>& rows);
/// parameter,truth,posterior_mean,percent_bias,coverage,mc_error,completed,sample_coverage
std::string replicate_csv(const ReplicateTable& t);

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(const std::string& bytes);
std::string hex64(std::uint64_t v);

struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  json config;  // resolved configuration, enough to rerun
  std::uint64_t seed = 0;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::string started_at;
  std::string finished_at;

  json to_json() const;
};

/// UTC timestamp, ISO 8601 with seconds.
std::string utc_now();

}  // namespace crtsace
