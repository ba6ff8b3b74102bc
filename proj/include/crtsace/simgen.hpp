// Synthetic cluster-randomized trials with death truncation and nested
// missingness, a large-population truth oracle, and the replication harness.
//
// Every individual carries covariates (1, X1, X2, N_i) with X1 ~ N(0, 100),
// X2 ~ U(-10, 10) and N_i the cluster size. The strata model uses the first
// beta.size() of these, the outcome and missingness models use all four.
#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "crtsace/estimands.hpp"
#include "crtsace/gibbs.hpp"
#include "crtsace/model.hpp"
#include "crtsace/outcome.hpp"

namespace crtsace {

inline constexpr int kSimCovariates = 4;  // intercept, X1, X2, cluster size

/// Departure from nested MAR: a hidden u ~ N(0, 1) enters both missingness
/// predictors and shifts treated-arm potential outcomes. The emitted dataset
/// omits u.
struct NmarViolation {
  double survival_coef = 0.0;  // added to the R_S predictor as coef * u
  double outcome_coef = 0.0;   // added to the R_Y predictor as coef * u
  Eigen::VectorXd outcome_shift;  // K-vector; Y(1) += shift * u
};

struct ScenarioConfig {
  std::string name;
  int n_clusters = 60;
  double mean_cluster_size = 25.0;
  double cv = 0.3;  // sd(N_i) / mean
  int K = 2;
  Eigen::VectorXd beta;
  Eigen::VectorXd gamma;
  std::array<Eigen::MatrixXd, kNumGroups> alpha;  // each 4 x K
  Eigen::MatrixXd Sigma_eta;
  Eigen::MatrixXd Sigma_e;
  double phi2 = 1.0;
  Eigen::VectorXd m1;  // length 4
  Eigen::VectorXd m2;  // length 4
  std::optional<NmarViolation> nmar_violation;
  bool binary_mode = false;
  std::uint64_t seed = 1;

  /// Throws ConfigError on bad dimensions, cv < 0, non-SPD blocks.
  void validate() const;
  /// Columns (of the 4 simulated covariates) used by the fitted models.
  ModelSpec model_spec() const;
};

/// Preset names, "I" .. "VIII".
std::vector<std::string> preset_names();
/// Built-in Table 2 scenario. Throws ConfigError listing valid names.
ScenarioConfig scenario_preset(const std::string& name);
/// Calibrated NMAR violation used by --nmar-violation.
NmarViolation default_nmar_violation(int K = 2);

/// Everything the generator knew but the dataset hides.
struct LatentRecord {
  std::vector<int> cluster_size;
  Eigen::VectorXd chi;       // per cluster
  Eigen::MatrixXd eta;       // per cluster
  std::vector<Stratum> stratum;  // per individual, dataset order
  std::vector<std::uint8_t> survival;
  Eigen::MatrixXd y1;  // Y(1), NaN when undefined
  Eigen::MatrixXd y0;  // Y(0), NaN when undefined
  Eigen::VectorXd u;   // hidden NMAR covariate (zero when off)
};

struct SimulatedTrial {
  TrialDataset data;
  LatentRecord latent;
};

/// Cluster sizes from a Gamma with the requested mean and CV, rounded and
/// floored at 1; cv = 0 gives round(mean) for every cluster.
std::vector<int> draw_cluster_sizes(int n_clusters, double mean, double cv, RngHandle& rng);

SimulatedTrial generate_dataset(const ScenarioConfig& config, RngHandle& rng);

struct GroundTruth {
  Eigen::VectorXd delta_I, delta_C;
  Eigen::VectorXd delta_I_se, delta_C_se;
  std::array<double, 3> pi{};  // pi00, pi10, pi11
  IccSet icc;
  long individuals = 0;
  int clusters = 0;
};

inline constexpr long kTruthMinIndividuals = 2000000;
inline constexpr int kTruthMinClusters = 20000;

/// Large-population oracle: simulate without missingness, keep the true
/// always-survivors, and average the conditional potential-outcome means
/// (noise integrated out) individual- and cluster-wise. MC standard errors
/// come from 20 batches of clusters. ICCs come from the config directly.
GroundTruth ground_truth(const ScenarioConfig& config, std::uint64_t seed, long min_individuals = kTruthMinIndividuals,
                         int min_clusters = kTruthMinClusters);

/// The plug-in estimands on one generated trial's own always-survivors
/// (true strata, true coefficients, noise integrated out).
struct SampleEstimands {
  Eigen::VectorXd delta_I, delta_C;
};
SampleEstimands sample_estimands(const ScenarioConfig& config, const SimulatedTrial& sim);

struct ReplicateOutcome {
  bool completed = false;
  std::string error;
  PosteriorSummary summary;
  SampleEstimands sample;
};

struct MetricsRow {
  std::string parameter;
  ReplicateMetrics metrics;
  // Delta rows only: share of credible intervals containing that
  // replicate's own sample estimand rather than the population truth.
  std::optional<double> sample_coverage;
};

struct ReplicateTable {
  std::vector<MetricsRow> rows;
  std::vector<ReplicateOutcome> replicates;
  GroundTruth truth;
  int completed = 0;
  int aborted = 0;
};

/// Parameters reported by the harness, in table order.
std::vector<std::string> replicate_parameters(int K);

/// Replicate r generates its dataset from stream r of `seed` and runs its
/// chain on stream r + 2^32. `jobs` bounds concurrent replicates.
ReplicateTable run_replicates(const ScenarioConfig& config, const PriorSpec& prior, const ChainConfig& fit, int reps,
                              std::uint64_t seed, int jobs, const GroundTruth& truth);
ReplicateTable run_replicates(const ScenarioConfig& config, const PriorSpec& prior, const ChainConfig& fit, int reps,
                              std::uint64_t seed, int jobs = 1);

}  // namespace crtsace
