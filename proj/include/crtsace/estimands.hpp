// Survivor individual-average (SIACE) and cluster-average (SCACE) causal
// effects: per-draw computation, posterior summaries, and cross-replicate
// simulation metrics.
#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "crtsace/model.hpp"
#include "crtsace/outcome.hpp"

namespace crtsace {

struct EstimandDraw {
  Eigen::VectorXd delta_I;
  Eigen::VectorXd delta_C;
  Eigen::VectorXd mu_I1, mu_I0;
  Eigen::VectorXd mu_C1, mu_C0;
};

/// Estimands over the current always-survivors A = {G = 11}.
///
/// Continuous outcomes: tau_ij = x_ij^T (alpha_{11,1} - alpha_{11,0}); eta_i
/// cancels. delta_I averages tau over A; delta_C averages the within-cluster
/// means over clusters with at least one always-survivor. Both are evaluated
/// through the corresponding covariate means, so equal covariate means give
/// bit-identical deltas. The mu terms add the cluster effects.
///
/// Binary outcomes: mu uses Phi(x^T a_{11,z} + eta_i) per individual and
/// delta = mu(1) - mu(0).
///
/// Throws NumericalError when A is empty.
EstimandDraw estimand_draw(const FitData& data, const ParameterState& state);

/// One kept iteration of a chain.
struct ChainResult {
  int K = 2;
  std::vector<int> iteration;
  std::vector<EstimandDraw> estimands;
  std::vector<IccSet> iccs;
  std::vector<std::array<double, 3>> pi;  // pi00, pi10, pi11
  std::vector<std::string> param_names;   // only with store_full_params
  std::vector<Eigen::VectorXd> params;
  double wall_seconds = 0.0;

  std::size_t size() const { return iteration.size(); }
  /// Scalar columns of the draws file, in file order (without `iter`).
  std::vector<std::string> scalar_names() const;
  std::vector<double> series(const std::string& name) const;
};

struct SummaryRow {
  std::string name;
  double mean = 0.0;
  double median = 0.0;
  double lower = 0.0;  // 2.5%
  double upper = 0.0;  // 97.5%
};

struct PosteriorSummary {
  std::vector<SummaryRow> rows;
  const SummaryRow& row(const std::string& name) const;
};

/// Quantile by linear interpolation between order statistics, position
/// (n - 1) * prob.
double quantile_sorted(const std::vector<double>& sorted, double prob);

SummaryRow summarize_series(const std::string& name, std::vector<double> values);
PosteriorSummary summarize(const ChainResult& chain);

struct ReplicateEstimate {
  double mean = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

struct ReplicateMetrics {
  double truth = 0.0;
  double mean_of_means = 0.0;
  std::optional<double> percent_bias;  // absent when truth == 0
  double absolute_bias = 0.0;
  double coverage = 0.0;
  double mc_error = 0.0;
  int replicates = 0;
};

ReplicateMetrics replicate_metrics(const std::vector<ReplicateEstimate>& estimates, double truth);

}  // namespace crtsace
