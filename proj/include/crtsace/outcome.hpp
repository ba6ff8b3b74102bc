// Stratum- and arm-specific multivariate linear mixed outcome models with a
// shared cluster random effect:
//   Y_ij(z) = alpha_{g,z}^T x_ij + eta_i + e_ij,
//   eta_i ~ N(0, Sigma_eta),  e_ij ~ N(0, Sigma_e).
#pragma once

#include "crtsace/model.hpp"
#include "crtsace/rand_dist.hpp"
#include "crtsace/strata.hpp"

namespace crtsace {

struct IccSet {
  double rho1 = 0.0;
  double rho2 = 0.0;
  double rho12_between = 0.0;
  double rho12_within = 0.0;
};

/// x'alpha_g + eta_i. Throws ConfigError if (stratum, arm) has no outcome.
Eigen::VectorXd linear_predictor(const Eigen::VectorXd& x, Stratum stratum, int arm, const OutcomeParams& params,
                                 int cluster);
Eigen::VectorXd linear_predictor(const Eigen::VectorXd& x, OutcomeGroup group, const OutcomeParams& params,
                                 int cluster);

/// MVN density of y around the linear predictor with covariance Sigma_e,
/// conditional on eta_i.
double outcome_density(const Eigen::VectorXd& y, const Eigen::VectorXd& x, Stratum stratum, int arm,
                       const OutcomeParams& params, int cluster);
double outcome_log_density(const Eigen::VectorXd& y, const Eigen::VectorXd& x, OutcomeGroup group,
                           const OutcomeParams& params, int cluster);

/// log N(r; 0, cov) for a residual r, using a precomputed Cholesky factor.
double mvn_log_density(const Eigen::VectorXd& r, const Eigen::LLT<Eigen::MatrixXd>& cov_llt);

/// Members of each outcome group under the current labels and survival.
std::array<std::vector<int>, kNumGroups> group_members(const FitData& data, const ParameterState& state);

/// Full conditional of vec(alpha_g): responses y - eta_i of the group's
/// members, residual covariance Sigma_e (GLS conjugate update).
GaussianConditional alpha_conditional(const FitData& data, const ParameterState& state, const PriorSpec& prior,
                                      OutcomeGroup group, const std::vector<int>& members);
void update_alpha(const FitData& data, ParameterState& state, const PriorSpec& prior, RngHandle& rng);

/// Full conditional of eta_i: precision Sigma_eta^{-1} + n_i* Sigma_e^{-1}.
GaussianConditional eta_conditional(const FitData& data, const ParameterState& state, int cluster);
void update_eta(const FitData& data, ParameterState& state, RngHandle& rng);

struct InverseWishartParams {
  double df = 0.0;
  Eigen::MatrixXd scale;
};

InverseWishartParams sigma_eta_conditional(const ParameterState& state, const PriorSpec& prior);
InverseWishartParams sigma_e_conditional(const FitData& data, const ParameterState& state, const PriorSpec& prior);
/// Sigma_eta then Sigma_e (the latter skipped for binary outcomes, whose
/// residual covariance is a correlation matrix).
void update_covariances(const FitData& data, ParameterState& state, const PriorSpec& prior, RngHandle& rng);

/// Outcome-specific, between-participant/between-outcome, and
/// within-participant ICCs (K = 2). Throws NumericalError unless both
/// inputs are SPD.
IccSet compute_iccs(const Eigen::MatrixXd& sigma_eta, const Eigen::MatrixXd& sigma_e);
IccSet compute_iccs(const SpdMatrix& sigma_eta, const SpdMatrix& sigma_e);

/// Draw y ~ N(linear predictor, Sigma_e).
Eigen::VectorXd impute_missing_outcome(const Eigen::VectorXd& x, Stratum stratum, int arm,
                                       const OutcomeParams& params, int cluster, RngHandle& rng);

}  // namespace crtsace
