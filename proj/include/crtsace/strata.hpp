// Nested Probit random-effects model for principal strata membership.
//
// Latent form: Q ~ N(x'beta + chi_i, 1) and, for non-never-survivors,
// W ~ N(x'gamma + chi_i, 1). G = 00 iff Q > 0; otherwise G = 10 iff W > 0 and
// G = 11 iff W <= 0. The implied probabilities are
//   p00 = Psi(x'beta + chi_i)
//   p10 = (1 - p00) Psi(x'gamma + chi_i)
//   p11 = (1 - p00) (1 - Psi(x'gamma + chi_i)).
#pragma once

#include "crtsace/model.hpp"
#include "crtsace/rand_dist.hpp"

namespace crtsace {

struct StrataProbs {
  double p00 = 0.0;
  double p10 = 0.0;
  double p11 = 0.0;
};

/// Log-probabilities, finite far into the tails where StrataProbs underflows.
struct StrataLogProbs {
  double l00 = 0.0;
  double l10 = 0.0;
  double l11 = 0.0;
};

StrataProbs strata_probabilities(const Eigen::VectorXd& x, const StrataParams& params, int cluster);
StrataProbs strata_probabilities_from_predictors(double eta_beta, double eta_gamma);
StrataLogProbs strata_log_probabilities(double eta_beta, double eta_gamma);

/// Probability that a control-arm decedent is a never-survivor.
double prob_never_given_control_dead(const StrataProbs& probs);
/// Probability that a treated survivor is an always-survivor, given outcome
/// densities under both candidate strata.
double prob_always_given_treated_alive(const StrataProbs& probs, double f11, double f10);
/// Same, from log weights log(p11 f11) and log(p10 f10).
double prob_always_from_log_weights(double log_w11, double log_w10);

/// Control arm, died: 00 with probability p00 / (p00 + p10), else 10.
Stratum draw_membership_control_dead(const StrataProbs& probs, RngHandle& rng);
/// Treated arm, survived: 11 with probability p11 f11 / (p11 f11 + p10 f10),
/// else 10.
Stratum draw_membership_treated_alive(const StrataProbs& probs, double f11, double f10, RngHandle& rng);
/// Unconditional draw from the strata probabilities.
Stratum draw_membership_prior(const StrataProbs& probs, RngHandle& rng);

/// Linear predictors x'beta + chi and x'gamma + chi for individual i.
double strata_predictor_beta(const FitData& data, const StrataParams& params, int i);
double strata_predictor_gamma(const FitData& data, const StrataParams& params, int i);

/// Refresh Q for everyone and W for individuals not in stratum 00, truncated
/// to the side implied by the current labels.
void update_latents(const FitData& data, ParameterState& state, RngHandle& rng);

/// Gaussian full conditional in canonical form: N(precision^{-1} shift,
/// precision^{-1}).
struct GaussianConditional {
  Eigen::VectorXd shift;
  Eigen::MatrixXd precision;

  Eigen::VectorXd mean() const;
  Eigen::MatrixXd covariance() const;
};

GaussianConditional beta_conditional(const FitData& data, const ParameterState& state, const PriorSpec& prior);
GaussianConditional gamma_conditional(const FitData& data, const ParameterState& state, const PriorSpec& prior);
void update_beta_gamma(const FitData& data, ParameterState& state, const PriorSpec& prior, RngHandle& rng);

struct InverseGammaParams {
  double shape = 0.0;
  double scale = 0.0;
};

InverseGammaParams phi2_conditional(const ParameterState& state, const PriorSpec& prior);

struct NormalParams {
  double mean = 0.0;
  double variance = 1.0;
};

NormalParams chi_conditional(const FitData& data, const ParameterState& state, int cluster);

void update_phi2(ParameterState& state, const PriorSpec& prior, RngHandle& rng);
void update_chi(const FitData& data, ParameterState& state, RngHandle& rng);
/// phi2 then chi, in sweep order.
void update_chi_phi2(const FitData& data, ParameterState& state, const PriorSpec& prior, RngHandle& rng);

}  // namespace crtsace
