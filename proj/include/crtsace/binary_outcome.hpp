// Bivariate Probit random-effects outcome model. Each binary component is
// the sign of a latent U = a_{g,z}^T x + eta_i + e, e ~ N(0, R(rho_e)) with R a
// unit-diagonal correlation matrix. The latent U plays the role of the
// continuous outcome in the shared alpha/eta/Sigma_eta updates.
#pragma once

#include "crtsace/model.hpp"
#include "crtsace/rand_dist.hpp"

namespace crtsace {

inline constexpr int kRhoGridSize = 199;
inline constexpr double kRhoGridBound = 0.99;

/// P(Y_k = 1) = Phi(linear predictor).
double binary_success_probability(double linear_predictor);

/// P(Y = y) for a K = 2 binary outcome with latent mean `mean` and residual
/// correlation rho.
double binary_orthant_probability(const Eigen::VectorXd& y, const Eigen::VectorXd& mean, double rho);

Eigen::MatrixXd correlation_matrix(double rho);

/// Grid of candidate residual correlations: 199 interior points of
/// (-0.99, 0.99).
std::vector<double> rho_grid();

/// Unnormalized log posterior of rho_e on the grid (uniform prior) given
/// latent residual sums of squares.
std::vector<double> rho_log_posterior(double s11, double s22, double s12, double n);

/// Redraw U for individuals with an observed binary outcome from the
/// bivariate normal restricted to the observed orthant (two coordinate
/// sweeps of univariate truncated normals).
void draw_binary_latents(const FitData& data, ParameterState& state, RngHandle& rng);

/// Griddy-Gibbs update of rho_e; also resets Sigma_e to R(rho_e).
void update_rho_e(const FitData& data, ParameterState& state, RngHandle& rng);

/// Latent refresh followed by the rho_e update. Throws ConfigError on
/// continuous data.
void binary_latent_step(const FitData& data, ParameterState& state, RngHandle& rng);

}  // namespace crtsace
