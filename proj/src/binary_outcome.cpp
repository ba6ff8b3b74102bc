#include "crtsace/binary_outcome.hpp"

#include <algorithm>
#include <cmath>

#include "crtsace/outcome.hpp"

namespace crtsace {

double binary_success_probability(double linear_predictor) { return normal_cdf(linear_predictor); }

double binary_orthant_probability(const Eigen::VectorXd& y, const Eigen::VectorXd& mean, double rho) {
  if (y.size() != 2 || mean.size() != 2) throw ConfigError("binary outcomes require K = 2");
  const double s1 = y(0) > 0.5 ? 1.0 : -1.0;
  const double s2 = y(1) > 0.5 ? 1.0 : -1.0;
  return bivariate_normal_cdf(s1 * mean(0), s2 * mean(1), s1 * s2 * rho);
}

Eigen::MatrixXd correlation_matrix(double rho) {
  Eigen::MatrixXd r(2, 2);
  r << 1.0, rho, rho, 1.0;
  return r;
}

std::vector<double> rho_grid() {
  std::vector<double> g(kRhoGridSize);
  const double step = 2.0 * kRhoGridBound / (kRhoGridSize + 1);
  for (int k = 0; k < kRhoGridSize; ++k) g[k] = -kRhoGridBound + step * (k + 1);
  return g;
}

std::vector<double> rho_log_posterior(double s11, double s22, double s12, double n) {
  const auto grid = rho_grid();
  std::vector<double> lp(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double rho = grid[k];
    const double det = 1.0 - rho * rho;
    lp[k] = -0.5 * n * std::log(det) - (s11 - 2.0 * rho * s12 + s22) / (2.0 * det);
  }
  return lp;
}

void draw_binary_latents(const FitData& data, ParameterState& state, RngHandle& rng) {
  const double rho = state.outcome.rho_e;
  const double cond_sd = std::sqrt(1.0 - rho * rho);
  for (int i = 0; i < data.n(); ++i) {
    const ObservedCell cell = data.cell[i];
    if (cell != ObservedCell::O11 && cell != ObservedCell::O01) continue;
    const int c = data.cluster[i];
    const auto g = require_group(state.labels[i], data.arm[c]);
    const Eigen::VectorXd m = linear_predictor(data.xo.row(i).transpose(), g, state.outcome, c);
    double u[2] = {state.y(i, 0), state.y(i, 1)};
    const bool pos[2] = {data.y_obs(i, 0) > 0.5, data.y_obs(i, 1) > 0.5};
    // Make the starting point consistent with the orthant.
    for (int k = 0; k < 2; ++k) {
      if (!std::isfinite(u[k]) || (u[k] > 0.0) != pos[k]) {
        u[k] = pos[k] ? sample_truncated_normal(m(k), 1.0, 0.0, kInf, rng)
                      : sample_truncated_normal(m(k), 1.0, -kInf, 0.0, rng);
      }
    }
    for (int sweep = 0; sweep < 2; ++sweep) {
      for (int k = 0; k < 2; ++k) {
        const int o = 1 - k;
        const double cm = m(k) + rho * (u[o] - m(o));
        u[k] = pos[k] ? sample_truncated_normal(cm, cond_sd, 0.0, kInf, rng)
                      : sample_truncated_normal(cm, cond_sd, -kInf, 0.0, rng);
      }
    }
    state.y(i, 0) = u[0];
    state.y(i, 1) = u[1];
    state.y_bin(i, 0) = pos[0] ? 1.0 : 0.0;
    state.y_bin(i, 1) = pos[1] ? 1.0 : 0.0;
  }
}

void update_rho_e(const FitData& data, ParameterState& state, RngHandle& rng) {
  double s11 = 0.0, s22 = 0.0, s12 = 0.0, n = 0.0;
  for (int i = 0; i < data.n(); ++i) {
    if (!state.has_outcome(i) || !data.outcome_informative(i)) continue;
    const int c = data.cluster[i];
    const auto g = require_group(state.labels[i], data.arm[c]);
    const Eigen::VectorXd m = linear_predictor(data.xo.row(i).transpose(), g, state.outcome, c);
    const double r1 = state.y(i, 0) - m(0);
    const double r2 = state.y(i, 1) - m(1);
    s11 += r1 * r1;
    s22 += r2 * r2;
    s12 += r1 * r2;
    n += 1.0;
  }
  const auto grid = rho_grid();
  auto lp = rho_log_posterior(s11, s22, s12, n);
  const double mx = *std::max_element(lp.begin(), lp.end());
  double total = 0.0;
  for (double& v : lp) {
    v = std::exp(v - mx);
    total += v;
  }
  double u = rng.uniform() * total;
  std::size_t pick = grid.size() - 1;
  for (std::size_t k = 0; k < grid.size(); ++k) {
    u -= lp[k];
    if (u <= 0.0) {
      pick = k;
      break;
    }
  }
  state.outcome.rho_e = grid[pick];
  state.outcome.Sigma_e = correlation_matrix(state.outcome.rho_e);
}

void binary_latent_step(const FitData& data, ParameterState& state, RngHandle& rng) {
  if (!data.binary) throw ConfigError("binary_latent_step requires binary outcomes");
  draw_binary_latents(data, state, rng);
  update_rho_e(data, state, rng);
}

}  // namespace crtsace
