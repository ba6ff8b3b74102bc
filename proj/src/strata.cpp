#include "crtsace/strata.hpp"

#include <cmath>
#include <limits>

namespace crtsace {

StrataProbs strata_probabilities_from_predictors(double eta_beta, double eta_gamma) {
  StrataProbs p;
  p.p00 = normal_cdf(eta_beta);
  const double alive = normal_cdf(-eta_beta);
  p.p10 = alive * normal_cdf(eta_gamma);
  p.p11 = alive * normal_cdf(-eta_gamma);
  return p;
}

StrataProbs strata_probabilities(const Eigen::VectorXd& x, const StrataParams& params, int cluster) {
  const double chi = params.chi.size() > cluster ? params.chi(cluster) : 0.0;
  return strata_probabilities_from_predictors(x.dot(params.beta) + chi, x.dot(params.gamma) + chi);
}

StrataLogProbs strata_log_probabilities(double eta_beta, double eta_gamma) {
  StrataLogProbs l;
  l.l00 = log_normal_cdf(eta_beta);
  const double alive = log_normal_cdf(-eta_beta);
  l.l10 = alive + log_normal_cdf(eta_gamma);
  l.l11 = alive + log_normal_cdf(-eta_gamma);
  return l;
}

double prob_never_given_control_dead(const StrataProbs& probs) {
  const double denom = probs.p00 + probs.p10;
  if (!(denom > 0.0)) {
    throw NumericalError("control-arm death has zero probability under the strata model");
  }
  return probs.p00 / denom;
}

double prob_always_given_treated_alive(const StrataProbs& probs, double f11, double f10) {
  const double w11 = probs.p11 * f11;
  const double w10 = probs.p10 * f10;
  if (!(w11 + w10 > 0.0)) {
    throw NumericalError("treated survivor has zero likelihood under both candidate strata");
  }
  return w11 / (w11 + w10);
}

double prob_always_from_log_weights(double log_w11, double log_w10) {
  constexpr double ninf = -std::numeric_limits<double>::infinity();
  if (log_w11 == ninf && log_w10 == ninf) {
    throw NumericalError("treated survivor has zero likelihood under both candidate strata");
  }
  if (std::isnan(log_w11) || std::isnan(log_w10)) throw NumericalError("NaN membership weight");
  // 1 / (1 + exp(log_w10 - log_w11)), evaluated without overflow.
  const double d = log_w10 - log_w11;
  if (d > 0.0) {
    const double e = std::exp(-d);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(d));
}

Stratum draw_membership_control_dead(const StrataProbs& probs, RngHandle& rng) {
  return rng.uniform() < prob_never_given_control_dead(probs) ? Stratum::NeverSurvivor
                                                                : Stratum::Protected;
}

Stratum draw_membership_treated_alive(const StrataProbs& probs, double f11, double f10, RngHandle& rng) {
  return rng.uniform() < prob_always_given_treated_alive(probs, f11, f10) ? Stratum::AlwaysSurvivor
                                                                            : Stratum::Protected;
}

Stratum draw_membership_prior(const StrataProbs& probs, RngHandle& rng) {
  const double u = rng.uniform();
  if (u < probs.p00) return Stratum::NeverSurvivor;
  if (u < probs.p00 + probs.p10) return Stratum::Protected;
  return Stratum::AlwaysSurvivor;
}

double strata_predictor_beta(const FitData& data, const StrataParams& params, int i) {
  return data.xs.row(i).dot(params.beta) + params.chi(data.cluster[i]);
}

double strata_predictor_gamma(const FitData& data, const StrataParams& params, int i) {
  return data.xs.row(i).dot(params.gamma) + params.chi(data.cluster[i]);
}

void update_latents(const FitData& data, ParameterState& state, RngHandle& rng) {
  const int n = data.n();
  const Eigen::VectorXd xb = data.xs * state.strata.beta;
  const Eigen::VectorXd xg = data.xs * state.strata.gamma;
  auto& q = state.latents.q;
  auto& w = state.latents.w;
  q.resize(n);
  w.resize(n);
  for (int i = 0; i < n; ++i) {
    const double chi = state.strata.chi(data.cluster[i]);
    const Stratum g = state.labels[i];
    if (g == Stratum::NeverSurvivor) {
      q(i) = sample_truncated_normal(xb(i) + chi, 1.0, 0.0, kInf, rng);
      w(i) = std::numeric_limits<double>::quiet_NaN();
    } else {
      // Q = 0 belongs to the non-positive branch; the open interval below
      // excludes it, which is immaterial for a continuous draw.
      q(i) = sample_truncated_normal(xb(i) + chi, 1.0, -kInf, 0.0, rng);
      if (g == Stratum::Protected) {
        w(i) = sample_truncated_normal(xg(i) + chi, 1.0, 0.0, kInf, rng);
      } else {
        w(i) = sample_truncated_normal(xg(i) + chi, 1.0, -kInf, 0.0, rng);
      }
    }
  }
}

Eigen::VectorXd GaussianConditional::mean() const { return precision.llt().solve(shift); }

Eigen::MatrixXd GaussianConditional::covariance() const {
  return precision.llt().solve(Eigen::MatrixXd::Identity(precision.rows(), precision.cols()));
}

namespace {

Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& m) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) throw NumericalError("prior covariance is not positive definite");
  return llt.solve(Eigen::MatrixXd::Identity(m.rows(), m.cols()));
}

}  // namespace

GaussianConditional beta_conditional(const FitData& data, const ParameterState& state, const PriorSpec& prior) {
  const Eigen::MatrixXd lambda_inv = spd_inverse(prior.Lambda);
  GaussianConditional c;
  c.precision = lambda_inv + data.xs_gram;
  c.shift = lambda_inv * prior.b;
  Eigen::VectorXd resp(data.n());
  for (int i = 0; i < data.n(); ++i) {
    resp(i) = data.strata_informative(i) ? state.latents.q(i) - state.strata.chi(data.cluster[i]) : 0.0;
  }
  c.shift.noalias() += data.xs.transpose() * resp;
  return c;
}

GaussianConditional gamma_conditional(const FitData& data, const ParameterState& state, const PriorSpec& prior) {
  const Eigen::MatrixXd gamma_inv = spd_inverse(prior.Gamma);
  const int ps = data.ps();
  GaussianConditional c;
  c.precision = gamma_inv;
  c.shift = gamma_inv * prior.r;
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(ps, ps);
  for (int i = 0; i < data.n(); ++i) {
    if (!data.strata_informative(i) || state.labels[i] == Stratum::NeverSurvivor) continue;
    const auto x = data.xs.row(i).transpose();
    gram.selfadjointView<Eigen::Lower>().rankUpdate(x);
    c.shift.noalias() += x * (state.latents.w(i) - state.strata.chi(data.cluster[i]));
  }
  c.precision += gram.selfadjointView<Eigen::Lower>();
  return c;
}

void update_beta_gamma(const FitData& data, ParameterState& state, const PriorSpec& prior, RngHandle& rng) {
  const auto cb = beta_conditional(data, state, prior);
  state.strata.beta = sample_mvn_canonical(cb.shift, cb.precision, rng);
  const auto cg = gamma_conditional(data, state, prior);
  state.strata.gamma = sample_mvn_canonical(cg.shift, cg.precision, rng);
}

InverseGammaParams phi2_conditional(const ParameterState& state, const PriorSpec& prior) {
  const auto& chi = state.strata.chi;
  return {prior.g + 0.5 * static_cast<double>(chi.size()), prior.h + 0.5 * chi.squaredNorm()};
}

NormalParams chi_conditional(const FitData& data, const ParameterState& state, int cluster) {
  double precision = 1.0 / state.strata.phi2;
  double sum = 0.0;
  for (int i : data.members[cluster]) {
    if (!data.strata_informative(i)) continue;
    const auto x = data.xs.row(i);
    precision += 1.0;
    sum += state.latents.q(i) - x.dot(state.strata.beta);
    if (state.labels[i] != Stratum::NeverSurvivor) {
      precision += 1.0;
      sum += state.latents.w(i) - x.dot(state.strata.gamma);
    }
  }
  return {sum / precision, 1.0 / precision};
}

void update_phi2(ParameterState& state, const PriorSpec& prior, RngHandle& rng) {
  const auto ig = phi2_conditional(state, prior);
  state.strata.phi2 = sample_inverse_gamma(ig.shape, ig.scale, rng);
}

void update_chi(const FitData& data, ParameterState& state, RngHandle& rng) {
  for (int c = 0; c < data.n_clusters; ++c) {
    const auto np = chi_conditional(data, state, c);
    state.strata.chi(c) = np.mean + std::sqrt(np.variance) * rng.normal();
  }
}

void update_chi_phi2(const FitData& data, ParameterState& state, const PriorSpec& prior, RngHandle& rng) {
  update_phi2(state, prior, rng);
  update_chi(data, state, rng);
}

}  // namespace crtsace
