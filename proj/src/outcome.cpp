#include "crtsace/outcome.hpp"

#include <cmath>
#include <numbers>

namespace crtsace {

std::optional<OutcomeGroup> group_of(Stratum g, int arm) {
  if (g == Stratum::AlwaysSurvivor) return arm == 1 ? OutcomeGroup::AlwaysTreated : OutcomeGroup::AlwaysControl;
  if (g == Stratum::Protected && arm == 1) return OutcomeGroup::ProtectedTreated;
  return std::nullopt;
}

OutcomeGroup require_group(Stratum g, int arm) {
  auto grp = group_of(g, arm);
  if (!grp) {
    throw ConfigError("outcome undefined for stratum " + std::string(stratum_code(g)) + " under arm " +
                      std::to_string(arm));
  }
  return *grp;
}

const char* group_name(OutcomeGroup g) {
  switch (g) {
    case OutcomeGroup::AlwaysTreated:
      return "11_1";
    case OutcomeGroup::AlwaysControl:
      return "11_0";
    case OutcomeGroup::ProtectedTreated:
      return "10_1";
  }
  return "?";
}

Eigen::VectorXd linear_predictor(const Eigen::VectorXd& x, OutcomeGroup group, const OutcomeParams& params,
                                 int cluster) {
  Eigen::VectorXd m = params.coef(group).transpose() * x;
  if (params.eta.rows() > cluster) m += params.eta.row(cluster).transpose();
  return m;
}

Eigen::VectorXd linear_predictor(const Eigen::VectorXd& x, Stratum stratum, int arm, const OutcomeParams& params,
                                 int cluster) {
  return linear_predictor(x, require_group(stratum, arm), params, cluster);
}

double mvn_log_density(const Eigen::VectorXd& r, const Eigen::LLT<Eigen::MatrixXd>& cov_llt) {
  const Eigen::VectorXd z = cov_llt.matrixL().solve(r);
  const Eigen::MatrixXd& l = cov_llt.matrixLLT();
  double log_det = 0.0;
  for (Eigen::Index k = 0; k < l.rows(); ++k) log_det += 2.0 * std::log(l(k, k));
  return -0.5 * (static_cast<double>(r.size()) * std::log(2.0 * std::numbers::pi) + log_det + z.squaredNorm());
}

double outcome_log_density(const Eigen::VectorXd& y, const Eigen::VectorXd& x, OutcomeGroup group,
                           const OutcomeParams& params, int cluster) {
  Eigen::LLT<Eigen::MatrixXd> llt(params.Sigma_e);
  if (llt.info() != Eigen::Success) throw NumericalError("Sigma_e is not positive definite");
  return mvn_log_density(y - linear_predictor(x, group, params, cluster), llt);
}

double outcome_density(const Eigen::VectorXd& y, const Eigen::VectorXd& x, Stratum stratum, int arm,
                       const OutcomeParams& params, int cluster) {
  return std::exp(outcome_log_density(y, x, require_group(stratum, arm), params, cluster));
}

std::array<std::vector<int>, kNumGroups> group_members(const FitData& data, const ParameterState& state) {
  std::array<std::vector<int>, kNumGroups> out;
  for (int i = 0; i < data.n(); ++i) {
    if (!state.has_outcome(i) || !data.outcome_informative(i)) continue;
    const auto g = group_of(state.labels[i], data.arm_of(i));
    if (g) out[static_cast<int>(*g)].push_back(i);
  }
  return out;
}

namespace {

Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& m, const char* what) {
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  if (llt.info() != Eigen::Success) throw NumericalError(std::string(what) + " is not positive definite");
  return llt.solve(Eigen::MatrixXd::Identity(m.rows(), m.cols()));
}

Eigen::Map<const Eigen::VectorXd> vec(const Eigen::MatrixXd& m) { return {m.data(), m.size()}; }

}  // namespace

GaussianConditional alpha_conditional(const FitData& data, const ParameterState& state, const PriorSpec& prior,
                                      OutcomeGroup group, const std::vector<int>& members) {
  const int po = data.po();
  const int K = data.K;
  const int gi = static_cast<int>(group);
  const Eigen::MatrixXd prior_prec = spd_inverse(prior.Sigma_a[gi], "alpha prior covariance");
  const Eigen::MatrixXd se_inv = spd_inverse(state.outcome.Sigma_e, "Sigma_e");

  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(po, po);
  Eigen::MatrixXd xr = Eigen::MatrixXd::Zero(po, K);  // X^T (Y - eta)
  for (int i : members) {
    const auto x = data.xo.row(i).transpose();
    gram.selfadjointView<Eigen::Lower>().rankUpdate(x);
    xr.noalias() += x * (state.y.row(i) - state.outcome.eta.row(data.cluster[i]));
  }
  gram = gram.selfadjointView<Eigen::Lower>();

  GaussianConditional c;
  c.precision = prior_prec;
  // Sigma_e^{-1} (x) X^T X for column-major vec(alpha).
  for (int k = 0; k < K; ++k) {
    for (int l = 0; l < K; ++l) c.precision.block(k * po, l * po, po, po) += se_inv(k, l) * gram;
  }
  const Eigen::MatrixXd lin = xr * se_inv;
  c.shift = prior_prec * prior.a[gi] + vec(lin);
  return c;
}

void update_alpha(const FitData& data, ParameterState& state, const PriorSpec& prior, RngHandle& rng) {
  const auto members = group_members(data, state);
  for (int gi = 0; gi < kNumGroups; ++gi) {
    const auto group = static_cast<OutcomeGroup>(gi);
    const auto c = alpha_conditional(data, state, prior, group, members[gi]);
    const Eigen::VectorXd draw = sample_mvn_canonical(c.shift, c.precision, rng);
    state.outcome.coef(group) = Eigen::Map<const Eigen::MatrixXd>(draw.data(), data.po(), data.K);
  }
}

GaussianConditional eta_conditional(const FitData& data, const ParameterState& state, int cluster) {
  const Eigen::MatrixXd se_inv = spd_inverse(state.outcome.Sigma_e, "Sigma_e");
  const Eigen::MatrixXd seta_inv = spd_inverse(state.outcome.Sigma_eta, "Sigma_eta");
  const int arm = data.arm[cluster];
  Eigen::VectorXd resid_sum = Eigen::VectorXd::Zero(data.K);
  int count = 0;
  for (int i : data.members[cluster]) {
    if (!state.has_outcome(i) || !data.outcome_informative(i)) continue;
    const auto g = require_group(state.labels[i], arm);
    resid_sum += state.y.row(i).transpose() - state.outcome.coef(g).transpose() * data.xo.row(i).transpose();
    ++count;
  }
  GaussianConditional c;
  c.precision = seta_inv + static_cast<double>(count) * se_inv;
  c.shift = se_inv * resid_sum;
  return c;
}

void update_eta(const FitData& data, ParameterState& state, RngHandle& rng) {
  const Eigen::MatrixXd se_inv = spd_inverse(state.outcome.Sigma_e, "Sigma_e");
  const Eigen::MatrixXd seta_inv = spd_inverse(state.outcome.Sigma_eta, "Sigma_eta");
  std::array<Eigen::MatrixXd, kNumGroups> coef_t;
  for (int gi = 0; gi < kNumGroups; ++gi) coef_t[gi] = state.outcome.alpha[gi].transpose();
  Eigen::VectorXd resid_sum(data.K);
  for (int c = 0; c < data.n_clusters; ++c) {
    const int arm = data.arm[c];
    resid_sum.setZero();
    int count = 0;
    for (int i : data.members[c]) {
      if (!state.has_outcome(i) || !data.outcome_informative(i)) continue;
      const int gi = static_cast<int>(require_group(state.labels[i], arm));
      resid_sum.noalias() += state.y.row(i).transpose() - coef_t[gi] * data.xo.row(i).transpose();
      ++count;
    }
    const Eigen::MatrixXd precision = seta_inv + static_cast<double>(count) * se_inv;
    state.outcome.eta.row(c) = sample_mvn_canonical(se_inv * resid_sum, precision, rng).transpose();
  }
}

InverseWishartParams sigma_eta_conditional(const ParameterState& state, const PriorSpec& prior) {
  const auto& eta = state.outcome.eta;
  return {prior.d + static_cast<double>(eta.rows()), prior.V_eta + eta.transpose() * eta};
}

InverseWishartParams sigma_e_conditional(const FitData& data, const ParameterState& state, const PriorSpec& prior) {
  Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(data.K, data.K);
  int count = 0;
  for (int i = 0; i < data.n(); ++i) {
    if (!state.has_outcome(i) || !data.outcome_informative(i)) continue;
    const int c = data.cluster[i];
    const auto g = require_group(state.labels[i], data.arm[c]);
    const Eigen::VectorXd r = state.y.row(i).transpose() -
                              state.outcome.coef(g).transpose() * data.xo.row(i).transpose() -
                              state.outcome.eta.row(c).transpose();
    cross.selfadjointView<Eigen::Lower>().rankUpdate(r);
    ++count;
  }
  cross = cross.selfadjointView<Eigen::Lower>();
  return {prior.d + static_cast<double>(count), prior.V_e + cross};
}

void update_covariances(const FitData& data, ParameterState& state, const PriorSpec& prior, RngHandle& rng) {
  const auto pe = sigma_eta_conditional(state, prior);
  state.outcome.Sigma_eta = sample_inverse_wishart(pe.df, pe.scale, rng);
  if (data.binary) return;
  const auto pr = sigma_e_conditional(data, state, prior);
  state.outcome.Sigma_e = sample_inverse_wishart(pr.df, pr.scale, rng);
}

IccSet compute_iccs(const Eigen::MatrixXd& sigma_eta, const Eigen::MatrixXd& sigma_e) {
  if (sigma_eta.rows() != 2 || sigma_e.rows() != 2) throw ConfigError("compute_iccs: K = 2 required");
  if (!SpdMatrix::is_spd(sigma_eta) || !SpdMatrix::is_spd(sigma_e)) {
    throw NumericalError("compute_iccs: covariance inputs must be SPD");
  }
  const double t1 = sigma_eta(0, 0) + sigma_e(0, 0);
  const double t2 = sigma_eta(1, 1) + sigma_e(1, 1);
  if (!(t1 > 0.0) || !(t2 > 0.0)) throw NumericalError("compute_iccs: zero total variance");
  const double denom = std::sqrt(t1) * std::sqrt(t2);
  IccSet icc;
  icc.rho1 = sigma_eta(0, 0) / t1;
  icc.rho2 = sigma_eta(1, 1) / t2;
  icc.rho12_between = sigma_eta(0, 1) / denom;
  icc.rho12_within = (sigma_eta(0, 1) + sigma_e(0, 1)) / denom;
  return icc;
}

IccSet compute_iccs(const SpdMatrix& sigma_eta, const SpdMatrix& sigma_e) {
  return compute_iccs(sigma_eta.matrix(), sigma_e.matrix());
}

Eigen::VectorXd impute_missing_outcome(const Eigen::VectorXd& x, Stratum stratum, int arm,
                                       const OutcomeParams& params, int cluster, RngHandle& rng) {
  const auto group = require_group(stratum, arm);
  return sample_mvn(linear_predictor(x, group, params, cluster), params.Sigma_e, rng);
}

}  // namespace crtsace
