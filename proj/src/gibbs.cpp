#include "crtsace/gibbs.hpp"

#include <algorithm>
#include <chrono>
#include <functional>
#include <cmath>
#include <limits>

#include "crtsace/binary_outcome.hpp"
#include "crtsace/outcome.hpp"
#include "crtsace/strata.hpp"

namespace crtsace {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<int> resolve_columns(const std::vector<int>& cols, int p, const char* what) {
  if (cols.empty()) {
    std::vector<int> all(p);
    for (int j = 0; j < p; ++j) all[j] = j;
    return all;
  }
  for (int j : cols) {
    if (j < 0 || j >= p) {
      throw ConfigError(std::string(what) + " column " + std::to_string(j) + " out of range [0, " +
                        std::to_string(p) + ")");
    }
  }
  return cols;
}

void check_spd(const Eigen::MatrixXd& m, Eigen::Index dim, const std::string& name) {
  if (m.rows() != dim || m.cols() != dim) {
    throw ConfigError(name + " must be " + std::to_string(dim) + "x" + std::to_string(dim));
  }
  if (!SpdMatrix::is_spd(m)) throw ConfigError(name + " must be symmetric positive definite");
}

void check_vec(const Eigen::VectorXd& v, Eigen::Index dim, const std::string& name) {
  if (v.size() != dim) throw ConfigError(name + " must have length " + std::to_string(dim));
  if (!v.allFinite()) throw ConfigError(name + " must be finite");
}

void require_finite(bool ok, int iteration, const char* param) {
  if (!ok) {
    throw NumericalError("iteration " + std::to_string(iteration) + ": non-finite draw in " + param);
  }
}

// Least squares with a tiny ridge so rank-deficient groups still give a
// usable starting point.
Eigen::MatrixXd least_squares(const FitData& data, const std::vector<int>& rows, const Eigen::MatrixXd& y) {
  const int po = data.po();
  Eigen::MatrixXd gram = 1e-6 * Eigen::MatrixXd::Identity(po, po);
  Eigen::MatrixXd xy = Eigen::MatrixXd::Zero(po, data.K);
  for (int i : rows) {
    const auto x = data.xo.row(i).transpose();
    gram.noalias() += x * x.transpose();
    xy.noalias() += x * y.row(i);
  }
  return gram.ldlt().solve(xy);
}

Eigen::MatrixXd residual_covariance(const FitData& data, const std::vector<int>& rows, const Eigen::MatrixXd& y,
                                    const Eigen::MatrixXd& coef) {
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(data.K, data.K);
  for (int i : rows) {
    const Eigen::VectorXd r = y.row(i).transpose() - coef.transpose() * data.xo.row(i).transpose();
    s.noalias() += r * r.transpose();
  }
  const double n = static_cast<double>(rows.size());
  if (n <= data.po() + 1) return Eigen::MatrixXd::Identity(data.K, data.K);
  s /= n;
  if (!SpdMatrix::is_spd(s)) return Eigen::MatrixXd::Identity(data.K, data.K);
  return s;
}

// Ridge-penalized probit MLE by Newton steps; the penalty keeps separated
// designs finite. Returns zeros when there are too few rows.
Eigen::VectorXd probit_fit(const Eigen::MatrixXd& x, const std::vector<int>& rows, const std::vector<char>& y) {
  const Eigen::Index p = x.cols();
  Eigen::VectorXd b = Eigen::VectorXd::Zero(p);
  if (static_cast<Eigen::Index>(rows.size()) <= p) return b;
  constexpr double kPenalty = 0.01;
  for (int iter = 0; iter < 50; ++iter) {
    Eigen::VectorXd grad = -kPenalty * b;
    Eigen::MatrixXd info = kPenalty * Eigen::MatrixXd::Identity(p, p);
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const auto xi = x.row(rows[k]).transpose();
      const double t = xi.dot(b);
      // d/dt log Phi(s t) = s phi(t) / Phi(s t), via the log cdf for stability.
      const double s = y[k] ? 1.0 : -1.0;
      const double lam = std::exp(std::log(normal_pdf(t)) - log_normal_cdf(s * t));
      grad += s * lam * xi;
      const double w = lam * (lam + s * t);
      info.noalias() += w * xi * xi.transpose();
    }
    const Eigen::VectorXd step = info.ldlt().solve(grad);
    if (!step.allFinite()) break;
    b += step;
    if (step.norm() < 1e-8) break;
  }
  return b.allFinite() ? b : Eigen::VectorXd::Zero(p);
}

// Heuristic starting point.
//   beta from the probit of death among treated individuals with known
//   survival (P(dead | Z = 1) = p00);
//   P(11 | alive, Z = 1, x) from the ratio of arm-wise survival probits;
//   alpha_{11,0} from control complete cases; alpha_{11,1} and alpha_{10,1}
//   from a hard-assignment two-component fit of treated complete cases,
//   seeded by that principal score;
//   gamma from the probit of the resulting protected flags.
void heuristic_start(const FitData& data, ParameterState& state) {
  const int po = data.po();
  const int K = data.K;
  const int n = data.n();
  std::vector<int> control, treated, treated_known, control_known;
  std::vector<char> treated_dead, control_dead;
  for (int i = 0; i < n; ++i) {
    const ObservedCell cell = data.cell[i];
    if (cell == ObservedCell::O01) control.push_back(i);
    if (cell == ObservedCell::O11) treated.push_back(i);
    if (cell == ObservedCell::UnknownSurvival) continue;
    const bool dead = cell == ObservedCell::O10 || cell == ObservedCell::O00;
    if (data.arm_of(i) == 1) {
      treated_known.push_back(i);
      treated_dead.push_back(dead ? 1 : 0);
    } else {
      control_known.push_back(i);
      control_dead.push_back(dead ? 1 : 0);
    }
  }
  auto& out = state.outcome;
  for (auto& a : out.alpha) a = Eigen::MatrixXd::Zero(po, K);
  out.Sigma_e = Eigen::MatrixXd::Identity(K, K);
  state.strata.beta = probit_fit(data.xs, treated_known, treated_dead);
  state.strata.gamma = Eigen::VectorXd::Zero(data.ps());
  const Eigen::VectorXd beta_control = probit_fit(data.xs, control_known, control_dead);

  // log P(11 | alive, Z=1, x) and log P(10 | alive, Z=1, x).
  std::vector<double> log_r11(n, 0.0), log_r10(n, 0.0);
  for (int i = 0; i < n; ++i) {
    const auto x = data.xs.row(i);
    const double l_alive_control = log_normal_cdf(-x.dot(beta_control));
    const double l_alive_treated = log_normal_cdf(-x.dot(state.strata.beta));
    const double r = std::clamp(std::exp(l_alive_control - l_alive_treated), 1e-6, 1.0 - 1e-6);
    log_r11[i] = std::log(r);
    log_r10[i] = std::log1p(-r);
  }

  std::vector<char> protected_flag(n, 0);
  for (int i : treated) protected_flag[i] = log_r10[i] > log_r11[i] ? 1 : 0;
  auto fit_gamma = [&] {
    std::vector<char> flags;
    for (int i : treated) flags.push_back(protected_flag[i]);
    state.strata.gamma = probit_fit(data.xs, treated, flags);
  };
  if (data.binary || treated.empty()) {
    fit_gamma();
    return;
  }

  if (!control.empty()) {
    out.coef(OutcomeGroup::AlwaysControl) = least_squares(data, control, data.y_obs);
    out.Sigma_e = residual_covariance(data, control, data.y_obs, out.coef(OutcomeGroup::AlwaysControl));
  }
  const Eigen::MatrixXd pooled = least_squares(data, treated, data.y_obs);
  out.coef(OutcomeGroup::AlwaysTreated) = pooled;
  out.coef(OutcomeGroup::ProtectedTreated) = pooled;
  const int min_size = po + 1;
  if (static_cast<int>(treated.size()) < 2 * min_size) {
    fit_gamma();
    return;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(out.Sigma_e);
  Eigen::MatrixXd a11 = pooled, a10 = pooled;
  for (int round = 0; round < 50; ++round) {
    std::vector<int> g11, g10;
    for (int i : treated) (protected_flag[i] ? g10 : g11).push_back(i);
    if (static_cast<int>(g11.size()) >= min_size) a11 = least_squares(data, g11, data.y_obs);
    if (static_cast<int>(g10.size()) >= min_size) a10 = least_squares(data, g10, data.y_obs);
    bool changed = false;
    for (int i : treated) {
      const auto x = data.xo.row(i).transpose();
      const double d11 = llt.matrixL().solve(data.y_obs.row(i).transpose() - a11.transpose() * x).squaredNorm();
      const double d10 = llt.matrixL().solve(data.y_obs.row(i).transpose() - a10.transpose() * x).squaredNorm();
      const char flag = 0.5 * d10 - log_r10[i] < 0.5 * d11 - log_r11[i] ? 1 : 0;
      if (flag != protected_flag[i]) {
        protected_flag[i] = flag;
        changed = true;
      }
    }
    if (!changed) break;
  }
  out.coef(OutcomeGroup::AlwaysTreated) = a11;
  out.coef(OutcomeGroup::ProtectedTreated) = a10;
  fit_gamma();
}

void record_pi(const ParameterState& state, std::array<double, 3>& pi) {
  pi = {0.0, 0.0, 0.0};
  for (Stratum g : state.labels) pi[static_cast<int>(g)] += 1.0;
  const double n = static_cast<double>(state.labels.size());
  for (double& v : pi) v /= n;
}

}  // namespace

FitData FitData::from_dataset(const TrialDataset& ds, const ModelSpec& spec) {
  const auto report = validate_dataset(ds);
  if (!report.ok()) throw DataError(report.to_string());
  const auto scols = resolve_columns(spec.strata_columns, ds.p, "strata");
  const auto ocols = resolve_columns(spec.outcome_columns, ds.p, "outcome");

  FitData d;
  d.n_clusters = static_cast<int>(ds.clusters.size());
  d.K = ds.K;
  d.binary = ds.binary_outcomes;
  const auto n = static_cast<Eigen::Index>(ds.total_individuals());
  d.xs.resize(n, static_cast<Eigen::Index>(scols.size()));
  d.xo.resize(n, static_cast<Eigen::Index>(ocols.size()));
  d.y_obs = Eigen::MatrixXd::Constant(n, ds.K, kNaN);
  d.members.resize(ds.clusters.size());
  Eigen::Index i = 0;
  for (int c = 0; c < d.n_clusters; ++c) {
    const auto& cl = ds.clusters[c];
    d.arm.push_back(cl.treatment);
    for (const auto& rec : cl.individuals) {
      for (std::size_t j = 0; j < scols.size(); ++j) d.xs(i, static_cast<Eigen::Index>(j)) = rec.covariates(scols[j]);
      for (std::size_t j = 0; j < ocols.size(); ++j) d.xo(i, static_cast<Eigen::Index>(j)) = rec.covariates(ocols[j]);
      d.cluster.push_back(c);
      d.cell.push_back(classify(rec, cl.treatment));
      if (rec.outcome_state == OutcomeState::Observed) d.y_obs.row(i) = rec.outcome.transpose();
      d.members[c].push_back(static_cast<int>(i));
      ++i;
    }
  }
  d.set_augmentation(d.augmentation);
  return d;
}

void FitData::set_augmentation(Augmentation mode) {
  augmentation = mode;
  xs_gram = Eigen::MatrixXd::Zero(ps(), ps());
  for (int r = 0; r < n(); ++r) {
    if (strata_informative(r)) xs_gram.selfadjointView<Eigen::Lower>().rankUpdate(xs.row(r).transpose());
  }
  xs_gram = xs_gram.selfadjointView<Eigen::Lower>();
}

PriorSpec PriorSpec::diffuse(int ps, int po, int K) {
  PriorSpec p;
  for (int g = 0; g < kNumGroups; ++g) {
    p.a[g] = Eigen::VectorXd::Zero(po * K);
    p.Sigma_a[g] = 1000.0 * Eigen::MatrixXd::Identity(po * K, po * K);
  }
  p.d = 2.0;
  p.V_eta = Eigen::MatrixXd::Identity(K, K);
  p.V_e = Eigen::MatrixXd::Identity(K, K);
  p.b = Eigen::VectorXd::Zero(ps);
  p.Lambda = 1000.0 * Eigen::MatrixXd::Identity(ps, ps);
  p.r = Eigen::VectorXd::Zero(ps);
  p.Gamma = 1000.0 * Eigen::MatrixXd::Identity(ps, ps);
  p.g = 0.001;
  p.h = 0.001;
  return p;
}

void PriorSpec::validate(int ps, int po, int K) const {
  for (int g = 0; g < kNumGroups; ++g) {
    const std::string tag = std::string("alpha_") + group_name(static_cast<OutcomeGroup>(g));
    check_vec(a[g], po * K, "prior mean a_" + tag.substr(6));
    check_spd(Sigma_a[g], po * K, "prior covariance Sigma_" + tag.substr(6));
  }
  if (!(d >= K)) throw ConfigError("IW degrees of freedom d must be >= K");
  check_spd(V_eta, K, "V_eta");
  check_spd(V_e, K, "V_e");
  check_vec(b, ps, "b");
  check_spd(Lambda, ps, "Lambda");
  check_vec(r, ps, "r");
  check_spd(Gamma, ps, "Gamma");
  if (!(g > 0.0) || !(h > 0.0)) throw ConfigError("IG hyperparameters g and h must be > 0");
}

void ChainConfig::validate() const {
  if (iterations <= 0) throw ConfigError("iterations must be positive");
  if (burn_in < 0) throw ConfigError("burn_in must be non-negative");
  if (burn_in >= iterations) throw ConfigError("burn_in must be smaller than iterations");
  if (thin < 1) throw ConfigError("thin must be >= 1");
}

const char* step_name(SweepStep s) {
  switch (s) {
    case SweepStep::Alpha: return "alpha";
    case SweepStep::Eta: return "eta";
    case SweepStep::SigmaEta: return "Sigma_eta";
    case SweepStep::SigmaE: return "Sigma_e";
    case SweepStep::BetaGamma: return "beta_gamma";
    case SweepStep::Phi2: return "phi2";
    case SweepStep::Chi: return "chi";
    case SweepStep::Membership: return "membership";
    case SweepStep::Estimands: return "estimands";
    case SweepStep::ImputeOutcomes: return "impute_outcomes";
    case SweepStep::ImputeUnknownSurvival: return "impute_unknown_survival";
    case SweepStep::Latents: return "latents";
  }
  return "?";
}

ParameterState init_state(const FitData& data, const PriorSpec& prior, const ChainConfig& config, RngHandle& rng) {
  const int n = data.n();
  const int K = data.K;
  const int po = data.po();
  const bool heuristic = config.init_mode == InitMode::Heuristic;
  ParameterState s;
  s.strata.chi = Eigen::VectorXd::Zero(data.n_clusters);
  s.strata.phi2 = 1.0;
  auto& out = s.outcome;
  out.Sigma_eta = Eigen::MatrixXd::Identity(K, K);
  out.eta = Eigen::MatrixXd::Zero(data.n_clusters, K);
  out.rho_e = 0.0;
  if (heuristic) {
    heuristic_start(data, s);
  } else {
    s.strata.beta = sample_mvn(prior.b, prior.Lambda, rng);
    s.strata.gamma = sample_mvn(prior.r, prior.Gamma, rng);
    for (int g = 0; g < kNumGroups; ++g) {
      const Eigen::VectorXd v = sample_mvn(prior.a[g], prior.Sigma_a[g], rng);
      out.alpha[g] = Eigen::Map<const Eigen::MatrixXd>(v.data(), po, K);
    }
    out.Sigma_e = Eigen::MatrixXd::Identity(K, K);
  }
  if (data.binary) out.Sigma_e = correlation_matrix(0.0);

  // Forced labels are deterministic. The others are random among the
  // admissible strata: uniform in random mode, and drawn from the
  // membership probabilities implied by the starting parameters in
  // heuristic mode.
  Eigen::LLT<Eigen::MatrixXd> llt(out.Sigma_e);
  s.labels.resize(n);
  s.alive.resize(n);
  for (int i = 0; i < n; ++i) {
    const int arm = data.arm_of(i);
    const int c = data.cluster[i];
    StrataLogProbs lp;
    if (heuristic) {
      lp = strata_log_probabilities(strata_predictor_beta(data, s.strata, i), strata_predictor_gamma(data, s.strata, i));
    } else {
      lp.l00 = lp.l10 = lp.l11 = 0.0;
    }
    auto pick = [&](double log_a, double log_b, Stratum a, Stratum b) {
      return rng.uniform() < prob_always_from_log_weights(log_a, log_b) ? a : b;
    };
    Stratum g = Stratum::AlwaysSurvivor;
    switch (data.cell[i]) {
      case ObservedCell::O10:
        g = Stratum::NeverSurvivor;
        break;
      case ObservedCell::O01:
        g = Stratum::AlwaysSurvivor;
        break;
      case ObservedCell::O11: {
        double f11 = 0.0, f10 = 0.0;
        if (heuristic && !data.binary) {
          const Eigen::VectorXd x = data.xo.row(i).transpose();
          const Eigen::VectorXd y = data.y_obs.row(i).transpose();
          f11 = mvn_log_density(y - linear_predictor(x, OutcomeGroup::AlwaysTreated, out, c), llt);
          f10 = mvn_log_density(y - linear_predictor(x, OutcomeGroup::ProtectedTreated, out, c), llt);
        }
        g = pick(lp.l11 + f11, lp.l10 + f10, Stratum::AlwaysSurvivor, Stratum::Protected);
        break;
      }
      case ObservedCell::O00:
        g = pick(lp.l00, lp.l10, Stratum::NeverSurvivor, Stratum::Protected);
        break;
      case ObservedCell::SurvivorMissingY:
        g = arm == 0 ? Stratum::AlwaysSurvivor
                     : pick(lp.l11, lp.l10, Stratum::AlwaysSurvivor, Stratum::Protected);
        break;
      case ObservedCell::UnknownSurvival:
        if (heuristic) {
          const StrataProbs p{std::exp(lp.l00), std::exp(lp.l10), std::exp(lp.l11)};
          g = draw_membership_prior(p, rng);
        } else {
          g = static_cast<Stratum>(rng.uniform_int(0, 2));
        }
        break;
    }
    s.labels[i] = g;
    s.alive[i] = survives(g, arm) ? 1 : 0;
  }

  s.y = Eigen::MatrixXd::Constant(n, K, kNaN);
  if (data.binary) s.y_bin = Eigen::MatrixXd::Constant(n, K, kNaN);
  for (int i = 0; i < n; ++i) {
    if (!s.alive[i]) continue;
    const int c = data.cluster[i];
    if (data.y_obs.row(i).allFinite()) {
      if (data.binary) {
        // Latents start at the orthant side; draw_binary_latents refines them.
        s.y_bin.row(i) = data.y_obs.row(i);
        for (int k = 0; k < K; ++k) s.y(i, k) = data.y_obs(i, k) > 0.5 ? 0.5 : -0.5;
      } else {
        s.y.row(i) = data.y_obs.row(i);
      }
    } else {
      s.y.row(i) = impute_missing_outcome(data.xo.row(i).transpose(), s.labels[i], data.arm[c], out, c, rng);
      if (data.binary) {
        for (int k = 0; k < K; ++k) s.y_bin(i, k) = s.y(i, k) > 0.0 ? 1.0 : 0.0;
      }
    }
  }
  if (data.binary) draw_binary_latents(data, s, rng);
  update_latents(data, s, rng);
  return s;
}

namespace {

StrataProbs two_way(Stratum a, Stratum b, double prob_a) {
  StrataProbs p;
  auto set = [&](Stratum g, double v) {
    (g == Stratum::NeverSurvivor ? p.p00 : g == Stratum::Protected ? p.p10 : p.p11) = v;
  };
  set(a, prob_a);
  set(b, 1.0 - prob_a);
  return p;
}

StrataProbs membership_conditional_impl(const FitData& data, const ParameterState& state, int i,
                                        const Eigen::LLT<Eigen::MatrixXd>* llt) {
  const int c = data.cluster[i];
  const int arm = data.arm[c];
  const ObservedCell cell = data.cell[i];
  if (cell == ObservedCell::O10) return {1.0, 0.0, 0.0};
  if (cell == ObservedCell::O01) return {0.0, 0.0, 1.0};
  if ((cell == ObservedCell::O11 || cell == ObservedCell::SurvivorMissingY) && arm == 0) return {0.0, 0.0, 1.0};
  const double eb = strata_predictor_beta(data, state.strata, i);
  const double eg = strata_predictor_gamma(data, state.strata, i);
  const auto lp = strata_log_probabilities(eb, eg);
  if (cell == ObservedCell::UnknownSurvival) return {std::exp(lp.l00), std::exp(lp.l10), std::exp(lp.l11)};
  if (cell == ObservedCell::O00) {
    // P(00 | dead, control) = p00 / (p00 + p10), on the log scale.
    return two_way(Stratum::NeverSurvivor, Stratum::Protected, prob_always_from_log_weights(lp.l00, lp.l10));
  }
  // Treated survivor: 11 vs 10.
  if (cell == ObservedCell::SurvivorMissingY && data.augmentation == Augmentation::Collapsed) {
    // The outcome is integrated out; it is imputed afterwards.
    return two_way(Stratum::AlwaysSurvivor, Stratum::Protected, prob_always_from_log_weights(lp.l11, lp.l10));
  }
  const auto& out = state.outcome;
  const Eigen::VectorXd x = data.xo.row(i).transpose();
  const Eigen::VectorXd m11 = linear_predictor(x, OutcomeGroup::AlwaysTreated, out, c);
  const Eigen::VectorXd m10 = linear_predictor(x, OutcomeGroup::ProtectedTreated, out, c);
  double f11 = 0.0, f10 = 0.0;
  if (data.binary) {
    const Eigen::VectorXd yb = state.y_bin.row(i).transpose();
    f11 = std::log(binary_orthant_probability(yb, m11, out.rho_e));
    f10 = std::log(binary_orthant_probability(yb, m10, out.rho_e));
  } else {
    const Eigen::VectorXd y = state.y.row(i).transpose();
    f11 = mvn_log_density(y - m11, *llt);
    f10 = mvn_log_density(y - m10, *llt);
  }
  return two_way(Stratum::AlwaysSurvivor, Stratum::Protected,
                 prob_always_from_log_weights(lp.l11 + f11, lp.l10 + f10));
}

}  // namespace

StrataProbs membership_conditional(const FitData& data, const ParameterState& state, int i) {
  Eigen::LLT<Eigen::MatrixXd> llt;
  if (!data.binary) llt.compute(state.outcome.Sigma_e);
  return membership_conditional_impl(data, state, i, &llt);
}

void refresh_membership(const FitData& data, ParameterState& state, RngHandle& rng) {
  Eigen::LLT<Eigen::MatrixXd> llt;
  if (!data.binary) {
    llt.compute(state.outcome.Sigma_e);
    if (llt.info() != Eigen::Success) throw NumericalError("Sigma_e is not positive definite");
  }
  for (int i = 0; i < data.n(); ++i) {
    const ObservedCell cell = data.cell[i];
    if (cell == ObservedCell::UnknownSurvival) continue;  // handled by impute_unknown_survival
    if (cell == ObservedCell::O10) {
      state.labels[i] = Stratum::NeverSurvivor;
      continue;
    }
    if (cell == ObservedCell::O01 || (data.arm_of(i) == 0 && cell != ObservedCell::O00)) {
      state.labels[i] = Stratum::AlwaysSurvivor;
      continue;
    }
    const auto p = membership_conditional_impl(data, state, i, &llt);
    if (cell == ObservedCell::O00) {
      state.labels[i] = rng.uniform() < p.p00 ? Stratum::NeverSurvivor : Stratum::Protected;
    } else {
      state.labels[i] = rng.uniform() < p.p11 ? Stratum::AlwaysSurvivor : Stratum::Protected;
    }
  }
}

void impute_missing_outcomes(const FitData& data, ParameterState& state, RngHandle& rng) {
  for (int i = 0; i < data.n(); ++i) {
    if (data.cell[i] != ObservedCell::SurvivorMissingY) continue;
    const int c = data.cluster[i];
    state.y.row(i) =
        impute_missing_outcome(data.xo.row(i).transpose(), state.labels[i], data.arm[c], state.outcome, c, rng)
            .transpose();
    if (data.binary) {
      for (int k = 0; k < data.K; ++k) state.y_bin(i, k) = state.y(i, k) > 0.0 ? 1.0 : 0.0;
    }
  }
}

void impute_unknown_survival(const FitData& data, ParameterState& state, RngHandle& rng) {
  for (int i = 0; i < data.n(); ++i) {
    if (data.cell[i] != ObservedCell::UnknownSurvival) continue;
    const int c = data.cluster[i];
    const int arm = data.arm[c];
    const auto probs = strata_probabilities_from_predictors(strata_predictor_beta(data, state.strata, i),
                                                            strata_predictor_gamma(data, state.strata, i));
    const Stratum g = draw_membership_prior(probs, rng);
    state.labels[i] = g;
    if (survives(g, arm)) {
      state.alive[i] = 1;
      state.y.row(i) =
          impute_missing_outcome(data.xo.row(i).transpose(), g, arm, state.outcome, c, rng).transpose();
      if (data.binary) {
        for (int k = 0; k < data.K; ++k) state.y_bin(i, k) = state.y(i, k) > 0.0 ? 1.0 : 0.0;
      }
    } else {
      state.alive[i] = 0;
      state.y.row(i).setConstant(kNaN);
      if (data.binary) state.y_bin.row(i).setConstant(kNaN);
    }
  }
}

void gibbs_sweep(const FitData& data, ParameterState& state, const PriorSpec& prior, RngHandle& rng,
                 int iteration, const SweepObserver& observer) {
  auto done = [&](SweepStep step) {
    if (observer) observer(iteration, step, state);
  };
  auto& out = state.outcome;

  update_alpha(data, state, prior, rng);
  for (const auto& a : out.alpha) require_finite(a.allFinite(), iteration, "alpha");
  done(SweepStep::Alpha);

  update_eta(data, state, rng);
  require_finite(out.eta.allFinite(), iteration, "eta");
  done(SweepStep::Eta);

  const auto pe = sigma_eta_conditional(state, prior);
  out.Sigma_eta = sample_inverse_wishart(pe.df, pe.scale, rng);
  require_finite(out.Sigma_eta.allFinite(), iteration, "Sigma_eta");
  done(SweepStep::SigmaEta);

  if (data.binary) {
    update_rho_e(data, state, rng);
  } else {
    const auto pr = sigma_e_conditional(data, state, prior);
    out.Sigma_e = sample_inverse_wishart(pr.df, pr.scale, rng);
  }
  require_finite(out.Sigma_e.allFinite(), iteration, "Sigma_e");
  done(SweepStep::SigmaE);

  update_beta_gamma(data, state, prior, rng);
  require_finite(state.strata.beta.allFinite(), iteration, "beta");
  require_finite(state.strata.gamma.allFinite(), iteration, "gamma");
  done(SweepStep::BetaGamma);

  update_phi2(state, prior, rng);
  require_finite(std::isfinite(state.strata.phi2) && state.strata.phi2 > 0.0, iteration, "phi2");
  done(SweepStep::Phi2);

  update_chi(data, state, rng);
  require_finite(state.strata.chi.allFinite(), iteration, "chi");
  done(SweepStep::Chi);

  refresh_membership(data, state, rng);
  done(SweepStep::Membership);

  // Estimands are computed by the caller from the state the observer sees
  // here; see run_chain.
  done(SweepStep::Estimands);

  impute_missing_outcomes(data, state, rng);
  done(SweepStep::ImputeOutcomes);

  impute_unknown_survival(data, state, rng);
  done(SweepStep::ImputeUnknownSurvival);

  if (data.binary) draw_binary_latents(data, state, rng);
  update_latents(data, state, rng);
  require_finite(state.latents.q.allFinite(), iteration, "Q");
  done(SweepStep::Latents);
}

std::vector<std::string> parameter_names(const FitData& data) {
  std::vector<std::string> names;
  for (int g = 0; g < kNumGroups; ++g) {
    const std::string tag = group_name(static_cast<OutcomeGroup>(g));
    for (int k = 0; k < data.K; ++k) {
      for (int j = 0; j < data.po(); ++j) {
        names.push_back("alpha_" + tag + "_x" + std::to_string(j) + "_y" + std::to_string(k + 1));
      }
    }
  }
  for (const char* m : {"Sigma_eta", "Sigma_e"}) {
    for (int k = 0; k < data.K; ++k) {
      for (int l = k; l < data.K; ++l) names.push_back(std::string(m) + "_" + std::to_string(k + 1) + std::to_string(l + 1));
    }
  }
  for (int j = 0; j < data.ps(); ++j) names.push_back("beta_x" + std::to_string(j));
  for (int j = 0; j < data.ps(); ++j) names.push_back("gamma_x" + std::to_string(j));
  names.emplace_back("phi2");
  return names;
}

Eigen::VectorXd parameter_vector(const FitData& data, const ParameterState& state) {
  std::vector<double> v;
  for (const auto& a : state.outcome.alpha) v.insert(v.end(), a.data(), a.data() + a.size());
  for (const auto* m : {&state.outcome.Sigma_eta, &state.outcome.Sigma_e}) {
    for (int k = 0; k < data.K; ++k) {
      for (int l = k; l < data.K; ++l) v.push_back((*m)(k, l));
    }
  }
  v.insert(v.end(), state.strata.beta.data(), state.strata.beta.data() + state.strata.beta.size());
  v.insert(v.end(), state.strata.gamma.data(), state.strata.gamma.data() + state.strata.gamma.size());
  v.push_back(state.strata.phi2);
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

ChainResult run_chain_from(const FitData& data, const PriorSpec& prior, const ChainConfig& config,
                           ParameterState state, RngHandle& rng, const SweepObserver& observer) {
  config.validate();
  prior.validate(data.ps(), data.po(), data.K);
  if (data.augmentation != config.augmentation) {
    throw ConfigError("FitData augmentation does not match the chain config (call set_augmentation)");
  }
  const auto start = std::chrono::steady_clock::now();
  ChainResult result;
  result.K = data.K;
  if (config.store_full_params) result.param_names = parameter_names(data);
  const auto kept = static_cast<std::size_t>(config.kept());
  result.iteration.reserve(kept);
  result.estimands.reserve(kept);
  result.iccs.reserve(kept);
  result.pi.reserve(kept);

  for (int it = 1; it <= config.iterations; ++it) {
    const bool keep = it > config.burn_in && (it - config.burn_in) % config.thin == 0;
    SweepObserver hook = observer;
    if (keep) {
      hook = [&](int iteration, SweepStep step, const ParameterState& s) {
        if (step == SweepStep::Estimands) {
          result.iteration.push_back(iteration);
          result.estimands.push_back(estimand_draw(data, s));
          for (int k = 0; k < data.K; ++k) {
            require_finite(std::isfinite(result.estimands.back().delta_I(k)) &&
                               std::isfinite(result.estimands.back().delta_C(k)),
                           iteration, "estimands");
          }
          result.iccs.push_back(data.K == 2 ? compute_iccs(s.outcome.Sigma_eta, s.outcome.Sigma_e) : IccSet{});
          std::array<double, 3> pi{};
          record_pi(s, pi);
          result.pi.push_back(pi);
          if (config.store_full_params) result.params.push_back(parameter_vector(data, s));
        }
        if (observer) observer(iteration, step, s);
      };
    }
    gibbs_sweep(data, state, prior, rng, it, hook);
  }
  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

ChainResult run_chain(const FitData& data, const PriorSpec& prior, const ChainConfig& config, RngHandle& rng,
                      const SweepObserver& observer) {
  config.validate();
  prior.validate(data.ps(), data.po(), data.K);
  auto state = init_state(data, prior, config, rng);
  return run_chain_from(data, prior, config, std::move(state), rng, observer);
}

ChainResult run_chain(FitData&& data, const PriorSpec& prior, const ChainConfig& config, RngHandle& rng,
                      const SweepObserver& observer) {
  data.set_augmentation(config.augmentation);
  return run_chain(static_cast<const FitData&>(data), prior, config, rng, observer);
}

ChainResult run_chain(const TrialDataset& ds, const PriorSpec& prior, const ChainConfig& config, RngHandle& rng,
                      const SweepObserver& observer) {
  config.validate();
  return run_chain(FitData::from_dataset(ds, config.model), prior, config, rng, observer);
}

ChainResult run_chain(const TrialDataset& ds, const PriorSpec& prior, const ChainConfig& config) {
  RngHandle rng(config.seed, 0);
  return run_chain(ds, prior, config, rng);
}

}  // namespace crtsace
