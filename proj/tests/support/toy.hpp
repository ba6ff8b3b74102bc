// Small hand-built trials and fixed parameter states shared by the unit tests.
#pragma once

#include <cmath>
#include <initializer_list>
#include <vector>

#include <Eigen/Dense>

#include "crtsace/binary_outcome.hpp"
#include "crtsace/core_model.hpp"
#include "crtsace/gibbs.hpp"
#include "crtsace/model.hpp"
#include "crtsace/outcome.hpp"
#include "crtsace/rand_dist.hpp"
#include "crtsace/strata.hpp"

namespace toy {

using namespace crtsace;

enum class C { O11, O10, O01, O00, SMY, UNK };

inline IndividualRecord record(C cell, const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
  IndividualRecord r;
  r.covariates = x;
  switch (cell) {
    case C::O11:
    case C::O01:
      r.survival = true;
      r.outcome_state = OutcomeState::Observed;
      r.outcome = y;
      break;
    case C::O10:
    case C::O00:
      r.survival = false;
      r.outcome_state = OutcomeState::Truncated;
      break;
    case C::SMY:
      r.survival = true;
      r.r_y = false;
      break;
    case C::UNK:
      r.r_s = false;
      r.r_y = false;
      break;
  }
  return r;
}

struct ClusterSpec {
  int arm;
  std::vector<C> cells;
};

/// Covariates (1, x1, x2) and bivariate outcomes drawn from a fixed stream.
inline TrialDataset make_dataset(const std::vector<ClusterSpec>& spec, bool binary = false, std::uint64_t seed = 7) {
  RngHandle rng(seed, 0);
  TrialDataset ds;
  ds.K = 2;
  ds.p = 3;
  ds.binary_outcomes = binary;
  int id = 0;
  for (const auto& cs : spec) {
    ClusterRecord cl;
    cl.cluster_id = "c" + std::to_string(id++);
    cl.treatment = cs.arm;
    for (C cell : cs.cells) {
      Eigen::VectorXd x(3);
      x << 1.0, rng.normal(), rng.normal();
      Eigen::VectorXd y(2);
      y << 1.0 + 0.5 * x(1) + rng.normal(), -0.5 + 0.3 * x(2) + rng.normal();
      if (binary) y = (y.array() > 0.0).cast<double>().matrix();
      cl.individuals.push_back(record(cell, x, y));
    }
    ds.clusters.push_back(std::move(cl));
  }
  return ds;
}

/// The 30-individual toy trial: two treated and two control clusters, every
/// observed cell represented.
inline TrialDataset toy30(bool binary = false) {
  return make_dataset({{1, {C::O11, C::O11, C::O11, C::O10, C::O10, C::SMY, C::UNK, C::O11}},
                       {1, {C::O11, C::O10, C::O11, C::SMY, C::O11, C::UNK, C::O11}},
                       {0, {C::O01, C::O01, C::O00, C::O00, C::O01, C::SMY, C::UNK, C::O01}},
                       {0, {C::O01, C::O00, C::O01, C::O01, C::UNK, C::O00, C::O01}}},
                      binary);
}

/// Informative (non-diffuse) prior so the oracles exercise every term.
inline PriorSpec toy_prior(int ps = 3, int po = 3, int K = 2) {
  PriorSpec p = PriorSpec::diffuse(ps, po, K);
  for (int g = 0; g < kNumGroups; ++g) {
    p.a[g] = Eigen::VectorXd::LinSpaced(po * K, -0.5 + g, 0.5 + g);
    Eigen::MatrixXd s = Eigen::MatrixXd::Identity(po * K, po * K) * (2.0 + g);
    s += Eigen::MatrixXd::Constant(po * K, po * K, 0.3);
    p.Sigma_a[g] = s;
  }
  p.d = 4.0;
  p.V_eta = Eigen::MatrixXd::Identity(K, K);
  p.V_eta(0, 1) = p.V_eta(1, 0) = 0.2;
  p.V_e = 1.5 * Eigen::MatrixXd::Identity(K, K);
  p.V_e(0, 1) = p.V_e(1, 0) = -0.3;
  p.b = Eigen::VectorXd::LinSpaced(ps, 0.1, -0.2);
  p.Lambda = Eigen::MatrixXd::Identity(ps, ps) * 3.0;
  p.Lambda(0, 1) = p.Lambda(1, 0) = 0.5;
  p.r = Eigen::VectorXd::LinSpaced(ps, -0.3, 0.2);
  p.Gamma = Eigen::MatrixXd::Identity(ps, ps) * 2.0;
  p.g = 2.0;
  p.h = 1.5;
  return p;
}

/// Fixed, internally consistent parameter state: labels, survival, imputed
/// outcomes and probit latents drawn once from these parameters.
inline ParameterState toy_state(const FitData& data, const PriorSpec& prior, std::uint64_t seed = 11) {
  RngHandle rng(seed, 3);
  ChainConfig cfg;
  cfg.init_mode = InitMode::Random;
  cfg.augmentation = data.augmentation;
  ParameterState s = init_state(data, prior, cfg, rng);
  const int ps = data.ps();
  const int po = data.po();
  s.strata.beta = Eigen::VectorXd::LinSpaced(ps, -0.4, 0.3);
  s.strata.gamma = Eigen::VectorXd::LinSpaced(ps, 0.2, -0.5);
  for (int c = 0; c < data.n_clusters; ++c) s.strata.chi(c) = 0.3 * (c - 1.5);
  s.strata.phi2 = 0.8;
  for (int g = 0; g < kNumGroups; ++g) {
    Eigen::MatrixXd a(po, data.K);
    for (int r = 0; r < po; ++r)
      for (int k = 0; k < data.K; ++k) a(r, k) = 0.4 * (g + 1) * std::cos(1.0 + r + 2.0 * k + g);
    s.outcome.alpha[g] = a;
  }
  s.outcome.Sigma_eta = Eigen::MatrixXd::Identity(data.K, data.K) * 0.5;
  s.outcome.Sigma_eta(0, 1) = s.outcome.Sigma_eta(1, 0) = 0.1;
  if (!data.binary) {
    s.outcome.Sigma_e = Eigen::MatrixXd::Identity(data.K, data.K) * 1.2;
    s.outcome.Sigma_e(0, 1) = s.outcome.Sigma_e(1, 0) = 0.4;
  }
  for (int c = 0; c < data.n_clusters; ++c)
    for (int k = 0; k < data.K; ++k) s.outcome.eta(c, k) = 0.2 * std::sin(1.0 + c + 3.0 * k);
  refresh_membership(data, s, rng);
  impute_unknown_survival(data, s, rng);
  impute_missing_outcomes(data, s, rng);
  if (data.binary) draw_binary_latents(data, s, rng);
  update_latents(data, s, rng);
  return s;
}

}  // namespace toy
