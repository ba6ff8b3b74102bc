#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "crtsace/diagnostics.hpp"
#include "crtsace/simgen.hpp"
#include "doctest.h"
#include "oracles.hpp"
#include "toy.hpp"

using namespace crtsace;
using oracle::enumerate_membership;
using toy::C;

namespace {

TrialDataset toy8(bool binary = false) {
  return toy::make_dataset({{1, {C::O11, C::O10, C::SMY, C::UNK}}, {0, {C::O01, C::O00, C::SMY, C::UNK}}}, binary, 3);
}

ChainConfig short_chain(int iters, int burn) {
  ChainConfig c;
  c.iterations = iters;
  c.burn_in = burn;
  return c;
}

}  // namespace

TEST_CASE("membership conditional equals brute-force enumeration") {
  for (bool binary : {false, true}) {
    for (auto mode : {Augmentation::Full, Augmentation::Collapsed}) {
      CAPTURE(binary);
      CAPTURE(static_cast<int>(mode));
      auto d = FitData::from_dataset(toy8(binary));
      d.set_augmentation(mode);
      auto prior = toy::toy_prior();
      auto s = toy::toy_state(d, prior, 5);
      if (binary) s.outcome.rho_e = 0.35;
      const auto oracle = enumerate_membership(d, s);
      for (int i = 0; i < d.n(); ++i) {
        const auto p = membership_conditional(d, s, i);
        CHECK(std::abs(p.p00 - oracle[i][0]) < 1e-10);
        CHECK(std::abs(p.p10 - oracle[i][1]) < 1e-10);
        CHECK(std::abs(p.p11 - oracle[i][2]) < 1e-10);
      }
      // refresh_membership draws from those probabilities
      RngHandle rng(1, 0);
      const int n = 20000;
      std::vector<int> n11(d.n(), 0);
      for (int t = 0; t < n; ++t) {
        refresh_membership(d, s, rng);
        for (int i = 0; i < d.n(); ++i) n11[i] += s.labels[i] == Stratum::AlwaysSurvivor;
      }
      for (int i = 0; i < d.n(); ++i) {
        if (d.cell[i] == ObservedCell::UnknownSurvival) continue;
        const double p = oracle[i][2];
        CHECK(std::abs(n11[i] / double(n) - p) < 4.0 * std::sqrt(p * (1 - p) / n) + 1e-12);
      }
    }
  }
}

TEST_CASE("unknown-survival imputation follows the strata model") {
  auto d = FitData::from_dataset(toy8());
  const auto prior = toy::toy_prior();
  auto s = toy::toy_state(d, prior);
  RngHandle rng(2, 0);
  const int treated_unk = 3, control_unk = 7;
  const auto pt = membership_conditional(d, s, treated_unk);
  const auto pc = membership_conditional(d, s, control_unk);
  const int n = 100000;
  int alive_t = 0, alive_c = 0;
  for (int t = 0; t < n; ++t) {
    impute_unknown_survival(d, s, rng);
    alive_t += s.alive[treated_unk];
    alive_c += s.alive[control_unk];
    CHECK(s.alive[treated_unk] == survives(s.labels[treated_unk], 1));
    CHECK(s.alive[control_unk] == survives(s.labels[control_unk], 0));
    CHECK(s.has_outcome(control_unk) == !std::isnan(s.y(control_unk, 0)));
  }
  const double et = pt.p10 + pt.p11, ec = pc.p11;
  CHECK(std::abs(alive_t / double(n) - et) < 4.0 * std::sqrt(et * (1 - et) / n));
  CHECK(std::abs(alive_c / double(n) - ec) < 4.0 * std::sqrt(ec * (1 - ec) / n));
}

TEST_CASE("chain configuration checks") {
  CHECK_THROWS_AS(short_chain(100, 100).validate(), ConfigError);
  auto c = short_chain(100, 10);
  c.thin = 0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.thin = 3;
  CHECK(c.kept() == 30);
}

TEST_CASE("initialization") {
  const auto prior = toy::toy_prior();
  SUBCASE("a dataset of control survivors starts all 11") {
    auto d = FitData::from_dataset(toy::make_dataset({{0, {C::O01, C::O01, C::O01}}}));
    RngHandle rng(3, 0);
    const auto s = init_state(d, prior, ChainConfig{}, rng);
    for (auto g : s.labels) CHECK(g == Stratum::AlwaysSurvivor);
  }
  SUBCASE("forced labels agree across seeds") {
    auto d = FitData::from_dataset(toy::toy30());
    ChainConfig c;
    c.init_mode = InitMode::Random;
    RngHandle r1(1, 0), r2(2, 0);
    const auto a = init_state(d, prior, c, r1);
    const auto b = init_state(d, prior, c, r2);
    bool differ = false;
    for (int i = 0; i < d.n(); ++i) {
      if (d.cell[i] == ObservedCell::O10 || d.cell[i] == ObservedCell::O01) {
        CHECK(a.labels[i] == b.labels[i]);
      } else {
        differ |= a.labels[i] != b.labels[i];
      }
    }
    CHECK(differ);
  }
  SUBCASE("heuristic start lands near the generating coefficients") {
    const auto cfg = scenario_preset("I");
    RngHandle gen(4, 0);
    const auto sim = generate_dataset(cfg, gen);
    const auto d = FitData::from_dataset(sim.data, cfg.model_spec());
    RngHandle rng(5, 0);
    const auto s = init_state(d, PriorSpec::diffuse(3, 4, 2), ChainConfig{}, rng);
    for (int g = 0; g < 2; ++g)
      for (int k = 0; k < 2; ++k) CHECK(std::abs(s.outcome.alpha[g](0, k) - cfg.alpha[g](0, k)) < 3.0);
  }
}

TEST_CASE("sweep order") {
  auto d = FitData::from_dataset(toy::toy30());
  const auto prior = toy::toy_prior();
  auto s = toy::toy_state(d, prior);
  RngHandle rng(6, 0);
  std::vector<std::string> log;
  gibbs_sweep(d, s, prior, rng, 1, [&](int, SweepStep st, const ParameterState&) { log.push_back(step_name(st)); });
  const std::vector<SweepStep> expected = {SweepStep::Alpha,          SweepStep::Eta,
                                           SweepStep::SigmaEta,       SweepStep::SigmaE,
                                           SweepStep::BetaGamma,      SweepStep::Phi2,
                                           SweepStep::Chi,            SweepStep::Membership,
                                           SweepStep::Estimands,      SweepStep::ImputeOutcomes,
                                           SweepStep::ImputeUnknownSurvival, SweepStep::Latents};
  REQUIRE(log.size() == expected.size());
  for (std::size_t k = 0; k < log.size(); ++k) CHECK(log[k] == step_name(expected[k]));
}

TEST_CASE("forced labels hold at every step of a chain") {
  auto d = FitData::from_dataset(toy::toy30());
  const auto prior = toy::toy_prior();
  RngHandle rng(7, 0);
  int checked = 0;
  auto res = run_chain(d, prior, short_chain(300, 100), rng, [&](int, SweepStep, const ParameterState& s) {
    for (int i = 0; i < d.n(); ++i) {
      if (d.cell[i] == ObservedCell::O10) CHECK(s.labels[i] == Stratum::NeverSurvivor);
      if (d.cell[i] == ObservedCell::O01) CHECK(s.labels[i] == Stratum::AlwaysSurvivor);
      if (d.arm_of(i) == 0 && s.alive[i]) CHECK(s.labels[i] == Stratum::AlwaysSurvivor);
      if (d.arm_of(i) == 1 && !s.alive[i]) CHECK(s.labels[i] == Stratum::NeverSurvivor);
    }
    ++checked;
  });
  CHECK(checked == 300 * 12);
  CHECK(res.size() == 200u);
}

TEST_CASE("identical seeds give identical chains") {
  auto d = FitData::from_dataset(toy::toy30());
  const auto prior = toy::toy_prior();
  auto c = short_chain(200, 50);
  c.store_full_params = true;
  RngHandle r1(9, 0), r2(9, 0), r3(10, 0);
  const auto a = run_chain(d, prior, c, r1);
  const auto b = run_chain(d, prior, c, r2);
  const auto other = run_chain(d, prior, c, r3);
  REQUIRE(a.size() == b.size());
  for (std::size_t t = 0; t < a.size(); ++t) {
    CHECK((a.params[t].array() == b.params[t].array()).all());
    CHECK(a.estimands[t].delta_I(0) == b.estimands[t].delta_I(0));
  }
  CHECK(a.params.back()(0) != other.params.back()(0));
  CHECK(a.param_names.size() == static_cast<std::size_t>(a.params[0].size()));
}

TEST_CASE("non-finite draws abort with the iteration and parameter") {
  auto d = FitData::from_dataset(toy::toy30());
  const auto prior = toy::toy_prior();
  auto s = toy::toy_state(d, prior);
  s.strata.chi(0) = std::nan("");
  RngHandle rng(11, 0);
  try {
    run_chain_from(d, prior, short_chain(10, 5), s, rng);
    FAIL("expected NumericalError");
  } catch (const NumericalError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("iteration 1") != std::string::npos);
    CHECK(msg.find("beta") != std::string::npos);
  }
}

TEST_CASE("augmentation mode must match the data") {
  auto d = FitData::from_dataset(toy::toy30());
  auto c = short_chain(10, 5);
  c.augmentation = Augmentation::Full;
  RngHandle rng(12, 0);
  CHECK_THROWS_AS(run_chain(d, toy::toy_prior(), c, rng), ConfigError);
  CHECK_NOTHROW(run_chain(FitData(d), toy::toy_prior(), c, rng));
}

TEST_CASE("residual covariance posterior is calibrated without missingness") {
  auto cfg = scenario_preset("I");
  cfg.m1 << 50.0, 0.0, 0.0, 0.0;
  cfg.m2 << 50.0, 0.0, 0.0, 0.0;
  RngHandle gen(13, 0);
  const auto sim = generate_dataset(cfg, gen);
  auto c = short_chain(1500, 500);
  c.model = cfg.model_spec();
  c.store_full_params = true;
  const auto res = run_chain(sim.data, PriorSpec::diffuse(3, 4, 2), c);
  const auto names = res.param_names;
  auto col = [&](const std::string& n) {
    for (std::size_t k = 0; k < names.size(); ++k)
      if (names[k] == n) return static_cast<int>(k);
    FAIL("missing column " << n);
    return -1;
  };
  const int s11 = col("Sigma_e_11"), s22 = col("Sigma_e_22");
  double m11 = 0.0, m22 = 0.0;
  for (const auto& p : res.params) {
    m11 += p(s11);
    m22 += p(s22);
  }
  m11 /= res.size();
  m22 /= res.size();
  CHECK(std::abs(m11 / cfg.Sigma_e(0, 0) - 1.0) < 0.15);
  CHECK(std::abs(m22 / cfg.Sigma_e(1, 1) - 1.0) < 0.15);
  // pi posterior means near the generating proportions
  double p10 = 0.0;
  for (const auto& p : res.pi) p10 += p[1];
  CHECK(std::abs(p10 / res.size() - 0.09) < 0.04);
}

TEST_CASE("chains started at the generating parameters look stationary") {
  // Scenario I's strata slopes make the probit nearly separable, and the
  // posterior then has a long scale ridge that no short chain crosses. Moderate
  // slopes keep the strata model well identified.
  auto cfg = scenario_preset("I");
  cfg.n_clusters = 30;
  cfg.mean_cluster_size = 10.0;
  cfg.beta << -1.3, 0.05, -0.07;
  cfg.gamma << -1.0, -0.06, 0.04;
  cfg.m1 << 50.0, 0.0, 0.0, 0.0;
  cfg.m2 << 50.0, 0.0, 0.0, 0.0;
  const auto prior = PriorSpec::diffuse(3, 4, 2);
  // Intercepts trade off against the mean cluster effects; thinning keeps the
  // batch-means windows long enough for that autocorrelation.
  auto c = short_chain(4000, 0);
  c.thin = 4;
  c.model = cfg.model_spec();
  c.store_full_params = true;
  int traces = 0, passed = 0, clean_chains = 0;
  const int chains = 100;
  for (int k = 0; k < chains; ++k) {
    RngHandle gen(500, k);
    const auto sim = generate_dataset(cfg, gen);
    auto d = FitData::from_dataset(sim.data, c.model);
    RngHandle rng(501, k);
    auto s = init_state(d, prior, c, rng);
    s.strata.beta = cfg.beta;
    s.strata.gamma = cfg.gamma;
    s.strata.chi = sim.latent.chi;
    s.strata.phi2 = cfg.phi2;
    s.outcome.alpha = cfg.alpha;
    s.outcome.Sigma_eta = cfg.Sigma_eta;
    s.outcome.Sigma_e = cfg.Sigma_e;
    s.outcome.eta = sim.latent.eta;
    for (int i = 0; i < d.n(); ++i) {
      s.labels[i] = sim.latent.stratum[i];
      s.alive[i] = survives(s.labels[i], d.arm_of(i));
      s.y.row(i) = (d.arm_of(i) ? sim.latent.y1 : sim.latent.y0).row(i);
    }
    update_latents(d, s, rng);
    const auto res = run_chain_from(d, prior, c, s, rng);
    bool clean = true;
    for (const auto& row : geweke_table(res)) {
      if (row.name.rfind("delta", 0) == 0 || row.name.rfind("rho", 0) == 0 || row.name.rfind("pi", 0) == 0) continue;
      ++traces;
      passed += row.result.p >= 0.01;
      clean &= row.result.p >= 0.01;
    }
    clean_chains += clean;
  }
  MESSAGE("parameter traces passing Geweke at 1%: " << passed << "/" << traces << "; chains with every trace passing: "
                                                    << clean_chains << "/" << chains);
  CHECK(passed >= 0.95 * traces);
}
