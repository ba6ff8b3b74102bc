#include <algorithm>
#include <cmath>

#include "crtsace/estimands.hpp"
#include "doctest.h"
#include "toy.hpp"

using namespace crtsace;
using toy::C;

namespace {

// Cluster 0 holds one always-survivor with tau = 2, cluster 1 three with tau = 4.
struct Weighted {
  FitData d;
  ParameterState s;
};

Weighted weighted_case() {
  auto d = FitData::from_dataset(toy::make_dataset({{1, {C::O11}}, {0, {C::O01, C::O01, C::O01}}}),
                                 ModelSpec{{0}, {0, 1}});
  d.xo.col(1) << 0.0, 1.0, 1.0, 1.0;
  auto s = toy::toy_state(d, toy::toy_prior(1, 2, 2));
  for (auto& g : s.labels) g = Stratum::AlwaysSurvivor;
  s.outcome.alpha[0] << 5.0, 5.0, 3.0, 3.0;
  s.outcome.alpha[1] << 3.0, 3.0, 1.0, 1.0;
  return {d, s};
}

}  // namespace

TEST_CASE("individual vs cluster weighting") {
  auto [d, s] = weighted_case();
  const auto e = estimand_draw(d, s);
  CHECK(e.delta_I(0) == doctest::Approx(3.5).epsilon(1e-14));
  CHECK(e.delta_C(0) == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(e.delta_I(1) == doctest::Approx(3.5).epsilon(1e-14));
  for (int k = 0; k < 2; ++k) {
    CHECK(std::abs(e.delta_I(k) - (e.mu_I1(k) - e.mu_I0(k))) < 1e-12);
    CHECK(std::abs(e.delta_C(k) - (e.mu_C1(k) - e.mu_C0(k))) < 1e-12);
  }
}

TEST_CASE("cluster effects cancel in the contrasts") {
  auto [d, s] = weighted_case();
  const auto before = estimand_draw(d, s);
  s.outcome.eta.setConstant(2.7);
  s.outcome.eta(1, 0) = -4.0;
  const auto after = estimand_draw(d, s);
  CHECK(after.delta_I(0) == doctest::Approx(before.delta_I(0)).epsilon(1e-13));
  CHECK(after.delta_C(1) == doctest::Approx(before.delta_C(1)).epsilon(1e-13));
  CHECK(after.mu_I1(0) != doctest::Approx(before.mu_I1(0)));
}

TEST_CASE("equal cluster sizes with a constant effect give equal estimands") {
  auto [d, s] = weighted_case();
  s.outcome.alpha[0] << 5.0, 5.0, 0.0, 0.0;
  s.outcome.alpha[1] << 3.0, 3.0, 0.0, 0.0;
  const auto e = estimand_draw(d, s);
  CHECK(e.delta_I(0) == e.delta_C(0));
  CHECK(e.delta_I(0) == doctest::Approx(2.0));
}

TEST_CASE("only always-survivors count") {
  auto [d, s] = weighted_case();
  s.labels[0] = Stratum::Protected;
  const auto e = estimand_draw(d, s);
  CHECK(e.delta_I(0) == doctest::Approx(4.0));
  CHECK(e.delta_C(0) == doctest::Approx(4.0));
  for (auto& g : s.labels) g = Stratum::NeverSurvivor;
  CHECK_THROWS_AS(estimand_draw(d, s), NumericalError);
}

TEST_CASE("quantiles and posterior summaries") {
  CHECK(quantile_sorted({1.0, 2.0, 3.0, 4.0}, 0.5) == doctest::Approx(2.5));
  CHECK(quantile_sorted({1.0, 2.0, 3.0, 4.0}, 0.0) == 1.0);
  CHECK(quantile_sorted({1.0, 2.0, 3.0, 4.0}, 1.0) == 4.0);
  CHECK(quantile_sorted({10.0, 20.0}, 0.25) == doctest::Approx(12.5));

  const auto c = summarize_series("c", std::vector<double>(50, 1.25));
  CHECK(c.mean == 1.25);
  CHECK(c.median == 1.25);
  CHECK(c.lower == 1.25);
  CHECK(c.upper == 1.25);

  RngHandle rng(1, 0);
  std::vector<double> v(100000);
  for (auto& x : v) x = rng.normal();
  const auto n = summarize_series("z", v);
  CHECK(std::abs(n.lower + 1.96) < 0.03);
  CHECK(std::abs(n.upper - 1.96) < 0.03);
  CHECK(std::abs(n.median) < 0.02);
}

TEST_CASE("chain summary covers every scalar column") {
  auto [d, s] = weighted_case();
  ChainResult r;
  for (int t = 0; t < 5; ++t) {
    r.iteration.push_back(t);
    r.estimands.push_back(estimand_draw(d, s));
    r.iccs.push_back(IccSet{0.1, 0.2, 0.05, 0.3});
    r.pi.push_back({0.1, 0.2, 0.7});
  }
  const auto sum = summarize(r);
  CHECK(sum.rows.size() == r.scalar_names().size());
  CHECK(sum.row("delta_C_1").mean == doctest::Approx(3.0));
  CHECK(sum.row("pi11").median == doctest::Approx(0.7));
  CHECK_THROWS(sum.row("nope"));
}

TEST_CASE("replicate metrics") {
  SUBCASE("exact recovery") {
    std::vector<ReplicateEstimate> e(20, {2.0, 1.0, 3.0});
    const auto m = replicate_metrics(e, 2.0);
    CHECK(*m.percent_bias == 0.0);
    CHECK(m.coverage == 1.0);
    CHECK(m.mc_error == 0.0);
  }
  SUBCASE("percent bias") {
    std::vector<ReplicateEstimate> e = {{-8.10, -9.0, -7.0}, {-8.20, -9.0, -8.0}};
    const auto m = replicate_metrics(e, -7.98);
    CHECK(m.mean_of_means == doctest::Approx(-8.15));
    CHECK(*m.percent_bias == doctest::Approx(2.13).epsilon(1e-3));
    CHECK(m.coverage == 0.5);
    // sd of {-8.1, -8.2} is 0.0707, over sqrt(2)
    CHECK(m.mc_error == doctest::Approx(0.05).epsilon(1e-9));
  }
  SUBCASE("zero truth has no percent bias") {
    std::vector<ReplicateEstimate> e = {{0.1, -1, 1}, {-0.3, -1, 1}};
    const auto m = replicate_metrics(e, 0.0);
    CHECK_FALSE(m.percent_bias.has_value());
    CHECK(m.absolute_bias == doctest::Approx(-0.1));
  }
  CHECK_THROWS_AS(replicate_metrics({{1, 0, 2}}, 1.0), ConfigError);
}
