#include <cmath>
#include <numbers>

#include "doctest.h"
#include "oracles.hpp"
#include "toy.hpp"

using namespace crtsace;

using oracle::group_index;
using oracle::Moments;
using oracle::used_by_outcome;

namespace {

FitData toy_data(Augmentation mode) {
  auto d = FitData::from_dataset(toy::toy30());
  d.set_augmentation(mode);
  return d;
}

void check_close(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double tol) {
  REQUIRE(a.rows() == b.rows());
  REQUIRE(a.cols() == b.cols());
  CHECK((a - b).cwiseAbs().maxCoeff() < tol);
}

OutcomeParams simple_params() {
  OutcomeParams p;
  for (int g = 0; g < kNumGroups; ++g) p.alpha[g] = Eigen::MatrixXd::Zero(2, 2);
  p.alpha[0] << 1.0, 2.0, 0.5, -1.0;
  p.Sigma_e = Eigen::MatrixXd::Identity(2, 2);
  p.Sigma_eta = Eigen::MatrixXd::Identity(2, 2);
  p.eta = Eigen::MatrixXd::Zero(2, 2);
  p.eta.row(1) << 0.3, -0.2;
  return p;
}

}  // namespace

TEST_CASE("linear predictor") {
  const auto p = simple_params();
  const Eigen::Vector2d x(1.0, 2.0);
  check_close(linear_predictor(x, Stratum::AlwaysSurvivor, 1, p, 0), Eigen::Vector2d(2.0, 0.0), 1e-15);
  check_close(linear_predictor(x, Stratum::AlwaysSurvivor, 1, p, 1), Eigen::Vector2d(2.3, -0.2), 1e-15);
  CHECK_THROWS_AS(linear_predictor(x, Stratum::NeverSurvivor, 0, p, 0), ConfigError);
  CHECK_THROWS_AS(linear_predictor(x, Stratum::Protected, 0, p, 0), ConfigError);
}

TEST_CASE("outcome density") {
  auto p = simple_params();
  const Eigen::Vector2d x(1.0, 0.0);
  // at the mean with identity covariance: 1/(2 pi)
  CHECK(outcome_density(Eigen::Vector2d(1.0, 2.0), x, Stratum::AlwaysSurvivor, 1, p, 0) ==
        doctest::Approx(1.0 / (2.0 * std::numbers::pi)));
  p.Sigma_e *= 4.0;
  CHECK(outcome_density(Eigen::Vector2d(1.0, 2.0), x, Stratum::AlwaysSurvivor, 1, p, 0) ==
        doctest::Approx(1.0 / (8.0 * std::numbers::pi)));
  p.Sigma_e << 2.0, 0.8, 0.8, 1.0;
  double total = 0.0;
  const double h = 0.05;
  for (double a = -10; a < 12; a += h)
    for (double b = -8; b < 12; b += h)
      total += outcome_density(Eigen::Vector2d(a, b), x, Stratum::AlwaysSurvivor, 1, p, 0) * h * h;
  CHECK(total == doctest::Approx(1.0).epsilon(0.02));
  const Eigen::Vector2d y(0.4, 1.1);
  CHECK(std::log(outcome_density(y, x, Stratum::AlwaysSurvivor, 1, p, 0)) ==
        doctest::Approx(outcome_log_density(y, x, OutcomeGroup::AlwaysTreated, p, 0)));
}

TEST_CASE("alpha conditional matches the stacked GLS oracle") {
  const auto prior = toy::toy_prior();
  for (auto mode : {Augmentation::Full, Augmentation::Collapsed}) {
    CAPTURE(static_cast<int>(mode));
    auto d = toy_data(mode);
    auto s = toy::toy_state(d, prior);
    const auto members = group_members(d, s);
    std::array<Moments, 3> oracle;
    for (int g = 0; g < kNumGroups; ++g) {
      oracle[g] = oracle::alpha(d, s, prior, g);
      const auto got = alpha_conditional(d, s, prior, static_cast<OutcomeGroup>(g), members[g]);
      check_close(got.mean(), oracle[g].mean, 1e-10);
      check_close(got.covariance(), oracle[g].cov, 1e-10);
    }
    RngHandle rng(1, static_cast<int>(mode));
    const int n = 50000;
    std::array<Eigen::VectorXd, 3> sum;
    for (auto& v : sum) v = Eigen::VectorXd::Zero(d.po() * d.K);
    for (int t = 0; t < n; ++t) {
      update_alpha(d, s, prior, rng);
      for (int g = 0; g < kNumGroups; ++g) sum[g] += Eigen::Map<const Eigen::VectorXd>(s.outcome.alpha[g].data(), d.po() * d.K);
    }
    for (int g = 0; g < kNumGroups; ++g)
      for (int j = 0; j < d.po() * d.K; ++j)
        CHECK(std::abs(sum[g](j) / n - oracle[g].mean(j)) < 3.0 * std::sqrt(oracle[g].cov(j, j) / n));
  }
}

TEST_CASE("alpha conditional of an empty group is the prior") {
  const auto prior = toy::toy_prior();
  auto d = toy_data(Augmentation::Full);
  const auto s = toy::toy_state(d, prior);
  const auto got = alpha_conditional(d, s, prior, OutcomeGroup::ProtectedTreated, {});
  check_close(got.mean(), prior.a[2], 1e-12);
  check_close(got.covariance(), prior.Sigma_a[2], 1e-10);
}

TEST_CASE("alpha under a diffuse prior is least squares") {
  auto d = toy_data(Augmentation::Full);
  auto prior = toy::toy_prior();
  for (auto& S : prior.Sigma_a) S = 1e12 * Eigen::MatrixXd::Identity(6, 6);
  auto s = toy::toy_state(d, prior);
  s.outcome.Sigma_e = Eigen::MatrixXd::Identity(2, 2);
  s.outcome.eta.setZero();
  const auto members = group_members(d, s);
  const auto& m = members[1];
  Eigen::MatrixXd X(m.size(), 3), Y(m.size(), 2);
  for (std::size_t r = 0; r < m.size(); ++r) {
    X.row(r) = d.xo.row(m[r]);
    Y.row(r) = s.y.row(m[r]);
  }
  const Eigen::MatrixXd ls = X.colPivHouseholderQr().solve(Y);
  const Eigen::VectorXd mean = alpha_conditional(d, s, prior, OutcomeGroup::AlwaysControl, m).mean();
  check_close(Eigen::Map<const Eigen::MatrixXd>(mean.data(), 3, 2), ls, 1e-6);
}

TEST_CASE("eta conditional") {
  const auto prior = toy::toy_prior();
  for (auto mode : {Augmentation::Full, Augmentation::Collapsed}) {
    CAPTURE(static_cast<int>(mode));
    auto d = toy_data(mode);
    auto s = toy::toy_state(d, prior);
    std::vector<Moments> oracle;
    for (int c = 0; c < d.n_clusters; ++c) {
      oracle.push_back(oracle::eta(d, s, c));
      const auto got = eta_conditional(d, s, c);
      check_close(got.mean(), oracle[c].mean, 1e-10);
      check_close(got.covariance(), oracle[c].cov, 1e-10);
    }
    RngHandle rng(2, static_cast<int>(mode));
    const int n = 50000;
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(d.n_clusters, 2);
    for (int t = 0; t < n; ++t) {
      update_eta(d, s, rng);
      sum += s.outcome.eta;
    }
    for (int c = 0; c < d.n_clusters; ++c)
      for (int k = 0; k < 2; ++k)
        CHECK(std::abs(sum(c, k) / n - oracle[c].mean(k)) < 3.0 * std::sqrt(oracle[c].cov(k, k) / n));
  }
}

TEST_CASE("eta with one member and unit covariances halves the residual") {
  auto d = FitData::from_dataset(toy::make_dataset({{0, {toy::C::O01}}}), ModelSpec{{0}, {0}});
  auto prior = PriorSpec::diffuse(1, 1, 2);
  auto s = toy::toy_state(d, prior);
  s.outcome.Sigma_e = Eigen::MatrixXd::Identity(2, 2);
  s.outcome.Sigma_eta = Eigen::MatrixXd::Identity(2, 2);
  s.outcome.alpha[1].setZero();
  const auto got = eta_conditional(d, s, 0);
  check_close(got.mean(), s.y.row(0).transpose() / 2.0, 1e-14);
  check_close(got.covariance(), Eigen::MatrixXd::Identity(2, 2) / 2.0, 1e-14);
}

TEST_CASE("covariance conditionals") {
  const auto prior = toy::toy_prior();
  for (auto mode : {Augmentation::Full, Augmentation::Collapsed}) {
    CAPTURE(static_cast<int>(mode));
    auto d = toy_data(mode);
    auto s = toy::toy_state(d, prior);
    const auto pe = sigma_eta_conditional(s, prior);
    const auto oe = oracle::sigma_eta(s, prior);
    CHECK(pe.df == oe.df);
    check_close(pe.scale, oe.scale, 1e-12);
    const auto pr = sigma_e_conditional(d, s, prior);
    const auto orr = oracle::sigma_e(d, s, prior);
    CHECK(pr.df == orr.df);
    check_close(pr.scale, orr.scale, 1e-10);
    int count = 0;
    for (int i = 0; i < d.n(); ++i) count += used_by_outcome(d, s, i);
    CHECK(orr.df == prior.d + count);

    RngHandle rng(3, static_cast<int>(mode));
    const int n = 50000;
    Eigen::MatrixXd m_eta = Eigen::MatrixXd::Zero(2, 2), m_e = m_eta, q_eta = m_eta, q_e = m_eta;
    auto t = s;
    for (int k = 0; k < n; ++k) {
      update_covariances(d, t, prior, rng);
      m_eta += t.outcome.Sigma_eta;
      q_eta += t.outcome.Sigma_eta.cwiseProduct(t.outcome.Sigma_eta);
      m_e += t.outcome.Sigma_e;
      q_e += t.outcome.Sigma_e.cwiseProduct(t.outcome.Sigma_e);
    }
    const Eigen::MatrixXd e_eta = oe.mean();
    const Eigen::MatrixXd e_e = orr.mean();
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b) {
        const double sd_eta = std::sqrt(q_eta(a, b) / n - std::pow(m_eta(a, b) / n, 2));
        const double sd_e = std::sqrt(q_e(a, b) / n - std::pow(m_e(a, b) / n, 2));
        CHECK(std::abs(m_eta(a, b) / n - e_eta(a, b)) < 3.0 * sd_eta / std::sqrt(n));
        CHECK(std::abs(m_e(a, b) / n - e_e(a, b)) < 3.0 * sd_e / std::sqrt(n));
      }
  }
}

TEST_CASE("group membership counts") {
  auto d = toy_data(Augmentation::Full);
  const auto s = toy::toy_state(d, toy::toy_prior());
  const auto m = group_members(d, s);
  int alive = 0;
  for (int i = 0; i < d.n(); ++i) alive += s.has_outcome(i);
  CHECK(static_cast<int>(m[0].size() + m[1].size() + m[2].size()) == alive);
  for (int i : m[1]) CHECK(d.arm_of(i) == 0);
  for (int i : m[2]) CHECK(s.labels[i] == Stratum::Protected);
}

TEST_CASE("ICC algebra") {
  Eigen::Matrix2d eta, e;
  eta << 1.0, 0.71, 0.71, 2.0;
  e << 5.0, 3.54, 3.54, 10.0;
  const auto icc = compute_iccs(Eigen::MatrixXd(eta), Eigen::MatrixXd(e));
  CHECK(icc.rho1 == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
  CHECK(icc.rho2 == doctest::Approx(1.0 / 6.0).epsilon(1e-12));
  CHECK(icc.rho12_between == doctest::Approx(0.71 / std::sqrt(72.0)).epsilon(1e-12));
  CHECK(icc.rho12_within == doctest::Approx(4.25 / std::sqrt(72.0)).epsilon(1e-12));
  // paper values (0.167, 0.167, 0.08, 0.50)
  CHECK(std::abs(icc.rho1 - 0.167) < 1e-3);
  CHECK(std::abs(icc.rho12_between - 0.0837) < 1e-4);
  CHECK(std::abs(icc.rho12_within - 0.5009) < 1e-4);

  const auto zero = compute_iccs(Eigen::MatrixXd(Eigen::Matrix2d::Identity()), Eigen::MatrixXd(Eigen::Matrix2d::Identity()));
  CHECK(zero.rho12_between == 0.0);
  CHECK(zero.rho12_within == 0.0);
  const auto scaled = compute_iccs(Eigen::MatrixXd(3.0 * eta), Eigen::MatrixXd(3.0 * e));
  CHECK(scaled.rho12_within == doctest::Approx(icc.rho12_within).epsilon(1e-14));
  Eigen::Matrix2d bad;
  bad << 1.0, 2.0, 2.0, 1.0;
  CHECK_THROWS_AS(compute_iccs(Eigen::MatrixXd(bad), Eigen::MatrixXd(e)), NumericalError);
}

TEST_CASE("outcome imputation moments") {
  auto p = simple_params();
  p.Sigma_e << 2.0, 0.5, 0.5, 1.0;
  const Eigen::Vector2d x(1.0, -1.0);
  const Eigen::VectorXd mu = linear_predictor(x, Stratum::AlwaysSurvivor, 1, p, 1);
  RngHandle rng(4, 0);
  const int n = 100000;
  Eigen::Vector2d sum = Eigen::Vector2d::Zero();
  for (int t = 0; t < n; ++t) sum += impute_missing_outcome(x, Stratum::AlwaysSurvivor, 1, p, 1, rng);
  for (int k = 0; k < 2; ++k) CHECK(std::abs(sum(k) / n - mu(k)) < 3.0 * std::sqrt(p.Sigma_e(k, k) / n));
  CHECK_THROWS_AS(impute_missing_outcome(x, Stratum::Protected, 0, p, 1, rng), ConfigError);
}
