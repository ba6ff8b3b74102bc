#include "crtsace/estimands.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "crtsace/binary_outcome.hpp"

namespace crtsace {

namespace {

EstimandDraw continuous_draw(const FitData& data, const ParameterState& state) {
  const int po = data.po();
  const int K = data.K;
  Eigen::VectorXd x_ind = Eigen::VectorXd::Zero(po);
  Eigen::VectorXd eta_ind = Eigen::VectorXd::Zero(K);
  Eigen::VectorXd x_clu = Eigen::VectorXd::Zero(po);
  Eigen::VectorXd eta_clu = Eigen::VectorXd::Zero(K);
  Eigen::VectorXd x_within(po);
  long n_a = 0;
  int clusters_with_a = 0;
  for (int c = 0; c < data.n_clusters; ++c) {
    x_within.setZero();
    int count = 0;
    for (int i : data.members[c]) {
      if (state.labels[i] != Stratum::AlwaysSurvivor) continue;
      x_within.noalias() += data.xo.row(i).transpose();
      ++count;
    }
    if (count == 0) continue;
    x_ind += x_within;
    eta_ind += static_cast<double>(count) * state.outcome.eta.row(c).transpose();
    n_a += count;
    x_clu += x_within / static_cast<double>(count);
    eta_clu += state.outcome.eta.row(c).transpose();
    ++clusters_with_a;
  }
  if (n_a == 0) throw NumericalError("no always-survivors in the current draw");
  x_ind /= static_cast<double>(n_a);
  eta_ind /= static_cast<double>(n_a);
  x_clu /= static_cast<double>(clusters_with_a);
  eta_clu /= static_cast<double>(clusters_with_a);

  const auto& a1 = state.outcome.coef(OutcomeGroup::AlwaysTreated);
  const auto& a0 = state.outcome.coef(OutcomeGroup::AlwaysControl);
  const Eigen::MatrixXd diff = a1 - a0;
  EstimandDraw d;
  d.delta_I = diff.transpose() * x_ind;
  d.delta_C = diff.transpose() * x_clu;
  d.mu_I1 = a1.transpose() * x_ind + eta_ind;
  d.mu_I0 = a0.transpose() * x_ind + eta_ind;
  d.mu_C1 = a1.transpose() * x_clu + eta_clu;
  d.mu_C0 = a0.transpose() * x_clu + eta_clu;
  return d;
}

EstimandDraw binary_draw(const FitData& data, const ParameterState& state) {
  const int K = data.K;
  const auto& a1 = state.outcome.coef(OutcomeGroup::AlwaysTreated);
  const auto& a0 = state.outcome.coef(OutcomeGroup::AlwaysControl);
  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(K), s0 = Eigen::VectorXd::Zero(K);
  Eigen::VectorXd c1 = Eigen::VectorXd::Zero(K), c0 = Eigen::VectorXd::Zero(K);
  Eigen::VectorXd w1(K), w0(K);
  long n_a = 0;
  int clusters_with_a = 0;
  for (int c = 0; c < data.n_clusters; ++c) {
    w1.setZero();
    w0.setZero();
    int count = 0;
    for (int i : data.members[c]) {
      if (state.labels[i] != Stratum::AlwaysSurvivor) continue;
      const auto x = data.xo.row(i).transpose();
      for (int k = 0; k < K; ++k) {
        w1(k) += binary_success_probability(a1.col(k).dot(x) + state.outcome.eta(c, k));
        w0(k) += binary_success_probability(a0.col(k).dot(x) + state.outcome.eta(c, k));
      }
      ++count;
    }
    if (count == 0) continue;
    s1 += w1;
    s0 += w0;
    c1 += w1 / count;
    c0 += w0 / count;
    n_a += count;
    ++clusters_with_a;
  }
  if (n_a == 0) throw NumericalError("no always-survivors in the current draw");
  EstimandDraw d;
  d.mu_I1 = s1 / static_cast<double>(n_a);
  d.mu_I0 = s0 / static_cast<double>(n_a);
  d.mu_C1 = c1 / static_cast<double>(clusters_with_a);
  d.mu_C0 = c0 / static_cast<double>(clusters_with_a);
  d.delta_I = d.mu_I1 - d.mu_I0;
  d.delta_C = d.mu_C1 - d.mu_C0;
  return d;
}

}  // namespace

EstimandDraw estimand_draw(const FitData& data, const ParameterState& state) {
  return data.binary ? binary_draw(data, state) : continuous_draw(data, state);
}

std::vector<std::string> ChainResult::scalar_names() const {
  std::vector<std::string> names;
  for (int k = 1; k <= K; ++k) names.push_back("delta_I_" + std::to_string(k));
  for (int k = 1; k <= K; ++k) names.push_back("delta_C_" + std::to_string(k));
  for (const char* n : {"rho1", "rho2", "rho12_b", "rho12_w", "pi00", "pi10", "pi11"}) names.emplace_back(n);
  return names;
}

std::vector<double> ChainResult::series(const std::string& name) const {
  std::vector<double> out;
  out.reserve(size());
  auto pull = [&](auto&& f) {
    for (std::size_t t = 0; t < size(); ++t) out.push_back(f(t));
    return out;
  };
  for (int k = 1; k <= K; ++k) {
    if (name == "delta_I_" + std::to_string(k)) return pull([&](std::size_t t) { return estimands[t].delta_I(k - 1); });
    if (name == "delta_C_" + std::to_string(k)) return pull([&](std::size_t t) { return estimands[t].delta_C(k - 1); });
  }
  if (name == "rho1") return pull([&](std::size_t t) { return iccs[t].rho1; });
  if (name == "rho2") return pull([&](std::size_t t) { return iccs[t].rho2; });
  if (name == "rho12_b") return pull([&](std::size_t t) { return iccs[t].rho12_between; });
  if (name == "rho12_w") return pull([&](std::size_t t) { return iccs[t].rho12_within; });
  if (name == "pi00") return pull([&](std::size_t t) { return pi[t][0]; });
  if (name == "pi10") return pull([&](std::size_t t) { return pi[t][1]; });
  if (name == "pi11") return pull([&](std::size_t t) { return pi[t][2]; });
  for (std::size_t j = 0; j < param_names.size(); ++j) {
    if (name == param_names[j]) return pull([&](std::size_t t) { return params[t](static_cast<Eigen::Index>(j)); });
  }
  throw ConfigError("unknown chain column: " + name);
}

const SummaryRow& PosteriorSummary::row(const std::string& name) const {
  for (const auto& r : rows) {
    if (r.name == name) return r;
  }
  throw ConfigError("no summary row named " + name);
}

double quantile_sorted(const std::vector<double>& sorted, double prob) {
  if (sorted.empty()) throw ConfigError("quantile of an empty sample");
  const double pos = (static_cast<double>(sorted.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

SummaryRow summarize_series(const std::string& name, std::vector<double> values) {
  if (values.size() < 2) throw ConfigError("summary needs at least 2 kept iterations");
  SummaryRow r;
  r.name = name;
  r.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  std::sort(values.begin(), values.end());
  r.median = quantile_sorted(values, 0.5);
  r.lower = quantile_sorted(values, 0.025);
  r.upper = quantile_sorted(values, 0.975);
  return r;
}

PosteriorSummary summarize(const ChainResult& chain) {
  if (chain.size() < 2) throw ConfigError("summary needs at least 2 kept iterations");
  PosteriorSummary s;
  for (const auto& name : chain.scalar_names()) s.rows.push_back(summarize_series(name, chain.series(name)));
  return s;
}

ReplicateMetrics replicate_metrics(const std::vector<ReplicateEstimate>& estimates, double truth) {
  if (estimates.size() < 2) throw ConfigError("replicate metrics need at least 2 replicates");
  const double r = static_cast<double>(estimates.size());
  ReplicateMetrics m;
  m.truth = truth;
  m.replicates = static_cast<int>(estimates.size());
  double sum = 0.0;
  int covered = 0;
  for (const auto& e : estimates) {
    sum += e.mean;
    if (e.lower <= truth && truth <= e.upper) ++covered;
  }
  m.mean_of_means = sum / r;
  double ss = 0.0;
  for (const auto& e : estimates) ss += (e.mean - m.mean_of_means) * (e.mean - m.mean_of_means);
  m.mc_error = std::sqrt(ss / (r - 1.0)) / std::sqrt(r);
  m.absolute_bias = m.mean_of_means - truth;
  if (truth != 0.0) m.percent_bias = 100.0 * m.absolute_bias / truth;
  m.coverage = covered / r;
  return m;
}

}  // namespace crtsace
