#include "crtsace/diagnostics.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "crtsace/rand_dist.hpp"

namespace crtsace {

double batch_means_variance(const double* x, std::size_t m) {
  const auto batches = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(m))));
  if (batches < 2) throw ConfigError("window too short for batch means");
  const std::size_t len = m / batches;
  std::vector<double> means(batches);
  for (std::size_t b = 0; b < batches; ++b) {
    means[b] = std::accumulate(x + b * len, x + (b + 1) * len, 0.0) / static_cast<double>(len);
  }
  const double grand = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(batches);
  double ss = 0.0;
  for (double v : means) ss += (v - grand) * (v - grand);
  // Var(batch mean) / number of batches estimates Var(window mean).
  return ss / static_cast<double>(batches - 1) / static_cast<double>(batches);
}

GewekeResult geweke(const std::vector<double>& series) {
  const std::size_t n = series.size();
  if (n < kGewekeMinValues)
    throw ConfigError("geweke needs at least " + std::to_string(kGewekeMinValues) + " values, got " +
                      std::to_string(n));
  for (double v : series) {
    if (!std::isfinite(v)) throw NumericalError("geweke: non-finite value in series");
  }
  GewekeResult r;
  const auto na = static_cast<std::size_t>(std::floor(kGewekeFirst * static_cast<double>(n)));
  const auto nb = static_cast<std::size_t>(std::floor(kGewekeLast * static_cast<double>(n)));
  r.window_a = {0, na};
  r.window_b = {n - nb, n};
  const double* a = series.data();
  const double* b = series.data() + (n - nb);
  const double mean_a = std::accumulate(a, a + na, 0.0) / static_cast<double>(na);
  const double mean_b = std::accumulate(b, b + nb, 0.0) / static_cast<double>(nb);
  const double var = batch_means_variance(a, na) + batch_means_variance(b, nb);
  if (!(var > 0.0)) throw NumericalError("degenerate variance");
  r.z = (mean_a - mean_b) / std::sqrt(var);
  r.p = 2.0 * (1.0 - normal_cdf(std::fabs(r.z)));
  r.p = std::min(1.0, std::max(0.0, r.p));
  return r;
}

std::vector<GewekeRow> geweke_table(const ChainResult& chain) {
  std::vector<GewekeRow> rows;
  auto names = chain.scalar_names();
  names.insert(names.end(), chain.param_names.begin(), chain.param_names.end());
  for (const auto& name : names) {
    try {
      rows.push_back({name, geweke(chain.series(name))});
    } catch (const NumericalError&) {
      // constant column (e.g. a fixed correlation); nothing to assess
    }
  }
  return rows;
}

std::vector<std::string> trace_columns(const ChainResult& chain) {
  std::vector<std::string> cols{"iter"};
  for (const auto& n : chain.scalar_names()) cols.push_back(n);
  for (const auto& n : chain.param_names) cols.push_back(n);
  return cols;
}

void trace_export(const ChainResult& chain, const std::string& path) {
  if (chain.size() == 0) throw ConfigError("cannot export an empty chain");
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  const auto cols = trace_columns(chain);
  for (std::size_t j = 0; j < cols.size(); ++j) out << (j ? "," : "") << cols[j];
  out << '\n';
  char buf[32];
  auto put = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << ',' << buf;
  };
  for (std::size_t t = 0; t < chain.size(); ++t) {
    out << chain.iteration[t];
    const auto& e = chain.estimands[t];
    for (int k = 0; k < chain.K; ++k) put(e.delta_I(k));
    for (int k = 0; k < chain.K; ++k) put(e.delta_C(k));
    const auto& icc = chain.iccs[t];
    put(icc.rho1);
    put(icc.rho2);
    put(icc.rho12_between);
    put(icc.rho12_within);
    for (double v : chain.pi[t]) put(v);
    if (!chain.param_names.empty()) {
      for (Eigen::Index j = 0; j < chain.params[t].size(); ++j) put(chain.params[t](j));
    }
    out << '\n';
  }
  if (!out) throw ConfigError("write failed for " + path);
}

ChainResult trace_import(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path + ": empty file");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  int K = 0;
  while (static_cast<std::size_t>(K + 1) < header.size() && header[K + 1].rfind("delta_I_", 0) == 0) ++K;
  ChainResult chain;
  chain.K = K;
  const std::size_t fixed = 1 + 2 * static_cast<std::size_t>(K) + 7;
  if (K == 0 || header.size() < fixed || header[0] != "iter") throw ConfigError(path + ": not a draws file");
  const auto expected = chain.scalar_names();
  for (std::size_t j = 0; j < expected.size(); ++j) {
    if (header[j + 1] != expected[j]) throw ConfigError(path + ": unexpected column " + header[j + 1]);
  }
  chain.param_names.assign(header.begin() + static_cast<std::ptrdiff_t>(fixed), header.end());
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<double> v;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) v.push_back(std::strtod(cell.c_str(), nullptr));
    if (v.size() != header.size()) throw ConfigError(path + ": wrong field count on line " + std::to_string(row));
    chain.iteration.push_back(static_cast<int>(v[0]));
    EstimandDraw e;
    e.delta_I = Eigen::Map<Eigen::VectorXd>(v.data() + 1, K);
    e.delta_C = Eigen::Map<Eigen::VectorXd>(v.data() + 1 + K, K);
    chain.estimands.push_back(std::move(e));
    const double* s = v.data() + 1 + 2 * K;
    chain.iccs.push_back({s[0], s[1], s[2], s[3]});
    chain.pi.push_back({s[4], s[5], s[6]});
    if (!chain.param_names.empty()) {
      chain.params.emplace_back(
          Eigen::Map<Eigen::VectorXd>(v.data() + fixed, static_cast<Eigen::Index>(chain.param_names.size())));
    }
  }
  return chain;
}

}  // namespace crtsace
