#include "crtsace/simgen.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <numeric>
#include <thread>

#include "crtsace/strata.hpp"

namespace crtsace {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Eigen::MatrixXd cols2(std::initializer_list<double> c1, std::initializer_list<double> c2) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(c1.size()), 2);
  Eigen::Index r = 0;
  for (double v : c1) m(r++, 0) = v;
  r = 0;
  for (double v : c2) m(r++, 1) = v;
  return m;
}

Eigen::VectorXd vecd(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

double logistic(double t) { return 1.0 / (1.0 + std::exp(-t)); }

struct Individual {
  Eigen::Vector4d x;  // 1, X1, X2, N_i
  Stratum g = Stratum::AlwaysSurvivor;
};

// Covariates and stratum of one individual in a cluster with effect chi.
Individual draw_individual(const ScenarioConfig& cfg, int size, double chi, RngHandle& rng) {
  Individual ind;
  ind.x << 1.0, 10.0 * rng.normal(), -10.0 + 20.0 * rng.uniform(), static_cast<double>(size);
  const auto ps = cfg.beta.size();
  const double eb = ind.x.head(ps).dot(cfg.beta) + chi;
  const double eg = ind.x.head(ps).dot(cfg.gamma) + chi;
  if (eb + rng.normal() > 0.0) {
    ind.g = Stratum::NeverSurvivor;
  } else {
    ind.g = eg + rng.normal() > 0.0 ? Stratum::Protected : Stratum::AlwaysSurvivor;
  }
  return ind;
}

void check_block(const Eigen::MatrixXd& m, Eigen::Index r, Eigen::Index c, const std::string& name) {
  if (m.rows() != r || m.cols() != c) {
    throw ConfigError(name + " must be " + std::to_string(r) + "x" + std::to_string(c));
  }
  if (!m.allFinite()) throw ConfigError(name + " must be finite");
}

}  // namespace

void ScenarioConfig::validate() const {
  if (n_clusters < 2) throw ConfigError("scenario needs at least 2 clusters");
  if (!(mean_cluster_size >= 1.0)) throw ConfigError("mean_cluster_size must be >= 1");
  if (!(cv >= 0.0)) throw ConfigError("cv must be >= 0");
  if (K < 1) throw ConfigError("K must be >= 1");
  if (beta.size() < 1 || beta.size() > kSimCovariates) throw ConfigError("beta must have 1 to 4 entries");
  if (gamma.size() != beta.size()) throw ConfigError("gamma must have the same length as beta");
  for (int g = 0; g < kNumGroups; ++g) {
    check_block(alpha[g], kSimCovariates, K, std::string("alpha_") + group_name(static_cast<OutcomeGroup>(g)));
  }
  check_block(Sigma_eta, K, K, "Sigma_eta");
  check_block(Sigma_e, K, K, "Sigma_e");
  if (!SpdMatrix::is_spd(Sigma_eta)) throw ConfigError("Sigma_eta must be SPD");
  if (!SpdMatrix::is_spd(Sigma_e)) throw ConfigError("Sigma_e must be SPD");
  if (!(phi2 >= 0.0)) throw ConfigError("phi2 must be >= 0");
  if (m1.size() != kSimCovariates || m2.size() != kSimCovariates) throw ConfigError("m1 and m2 must have 4 entries");
  if (nmar_violation && nmar_violation->outcome_shift.size() != K) {
    throw ConfigError("nmar_violation.outcome_shift must have K entries");
  }
  if (binary_mode && K != 2) throw ConfigError("binary mode requires K = 2");
}

ModelSpec ScenarioConfig::model_spec() const {
  ModelSpec spec;
  for (int j = 0; j < beta.size(); ++j) spec.strata_columns.push_back(j);
  for (int j = 0; j < kSimCovariates; ++j) spec.outcome_columns.push_back(j);
  return spec;
}

std::vector<std::string> preset_names() { return {"I", "II", "III", "IV", "V", "VI", "VII", "VIII"}; }

ScenarioConfig scenario_preset(const std::string& name) {
  const auto names = preset_names();
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) {
    std::string list;
    for (const auto& n : names) list += (list.empty() ? "" : ", ") + n;
    throw ConfigError("unknown scenario '" + name + "'; valid presets: " + list);
  }
  const auto idx = static_cast<int>(it - names.begin());
  ScenarioConfig c;
  c.name = name;
  c.mean_cluster_size = idx % 2 == 0 ? 25.0 : 50.0;
  c.n_clusters = idx < 4 ? 60 : 30;
  const bool rarer_survival = idx == 2 || idx == 3 || idx == 6 || idx == 7;
  c.beta = rarer_survival ? vecd({-5.5, 0.5, -0.7}) : vecd({-8.5, 0.5, -0.7});
  c.gamma = rarer_survival ? vecd({-5.8, -0.6, 0.4}) : vecd({-8.8, -0.6, 0.4});
  c.alpha[static_cast<int>(OutcomeGroup::AlwaysTreated)] = cols2({-13, -0.5, -0.2, 0.3}, {-11, -0.4, 0.3, 0.3});
  c.alpha[static_cast<int>(OutcomeGroup::AlwaysControl)] = cols2({14, 0.5, -0.4, -0.4}, {12, 0.4, 0.4, -0.3});
  c.alpha[static_cast<int>(OutcomeGroup::ProtectedTreated)] = cols2({2, 2, 2, 1}, {-9, -1, 0.8, -1});
  c.Sigma_eta.resize(2, 2);
  c.Sigma_eta << 1.0, 0.71, 0.71, 2.0;
  c.Sigma_e.resize(2, 2);
  c.Sigma_e << 5.0, 3.54, 3.54, 10.0;
  c.phi2 = 1.0;
  c.cv = 0.3;
  c.m1 = vecd({10.5, 2, -0.1, 0.3});
  c.m2 = vecd({-0.25, 0.5, -0.5, 0.2});
  return c;
}

NmarViolation default_nmar_violation(int K) {
  NmarViolation v;
  v.survival_coef = 4.22;
  v.outcome_coef = 3.10;
  v.outcome_shift = Eigen::VectorXd::Constant(K, 2.0);
  return v;
}

std::vector<int> draw_cluster_sizes(int n_clusters, double mean, double cv, RngHandle& rng) {
  std::vector<int> sizes(static_cast<std::size_t>(n_clusters));
  for (auto& s : sizes) {
    double v = mean;
    if (cv > 0.0) {
      const double shape = 1.0 / (cv * cv);
      v = rng.gamma(shape) * mean / shape;
    }
    s = std::max(1, static_cast<int>(std::lround(v)));
  }
  return sizes;
}

SimulatedTrial generate_dataset(const ScenarioConfig& cfg, RngHandle& rng) {
  cfg.validate();
  const int K = cfg.K;
  SimulatedTrial out;
  auto& ds = out.data;
  auto& lat = out.latent;
  ds.K = K;
  ds.p = kSimCovariates;
  ds.binary_outcomes = cfg.binary_mode;

  lat.cluster_size = draw_cluster_sizes(cfg.n_clusters, cfg.mean_cluster_size, cfg.cv, rng);
  std::vector<int> arms(static_cast<std::size_t>(cfg.n_clusters), 0);
  for (int c = 0; c < cfg.n_clusters / 2; ++c) arms[c] = 1;
  std::shuffle(arms.begin(), arms.end(), rng.engine());

  const long total = std::accumulate(lat.cluster_size.begin(), lat.cluster_size.end(), 0L);
  lat.chi.resize(cfg.n_clusters);
  lat.eta.resize(cfg.n_clusters, K);
  lat.y1 = Eigen::MatrixXd::Constant(total, K, kNaN);
  lat.y0 = Eigen::MatrixXd::Constant(total, K, kNaN);
  lat.u = Eigen::VectorXd::Zero(total);
  const Eigen::VectorXd zero_k = Eigen::VectorXd::Zero(K);
  const auto& nmar = cfg.nmar_violation;
  // Missingness and the hidden covariate use their own streams so that a
  // given seed yields the same population with or without the violation.
  RngHandle miss_rng(rng.seed(), rng.stream_id() ^ 0x4D15ULL << 40);
  RngHandle u_rng(rng.seed(), rng.stream_id() ^ 0x0EE1ULL << 40);

  long row = 0;
  for (int c = 0; c < cfg.n_clusters; ++c) {
    ClusterRecord cl;
    cl.cluster_id = "c" + std::to_string(c + 1);
    cl.treatment = arms[c];
    lat.chi(c) = std::sqrt(cfg.phi2) * rng.normal();
    const Eigen::VectorXd eta = sample_mvn(zero_k, cfg.Sigma_eta, rng);
    lat.eta.row(c) = eta.transpose();
    for (int j = 0; j < lat.cluster_size[c]; ++j, ++row) {
      const Individual ind = draw_individual(cfg, lat.cluster_size[c], lat.chi(c), rng);
      lat.stratum.push_back(ind.g);
      const double u = nmar ? u_rng.normal() : 0.0;
      lat.u(row) = u;
      for (int arm : {1, 0}) {
        const auto grp = group_of(ind.g, arm);
        if (!grp) continue;
        Eigen::VectorXd y = cfg.alpha[static_cast<int>(*grp)].transpose() * ind.x + eta;
        y += sample_mvn(zero_k, cfg.Sigma_e, rng);
        if (nmar && arm == 1) y += nmar->outcome_shift * u;
        if (cfg.binary_mode) {
          for (int k = 0; k < K; ++k) y(k) = y(k) > 0.0 ? 1.0 : 0.0;
        }
        (arm == 1 ? lat.y1 : lat.y0).row(row) = y.transpose();
      }
      const bool alive = survives(ind.g, cl.treatment);
      lat.survival.push_back(alive ? 1 : 0);

      IndividualRecord rec;
      rec.covariates = ind.x;
      rec.treatment = cl.treatment;
      const double v_s = miss_rng.uniform();
      const double v_y = miss_rng.uniform();
      rec.r_s = v_s < logistic(ind.x.dot(cfg.m1) + (nmar ? nmar->survival_coef * u : 0.0));
      if (!rec.r_s) {
        rec.survival.reset();
        rec.r_y = false;
        rec.outcome_state = OutcomeState::Missing;
      } else if (!alive) {
        rec.survival = false;
        rec.r_y = true;
        rec.outcome_state = OutcomeState::Truncated;
      } else {
        rec.survival = true;
        rec.r_y = v_y < logistic(ind.x.dot(cfg.m2) + (nmar ? nmar->outcome_coef * u : 0.0));
        if (rec.r_y) {
          rec.outcome_state = OutcomeState::Observed;
          rec.outcome = (cl.treatment == 1 ? lat.y1 : lat.y0).row(row).transpose();
        } else {
          rec.outcome_state = OutcomeState::Missing;
        }
      }
      cl.individuals.push_back(std::move(rec));
    }
    ds.clusters.push_back(std::move(cl));
  }
  return out;
}

GroundTruth ground_truth(const ScenarioConfig& cfg, std::uint64_t seed, long min_individuals, int min_clusters) {
  cfg.validate();
  const int K = cfg.K;
  const int n_clusters =
      std::max(min_clusters, static_cast<int>(std::ceil(static_cast<double>(min_individuals) / cfg.mean_cluster_size)));
  RngHandle rng(seed, 0xC0FFEEULL);
  auto sizes = draw_cluster_sizes(n_clusters, cfg.mean_cluster_size, cfg.cv, rng);
  // Top up when the realized sizes fall short of the individual target.
  long drawn = std::accumulate(sizes.begin(), sizes.end(), 0L);
  while (drawn < min_individuals) {
    sizes.push_back(draw_cluster_sizes(1, cfg.mean_cluster_size, cfg.cv, rng)[0]);
    drawn += sizes.back();
  }
  const int n_clusters_total = static_cast<int>(sizes.size());
  const auto& a1 = cfg.alpha[static_cast<int>(OutcomeGroup::AlwaysTreated)];
  const auto& a0 = cfg.alpha[static_cast<int>(OutcomeGroup::AlwaysControl)];
  const Eigen::VectorXd zero_k = Eigen::VectorXd::Zero(K);

  // Per batch of clusters: sums of tau over A, |A|, sums of cluster means,
  // and the number of clusters with A non-empty.
  constexpr int kBatches = 20;
  std::vector<Eigen::VectorXd> ind_sum(kBatches, Eigen::VectorXd::Zero(K));
  std::vector<Eigen::VectorXd> clu_sum(kBatches, Eigen::VectorXd::Zero(K));
  std::vector<double> ind_n(kBatches, 0.0), clu_n(kBatches, 0.0);
  std::array<double, 3> counts{0, 0, 0};
  long total = 0;
  Eigen::VectorXd within(K);
  for (int c = 0; c < n_clusters_total; ++c) {
    const int b = c % kBatches;
    const double chi = std::sqrt(cfg.phi2) * rng.normal();
    // eta only matters for binary outcomes, where it does not cancel.
    const Eigen::VectorXd eta = cfg.binary_mode ? sample_mvn(zero_k, cfg.Sigma_eta, rng) : zero_k;
    within.setZero();
    int count = 0;
    for (int j = 0; j < sizes[c]; ++j) {
      const Individual ind = draw_individual(cfg, sizes[c], chi, rng);
      counts[static_cast<int>(ind.g)] += 1.0;
      ++total;
      if (ind.g != Stratum::AlwaysSurvivor) continue;
      Eigen::VectorXd tau(K);
      if (cfg.binary_mode) {
        for (int k = 0; k < K; ++k) {
          tau(k) = normal_cdf(a1.col(k).dot(ind.x) + eta(k)) - normal_cdf(a0.col(k).dot(ind.x) + eta(k));
        }
      } else {
        tau = (a1 - a0).transpose() * ind.x;
      }
      within += tau;
      ++count;
    }
    if (count == 0) continue;
    ind_sum[b] += within;
    ind_n[b] += count;
    clu_sum[b] += within / count;
    clu_n[b] += 1.0;
  }

  GroundTruth t;
  t.clusters = n_clusters_total;
  t.individuals = total;
  for (int g = 0; g < 3; ++g) t.pi[g] = counts[g] / static_cast<double>(total);
  auto pooled = [&](const std::vector<Eigen::VectorXd>& sums, const std::vector<double>& ns, Eigen::VectorXd& est,
                    Eigen::VectorXd& se) {
    Eigen::VectorXd s = Eigen::VectorXd::Zero(K);
    double n = 0.0;
    for (int b = 0; b < kBatches; ++b) {
      s += sums[b];
      n += ns[b];
    }
    if (n == 0.0) throw NumericalError("ground truth: population has no always-survivors");
    est = s / n;
    Eigen::VectorXd ss = Eigen::VectorXd::Zero(K);
    for (int b = 0; b < kBatches; ++b) {
      if (ns[b] == 0.0) continue;
      const Eigen::VectorXd d = sums[b] / ns[b] - est;
      ss += d.cwiseProduct(d);
    }
    se = (ss / (kBatches - 1.0) / kBatches).cwiseSqrt();
  };
  pooled(ind_sum, ind_n, t.delta_I, t.delta_I_se);
  pooled(clu_sum, clu_n, t.delta_C, t.delta_C_se);
  if (K == 2) t.icc = compute_iccs(cfg.Sigma_eta, cfg.Sigma_e);
  return t;
}

SampleEstimands sample_estimands(const ScenarioConfig& cfg, const SimulatedTrial& sim) {
  const int K = cfg.K;
  const auto& a1 = cfg.alpha[static_cast<int>(OutcomeGroup::AlwaysTreated)];
  const auto& a0 = cfg.alpha[static_cast<int>(OutcomeGroup::AlwaysControl)];
  Eigen::VectorXd ind = Eigen::VectorXd::Zero(K), clu = Eigen::VectorXd::Zero(K), within(K), tau(K);
  double n_ind = 0.0, n_clu = 0.0;
  std::size_t row = 0;
  for (std::size_t c = 0; c < sim.data.clusters.size(); ++c) {
    within.setZero();
    int count = 0;
    for (const auto& rec : sim.data.clusters[c].individuals) {
      if (sim.latent.stratum[row++] != Stratum::AlwaysSurvivor) continue;
      if (cfg.binary_mode) {
        for (int k = 0; k < K; ++k) {
          const double eta = sim.latent.eta(static_cast<Eigen::Index>(c), k);
          tau(k) = normal_cdf(a1.col(k).dot(rec.covariates) + eta) - normal_cdf(a0.col(k).dot(rec.covariates) + eta);
        }
      } else {
        tau = (a1 - a0).transpose() * rec.covariates;
      }
      within += tau;
      ++count;
    }
    if (count == 0) continue;
    ind += within;
    n_ind += count;
    clu += within / count;
    n_clu += 1.0;
  }
  if (n_ind == 0.0) throw NumericalError("generated trial has no always-survivors");
  return {ind / n_ind, clu / n_clu};
}

std::vector<std::string> replicate_parameters(int K) {
  std::vector<std::string> names;
  for (int k = 1; k <= K; ++k) names.push_back("delta_I_" + std::to_string(k));
  for (int k = 1; k <= K; ++k) names.push_back("delta_C_" + std::to_string(k));
  if (K == 2) {
    for (const char* n : {"rho1", "rho2", "rho12_b", "rho12_w"}) names.emplace_back(n);
  }
  for (const char* n : {"pi00", "pi10", "pi11"}) names.emplace_back(n);
  return names;
}

namespace {

double truth_of(const GroundTruth& t, const std::string& name) {
  const auto K = t.delta_I.size();
  for (Eigen::Index k = 0; k < K; ++k) {
    if (name == "delta_I_" + std::to_string(k + 1)) return t.delta_I(k);
    if (name == "delta_C_" + std::to_string(k + 1)) return t.delta_C(k);
  }
  if (name == "rho1") return t.icc.rho1;
  if (name == "rho2") return t.icc.rho2;
  if (name == "rho12_b") return t.icc.rho12_between;
  if (name == "rho12_w") return t.icc.rho12_within;
  if (name == "pi00") return t.pi[0];
  if (name == "pi10") return t.pi[1];
  if (name == "pi11") return t.pi[2];
  throw ConfigError("no truth for " + name);
}

}  // namespace

ReplicateTable run_replicates(const ScenarioConfig& config, const PriorSpec& prior, const ChainConfig& fit, int reps,
                              std::uint64_t seed, int jobs, const GroundTruth& truth) {
  if (reps < 2) throw ConfigError("replicate metrics need at least 2 replicates (--reps >= 2)");
  config.validate();
  fit.validate();
  ChainConfig chain_cfg = fit;
  chain_cfg.model = config.model_spec();

  ReplicateTable table;
  table.truth = truth;
  table.replicates.resize(static_cast<std::size_t>(reps));
  std::atomic<int> next{0};
  auto worker = [&]() {
    for (int r = next++; r < reps; r = next++) {
      auto& slot = table.replicates[static_cast<std::size_t>(r)];
      try {
        RngHandle data_rng(seed, static_cast<std::uint64_t>(r));
        const auto sim = generate_dataset(config, data_rng);
        slot.sample = sample_estimands(config, sim);
        RngHandle chain_rng(seed, static_cast<std::uint64_t>(r) + (1ULL << 32));
        const auto chain = run_chain(sim.data, prior, chain_cfg, chain_rng);
        slot.summary = summarize(chain);
        slot.completed = true;
      } catch (const std::exception& e) {
        slot.error = e.what();
      }
    }
  };
  const int n_threads = std::max(1, std::min(jobs, reps));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  for (const auto& rep : table.replicates) (rep.completed ? table.completed : table.aborted)++;
  if (table.completed >= 2) {
    for (const auto& name : replicate_parameters(config.K)) {
      std::vector<ReplicateEstimate> est;
      const bool is_delta = name.rfind("delta_", 0) == 0;
      int covered = 0;
      for (const auto& rep : table.replicates) {
        if (!rep.completed) continue;
        const auto& row = rep.summary.row(name);
        est.push_back({row.mean, row.lower, row.upper});
        if (is_delta) {
          const int k = std::stoi(name.substr(8)) - 1;
          const double t = (name[6] == 'I' ? rep.sample.delta_I : rep.sample.delta_C)(k);
          covered += row.lower <= t && t <= row.upper;
        }
      }
      MetricsRow mr{name, replicate_metrics(est, truth_of(truth, name)), std::nullopt};
      if (is_delta) mr.sample_coverage = static_cast<double>(covered) / static_cast<double>(est.size());
      table.rows.push_back(std::move(mr));
    }
  }
  return table;
}

ReplicateTable run_replicates(const ScenarioConfig& config, const PriorSpec& prior, const ChainConfig& fit, int reps,
                              std::uint64_t seed, int jobs) {
  return run_replicates(config, prior, fit, reps, seed, jobs, ground_truth(config, seed));
}

}  // namespace crtsace
