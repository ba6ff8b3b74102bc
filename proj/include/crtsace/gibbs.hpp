// The Gibbs engine: state initialization, one sweep in the fixed update
// order, missing-data augmentation, and chain bookkeeping.
#pragma once

#include <functional>

#include "crtsace/estimands.hpp"
#include "crtsace/model.hpp"
#include "crtsace/rand_dist.hpp"
#include "crtsace/strata.hpp"

namespace crtsace {

enum class InitMode { Random, Heuristic };

struct ChainConfig {
  int iterations = 10000;
  int burn_in = 2500;
  int thin = 1;
  std::uint64_t seed = 1;
  InitMode init_mode = InitMode::Heuristic;
  bool store_full_params = false;
  Augmentation augmentation = Augmentation::Collapsed;
  ModelSpec model;

  /// Throws ConfigError unless burn_in < iterations and thin >= 1.
  void validate() const;
  int kept() const { return (iterations - burn_in) / thin; }
};

/// Steps of one sweep, in execution order.
enum class SweepStep {
  Alpha,
  Eta,
  SigmaEta,
  SigmaE,  // rho_e for binary outcomes
  BetaGamma,
  Phi2,
  Chi,
  Membership,
  Estimands,
  ImputeOutcomes,
  ImputeUnknownSurvival,
  Latents,
};

const char* step_name(SweepStep s);

/// Called after every step with the state it produced.
using SweepObserver = std::function<void(int iteration, SweepStep step, const ParameterState& state)>;

ParameterState init_state(const FitData& data, const PriorSpec& prior, const ChainConfig& config, RngHandle& rng);

/// Membership refresh for individuals whose survival is observed: treated
/// decedents stay 00, control survivors stay 11, control decedents choose
/// between 00/10 from the strata model, treated survivors choose between
/// 11/10 weighted by the outcome likelihood of their (observed or imputed)
/// outcome.
void refresh_membership(const FitData& data, ParameterState& state, RngHandle& rng);

/// The distribution refresh_membership draws individual i's stratum from,
/// given everything else in the state. Unknown-survival individuals get the
/// strata-model probabilities.
StrataProbs membership_conditional(const FitData& data, const ParameterState& state, int i);

/// Re-impute outcomes of survivors whose outcome is missing (not by death).
void impute_missing_outcomes(const FitData& data, ParameterState& state, RngHandle& rng);

/// For individuals with unknown survival: draw G from the strata model,
/// deduce survival from (G, arm), and impute the outcome when alive.
void impute_unknown_survival(const FitData& data, ParameterState& state, RngHandle& rng);

/// One full sweep. `iteration` is used for error messages and the observer.
void gibbs_sweep(const FitData& data, ParameterState& state, const PriorSpec& prior, RngHandle& rng,
                 int iteration, const SweepObserver& observer = {});

/// Flattened parameter vector and names for the optional full trace.
std::vector<std::string> parameter_names(const FitData& data);
Eigen::VectorXd parameter_vector(const FitData& data, const ParameterState& state);

/// `data.augmentation` must equal `config.augmentation`.
ChainResult run_chain(const FitData& data, const PriorSpec& prior, const ChainConfig& config, RngHandle& rng,
                      const SweepObserver& observer = {});
/// Adopts config.augmentation before running.
ChainResult run_chain(FitData&& data, const PriorSpec& prior, const ChainConfig& config, RngHandle& rng,
                      const SweepObserver& observer = {});
/// Runs from a caller-supplied state (e.g. the data-generating parameters).
ChainResult run_chain_from(const FitData& data, const PriorSpec& prior, const ChainConfig& config,
                           ParameterState state, RngHandle& rng, const SweepObserver& observer = {});
ChainResult run_chain(const TrialDataset& ds, const PriorSpec& prior, const ChainConfig& config, RngHandle& rng,
                      const SweepObserver& observer = {});
/// Uses stream 0 of config.seed.
ChainResult run_chain(const TrialDataset& ds, const PriorSpec& prior, const ChainConfig& config);

}  // namespace crtsace
