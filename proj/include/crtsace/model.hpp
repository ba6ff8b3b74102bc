// Shared sampler state: the flattened design the updates operate on, the
// prior hyperparameters, and one full Gibbs state.
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "crtsace/core_model.hpp"

namespace crtsace {

/// The three (stratum, arm) groups with a well-defined potential outcome.
enum class OutcomeGroup : std::uint8_t {
  AlwaysTreated = 0,     // (11, 1)
  AlwaysControl = 1,     // (11, 0)
  ProtectedTreated = 2,  // (10, 1)
};
inline constexpr int kNumGroups = 3;

/// Group for a stratum under an arm, or nullopt when the outcome is
/// undefined (never-survivors, protected under control).
std::optional<OutcomeGroup> group_of(Stratum g, int arm);
/// Same as group_of but throws ConfigError for undefined combinations.
OutcomeGroup require_group(Stratum g, int arm);
const char* group_name(OutcomeGroup g);

/// Alive under `arm` given stratum (monotonicity).
inline bool survives(Stratum g, int arm) {
  return arm == 1 ? g != Stratum::NeverSurvivor : g == Stratum::AlwaysSurvivor;
}

/// Which covariate columns (0 = intercept) enter each sub-model. Empty means
/// all columns.
struct ModelSpec {
  std::vector<int> strata_columns;
  std::vector<int> outcome_columns;
};

/// How augmented data enter the parameter updates. Full: every imputed
/// survival status and outcome is treated as data. Collapsed: the updates
/// condition only on observed pieces; imputations are still drawn each sweep
/// for the estimands. Both target the same posterior; collapsed mixes far
/// faster when missingness concentrates in one stratum.
enum class Augmentation : std::uint8_t { Full, Collapsed };

/// Flattened, immutable view of a validated dataset.
struct FitData {
  int n_clusters = 0;
  int K = 2;
  bool binary = false;
  Eigen::MatrixXd xs;  // N x ps, strata design
  Eigen::MatrixXd xo;  // N x po, outcome design
  std::vector<int> cluster;  // individual -> cluster
  std::vector<int> arm;      // cluster -> treatment
  std::vector<ObservedCell> cell;
  Eigen::MatrixXd y_obs;  // N x K, NaN where not observed
  std::vector<std::vector<int>> members;  // cluster -> individuals
  Augmentation augmentation = Augmentation::Collapsed;
  Eigen::MatrixXd xs_gram;  // xs^T xs over strata_informative individuals

  // In collapsed mode, pieces that are pure draws from the current
  // parameters (unknown survival, imputed outcomes) are left out of the
  // parameter updates; only the imputation steps and estimands use them.
  bool strata_informative(int i) const {
    return augmentation == Augmentation::Full || cell[i] != ObservedCell::UnknownSurvival;
  }
  bool outcome_informative(int i) const {
    return augmentation == Augmentation::Full || cell[i] == ObservedCell::O11 || cell[i] == ObservedCell::O01;
  }
  /// Switches mode and recomputes xs_gram.
  void set_augmentation(Augmentation mode);

  int n() const { return static_cast<int>(cell.size()); }
  int ps() const { return static_cast<int>(xs.cols()); }
  int po() const { return static_cast<int>(xo.cols()); }
  int arm_of(int i) const { return arm[cluster[i]]; }

  static FitData from_dataset(const TrialDataset& ds, const ModelSpec& spec = {});
};

/// Conjugate prior hyperparameters.
struct PriorSpec {
  // vec(alpha_g) is column-major over the po x K coefficient matrix.
  std::array<Eigen::VectorXd, kNumGroups> a;
  std::array<Eigen::MatrixXd, kNumGroups> Sigma_a;
  double d = 2.0;
  Eigen::MatrixXd V_eta;
  Eigen::MatrixXd V_e;
  Eigen::VectorXd b;
  Eigen::MatrixXd Lambda;
  Eigen::VectorXd r;
  Eigen::MatrixXd Gamma;
  double g = 0.001;
  double h = 0.001;

  /// MVN(0, diag(1000)) coefficients, IW(2, I) covariances, IG(0.001, 0.001).
  static PriorSpec diffuse(int ps, int po, int K);
  /// Throws ConfigError unless dimensions match and SPD/positivity hold.
  void validate(int ps, int po, int K) const;
};

struct StrataParams {
  Eigen::VectorXd beta;
  Eigen::VectorXd gamma;
  Eigen::VectorXd chi;  // per cluster
  double phi2 = 1.0;
};

/// q for every individual; w only where the stratum is not 00 (NaN otherwise).
struct StrataLatents {
  Eigen::VectorXd q;
  Eigen::VectorXd w;
};

struct OutcomeParams {
  std::array<Eigen::MatrixXd, kNumGroups> alpha;  // each po x K
  Eigen::MatrixXd Sigma_eta;                      // K x K
  Eigen::MatrixXd Sigma_e;                        // K x K
  Eigen::MatrixXd eta;                            // n_clusters x K
  double rho_e = 0.0;                             // binary outcomes only

  const Eigen::MatrixXd& coef(OutcomeGroup g) const { return alpha[static_cast<int>(g)]; }
  Eigen::MatrixXd& coef(OutcomeGroup g) { return alpha[static_cast<int>(g)]; }
};

/// One full Gibbs state.
struct ParameterState {
  StrataParams strata;
  StrataLatents latents;
  OutcomeParams outcome;
  std::vector<Stratum> labels;
  std::vector<std::uint8_t> alive;  // current survival (observed or imputed)
  Eigen::MatrixXd y;       // N x K outcome used by the updates (latent U for binary); NaN if undefined
  Eigen::MatrixXd y_bin;   // N x K current binary outcome (binary mode only)

  bool has_outcome(int i) const { return alive[i] != 0; }
};

}  // namespace crtsace
