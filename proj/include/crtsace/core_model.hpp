// Domain types for a two-arm cluster-randomized trial with death truncation
// and nested missingness, plus dataset validation and observed-cell
// classification.
#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace crtsace {

/// Thrown for malformed user input: bad config, bad flags, bad arguments.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown when a dataset breaks a structural rule.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown when a sampler produces a non-finite value or meets an impossible
/// configuration (zero-probability event, non-SPD matrix after repair).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Principal stratum under monotonicity. The harmed stratum (01) has no
/// representation.
enum class Stratum : std::uint8_t {
  NeverSurvivor = 0,   // 00
  Protected = 1,       // 10
  AlwaysSurvivor = 2,  // 11
};

std::string_view stratum_code(Stratum g);

enum class ObservedCell : std::uint8_t {
  O11,               // treated, survived, outcome observed
  O10,               // treated, died
  O01,               // control, survived, outcome observed
  O00,               // control, died
  SurvivorMissingY,  // survived, outcome missing for reasons other than death
  UnknownSurvival,   // survival status (and outcome) missing
};

std::string_view cell_name(ObservedCell c);

/// Outcome state of one individual. Truncated is the death marker: the
/// outcome is undefined, not merely unobserved.
enum class OutcomeState : std::uint8_t { Observed, Missing, Truncated };

struct IndividualRecord {
  Eigen::VectorXd covariates;  // length p, intercept first
  std::optional<bool> survival;
  OutcomeState outcome_state = OutcomeState::Missing;
  Eigen::VectorXd outcome;  // length K when Observed, empty otherwise
  bool r_s = true;
  bool r_y = true;
  int treatment = -1;   // arm as recorded on the row; -1 inherits the cluster's
  int source_row = -1;  // 1-based data line in the source file, if any
};

struct ClusterRecord {
  std::string cluster_id;
  int treatment = 0;
  std::vector<IndividualRecord> individuals;
};

struct TrialDataset {
  std::vector<ClusterRecord> clusters;
  int K = 2;  // outcome dimension
  int p = 1;  // covariate dimension including the intercept
  bool binary_outcomes = false;

  std::size_t total_individuals() const;
};

struct Violation {
  int cluster = -1;
  int individual = -1;
  int source_row = -1;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;
  bool ok() const { return violations.empty(); }
  std::string to_string() const;
};

ValidationReport validate_dataset(const TrialDataset& raw);

/// Maps one individual's flags to its observed cell. `s` is ignored when
/// r_s is false. Throws DataError on flag combinations that cannot occur.
ObservedCell classify_cell(int z, bool r_s, std::optional<bool> s, bool r_y);

ObservedCell classify(const IndividualRecord& rec, int treatment);

}  // namespace crtsace
