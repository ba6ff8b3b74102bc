#include "crtsace/core_model.hpp"

#include <cmath>
#include <sstream>

namespace crtsace {

std::string_view stratum_code(Stratum g) {
  switch (g) {
    case Stratum::NeverSurvivor:
      return "00";
    case Stratum::Protected:
      return "10";
    case Stratum::AlwaysSurvivor:
      return "11";
  }
  return "??";
}

std::string_view cell_name(ObservedCell c) {
  switch (c) {
    case ObservedCell::O11:
      return "O11";
    case ObservedCell::O10:
      return "O10";
    case ObservedCell::O01:
      return "O01";
    case ObservedCell::O00:
      return "O00";
    case ObservedCell::SurvivorMissingY:
      return "SurvivorMissingY";
    case ObservedCell::UnknownSurvival:
      return "UnknownSurvival";
  }
  return "?";
}

std::size_t TrialDataset::total_individuals() const {
  std::size_t n = 0;
  for (const auto& c : clusters) n += c.individuals.size();
  return n;
}

std::string ValidationReport::to_string() const {
  if (ok()) return "dataset valid\n";
  std::ostringstream os;
  for (const auto& v : violations) {
    if (v.source_row >= 0) os << "row " << v.source_row << ": ";
    if (v.cluster >= 0) os << "cluster " << v.cluster;
    if (v.individual >= 0) os << " individual " << v.individual;
    os << ": " << v.message << '\n';
  }
  return os.str();
}

namespace {

void check_individual(const TrialDataset& ds, int ci, int ji, const IndividualRecord& r,
                      std::vector<Violation>& out) {
  auto report = [&](std::string msg) {
    out.push_back({ci, ji, r.source_row, std::move(msg)});
  };
  if (r.covariates.size() != ds.p) {
    report("covariate vector has length " + std::to_string(r.covariates.size()) +
           ", expected " + std::to_string(ds.p));
  } else if (!r.covariates.allFinite()) {
    report("non-finite covariate");
  } else if (ds.p > 0 && r.covariates(0) != 1.0) {
    report("first covariate must be the intercept (1)");
  }

  const bool has_y = r.outcome_state == OutcomeState::Observed;
  if (has_y) {
    if (r.outcome.size() != ds.K) {
      report("outcome has " + std::to_string(r.outcome.size()) + " components, expected " +
             std::to_string(ds.K));
    } else if (!r.outcome.allFinite()) {
      report("non-finite outcome");
    } else if (ds.binary_outcomes) {
      for (int k = 0; k < r.outcome.size(); ++k) {
        if (r.outcome(k) != 0.0 && r.outcome(k) != 1.0) {
          report("binary outcome component is not 0/1");
          break;
        }
      }
    }
  }

  if (!r.r_s) {
    if (r.survival.has_value()) report("survival present although r_s=0");
    if (has_y) report("outcome present without survival status");
    if (r.r_y) report("r_y=1 although survival status is missing");
    if (r.outcome_state == OutcomeState::Truncated) report("truncation marker without survival status");
    return;
  }
  if (!r.survival.has_value()) {
    report("survival missing although r_s=1");
    return;
  }
  if (!*r.survival) {
    if (has_y) report("outcome present for a decedent");
    if (!r.r_y) report("r_y=0 for a decedent (truncated outcomes carry r_y=1)");
    if (r.outcome_state == OutcomeState::Missing) report("decedent outcome must be the truncation marker");
    return;
  }
  if (r.outcome_state == OutcomeState::Truncated) report("truncation marker on a survivor");
  if (r.r_y && !has_y) report("r_y=1 but outcome absent");
  if (!r.r_y && has_y) report("outcome present although r_y=0");
}

}  // namespace

ValidationReport validate_dataset(const TrialDataset& raw) {
  ValidationReport rep;
  if (raw.K < 1) rep.violations.push_back({-1, -1, -1, "outcome dimension K must be >= 1"});
  if (raw.p < 1) rep.violations.push_back({-1, -1, -1, "covariate dimension p must be >= 1"});
  if (raw.clusters.empty()) rep.violations.push_back({-1, -1, -1, "dataset has no clusters"});
  for (int ci = 0; ci < static_cast<int>(raw.clusters.size()); ++ci) {
    const auto& c = raw.clusters[ci];
    if (c.treatment != 0 && c.treatment != 1) {
      rep.violations.push_back({ci, -1, -1, "treatment must be 0 or 1"});
    }
    if (c.individuals.empty()) {
      rep.violations.push_back({ci, -1, -1, "cluster has no individuals"});
    }
    bool arm_reported = false;
    for (int ji = 0; ji < static_cast<int>(c.individuals.size()); ++ji) {
      const auto& ind = c.individuals[ji];
      if (ind.treatment >= 0 && ind.treatment != c.treatment && !arm_reported) {
        rep.violations.push_back({ci, ji, ind.source_row, "treatment not cluster-constant"});
        arm_reported = true;
      }
      check_individual(raw, ci, ji, c.individuals[ji], rep.violations);
    }
  }
  return rep;
}

ObservedCell classify_cell(int z, bool r_s, std::optional<bool> s, bool r_y) {
  if (z != 0 && z != 1) throw DataError("treatment must be 0 or 1");
  if (!r_s) {
    if (r_y) throw DataError("r_y=1 although survival status is missing");
    return ObservedCell::UnknownSurvival;
  }
  if (!s.has_value()) throw DataError("survival missing although r_s=1");
  if (!*s) {
    if (!r_y) throw DataError("r_y=0 for a decedent");
    return z == 1 ? ObservedCell::O10 : ObservedCell::O00;
  }
  if (!r_y) return ObservedCell::SurvivorMissingY;
  return z == 1 ? ObservedCell::O11 : ObservedCell::O01;
}

ObservedCell classify(const IndividualRecord& rec, int treatment) {
  return classify_cell(treatment, rec.r_s, rec.r_s ? rec.survival : std::nullopt, rec.r_y);
}

}  // namespace crtsace
