// Convergence checks (Geweke z-scores with batch-means variances) and the
// per-iteration trace file.
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "crtsace/estimands.hpp"

namespace crtsace {

struct GewekeResult {
  double z = 0.0;
  double p = 1.0;
  std::pair<std::size_t, std::size_t> window_a;  // [begin, end)
  std::pair<std::size_t, std::size_t> window_b;
};

inline constexpr double kGewekeFirst = 0.1;
inline constexpr double kGewekeLast = 0.5;
inline constexpr std::size_t kGewekeMinValues = 100;

/// Variance of a window mean by non-overlapping batch means with
/// floor(sqrt(m)) batches; a trailing remainder is dropped.
double batch_means_variance(const double* x, std::size_t m);

/// Compares the first 10% with the last 50% of the series. Needs at least
/// 100 values; throws NumericalError("degenerate variance") when a window
/// has zero batch variance.
GewekeResult geweke(const std::vector<double>& series);

struct GewekeRow {
  std::string name;
  GewekeResult result;
};

/// Geweke for every scalar column of a chain (and parameter columns when
/// stored). Degenerate columns are skipped.
std::vector<GewekeRow> geweke_table(const ChainResult& chain);

/// Header of the draws file: iter, scalar columns, parameter columns.
std::vector<std::string> trace_columns(const ChainResult& chain);

/// Writes one row per kept iteration with full double precision.
void trace_export(const ChainResult& chain, const std::string& path);
/// Reads a file written by trace_export.
ChainResult trace_import(const std::string& path);

}  // namespace crtsace
