#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace fibermc {

/// Chi-squared comparison of a path-length trace with the geometric law
/// (1 - rho) rho^n.
struct LengthLawResult {
  /// False for a degenerate (constant) trace; the other fields are then unset.
  bool valid{false};
  double statistic{0.0};
  std::size_t dof{0};
  double p_value{0.0};
  /// Samples used after thinning.
  std::size_t samples{0};
  std::size_t stride{1};
  /// Bins 0..bins-2 are single lengths, the last one holds the tail.
  std::size_t bins{0};
};

/// Minimum trace length accepted by length_law_diagnostic.
inline constexpr std::size_t kMinTraceLength = 10000;

/// Bins the trace (single-length bins while their expected count stays at
/// least 5, then one tail bin) and returns the chi-squared statistic and
/// p-value. Successive chain states are correlated, so the trace is thinned
/// first: `stride` = 0 picks ceil(2 tau_int) from integrated_autocorrelation_time,
/// 1 uses every entry. Throws std::invalid_argument for traces shorter than
/// kMinTraceLength or rho outside (0, 1).
LengthLawResult length_law_diagnostic(const std::vector<std::uint64_t>& trace, double rho, std::size_t stride = 0);

/// Integrated autocorrelation time 1 + 2 sum_{t=1}^{W} rho(t) with Sokal's
/// self-consistent window (smallest W with W >= 5 tau(W)). Returns 1 for a
/// constant series.
double integrated_autocorrelation_time(const std::vector<double>& series);

}  // namespace fibermc
