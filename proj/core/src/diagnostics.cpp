#include "fibermc/diagnostics.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fibermc {

double integrated_autocorrelation_time(const std::vector<double>& x) {
  const std::size_t n = x.size();
  if (n < 2) return 1.0;
  double mean = 0.0;
  for (const double v : x) mean += v;
  mean /= static_cast<double>(n);
  double c0 = 0.0;
  for (const double v : x) c0 += (v - mean) * (v - mean);
  if (c0 == 0.0) return 1.0;
  double tau = 1.0;
  const std::size_t max_lag = n / 2;
  for (std::size_t lag = 1; lag < max_lag; ++lag) {
    double c = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) c += (x[i] - mean) * (x[i + lag] - mean);
    tau += 2.0 * c / c0;
    if (static_cast<double>(lag) >= 5.0 * tau) break;
  }
  return std::max(tau, 1.0);
}

LengthLawResult length_law_diagnostic(const std::vector<std::uint64_t>& trace, double rho, std::size_t stride) {
  if (!(rho > 0.0 && rho < 1.0)) throw std::invalid_argument("length_law_diagnostic: rho must lie in (0, 1)");
  if (trace.size() < kMinTraceLength) {
    throw std::invalid_argument("length_law_diagnostic: trace shorter than the minimum length");
  }
  LengthLawResult out;
  if (std::all_of(trace.begin(), trace.end(), [&](std::uint64_t v) { return v == trace.front(); })) {
    return out;
  }
  if (stride == 0) {
    const std::vector<double> series(trace.begin(), trace.end());
    stride = static_cast<std::size_t>(std::ceil(2.0 * integrated_autocorrelation_time(series)));
  }
  out.stride = stride;
  std::vector<std::uint64_t> kept;
  kept.reserve(trace.size() / stride + 1);
  for (std::size_t i = 0; i < trace.size(); i += stride) kept.push_back(trace[i]);
  const auto total = static_cast<double>(kept.size());
  out.samples = kept.size();

  // Largest K with every single-length bin n < K and the tail {n >= K}
  // expecting at least 5 samples.
  std::size_t k = 0;
  while (total * (1.0 - rho) * std::pow(rho, static_cast<double>(k)) >= 5.0 &&
         total * std::pow(rho, static_cast<double>(k + 1)) >= 5.0) {
    ++k;
  }
  if (k == 0) {
    out.valid = false;
    return out;
  }
  std::vector<double> observed(k + 1, 0.0);
  for (const std::uint64_t v : kept) observed[std::min<std::uint64_t>(v, k)] += 1.0;
  double stat = 0.0;
  for (std::size_t b = 0; b <= k; ++b) {
    const double p = b < k ? (1.0 - rho) * std::pow(rho, static_cast<double>(b)) : std::pow(rho, static_cast<double>(k));
    const double e = total * p;
    stat += (observed[b] - e) * (observed[b] - e) / e;
  }
  out.valid = true;
  out.statistic = stat;
  out.bins = k + 1;
  out.dof = k;
  const boost::math::chi_squared dist(static_cast<double>(k));
  out.p_value = boost::math::cdf(boost::math::complement(dist, stat));
  return out;
}

}  // namespace fibermc
