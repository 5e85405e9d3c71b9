#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "fibermc/grid.hpp"
#include "fibermc/optics.hpp"
#include "fibermc/random.hpp"

namespace fibermc {

/// Medium, source and voxelization of one simulation.
struct Scenario {
  OpticalParams optics;
  SourceSpec source;
  VoxelGrid grid;

  /// Fluence scale c (1 - cos alpha) / (2 mu_a).
  [[nodiscard]] double scale() const;
};

/// Execution knobs. `chunk` is the number of rays per work unit; each unit
/// draws from its own child stream, so results depend on the seed and the
/// chunk size but never on `threads` (0 means hardware parallelism).
struct RunOptions {
  unsigned threads{1};
  std::size_t chunk{128};
};

enum class EndpointFilter {
  all,
  /// Only unscattered rays (N = 0) are binned; the others still count as samples.
  direct_only,
};

/// Plain Monte Carlo: M independent rays, one endpoint S_N each. Ray i of
/// work unit u is the (i mod chunk)-th ray drawn from stream.derive(rays, u)
/// with the draw order of sample_ray.
FluenceField estimate_mc(const Scenario& scenario, std::uint64_t rays, const RandomStream& stream,
                         const RunOptions& options = {}, EndpointFilter filter = EndpointFilter::all);

/// Endpoint S_N of the next ray of `stream`, consuming exactly the draws of
/// sample_ray. Also reports the path length through `n`.
Vec3 sample_endpoint(RandomStream& stream, const OpticalParams& optics, const SourceSpec& source,
                     std::uint64_t& n);

struct McSomeSettings {
  std::uint64_t rays{30000};
  std::uint32_t points{40};
  std::uint32_t rotations{30};
};

/// MC-SOME: M_rot cone directions W0^j are drawn from
/// stream.derive(rotations, 0); every ray starts at W0^1, carries M_points
/// i.i.d. geometric indices (drawn first, then the walk is generated up to the
/// largest one) and each selected point is rotated onto every W0^j. Rays are
/// batches and rotations are groups of the returned field.
FluenceField estimate_mc_some(const Scenario& scenario, const McSomeSettings& settings, const RandomStream& stream,
                              const RunOptions& options = {});

/// Per-hit payloads accumulated for a watched voxel, with A = sum_{j <= N} R_j:
/// the indicator and the first and second derivatives of the fluence with
/// respect to (mu_s, mu_a), all multiplied by the fluence scale.
enum Payload : std::size_t {
  kValue = 0,         // 1
  kDMuA = 1,          // -A
  kDMuS = 2,          // N / mu_s - A
  kD2MuA = 3,         // A^2
  kD2MuS = 4,         // (N / mu_s - A)^2 - N / mu_s^2
  kD2MuSMuA = 5,      // -A (N / mu_s - A)
};
inline constexpr std::size_t kPayloadCount = 6;
using PayloadArray = std::array<double, kPayloadCount>;

/// MC-SOME estimates of the fluence and its derivatives at a few voxels.
struct WatchResult {
  std::vector<VoxelIndex> voxels;
  std::vector<PayloadArray> mean;
  std::vector<PayloadArray> standard_error;
  std::vector<std::uint64_t> hits;
  std::uint64_t samples{0};
};

/// Same sampling as estimate_mc_some (identical draws for identical seeds),
/// accumulating the derivative payloads at `voxels` only. Standard errors use
/// the ray-batch plus rotation-group decomposition of FluenceField.
WatchResult estimate_mc_some_watch(const Scenario& scenario, const McSomeSettings& settings,
                                   const std::vector<VoxelIndex>& voxels, const RandomStream& stream,
                                   const RunOptions& options = {});

/// Contribution of unscattered paths to the fluence of voxel k:
/// scale (1 - rho) P(R_0 W_0 in V_k), where P is integrated deterministically
/// over the cone (adaptive 15-point Gauss-Kronrod in the azimuth and in the
/// polar cosine; the radial integral is exact). Zero for voxels the cone
/// misses.
double direct_term_oracle(const Scenario& scenario, const VoxelIndex& k);

/// P(R_0 W_0 in V_k) alone (no prefactor).
double direct_term_probability(const Scenario& scenario, const VoxelIndex& k);

}  // namespace fibermc
