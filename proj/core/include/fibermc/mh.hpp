#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "fibermc/grid.hpp"
#include "fibermc/mc.hpp"
#include "fibermc/optics.hpp"
#include "fibermc/random.hpp"
#include "fibermc/ray.hpp"

namespace fibermc {

/// Settings of the Metropolis-Hastings estimator.
struct MhParams {
  std::uint32_t j{10};
  std::uint32_t J{21};
  /// Proposal anisotropy is epsilon * g.
  double epsilon{0.9};
  std::uint64_t steps{250000};
  std::uint32_t rotations{30};
  /// Fraction of the steps discarded before accumulation.
  double burn_in_frac{0.05};
  /// Steps per variance batch; 0 picks ceil(kept / 100).
  std::uint64_t batch_steps{0};

  /// Throws std::invalid_argument unless 1 <= j < J, gcd(j, J) = 1,
  /// |epsilon| <= 1, steps >= 1, rotations >= 1 and 0 <= burn_in_frac < 1.
  void validate() const;
};

/// Probability of each admissible length change at current length m:
/// 1/4 when m >= J, 1/3 when j <= m < J, 1/2 when m < j.
double zeta(std::uint64_t m, std::uint32_t j, std::uint32_t J);

/// Chain state: the spherical record (r_i, theta_i, phi_i), i = 0..n, plus
/// caches. Entry 0 of cos_theta / phi holds the polar cosine and azimuth of
/// w_0 in the laboratory frame and is never mutated; entries i >= 1 are the
/// deflection cosine and azimuth relative to w_{i-1} (azimuth measured in the
/// frame of orthonormal_frame(w_{i-1})).
struct ChainState {
  std::vector<double> lengths;
  std::vector<double> cos_theta;
  std::vector<double> phi;

  // Caches, always consistent with the record.
  std::vector<Direction> directions;
  std::vector<Vec3> points;
  std::vector<double> log_hg;  // ln f_HG(cos_theta_i) for i >= 1; entry 0 is 0
  double log_density{0.0};

  [[nodiscard]] std::size_t size() const { return lengths.size() - 1; }
  [[nodiscard]] const Vec3& endpoint() const { return points.back(); }
};

/// Builds a chain state from a sampled ray (w_0 becomes the frozen start).
ChainState make_chain_state(const Ray& ray, const OpticalParams& optics);

/// ray_log_density of the state, recomputed from the spherical record.
double chain_log_density(const ChainState& state, const OpticalParams& optics);

enum class MoveType { deletion, addition, rotation, translation };

/// Outcome of one proposal. The q densities are taken with respect to the
/// same base measure as the target (Lebesgue on lengths, uniform on
/// directions), so a fresh edge contributes mu e^{-mu r} f^{eps g}(cos theta).
/// The two ratios are computed locally in a form that cancels exactly when
/// the proposal matches the target conditional (translations, and rotations
/// with epsilon = 1).
struct Proposal {
  MoveType type{MoveType::rotation};
  std::int64_t delta{0};
  std::size_t index{0};
  double log_q_forward{0.0};
  double log_q_backward{0.0};
  /// ln nu(candidate) - ln nu(current).
  double log_target_ratio{0.0};
  /// ln q(candidate -> current) - ln q(current -> candidate).
  double log_proposal_ratio{0.0};
};

/// Draws a mutation of `current` into `candidate` (overwritten; its buffers
/// are reused). Draw order: one uniform for the move family; then either one
/// for the length change and, for additions, three per new edge (length,
/// cosine, azimuth), or one for the index and then one (i = 0: length) or two
/// (cosine, azimuth).
Proposal propose_mutation(const ChainState& current, ChainState& candidate, RandomStream& stream,
                          const MhParams& params, const OpticalParams& optics);

/// ln q(from -> to) by the four-case table; -infinity when `to` is not
/// reachable from `from` in one move.
double log_proposal_density(const ChainState& from, const ChainState& to, const MhParams& params,
                            const OpticalParams& optics);

/// min(0, ln nu(cand) - ln nu(cur) + log_q_b - log_q_f) using the cached
/// densities; -infinity when any term is not finite.
double acceptance_log_ratio(const ChainState& current, const ChainState& candidate, double log_q_forward,
                            double log_q_backward);

/// Sequential Metropolis-Hastings chain on rays with a frozen w_0.
class MhChain {
 public:
  MhChain(const OpticalParams& optics, const MhParams& params, ChainState initial);

  /// One step: propose, then draw one uniform for the acceptance test.
  /// Returns true when the candidate was accepted.
  bool step(RandomStream& stream);

  [[nodiscard]] const ChainState& state() const { return state_; }
  [[nodiscard]] std::uint64_t accepted() const { return accepted_; }
  [[nodiscard]] std::uint64_t steps() const { return steps_; }
  [[nodiscard]] const Proposal& last_proposal() const { return last_; }

 private:
  OpticalParams optics_;
  MhParams params_;
  ChainState state_;
  ChainState candidate_;
  Proposal last_;
  std::uint64_t accepted_{0};
  std::uint64_t steps_{0};
};

struct ChainResult {
  FluenceField field;
  std::uint64_t burn_in{0};
  /// Accepted fraction of the T - 1 transitions (burn-in included).
  double acceptance_rate{0.0};
  /// Per step t = 1..T (burn-in included): path length, acceptance flag and
  /// log-density of the state after the step.
  std::vector<std::uint64_t> lengths;
  std::vector<std::uint8_t> accepted;
  std::vector<double> log_density;
};

/// Runs the estimator: the initial state is a sampled ray (stream
/// derive(chain, 0), which also drives the steps); M_rot cone directions come
/// from derive(rotations, 0) and every kept step bins the endpoint rotated from
/// the chain's w_0 onto each of them (rejected steps re-bin the current
/// endpoint). Step 1 is the initial state itself, so T = 1 bins it M_rot times.
ChainResult run_chain(const Scenario& scenario, const MhParams& params, const RandomStream& stream);

/// Trace export: header `t,n,accepted,log_density`, every `stride`-th step.
void write_chain_trace(std::ostream& out, const ChainResult& result, std::size_t stride = 1);

}  // namespace fibermc
