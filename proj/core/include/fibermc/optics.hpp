#pragma once

#include <cstdint>
#include <numbers>

#include "fibermc/random.hpp"
#include "fibermc/vec3.hpp"

namespace fibermc {

/// Below this anisotropy the Henyey-Greenstein sampler switches to isotropic
/// sampling; the inverse CDF has a removable singularity at g = 0.
inline constexpr double kIsotropicThreshold = 1e-6;

/// Optical properties of a homogeneous medium.
///
/// Invariants: mu_s > 0, mu_a > 0 (so 0 < rho < 1) and 0 <= g < 1. The derived
/// quantities are computed once at construction.
class OpticalParams {
 public:
  /// Throws std::invalid_argument when an invariant is violated.
  OpticalParams(double mu_s, double mu_a, double g);

  [[nodiscard]] double mu_s() const { return mu_s_; }
  [[nodiscard]] double mu_a() const { return mu_a_; }
  [[nodiscard]] double g() const { return g_; }
  /// Attenuation coefficient mu_s + mu_a (cm^-1).
  [[nodiscard]] double mu() const { return mu_; }
  /// Albedo mu_s / mu.
  [[nodiscard]] double rho() const { return rho_; }

  /// Rat-brain values at 632 nm.
  static OpticalParams healthy_tissue() { return {280.0, 0.57, 0.9}; }
  static OpticalParams tumor_tissue() { return {73.0, 1.39, 0.9}; }

 private:
  double mu_s_;
  double mu_a_;
  double g_;
  double mu_;
  double rho_;
};

/// Optical fiber emitting uniformly into a cone of half-angle alpha about -e3.
struct SourceSpec {
  double alpha{std::numbers::pi / 10};
  double c{1.0};

  /// Throws std::invalid_argument unless 0 < alpha < pi/2 and c > 0.
  void validate() const;
  /// Uniform-probability measure of the emission cap, (1 - cos alpha) / 2.
  [[nodiscard]] double cap_measure() const;
  [[nodiscard]] static constexpr Direction axis() { return {0.0, 0.0, -1.0}; }
  /// True when w lies in the closed cap (with a small angular tolerance).
  [[nodiscard]] bool contains(const Direction& w) const;
};

/// Inverse CDF of the exponential law with rate mu: -ln(1 - u) / mu.
double exp_inverse_cdf(double u, double mu);

/// floor(ln u / ln rho), whose law is P(N = n) = (1 - rho) rho^n for u
/// uniform on (0, 1).
std::uint64_t geometric_path_length(double u, double rho);

/// Henyey-Greenstein density of the deflection cosine with respect to the
/// uniform probability on the sphere. Accepts |g| < 1 so that perturbed
/// (possibly negative) anisotropies can be evaluated.
double hg_density(double cos_theta, double g);

/// Closed-form inverse CDF of the HG deflection cosine. Requires g != 0.
double hg_inverse_cdf(double y, double g);

/// Samples the HG deflection cosine from y in [0, 1], routing |g| below
/// kIsotropicThreshold to the isotropic law cos = 2y - 1.
double sample_hg_cosine(double y, double g);

/// Direction on the emission cone: the polar angle from -e3 has cosine
/// 1 - u1 (1 - cos alpha), the azimuth is 2 pi u2.
Direction sample_cone_direction(double u1, double u2, double alpha);

/// Orthonormal frame (b1, b2) completing a unit vector n into a right-handed
/// basis (b1, b2, n). Branchless and well-conditioned at the poles.
void orthonormal_frame(const Direction& n, Vec3& b1, Vec3& b2);

/// New direction with <out, prev> = cos_theta and azimuth phi measured in the
/// frame of orthonormal_frame(prev). The result is renormalized.
Direction frame_transport(const Direction& prev, double cos_theta, double phi);

/// Azimuth of `next` in the frame attached to `prev` (inverse of
/// frame_transport for the angular part).
double frame_azimuth(const Direction& prev, const Direction& next);

}  // namespace fibermc
