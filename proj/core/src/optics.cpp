#include "fibermc/optics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace fibermc {

OpticalParams::OpticalParams(double mu_s, double mu_a, double g)
    : mu_s_(mu_s), mu_a_(mu_a), g_(g), mu_(mu_s + mu_a), rho_(mu_s / (mu_s + mu_a)) {
  if (!(std::isfinite(mu_s) && mu_s > 0.0)) {
    throw std::invalid_argument("mu_s must be positive, got " + std::to_string(mu_s));
  }
  if (!(std::isfinite(mu_a) && mu_a > 0.0)) {
    throw std::invalid_argument("mu_a must be positive, got " + std::to_string(mu_a));
  }
  if (!(g >= 0.0 && g < 1.0)) {
    throw std::invalid_argument("anisotropy g must lie in [0, 1), got " + std::to_string(g));
  }
}

void SourceSpec::validate() const {
  if (!(alpha > 0.0 && alpha < std::numbers::pi / 2)) {
    throw std::invalid_argument("cone half-angle alpha must lie in (0, pi/2)");
  }
  if (!(std::isfinite(c) && c > 0.0)) {
    throw std::invalid_argument("emission constant c must be positive");
  }
}

double SourceSpec::cap_measure() const { return 0.5 * (1.0 - std::cos(alpha)); }

bool SourceSpec::contains(const Direction& w) const {
  return dot(w, axis()) >= std::cos(alpha) - 1e-12;
}

double exp_inverse_cdf(double u, double mu) {
  if (!std::isfinite(u) || u < 0.0 || u >= 1.0) {
    throw std::invalid_argument("exp_inverse_cdf: u must lie in [0, 1)");
  }
  if (!(mu > 0.0)) {
    throw std::invalid_argument("exp_inverse_cdf: rate must be positive");
  }
  return -std::log1p(-u) / mu;
}

std::uint64_t geometric_path_length(double u, double rho) {
  if (!(rho > 0.0 && rho < 1.0)) {
    throw std::invalid_argument("geometric_path_length: rho must lie in (0, 1)");
  }
  if (!(u > 0.0 && u < 1.0)) {
    throw std::invalid_argument("geometric_path_length: u must lie in (0, 1)");
  }
  return static_cast<std::uint64_t>(std::floor(std::log(u) / std::log(rho)));
}

double hg_density(double cos_theta, double g) {
  const double denom = 1.0 + g * g - 2.0 * g * cos_theta;
  return (1.0 - g * g) / (denom * std::sqrt(denom));
}

double hg_inverse_cdf(double y, double g) {
  if (g == 0.0) {
    throw std::invalid_argument("hg_inverse_cdf: g = 0 must use the isotropic sampler");
  }
  const double t = (1.0 - g * g) / (1.0 - g + 2.0 * g * y);
  return std::clamp((1.0 + g * g - t * t) / (2.0 * g), -1.0, 1.0);
}

double sample_hg_cosine(double y, double g) {
  if (std::abs(g) < kIsotropicThreshold) {
    return 2.0 * y - 1.0;
  }
  return hg_inverse_cdf(y, g);
}

Direction sample_cone_direction(double u1, double u2, double alpha) {
  const double cos_polar = 1.0 - u1 * (1.0 - std::cos(alpha));
  const double sin_polar = std::sqrt(std::max(0.0, 1.0 - cos_polar * cos_polar));
  const double phi = 2.0 * std::numbers::pi * u2;
  return {sin_polar * std::cos(phi), sin_polar * std::sin(phi), -cos_polar};
}

void orthonormal_frame(const Direction& n, Vec3& b1, Vec3& b2) {
  // Duff et al., "Building an orthonormal basis, revisited" (JCGT 2017).
  const double sign = std::copysign(1.0, n.z);
  const double a = -1.0 / (sign + n.z);
  const double b = n.x * n.y * a;
  b1 = {1.0 + sign * n.x * n.x * a, sign * b, -sign * n.x};
  b2 = {b, sign + n.y * n.y * a, -n.y};
}

Direction frame_transport(const Direction& prev, double cos_theta, double phi) {
  Vec3 b1;
  Vec3 b2;
  orthonormal_frame(prev, b1, b2);
  const double sin_theta = std::sqrt(std::max(0.0, 1.0 - cos_theta * cos_theta));
  const Vec3 out = (sin_theta * std::cos(phi)) * b1 + (sin_theta * std::sin(phi)) * b2 + cos_theta * prev;
  return normalized(out);
}

double frame_azimuth(const Direction& prev, const Direction& next) {
  Vec3 b1;
  Vec3 b2;
  orthonormal_frame(prev, b1, b2);
  double phi = std::atan2(dot(next, b2), dot(next, b1));
  if (phi < 0.0) phi += 2.0 * std::numbers::pi;
  return phi;
}

}  // namespace fibermc
