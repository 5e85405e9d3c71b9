#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "fibermc/mc.hpp"

namespace fibermc {

namespace {

constexpr unsigned kMaxDepth = 12;
constexpr double kTolerance = 1e-11;

/// Probability that an exponential(mu) flight along `d` ends inside the box
/// [lo, hi]: exp(-mu t_in) - exp(-mu t_out) with the slab-method interval.
double box_exit_probability(const Vec3& d, const Vec3& lo, const Vec3& hi, double mu) {
  double t_in = 0.0;
  double t_out = std::numeric_limits<double>::infinity();
  const double dv[3] = {d.x, d.y, d.z};
  const double lv[3] = {lo.x, lo.y, lo.z};
  const double hv[3] = {hi.x, hi.y, hi.z};
  for (int a = 0; a < 3; ++a) {
    if (dv[a] == 0.0) {
      if (lv[a] > 0.0 || hv[a] < 0.0) return 0.0;
      continue;
    }
    double t0 = lv[a] / dv[a];
    double t1 = hv[a] / dv[a];
    if (t0 > t1) std::swap(t0, t1);
    t_in = std::max(t_in, t0);
    t_out = std::min(t_out, t1);
  }
  if (t_out <= t_in) return 0.0;
  return std::exp(-mu * t_in) - std::exp(-mu * t_out);
}

}  // namespace

double direct_term_probability(const Scenario& scenario, const VoxelIndex& k) {
  using boost::math::quadrature::gauss_kronrod;
  const VoxelGrid& grid = scenario.grid;
  if (!grid.contains(k)) throw std::out_of_range("direct_term_probability: voxel outside grid");
  const Vec3 c = grid.center(k);
  const double half = 0.5 * grid.edge();
  const Vec3 lo{c.x - half, c.y - half, c.z - half};
  const Vec3 hi{c.x + half, c.y + half, c.z + half};
  const double mu = scenario.optics.mu();
  const double cos_alpha = std::cos(scenario.source.alpha);

  // Quick rejection: the voxel lies outside the cone when the angle between
  // its centre and the axis exceeds alpha plus the voxel's angular radius.
  const double dist = norm(c);
  const double radius = std::sqrt(3.0) * half;
  if (dist > radius) {
    const double angle = std::acos(std::clamp(-c.z / dist, -1.0, 1.0));
    if (angle - std::asin(radius / dist) > scenario.source.alpha) return 0.0;
  }

  // The integrand is smooth between breakpoints: in azimuth where the
  // half-plane passes a box corner, in cosine where a ray crosses a box edge.
  Vec3 corners[8];
  for (int b = 0; b < 8; ++b) {
    corners[b] = Vec3{(b & 1) ? hi.x : lo.x, (b & 2) ? hi.y : lo.y, (b & 4) ? hi.z : lo.z};
  }
  const double two_pi = 2.0 * std::numbers::pi;
  std::vector<double> phi_breaks{0.0, two_pi};
  for (const Vec3& p : corners) {
    if (p.x == 0.0 && p.y == 0.0) continue;
    double a = std::atan2(p.y, p.x);
    if (a < 0.0) a += two_pi;
    phi_breaks.push_back(a);
  }
  std::sort(phi_breaks.begin(), phi_breaks.end());

  auto over_cosine = [&](double phi) {
    const double cp = std::cos(phi);
    const double sp = std::sin(phi);
    std::vector<double> u_breaks{cos_alpha, 1.0};
    for (int a = 0; a < 8; ++a) {
      for (int bit = 1; bit < 8; bit <<= 1) {
        if (a & bit) continue;
        const Vec3& e0 = corners[a];
        const Vec3& e1 = corners[a | bit];
        const double s0 = e0.x * sp - e0.y * cp;
        const double s1 = e1.x * sp - e1.y * cp;
        if ((s0 > 0.0 && s1 > 0.0) || (s0 < 0.0 && s1 < 0.0) || s0 == s1) continue;
        const Vec3 p = e0 + (e1 - e0) * (s0 / (s0 - s1));
        const double r = norm(p);
        if (r == 0.0 || p.x * cp + p.y * sp < 0.0) continue;
        const double u = -p.z / r;
        if (u > cos_alpha && u < 1.0) u_breaks.push_back(u);
      }
    }
    std::sort(u_breaks.begin(), u_breaks.end());
    auto integrand = [&](double u) {
      const double s = std::sqrt(std::max(0.0, 1.0 - u * u));
      return box_exit_probability(Vec3{s * cp, s * sp, -u}, lo, hi, mu);
    };
    double sum = 0.0;
    for (std::size_t i = 0; i + 1 < u_breaks.size(); ++i) {
      if (u_breaks[i + 1] <= u_breaks[i]) continue;
      sum += gauss_kronrod<double, 15>::integrate(integrand, u_breaks[i], u_breaks[i + 1], kMaxDepth, kTolerance);
    }
    return sum;
  };
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < phi_breaks.size(); ++i) {
    if (phi_breaks[i + 1] <= phi_breaks[i]) continue;
    total += gauss_kronrod<double, 15>::integrate(over_cosine, phi_breaks[i], phi_breaks[i + 1], kMaxDepth,
                                                  kTolerance);
  }
  return total / (2.0 * std::numbers::pi * (1.0 - cos_alpha));
}

double direct_term_oracle(const Scenario& scenario, const VoxelIndex& k) {
  return scenario.scale() * (1.0 - scenario.optics.rho()) * direct_term_probability(scenario, k);
}

}  // namespace fibermc
