#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "fibermc/optics.hpp"
#include "fibermc/random.hpp"
#include "fibermc/vec3.hpp"

namespace fibermc {

/// One realization of the ray measure: segment lengths r_0..r_n and unit
/// directions w_0..w_n, stored as two parallel sequences.
struct Ray {
  std::vector<double> lengths;
  std::vector<Direction> directions;

  /// Path length n (number of scattering events); a ray has n + 1 segments.
  [[nodiscard]] std::size_t size() const { return lengths.empty() ? 0 : lengths.size() - 1; }
};

/// Partial sums S_p = sum_{i <= p} r_i w_i of a ray, starting at the fiber tip.
struct WalkPoints {
  std::vector<Vec3> points;
};

/// Samples a ray: N ~ geometric(rho), w_0 uniform on the emission cone, then
/// the segments. Draw order: one uniform for N, two for w_0, then per segment
/// i = 0..N one uniform for r_i and, for i >= 1, one for the HG cosine and one
/// for the azimuth.
Ray sample_ray(RandomStream& stream, const OpticalParams& optics, const SourceSpec& source);

/// Same as sample_ray but with a prescribed initial direction (one uniform for
/// N, then the segments).
Ray sample_ray_from(RandomStream& stream, const OpticalParams& optics, const Direction& start);

WalkPoints walk_points(const Ray& ray);

/// Proper rotation stored as a row-major 3x3 matrix.
class Rotation {
 public:
  Rotation() = default;

  /// Minimal-angle rotation mapping `from` onto `to` (about from x to). For
  /// antiparallel inputs the axis is the first vector of orthonormal_frame(from)
  /// and the angle is pi.
  static Rotation between(const Direction& from, const Direction& to);

  [[nodiscard]] Vec3 apply(const Vec3& v) const {
    return {m_[0] * v.x + m_[1] * v.y + m_[2] * v.z, m_[3] * v.x + m_[4] * v.y + m_[5] * v.z,
            m_[6] * v.x + m_[7] * v.y + m_[8] * v.z};
  }

 private:
  std::array<double, 9> m_{1, 0, 0, 0, 1, 0, 0, 0, 1};
};

WalkPoints rotate_walk(const WalkPoints& walk, const Direction& from, const Direction& to);

/// Log-density of a ray with respect to Lebesgue measure on the lengths and
/// the uniform measure on the directions, with w_0 conditioned to the cone:
///
///   ln[(1 - rho) rho^n] + (n + 1) ln mu - mu sum r_j + sum_{j < n} ln f_HG(<w_j, w_j+1>)
///
/// The constant density of the cone-uniform w_0 is left out; it cancels in
/// every ratio. Returns -infinity when w_0 lies outside the cone.
double ray_log_density(const Ray& ray, const OpticalParams& optics, const SourceSpec& source);

/// Debug dump, one record per ray, little-endian: u32 n, then (n + 1) records
/// of four float64 (r, ux, uy, uz).
void write_ray_record(std::ostream& out, const Ray& ray);
/// Reads one record; returns false at a clean end of stream and throws
/// std::runtime_error on a truncated record.
bool read_ray_record(std::istream& in, Ray& ray);

}  // namespace fibermc
