#include "fibermc/ray.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>

namespace fibermc {

namespace {

void append_segments(RandomStream& stream, const OpticalParams& optics, std::uint64_t n, Ray& ray) {
  const double mu = optics.mu();
  const double g = optics.g();
  ray.lengths.reserve(n + 1);
  ray.directions.reserve(n + 1);
  ray.lengths.push_back(exp_inverse_cdf(stream.uniform(), mu));
  for (std::uint64_t i = 1; i <= n; ++i) {
    const double r = exp_inverse_cdf(stream.uniform(), mu);
    const double cos_theta = sample_hg_cosine(stream.uniform(), g);
    const double phi = 2.0 * std::numbers::pi * stream.uniform();
    ray.lengths.push_back(r);
    ray.directions.push_back(frame_transport(ray.directions.back(), cos_theta, phi));
  }
}

template <class T>
void put_le(std::ostream& out, T value) {
  static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
  }
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <class T>
bool get_le(std::istream& in, T& value) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) return false;
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(bytes[i], bytes[sizeof(T) - 1 - i]);
  }
  std::memcpy(&value, bytes, sizeof(T));
  return true;
}

}  // namespace

Ray sample_ray(RandomStream& stream, const OpticalParams& optics, const SourceSpec& source) {
  const std::uint64_t n = geometric_path_length(stream.uniform_open(), optics.rho());
  const double u1 = stream.uniform();
  const double u2 = stream.uniform();
  Ray ray;
  ray.directions.push_back(sample_cone_direction(u1, u2, source.alpha));
  append_segments(stream, optics, n, ray);
  return ray;
}

Ray sample_ray_from(RandomStream& stream, const OpticalParams& optics, const Direction& start) {
  const std::uint64_t n = geometric_path_length(stream.uniform_open(), optics.rho());
  Ray ray;
  ray.directions.push_back(start);
  append_segments(stream, optics, n, ray);
  return ray;
}

WalkPoints walk_points(const Ray& ray) {
  WalkPoints walk;
  walk.points.reserve(ray.lengths.size());
  Vec3 s;
  for (std::size_t i = 0; i < ray.lengths.size(); ++i) {
    s += ray.lengths[i] * ray.directions[i];
    walk.points.push_back(s);
  }
  return walk;
}

Rotation Rotation::between(const Direction& from, const Direction& to) {
  Rotation r;
  auto& m = r.m_;
  const double c = dot(from, to);
  if (c < -1.0 + 1e-12) {
    Vec3 a;
    Vec3 unused;
    orthonormal_frame(from, a, unused);
    m = {2 * a.x * a.x - 1, 2 * a.x * a.y,     2 * a.x * a.z,      //
         2 * a.y * a.x,     2 * a.y * a.y - 1, 2 * a.y * a.z,      //
         2 * a.z * a.x,     2 * a.z * a.y,     2 * a.z * a.z - 1};
    return r;
  }
  // Rodrigues: R = I + [v]x + [v]x^2 / (1 + c) with v = from x to.
  const Vec3 v = cross(from, to);
  const double f = 1.0 / (1.0 + c);
  m = {1 - f * (v.y * v.y + v.z * v.z), -v.z + f * v.x * v.y,             v.y + f * v.x * v.z,
       v.z + f * v.x * v.y,             1 - f * (v.x * v.x + v.z * v.z), -v.x + f * v.y * v.z,
       -v.y + f * v.x * v.z,            v.x + f * v.y * v.z,             1 - f * (v.x * v.x + v.y * v.y)};
  return r;
}

WalkPoints rotate_walk(const WalkPoints& walk, const Direction& from, const Direction& to) {
  const Rotation rot = Rotation::between(from, to);
  WalkPoints out;
  out.points.reserve(walk.points.size());
  for (const Vec3& p : walk.points) out.points.push_back(rot.apply(p));
  return out;
}

double ray_log_density(const Ray& ray, const OpticalParams& optics, const SourceSpec& source) {
  if (ray.lengths.empty() || ray.lengths.size() != ray.directions.size()) {
    throw std::invalid_argument("ray_log_density: malformed ray");
  }
  if (!source.contains(ray.directions.front())) return -std::numeric_limits<double>::infinity();
  const auto n = static_cast<double>(ray.size());
  const double mu = optics.mu();
  double sum_r = 0.0;
  for (const double r : ray.lengths) sum_r += r;
  double sum_log_hg = 0.0;
  for (std::size_t j = 0; j + 1 < ray.directions.size(); ++j) {
    sum_log_hg += std::log(hg_density(dot(ray.directions[j], ray.directions[j + 1]), optics.g()));
  }
  return std::log1p(-optics.rho()) + n * std::log(optics.rho()) + (n + 1.0) * std::log(mu) - mu * sum_r + sum_log_hg;
}

void write_ray_record(std::ostream& out, const Ray& ray) {
  if (ray.lengths.empty() || ray.lengths.size() != ray.directions.size()) {
    throw std::invalid_argument("write_ray_record: malformed ray");
  }
  put_le(out, static_cast<std::uint32_t>(ray.size()));
  for (std::size_t i = 0; i < ray.lengths.size(); ++i) {
    put_le(out, ray.lengths[i]);
    put_le(out, ray.directions[i].x);
    put_le(out, ray.directions[i].y);
    put_le(out, ray.directions[i].z);
  }
}

bool read_ray_record(std::istream& in, Ray& ray) {
  std::uint32_t n = 0;
  if (!get_le(in, n)) {
    if (in.gcount() == 0) return false;
    throw std::runtime_error("truncated ray record header");
  }
  ray.lengths.assign(n + 1, 0.0);
  ray.directions.assign(n + 1, Direction{});
  for (std::size_t i = 0; i <= n; ++i) {
    Direction& w = ray.directions[i];
    if (!get_le(in, ray.lengths[i]) || !get_le(in, w.x) || !get_le(in, w.y) || !get_le(in, w.z)) {
      throw std::runtime_error("truncated ray record body");
    }
  }
  return true;
}

}  // namespace fibermc
