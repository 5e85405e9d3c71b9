#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>
#include <vector>

#include "fibermc/diagnostics.hpp"
#include "fibermc/mc.hpp"
#include "fibermc/ray.hpp"

using namespace fibermc;

namespace {

double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
  }
  return d;
}

}  // namespace

TEST_SUITE("ray") {
  TEST_CASE("walk points") {
    Ray one;
    one.lengths = {1.0};
    one.directions = {{0, 0, -1}};
    CHECK(walk_points(one).points.back() == Vec3{0, 0, -1});
    Ray back;
    back.lengths = {0.7, 0.7};
    back.directions = {{0, 0, -1}, {0, 0, 1}};
    CHECK(walk_points(back).points.back() == Vec3{0, 0, 0});
  }

  TEST_CASE("sampled rays are well formed") {
    const OpticalParams p(9.0, 1.0, 0.9);
    const SourceSpec src;
    RandomStream rs(17);
    double worst = 0.0;
    for (int i = 0; i < 2000; ++i) {
      const Ray r = sample_ray(rs, p, src);
      REQUIRE(r.lengths.size() == r.directions.size());
      CHECK(src.contains(r.directions[0]));
      const WalkPoints w = walk_points(r);
      for (std::size_t k = 0; k < r.lengths.size(); ++k) {
        CHECK(r.lengths[k] > 0.0);
        CHECK(std::abs(norm(r.directions[k]) - 1.0) < 1e-12);
        const Vec3 prev = k == 0 ? Vec3{} : w.points[k - 1];
        worst = std::max(worst, std::abs(norm(w.points[k] - prev) - r.lengths[k]) / std::max(r.lengths[k], norm(prev)));
      }
    }
    CHECK(worst < 1e-12);
  }

  TEST_CASE("small albedo gives single segments") {
    const OpticalParams p(1e-9, 10.0, 0.9);
    RandomStream rs(2);
    for (int i = 0; i < 1000; ++i) CHECK(sample_ray(rs, p, SourceSpec{}).size() == 0u);
  }

  TEST_CASE("mean path length at rho = 0.998") {
    const OpticalParams p = OpticalParams::healthy_tissue();
    RandomStream rs(23);
    const int n = 100000;
    double sum = 0.0;
    double sumsq = 0.0;
    for (int i = 0; i < n; ++i) {
      const auto len = static_cast<double>(geometric_path_length(rs.uniform_open(), p.rho()));
      sum += len;
      sumsq += len * len;
    }
    const double mean = sum / n;
    const double se = std::sqrt((sumsq / n - mean * mean) / n);
    const double expected = p.rho() / (1.0 - p.rho());
    CHECK(std::abs(mean - expected) < 3.0 * se);
  }

  TEST_CASE("sampler and density agree on the length law at rho = 0.9") {
    const OpticalParams p(9.0, 1.0, 0.5);
    RandomStream rs(29);
    std::vector<std::uint64_t> n(20000);
    double sum = 0.0;
    for (auto& v : n) {
      v = sample_ray(rs, p, SourceSpec{}).size();
      sum += static_cast<double>(v);
    }
    const LengthLawResult r = length_law_diagnostic(n, p.rho(), 1);
    CHECK(r.p_value > 0.01);
    const double mean = sum / n.size();
    const double sd = std::sqrt(p.rho()) / (1.0 - p.rho());
    CHECK(std::abs(mean - 9.0) < 3.0 * sd / std::sqrt(static_cast<double>(n.size())));
  }

  TEST_CASE("endpoint sampler consumes the same draws as sample_ray") {
    const OpticalParams p(30.0, 1.0, 0.9);
    const SourceSpec src;
    RandomStream a(5);
    RandomStream b(5);
    for (int i = 0; i < 200; ++i) {
      const Ray r = sample_ray(a, p, src);
      std::uint64_t n = 0;
      const Vec3 e = sample_endpoint(b, p, src, n);
      CHECK(n == r.size());
      CHECK(norm(e - walk_points(r).points.back()) < 1e-12);
    }
    CHECK(a() == b());
  }

  TEST_CASE("rotations") {
    const Direction d{0.3, -0.4, std::sqrt(1 - 0.25)};
    WalkPoints w;
    w.points = {{1, 2, 3}, {-0.5, 0.1, 0.2}};
    const WalkPoints same = rotate_walk(w, d, d);
    for (std::size_t i = 0; i < w.points.size(); ++i) CHECK(norm(same.points[i] - w.points[i]) < 1e-15);

    WalkPoints tip;
    tip.points = {{0, 0, -1}};
    const WalkPoints r = rotate_walk(tip, {0, 0, -1}, {1, 0, 0});
    CHECK(norm(r.points[0] - Vec3{1, 0, 0}) < 1e-15);

    // Antiparallel: still a proper rotation mapping from onto to.
    const Rotation flip = Rotation::between(d, -d);
    CHECK(norm(flip.apply(d) + d) < 1e-14);

    const OpticalParams p(50.0, 1.0, 0.8);
    RandomStream rs(31);
    double worst = 0.0;
    for (int t = 0; t < 200; ++t) {
      const Ray ray = sample_ray(rs, p, SourceSpec{});
      const WalkPoints walk = walk_points(ray);
      const Direction to = sample_cone_direction(rs.uniform(), rs.uniform(), 0.3);
      const WalkPoints rot = rotate_walk(walk, ray.directions[0], to);
      CHECK(norm(Rotation::between(ray.directions[0], to).apply(ray.directions[0]) - to) < 1e-14);
      for (std::size_t i = 0; i < walk.points.size(); ++i) {
        const double n0 = norm(walk.points[i]);
        if (n0 > 0) worst = std::max(worst, std::abs(norm(rot.points[i]) - n0) / n0);
        if (i > 0) {
          const double d0 = norm(walk.points[i] - walk.points[i - 1]);
          const double d1 = norm(rot.points[i] - rot.points[i - 1]);
          worst = std::max(worst, std::abs(d1 - d0) / d0);
        }
      }
    }
    CHECK(worst < 1e-10);
  }

  TEST_CASE("log density") {
    const OpticalParams p(9.0, 1.0, 0.9);
    const SourceSpec src;
    Ray r;
    r.lengths = {0.3};
    r.directions = {{0, 0, -1}};
    CHECK(ray_log_density(r, p, src) ==
          doctest::Approx(std::log(1 - p.rho()) + std::log(p.mu()) - p.mu() * 0.3).epsilon(1e-14));
    r.directions = {{1, 0, 0}};
    CHECK(ray_log_density(r, p, src) == -std::numeric_limits<double>::infinity());
    // Two segments.
    r.lengths = {0.3, 0.2};
    r.directions = {{0, 0, -1}, frame_transport({0, 0, -1}, 0.7, 1.0)};
    const double expected = std::log(1 - p.rho()) + std::log(p.rho()) + 2 * std::log(p.mu()) - p.mu() * 0.5 +
                            std::log(hg_density(0.7, 0.9));
    CHECK(ray_log_density(r, p, src) == doctest::Approx(expected).epsilon(1e-12));
  }

  TEST_CASE("reversed rays give the same endpoint law") {
    // |S_N| of rays with reversed direction order, or with permuted lengths,
    // against an independent forward sample (two-sample KS at 1%).
    const OpticalParams p(20.0, 2.0, 0.7);
    RandomStream rs(37);
    const int n = 20000;
    std::vector<double> fwd, rev_dirs, rev_lengths;
    for (int i = 0; i < n; ++i) {
      fwd.push_back(norm(walk_points(sample_ray(rs, p, SourceSpec{})).points.back()));
      Ray a = sample_ray(rs, p, SourceSpec{});
      std::reverse(a.directions.begin(), a.directions.end());
      rev_dirs.push_back(norm(walk_points(a).points.back()));
      Ray b = sample_ray(rs, p, SourceSpec{});
      std::reverse(b.lengths.begin(), b.lengths.end());
      rev_lengths.push_back(norm(walk_points(b).points.back()));
    }
    const double crit = 1.628 * std::sqrt(2.0 / n);
    CHECK(ks_two_sample(fwd, rev_dirs) < crit);
    CHECK(ks_two_sample(fwd, rev_lengths) < crit);
  }

  TEST_CASE("binary ray records") {
    const OpticalParams p(9.0, 1.0, 0.9);
    RandomStream rs(41);
    std::vector<Ray> rays;
    std::stringstream ss;
    for (int i = 0; i < 20; ++i) {
      rays.push_back(sample_ray(rs, p, SourceSpec{}));
      write_ray_record(ss, rays.back());
    }
    const std::string bytes = ss.str();
    std::size_t expected = 0;
    for (const auto& r : rays) expected += 4 + 32 * r.lengths.size();
    CHECK(bytes.size() == expected);
    CHECK(static_cast<unsigned char>(bytes[0]) == rays[0].size() % 256);
    Ray back;
    for (const auto& r : rays) {
      REQUIRE(read_ray_record(ss, back));
      CHECK(back.lengths == r.lengths);
      CHECK(back.directions == r.directions);
    }
    CHECK_FALSE(read_ray_record(ss, back));
    std::stringstream cut(bytes.substr(0, 10));
    CHECK_THROWS_AS(read_ray_record(cut, back), std::runtime_error);
  }
}
