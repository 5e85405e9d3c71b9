#include <doctest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "fibermc/diagnostics.hpp"
#include "fibermc/optics.hpp"
#include "fibermc/random.hpp"

using namespace fibermc;

namespace {

double hg_cdf_quadrature(double c, double g) {
  auto f = [g](double x) { return 0.5 * hg_density(x, g); };
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, -1.0, c, 20, 1e-13);
}

double hg_cdf_closed(double c, double g) {
  return (1.0 - g * g) / (2.0 * g) * (1.0 / std::sqrt(1.0 + g * g - 2.0 * g * c) - 1.0 / (1.0 + g));
}

}  // namespace

TEST_SUITE("optics") {
  TEST_CASE("optical parameters") {
    const OpticalParams p(280.0, 0.57, 0.9);
    CHECK(p.mu() == 280.0 + 0.57);
    CHECK(p.rho() == 280.0 / (280.0 + 0.57));
    CHECK_THROWS_AS(OpticalParams(0.0, 1.0, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(OpticalParams(1.0, -1.0, 0.5), std::invalid_argument);
    CHECK_THROWS_AS(OpticalParams(1.0, 1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(OpticalParams(1.0, 1.0, -0.1), std::invalid_argument);
    SourceSpec bad{2.0, 1.0};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    SourceSpec bad_c{0.3, 0.0};
    CHECK_THROWS_AS(bad_c.validate(), std::invalid_argument);
  }

  TEST_CASE("exponential inverse cdf") {
    CHECK(exp_inverse_cdf(0.0, 280.57) == 0.0);
    CHECK(exp_inverse_cdf(1.0 - std::exp(-1.0), 1.0) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(exp_inverse_cdf(0.5, 2.0) == doctest::Approx(0.34657359027997265).epsilon(1e-15));
    CHECK_THROWS_AS(exp_inverse_cdf(NAN, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(exp_inverse_cdf(0.5, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(exp_inverse_cdf(1.0, 1.0), std::invalid_argument);
  }

  TEST_CASE("geometric path length") {
    CHECK(geometric_path_length(0.9, 0.5) == 0);
    CHECK(geometric_path_length(0.3, 0.5) == 1);
    CHECK(geometric_path_length(0.5, 1e-300) == 0);
    CHECK(geometric_path_length(1e-300, 1e-13) == 23);
    CHECK_THROWS_AS(geometric_path_length(0.5, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(geometric_path_length(0.5, 0.0), std::invalid_argument);
    // Enumerated CDF: N = n iff rho^{n+1} < u <= rho^n.
    for (int n = 0; n < 6; ++n) {
      CHECK(geometric_path_length(std::pow(0.5, n) * 0.999, 0.5) == static_cast<std::uint64_t>(n));
    }
  }

  TEST_CASE("geometric law, chi-squared at 1%") {
    for (const double rho : {0.5, 0.981, 0.998}) {
      RandomStream rs(101);
      std::vector<std::uint64_t> draws(1000000);
      for (auto& d : draws) d = geometric_path_length(rs.uniform_open(), rho);
      const LengthLawResult r = length_law_diagnostic(draws, rho, 1);
      CAPTURE(rho);
      CHECK(r.valid);
      CHECK(r.p_value > 0.01);
    }
  }

  TEST_CASE("HG density") {
    CHECK(hg_density(0.3, 0.0) == 1.0);
    CHECK(hg_density(-1.0, 0.0) == 1.0);
    CHECK(hg_density(1.0, 0.5) == doctest::Approx(6.0).epsilon(1e-15));
    for (const double g : {0.5, 0.9}) {
      auto f = [g](double c) { return 0.5 * hg_density(c, g); };
      auto fm = [g](double c) { return 0.5 * c * hg_density(c, g); };
      using GK = boost::math::quadrature::gauss_kronrod<double, 61>;
      CHECK(std::abs(GK::integrate(f, -1.0, 1.0, 25, 1e-14) - 1.0) < 1e-10);
      CHECK(std::abs(GK::integrate(fm, -1.0, 1.0, 25, 1e-14) - g) < 1e-10);
    }
  }

  TEST_CASE("HG inverse cdf") {
    CHECK(hg_inverse_cdf(0.0, 0.9) == doctest::Approx(-1.0).epsilon(1e-14));
    CHECK(hg_inverse_cdf(1.0, 0.9) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(hg_inverse_cdf(0.5, 0.5) == doctest::Approx(0.6875).epsilon(1e-15));
    CHECK(hg_cdf_quadrature(0.6875, 0.5) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK_THROWS_AS(hg_inverse_cdf(0.5, 0.0), std::invalid_argument);
    CHECK(sample_hg_cosine(0.25, 0.0) == -0.5);
    CHECK(sample_hg_cosine(0.25, 1e-7) == -0.5);
    for (const double y : {0.01, 0.2, 0.5, 0.77, 0.99}) {
      const double c = hg_inverse_cdf(y, 0.9);
      CHECK(c >= -1.0);
      CHECK(c <= 1.0);
    }
  }

  TEST_CASE("HG sampling matches the density (KS at 1%, mean)") {
    for (const double g : {0.5, 0.9, 0.95}) {
      // Closed-form CDF agrees with quadrature of the density.
      for (const double c : {-0.9, -0.2, 0.4, 0.95}) {
        CHECK(hg_cdf_closed(c, g) == doctest::Approx(hg_cdf_quadrature(c, g)).epsilon(1e-10));
      }
      RandomStream rs(7);
      const std::size_t n = 1000000;
      std::vector<double> s(n);
      double sum = 0.0;
      double sumsq = 0.0;
      for (auto& x : s) {
        x = sample_hg_cosine(rs.uniform(), g);
        sum += x;
        sumsq += x * x;
      }
      std::sort(s.begin(), s.end());
      double d = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double f = hg_cdf_closed(s[i], g);
        d = std::max({d, std::abs(f - static_cast<double>(i) / n), std::abs(static_cast<double>(i + 1) / n - f)});
      }
      CAPTURE(g);
      CHECK(d < 1.628 / std::sqrt(static_cast<double>(n)));
      const double mean = sum / n;
      const double se = std::sqrt((sumsq / n - mean * mean) / n);
      CHECK(std::abs(mean - g) < 4.0 * se);
    }
  }

  TEST_CASE("cone directions") {
    const double alpha = std::numbers::pi / 10;
    const Direction apex = sample_cone_direction(0.0, 0.37, alpha);
    CHECK(apex.x == 0.0);
    CHECK(apex.y == 0.0);
    CHECK(apex.z == -1.0);
    const Direction rim = sample_cone_direction(1.0, 0.2, alpha);
    CHECK(std::acos(-rim.z) == doctest::Approx(alpha).epsilon(1e-12));
    const SourceSpec src;
    CHECK(src.cap_measure() == doctest::Approx(0.024471741852423214).epsilon(1e-14));
    RandomStream rs(3);
    for (int i = 0; i < 10000; ++i) {
      const Direction w = sample_cone_direction(rs.uniform(), rs.uniform(), alpha);
      CHECK(std::abs(norm(w) - 1.0) < 1e-12);
      CHECK(src.contains(w));
    }
  }

  TEST_CASE("frame transport") {
    const Direction e3{0, 0, 1};
    const Direction p{0.6, 0.0, 0.8};
    const Direction same = frame_transport(p, 1.0, 2.3);
    CHECK(norm(same - p) < 1e-15);
    const Direction orth = frame_transport(e3, 0.0, 0.0);
    CHECK(std::abs(dot(orth, e3)) < 1e-15);
    CHECK(std::abs(norm(orth) - 1.0) < 1e-15);

    RandomStream rs(11);
    double worst = 0.0;
    double worst_norm = 0.0;
    double worst_phi = 0.0;
    for (int i = 0; i < 1000000; ++i) {
      Direction prev;
      if (i % 4 == 0) {
        // Near the poles, where pole-specific formulas usually kick in.
        const double eps = std::pow(10.0, -3.0 - 12.0 * rs.uniform());
        const double s = rs.uniform() < 0.5 ? 1.0 : -1.0;
        prev = normalized(Vec3{eps * (rs.uniform() - 0.5), eps * (rs.uniform() - 0.5), s});
      } else {
        prev = normalized(Vec3{rs.uniform() - 0.5, rs.uniform() - 0.5, rs.uniform() - 0.5});
      }
      const double c = 2.0 * rs.uniform() - 1.0;
      const double phi = 2.0 * std::numbers::pi * rs.uniform();
      const Direction out = frame_transport(prev, c, phi);
      worst = std::max(worst, std::abs(dot(out, prev) - c));
      worst_norm = std::max(worst_norm, std::abs(norm(out) - 1.0));
      if (std::abs(c) < 0.99) {
        double d = std::abs(frame_azimuth(prev, out) - phi);
        d = std::min(d, 2.0 * std::numbers::pi - d);
        worst_phi = std::max(worst_phi, d);
      }
    }
    CHECK(worst < 1e-9);
    CHECK(worst_norm < 1e-12);
    CHECK(worst_phi < 1e-9);
  }

  TEST_CASE("orthonormal frame is right-handed") {
    RandomStream rs(5);
    for (int i = 0; i < 1000; ++i) {
      const Direction n = normalized(Vec3{rs.uniform() - 0.5, rs.uniform() - 0.5, rs.uniform() - 0.5});
      Vec3 b1;
      Vec3 b2;
      orthonormal_frame(n, b1, b2);
      CHECK(std::abs(dot(b1, b2)) < 1e-14);
      CHECK(std::abs(dot(b1, n)) < 1e-14);
      CHECK(norm(cross(b1, b2) - n) < 1e-14);
    }
  }

  TEST_CASE("random streams") {
    RandomStream a(42);
    RandomStream b(42);
    for (int i = 0; i < 100; ++i) CHECK(a() == b());
    const RandomStream root(42);
    RandomStream c1 = root.derive(StreamPurpose::rays, 0);
    RandomStream c2 = root.derive(StreamPurpose::rays, 1);
    RandomStream c3 = root.derive(StreamPurpose::rotations, 0);
    CHECK(c1.key() != c2.key());
    CHECK(c1.key() != c3.key());
    // Children do not depend on the parent's consumption.
    RandomStream used(42);
    for (int i = 0; i < 10; ++i) used();
    CHECK(used.derive(StreamPurpose::rays, 0).key() == c1.key());
    for (int i = 0; i < 100000; ++i) {
      const double u = c1.uniform();
      const double v = c2.uniform_open();
      CHECK(u >= 0.0);
      CHECK(u < 1.0);
      CHECK(v > 0.0);
      CHECK(v < 1.0);
    }
  }
}
