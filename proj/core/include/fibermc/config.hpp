#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "fibermc/inverse.hpp"
#include "fibermc/mc.hpp"
#include "fibermc/mh.hpp"

namespace fibermc {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Fully resolved run configuration.
///
/// Text form: one `key = value` per line, `#` starts a comment. The scenario
/// keys mu_s, mu_a, g, alpha, c, voxel_edge and grid_radius are required;
/// method keys fall back to the defaults below. Unknown or repeated keys are
/// errors.
struct Config {
  double mu_s{280.0};
  double mu_a{0.57};
  double g{0.9};
  double alpha{0.31415926535897931};
  double c{1.0};
  double voxel_edge{0.04};
  int grid_radius{25};

  // Plain MC uses M; MC-SOME uses M, M_points, M_rot.
  std::uint64_t M{30000};
  std::uint32_t M_points{40};
  std::uint32_t M_rot{30};

  // Metropolis-Hastings (M_rot is shared).
  std::uint64_t T{250000};
  std::uint32_t j{10};
  std::uint32_t J{21};
  double epsilon{0.9};
  double burn_in_frac{0.05};

  // Inverse problem.
  double lambda{0.01};
  double eps_score{0.005};
  double tau0{1.0};
  std::uint32_t iter_cap{50};
  double mu_s0{90.0};
  double mu_a0{2.0};
  std::uint64_t fit_M{10000};
  std::uint32_t fit_M_points{20};
  std::uint32_t fit_M_rot{10};

  /// Throws ConfigError naming the first invalid value.
  void validate() const;

  [[nodiscard]] Scenario scenario() const;
  [[nodiscard]] McSomeSettings mc_some() const { return {M, M_points, M_rot}; }
  [[nodiscard]] MhParams mh() const;
  [[nodiscard]] DescentOptions descent(const RunOptions& run) const;

  /// Every key in canonical order, reals in shortest round-trip form, so that
  /// parsing the text back yields an identical Config.
  [[nodiscard]] std::string to_text() const;
};

/// Parses and validates; `origin` prefixes error messages.
Config parse_config(std::istream& in, const std::string& origin = "config");
Config load_config(const std::string& path);

}  // namespace fibermc
