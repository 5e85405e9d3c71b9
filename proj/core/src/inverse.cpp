#include "fibermc/inverse.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>

namespace fibermc {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double parse_number(const std::string& text, const std::string& what) {
  const std::string t = trim(text);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size() || t.empty() || !std::isfinite(v)) {
    throw std::invalid_argument(fmt::format("{}: '{}' is not a number", what, text));
  }
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, sep)) out.push_back(item);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

Scenario with_params(const Scenario& base, double mu_s, double mu_a, double g) {
  return Scenario{OpticalParams(mu_s, mu_a, g), base.source, base.grid};
}

}  // namespace

Measurements read_measurements_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != "x,y,z,value") {
    throw std::runtime_error("measurements: expected header 'x,y,z,value'");
  }
  Measurements meas;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto cells = split(line, ',');
    if (cells.size() != 4) throw std::runtime_error(fmt::format("measurements: line {} needs 4 fields", row));
    try {
      Measurement m{{parse_number(cells[0], "x"), parse_number(cells[1], "y"), parse_number(cells[2], "z")},
                    parse_number(cells[3], "value")};
      if (!(m.value > 0.0)) throw std::invalid_argument("value must be positive");
      meas.push_back(m);
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error(fmt::format("measurements: line {}: {}", row, e.what()));
    }
  }
  if (meas.empty()) throw std::runtime_error("measurements: no data rows");
  return meas;
}

void write_measurements_csv(std::ostream& out, const Measurements& meas) {
  out << "x,y,z,value\n";
  for (const auto& m : meas) {
    out << fmt::format("{:.9g},{:.9g},{:.9g},{:.9g}\n", m.position.x, m.position.y, m.position.z, m.value);
  }
}

std::vector<VoxelIndex> measurement_voxels(const VoxelGrid& grid, const Measurements& meas) {
  std::vector<VoxelIndex> out;
  out.reserve(meas.size());
  for (const auto& m : meas) {
    const auto v = grid.locate(m.position);
    if (!v) {
      throw std::out_of_range(
          fmt::format("measurement at ({}, {}, {}) is outside the grid", m.position.x, m.position.y, m.position.z));
    }
    out.push_back(*v);
  }
  return out;
}

double score_j(const std::vector<double>& estimates, const Measurements& meas) {
  if (estimates.size() != meas.size()) throw std::invalid_argument("score_j: size mismatch");
  double j = 0.0;
  for (std::size_t i = 0; i < meas.size(); ++i) {
    if (!(meas[i].value > 0.0)) throw std::invalid_argument("score_j: measurements must be positive");
    const double r = (estimates[i] - meas[i].value) / meas[i].value;
    j += r * r;
  }
  return 0.5 * j;
}

DerivBundle estimate_with_derivs(const Scenario& scenario, const std::vector<VoxelIndex>& voxels,
                                 const McSomeSettings& settings, const RandomStream& stream,
                                 const RunOptions& options) {
  // Duplicate voxels are allowed here (two measurements in one voxel).
  std::vector<VoxelIndex> unique;
  std::vector<std::size_t> slot(voxels.size());
  for (std::size_t i = 0; i < voxels.size(); ++i) {
    const auto it = std::find(unique.begin(), unique.end(), voxels[i]);
    slot[i] = static_cast<std::size_t>(it - unique.begin());
    if (it == unique.end()) unique.push_back(voxels[i]);
  }
  const WatchResult w = estimate_mc_some_watch(scenario, settings, unique, stream, options);
  DerivBundle b;
  b.voxels = voxels;
  b.samples = w.samples;
  for (std::size_t i = 0; i < voxels.size(); ++i) {
    const PayloadArray& m = w.mean[slot[i]];
    const PayloadArray& s = w.standard_error[slot[i]];
    b.value.push_back(m[kValue]);
    b.gradient.push_back({m[kDMuS], m[kDMuA]});
    b.hessian.push_back({m[kD2MuS], m[kD2MuSMuA], m[kD2MuA]});
    b.value_se.push_back(s[kValue]);
    b.gradient_se.push_back({s[kDMuS], s[kDMuA]});
    b.hessian_se.push_back({s[kD2MuS], s[kD2MuSMuA], s[kD2MuA]});
    b.hits.push_back(w.hits[slot[i]]);
  }
  return b;
}

ScoreDerivs grad_and_hess_j(const DerivBundle& bundle, const Measurements& meas) {
  if (bundle.value.size() != meas.size()) throw std::invalid_argument("grad_and_hess_j: size mismatch");
  ScoreDerivs out;
  out.J = score_j(bundle.value, meas);
  for (std::size_t i = 0; i < meas.size(); ++i) {
    const double m2 = meas[i].value * meas[i].value;
    const double w = (bundle.value[i] - meas[i].value) / m2;
    const auto& g = bundle.gradient[i];
    const auto& h = bundle.hessian[i];
    out.gradient[0] += w * g[0];
    out.gradient[1] += w * g[1];
    out.hessian[0] += w * h[0] + g[0] * g[0] / m2;
    out.hessian[1] += w * h[1] + g[0] * g[1] / m2;
    out.hessian[2] += w * h[2] + g[1] * g[1] / m2;
  }
  return out;
}

std::array<double, 2> symmetric_eigenvalues(const std::array<double, 3>& m) {
  const double half_trace = 0.5 * (m[0] + m[2]);
  const double half_diff = 0.5 * (m[0] - m[2]);
  const double disc = std::hypot(half_diff, m[1]);
  return {half_trace - disc, half_trace + disc};
}

std::string to_string(StepType type) {
  switch (type) {
    case StepType::lm:
      return "LM";
    case StepType::steepest:
      return "steepest";
    case StepType::none:
      break;
  }
  return "none";
}

DescentTrace hybrid_descent(const Scenario& scenario, const Measurements& meas, double mu_s0, double mu_a0,
                            const DescentOptions& options, const RandomStream& stream) {
  if (!(mu_s0 > 0.0 && mu_a0 > 0.0)) throw std::invalid_argument("descent start must be positive");
  if (meas.empty()) throw std::invalid_argument("descent needs at least one measurement");
  if (!(options.lambda >= 0.0) || !(options.tau0 > 0.0) || !(options.eps_score >= 0.0)) {
    throw std::invalid_argument("descent options out of range");
  }
  const std::vector<VoxelIndex> voxels = measurement_voxels(scenario.grid, meas);
  DescentTrace trace;
  double mu_s = mu_s0;
  double mu_a = mu_a0;
  for (std::uint32_t k = 0;; ++k) {
    const Scenario sc = with_params(scenario, mu_s, mu_a, scenario.optics.g());
    const DerivBundle bundle =
        estimate_with_derivs(sc, voxels, options.samples, stream.derive(StreamPurpose::descent, k), options.run);
    const ScoreDerivs d = grad_and_hess_j(bundle, meas);
    DescentStep row;
    row.k = k;
    row.mu_s = mu_s;
    row.mu_a = mu_a;
    row.J = d.J;
    row.gradient = d.gradient;
    row.eigenvalues = symmetric_eigenvalues(d.hessian);
    if (d.J <= options.eps_score) {
      trace.converged = true;
      trace.steps.push_back(row);
      break;
    }
    if (k >= options.iter_cap) {
      trace.steps.push_back(row);
      break;
    }
    const double tau = options.tau0 / (1.0 + static_cast<double>(k) / 10.0);
    row.tau = tau;
    std::array<double, 2> step{0.0, 0.0};
    bool lm = false;
    if (row.eigenvalues[0] > 0.0 && row.eigenvalues[1] > 0.0) {
      const std::array<double, 3> damped{d.hessian[0] * (1.0 + options.lambda), d.hessian[1],
                                         d.hessian[2] * (1.0 + options.lambda)};
      const auto ev = symmetric_eigenvalues(damped);
      const double det = damped[0] * damped[2] - damped[1] * damped[1];
      if (ev[0] > 0.0 && ev[1] / ev[0] <= 1e12 && det > 0.0) {
        step[0] = -tau * (damped[2] * d.gradient[0] - damped[1] * d.gradient[1]) / det;
        step[1] = -tau * (-damped[1] * d.gradient[0] + damped[0] * d.gradient[1]) / det;
        lm = true;
      }
    }
    if (!lm) {
      const double gnorm = std::hypot(d.gradient[0], d.gradient[1]);
      if (gnorm > 0.0) {
        const double f = tau * d.J / gnorm;
        step[0] = -f * d.gradient[0];
        step[1] = -f * d.gradient[1];
      }
    }
    row.step_type = lm ? StepType::lm : StepType::steepest;
    trace.steps.push_back(row);
    const double next_s = mu_s + step[0];
    const double next_a = mu_a + step[1];
    mu_s = next_s > 0.0 ? next_s : 0.5 * mu_s;
    mu_a = next_a > 0.0 ? next_a : 0.5 * mu_a;
  }
  return trace;
}

void write_descent_csv(std::ostream& out, const DescentTrace& trace) {
  out << "k,mu_s,mu_a,J,dJ_dmu_s,dJ_dmu_a,eig1,eig2,step_type,tau\n";
  for (const auto& s : trace.steps) {
    out << fmt::format("{},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{},{:.9g}\n", s.k, s.mu_s, s.mu_a, s.J,
                       s.gradient[0], s.gradient[1], s.eigenvalues[0], s.eigenvalues[1], to_string(s.step_type),
                       s.tau);
  }
}

ScanGrid parse_scan_grid(const std::string& spec) {
  ScanGrid grid;
  if (trim(spec).empty()) return grid;
  for (const auto& part : split(spec, ';')) {
    const std::string p = trim(part);
    if (p.empty()) continue;
    const auto eq = p.find('=');
    if (eq == std::string::npos) throw std::invalid_argument(fmt::format("scan grid: '{}' lacks '='", p));
    const std::string key = trim(p.substr(0, eq));
    std::vector<double> values;
    for (const auto& v : split(p.substr(eq + 1), ',')) values.push_back(parse_number(v, "scan grid " + key));
    if (values.empty()) throw std::invalid_argument(fmt::format("scan grid: axis '{}' is empty", key));
    if (key == "g") {
      grid.g = values;
    } else if (key == "mu_a") {
      grid.mu_a = values;
    } else if (key == "mu_s") {
      grid.mu_s = values;
    } else {
      throw std::invalid_argument(fmt::format("scan grid: unknown axis '{}'", key));
    }
  }
  return grid;
}

std::vector<ScanRow> sensitivity_scan(const Scenario& scenario, const ScanGrid& grid, const Measurements& meas,
                                      const McSomeSettings& settings, const RandomStream& stream,
                                      const RunOptions& options) {
  if (grid.g.empty() || grid.mu_a.empty() || grid.mu_s.empty()) throw std::invalid_argument("scan grid is empty");
  const std::vector<VoxelIndex> voxels = measurement_voxels(scenario.grid, meas);
  std::vector<ScanRow> rows;
  std::uint64_t t = 0;
  for (const double g : grid.g) {
    for (const double mu_a : grid.mu_a) {
      for (const double mu_s : grid.mu_s) {
        const Scenario sc = with_params(scenario, mu_s, mu_a, g);
        const DerivBundle b = estimate_with_derivs(sc, voxels, settings, stream.derive(StreamPurpose::scan, t++), options);
        rows.push_back({g, mu_a, mu_s, score_j(b.value, meas)});
      }
    }
  }
  return rows;
}

void write_scan_csv(std::ostream& out, const std::vector<ScanRow>& rows) {
  out << "g,mu_a,mu_s,J\n";
  for (const auto& r : rows) out << fmt::format("{:.9g},{:.9g},{:.9g},{:.9g}\n", r.g, r.mu_a, r.mu_s, r.J);
}

Measurements simulate_measurements(const Scenario& scenario, const std::vector<Vec3>& positions,
                                   const McSomeSettings& settings, const RandomStream& stream,
                                   const RunOptions& options) {
  if (positions.empty()) throw std::invalid_argument("no measurement positions");
  Measurements meas;
  for (const auto& p : positions) meas.push_back({p, 1.0});
  const std::vector<VoxelIndex> voxels = measurement_voxels(scenario.grid, meas);
  const DerivBundle b = estimate_with_derivs(scenario, voxels, settings, stream.derive(StreamPurpose::measurements, 0), options);
  for (std::size_t i = 0; i < meas.size(); ++i) {
    if (b.hits[i] == 0) {
      throw std::runtime_error(fmt::format("no sample reached the measurement voxel at ({}, {}, {})", positions[i].x,
                                           positions[i].y, positions[i].z));
    }
    meas[i].value = b.value[i];
  }
  return meas;
}

}  // namespace fibermc
