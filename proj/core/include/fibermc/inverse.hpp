#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "fibermc/grid.hpp"
#include "fibermc/mc.hpp"
#include "fibermc/random.hpp"

namespace fibermc {

struct Measurement {
  Vec3 position;
  double value{0.0};
};

/// Fluence measurements at voxel positions; every value must be positive.
using Measurements = std::vector<Measurement>;

/// Reads CSV with header `x,y,z,value`. Throws std::runtime_error on malformed
/// input, an empty list or a non-positive value.
Measurements read_measurements_csv(std::istream& in);
void write_measurements_csv(std::ostream& out, const Measurements& meas);

/// Voxels holding the measurement positions; throws std::out_of_range when a
/// position falls outside the grid.
std::vector<VoxelIndex> measurement_voxels(const VoxelGrid& grid, const Measurements& meas);

/// J = 1/2 sum ((L_i - m_i) / m_i)^2.
double score_j(const std::vector<double>& estimates, const Measurements& meas);

/// Fluence, gradient and Hessian at a few voxels, all from one MC-SOME sample.
/// Variables are ordered (mu_s, mu_a); the Hessian is stored as
/// (d2/dmu_s2, d2/dmu_s dmu_a, d2/dmu_a2).
struct DerivBundle {
  std::vector<VoxelIndex> voxels;
  std::vector<double> value;
  std::vector<std::array<double, 2>> gradient;
  std::vector<std::array<double, 3>> hessian;
  /// Standard errors in the same layout.
  std::vector<double> value_se;
  std::vector<std::array<double, 2>> gradient_se;
  std::vector<std::array<double, 3>> hessian_se;
  std::vector<std::uint64_t> hits;
  std::uint64_t samples{0};
};

DerivBundle estimate_with_derivs(const Scenario& scenario, const std::vector<VoxelIndex>& voxels,
                                 const McSomeSettings& settings, const RandomStream& stream,
                                 const RunOptions& options = {});

struct ScoreDerivs {
  double J{0.0};
  std::array<double, 2> gradient{};
  std::array<double, 3> hessian{};
};

/// Gradient sum (L_i - m_i) / m_i^2 grad L_i and Hessian
/// sum [(L_i - m_i) / m_i^2 Hess L_i + grad L_i grad L_i^T / m_i^2].
ScoreDerivs grad_and_hess_j(const DerivBundle& bundle, const Measurements& meas);

/// Eigenvalues (smaller first) of the symmetric matrix [[a, b], [b, c]] from
/// its trace and determinant.
std::array<double, 2> symmetric_eigenvalues(const std::array<double, 3>& m);

enum class StepType { lm, steepest, none };
std::string to_string(StepType type);

struct DescentOptions {
  double lambda{0.01};
  double eps_score{0.005};
  double tau0{1.0};
  std::uint32_t iter_cap{50};
  McSomeSettings samples{10000, 20, 10};
  RunOptions run{};
};

/// One evaluated iterate. `step_type` and `tau` describe the move taken from
/// this iterate; the final row has step type none.
struct DescentStep {
  std::uint32_t k{0};
  double mu_s{0.0};
  double mu_a{0.0};
  double J{0.0};
  std::array<double, 2> gradient{};
  std::array<double, 2> eigenvalues{};
  StepType step_type{StepType::none};
  double tau{0.0};
};

struct DescentTrace {
  std::vector<DescentStep> steps;
  bool converged{false};
};

/// Hybrid Levenberg-Marquardt / steepest descent in (mu_s, mu_a) with g held
/// at scenario.optics.g(). Iterate k draws its sample from
/// stream.derive(descent, k). With tau_k = tau0 / (1 + k / 10): when both
/// eigenvalues of the estimated Hessian H are positive the step is
/// -tau_k [H + lambda diag H]^{-1} grad J, otherwise (or when that matrix has
/// condition number above 1e12) it is -tau_k (J / |grad J|) grad J. A
/// coordinate that would become <= 0 is replaced by half its previous value.
/// Stops when J <= eps_score or after iter_cap + 1 evaluations.
DescentTrace hybrid_descent(const Scenario& scenario, const Measurements& meas, double mu_s0, double mu_a0,
                            const DescentOptions& options, const RandomStream& stream);

/// CSV header `k,mu_s,mu_a,J,dJ_dmu_s,dJ_dmu_a,eig1,eig2,step_type,tau`.
void write_descent_csv(std::ostream& out, const DescentTrace& trace);

struct ScanGrid {
  std::vector<double> g{0.85, 0.90, 0.95};
  std::vector<double> mu_a{0.5, 0.75, 1.0, 1.25, 1.5};
  std::vector<double> mu_s{75, 90, 105, 120, 135};
};

/// Parses `g=0.85,0.9;mu_a=0.5,1;mu_s=75` (any subset, any order; missing
/// axes keep their defaults). Throws std::invalid_argument on bad input.
ScanGrid parse_scan_grid(const std::string& spec);

struct ScanRow {
  double g{0.0};
  double mu_a{0.0};
  double mu_s{0.0};
  double J{0.0};
};

/// Scores every (g, mu_a, mu_s) triplet with an MC-SOME estimate at the
/// measurement voxels. Triplet number t (g slowest, mu_s fastest) uses
/// stream.derive(scan, t).
std::vector<ScanRow> sensitivity_scan(const Scenario& scenario, const ScanGrid& grid, const Measurements& meas,
                                      const McSomeSettings& settings, const RandomStream& stream,
                                      const RunOptions& options = {});

/// CSV header `g,mu_a,mu_s,J`.
void write_scan_csv(std::ostream& out, const std::vector<ScanRow>& rows);

/// Synthetic measurements: MC-SOME fluence of `scenario` at the centres of the
/// voxels holding `positions`. Throws std::runtime_error if a voxel gets no hit.
Measurements simulate_measurements(const Scenario& scenario, const std::vector<Vec3>& positions,
                                   const McSomeSettings& settings, const RandomStream& stream,
                                   const RunOptions& options = {});

}  // namespace fibermc
