#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "fibermc/vec3.hpp"

namespace fibermc {

struct VoxelIndex {
  int i{0};
  int j{0};
  int k{0};
  friend constexpr bool operator==(const VoxelIndex&, const VoxelIndex&) = default;
};

/// Origin-centred cubic voxelization: voxel centres at (i h, j h, k h) with
/// i, j, k in {-m, ..., m}. Voxel V0 is centred at the origin and the grid
/// covers the cube of side (2m + 1) h.
class VoxelGrid {
 public:
  /// Throws std::invalid_argument unless h > 0 and m >= 1.
  VoxelGrid(double h, int m);

  [[nodiscard]] double edge() const { return h_; }
  [[nodiscard]] int radius() const { return m_; }
  [[nodiscard]] int per_axis() const { return 2 * m_ + 1; }
  [[nodiscard]] std::size_t voxel_count() const {
    const auto n = static_cast<std::size_t>(per_axis());
    return n * n * n;
  }

  /// Index of the voxel containing `p`, or nullopt outside the grid. Each
  /// coordinate rounds half-way cases toward -infinity, so a voxel owns its
  /// upper faces and not its lower ones.
  [[nodiscard]] std::optional<VoxelIndex> locate(const Vec3& p) const;

  /// Same as locate() but returns the linear index (or npos).
  [[nodiscard]] std::size_t locate_linear(const Vec3& p) const {
    const int i = axis_index(p.x);
    const int j = axis_index(p.y);
    const int k = axis_index(p.z);
    if (std::abs(i) > m_ || std::abs(j) > m_ || std::abs(k) > m_) return npos;
    return flatten_unchecked(i, j, k);
  }

  [[nodiscard]] Vec3 center(const VoxelIndex& v) const { return {v.i * h_, v.j * h_, v.k * h_}; }
  [[nodiscard]] bool contains(const VoxelIndex& v) const {
    return std::abs(v.i) <= m_ && std::abs(v.j) <= m_ && std::abs(v.k) <= m_;
  }

  /// Row-major linearization with i slowest, so linear order is lexicographic
  /// in (i, j, k). Throws std::out_of_range outside the grid.
  [[nodiscard]] std::size_t flatten(const VoxelIndex& v) const;
  [[nodiscard]] VoxelIndex unflatten(std::size_t linear) const;

  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

 private:
  [[nodiscard]] int axis_index(double coord) const {
    // ceil(t - 1/2) is round-half-down.
    return static_cast<int>(std::ceil(coord * inv_h_ - 0.5));
  }
  [[nodiscard]] std::size_t flatten_unchecked(int i, int j, int k) const {
    const auto n = static_cast<std::size_t>(per_axis());
    return (static_cast<std::size_t>(i + m_) * n + static_cast<std::size_t>(j + m_)) * n +
           static_cast<std::size_t>(k + m_);
  }

  double h_;
  int m_;
  double inv_h_;
};

class EmptyFieldError : public std::runtime_error {
 public:
  EmptyFieldError() : std::runtime_error("fluence field has no samples") {}
};

/// Histogram of walk endpoints over a voxel grid, with the statistics needed
/// for a standard error under batched and grouped sampling.
///
/// Samples arrive in batches (one ray, or one block of chain steps). Every
/// sample also carries a group label (the rotation index of the MC-SOME and
/// Metropolis-Hastings estimators). With p = hits / N the variance estimate is
///
///   var(p) = sum_b (c_b - p n_b)^2 / N^2 + sum_g (c_g - p n_g)^2 / N^2
///
/// where c_b, n_b are the hits and samples of batch b and c_g, n_g those of
/// group g. With one sample per batch and a single group this is exactly the
/// binomial p (1 - p) / N. All accumulators hold integers, so merging partial
/// fields is exact and order independent.
class FluenceField {
 public:
  FluenceField(VoxelGrid grid, double scale, std::size_t groups = 1);

  [[nodiscard]] const VoxelGrid& grid() const { return grid_; }
  [[nodiscard]] double scale() const { return scale_; }
  [[nodiscard]] std::size_t groups() const { return groups_; }

  /// Adds one sample to the open batch. Endpoints outside the grid only count
  /// toward the sample total.
  void add(const Vec3& endpoint, std::size_t group = 0, std::uint32_t weight = 1) {
    add_linear(grid_.locate_linear(endpoint), group, weight);
  }
  void add_linear(std::size_t voxel, std::size_t group, std::uint32_t weight);

  /// Closes the open batch; a no-op when it is empty.
  void close_batch();

  /// Adds one endpoint as a batch of its own (plain Monte Carlo semantics).
  void accumulate(const Vec3& endpoint, std::uint32_t weight = 1) {
    add(endpoint, 0, weight);
    close_batch();
  }

  /// Exact merge of another field over the same grid and group count. Both
  /// fields must have their batches closed.
  void merge(const FluenceField& other);

  /// Closes any open batch and computes estimates and standard errors.
  /// Throws EmptyFieldError when no sample was recorded.
  void finalize();

  [[nodiscard]] bool finalized() const { return finalized_; }
  [[nodiscard]] std::uint64_t total_samples() const { return total_samples_; }
  [[nodiscard]] std::uint64_t outside_samples() const { return outside_samples_; }
  [[nodiscard]] std::uint64_t batches() const { return batches_; }
  [[nodiscard]] std::uint64_t hits(std::size_t voxel) const { return hits_[voxel]; }
  [[nodiscard]] std::uint64_t group_hits(std::size_t group, std::size_t voxel) const {
    return group_hits_.empty() ? hits_[voxel] : group_hits_[group * hits_.size() + voxel];
  }
  [[nodiscard]] std::uint64_t group_samples(std::size_t group) const { return group_samples_[group]; }

  /// Requires finalize().
  [[nodiscard]] double estimate(std::size_t voxel) const { return estimate_.at(voxel); }
  [[nodiscard]] double standard_error(std::size_t voxel) const { return stderr_.at(voxel); }
  [[nodiscard]] double estimate(const VoxelIndex& v) const { return estimate(grid_.flatten(v)); }
  [[nodiscard]] double standard_error(const VoxelIndex& v) const { return standard_error(grid_.flatten(v)); }
  [[nodiscard]] const std::vector<double>& estimates() const { return estimate_; }
  [[nodiscard]] const std::vector<double>& standard_errors() const { return stderr_; }

  /// CSV export: header `ix,iy,iz,x,y,z,fluence,stderr,count`, one row per
  /// voxel in lexicographic (ix, iy, iz) order, reals with 9 significant
  /// digits. Requires finalize().
  void write_csv(std::ostream& out) const;

 private:
  VoxelGrid grid_;
  double scale_;
  std::size_t groups_;

  std::vector<std::uint64_t> hits_;
  std::vector<double> batch_sumsq_;  // sum_b c_b^2
  std::vector<double> batch_cross_;  // sum_b c_b n_b
  std::vector<std::uint64_t> group_hits_;  // groups x voxels, empty when groups == 1
  std::vector<std::uint64_t> group_samples_;

  std::vector<std::uint32_t> open_counts_;
  std::vector<std::size_t> open_touched_;
  std::uint64_t open_samples_{0};

  std::uint64_t total_samples_{0};
  std::uint64_t outside_samples_{0};
  std::uint64_t batches_{0};
  double batch_size_sumsq_{0};  // sum_b n_b^2

  bool finalized_{false};
  std::vector<double> estimate_;
  std::vector<double> stderr_;
};

/// Formats a real with 9 significant digits (the CSV convention).
std::string format_real(double v);

}  // namespace fibermc
