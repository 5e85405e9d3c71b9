#include "fibermc/grid.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <ostream>

namespace fibermc {

VoxelGrid::VoxelGrid(double h, int m) : h_(h), m_(m), inv_h_(1.0 / h) {
  if (!(std::isfinite(h) && h > 0.0)) {
    throw std::invalid_argument("voxel edge must be positive");
  }
  if (m < 1) {
    throw std::invalid_argument("grid radius must be at least 1");
  }
}

std::optional<VoxelIndex> VoxelGrid::locate(const Vec3& p) const {
  const VoxelIndex v{axis_index(p.x), axis_index(p.y), axis_index(p.z)};
  if (!contains(v)) return std::nullopt;
  return v;
}

std::size_t VoxelGrid::flatten(const VoxelIndex& v) const {
  if (!contains(v)) {
    throw std::out_of_range(fmt::format("voxel ({}, {}, {}) outside grid of radius {}", v.i, v.j, v.k, m_));
  }
  return flatten_unchecked(v.i, v.j, v.k);
}

VoxelIndex VoxelGrid::unflatten(std::size_t linear) const {
  const auto n = static_cast<std::size_t>(per_axis());
  if (linear >= voxel_count()) throw std::out_of_range("linear voxel index outside grid");
  const int k = static_cast<int>(linear % n) - m_;
  linear /= n;
  const int j = static_cast<int>(linear % n) - m_;
  const int i = static_cast<int>(linear / n) - m_;
  return {i, j, k};
}

FluenceField::FluenceField(VoxelGrid grid, double scale, std::size_t groups)
    : grid_(grid),
      scale_(scale),
      groups_(groups),
      hits_(grid.voxel_count(), 0),
      batch_sumsq_(grid.voxel_count(), 0.0),
      batch_cross_(grid.voxel_count(), 0.0),
      group_samples_(groups, 0),
      open_counts_(grid.voxel_count(), 0) {
  if (groups == 0) throw std::invalid_argument("fluence field needs at least one group");
  if (groups > 1) group_hits_.assign(groups * grid.voxel_count(), 0);
}

void FluenceField::add_linear(std::size_t voxel, std::size_t group, std::uint32_t weight) {
  finalized_ = false;
  open_samples_ += weight;
  group_samples_[group] += weight;
  if (voxel == VoxelGrid::npos) {
    outside_samples_ += weight;
    return;
  }
  if (open_counts_[voxel] == 0) open_touched_.push_back(voxel);
  open_counts_[voxel] += weight;
  hits_[voxel] += weight;
  if (!group_hits_.empty()) group_hits_[group * hits_.size() + voxel] += weight;
}

void FluenceField::close_batch() {
  if (open_samples_ == 0) return;
  const auto n_b = static_cast<double>(open_samples_);
  for (const std::size_t v : open_touched_) {
    const auto c = static_cast<double>(open_counts_[v]);
    batch_sumsq_[v] += c * c;
    batch_cross_[v] += c * n_b;
    open_counts_[v] = 0;
  }
  open_touched_.clear();
  total_samples_ += open_samples_;
  batch_size_sumsq_ += n_b * n_b;
  ++batches_;
  open_samples_ = 0;
}

void FluenceField::merge(const FluenceField& other) {
  if (other.hits_.size() != hits_.size() || other.groups_ != groups_) {
    throw std::invalid_argument("cannot merge fluence fields with different layouts");
  }
  if (open_samples_ != 0 || other.open_samples_ != 0) {
    throw std::logic_error("merge requires closed batches");
  }
  finalized_ = false;
  for (std::size_t v = 0; v < hits_.size(); ++v) {
    hits_[v] += other.hits_[v];
    batch_sumsq_[v] += other.batch_sumsq_[v];
    batch_cross_[v] += other.batch_cross_[v];
  }
  for (std::size_t i = 0; i < group_hits_.size(); ++i) group_hits_[i] += other.group_hits_[i];
  for (std::size_t g = 0; g < groups_; ++g) group_samples_[g] += other.group_samples_[g];
  total_samples_ += other.total_samples_;
  outside_samples_ += other.outside_samples_;
  batches_ += other.batches_;
  batch_size_sumsq_ += other.batch_size_sumsq_;
}

void FluenceField::finalize() {
  close_batch();
  if (total_samples_ == 0) throw EmptyFieldError();
  const auto n = static_cast<double>(total_samples_);
  const std::size_t voxels = hits_.size();
  estimate_.assign(voxels, 0.0);
  stderr_.assign(voxels, 0.0);

  double group_size_sumsq = 0.0;
  for (const auto ng : group_samples_) group_size_sumsq += static_cast<double>(ng) * static_cast<double>(ng);

  for (std::size_t v = 0; v < voxels; ++v) {
    if (hits_[v] == 0) continue;
    const double p = static_cast<double>(hits_[v]) / n;
    double spread = batch_sumsq_[v] - 2.0 * p * batch_cross_[v] + p * p * batch_size_sumsq_;
    if (!group_hits_.empty()) {
      double sumsq = 0.0;
      double cross = 0.0;
      for (std::size_t g = 0; g < groups_; ++g) {
        const auto c = static_cast<double>(group_hits_[g * voxels + v]);
        sumsq += c * c;
        cross += c * static_cast<double>(group_samples_[g]);
      }
      spread += std::max(0.0, sumsq - 2.0 * p * cross + p * p * group_size_sumsq);
    }
    estimate_[v] = scale_ * p;
    stderr_[v] = scale_ * std::sqrt(std::max(0.0, spread)) / n;
  }
  finalized_ = true;
}

std::string format_real(double v) { return fmt::format("{:.9g}", v); }

void FluenceField::write_csv(std::ostream& out) const {
  if (!finalized_) throw std::logic_error("write_csv requires a finalized field");
  out << "ix,iy,iz,x,y,z,fluence,stderr,count\n";
  std::string line;
  for (std::size_t v = 0; v < hits_.size(); ++v) {
    const VoxelIndex idx = grid_.unflatten(v);
    const Vec3 c = grid_.center(idx);
    line.clear();
    fmt::format_to(std::back_inserter(line), "{},{},{},{:.9g},{:.9g},{:.9g},{:.9g},{:.9g},{}\n", idx.i, idx.j,
                   idx.k, c.x, c.y, c.z, estimate_[v], stderr_[v], hits_[v]);
    out << line;
  }
}

}  // namespace fibermc
