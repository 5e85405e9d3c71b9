#include "fibermc/mc.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "fibermc/parallel.hpp"
#include "fibermc/ray.hpp"

namespace fibermc {

double Scenario::scale() const {
  return source.c * (1.0 - std::cos(source.alpha)) / (2.0 * optics.mu_a());
}

namespace {

std::size_t unit_count(std::uint64_t rays, std::size_t chunk) {
  return static_cast<std::size_t>((rays + chunk - 1) / chunk);
}

std::uint64_t unit_rays(std::uint64_t rays, std::size_t chunk, std::size_t unit) {
  const std::uint64_t begin = static_cast<std::uint64_t>(unit) * chunk;
  return std::min<std::uint64_t>(chunk, rays - begin);
}

void check_options(const RunOptions& options) {
  if (options.chunk == 0) throw std::invalid_argument("chunk size must be positive");
}

/// Rotations W0^1 -> W0^j for the MC-SOME family; index 0 is the identity.
struct RotationSet {
  Direction base;
  std::vector<Rotation> rotations;
};

RotationSet draw_rotations(const RandomStream& stream, const SourceSpec& source, std::uint32_t count) {
  RandomStream rs = stream.derive(StreamPurpose::rotations, 0);
  std::vector<Direction> dirs;
  dirs.reserve(count);
  for (std::uint32_t j = 0; j < count; ++j) {
    const double u1 = rs.uniform();
    const double u2 = rs.uniform();
    dirs.push_back(sample_cone_direction(u1, u2, source.alpha));
  }
  RotationSet set{dirs.front(), {}};
  set.rotations.reserve(count);
  set.rotations.emplace_back();
  for (std::uint32_t j = 1; j < count; ++j) set.rotations.push_back(Rotation::between(dirs.front(), dirs[j]));
  return set;
}

/// Scratch for one MC-SOME ray: selected indices, walk points and the running
/// sums of the lengths.
struct SomeRay {
  std::vector<std::uint64_t> indices;
  std::vector<Vec3> points;
  std::vector<double> length_sums;
};

void sample_some_ray(RandomStream& rs, const OpticalParams& optics, const Direction& base, std::uint32_t points,
                     SomeRay& ray) {
  const double rho = optics.rho();
  const double mu = optics.mu();
  const double g = optics.g();
  ray.indices.resize(points);
  std::uint64_t nmax = 0;
  for (std::uint32_t l = 0; l < points; ++l) {
    ray.indices[l] = geometric_path_length(rs.uniform_open(), rho);
    nmax = std::max(nmax, ray.indices[l]);
  }
  ray.points.resize(nmax + 1);
  ray.length_sums.resize(nmax + 1);
  Direction dir = base;
  double r = exp_inverse_cdf(rs.uniform(), mu);
  Vec3 pos = r * dir;
  double a = r;
  ray.points[0] = pos;
  ray.length_sums[0] = a;
  for (std::uint64_t i = 1; i <= nmax; ++i) {
    r = exp_inverse_cdf(rs.uniform(), mu);
    const double cos_theta = sample_hg_cosine(rs.uniform(), g);
    const double phi = 2.0 * std::numbers::pi * rs.uniform();
    dir = frame_transport(dir, cos_theta, phi);
    pos += r * dir;
    a += r;
    ray.points[i] = pos;
    ray.length_sums[i] = a;
  }
}

void check_settings(const McSomeSettings& s) {
  if (s.rays == 0 || s.points == 0 || s.rotations == 0) {
    throw std::invalid_argument("MC-SOME needs M, M_points and M_rot >= 1");
  }
}

}  // namespace

Vec3 sample_endpoint(RandomStream& stream, const OpticalParams& optics, const SourceSpec& source,
                     std::uint64_t& n) {
  n = geometric_path_length(stream.uniform_open(), optics.rho());
  const double u1 = stream.uniform();
  const double u2 = stream.uniform();
  Direction dir = sample_cone_direction(u1, u2, source.alpha);
  const double mu = optics.mu();
  const double g = optics.g();
  Vec3 pos = exp_inverse_cdf(stream.uniform(), mu) * dir;
  for (std::uint64_t i = 1; i <= n; ++i) {
    const double r = exp_inverse_cdf(stream.uniform(), mu);
    const double cos_theta = sample_hg_cosine(stream.uniform(), g);
    const double phi = 2.0 * std::numbers::pi * stream.uniform();
    dir = frame_transport(dir, cos_theta, phi);
    pos += r * dir;
  }
  return pos;
}

FluenceField estimate_mc(const Scenario& scenario, std::uint64_t rays, const RandomStream& stream,
                         const RunOptions& options, EndpointFilter filter) {
  if (rays == 0) throw std::invalid_argument("estimate_mc needs at least one ray");
  check_options(options);
  const std::size_t units = unit_count(rays, options.chunk);
  const unsigned workers = effective_workers(units, options.threads);
  std::vector<FluenceField> partial(workers, FluenceField(scenario.grid, scenario.scale()));
  parallel_for_units(units, workers, [&](unsigned w, std::size_t u) {
    RandomStream rs = stream.derive(StreamPurpose::rays, u);
    FluenceField& field = partial[w];
    const std::uint64_t count = unit_rays(rays, options.chunk, u);
    for (std::uint64_t i = 0; i < count; ++i) {
      std::uint64_t n = 0;
      const Vec3 end = sample_endpoint(rs, scenario.optics, scenario.source, n);
      if (filter == EndpointFilter::direct_only && n != 0) {
        field.add_linear(VoxelGrid::npos, 0, 1);
        field.close_batch();
      } else {
        field.accumulate(end);
      }
    }
  });
  for (unsigned w = 1; w < workers; ++w) partial[0].merge(partial[w]);
  partial[0].finalize();
  return std::move(partial[0]);
}

FluenceField estimate_mc_some(const Scenario& scenario, const McSomeSettings& settings, const RandomStream& stream,
                              const RunOptions& options) {
  check_settings(settings);
  check_options(options);
  const RotationSet rot = draw_rotations(stream, scenario.source, settings.rotations);
  const std::size_t units = unit_count(settings.rays, options.chunk);
  const unsigned workers = effective_workers(units, options.threads);
  std::vector<FluenceField> partial(workers, FluenceField(scenario.grid, scenario.scale(), settings.rotations));
  std::vector<SomeRay> scratch(workers);
  parallel_for_units(units, workers, [&](unsigned w, std::size_t u) {
    RandomStream rs = stream.derive(StreamPurpose::rays, u);
    FluenceField& field = partial[w];
    SomeRay& ray = scratch[w];
    const VoxelGrid& grid = scenario.grid;
    const std::uint64_t count = unit_rays(settings.rays, options.chunk, u);
    for (std::uint64_t i = 0; i < count; ++i) {
      sample_some_ray(rs, scenario.optics, rot.base, settings.points, ray);
      for (const std::uint64_t idx : ray.indices) {
        const Vec3& p = ray.points[idx];
        for (std::uint32_t j = 0; j < settings.rotations; ++j) {
          field.add_linear(grid.locate_linear(rot.rotations[j].apply(p)), j, 1);
        }
      }
      field.close_batch();
    }
  });
  for (unsigned w = 1; w < workers; ++w) partial[0].merge(partial[w]);
  partial[0].finalize();
  return std::move(partial[0]);
}

namespace {

/// Payload sums of one work unit. Kept per unit (not per worker) so that the
/// floating-point reduction order is fixed.
struct WatchTally {
  std::vector<PayloadArray> sum;
  std::vector<PayloadArray> batch_sumsq;
  std::vector<PayloadArray> group_sum;  // groups x voxels
  std::vector<std::uint64_t> hits;

  WatchTally(std::size_t voxels, std::size_t groups)
      : sum(voxels, PayloadArray{}),
        batch_sumsq(voxels, PayloadArray{}),
        group_sum(voxels * groups, PayloadArray{}),
        hits(voxels, 0) {}
};

}  // namespace

WatchResult estimate_mc_some_watch(const Scenario& scenario, const McSomeSettings& settings,
                                   const std::vector<VoxelIndex>& voxels, const RandomStream& stream,
                                   const RunOptions& options) {
  check_settings(settings);
  check_options(options);
  if (voxels.empty()) throw std::invalid_argument("watch list is empty");
  const VoxelGrid& grid = scenario.grid;
  const std::size_t nv = voxels.size();
  std::vector<int> slot(grid.voxel_count(), -1);
  for (std::size_t s = 0; s < nv; ++s) {
    const std::size_t lin = grid.flatten(voxels[s]);
    if (slot[lin] >= 0) throw std::invalid_argument("watch list contains a voxel twice");
    slot[lin] = static_cast<int>(s);
  }

  const RotationSet rot = draw_rotations(stream, scenario.source, settings.rotations);
  const std::size_t units = unit_count(settings.rays, options.chunk);
  const unsigned workers = effective_workers(units, options.threads);
  const std::size_t groups = settings.rotations;
  std::vector<WatchTally> tallies(units, WatchTally(0, 0));
  std::vector<SomeRay> scratch(workers);
  const double mu_s = scenario.optics.mu_s();

  parallel_for_units(units, workers, [&](unsigned w, std::size_t u) {
    RandomStream rs = stream.derive(StreamPurpose::rays, u);
    WatchTally tally(nv, groups);
    std::vector<PayloadArray> ray_sum(nv);
    SomeRay& ray = scratch[w];
    const std::uint64_t count = unit_rays(settings.rays, options.chunk, u);
    for (std::uint64_t i = 0; i < count; ++i) {
      sample_some_ray(rs, scenario.optics, rot.base, settings.points, ray);
      std::fill(ray_sum.begin(), ray_sum.end(), PayloadArray{});
      bool touched = false;
      for (const std::uint64_t idx : ray.indices) {
        const Vec3& p = ray.points[idx];
        const double a = ray.length_sums[idx];
        const double n_over = static_cast<double>(idx) / mu_s;
        const double b = n_over - a;
        const PayloadArray payload{1.0, -a, b, a * a, b * b - n_over / mu_s, -a * b};
        for (std::size_t j = 0; j < groups; ++j) {
          const std::size_t lin = grid.locate_linear(rot.rotations[j].apply(p));
          if (lin == VoxelGrid::npos || slot[lin] < 0) continue;
          const auto s = static_cast<std::size_t>(slot[lin]);
          touched = true;
          ++tally.hits[s];
          PayloadArray& gs = tally.group_sum[j * nv + s];
          for (std::size_t q = 0; q < kPayloadCount; ++q) {
            ray_sum[s][q] += payload[q];
            gs[q] += payload[q];
          }
        }
      }
      if (!touched) continue;
      for (std::size_t s = 0; s < nv; ++s) {
        for (std::size_t q = 0; q < kPayloadCount; ++q) {
          tally.sum[s][q] += ray_sum[s][q];
          tally.batch_sumsq[s][q] += ray_sum[s][q] * ray_sum[s][q];
        }
      }
    }
    tallies[u] = std::move(tally);
  });

  WatchTally total(nv, groups);
  for (const WatchTally& t : tallies) {
    for (std::size_t s = 0; s < nv; ++s) {
      total.hits[s] += t.hits[s];
      for (std::size_t q = 0; q < kPayloadCount; ++q) {
        total.sum[s][q] += t.sum[s][q];
        total.batch_sumsq[s][q] += t.batch_sumsq[s][q];
      }
    }
    for (std::size_t i = 0; i < total.group_sum.size(); ++i) {
      for (std::size_t q = 0; q < kPayloadCount; ++q) total.group_sum[i][q] += t.group_sum[i][q];
    }
  }

  // With n samples per ray and N in total, the spread of the per-sample mean is
  // sum_b (x_b - m n_b)^2 + sum_g (x_g - m n_g)^2 over N^2; equal batch and
  // group sizes reduce each sum to sum x^2 - X^2 / count.
  const double n_total = static_cast<double>(settings.rays) * settings.points * settings.rotations;
  const double scale = scenario.scale();
  WatchResult out;
  out.voxels = voxels;
  out.samples = settings.rays * settings.points * settings.rotations;
  out.mean.assign(nv, PayloadArray{});
  out.standard_error.assign(nv, PayloadArray{});
  out.hits = total.hits;
  const auto batches = static_cast<double>(settings.rays);
  const auto group_count = static_cast<double>(groups);
  for (std::size_t s = 0; s < nv; ++s) {
    for (std::size_t q = 0; q < kPayloadCount; ++q) {
      const double x = total.sum[s][q];
      double gsq = 0.0;
      for (std::size_t j = 0; j < groups; ++j) gsq += total.group_sum[j * nv + s][q] * total.group_sum[j * nv + s][q];
      double spread = std::max(0.0, total.batch_sumsq[s][q] - x * x / batches);
      if (groups > 1) spread += std::max(0.0, gsq - x * x / group_count);
      out.mean[s][q] = scale * x / n_total;
      out.standard_error[s][q] = scale * std::sqrt(spread) / n_total;
    }
  }
  return out;
}

}  // namespace fibermc
