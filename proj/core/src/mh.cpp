#include "fibermc/mh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>

namespace fibermc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
const double kLogHalf = std::log(0.5);

double proposal_g(const MhParams& params, const OpticalParams& optics) { return params.epsilon * optics.g(); }

/// Admissible length changes at length n.
int delta_support(std::uint64_t n, std::uint32_t j, std::uint32_t J, std::int64_t out[4]) {
  const auto sj = static_cast<std::int64_t>(j);
  const auto sJ = static_cast<std::int64_t>(J);
  if (n >= J) {
    out[0] = -sJ;
    out[1] = -sj;
    out[2] = sj;
    out[3] = sJ;
    return 4;
  }
  if (n >= j) {
    out[0] = -sj;
    out[1] = sj;
    out[2] = sJ;
    return 3;
  }
  out[0] = sj;
  out[1] = sJ;
  return 2;
}

bool in_support(std::uint64_t n, std::int64_t delta, const MhParams& p) {
  std::int64_t s[4];
  const int k = delta_support(n, p.j, p.J, s);
  return std::find(s, s + k, delta) != s + k;
}

/// ln of the density of one fresh edge under the addition proposal.
double log_new_edge(double r, double cos_theta, double mu, double qg) {
  return std::log(mu) - mu * r + std::log(hg_density(cos_theta, qg));
}

/// Recomputes directions and points from index `from` on, then the density.
void refresh(ChainState& s, const OpticalParams& optics, std::size_t from) {
  const std::size_t count = s.lengths.size();
  s.directions.resize(count);
  s.points.resize(count);
  s.log_hg.resize(count);
  if (from == 0) {
    // w_0 is frozen: keep the stored direction when present.
    if (s.directions.empty()) throw std::logic_error("chain state without w0");
    s.points[0] = s.lengths[0] * s.directions[0];
    s.log_hg[0] = 0.0;
    from = 1;
  }
  for (std::size_t i = from; i < count; ++i) {
    s.directions[i] = frame_transport(s.directions[i - 1], s.cos_theta[i], s.phi[i]);
    s.points[i] = s.points[i - 1] + s.lengths[i] * s.directions[i];
    s.log_hg[i] = std::log(hg_density(s.cos_theta[i], optics.g()));
  }
  s.log_density = chain_log_density(s, optics);
}

}  // namespace

void MhParams::validate() const {
  if (!(j >= 1 && j < J)) throw std::invalid_argument("MH needs 1 <= j < J");
  if (std::gcd(j, J) != 1) throw std::invalid_argument(fmt::format("MH needs coprime j, J (got {}, {})", j, J));
  if (!(epsilon >= -1.0 && epsilon <= 1.0)) throw std::invalid_argument("MH epsilon must lie in [-1, 1]");
  if (steps == 0) throw std::invalid_argument("MH needs T >= 1");
  if (rotations == 0) throw std::invalid_argument("MH needs M_rot >= 1");
  if (!(burn_in_frac >= 0.0 && burn_in_frac < 1.0)) throw std::invalid_argument("burn-in fraction must lie in [0, 1)");
}

double zeta(std::uint64_t m, std::uint32_t j, std::uint32_t J) {
  if (m >= J) return 0.25;
  if (m >= j) return 1.0 / 3.0;
  return 0.5;
}

double chain_log_density(const ChainState& s, const OpticalParams& optics) {
  const std::size_t count = s.lengths.size();
  const auto n = static_cast<double>(count - 1);
  const double mu = optics.mu();
  double sum_r = 0.0;
  for (const double r : s.lengths) sum_r += r;
  double sum_hg = 0.0;
  for (std::size_t i = 1; i < count; ++i) sum_hg += std::log(hg_density(s.cos_theta[i], optics.g()));
  return std::log1p(-optics.rho()) + n * std::log(optics.rho()) + (n + 1.0) * std::log(mu) - mu * sum_r + sum_hg;
}

ChainState make_chain_state(const Ray& ray, const OpticalParams& optics) {
  if (ray.lengths.empty() || ray.lengths.size() != ray.directions.size()) {
    throw std::invalid_argument("make_chain_state: malformed ray");
  }
  ChainState s;
  const std::size_t count = ray.lengths.size();
  s.lengths = ray.lengths;
  s.cos_theta.resize(count);
  s.phi.resize(count);
  const Direction& w0 = ray.directions[0];
  s.cos_theta[0] = w0.z;
  s.phi[0] = std::atan2(w0.y, w0.x);
  for (std::size_t i = 1; i < count; ++i) {
    s.cos_theta[i] = std::clamp(dot(ray.directions[i - 1], ray.directions[i]), -1.0, 1.0);
    s.phi[i] = frame_azimuth(ray.directions[i - 1], ray.directions[i]);
  }
  s.directions.assign(1, w0);
  refresh(s, optics, 0);
  return s;
}

Proposal propose_mutation(const ChainState& cur, ChainState& cand, RandomStream& stream, const MhParams& params,
                          const OpticalParams& optics) {
  const std::uint64_t n = cur.size();
  const double mu = optics.mu();
  const double qg = proposal_g(params, optics);
  const double log_rho = std::log(optics.rho());
  const double log_mu = std::log(mu);
  cand = cur;
  Proposal p;

  if (stream.uniform() < 0.5) {
    std::int64_t support[4];
    const int k = delta_support(n, params.j, params.J, support);
    const auto pick = std::min(static_cast<int>(stream.uniform() * k), k - 1);
    const std::int64_t delta = support[pick];
    const auto n_new = static_cast<std::uint64_t>(static_cast<std::int64_t>(n) + delta);
    p.delta = delta;
    const double log_zeta_cur = std::log(zeta(n, params.j, params.J));
    const double log_zeta_new = std::log(zeta(n_new, params.j, params.J));
    // Edge terms: sum over the edges that differ of ln(mu e^{-mu r}) and of
    // the two phase functions.
    double sum_r = 0.0;
    double sum_log_f = 0.0;   // target phase function
    double sum_log_fq = 0.0;  // proposal phase function
    if (delta > 0) {
      p.type = MoveType::addition;
      p.index = n + 1;
      cand.lengths.reserve(n_new + 1);
      for (std::int64_t e = 0; e < delta; ++e) {
        const double r = exp_inverse_cdf(stream.uniform(), mu);
        const double c = sample_hg_cosine(stream.uniform(), qg);
        const double ph = 2.0 * std::numbers::pi * stream.uniform();
        cand.lengths.push_back(r);
        cand.cos_theta.push_back(c);
        cand.phi.push_back(ph);
        sum_r += r;
        sum_log_fq += std::log(hg_density(c, qg));
      }
      refresh(cand, optics, n + 1);
      for (std::size_t i = n + 1; i <= n_new; ++i) sum_log_f += cand.log_hg[i];
      const auto d = static_cast<double>(delta);
      p.log_q_forward = kLogHalf + log_zeta_cur + d * log_mu - mu * sum_r + sum_log_fq;
      p.log_q_backward = kLogHalf + log_zeta_new;
      p.log_target_ratio = d * log_rho + (d * log_mu - mu * sum_r + sum_log_f);
      p.log_proposal_ratio = (log_zeta_new - log_zeta_cur) - (d * log_mu - mu * sum_r + sum_log_fq);
    } else {
      p.type = MoveType::deletion;
      p.index = n_new + 1;
      for (std::size_t i = n_new + 1; i <= n; ++i) {
        sum_r += cur.lengths[i];
        sum_log_f += cur.log_hg[i];
        sum_log_fq += std::log(hg_density(cur.cos_theta[i], qg));
      }
      cand.lengths.resize(n_new + 1);
      cand.cos_theta.resize(n_new + 1);
      cand.phi.resize(n_new + 1);
      cand.directions.resize(n_new + 1);
      cand.points.resize(n_new + 1);
      cand.log_hg.resize(n_new + 1);
      cand.log_density = chain_log_density(cand, optics);
      const auto d = static_cast<double>(-delta);
      p.log_q_forward = kLogHalf + log_zeta_cur;
      p.log_q_backward = kLogHalf + log_zeta_new + d * log_mu - mu * sum_r + sum_log_fq;
      p.log_target_ratio = -d * log_rho - (d * log_mu - mu * sum_r + sum_log_f);
      p.log_proposal_ratio = (log_zeta_new - log_zeta_cur) + (d * log_mu - mu * sum_r + sum_log_fq);
    }
    return p;
  }

  const std::uint64_t slots = n + 1;
  const auto i = std::min(static_cast<std::uint64_t>(stream.uniform() * static_cast<double>(slots)), n);
  p.index = i;
  const double log_pick = kLogHalf - std::log(static_cast<double>(slots));
  if (i == 0) {
    p.type = MoveType::translation;
    const double r0 = exp_inverse_cdf(stream.uniform(), mu);
    cand.lengths[0] = r0;
    refresh(cand, optics, 0);
    const double shift = mu * (r0 - cur.lengths[0]);
    p.log_q_forward = log_pick + log_mu - mu * r0;
    p.log_q_backward = log_pick + log_mu - mu * cur.lengths[0];
    p.log_target_ratio = -shift;
    p.log_proposal_ratio = shift;
    return p;
  }
  p.type = MoveType::rotation;
  const double c = sample_hg_cosine(stream.uniform(), qg);
  const double ph = 2.0 * std::numbers::pi * stream.uniform();
  cand.cos_theta[i] = c;
  cand.phi[i] = ph;
  refresh(cand, optics, i);
  const double log_fq_new = std::log(hg_density(c, qg));
  const double log_fq_old = std::log(hg_density(cur.cos_theta[i], qg));
  p.log_q_forward = log_pick + log_fq_new;
  p.log_q_backward = log_pick + log_fq_old;
  p.log_target_ratio = cand.log_hg[i] - cur.log_hg[i];
  p.log_proposal_ratio = log_fq_old - log_fq_new;
  return p;
}

double log_proposal_density(const ChainState& from, const ChainState& to, const MhParams& params,
                            const OpticalParams& optics) {
  const std::uint64_t n = from.size();
  const std::uint64_t m = to.size();
  const double mu = optics.mu();
  const double qg = proposal_g(params, optics);
  if (from.cos_theta[0] != to.cos_theta[0] || from.phi[0] != to.phi[0]) return kNegInf;
  const std::size_t common = std::min(n, m) + 1;
  std::size_t first_diff = common;
  std::size_t diffs = 0;
  for (std::size_t i = 0; i < common; ++i) {
    const bool same = from.lengths[i] == to.lengths[i] && from.cos_theta[i] == to.cos_theta[i] &&
                      from.phi[i] == to.phi[i];
    if (!same) {
      if (diffs == 0) first_diff = i;
      ++diffs;
    }
  }
  if (m != n) {
    if (diffs != 0) return kNegInf;
    const auto delta = static_cast<std::int64_t>(m) - static_cast<std::int64_t>(n);
    if (!in_support(n, delta, params)) return kNegInf;
    double lq = kLogHalf + std::log(zeta(n, params.j, params.J));
    for (std::size_t i = n + 1; i <= m; ++i) lq += log_new_edge(to.lengths[i], to.cos_theta[i], mu, qg);
    return lq;
  }
  if (diffs != 1) return kNegInf;
  const double log_pick = kLogHalf - std::log(static_cast<double>(n + 1));
  const std::size_t i = first_diff;
  if (i == 0) {
    return log_pick + std::log(mu) - mu * to.lengths[0];
  }
  if (from.lengths[i] != to.lengths[i]) return kNegInf;
  return log_pick + std::log(hg_density(to.cos_theta[i], qg));
}

double acceptance_log_ratio(const ChainState& current, const ChainState& candidate, double log_q_forward,
                            double log_q_backward) {
  const double v = candidate.log_density - current.log_density + log_q_backward - log_q_forward;
  if (!std::isfinite(v)) return kNegInf;
  return std::min(0.0, v);
}

MhChain::MhChain(const OpticalParams& optics, const MhParams& params, ChainState initial)
    : optics_(optics), params_(params), state_(std::move(initial)), candidate_(state_) {
  params_.validate();
}

bool MhChain::step(RandomStream& stream) {
  last_ = propose_mutation(state_, candidate_, stream, params_, optics_);
  double log_alpha = last_.log_target_ratio + last_.log_proposal_ratio;
  if (!std::isfinite(log_alpha)) log_alpha = kNegInf;
  const double u = stream.uniform_open();
  ++steps_;
  if (log_alpha >= 0.0 || std::log(u) < log_alpha) {
    std::swap(state_, candidate_);
    ++accepted_;
    return true;
  }
  return false;
}

ChainResult run_chain(const Scenario& scenario, const MhParams& params, const RandomStream& stream) {
  params.validate();
  RandomStream rs = stream.derive(StreamPurpose::chain, 0);
  const Ray initial = sample_ray(rs, scenario.optics, scenario.source);
  MhChain chain(scenario.optics, params, make_chain_state(initial, scenario.optics));
  const Direction w0 = initial.directions[0];

  RandomStream rot_stream = stream.derive(StreamPurpose::rotations, 0);
  std::vector<Rotation> rotations;
  rotations.reserve(params.rotations);
  for (std::uint32_t j = 0; j < params.rotations; ++j) {
    const double u1 = rot_stream.uniform();
    const double u2 = rot_stream.uniform();
    rotations.push_back(Rotation::between(w0, sample_cone_direction(u1, u2, scenario.source.alpha)));
  }

  const auto burn_in = static_cast<std::uint64_t>(std::floor(params.burn_in_frac * static_cast<double>(params.steps)));
  const std::uint64_t kept = params.steps - burn_in;
  const std::uint64_t batch = params.batch_steps > 0 ? params.batch_steps : std::max<std::uint64_t>(1, (kept + 99) / 100);

  ChainResult out{FluenceField(scenario.grid, scenario.scale(), params.rotations), burn_in, 0.0, {}, {}, {}};
  out.lengths.reserve(params.steps);
  out.accepted.reserve(params.steps);
  out.log_density.reserve(params.steps);
  const VoxelGrid& grid = scenario.grid;
  std::uint64_t in_batch = 0;
  for (std::uint64_t t = 0; t < params.steps; ++t) {
    bool accepted = false;
    if (t > 0) accepted = chain.step(rs);
    const ChainState& s = chain.state();
    out.lengths.push_back(s.size());
    out.accepted.push_back(accepted ? 1 : 0);
    out.log_density.push_back(s.log_density);
    if (t < burn_in) continue;
    const Vec3& end = s.endpoint();
    for (std::uint32_t j = 0; j < params.rotations; ++j) {
      out.field.add_linear(grid.locate_linear(rotations[j].apply(end)), j, 1);
    }
    if (++in_batch == batch) {
      out.field.close_batch();
      in_batch = 0;
    }
  }
  out.field.finalize();
  out.acceptance_rate = params.steps > 1 ? static_cast<double>(chain.accepted()) / static_cast<double>(params.steps - 1) : 0.0;
  return out;
}

void write_chain_trace(std::ostream& out, const ChainResult& result, std::size_t stride) {
  if (stride == 0) throw std::invalid_argument("trace stride must be positive");
  out << "t,n,accepted,log_density\n";
  for (std::size_t t = 0; t < result.lengths.size(); t += stride) {
    out << fmt::format("{},{},{},{:.9g}\n", t + 1, result.lengths[t], static_cast<int>(result.accepted[t]),
                       result.log_density[t]);
  }
}

}  // namespace fibermc
