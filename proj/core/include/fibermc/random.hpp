#pragma once

#include <cstdint>
#include <random>

namespace fibermc {

/// Tags used to split a stream into independent children. The numeric values
/// are part of the reproducibility contract: changing them changes every
/// seeded result.
enum class StreamPurpose : std::uint64_t {
  rays = 1,
  rotations = 2,
  chain = 3,
  replicate = 4,
  descent = 5,
  scan = 6,
  measurements = 7,
  calibration = 8,
  test = 9,
};

/// Seedable uniform random stream.
///
/// Each stream owns a 64-bit key and a Mersenne Twister engine seeded from it.
/// `derive(purpose, index)` builds a child whose key is a SplitMix64 mix of the
/// parent key, the purpose tag and the index, so children never depend on how
/// many draws the parent has made. Parallel work is always keyed by a work-unit
/// index (never by a thread id), which makes results independent of the thread
/// count.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  explicit RandomStream(std::uint64_t seed);

  [[nodiscard]] RandomStream derive(StreamPurpose purpose, std::uint64_t index) const;

  [[nodiscard]] std::uint64_t key() const { return key_; }

  /// Raw 64-bit draw; makes the stream usable as a UniformRandomBitGenerator.
  result_type operator()() { return engine_(); }
  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on the open interval (0, 1).
  double uniform_open() { return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53; }

 private:
  std::uint64_t key_;
  std::mt19937_64 engine_;
};

/// SplitMix64 finalizer, exposed for seed derivation in tools and tests.
std::uint64_t mix_seed(std::uint64_t x);

}  // namespace fibermc
