#include "fibermc/random.hpp"

namespace fibermc {

std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

RandomStream::RandomStream(std::uint64_t seed) : key_(seed), engine_(mix_seed(seed)) {}

RandomStream RandomStream::derive(StreamPurpose purpose, std::uint64_t index) const {
  std::uint64_t k = mix_seed(key_ ^ mix_seed(static_cast<std::uint64_t>(purpose)));
  k = mix_seed(k ^ mix_seed(index + 0x632be59bd9b4e019ULL));
  return RandomStream(k);
}

}  // namespace fibermc
