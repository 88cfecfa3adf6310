#pragma once

#include <cstdint>
#include <random>

namespace sigmaforge {

/// SplitMix64 finalizer. Used only to derive well-separated seeds for
/// independent substreams from a master seed.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Random source used by every generator in the library.
///
/// Engine: 64-bit Mersenne Twister (mt19937_64) seeded with
/// splitmix64(seed). Normals use the standard library's normal_distribution,
/// uniforms use uniform_real_distribution. Streams are bit-reproducible for a
/// given standard library; across libraries they agree in distribution only.
///
/// `substream(seed, k)` yields the k-th independent stream of a master seed;
/// parallel work indexes substreams by work-item number so results do not
/// depend on scheduling.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  static Rng substream(std::uint64_t seed, std::uint64_t index) {
    return Rng(splitmix64(seed ^ splitmix64(index + 0x5851F42D4C957F2DULL)));
  }

  double normal() { return normal_(engine_); }
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  std::uint64_t uniform_index(std::uint64_t n) {
    return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
  }

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace sigmaforge
