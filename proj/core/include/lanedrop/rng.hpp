#pragma once

#include <cstdint>
#include <random>

namespace lanedrop {

// Derives independent stream seeds from (base seed, stream id) so that
// subsystems (spawning, lane changes, advisor noise, table nodes) cannot
// alias each other's draws. Two rounds of splitmix64.
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  for (int i = 0; i < 2; ++i) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z = z ^ (z >> 31);
  }
  return z;
}

// Thin wrapper over mt19937_64. Distribution objects are created per call,
// so the sequence of engine states depends only on the call sequence.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static Rng for_stream(std::uint64_t seed, std::uint64_t stream) {
    return Rng(mix_seed(seed, stream));
  }

  double uniform() {  // [0, 1)
    return std::uniform_real_distribution<double>(0.0, 1.0)(engine_);
  }
  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }
  double normal() {
    return std::normal_distribution<double>(0.0, 1.0)(engine_);
  }
  double normal(double mean, double sd) {
    return mean + sd * normal();
  }
  double lognormal(double mu, double sigma) {
    return std::exp(mu + sigma * normal());
  }
  int poisson(double mean) {
    return std::poisson_distribution<int>(mean)(engine_);
  }
  std::uint64_t next_u64() { return engine_(); }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace lanedrop
