#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

namespace beliefsim {

// FNV-1a over bytes; used for seed derivation and work partitioning, never
// for anything security-sensitive.
constexpr std::uint64_t fnv1a64(std::string_view s,
                                std::uint64_t h = 1469598103934665603ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// Seed for one (participant, round, stream). Pure function of its inputs so
// results do not depend on scheduling or parallelism.
std::uint64_t derive_seed(std::uint64_t base, std::string_view participant_id,
                          int round, int stream = 0);

/// Deterministic splitmix64-based generator. All draws are implemented here
/// (no std::*_distribution) so sequences are identical across platforms and
/// standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();
  // Unbiased integer in [0, bound), bound > 0.
  std::uint64_t uniform_int(std::uint64_t bound);
  // [0, 1)
  double uniform_real();
  // Box-Muller.
  double gaussian(double mu, double sigma);
  // Index in [0,5) drawn from a five-bin pmf (need not be exactly normalized).
  int draw_bin(const std::array<double, 5>& pmf);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = uniform_int(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
  double cached_gauss_ = 0.0;
  bool has_cached_gauss_ = false;
};

}  // namespace beliefsim
