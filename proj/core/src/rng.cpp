#include "beliefsim/rng.hpp"

#include <cmath>
#include <stdexcept>

namespace beliefsim {

std::uint64_t derive_seed(std::uint64_t base, std::string_view participant_id,
                          int round, int stream) {
  std::uint64_t h = fnv1a64(participant_id);
  h = mix64(h ^ mix64(base));
  h = mix64(h ^ static_cast<std::uint64_t>(round));
  return mix64(h ^ (static_cast<std::uint64_t>(stream) << 32));
}

std::uint64_t Rng::next_u64() {
  state_ += 0x9e3779b97f4a7c15ull;
  std::uint64_t x = state_;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

std::uint64_t Rng::uniform_int(std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("uniform_int: bound must be > 0");
  // rejection sampling on the top of the range
  std::uint64_t threshold = -bound % bound;
  for (;;) {
    std::uint64_t r = next_u64();
    if (r >= threshold) return r % bound;
  }
}

double Rng::uniform_real() {
  // 53 random bits -> [0,1)
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::gaussian(double mu, double sigma) {
  if (has_cached_gauss_) {
    has_cached_gauss_ = false;
    return mu + sigma * cached_gauss_;
  }
  double u1 = uniform_real();
  double u2 = uniform_real();
  while (u1 <= 0.0) u1 = uniform_real();
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 2.0 * 3.14159265358979323846 * u2;
  cached_gauss_ = r * std::sin(theta);
  has_cached_gauss_ = true;
  return mu + sigma * r * std::cos(theta);
}

int Rng::draw_bin(const std::array<double, 5>& pmf) {
  double total = 0.0;
  for (double p : pmf) {
    if (p < 0.0) throw std::invalid_argument("draw_bin: negative pmf entry");
    total += p;
  }
  if (total <= 0.0) throw std::invalid_argument("draw_bin: pmf sums to zero");
  double u = uniform_real() * total;
  double acc = 0.0;
  for (int v = 0; v < 5; ++v) {
    acc += pmf[static_cast<std::size_t>(v)];
    if (u < acc) return v;
  }
  return 4;
}

}  // namespace beliefsim
