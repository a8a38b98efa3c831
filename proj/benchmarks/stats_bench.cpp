#include <benchmark/benchmark.h>

#include <vector>

#include "beliefsim/rng.hpp"
#include "beliefsim/stats.hpp"
#include "beliefsim/types.hpp"

namespace {

using namespace beliefsim;

std::vector<double> likert_samples(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i)
    out.push_back(static_cast<double>(rng.uniform_int(5)));
  return out;
}

std::vector<double> real_samples(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(rng.uniform_real());
  return out;
}

void BM_KlDivergence(benchmark::State& state) {
  auto p = stats::distribution_from_pmf({0.1, 0.2, 0.4, 0.2, 0.1}, 1023);
  auto q = stats::distribution_from_pmf({0.3, 0.3, 0.2, 0.1, 0.1}, 1023);
  for (auto _ : state)
    benchmark::DoNotOptimize(stats::kl_divergence(p, q, 0.5));
}
BENCHMARK(BM_KlDivergence);

void BM_Wasserstein(benchmark::State& state) {
  auto p = stats::distribution_from_pmf({0.1, 0.2, 0.4, 0.2, 0.1});
  auto q = stats::distribution_from_pmf({0.3, 0.3, 0.2, 0.1, 0.1});
  for (auto _ : state)
    benchmark::DoNotOptimize(stats::wasserstein_distance(p, q));
}
BENCHMARK(BM_Wasserstein);

void BM_Spearman(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto x = likert_samples(n, 1);
  auto y = likert_samples(n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(stats::spearman(x, y));
}
BENCHMARK(BM_Spearman)->Arg(128)->Arg(1023);

void BM_MannWhitneyApprox(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  auto a = likert_samples(n, 3);
  auto b = likert_samples(n, 4);
  for (auto _ : state) benchmark::DoNotOptimize(stats::mann_whitney_u(a, b));
}
BENCHMARK(BM_MannWhitneyApprox)->Arg(128)->Arg(1023);

void BM_MannWhitneyExact(benchmark::State& state) {
  auto a = real_samples(20, 5);
  auto b = real_samples(20, 6);
  for (auto _ : state) benchmark::DoNotOptimize(stats::mann_whitney_u(a, b));
}
BENCHMARK(BM_MannWhitneyExact);

void BM_StudentTCdf(benchmark::State& state) {
  double t = 1.3;
  for (auto _ : state) {
    benchmark::DoNotOptimize(stats::student_t_cdf(t, 1021.0));
    t = -t;
  }
}
BENCHMARK(BM_StudentTCdf);

}  // namespace

BENCHMARK_MAIN();
