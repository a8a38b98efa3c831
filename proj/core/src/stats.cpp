#include "beliefsim/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace beliefsim::stats {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_valid(const Distribution& d, const char* which) {
  double sum = 0.0;
  for (double p : d.pmf) {
    if (!(p >= 0.0))
      throw std::invalid_argument(std::string(which) + ": negative pmf entry");
    sum += p;
  }
  if (std::fabs(sum - 1.0) > 1e-12)
    throw std::invalid_argument(std::string(which) + ": pmf does not sum to 1");
}

std::array<double, 5> smoothed(const Distribution& d, double pseudocount,
                               const char* which) {
  if (pseudocount == 0.0) return d.pmf;
  if (d.n == 0)
    throw std::invalid_argument(std::string(which) +
                                ": pseudocount smoothing needs a sample count");
  const double a = pseudocount / static_cast<double>(d.n);
  const double norm = 1.0 + 5.0 * a;
  std::array<double, 5> out{};
  for (std::size_t v = 0; v < 5; ++v) out[v] = (d.pmf[v] + a) / norm;
  return out;
}

}  // namespace

std::array<double, 5> Distribution::cdf() const {
  std::array<double, 5> out{};
  double acc = 0.0;
  for (std::size_t v = 0; v < 5; ++v) {
    acc += pmf[v];
    out[v] = acc;
  }
  return out;
}

Distribution distribution_from_pmf(const std::array<double, 5>& pmf,
                                   std::size_t n) {
  Distribution d{pmf, n};
  check_valid(d, "distribution");
  return d;
}

Distribution pmf_of(std::span<const LikertRating> samples) {
  if (samples.empty()) throw std::invalid_argument("pmf_of: empty sample");
  std::array<double, 5> counts{};
  for (LikertRating r : samples) counts[static_cast<std::size_t>(r.value())] += 1.0;
  Distribution d;
  d.n = samples.size();
  for (std::size_t v = 0; v < 5; ++v)
    d.pmf[v] = counts[v] / static_cast<double>(samples.size());
  return d;
}

double kl_divergence(const Distribution& p, const Distribution& q,
                     double pseudocount) {
  check_valid(p, "kl_divergence p");
  check_valid(q, "kl_divergence q");
  if (pseudocount < 0.0)
    throw std::invalid_argument("kl_divergence: pseudocount must be >= 0");

  const auto ps = smoothed(p, pseudocount, "kl_divergence p");
  const auto qs = smoothed(q, pseudocount, "kl_divergence q");

  double sum = 0.0;
  for (std::size_t v = 0; v < 5; ++v) {
    if (ps[v] == 0.0) continue;
    if (qs[v] == 0.0) return kInf;
    sum += ps[v] * std::log(ps[v] / qs[v]);
  }
  return std::max(sum, 0.0);  // guard the p == q case against -0 rounding
}

double wasserstein_distance(const Distribution& p, const Distribution& q) {
  check_valid(p, "wasserstein p");
  check_valid(q, "wasserstein q");
  const auto fp = p.cdf();
  const auto fq = q.cdf();
  double sum = 0.0;
  for (std::size_t v = 0; v < 5; ++v) sum += std::fabs(fp[v] - fq[v]);
  return sum;
}

double mean_of(std::span<const double> samples) {
  if (samples.empty()) throw std::invalid_argument("mean_of: empty sample");
  double sum = std::accumulate(samples.begin(), samples.end(), 0.0);
  return sum / static_cast<double>(samples.size());
}

MeanStd mean_std(std::span<const double> samples) {
  if (samples.size() < 2)
    throw std::invalid_argument("mean_std: need at least 2 samples for std");
  const double m = mean_of(samples);
  double ss = 0.0;
  for (double v : samples) ss += (v - m) * (v - m);
  return {m, std::sqrt(ss / static_cast<double>(samples.size() - 1))};
}

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });

  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    // positions i..j share the value; average of 1-based ranks
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = rank;
    i = j + 1;
  }
  return ranks;
}

Correlation spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw std::invalid_argument("spearman: length mismatch");
  const std::size_t n = x.size();
  if (n < 3) throw std::invalid_argument("spearman: need n >= 3");

  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double mx = mean_of(rx);
  const double my = mean_of(ry);

  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = rx[i] - mx;
    const double dy = ry[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw DegenerateSeriesError();

  double rho = sxy / (std::sqrt(sxx) * std::sqrt(syy));
  rho = std::clamp(rho, -1.0, 1.0);

  TestResult test;
  test.method = TestMethod::t_approx;
  test.n1 = n;
  const double df = static_cast<double>(n - 2);
  if (1.0 - rho * rho <= 0.0) {
    test.statistic = rho > 0 ? kInf : -kInf;
    test.p_value = std::numeric_limits<double>::denorm_min();
  } else {
    const double t = rho * std::sqrt(df / (1.0 - rho * rho));
    test.statistic = t;
    test.p_value = clamp_p(2.0 * (1.0 - student_t_cdf(std::fabs(t), df)));
  }
  return {rho, test};
}

namespace {

// Null distribution of the rank sum for a sample of size m drawn from ranks
// 1..n_total (no ties): counts[s] = number of m-subsets with rank sum s.
std::vector<double> rank_sum_counts(std::size_t m, std::size_t n_total) {
  const std::size_t max_sum = m * (2 * n_total - m + 1) / 2;
  std::vector<std::vector<double>> f(m + 1, std::vector<double>(max_sum + 1, 0.0));
  f[0][0] = 1.0;
  for (std::size_t value = 1; value <= n_total; ++value) {
    for (std::size_t used = std::min(m, value); used >= 1; --used) {
      for (std::size_t s = max_sum; s >= value; --s) {
        if (f[used - 1][s - value] != 0.0) f[used][s] += f[used - 1][s - value];
      }
    }
  }
  return f[m];
}

bool has_ties(std::vector<double> pooled) {
  std::sort(pooled.begin(), pooled.end());
  return std::adjacent_find(pooled.begin(), pooled.end()) != pooled.end();
}

}  // namespace

TestResult mann_whitney_u(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty())
    throw std::invalid_argument("mann_whitney_u: empty input");
  const std::size_t na = a.size();
  const std::size_t nb = b.size();
  const std::size_t n = na + nb;

  std::vector<double> pooled;
  pooled.reserve(n);
  pooled.insert(pooled.end(), a.begin(), a.end());
  pooled.insert(pooled.end(), b.begin(), b.end());
  const auto ranks = average_ranks(pooled);

  double rank_sum_a = 0.0;
  for (std::size_t i = 0; i < na; ++i) rank_sum_a += ranks[i];
  const double u = rank_sum_a - 0.5 * static_cast<double>(na) * static_cast<double>(na + 1);

  TestResult result;
  result.statistic = u;
  result.n1 = na;
  result.n2 = nb;

  const bool tied = has_ties(pooled);
  const double nanb = static_cast<double>(na) * static_cast<double>(nb);

  if (!tied && nanb <= 400.0) {
    result.method = TestMethod::exact;
    const auto counts = rank_sum_counts(na, n);
    const double total = std::accumulate(counts.begin(), counts.end(), 0.0);
    const double base = 0.5 * static_cast<double>(na) * static_cast<double>(na + 1);
    const std::size_t u_obs = static_cast<std::size_t>(std::llround(u));
    double lower = 0.0, upper = 0.0;
    for (std::size_t s = 0; s < counts.size(); ++s) {
      const double us = static_cast<double>(s) - base;
      if (us < -0.5) continue;
      if (us <= static_cast<double>(u_obs) + 0.5) lower += counts[s];
      if (us >= static_cast<double>(u_obs) - 0.5) upper += counts[s];
    }
    result.p_value = clamp_p(std::min(1.0, 2.0 * std::min(lower, upper) / total));
    return result;
  }

  result.method = TestMethod::normal_approx;
  const double mu = nanb / 2.0;
  // tie correction over pooled value groups
  std::vector<double> sorted = pooled;
  std::sort(sorted.begin(), sorted.end());
  double tie_term = 0.0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i + 1);
    tie_term += t * t * t - t;
    i = j + 1;
  }
  const double nn = static_cast<double>(n);
  const double var =
      nanb / 12.0 * ((nn + 1.0) - tie_term / (nn * (nn - 1.0)));
  if (var <= 0.0) {
    result.p_value = 1.0;
    return result;
  }
  double dev = std::fabs(u - mu) - 0.5;  // continuity correction
  if (dev < 0.0) dev = 0.0;
  const double z = dev / std::sqrt(var);
  result.p_value = clamp_p(2.0 * (1.0 - normal_cdf(z)));
  return result;
}

TestResult fisher_r_to_z(double r1, std::size_t n1, double r2, std::size_t n2) {
  if (!(std::fabs(r1) < 1.0) || !(std::fabs(r2) < 1.0))
    throw std::invalid_argument("fisher_r_to_z: |r| must be < 1");
  if (n1 < 4 || n2 < 4)
    throw std::invalid_argument("fisher_r_to_z: need n >= 4");
  const double se = std::sqrt(1.0 / static_cast<double>(n1 - 3) +
                              1.0 / static_cast<double>(n2 - 3));
  const double z = (std::atanh(r1) - std::atanh(r2)) / se;
  TestResult result;
  result.statistic = z;
  result.method = TestMethod::normal_approx;
  result.n1 = n1;
  result.n2 = n2;
  result.p_value = clamp_p(2.0 * (1.0 - normal_cdf(std::fabs(z))));
  return result;
}

double normal_cdf(double z) {
  return 0.5 * std::erfc(-z / 1.41421356237309504880168872420969808);
}

namespace {

// Continued fraction for the incomplete beta function (modified Lentz).
double beta_cf(double x, double a, double b) {
  constexpr double kTiny = 1e-300;
  constexpr double kEps = 3e-16;
  constexpr int kMaxIter = 500;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  throw std::runtime_error("incomplete_beta_reg: continued fraction did not converge");
}

}  // namespace

double incomplete_beta_reg(double x, double a, double b) {
  if (!(a > 0.0) || !(b > 0.0))
    throw std::invalid_argument("incomplete_beta_reg: a, b must be > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(x, a, b) / a;
  return 1.0 - front * beta_cf(1.0 - x, b, a) / b;
}

double student_t_cdf(double t, double df) {
  if (!(df > 0.0)) throw std::invalid_argument("student_t_cdf: df must be > 0");
  if (t == 0.0) return 0.5;
  const double x = df / (df + t * t);
  const double tail = 0.5 * incomplete_beta_reg(x, 0.5 * df, 0.5);
  return t > 0.0 ? 1.0 - tail : tail;
}

double clamp_p(double p) {
  if (!(p > 0.0)) return std::numeric_limits<double>::denorm_min();
  return std::min(p, 1.0);
}

}  // namespace beliefsim::stats
