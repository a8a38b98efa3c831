#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "beliefsim/types.hpp"

namespace beliefsim::stats {

// Thrown when a correlation input has zero rank variance (constant series).
class DegenerateSeriesError : public std::runtime_error {
 public:
  DegenerateSeriesError() : std::runtime_error("degenerate: zero rank variance") {}
};

/// Empirical distribution over the five Likert bins. `n` is the sample count
/// behind the pmf (0 for analytic distributions supplied directly).
struct Distribution {
  std::array<double, 5> pmf{};
  std::size_t n = 0;

  std::array<double, 5> cdf() const;
};

// Validates non-negativity and sum == 1 within 1e-12.
Distribution distribution_from_pmf(const std::array<double, 5>& pmf,
                                   std::size_t n = 0);

// pmf[v] = count(v)/n. Throws on empty input.
Distribution pmf_of(std::span<const LikertRating> samples);

/// KL divergence D(p || q) in nats. With pseudocount a > 0 both pmfs are
/// smoothed as (pmf + a/n) / (1 + 5a/n), i.e. a is added to each underlying
/// count; this requires n > 0 on both sides. With a == 0 the raw pmfs are
/// used: zero-p bins contribute nothing and a bin with p > 0, q == 0 yields
/// +infinity.
double kl_divergence(const Distribution& p, const Distribution& q,
                     double pseudocount = 0.0);

// First Wasserstein distance on the 0..4 support with unit spacing:
// sum_v |F_p(v) - F_q(v)|. Range [0, 4].
double wasserstein_distance(const Distribution& p, const Distribution& q);

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;
};

// Arithmetic mean, n >= 1.
double mean_of(std::span<const double> samples);
// Sample standard deviation (divisor n-1); requires n >= 2.
MeanStd mean_std(std::span<const double> samples);

enum class TestMethod { t_approx, normal_approx, exact };

struct TestResult {
  double statistic = 0.0;
  double p_value = 1.0;  // two-sided, always in (0, 1]
  TestMethod method = TestMethod::normal_approx;
  std::size_t n1 = 0;
  std::size_t n2 = 0;
};

struct Correlation {
  double rho = 0.0;
  TestResult test;
};

// Average ranks (1-based, ties get the mean of their positions).
std::vector<double> average_ranks(std::span<const double> values);

/// Spearman rank correlation with average ties; two-sided p from
/// t = rho * sqrt((n-2) / (1 - rho^2)) on n-2 degrees of freedom.
/// |rho| == 1 reports the smallest positive double as p.
/// Throws DegenerateSeriesError on a constant series; requires n >= 3.
Correlation spearman(std::span<const double> x, std::span<const double> y);

/// Mann-Whitney U for sample `a`: U = #{a_i > b_j} + 0.5 #{a_i == b_j}.
/// Exact two-sided p by enumeration when n_a*n_b <= 400 and there are no
/// ties; otherwise normal approximation with tie and continuity correction.
TestResult mann_whitney_u(std::span<const double> a, std::span<const double> b);

/// Fisher r-to-z test for the difference of two correlations:
/// z = (atanh r1 - atanh r2) / sqrt(1/(n1-3) + 1/(n2-3)).
/// Requires |r| < 1 and n >= 4 on both sides.
TestResult fisher_r_to_z(double r1, std::size_t n1, double r2, std::size_t n2);

// Standard normal CDF, absolute error well below 1e-10.
double normal_cdf(double z);

// Student-t CDF via the regularized incomplete beta function, df > 0.
double student_t_cdf(double t, double df);

// Regularized incomplete beta I_x(a, b) (continued-fraction evaluation).
double incomplete_beta_reg(double x, double a, double b);

// Clamp into (0, 1]: p-values never print as exact zeros.
double clamp_p(double p);

}  // namespace beliefsim::stats
