#pragma once

#include <optional>
#include <span>
#include <vector>

namespace cika {

/// Standard normal CDF.
double normal_cdf(double x);

/// Inverse of the standard normal CDF. Accurate to well below 1e-9 over
/// p in (0, 1); throws std::domain_error outside the open interval.
double inverse_normal_cdf(double p);

/// Two-sided critical value z_{alpha/2}; alpha must lie in (0, 1).
double z_critical(double alpha);

double mean(std::span<const double> xs);

/// Unbiased sample variance (n-1 denominator); requires n >= 2.
double sample_variance(std::span<const double> xs);
double sample_sd(std::span<const double> xs);

/// Ordinary least squares slope of y on x; requires >= 2 distinct x.
double least_squares_slope(std::span<const double> x, std::span<const double> y);

/// Exact binomial upper tail P(X >= k) for X ~ Binomial(n, p).
double binomial_sf(int k, int n, double p);

/// One-sided sign test: probability of >= wins successes among
/// wins + losses fair coin flips. Ties are excluded by the caller.
double sign_test_p(int wins, int losses);

/// Regularized incomplete beta function I_x(a, b).
double incomplete_beta(double a, double b, double x);

/// Student-t upper tail P(T > t) with nu degrees of freedom.
double student_t_sf(double t, double nu);

struct PairedTResult {
    double mean_diff = 0.0;
    double se = 0.0;                       // sd / sqrt(n); 0 when degenerate
    std::optional<double> t;               // absent when sd == 0
    std::optional<double> p_two_sided;
    std::optional<double> cohens_d;        // mean / sd
    int n = 0;
};

/// Paired t test on a vector of per-unit differences. A zero-variance
/// sample yields empty t / p / d rather than NaN.
PairedTResult paired_t_test(std::span<const double> diffs);

} // namespace cika
