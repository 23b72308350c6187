#pragma once

#include <span>

namespace cys {

/// Regularized incomplete beta function I_x(a, b).
double incomplete_beta(double a, double b, double x);

/// CDF of Student's t distribution with `df` (possibly fractional) degrees of freedom.
double student_t_cdf(double t, double df);

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;  ///< two-sided
};

/// Welch's unequal-variance t test with Welch-Satterthwaite degrees of freedom.
/// Each sample needs at least two values. If both variances are zero the
/// result is t = 0, p = 1 for equal means and |t| = inf, p = 0 otherwise.
WelchResult welch_t_test(std::span<const double> a, std::span<const double> b);

double mean(std::span<const double> values);
/// Unbiased (n - 1) sample variance.
double sample_variance(std::span<const double> values);

/// Mean resultant length of a set of angles in degrees, in [0, 1].
double mean_resultant_length(std::span<const double> degrees);

/// Angular deviation sqrt(2 (1 - R)) of angles in degrees, reported in degrees.
/// Zero for identical angles, sqrt(2) rad for two antipodal angles.
double circular_std_deg(std::span<const double> degrees);

/// Exact two-sided binomial test of `successes` out of `trials` against `p0`.
/// Sums the probabilities of all outcomes no more likely than the observed one.
double binomial_two_sided_p(int successes, int trials, double p0 = 0.5);

}  // namespace cys
