#include "cyscolor/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "cyscolor/error.hpp"

namespace cys {

namespace {

// Continued fraction for I_x(a, b) evaluated with the modified Lentz method.
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIterations = 10000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIterations; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (a <= 0.0 || b <= 0.0) throw ValidationError("incomplete_beta requires a, b > 0");
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_cdf(double t, double df) {
  if (!(df > 0.0)) throw ValidationError("degrees of freedom must be positive");
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double tail = 0.5 * incomplete_beta(0.5 * df, 0.5, df / (df + t * t));
  return t > 0 ? 1.0 - tail : tail;
}

double mean(std::span<const double> values) {
  if (values.empty()) throw ValidationError("mean of an empty sample");
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

double sample_variance(std::span<const double> values) {
  if (values.size() < 2) throw ValidationError("variance needs at least two values");
  const double m = mean(values);
  double ss = 0.0;
  for (double v : values) ss += (v - m) * (v - m);
  return ss / static_cast<double>(values.size() - 1);
}

WelchResult welch_t_test(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw ValidationError("welch_t_test needs at least two values per sample");
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double ma = mean(a), mb = mean(b);
  const double va = sample_variance(a) / na;
  const double vb = sample_variance(b) / nb;
  const double se2 = va + vb;
  WelchResult r;
  if (se2 == 0.0) {
    if (ma == mb) return r;
    r.t = ma > mb ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
    r.df = na + nb - 2.0;
    r.p = 0.0;
    return r;
  }
  r.t = (ma - mb) / std::sqrt(se2);
  r.df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
  // Two-sided tail straight from I_x avoids cancellation for large |t|.
  r.p = std::min(1.0, incomplete_beta(0.5 * r.df, 0.5, r.df / (r.df + r.t * r.t)));
  return r;
}

double mean_resultant_length(std::span<const double> degrees) {
  if (degrees.empty()) throw ValidationError("mean resultant length of no angles");
  double s = 0.0, c = 0.0;
  for (double d : degrees) {
    const double rad = d * std::numbers::pi / 180.0;
    s += std::sin(rad);
    c += std::cos(rad);
  }
  const double n = static_cast<double>(degrees.size());
  return std::min(1.0, std::hypot(s, c) / n);
}

double circular_std_deg(std::span<const double> degrees) {
  const double r = mean_resultant_length(degrees);
  return std::sqrt(2.0 * std::max(0.0, 1.0 - r)) * 180.0 / std::numbers::pi;
}

double binomial_two_sided_p(int successes, int trials, double p0) {
  if (trials < 0 || successes < 0 || successes > trials) throw ValidationError("invalid binomial counts");
  if (!(p0 > 0.0 && p0 < 1.0)) throw ValidationError("binomial p0 must be in (0, 1)");
  if (trials == 0) return 1.0;
  const auto log_pmf = [&](int k) {
    return std::lgamma(trials + 1.0) - std::lgamma(k + 1.0) - std::lgamma(trials - k + 1.0) + k * std::log(p0) +
           (trials - k) * std::log1p(-p0);
  };
  const double observed = log_pmf(successes);
  // Relative slack so that mirror-image outcomes count as equally likely.
  constexpr double kRelTol = 1e-7;
  double p = 0.0;
  for (int k = 0; k <= trials; ++k) {
    const double lp = log_pmf(k);
    if (lp <= observed + kRelTol) p += std::exp(lp);
  }
  return std::min(1.0, p);
}

}  // namespace cys
