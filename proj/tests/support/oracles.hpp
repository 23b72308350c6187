#pragma once

// Reference computations used as test oracles. Each is written without
// calling the library routine it checks.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include <boost/math/distributions/students_t.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>

namespace oracle {

using Triple = std::array<double, 3>;

// CIE 1976 L*a*b* from sRGB under D65, in the epsilon/kappa form.
inline Triple srgb_to_lab(double r, double g, double b) {
  auto lin = [](double c) { return c > 0.04045 ? std::pow((c + 0.055) / 1.055, 2.4) : c / 12.92; };
  const double R = lin(r), G = lin(g), B = lin(b);
  const double X = 0.4124564 * R + 0.3575761 * G + 0.1804375 * B;
  const double Y = 0.2126729 * R + 0.7151522 * G + 0.0721750 * B;
  const double Z = 0.0193339 * R + 0.1191920 * G + 0.9503041 * B;
  const double eps = 216.0 / 24389.0, kappa = 24389.0 / 27.0;
  auto f = [&](double t) { return t > eps ? std::cbrt(t) : (kappa * t + 16.0) / 116.0; };
  const double fx = f(X / 0.95047), fy = f(Y / 1.0), fz = f(Z / 1.08883);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

inline double delta_e(const Triple& p, const Triple& q) {
  return std::sqrt((p[0] - q[0]) * (p[0] - q[0]) + (p[1] - q[1]) * (p[1] - q[1]) + (p[2] - q[2]) * (p[2] - q[2]));
}

// Minimum over all 5! matchings of the summed ΔE, divided by 5.
inline double palette_distance_bruteforce(const std::array<Triple, 5>& a, const std::array<Triple, 5>& b) {
  std::array<int, 5> perm{0, 1, 2, 3, 4};
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0.0;
    for (int i = 0; i < 5; ++i) s += delta_e(a[i], b[perm[i]]);
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / 5.0;
}

// Exhaustive k=3 clustering of `groups` (distinct Lab points with a
// multiplicity each). Every split of every group's copies over the three
// clusters is enumerated, so the search covers all 3-partitions up to
// relabelling of identical pixels.
struct KMeansOptimum {
  double inertia = std::numeric_limits<double>::infinity();
  std::vector<Triple> centers;
};

inline KMeansOptimum kmeans3_bruteforce(const std::vector<Triple>& points, const std::vector<int>& multiplicity) {
  const std::size_t g = points.size();
  std::vector<std::vector<std::array<int, 3>>> splits(g);
  for (std::size_t i = 0; i < g; ++i) {
    const int m = multiplicity[i];
    for (int a = 0; a <= m; ++a) {
      for (int b = 0; a + b <= m; ++b) splits[i].push_back({a, b, m - a - b});
    }
  }
  KMeansOptimum best;
  std::vector<std::size_t> idx(g, 0);
  while (true) {
    double n[3] = {0, 0, 0};
    double s[3][3] = {};
    double q[3] = {0, 0, 0};
    for (std::size_t i = 0; i < g; ++i) {
      const auto& split = splits[i][idx[i]];
      const Triple& p = points[i];
      const double pp = p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
      for (int c = 0; c < 3; ++c) {
        if (split[c] == 0) continue;
        n[c] += split[c];
        for (int d = 0; d < 3; ++d) s[c][d] += split[c] * p[d];
        q[c] += split[c] * pp;
      }
    }
    if (n[0] > 0 && n[1] > 0 && n[2] > 0) {
      double sse = 0.0;
      for (int c = 0; c < 3; ++c) {
        sse += q[c] - (s[c][0] * s[c][0] + s[c][1] * s[c][1] + s[c][2] * s[c][2]) / n[c];
      }
      if (sse < best.inertia - 1e-12) {
        best.inertia = sse;
        best.centers.clear();
        for (int c = 0; c < 3; ++c) best.centers.push_back({s[c][0] / n[c], s[c][1] / n[c], s[c][2] / n[c]});
      }
    }
    std::size_t k = 0;
    while (k < g && ++idx[k] == splits[k].size()) idx[k++] = 0;
    if (k == g) break;
  }
  return best;
}

// Lexicographic argmax over every ordered 5-selection of the per-step score
// vector (proportion + beta * mean ΔE to colors chosen earlier).
inline std::array<int, 5> greedy_curation_bruteforce(const std::vector<Triple>& lab, const std::vector<double>& prop,
                                                     double beta) {
  const int n = static_cast<int>(lab.size());
  std::array<int, 5> best{};
  std::array<double, 5> best_scores;
  best_scores.fill(-std::numeric_limits<double>::infinity());
  std::array<int, 5> sel{};
  std::array<double, 5> scores{};
  std::vector<bool> used(n, false);
  auto rec = [&](auto&& self, int depth) -> void {
    if (depth == 5) {
      if (std::lexicographical_compare(best_scores.begin(), best_scores.end(), scores.begin(), scores.end())) {
        best_scores = scores;
        best = sel;
      }
      return;
    }
    for (int c = 0; c < n; ++c) {
      if (used[c]) continue;
      double mean = 0.0;
      for (int j = 0; j < depth; ++j) mean += delta_e(lab[c], lab[sel[j]]);
      if (depth > 0) mean /= depth;
      used[c] = true;
      sel[depth] = c;
      scores[depth] = prop[c] + beta * mean;
      self(self, depth + 1);
      used[c] = false;
    }
  };
  rec(rec, 0);
  return best;
}

// Angular deviation sqrt(2(1 - R)) in degrees for two angles, with the
// two-point resultant length R = |cos((a - b) / 2)|.
inline double two_angle_circular_std_deg(double a_deg, double b_deg) {
  const double half = (a_deg - b_deg) * M_PI / 360.0;
  const double R = std::abs(std::cos(half));
  return std::sqrt(2.0 * (1.0 - R)) * 180.0 / M_PI;
}

using HighPrecision = boost::multiprecision::cpp_bin_float_50;

struct WelchReference {
  double t, df, p;
};

// Welch statistics in 50-digit arithmetic with the boost Student t CDF.
inline WelchReference welch_reference(const std::vector<double>& a, const std::vector<double>& b) {
  auto moments = [](const std::vector<double>& v) {
    HighPrecision m = 0;
    for (double x : v) m += x;
    m /= static_cast<int>(v.size());
    HighPrecision ss = 0;
    for (double x : v) ss += (HighPrecision(x) - m) * (HighPrecision(x) - m);
    return std::pair{m, HighPrecision(ss / static_cast<int>(v.size() - 1))};
  };
  const auto [ma, va] = moments(a);
  const auto [mb, vb] = moments(b);
  const HighPrecision sa = va / static_cast<int>(a.size());
  const HighPrecision sb = vb / static_cast<int>(b.size());
  const HighPrecision t = (ma - mb) / boost::multiprecision::sqrt(sa + sb);
  const HighPrecision df = (sa + sb) * (sa + sb) /
                           (sa * sa / static_cast<int>(a.size() - 1) + sb * sb / static_cast<int>(b.size() - 1));
  boost::math::students_t_distribution<HighPrecision> dist(df);
  const HighPrecision p = 2 * boost::math::cdf(boost::math::complement(dist, boost::multiprecision::abs(t)));
  return {static_cast<double>(t), static_cast<double>(df), static_cast<double>(p)};
}

// Two-sided permutation test of the mean difference with `shuffles` relabellings.
// Returns (count of |diff| >= observed, shuffles).
inline std::pair<long, long> permutation_test(const std::vector<double>& a, const std::vector<double>& b,
                                              long shuffles, std::uint64_t seed) {
  std::vector<double> pooled(a);
  pooled.insert(pooled.end(), b.begin(), b.end());
  auto diff = [&](const std::vector<double>& v) {
    const double sa = std::accumulate(v.begin(), v.begin() + a.size(), 0.0);
    const double sb = std::accumulate(v.begin() + a.size(), v.end(), 0.0);
    return std::abs(sa / a.size() - sb / b.size());
  };
  const double observed = diff(pooled);
  std::mt19937_64 rng(seed);
  long hits = 0;
  for (long s = 0; s < shuffles; ++s) {
    std::shuffle(pooled.begin(), pooled.end(), rng);
    if (diff(pooled) >= observed - 1e-12) ++hits;
  }
  return {hits, shuffles};
}

// Two-sided exact binomial p against 1/2 by direct summation of C(n, k) / 2^n
// over outcomes no more likely than the observed one.
inline double binomial_half_p(int k, int n) {
  std::vector<double> pmf(n + 1);
  for (int i = 0; i <= n; ++i) {
    pmf[i] = std::exp(std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) - n * std::log(2.0));
  }
  double p = 0.0;
  for (int i = 0; i <= n; ++i) {
    if (pmf[i] <= pmf[k] * (1 + 1e-9)) p += pmf[i];
  }
  return std::min(1.0, p);
}

}  // namespace oracle
