#pragma once

// Sample statistics used by the experiments: empirical characteristic
// functions, sup distances, two-sample Kolmogorov-Smirnov.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "sbmlab/errors.hpp"
#include "sbmlab/numeric.hpp"

namespace sbmlab::stats {

/// (1/n) sum_j e^{i theta x_j}, summed with compensation.
inline cplx ecf(const std::vector<double>& xs, double theta) {
  if (xs.empty()) throw ConfigError("empirical CF of an empty sample");
  CompensatedSum<double> re, im;
  for (double x : xs) {
    const double a = theta * x;
    re.add(std::cos(a));
    im.add(std::sin(a));
  }
  const double n = static_cast<double>(xs.size());
  return {re.value() / n, im.value() / n};
}

inline std::vector<cplx> ecf(const std::vector<double>& xs, const std::vector<double>& grid) {
  std::vector<cplx> out;
  out.reserve(grid.size());
  for (double th : grid) out.push_back(ecf(xs, th));
  return out;
}

inline double sup_distance(const std::vector<cplx>& a, const std::vector<cplx>& b) {
  if (a.size() != b.size()) throw ConfigError("sup distance needs equally sized profiles");
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

/// sup over the grid of |ECF(theta) - cf(theta)|.
inline double cf_distance(const std::vector<double>& xs, const std::vector<double>& grid,
                          const std::function<cplx(double)>& cf) {
  double d = 0.0;
  for (double th : grid) d = std::max(d, std::abs(ecf(xs, th) - cf(th)));
  return d;
}

/// Two-sample Kolmogorov-Smirnov statistic sup_x |F_a(x) - F_b(x)|.
inline double ks_distance(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw ConfigError("KS distance of an empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

/// One-sample KS statistic against a continuous CDF.
inline double ks_distance(std::vector<double> a, const std::function<double(double)>& cdf) {
  if (a.empty()) throw ConfigError("KS distance of an empty sample");
  std::sort(a.begin(), a.end());
  const double n = static_cast<double>(a.size());
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double F = cdf(a[i]);
    d = std::max({d, std::abs(static_cast<double>(i + 1) / n - F), std::abs(F - static_cast<double>(i) / n)});
  }
  return d;
}

/// Asymptotic two-sample KS critical value at level alpha for equal sizes n.
inline double ks_critical(double alpha, std::size_t n) {
  const double c = std::sqrt(-0.5 * std::log(alpha / 2.0));
  return c * std::sqrt(2.0 / static_cast<double>(n));
}

struct MeanEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t n = 0;
};

inline MeanEstimate mean_estimate(const std::vector<double>& xs) {
  if (xs.size() < 2) throw ConfigError("mean estimate needs at least two samples");
  CompensatedSum<double> s;
  for (double x : xs) s.add(x);
  const double n = static_cast<double>(xs.size());
  const double m = s.value() / n;
  CompensatedSum<double> v;
  for (double x : xs) v.add((x - m) * (x - m));
  return {m, std::sqrt(v.value() / (n - 1.0) / n), xs.size()};
}

inline double median(std::vector<double> xs) {
  if (xs.empty()) throw ConfigError("median of an empty sample");
  const std::size_t k = xs.size() / 2;
  std::nth_element(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(k), xs.end());
  const double hi = xs[k];
  if (xs.size() % 2 == 1) return hi;
  return 0.5 * (hi + *std::max_element(xs.begin(), xs.begin() + static_cast<std::ptrdiff_t>(k)));
}

}  // namespace sbmlab::stats
