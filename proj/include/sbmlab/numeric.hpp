#pragma once

#include <cmath>
#include <complex>
#include <numbers>

#include "sbmlab/errors.hpp"

namespace sbmlab {

using cplx = std::complex<double>;

inline constexpr double kSqrt2 = std::numbers::sqrt2;
inline constexpr double kPi = std::numbers::pi;

/// Neumaier-compensated accumulator; works for double and std::complex<double>.
template <class T>
class CompensatedSum {
 public:
  void add(T x) {
    T t = sum_ + x;
    comp_ += compensation(sum_, x, t);
    sum_ = t;
  }
  T value() const { return sum_ + comp_; }

 private:
  static double compensation(double s, double x, double t) {
    return std::abs(s) >= std::abs(x) ? (s - t) + x : (x - t) + s;
  }
  static cplx compensation(cplx s, cplx x, cplx t) {
    return {compensation(s.real(), x.real(), t.real()), compensation(s.imag(), x.imag(), t.imag())};
  }

  T sum_{};
  T comp_{};
};

/// Principal-branch power z^p for Re z >= 0. Real parts down to -1e-12 are
/// treated as roundoff and clamped onto the imaginary axis.
inline cplx pow_right(cplx z, double p) {
  constexpr double kSlack = 1e-12;
  if (z.real() < -kSlack * std::max(1.0, std::abs(z))) {
    throw BranchError("complex power argument left the closed right half-plane", z);
  }
  if (z.real() < 0.0) z = {0.0, z.imag()};
  if (z == cplx{0.0, 0.0}) {
    if (p > 0.0) return {0.0, 0.0};
    if (p == 0.0) return {1.0, 0.0};
    throw BranchError("negative power of zero", z);
  }
  const double r = std::abs(z);
  const double arg = std::arg(z);
  return std::polar(std::pow(r, p), p * arg);
}

/// e^{-w} - 1 + w without cancellation for small |w|.
inline cplx exp_neg_m1_plus(cplx w) {
  if (std::abs(w) < 0.1) {
    // sum_{k>=2} (-w)^k / k!
    cplx term = w * w / 2.0;
    cplx sum = term;
    for (int k = 3; k < 20; ++k) {
      term *= -w / static_cast<double>(k);
      sum += term;
      if (std::abs(term) < 1e-18 * std::abs(sum)) break;
    }
    return sum;
  }
  return std::exp(-w) - 1.0 + w;
}

inline double exp_neg_m1_plus(double w) {
  if (std::abs(w) < 0.1) return exp_neg_m1_plus(cplx{w, 0.0}).real();
  return std::expm1(-w) + w;
}

/// 1 - e^{-w} for complex w.
inline cplx one_minus_exp_neg(cplx w) {
  if (std::abs(w) < 0.1) {
    cplx term = w;
    cplx sum = term;
    for (int k = 2; k < 20; ++k) {
      term *= -w / static_cast<double>(k);
      sum += term;
      if (std::abs(term) < 1e-18 * std::abs(sum)) break;
    }
    return sum;
  }
  return 1.0 - std::exp(-w);
}

}  // namespace sbmlab
