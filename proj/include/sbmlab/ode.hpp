#pragma once

// Dormand-Prince 5(4) with step-size control and the order-4 continuous
// extension, for a single real or complex state.

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "sbmlab/errors.hpp"

namespace sbmlab::ode {

struct Options {
  double rel_tol = 1e-10;
  double abs_tol = 1e-12;
  double h0 = 0.0;  // 0 picks an initial step from the tolerances
  double h_max = 0.0;
  long max_steps = 1'000'000;
};

namespace detail {
inline double sq_scaled(double e, double s) { return (e / s) * (e / s); }
inline double err_norm(double err, double y0, double y1, const Options& o) {
  return std::sqrt(sq_scaled(err, o.abs_tol + o.rel_tol * std::max(std::abs(y0), std::abs(y1))));
}
inline double err_norm(std::complex<double> err, std::complex<double> y0, std::complex<double> y1, const Options& o) {
  const double sr = o.abs_tol + o.rel_tol * std::max(std::abs(y0.real()), std::abs(y1.real()));
  const double si = o.abs_tol + o.rel_tol * std::max(std::abs(y0.imag()), std::abs(y1.imag()));
  return std::sqrt(0.5 * (sq_scaled(err.real(), sr) + sq_scaled(err.imag(), si)));
}
}  // namespace detail

/// One accepted step with its interpolation coefficients.
template <class State>
struct Segment {
  double x0 = 0.0, h = 0.0;
  State c1{}, c2{}, c3{}, c4{}, c5{};

  State at(double x) const {
    const double s = (x - x0) / h;
    const double s1 = 1.0 - s;
    return c1 + s * (c2 + s1 * (c3 + s * (c4 + s1 * c5)));
  }
};

template <class State>
struct Solution {
  std::vector<Segment<State>> segments;
  double x_end = 0.0;
  State y_end{};
  long rejected = 0;

  double x_begin() const { return segments.empty() ? x_end : segments.front().x0; }

  /// Dense output anywhere in the integrated interval.
  State operator()(double x) const {
    if (segments.empty()) return y_end;
    auto it = std::upper_bound(segments.begin(), segments.end(), x, [](double v, const Segment<State>& s) { return v < s.x0; });
    if (it != segments.begin()) --it;
    return it->at(x);
  }
};

/// Integrates y' = f(x, y) from x0 to x1 > x0. Throws when the step size
/// collapses below roundoff or the step budget runs out.
template <class State, class F>
Solution<State> dopri5(F&& f, double x0, State y0, double x1, const Options& opt = {}) {
  constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  constexpr double a21 = 1.0 / 5;
  constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
  constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176, a65 = -5103.0 / 18656;
  constexpr double a71 = 35.0 / 384, a73 = 500.0 / 1113, a74 = 125.0 / 192, a75 = -2187.0 / 6784, a76 = 11.0 / 84;
  constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200, e6 = 22.0 / 525,
                   e7 = -1.0 / 40;
  constexpr double d1 = -12715105075.0 / 11282082432, d3 = 87487479700.0 / 32700410799,
                   d4 = -10690763975.0 / 1880347072, d5 = 701980252875.0 / 199316789632,
                   d6 = -1453857185.0 / 822651844, d7 = 69997945.0 / 29380423;

  Solution<State> sol;
  double x = x0;
  State y = y0;
  State k1 = f(x, y);
  const double span = x1 - x0;
  double h = opt.h0 > 0.0 ? opt.h0 : std::min(span, 1e-3 * std::max(1.0, std::abs(span)));
  const double h_max = opt.h_max > 0.0 ? opt.h_max : span;
  long steps = 0;
  while (x < x1) {
    if (++steps > opt.max_steps) throw Error("ODE step budget exhausted at x = " + std::to_string(x));
    if (x + h > x1) h = x1 - x;
    if (h <= 1e-14 * std::max(1.0, std::abs(x))) throw Error("ODE step size collapsed at x = " + std::to_string(x));
    const State k2 = f(x + c2 * h, y + h * (a21 * k1));
    const State k3 = f(x + c3 * h, y + h * (a31 * k1 + a32 * k2));
    const State k4 = f(x + c4 * h, y + h * (a41 * k1 + a42 * k2 + a43 * k3));
    const State k5 = f(x + c5 * h, y + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
    const State k6 = f(x + h, y + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
    const State y1 = y + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
    const State k7 = f(x + h, y1);
    const State err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
    const double en = detail::err_norm(err, y, y1, opt);
    if (!std::isfinite(en)) {
      h *= 0.2;
      ++sol.rejected;
      continue;
    }
    if (en <= 1.0) {
      Segment<State> seg;
      seg.x0 = x;
      seg.h = h;
      const State dy = y1 - y;
      const State bspl = h * k1 - dy;
      seg.c1 = y;
      seg.c2 = dy;
      seg.c3 = bspl;
      seg.c4 = dy - h * k7 - bspl;
      seg.c5 = h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6 + d7 * k7);
      sol.segments.push_back(seg);
      x = (x + h >= x1) ? x1 : x + h;
      y = y1;
      k1 = k7;
      const double fac = en == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(en, -0.2), 0.2, 5.0);
      h = std::min(h * fac, h_max);
    } else {
      ++sol.rejected;
      h *= std::clamp(0.9 * std::pow(en, -0.2), 0.1, 0.9);
    }
  }
  sol.x_end = x1;
  sol.y_end = y;
  return sol;
}

}  // namespace sbmlab::ode
