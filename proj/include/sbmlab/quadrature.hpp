#pragma once

// Globally adaptive Gauss-Kronrod (7/15) quadrature for real- or complex-valued
// integrands, plus log-variable helpers for integrals over (0, inf) that span
// many decades.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <queue>
#include <type_traits>
#include <vector>

#include "sbmlab/errors.hpp"

namespace sbmlab::quad {

struct Options {
  double abs_tol = 1e-14;
  double rel_tol = 1e-11;
  int max_intervals = 4000;
};

template <class Value>
struct Result {
  Value value{};
  double error = 0.0;
  int evaluations = 0;
};

namespace detail {

inline constexpr std::array<double, 8> kXgk = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kWgk = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kWg = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <class Value>
double magnitude(const Value& v) {
  return std::abs(v);
}

template <class Value>
struct Segment {
  double a, b;
  Value value;
  double error;
  bool operator<(const Segment& o) const { return error < o.error; }
};

template <class Value, class F>
Segment<Value> kronrod15(F& f, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const Value fc = f(center);
  Value kronrod = fc * kWgk[7];
  Value gauss = fc * kWg[3];
  for (int j = 0; j < 7; ++j) {
    const double dx = half * kXgk[j];
    const Value f1 = f(center - dx);
    const Value f2 = f(center + dx);
    kronrod += (f1 + f2) * kWgk[j];
    if (j % 2 == 1) gauss += (f1 + f2) * kWg[j / 2];
  }
  kronrod *= half;
  gauss *= half;
  return {a, b, kronrod, magnitude(Value(kronrod - gauss))};
}

}  // namespace detail

/// Integrates f over [a, b]. Throws QuadratureError with the partial sum when
/// the interval budget runs out before the tolerance is met.
template <class F>
auto integrate(F&& f, double a, double b, const Options& opt = {}) {
  using Value = std::decay_t<decltype(f(a))>;
  Result<Value> out;
  if (a == b) return out;
  std::priority_queue<detail::Segment<Value>> heap;
  auto first = detail::kronrod15<Value>(f, a, b);
  out.evaluations = 15;
  Value total = first.value;
  double total_err = first.error;
  heap.push(first);
  int intervals = 1;
  while (total_err > std::max(opt.abs_tol, opt.rel_tol * detail::magnitude(total))) {
    if (intervals >= opt.max_intervals) {
      throw QuadratureError("adaptive quadrature did not converge", std::complex<double>(total), total_err);
    }
    auto worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) {
      // Interval collapsed to machine resolution; accept what we have.
      total_err -= worst.error;
      continue;
    }
    auto left = detail::kronrod15<Value>(f, worst.a, mid);
    auto right = detail::kronrod15<Value>(f, mid, worst.b);
    out.evaluations += 30;
    total += left.value + right.value - worst.value;
    total_err += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
    ++intervals;
  }
  // Re-sum to shed accumulated update roundoff.
  Value resum{};
  double err = 0.0;
  while (!heap.empty()) {
    resum += heap.top().value;
    err += heap.top().error;
    heap.pop();
  }
  out.value = resum;
  out.error = err;
  return out;
}

/// Integral of f over [lo, hi] (0 < lo < hi) in the variable v = log y.
template <class F>
auto integrate_log(F&& f, double lo, double hi, const Options& opt = {}) {
  auto g = [&f](double v) {
    const double y = std::exp(v);
    return f(y) * y;
  };
  return integrate(g, std::log(lo), std::log(hi), opt);
}

namespace detail {

/// Sums unit-length chunks in v = log y starting at v0 and walking in
/// direction dir until the contributions become negligible.
template <class F, class Value>
void walk_log_chunks(F& f, double v0, int dir, double v_limit, const Options& opt, Result<Value>& acc,
                     double scale_hint) {
  int quiet = 0;
  double v = v0;
  auto g = [&f](double u) {
    const double y = std::exp(u);
    return f(y) * y;
  };
  while (dir > 0 ? v < v_limit : v > v_limit) {
    const double next = dir > 0 ? std::min(v + 1.0, v_limit) : std::max(v - 1.0, v_limit);
    Options local = opt;
    local.abs_tol = std::max(opt.abs_tol, 1e-3 * opt.rel_tol * std::max(scale_hint, magnitude(acc.value)));
    auto r = dir > 0 ? integrate(g, v, next, local) : integrate(g, next, v, local);
    acc.value += r.value;
    acc.error += r.error;
    acc.evaluations += r.evaluations;
    const double scale = std::max(scale_hint, magnitude(acc.value));
    if (scale > 0.0 && magnitude(r.value) <= 1e-18 * scale) {
      if (++quiet >= 3) return;
    } else {
      quiet = 0;
    }
    v = next;
  }
}

}  // namespace detail

/// Integral of f over [lo, inf) by walking outward in log y.
template <class F>
auto integrate_log_tail(F&& f, double lo, const Options& opt = {}) {
  using Value = std::decay_t<decltype(f(lo))>;
  Result<Value> acc;
  detail::walk_log_chunks(f, std::log(lo), +1, 709.0, opt, acc, 0.0);
  return acc;
}

/// Integral of f over (0, hi] by walking toward 0 in log y.
template <class F>
auto integrate_log_head(F&& f, double hi, const Options& opt = {}) {
  using Value = std::decay_t<decltype(f(hi))>;
  Result<Value> acc;
  detail::walk_log_chunks(f, std::log(hi), -1, -745.0, opt, acc, 0.0);
  return acc;
}

/// Integral of f over (0, inf): walks outward from y = 1 in both directions of
/// log y. Suited to integrands with power-law behaviour at both ends.
template <class F>
auto integrate_halfline(F&& f, const Options& opt = {}) {
  using Value = std::decay_t<decltype(f(1.0))>;
  Result<Value> acc;
  detail::walk_log_chunks(f, 0.0, +1, 709.0, opt, acc, 0.0);
  detail::walk_log_chunks(f, 0.0, -1, -745.0, opt, acc, detail::magnitude(acc.value));
  return acc;
}

}  // namespace sbmlab::quad
