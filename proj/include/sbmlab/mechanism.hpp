#pragma once

// Branching mechanisms
//
//   psi(z) = -a z + b z^2 + int_(0,inf) (e^{-z y} - 1 + z y) pi(dy),   Re z >= 0,
//
// with three Levy-measure kinds: none, an exact stable tail
// pi(dy) = A1 (1+beta) y^{-(2+beta)} dy, and a tabulated density.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <type_traits>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <boost/math/tools/roots.hpp>

#include "sbmlab/errors.hpp"
#include "sbmlab/numeric.hpp"
#include "sbmlab/quadrature.hpp"

namespace sbmlab {

struct NoJumps {};

/// pi(dy) = A1 (1+beta) y^{-(2+beta)} dy, so that pibar(r) = A1 r^{-(1+beta)}.
struct StableTail {
  double A1 = 0.0;
  double beta = 0.5;

  double density(double y) const { return A1 * (1.0 + beta) * std::pow(y, -(2.0 + beta)); }
  double tail(double r) const { return A1 * std::pow(r, -(1.0 + beta)); }
  /// Coefficient of z^{1+beta} in psi_0.
  double A2() const { return A1 * std::tgamma(1.0 - beta) / beta; }
};

/// Levy density sampled on an increasing grid. Between nodes the density is a
/// power law through the two neighbouring values; below the first node it is
/// zero; past the last node it continues as c * y^kappa (the tail stub).
class TabulatedDensity {
 public:
  TabulatedDensity(std::vector<double> r, std::vector<double> density, std::optional<double> tail_exponent_hint = {})
      : r_(std::move(r)), d_(std::move(density)), hint_(tail_exponent_hint) {
    if (r_.size() < 2 || r_.size() != d_.size()) throw ConfigError("tabulated density needs >= 2 nodes with matching values");
    for (std::size_t i = 0; i < r_.size(); ++i) {
      if (!(r_[i] > 0.0) || !std::isfinite(r_[i])) throw ConfigError("tabulated density nodes must be positive and finite");
      if (i > 0 && !(r_[i] > r_[i - 1])) throw ConfigError("tabulated density nodes must be strictly increasing");
      if (!(d_[i] >= 0.0) || !std::isfinite(d_[i])) throw ConfigError("tabulated density must be nonnegative and finite");
    }
    slope_.resize(r_.size() - 1);
    for (std::size_t i = 0; i + 1 < r_.size(); ++i) {
      slope_[i] = (d_[i] > 0.0 && d_[i + 1] > 0.0) ? std::log(d_[i + 1] / d_[i]) / std::log(r_[i + 1] / r_[i])
                                                    : std::numeric_limits<double>::quiet_NaN();
    }
    if (d_.back() > 0.0) {
      stub_exponent_ = hint_ ? *hint_ : slope_.back();
      if (!std::isfinite(stub_exponent_)) throw ConfigError("cannot infer the tail stub exponent; supply tail_exponent");
      if (!(stub_exponent_ < -2.0)) {
        throw ConfigError("tail stub y^" + std::to_string(stub_exponent_) + " violates int (y ^ y^2) pi(dy) < inf");
      }
    }
    const double mass = integrate([](double y) { return std::min(y, y * y); }).value;
    if (!std::isfinite(mass)) throw ConfigError("int (y ^ y^2) pi(dy) is not finite");
  }

  double operator()(double y) const {
    if (y < r_.front()) return 0.0;
    if (y >= r_.back()) return d_.back() > 0.0 ? d_.back() * std::pow(y / r_.back(), stub_exponent_) : 0.0;
    const auto it = std::upper_bound(r_.begin(), r_.end(), y);
    const std::size_t i = static_cast<std::size_t>(it - r_.begin()) - 1;
    return cell_value(i, y);
  }

  const std::vector<double>& nodes() const { return r_; }
  const std::vector<double>& values() const { return d_; }
  std::optional<double> tail_exponent_hint() const { return hint_; }
  bool has_stub() const { return d_.back() > 0.0; }
  /// kappa in density ~ y^kappa beyond the last node (-inf when there is no stub).
  double stub_exponent() const { return has_stub() ? stub_exponent_ : -std::numeric_limits<double>::infinity(); }

  /// Image of the measure under y -> space*y, multiplied by mass.
  TabulatedDensity scaled(double space, double mass) const {
    std::vector<double> r(r_.size()), d(d_.size());
    for (std::size_t i = 0; i < r_.size(); ++i) {
      r[i] = r_[i] * space;
      d[i] = d_[i] * mass / space;
    }
    return TabulatedDensity(std::move(r), std::move(d), has_stub() ? std::optional<double>(stub_exponent_) : hint_);
  }

  /// int_lo^hi f(y) pi(y) dy, cell by cell plus the stub.
  template <class F, class Value = std::decay_t<std::invoke_result_t<F&, double>>>
  quad::Result<Value> integrate(F&& f, double lo = 0.0, double hi = std::numeric_limits<double>::infinity(),
                                const quad::Options& opt = {}) const {
    quad::Result<Value> acc;
    auto add = [&acc](const auto& r) {
      acc.value += r.value;
      acc.error += r.error;
      acc.evaluations += r.evaluations;
    };
    for (std::size_t i = 0; i + 1 < r_.size(); ++i) {
      if (d_[i] == 0.0 && d_[i + 1] == 0.0) continue;
      const double a = std::max(lo, r_[i]);
      const double b = std::min(hi, r_[i + 1]);
      if (!(a < b)) continue;
      add(quad::integrate_log([&](double y) { return f(y) * cell_value(i, y); }, a, b, opt));
    }
    if (has_stub() && hi > r_.back()) {
      auto g = [&](double y) { return f(y) * (d_.back() * std::pow(y / r_.back(), stub_exponent_)); };
      const double a = std::max(lo, r_.back());
      if (std::isinf(hi)) {
        quad::Options tail_opt = opt;
        tail_opt.abs_tol = std::max(opt.abs_tol, 1e-3 * opt.rel_tol * std::abs(acc.value));
        add(quad::integrate_log_tail(g, a, tail_opt));
      } else if (a < hi) {
        add(quad::integrate_log(g, a, hi, opt));
      }
    }
    return acc;
  }

  /// int (e^{-zy} - 1 + zy) pi(dy) for Re z >= 0. Cells where |z| y < 1 are
  /// integrated directly. Farther out the polynomial part is integrated in
  /// closed form and the e^{-zy} part along steepest-descent rays, which keeps
  /// the cost bounded when e^{-zy} oscillates.
  cplx laplace_jump(cplx z) const {
    const double az = std::abs(z);
    if (az == 0.0) return {0.0, 0.0};
    CompensatedSum<cplx> acc;
    for (std::size_t i = 0; i + 1 < r_.size(); ++i) {
      if (d_[i] == 0.0 && d_[i + 1] == 0.0) continue;
      auto g = [this, i](cplx y) { return cell_value_c(i, y); };
      const bool oscillates = std::abs(z.imag()) * (r_[i + 1] - r_[i]) > 4.0;
      if (az * r_[i] < 1.0 || (!oscillates && z.real() * r_[i] < 40.0)) {
        acc.add(quad::integrate_log([&](double y) { return exp_neg_m1_plus(z * y) * cell_value(i, y); }, r_[i], r_[i + 1]).value);
      } else {
        acc.add(z * cell_moment(i, 1, r_[i], r_[i + 1]) - cell_moment(i, 0, r_[i], r_[i + 1]));
        // e^{-zy} is below e^{-40} of the polynomial part once Re z y > 40.
        if (z.real() * r_[i] < 40.0) acc.add(ray(g, r_[i], z) - ray(g, r_[i + 1], z));
      }
    }
    if (has_stub()) {
      const double R = r_.back();
      const double Y = std::max(R, 1.0 / az);
      if (Y > R) {
        acc.add(quad::integrate_log([&](double y) { return exp_neg_m1_plus(z * y) * stub_value(y); }, R, Y).value);
      }
      acc.add(z * stub_moment(1, Y) - stub_moment(0, Y));
      if (z.real() * Y < 40.0) acc.add(ray([this](cplx y) { return stub_value_c(y); }, Y, z));
    }
    return acc.value();
  }

  /// pibar(r) = pi((r, inf)).
  double tail(double r) const {
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < r_.size(); ++i) {
      const double a = std::max(r, r_[i]);
      if (!(a < r_[i + 1]) || (d_[i] == 0.0 && d_[i + 1] == 0.0)) continue;
      total += quad::integrate_log([this, i](double y) { return cell_value(i, y); }, a, r_[i + 1]).value;
    }
    if (has_stub()) total += stub_tail(std::max(r, r_.back()));
    return total;
  }

 private:
  cplx cell_value_c(std::size_t i, cplx y) const {
    if (std::isnan(slope_[i])) {
      const cplx w = (y - r_[i]) / (r_[i + 1] - r_[i]);
      return d_[i] + w * (d_[i + 1] - d_[i]);
    }
    return d_[i] * pow_right(y / r_[i], slope_[i]);
  }
  double stub_value(double y) const { return d_.back() * std::pow(y / r_.back(), stub_exponent_); }
  cplx stub_value_c(cplx y) const { return d_.back() * pow_right(y / r_.back(), stub_exponent_); }

  /// int_c^{c + inf e^{i phi}} g(y) e^{-zy} dy along e^{i phi} = conj(z)/|z|,
  /// where e^{-zy} decays at rate |z|.
  template <class G>
  static cplx ray(G&& g, double c, cplx z) {
    const double az = std::abs(z);
    const cplx dir = std::conj(z) / az;
    const cplx phase = std::exp(-z * c);
    auto f = [&](double s) { return g(c + dir * s) * std::exp(-az * s); };
    quad::Options opt;
    opt.abs_tol = 1e-300;
    opt.rel_tol = 1e-12;
    return phase * dir * quad::integrate(f, 0.0, 60.0 / az, opt).value;
  }

  /// int_r^{r rho} (y/r)^p dy / r = (rho^{p+1} - 1)/(p+1), stable near p = -1.
  static double power_integral(double p, double rho) {
    const double e = (p + 1.0) * std::log(rho);
    if (std::abs(p + 1.0) < 1e-12) return std::log(rho);
    return std::expm1(e) / (p + 1.0);
  }

  /// int_a^b y^m g_i(y) dy with [a, b] the whole cell.
  double cell_moment(std::size_t i, int m, double a, double b) const {
    if (std::isnan(slope_[i])) {
      // Linear cell: g = d_i + k (y - a).
      const double k = (d_[i + 1] - d_[i]) / (b - a);
      const double c0 = d_[i] - k * a;
      if (m == 0) return c0 * (b - a) + 0.5 * k * (b * b - a * a);
      return 0.5 * c0 * (b * b - a * a) + k * (b * b * b - a * a * a) / 3.0;
    }
    const double r = r_[i];
    return d_[i] * std::pow(r, m + 1) * power_integral(slope_[i] + m, b / r);
  }

  /// int_Y^inf y^m c (y/R)^kappa dy for m = 0, 1 (finite since kappa < -2).
  double stub_moment(int m, double Y) const {
    const double R = r_.back();
    const double p = stub_exponent_ + m;
    return d_.back() * std::pow(R, m + 1) * std::pow(Y / R, p + 1.0) / (-(p + 1.0));
  }

  double cell_value(std::size_t i, double y) const {
    if (std::isnan(slope_[i])) {
      const double w = (y - r_[i]) / (r_[i + 1] - r_[i]);
      return d_[i] + w * (d_[i + 1] - d_[i]);
    }
    return d_[i] * std::pow(y / r_[i], slope_[i]);
  }
  double stub_tail(double r) const {
    // int_r^inf c (y/R)^kappa dy = c R (r/R)^{kappa+1} / -(kappa+1)
    const double R = r_.back();
    return d_.back() * R * std::pow(r / R, stub_exponent_ + 1.0) / (-(stub_exponent_ + 1.0));
  }

  std::vector<double> r_;
  std::vector<double> d_;
  std::optional<double> hint_;
  std::vector<double> slope_;
  double stub_exponent_ = -std::numeric_limits<double>::infinity();
};

using LevyMeasure = std::variant<NoJumps, StableTail, TabulatedDensity>;

struct BranchingMechanism {
  double a = 1.0;
  double b = 0.0;
  LevyMeasure levy = NoJumps{};
  bool normalized = false;
  std::string label;

  bool has_jumps() const { return !std::holds_alternative<NoJumps>(levy); }
  const StableTail* stable() const { return std::get_if<StableTail>(&levy); }
  const TabulatedDensity* tabulated() const { return std::get_if<TabulatedDensity>(&levy); }
  std::string kind() const {
    if (stable()) return "stable";
    if (tabulated()) return "tabulated";
    return "quadratic";
  }
};

struct Scaling {
  double time_factor = 1.0;   // a
  double space_factor = 1.0;  // a^{1/2}
  double mass_factor = 1.0;   // lambda*
};

struct NormalizedMechanism {
  BranchingMechanism mechanism;
  Scaling scaling;
};

// ---------------------------------------------------------------------------
// Factories

inline BranchingMechanism quadratic_mechanism(double a = 1.0, double b = 1.0) {
  BranchingMechanism m;
  m.a = a;
  m.b = b;
  m.label = "quadratic";
  m.normalized = (a == 1.0 && b == 1.0);
  return m;
}

inline BranchingMechanism stable_mechanism(double a, double b, double A1, double beta) {
  if (!(beta > 0.0 && beta < 1.0)) throw ConfigError("stable tail needs beta in (0,1)");
  if (!(A1 > 0.0)) throw ConfigError("stable tail needs A1 > 0");
  BranchingMechanism m;
  m.a = a;
  m.b = b;
  m.levy = StableTail{A1, beta};
  m.label = "stable";
  return m;
}

/// psi(l) = -a l + b l^2 + A2 l^{1+beta}; A1 recovered from A2 = A1 Gamma(1-beta)/beta.
inline BranchingMechanism stable_mechanism_from_A2(double a, double b, double A2, double beta) {
  return stable_mechanism(a, b, A2 * beta / std::tgamma(1.0 - beta), beta);
}

inline BranchingMechanism tabulated_mechanism(double a, double b, TabulatedDensity density) {
  BranchingMechanism m;
  m.a = a;
  m.b = b;
  m.levy = std::move(density);
  m.label = "tabulated";
  return m;
}

// ---------------------------------------------------------------------------
// Levy-measure helpers

/// int f(y) pi(dy). Stable tails go through the generic half-line quadrature.
template <class F>
auto levy_integrate(const LevyMeasure& levy, F&& f, const quad::Options& opt = {}) {
  using Value = std::decay_t<decltype(f(1.0))>;
  if (const auto* s = std::get_if<StableTail>(&levy)) {
    return quad::integrate_halfline([&](double y) { return f(y) * s->density(y); }, opt).value;
  }
  if (const auto* t = std::get_if<TabulatedDensity>(&levy)) return t->integrate(f, 0.0, std::numeric_limits<double>::infinity(), opt).value;
  return Value{};
}

/// int_lo^hi f(y) pi(dy) for 0 <= lo < hi <= inf.
template <class F>
auto levy_integrate_range(const LevyMeasure& levy, F&& f, double lo, double hi, const quad::Options& opt = {}) {
  using Value = std::decay_t<decltype(f(1.0))>;
  if (const auto* s = std::get_if<StableTail>(&levy)) {
    auto g = [&](double y) { return f(y) * s->density(y); };
    if (lo == 0.0 && std::isinf(hi)) return quad::integrate_halfline(g, opt).value;
    if (lo == 0.0) return quad::integrate_log_head(g, hi, opt).value;
    if (std::isinf(hi)) return quad::integrate_log_tail(g, lo, opt).value;
    return quad::integrate_log(g, lo, hi, opt).value;
  }
  if (const auto* t = std::get_if<TabulatedDensity>(&levy)) return t->integrate(f, lo, hi, opt).value;
  return Value{};
}

inline double levy_tail(const LevyMeasure& levy, double r) {
  if (const auto* s = std::get_if<StableTail>(&levy)) return s->tail(r);
  if (const auto* t = std::get_if<TabulatedDensity>(&levy)) return t->tail(r);
  return 0.0;
}

// ---------------------------------------------------------------------------
// psi and relatives

/// The jump part int (e^{-zy} - 1 + zy) pi(dy) by quadrature, whatever the kind.
inline cplx psi_jump_quadrature(const LevyMeasure& levy, cplx z) {
  return levy_integrate(levy, [z](double y) { return exp_neg_m1_plus(z * y); });
}

inline cplx eval_psi0(const BranchingMechanism& m, cplx z) {
  if (z.real() < -1e-12 * std::max(1.0, std::abs(z))) throw BranchError("psi evaluated off the right half-plane", z);
  cplx out = m.b * z * z;
  if (const auto* s = m.stable()) {
    out += s->A2() * pow_right(z, 1.0 + s->beta);
  } else if (const auto* t = m.tabulated()) {
    out += t->laplace_jump(z);
  }
  return out;
}

inline cplx eval_psi(const BranchingMechanism& m, cplx z) { return -m.a * z + eval_psi0(m, z); }

inline double eval_psi(const BranchingMechanism& m, double lambda) { return eval_psi(m, cplx{lambda, 0.0}).real(); }

/// Same value as eval_psi, but with the jump part always computed by quadrature.
inline cplx eval_psi_quadrature(const BranchingMechanism& m, cplx z) {
  return -m.a * z + m.b * z * z + psi_jump_quadrature(m.levy, z);
}

/// psi_1(z) = A2 z^{1+beta}.
inline cplx eval_psi1(double A2, double beta, cplx z) { return A2 * pow_right(z, 1.0 + beta); }

/// psi'(lambda) for real lambda >= 0.
inline double psi_derivative(const BranchingMechanism& m, double lambda) {
  double out = -m.a + 2.0 * m.b * lambda;
  if (const auto* s = m.stable()) {
    out += (1.0 + s->beta) * s->A2() * std::pow(lambda, s->beta);
  } else if (const auto* t = m.tabulated()) {
    out += t->integrate([lambda](double y) { return y * -std::expm1(-lambda * y); }).value;
  }
  return out;
}

/// sigma^2 = 2b + int r^2 pi(dr), or +inf when the second moment diverges.
inline double sigma2(const BranchingMechanism& m) {
  if (m.stable()) return std::numeric_limits<double>::infinity();
  if (const auto* t = m.tabulated()) {
    if (t->has_stub() && !(t->stub_exponent() < -3.0)) return std::numeric_limits<double>::infinity();
    return 2.0 * m.b + t->integrate([](double y) { return y * y; }).value;
  }
  return 2.0 * m.b;
}

// ---------------------------------------------------------------------------
// lambda* and normalization

/// Unique positive root of psi (convexity makes it unique).
inline double lambda_star(const BranchingMechanism& m) {
  auto f = [&m](double l) { return eval_psi(m, l); };
  double hi = 1.0;
  double fhi = f(hi);
  while (!(fhi > 0.0)) {
    hi *= 2.0;
    if (hi > 1e15) throw RootError("supercriticality probe failed: psi has no sign change on (0, 1e15]");
    fhi = f(hi);
  }
  double lo = hi;
  double flo = fhi;
  while (!(flo < 0.0)) {
    lo *= 0.5;
    if (lo < 1e-300) throw RootError("supercriticality probe failed: psi is not negative near 0+");
    flo = f(lo);
    if (flo == 0.0) return lo;
  }
  boost::uintmax_t iters = 200;
  const auto root = boost::math::tools::toms748_solve(f, lo, hi, flo, fhi, boost::math::tools::eps_tolerance<double>(46), iters);
  return 0.5 * (root.first + root.second);
}

/// psi~(l) = psi(lambda* l) / (a lambda*): psi~'(0+) = -1, psi~(1) = 0.
inline NormalizedMechanism normalize(const BranchingMechanism& m) {
  const double ls = lambda_star(m);
  NormalizedMechanism out;
  out.scaling = {m.a, std::sqrt(m.a), ls};
  BranchingMechanism n = m;
  n.a = 1.0;
  n.b = m.b * ls / m.a;
  if (const auto* s = m.stable()) {
    n.levy = StableTail{s->A1 * std::pow(ls, s->beta) / m.a, s->beta};
  } else if (const auto* t = m.tabulated()) {
    n.levy = t->scaled(ls, 1.0 / (m.a * ls));
  }
  n.normalized = true;
  out.mechanism = std::move(n);
  return out;
}

}  // namespace sbmlab
