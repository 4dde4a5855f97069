#pragma once

// Deterministic machinery at lambda = 0: closed-form log-Laplace cumulants of
// the quadratic and unit-stable families, the fixed-point equation for the
// log characteristic function of the martingale limit, and the exact
// finite-t characteristic function of the tail fluctuation.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "sbmlab/errors.hpp"
#include "sbmlab/limits.hpp"
#include "sbmlab/mechanism.hpp"
#include "sbmlab/numeric.hpp"
#include "sbmlab/ode.hpp"
#include "sbmlab/quadrature.hpp"

namespace sbmlab {

/// Families with closed-form cumulants: psi(l) = -l + l^2, and
/// psi(l) = -l + l^{1+beta}.
struct Family {
  enum Kind { quadratic, stable } kind = quadratic;
  double beta = 1.0;

  static Family make_quadratic() { return {quadratic, 1.0}; }
  static Family make_stable(double beta) {
    if (!(beta > 0.0 && beta < 1.0)) throw ConfigError("stable family needs beta in (0,1)");
    return {stable, beta};
  }
  std::string name() const { return kind == quadratic ? "quadratic" : "stable(" + std::to_string(beta) + ")"; }
  BranchingMechanism mechanism() const {
    if (kind == quadratic) return quadratic_mechanism(1.0, 1.0);
    auto m = stable_mechanism_from_A2(1.0, 0.0, 1.0, beta);
    m.normalized = true;
    return m;
  }
  /// The small-|lambda| regime of the family, which fixes d(t) at lambda = 0.
  Regime small_regime() const {
    Regime r;
    r.kind = RegimeKind::small;
    if (kind == quadratic) {
      r.theorem = Theorem::finite_variance;
    } else {
      r.theorem = Theorem::stable_tail;
      r.beta = beta;
      r.inner = kSqrt2 / (1.0 + beta);
    }
    return r;
  }
};

/// Recognizes a normalized mechanism that belongs to a closed-form family.
inline std::optional<Family> family_of(const BranchingMechanism& m, double tol = 1e-10) {
  if (std::abs(m.a - 1.0) > tol) return std::nullopt;
  if (!m.has_jumps() && std::abs(m.b - 1.0) <= tol) return Family::make_quadratic();
  if (const auto* s = m.stable()) {
    if (m.b == 0.0 && std::abs(s->A2() - 1.0) <= tol) return Family::make_stable(s->beta);
  }
  return std::nullopt;
}

/// u_t(z) solving u' = -psi(u), u_0 = z, Re z >= 0.
inline cplx cumulant_u_t(const Family& f, double t, cplx z) {
  if (z.real() < -1e-12 * std::max(1.0, std::abs(z))) throw BranchError("cumulant argument left the right half-plane", z);
  if (z == cplx{0.0, 0.0}) return z;
  if (f.kind == Family::quadratic) {
    // z e^t / (1 + z (e^t - 1)) = z / (e^{-t} + z (1 - e^{-t}))
    return z / (std::exp(-t) - z * std::expm1(-t));
  }
  const double b = f.beta;
  const double decay = std::exp(-b * t);
  const cplx w = pow_right(z, -b) * decay - std::expm1(-b * t);
  return pow_right(w, -1.0 / b);
}

/// Phi(z) = lim_t u_t(z e^{-t}), the Laplace exponent of the martingale limit at lambda = 0.
inline cplx limit_cumulant_Phi(const Family& f, cplx z) {
  if (z.real() < -1e-12 * std::max(1.0, std::abs(z))) throw BranchError("cumulant argument left the right half-plane", z);
  if (z == cplx{0.0, 0.0}) return z;
  if (f.kind == Family::quadratic) return z / (1.0 + z);
  return z * pow_right(1.0 + pow_right(z, f.beta), -1.0 / f.beta);
}

// ---------------------------------------------------------------------------
// Grid functions

struct ComplexGridFunction {
  enum class Role { W0, CF_t, limitCF, ECF };
  std::vector<double> grid;
  std::vector<cplx> values;
  std::string mechanism_id;
  Role role = Role::W0;
  std::optional<double> t;

  std::size_t size() const { return grid.size(); }
};

inline const char* to_string(ComplexGridFunction::Role r) {
  switch (r) {
    case ComplexGridFunction::Role::W0: return "W0";
    case ComplexGridFunction::Role::CF_t: return "CF_t";
    case ComplexGridFunction::Role::limitCF: return "limitCF";
    default: return "ECF";
  }
}

/// 2n+1 equally spaced nodes on [-theta_max, theta_max], 0 included.
inline std::vector<double> symmetric_grid(double theta_max, int n) {
  std::vector<double> g(2 * n + 1);
  for (int i = -n; i <= n; ++i) g[i + n] = theta_max * i / n;
  g[n] = 0.0;
  return g;
}

// ---------------------------------------------------------------------------
// Fixed point at lambda = 0
//
//   h(theta) = i theta + int_0^inf e^s psi0(-h(e^{-s} theta)) ds
//            = i theta + theta int_0^theta psi0(-h(u)) u^{-2} du.
//
// With r = h - i theta = theta I and I(theta) = int_0^theta psi0(-h)/u^2 du,
// the solver integrates dI/dx = psi0(-theta (i + I)) / theta in x = log theta.
// Below theta0 it uses a Picard seed started from h = i theta.

class W0Solution {
 public:
  W0Solution(BranchingMechanism m, double theta_max, double tol) : mech_(std::move(m)), theta_max_(theta_max), tol_(tol) {
    if (!mech_.normalized) throw ConfigError("solve_W0 needs a normalized mechanism");
    if (!(theta_max > 0.0)) throw ConfigError("theta_max must be positive");
    if (const auto* s = mech_.stable()) closed_A2_ = s->A2();
    choose_theta0();
    integrate();
  }

  const BranchingMechanism& mechanism() const { return mech_; }
  double theta0() const { return theta0_; }
  double theta_max() const { return theta_max_; }
  long ode_steps() const { return static_cast<long>(ode_.segments.size()); }

  /// r(theta) = h(theta) - i theta, accurate in relative terms at small |theta|.
  cplx r(double theta) const {
    if (theta < 0.0) return std::conj(r(-theta));
    if (theta == 0.0) return {0.0, 0.0};
    if (theta > theta_max_ * (1.0 + 1e-12)) throw ConfigError("theta beyond the solved range");
    if (theta < theta0_) return seed(theta);
    return theta * ode_(std::log(std::min(theta, theta_max_)));
  }

  cplx h(double theta) const { return cplx{0.0, theta} + r(theta); }

  ComplexGridFunction on_grid(const std::vector<double>& grid) const {
    ComplexGridFunction g;
    g.grid = grid;
    g.role = ComplexGridFunction::Role::W0;
    g.mechanism_id = mech_.label.empty() ? mech_.kind() : mech_.label;
    g.values.reserve(grid.size());
    for (double th : grid) g.values.push_back(h(th));
    return g;
  }

  /// |h(theta) - i theta - theta int_0^theta psi0(-h(u))/u^2 du| at each
  /// positive node, with the integral accumulated by quadrature of the
  /// interpolant between nodes.
  std::vector<double> residual(const std::vector<double>& nodes) const {
    std::vector<double> pos;
    for (double th : nodes)
      if (th > 0.0) pos.push_back(th);
    std::sort(pos.begin(), pos.end());
    std::vector<double> out;
    cplx J{0.0, 0.0};
    double at = 0.0;
    auto integrand = [this](double u) { return eval_psi0(mech_, -h(u)) / (u * u); };
    quad::Options opt;
    opt.abs_tol = 1e-15;
    opt.rel_tol = 1e-12;
    for (double th : pos) {
      if (at == 0.0) {
        // The seed region, integrated toward 0 in log u.
        const double split = std::min(th, theta0_);
        J += quad::integrate_log_head([&](double u) { return integrand(u); }, split, opt).value;
        at = split;
      }
      if (th > at) {
        // Split at theta0 where the representation changes.
        if (at < theta0_ && th > theta0_) {
          J += quad::integrate(integrand, at, theta0_, opt).value;
          at = theta0_;
        }
        J += quad::integrate(integrand, at, th, opt).value;
        at = th;
      }
      out.push_back(std::abs(r(th) - th * J));
    }
    return out;
  }

 private:
  /// Closed-form r_1(theta) = theta int_0^theta psi0(-i u)/u^2 du.
  cplx picard1(double theta) const {
    cplx out = -mech_.b * theta * theta;
    if (closed_A2_) out += (*closed_A2_ / mech_.stable()->beta) * pow_right(cplx{0.0, -theta}, 1.0 + mech_.stable()->beta);
    return out;
  }

  bool closed_seed() const { return closed_A2_.has_value() || !mech_.has_jumps(); }

  /// r below theta0: the second Picard iterate when the first is closed form.
  /// Otherwise r = 0, i.e. h = i theta, and theta0 sits where the dropped
  /// integral is negligible.
  cplx seed(double theta) const {
    if (!closed_seed()) return {0.0, 0.0};
    quad::Options opt;
    opt.abs_tol = 1e-300;
    opt.rel_tol = 1e-12;
    auto f = [this](double u) { return eval_psi0(mech_, -(cplx{0.0, u} + picard1(u))) / (u * u); };
    return theta * quad::integrate_log_head(f, theta, opt).value;
  }

  /// Estimated error of the seed in I(theta), which the solution carries
  /// forward as theta * dI.
  double seed_error(double th) const {
    const cplx it{0.0, th};
    try {
      if (closed_seed()) {
        // The last Picard step, summed against u^{-2} over (0, theta).
        return 2.0 * std::abs(eval_psi0(mech_, -(it + seed(th))) - eval_psi0(mech_, -(it + picard1(th)))) / th;
      }
      // int_0^theta psi0(-iu)/u^2 du for |psi0(-iu)|/u ~ u^p near 0.
      const double f1 = std::abs(eval_psi0(mech_, -it)) / th;
      const double f2 = std::abs(eval_psi0(mech_, -0.5 * it)) / (0.5 * th);
      const double p = std::clamp(std::log2(f1 / f2), 0.05, 1.0);
      return 2.0 * f1 / p;
    } catch (const BranchError&) {
      // Far outside the seed's range the iterates leave the half-plane.
      return std::numeric_limits<double>::infinity();
    }
  }

  /// Largest dyadic theta0 at which the seed's carried error stays below tol/10.
  void choose_theta0() {
    double th = std::min(0.5, theta_max_);
    for (int i = 0; i < 2000 && th > 1e-300; ++i) {
      if (theta_max_ * seed_error(th) < 0.1 * tol_) break;
      th *= 0.5;
    }
    theta0_ = th;
  }

  void integrate() {
    const double x0 = std::log(theta0_);
    const double x1 = std::log(theta_max_);
    const cplx I0 = seed(theta0_) / theta0_;
    if (x1 <= x0) {
      ode_ = ode::dopri5<cplx>([](double, cplx) { return cplx{}; }, x0, I0, x0 + 1e-9);
      return;
    }
    auto rhs = [this](double x, cplx I) {
      const double th = std::exp(x);
      return eval_psi0(mech_, -th * (cplx{0.0, 1.0} + I)) / th;
    };
    ode::Options opt;
    opt.rel_tol = std::clamp(tol_ * 1e-2, 1e-13, 1e-10);
    opt.abs_tol = std::clamp(tol_ * 1e-3, 1e-15, 1e-12);
    opt.h_max = 0.05;
    ode_ = ode::dopri5<cplx>(rhs, x0, I0, x1, opt);
  }

  BranchingMechanism mech_;
  double theta_max_;
  double tol_;
  double theta0_ = 0.0;
  std::optional<double> closed_A2_;
  ode::Solution<cplx> ode_;
};

/// Solves the fixed point on [0, theta_max] and checks the integral-equation
/// residual on a grid of 2n+1 nodes; throws ResidualError above tol.
inline W0Solution solve_W0(const BranchingMechanism& m, double theta_max, double tol = 1e-8, int n = 200) {
  W0Solution sol(m, theta_max, tol);
  const auto grid = symmetric_grid(theta_max, n);
  const auto res = sol.residual(grid);
  std::vector<double> pos;
  for (double th : grid)
    if (th > 0.0) pos.push_back(th);
  const double worst = *std::max_element(res.begin(), res.end());
  if (!(worst <= tol)) {
    throw ResidualError("fixed-point residual " + std::to_string(worst) + " exceeds tolerance " + std::to_string(tol), pos, res);
  }
  return sol;
}

/// CF of d(t) (W_inf(0) - W_t(0)) started from unit mass:
///   exp(-u_t(-r(theta d2))),  d2 = d(t) e^{-t}.
inline ComplexGridFunction tail_fluctuation_cf(const Family& f, const W0Solution& w0, double t, const std::vector<double>& grid) {
  ComplexGridFunction out;
  out.grid = grid;
  out.role = ComplexGridFunction::Role::CF_t;
  out.t = t;
  out.mechanism_id = f.name();
  const double d2 = std::exp(log_normalizer(f.small_regime(), 0.0, t) - t);
  for (double th : grid) {
    const cplx g = w0.r(th * d2);
    if (g.real() > 1e-12 * std::max(1.0, std::abs(g))) throw BranchError("tail fluctuation exponent left the half-plane", -g);
    out.values.push_back(std::exp(-cumulant_u_t(f, t, -g)));
  }
  return out;
}

/// The lambda = 0 limit CFs: exp(-Phi(theta^2)) in the quadratic case and
/// exp(-Phi(-c (-i theta)^{1+beta})), c = A1 beta^{-2} Gamma(1-beta), in the stable case.
inline ComplexGridFunction limit_fluctuation_cf(const Family& f, const std::vector<double>& grid) {
  ComplexGridFunction out;
  out.grid = grid;
  out.role = ComplexGridFunction::Role::limitCF;
  out.mechanism_id = f.name();
  for (double th : grid) {
    if (f.kind == Family::quadratic) {
      out.values.push_back(std::exp(-limit_cumulant_Phi(f, cplx{th * th, 0.0})));
    } else {
      const double A1 = f.beta / std::tgamma(1.0 - f.beta);
      const double c = c_lambda_beta(A1, f.beta, 0.0);
      const cplx z = -c * pow_right(cplx{0.0, -th}, 1.0 + f.beta);
      out.values.push_back(std::exp(-limit_cumulant_Phi(f, z)));
    }
  }
  return out;
}

}  // namespace sbmlab
