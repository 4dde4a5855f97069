#pragma once

// Numerical checks of the standing conditions on a normalized mechanism:
//
//   A0  int^inf ( int_{lambda*}^xi psi(u) du )^{-1/2} dxi < inf
//   A1  int_1^inf r pibar(r) dr < inf
//   A2  |pibar(r) - A1 r^{-(1+beta)}| <= c r^{-(1+beta+delta)} for large r, 0 < beta < beta+delta < 1
//   A3  psi0(l) >= c l^{1+gamma} for large l; for b = 0 equivalently
//       int_0^1 pibar(r) (r ^ l) dr >= c l^{1-gamma} for small l
//
// plus the tail-moment conditions used to pick a regime.

#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "sbmlab/mechanism.hpp"
#include "sbmlab/quadrature.hpp"

namespace sbmlab {

enum class Verdict { no, yes, unknown };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::yes: return "true";
    case Verdict::no: return "false";
    default: return "unknown";
  }
}

struct ConditionCheck {
  Verdict holds = Verdict::unknown;
  std::map<std::string, double> evidence;
  bool ok() const { return holds == Verdict::yes; }
};

struct ConditionReport {
  ConditionCheck a0, a1, a2, a3;
  bool moment_rlogr = false;
  bool moment_rlog2r = false;
  /// sup{p : int_(1,inf) r^p pi(dr) < inf}; +inf when every moment is finite.
  double tail_index = std::numeric_limits<double>::infinity();
  std::optional<double> A1_hat, beta_hat, delta_hat;
  std::optional<double> gamma;

  /// int_(1,inf) r^p pi(dr) < inf. At p equal to the index the pure power law diverges.
  bool p_moment(double p) const { return p < tail_index; }
};

namespace detail {

inline double least_squares_slope(const std::vector<double>& x, const std::vector<double>& y, double* intercept = nullptr,
                                  double* max_residual = nullptr) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double icpt = (sy - slope * sx) / n;
  if (intercept) *intercept = icpt;
  if (max_residual) {
    double r = 0;
    for (std::size_t i = 0; i < x.size(); ++i) r = std::max(r, std::abs(y[i] - icpt - slope * x[i]));
    *max_residual = r;
  }
  return slope;
}

inline double tail_index_of(const BranchingMechanism& m) {
  if (const auto* s = m.stable()) return 1.0 + s->beta;
  if (const auto* t = m.tabulated()) return t->has_stub() ? -t->stub_exponent() - 1.0 : std::numeric_limits<double>::infinity();
  return std::numeric_limits<double>::infinity();
}

// A0: with Psi(xi) = int_{lambda*}^xi psi, integrate Psi^{-1/2} from 2 lambda* in
// u = log xi up to u = 40, then extrapolate the tail from the local growth
// exponent k of Psi (the tail converges iff k > 2).
inline ConditionCheck check_a0(const BranchingMechanism& m) {
  ConditionCheck c;
  const double ls = 1.0;  // normalized
  const double u0 = std::log(2.0 * ls);
  const double u1 = 40.0;
  const int n = 600;
  const double h = (u1 - u0) / n;
  auto psi_u = [&m](double u) {
    const double xi = std::exp(u);
    return eval_psi(m, xi) * xi;  // d Psi / du
  };
  std::vector<double> Psi(n + 1), integrand(n + 1);
  Psi[0] = quad::integrate([&m](double x) { return eval_psi(m, x); }, ls, 2.0 * ls).value;
  double prev = psi_u(u0);
  for (int i = 0; i < n; ++i) {
    const double a = u0 + i * h;
    const double mid = psi_u(a + 0.5 * h);
    const double next = psi_u(a + h);
    Psi[i + 1] = Psi[i] + h / 6.0 * (prev + 4.0 * mid + next);
    prev = next;
  }
  for (int i = 0; i <= n; ++i) integrand[i] = std::exp(u0 + i * h) / std::sqrt(Psi[i]);
  double body = 0.0;
  for (int i = 0; i < n; ++i) body += 0.5 * h * (integrand[i] + integrand[i + 1]);
  const int back = 15;
  const double k = (std::log(Psi[n]) - std::log(Psi[n - back])) / (back * h);
  c.evidence["integral_to_u40"] = body;
  c.evidence["growth_exponent"] = k;
  if (k > 2.05) {
    const double tail = integrand[n] / (0.5 * k - 1.0);
    c.evidence["tail_estimate"] = tail;
    c.holds = Verdict::yes;
  } else if (k < 1.95) {
    c.holds = Verdict::no;
  } else {
    c.holds = Verdict::unknown;
  }
  return c;
}

inline ConditionCheck check_a1(const BranchingMechanism& m, double tail_index) {
  ConditionCheck c;
  c.evidence["tail_index"] = tail_index;
  if (tail_index > 2.0) {
    c.holds = Verdict::yes;
    if (m.has_jumps()) {
      // int_1^inf r pibar(r) dr = int_(1,inf) (y^2 - 1)/2 pi(dy)
      c.evidence["int_r_pibar"] =
          levy_integrate_range(m.levy, [](double y) { return 0.5 * (y * y - 1.0); }, 1.0, std::numeric_limits<double>::infinity());
    } else {
      c.evidence["int_r_pibar"] = 0.0;
    }
  } else {
    c.holds = Verdict::no;
  }
  return c;
}

// A2: log-log regression of pibar on the dyadic window [R, 2^16 R], fitted on
// its upper half.
inline ConditionCheck check_a2(const BranchingMechanism& m, ConditionReport& rep, double R = 1.0, double log_tol = 0.01) {
  ConditionCheck c;
  if (const auto* s = m.stable()) {
    c.holds = Verdict::yes;
    rep.A1_hat = s->A1;
    rep.beta_hat = s->beta;
    rep.delta_hat = 0.5 * (1.0 - s->beta);
    c.evidence["exact"] = 1.0;
    c.evidence["A1_hat"] = s->A1;
    c.evidence["beta_hat"] = s->beta;
    c.evidence["delta_hat"] = *rep.delta_hat;
    return c;
  }
  if (!m.has_jumps()) {
    c.holds = Verdict::no;
    c.evidence["pibar_at_R"] = 0.0;
    return c;
  }
  std::vector<double> lr, lp;
  for (int j = 8; j <= 16; ++j) {
    const double r = R * std::ldexp(1.0, j);
    const double p = levy_tail(m.levy, r);
    if (!(p > 0.0)) {
      c.holds = Verdict::no;
      c.evidence["vanishing_tail_at"] = r;
      return c;
    }
    lr.push_back(std::log(r));
    lp.push_back(std::log(p));
  }
  double icpt = 0, resid = 0;
  const double slope = least_squares_slope(lr, lp, &icpt, &resid);
  const double beta = -slope - 1.0;
  const double A1 = std::exp(icpt);
  c.evidence["window_lo"] = R;
  c.evidence["window_hi"] = R * 65536.0;
  c.evidence["beta_fit"] = beta;
  c.evidence["A1_fit"] = A1;
  c.evidence["log_residual"] = resid;
  if (resid > log_tol || !(beta > 0.0 && beta < 1.0)) {
    c.holds = Verdict::no;
    return c;
  }
  // Relative deviation from the fitted power law across the whole window; its
  // decay rate estimates delta.
  std::vector<double> lx, ldev;
  for (int j = 0; j <= 16; ++j) {
    const double r = R * std::ldexp(1.0, j);
    const double dev = std::abs(levy_tail(m.levy, r) * std::pow(r, 1.0 + beta) / A1 - 1.0);
    if (dev > 1e-9) {
      lx.push_back(std::log(r));
      ldev.push_back(std::log(dev));
    }
  }
  double delta = 0.5 * (1.0 - beta);
  if (lx.size() >= 3) delta = std::min(delta, -least_squares_slope(lx, ldev));
  c.evidence["delta_fit"] = delta;
  if (!(delta > 0.0)) {
    c.holds = Verdict::no;
    return c;
  }
  c.holds = Verdict::yes;
  rep.A1_hat = A1;
  rep.beta_hat = beta;
  rep.delta_hat = delta;
  return c;
}

// A3 for b = 0: I(l) = int_0^1 pibar(r) (r ^ l) dr = int pi(dy) G(min(y, 1)),
// G(u) = u^2/2 (u <= l), l u - l^2/2 (u > l). The log-log slope s of I over
// small l gives the largest admissible gamma <= 1 - s.
inline ConditionCheck check_a3(const BranchingMechanism& m, ConditionReport& rep) {
  ConditionCheck c;
  if (m.b > 0.0) {
    c.holds = Verdict::yes;
    rep.gamma = 1.0;
    c.evidence["b"] = m.b;
    c.evidence["gamma"] = 1.0;
    return c;
  }
  if (!m.has_jumps()) {
    c.holds = Verdict::no;
    return c;
  }
  const double above_one = levy_tail(m.levy, 1.0);
  std::vector<double> ll, lI;
  for (int e = 2; e <= 8; ++e) {
    const double l = std::pow(10.0, -e);
    const double I = levy_integrate_range(m.levy, [](double y) { return 0.5 * y * y; }, 0.0, l) +
                     levy_integrate_range(m.levy, [l](double y) { return l * y - 0.5 * l * l; }, l, 1.0) +
                     (l - 0.5 * l * l) * above_one;
    if (!(I > 0.0)) {
      c.holds = Verdict::no;
      c.evidence["vanishing_at"] = l;
      return c;
    }
    ll.push_back(std::log(l));
    lI.push_back(std::log(I));
  }
  const double s = least_squares_slope(ll, lI);
  c.evidence["slope"] = s;
  double best = 0.0;
  for (int g = 1; g <= 10; ++g) {
    const double gamma = 0.1 * g;
    if (gamma <= 1.0 - s + 0.01) best = gamma;
  }
  if (best > 0.0) {
    c.holds = Verdict::yes;
    rep.gamma = best;
    c.evidence["gamma"] = best;
  } else {
    c.holds = Verdict::no;
  }
  return c;
}

}  // namespace detail

/// Checks every condition on a normalized mechanism.
inline ConditionReport check_conditions(const BranchingMechanism& m) {
  ConditionReport rep;
  rep.tail_index = detail::tail_index_of(m);
  rep.moment_rlogr = rep.tail_index > 1.0;
  rep.moment_rlog2r = rep.tail_index > 1.0;
  rep.a0 = detail::check_a0(m);
  rep.a1 = detail::check_a1(m, rep.tail_index);
  rep.a2 = detail::check_a2(m, rep);
  rep.a3 = detail::check_a3(m, rep);
  return rep;
}

inline nlohmann::json to_json(const ConditionCheck& c) {
  nlohmann::json j;
  j["holds"] = to_string(c.holds);
  j["evidence"] = c.evidence;
  return j;
}

inline nlohmann::json to_json(const ConditionReport& r) {
  nlohmann::json j;
  j["a0"] = to_json(r.a0);
  j["a1"] = to_json(r.a1);
  j["a2"] = to_json(r.a2);
  j["a3"] = to_json(r.a3);
  j["moment_rlogr"] = r.moment_rlogr;
  j["moment_rlog2r"] = r.moment_rlog2r;
  j["tail_index"] = std::isinf(r.tail_index) ? nlohmann::json("inf") : nlohmann::json(r.tail_index);
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  j["A1_hat"] = opt(r.A1_hat);
  j["beta_hat"] = opt(r.beta_hat);
  j["delta_hat"] = opt(r.delta_hat);
  j["gamma"] = opt(r.gamma);
  return j;
}

}  // namespace sbmlab
