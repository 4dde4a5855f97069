#pragma once

// Limit-law side: stable characteristic functions and samplers, regime
// classification in lambda, the normalizing factors d(t), and samplers for the
// Gaussian- and stable-mixture limit laws.

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "sbmlab/conditions.hpp"
#include "sbmlab/errors.hpp"
#include "sbmlab/numeric.hpp"
#include "sbmlab/rng.hpp"

namespace sbmlab {

// ---------------------------------------------------------------------------
// Stable laws S_alpha(nu, eta, mu):
//   log E e^{i theta X} = -nu^alpha |theta|^alpha (1 - i eta sign(theta) tan(pi alpha / 2)) + i mu theta,  alpha != 1
//                       = -nu |theta| (1 + i eta (2/pi) sign(theta) log|theta|) + i mu theta,             alpha == 1

struct StableParams {
  double alpha = 1.5;
  double nu = 1.0;
  double eta = 0.0;
  double mu = 0.0;
  bool strict = false;

  void validate() const {
    if (!(alpha > 0.0 && alpha < 2.0)) throw ConfigError("stable alpha must lie in (0, 2)");
    if (!(nu > 0.0)) throw ConfigError("stable scale nu must be positive");
    if (!(eta >= -1.0 && eta <= 1.0)) throw ConfigError("stable skewness eta must lie in [-1, 1]");
    if (strict && alpha != 1.0 && mu != 0.0) throw ConfigError("strictly stable law with alpha != 1 needs mu = 0");
    if (strict && alpha == 1.0 && eta != 0.0) throw ConfigError("strictly 1-stable law needs eta = 0");
  }
};

/// The strictly (1+beta)-stable law with E e^{i theta V} = exp((-i theta)^{1+beta}).
inline StableParams one_sided_stable(double beta) {
  return {1.0 + beta, std::pow(std::sin(kPi * beta / 2.0), 1.0 / (1.0 + beta)), 1.0, 0.0, true};
}

inline cplx stable_log_cf(const StableParams& p, double theta) {
  if (theta == 0.0) return {0.0, 0.0};
  const double a = std::abs(theta);
  const double sg = theta > 0.0 ? 1.0 : -1.0;
  if (p.alpha == 1.0) {
    return cplx{-p.nu * a, -p.nu * a * p.eta * (2.0 / kPi) * sg * std::log(a)} + cplx{0.0, p.mu * theta};
  }
  const double scale = std::pow(p.nu * a, p.alpha);
  return cplx{-scale, scale * p.eta * sg * std::tan(kPi * p.alpha / 2.0)} + cplx{0.0, p.mu * theta};
}

inline cplx stable_cf(const StableParams& p, double theta) { return std::exp(stable_log_cf(p, theta)); }

/// Chambers-Mallows-Stuck draw in the same parameterization (Weron's form for alpha = 1).
inline double sample_stable(const StableParams& p, Stream& rng) {
  const double V = kPi * (rng.uniform() - 0.5);
  const double W = rng.exponential();
  const double a = p.alpha;
  if (a == 1.0) {
    const double h = kPi / 2.0 + p.eta * V;
    const double X = (2.0 / kPi) * (h * std::tan(V) - p.eta * std::log((kPi / 2.0) * W * std::cos(V) / h));
    return p.nu * X + (2.0 / kPi) * p.eta * p.nu * std::log(p.nu) + p.mu;
  }
  const double t = p.eta * std::tan(kPi * a / 2.0);
  const double B = std::atan(t) / a;
  const double S = std::pow(1.0 + t * t, 1.0 / (2.0 * a));
  const double X = S * std::sin(a * (V + B)) / std::pow(std::cos(V), 1.0 / a) *
                   std::pow(std::cos(V - a * (V + B)) / W, (1.0 - a) / a);
  return p.nu * X + p.mu;
}

// ---------------------------------------------------------------------------
// Regimes in lambda

enum class RegimeKind { small, boundary, large, critical_sqrt2, degenerate };

/// Which limit theorem governs: finite variance, stable tail, or only the
/// moment condition of the large-|lambda| case.
enum class Theorem { finite_variance, stable_tail, moment_condition, none };

inline const char* to_string(RegimeKind k) {
  switch (k) {
    case RegimeKind::small: return "small";
    case RegimeKind::boundary: return "boundary";
    case RegimeKind::large: return "large";
    case RegimeKind::critical_sqrt2: return "critical_sqrt2";
    default: return "degenerate";
  }
}

inline const char* to_string(Theorem t) {
  switch (t) {
    case Theorem::finite_variance: return "finite_variance";
    case Theorem::stable_tail: return "stable_tail";
    case Theorem::moment_condition: return "moment_condition";
    default: return "none";
  }
}

struct Regime {
  RegimeKind kind = RegimeKind::degenerate;
  Theorem theorem = Theorem::none;
  double inner = kSqrt2 / 2.0;  // small/boundary threshold
  double outer = kSqrt2;
  std::optional<double> beta;   // stable-tail index when theorem == stable_tail
};

inline constexpr double kThresholdSlack = 1e-12;

/// Classifies lambda against the thresholds sqrt2/2 (finite variance),
/// sqrt2/(1+beta) (stable tail) and sqrt2. Throws when no theorem applies.
inline Regime regime_classify(double lambda, const ConditionReport& rep) {
  Regime r;
  const double a = std::abs(lambda);
  if (std::abs(a - kSqrt2) <= kThresholdSlack) {
    r.kind = RegimeKind::critical_sqrt2;
    return r;
  }
  if (a > kSqrt2) {
    r.kind = RegimeKind::degenerate;
    return r;
  }
  if (rep.a0.holds == Verdict::no) throw ConfigError("no theorem applies: A0 fails");
  auto need_a3 = [&rep](const char* what) {
    if (!rep.a3.ok()) throw ConfigError(std::string("no theorem applies: the ") + what + " regime needs A3");
  };
  if (rep.a1.ok() || rep.a2.ok()) {
    if (rep.a1.ok()) {
      r.theorem = Theorem::finite_variance;
      r.inner = kSqrt2 / 2.0;
    } else {
      r.theorem = Theorem::stable_tail;
      r.beta = rep.beta_hat.value();
      r.inner = kSqrt2 / (1.0 + *r.beta);
    }
    if (std::abs(a - r.inner) <= kThresholdSlack) {
      need_a3("boundary");
      r.kind = RegimeKind::boundary;
    } else if (a < r.inner) {
      r.kind = RegimeKind::small;
    } else {
      need_a3("large");
      r.kind = RegimeKind::large;
    }
    return r;
  }
  // Neither A1 nor A2: only the large-|lambda| result under a p-th moment with
  // sqrt2/|lambda| < p < 2/lambda^2, p <= 2.
  const double lo = kSqrt2 / a;
  const double hi = std::min({2.0 / (lambda * lambda), 2.0});
  const bool moment_ok = a > 0.0 && lo < std::min(hi, rep.tail_index);
  if (!moment_ok || !rep.a3.ok()) throw ConfigError("no theorem applies");
  r.kind = RegimeKind::large;
  r.theorem = Theorem::moment_condition;
  r.inner = a;
  return r;
}

/// log d(t) for the regime.
inline double log_normalizer(const Regime& r, double lambda, double t) {
  const double a = std::abs(lambda);
  if (!(t > 0.0)) throw ConfigError("normalizer needs t > 0");
  switch (r.kind) {
    case RegimeKind::small:
      if (!(a < r.inner)) throw ConfigError("lambda outside the small regime");
      if (r.theorem == Theorem::stable_tail) {
        const double b = r.beta.value();
        return 0.5 * b * (2.0 / (1.0 + b) - lambda * lambda) * t;
      }
      return 0.5 * (1.0 - lambda * lambda) * t;
    case RegimeKind::boundary:
      if (std::abs(a - r.inner) > kThresholdSlack) throw ConfigError("lambda is not on the boundary");
      if (r.theorem == Theorem::stable_tail) {
        const double b = r.beta.value();
        return std::log(t) / (2.0 * (1.0 + b)) + b * b / ((1.0 + b) * (1.0 + b)) * t;
      }
      return 0.25 * std::log(t) + 0.25 * t;
    case RegimeKind::large:
      if (!(a > r.inner - kThresholdSlack && a < kSqrt2)) throw ConfigError("lambda outside the large regime");
      return 3.0 * a / (2.0 * kSqrt2) * std::log(t) + 0.5 * (kSqrt2 - a) * (kSqrt2 - a) * t;
    case RegimeKind::critical_sqrt2:
      if (std::abs(a - kSqrt2) > kThresholdSlack) throw ConfigError("lambda is not sqrt2");
      return 0.5 * std::log(t);
    default: throw ConfigError("no normalizer for the degenerate regime");
  }
}

inline double normalizer(const Regime& r, double lambda, double t) { return std::exp(log_normalizer(r, lambda, t)); }

/// c_{lambda,beta} = A1 beta^{-2} Gamma(1-beta) / (1 - lambda^2 (1+beta)/2).
inline double c_lambda_beta(double A1, double beta, double lambda) {
  return A1 * std::tgamma(1.0 - beta) / (beta * beta) / (1.0 - 0.5 * lambda * lambda * (1.0 + beta));
}

/// c_beta = A1 beta^{-3} (1+beta) Gamma(1-beta) sqrt(2/pi).
inline double c_beta(double A1, double beta) {
  return A1 * (1.0 + beta) * std::tgamma(1.0 - beta) / (beta * beta * beta) * std::sqrt(2.0 / kPi);
}

struct MixtureConstants {
  double sigma2 = 2.0;  // finite-variance case
  double A1 = 0.0;      // stable-tail case
  double beta = 0.5;
};

/// One draw of the mixture limit: W picked uniformly from the proxies, times
/// the regime constant and an independent Gaussian or one-sided stable factor.
inline double mixture_limit_sample(const Regime& r, double lambda, const std::vector<double>& W, const MixtureConstants& c,
                                   Stream& rng) {
  if (W.empty()) throw ConfigError("mixture sampler needs at least one mixing sample");
  std::size_t i = static_cast<std::size_t>(rng.uniform() * static_cast<double>(W.size()));
  if (i >= W.size()) i = W.size() - 1;
  const double w = std::max(0.0, W[i]);
  if (r.theorem == Theorem::finite_variance) {
    if (r.kind == RegimeKind::small) return std::sqrt(c.sigma2 / (1.0 - lambda * lambda) * w) * rng.normal();
    if (r.kind == RegimeKind::boundary) return std::pow(2.0, 0.75) * std::pow(kPi, -0.25) * std::sqrt(c.sigma2 * w) * rng.normal();
  }
  if (r.theorem == Theorem::stable_tail) {
    const double e = 1.0 / (1.0 + c.beta);
    const auto V = one_sided_stable(c.beta);
    if (r.kind == RegimeKind::small) return std::pow(c_lambda_beta(c.A1, c.beta, lambda) * w, e) * sample_stable(V, rng);
    if (r.kind == RegimeKind::boundary) return std::pow(c_beta(c.A1, c.beta) * w, e) * sample_stable(V, rng);
  }
  throw ConfigError(std::string("no mixture limit law for the ") + to_string(r.kind) + " regime");
}

}  // namespace sbmlab
