#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "sbmlab/conditions.hpp"
#include "sbmlab/limits.hpp"
#include "sbmlab/stats.hpp"
#include "test_util.hpp"

using namespace sbmlab;
using sbmlab::testing::unit_quadratic;
using sbmlab::testing::unit_stable;

namespace {

std::vector<double> theta_grid(double hi, int n) {
  std::vector<double> g;
  for (int i = -n; i <= n; ++i) g.push_back(hi * i / n);
  return g;
}

std::vector<double> draws(const StableParams& p, std::size_t n, std::uint64_t seed) {
  Stream rng(seed, 0);
  std::vector<double> x(n);
  for (auto& v : x) v = sample_stable(p, rng);
  return x;
}

/// W_inf(0) for the unit quadratic: a Poisson(1) number of Exp(1) masses.
std::vector<double> exact_w_quadratic(std::size_t n, std::uint64_t seed) {
  Stream rng(seed, 1);
  std::vector<double> w(n);
  for (auto& v : w) {
    const auto k = rng.poisson(1.0);
    v = k == 0 ? 0.0 : rng.gamma(static_cast<double>(k), 1.0);
  }
  return w;
}

}  // namespace

TEST(StableCf, Cauchy) {
  const StableParams p{1.0, 1.0, 0.0, 0.0, true};
  EXPECT_NEAR(std::abs(stable_cf(p, 1.0) - std::exp(-1.0)), 0.0, 1e-15);
}

TEST(StableCf, OneSidedMatchesPower) {
  const auto p = one_sided_stable(0.5);
  for (double th : {0.1, 0.7, 1.0, 2.5, 5.0}) {
    const cplx want = std::exp(std::pow(cplx{0.0, -th}, 1.5));
    EXPECT_LT(std::abs(stable_cf(p, th) - want), 1e-13) << th;
    EXPECT_LT(std::abs(stable_cf(p, -th) - std::conj(want)), 1e-13) << th;
  }
}

TEST(StableCf, Hermitian) {
  for (const StableParams& p : {StableParams{1.3, 0.7, -0.4, 0.2, false}, StableParams{1.0, 2.0, 0.5, 1.0, false}}) {
    for (double th : {0.3, 1.7, 4.0}) EXPECT_LT(std::abs(stable_cf(p, -th) - std::conj(stable_cf(p, th))), 1e-14);
  }
}

TEST(StableParams, Validation) {
  EXPECT_THROW((StableParams{2.0, 1.0, 0.0, 0.0, false}.validate()), ConfigError);
  EXPECT_THROW((StableParams{1.5, 1.0, 0.0, 1.0, true}.validate()), ConfigError);
  EXPECT_THROW((StableParams{1.0, 1.0, 0.3, 0.0, true}.validate()), ConfigError);
  EXPECT_NO_THROW(one_sided_stable(0.5).validate());
}

TEST(StableSampler, CauchyMedian) {
  const auto x = draws({1.0, 1.0, 0.0, 0.0, true}, 100000, 11);
  EXPECT_NEAR(stats::median(x), 0.0, 0.02);
}

TEST(StableSampler, EcfMatchesCf) {
  const auto p = one_sided_stable(0.5);
  const auto x = draws(p, 100000, 12);
  EXPECT_LE(stats::cf_distance(x, theta_grid(5.0, 50), [&](double th) { return stable_cf(p, th); }), 0.02);
}

TEST(StableSampler, GeneralSkewedEcf) {
  for (const StableParams& p : {StableParams{1.2, 0.8, -0.6, 0.3, false}, StableParams{1.0, 1.3, 0.7, -0.5, false}}) {
    const auto x = draws(p, 100000, 13);
    EXPECT_LE(stats::cf_distance(x, theta_grid(4.0, 40), [&](double th) { return stable_cf(p, th); }), 0.02);
  }
}

TEST(StableSampler, ScalingIdentity) {
  const auto p = one_sided_stable(0.5);
  const std::size_t n = 100000;
  Stream rng(14, 0);
  std::vector<double> sums(n);
  for (auto& s : sums) {
    double acc = 0.0;
    for (int j = 0; j < 4; ++j) acc += sample_stable(p, rng);
    s = acc / std::pow(4.0, 1.0 / p.alpha);
  }
  EXPECT_LE(stats::ks_distance(sums, draws(p, n, 15)), 0.02);
}

TEST(Regime, Examples) {
  const auto quad = check_conditions(unit_quadratic());
  const auto stab = check_conditions(unit_stable(0.5));
  auto r = regime_classify(0.5, quad);
  EXPECT_EQ(r.kind, RegimeKind::small);
  EXPECT_EQ(r.theorem, Theorem::finite_variance);
  r = regime_classify(0.9, stab);
  EXPECT_EQ(r.kind, RegimeKind::small);
  EXPECT_EQ(r.theorem, Theorem::stable_tail);
  EXPECT_NEAR(r.inner, 0.942809041582063, 1e-12);
  r = regime_classify(kSqrt2 / 2.0, quad);
  EXPECT_EQ(r.kind, RegimeKind::boundary);
  r = regime_classify(-1.0, quad);
  EXPECT_EQ(r.kind, RegimeKind::large);
  EXPECT_EQ(regime_classify(kSqrt2, quad).kind, RegimeKind::critical_sqrt2);
  EXPECT_EQ(regime_classify(1.5, quad).kind, RegimeKind::degenerate);
}

TEST(Regime, Partition) {
  // Every lambda below sqrt2 lands in exactly one of small, boundary, large,
  // and the classes are ordered in |lambda|.
  const auto quad = check_conditions(unit_quadratic());
  const auto stab = check_conditions(unit_stable(0.5));
  for (const auto* rep : {&quad, &stab}) {
    int last = 0;
    for (int i = 0; i < 1400; ++i) {
      const double lam = i * 1e-3;
      const auto r = regime_classify(lam, *rep);
      const int rank = r.kind == RegimeKind::small ? 0 : r.kind == RegimeKind::boundary ? 1 : 2;
      ASSERT_GE(rank, last) << lam;
      last = rank;
      EXPECT_EQ(regime_classify(-lam, *rep).kind, r.kind);
    }
    EXPECT_EQ(last, 2);
  }
}

TEST(Regime, NoTheorem) {
  ConditionReport rep;
  rep.a0.holds = Verdict::yes;
  rep.a1.holds = Verdict::no;
  rep.a2.holds = Verdict::no;
  rep.a3.holds = Verdict::yes;
  rep.tail_index = 1.05;
  EXPECT_THROW(regime_classify(0.3, rep), ConfigError);
  rep.tail_index = 1.9;
  EXPECT_EQ(regime_classify(1.2, rep).theorem, Theorem::moment_condition);
  EXPECT_EQ(regime_classify(0.8, rep).kind, RegimeKind::large);
  EXPECT_THROW(regime_classify(0.72, rep), ConfigError);
}

TEST(Normalizer, Examples) {
  const auto quad = check_conditions(unit_quadratic());
  const auto stab = check_conditions(unit_stable(0.5));
  EXPECT_NEAR(normalizer(regime_classify(0.0, quad), 0.0, 10.0), std::exp(5.0), 1e-9 * std::exp(5.0));
  EXPECT_NEAR(normalizer(regime_classify(0.0, stab), 0.0, 12.0), std::exp(4.0), 1e-9 * std::exp(4.0));
  const double t = std::exp(1.0);
  const double d5 = std::pow(t, 3.0 / (2.0 * kSqrt2)) * std::exp(0.5 * (kSqrt2 - 1.0) * (kSqrt2 - 1.0) * t);
  EXPECT_NEAR(normalizer(regime_classify(-1.0, quad), -1.0, t), d5, 1e-12 * d5);
  EXPECT_NEAR(log_normalizer(regime_classify(kSqrt2, quad), kSqrt2, 9.0), 0.5 * std::log(9.0), 1e-15);
  EXPECT_THROW(log_normalizer(regime_classify(0.0, quad), 0.8, 1.0), ConfigError);
  EXPECT_THROW(log_normalizer(regime_classify(1.5, quad), 1.5, 1.0), ConfigError);
}

TEST(Normalizer, ExponentialRateContinuity) {
  // The linear-in-t rate of the small regime tends to the boundary rate.
  const auto quad = check_conditions(unit_quadratic());
  const auto stab = check_conditions(unit_stable(0.5));
  for (const auto* rep : {&quad, &stab}) {
    const auto rb = regime_classify(regime_classify(0.0, *rep).inner, *rep);
    const double lam = rb.inner - 1e-9;
    const auto rs = regime_classify(lam, *rep);
    const double small_rate = log_normalizer(rs, lam, 2.0) - log_normalizer(rs, lam, 1.0);
    const double b = rb.beta.value_or(1.0);
    const double expected = rb.theorem == Theorem::stable_tail ? b * b / ((1.0 + b) * (1.0 + b)) : 0.25;
    EXPECT_NEAR(small_rate, expected, 1e-8);
    // Boundary: log d = c log t + rate t, so rate = log d(2) - log d(1) - c log 2.
    const double c = rb.theorem == Theorem::stable_tail ? 1.0 / (2.0 * (1.0 + b)) : 0.25;
    EXPECT_NEAR(log_normalizer(rb, rb.inner, 2.0) - log_normalizer(rb, rb.inner, 1.0) - c * std::log(2.0), expected, 1e-12);
  }
}

TEST(Constants, StableAtZero) {
  const double beta = 0.5;
  const double A1 = beta / std::tgamma(1.0 - beta);
  EXPECT_NEAR(c_lambda_beta(A1, beta, 0.0), 2.0, 1e-14);
  EXPECT_NEAR(c_beta(A1, beta), A1 * 1.5 * std::tgamma(0.5) / 0.125 * std::sqrt(2.0 / kPi), 1e-14);
}

TEST(Mixture, QuadraticSmallMatchesLimitCf) {
  const auto r = regime_classify(0.0, check_conditions(unit_quadratic()));
  const auto W = exact_w_quadratic(100000, 21);
  Stream rng(22, 0);
  std::vector<double> x(100000);
  for (auto& v : x) v = mixture_limit_sample(r, 0.0, W, MixtureConstants{}, rng);
  EXPECT_LE(stats::cf_distance(x, theta_grid(5.0, 50), [](double th) { return std::exp(-th * th / (1.0 + th * th)); }), 0.02);
  EXPECT_NEAR(std::abs(stats::ecf(x, 0.0) - 1.0), 0.0, 1e-15);
  // Symmetry: skewness within 3 standard errors, with var(m3) ~ m6/n for a symmetric law.
  const auto m = stats::mean_estimate(x);
  double m2 = 0.0, m3 = 0.0, m6 = 0.0;
  for (double v : x) {
    const double d = v - m.mean;
    m2 += d * d;
    m3 += d * d * d;
    m6 += std::pow(d, 6);
  }
  const double n = static_cast<double>(x.size());
  m2 /= n;
  m3 /= n;
  m6 /= n;
  EXPECT_LE(std::abs(m3), 3.0 * std::sqrt(m6 / n));
}

TEST(Mixture, StableSmallDegenerateW) {
  // With W == 1 the draw is c^{1/(1+beta)} V, whose CF is exp(c (-i theta)^{1.5}).
  const auto r = regime_classify(0.0, check_conditions(unit_stable(0.5)));
  MixtureConstants c;
  c.beta = 0.5;
  c.A1 = 0.5 / std::tgamma(0.5);
  Stream rng(23, 0);
  std::vector<double> x(100000);
  for (auto& v : x) v = mixture_limit_sample(r, 0.0, {1.0}, c, rng);
  EXPECT_LE(stats::cf_distance(x, theta_grid(3.0, 30), [](double th) { return std::exp(2.0 * std::pow(cplx{0.0, -th}, 1.5)); }),
            0.02);
  EXPECT_NEAR(std::abs(stats::ecf(x, 0.0) - 1.0), 0.0, 1e-15);
}

TEST(Mixture, Errors) {
  const auto quad = check_conditions(unit_quadratic());
  Stream rng(1, 0);
  EXPECT_THROW(mixture_limit_sample(regime_classify(0.0, quad), 0.0, {}, {}, rng), ConfigError);
  EXPECT_THROW(mixture_limit_sample(regime_classify(1.0, quad), 1.0, {1.0}, {}, rng), ConfigError);
}
