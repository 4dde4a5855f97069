#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "sbmlab/skeleton.hpp"
#include "test_util.hpp"

using namespace sbmlab;
using sbmlab::testing::unit_quadratic;
using sbmlab::testing::unit_stable;

TEST(Offspring, Quadratic) {
  const auto d = derive_offspring(unit_quadratic());
  EXPECT_EQ(d.q(), 1.0);
  EXPECT_EQ(d.pk(2), 1.0);
  EXPECT_EQ(d.tail_mass, 0.0);
  EXPECT_EQ(d.pk(0), 0.0);
  EXPECT_EQ(d.pk(3), 0.0);
}

TEST(Offspring, StableFirstAtoms) {
  const auto d = derive_offspring(unit_stable(0.5));
  EXPECT_NEAR(d.q(), 0.5, 1e-14);
  EXPECT_NEAR(d.pk(2), 0.75, 1e-12);
  EXPECT_NEAR(d.pk(3), 0.125, 1e-12);
  EXPECT_LE(d.tail_mass, 1e-9);
  EXPECT_EQ(d.pk(0), 0.0);
  EXPECT_EQ(d.pk(1), 0.0);
}

TEST(Offspring, StableAtomsAgainstNumericMoments) {
  // Oracle: int y^k e^{-y} pi(dy) by quadrature of the Levy density.
  const auto m = unit_stable(0.5);
  const auto d = derive_offspring(m);
  const auto* s = m.stable();
  for (int k = 2; k <= 8; ++k) {
    const double moment = quad::integrate_halfline([&](double y) { return std::pow(y, k) * std::exp(-y) * s->density(y); }).value;
    EXPECT_NEAR(d.pk(k), moment / (0.5 * std::tgamma(k + 1.0)), 1e-10) << "k=" << k;
  }
}

TEST(Offspring, StableMeanWithTailCorrection) {
  const auto d = derive_offspring(unit_stable(0.5));
  EXPECT_DOUBLE_EQ(d.mean_exact, 3.0);
  // Independent truncated mean from the Gamma closed form, tail folded into kmax.
  const double beta = 0.5, A1 = beta / std::tgamma(1.0 - beta);
  double mean = 0.0, mass = 0.0;
  for (std::size_t k = 2; k <= d.kmax(); ++k) {
    const double pk = A1 * (1 + beta) * std::exp(std::lgamma(k - 1 - beta) - std::lgamma(k + 1.0)) / beta;
    mean += k * pk;
    mass += pk;
  }
  mean += d.kmax() * (1.0 - mass);
  // 1 - mass carries ~1e-13 summation error, amplified by kmax = 1e6.
  EXPECT_NEAR(d.mean(), mean, 1e-6);
  // The truncation bias is a few 1e-3 at kmax = 1e6 for this heavy tail.
  EXPECT_NEAR(d.mean(), 3.0, 3e-3);
}

TEST(Offspring, GeneratingFunctionReconstruction) {
  for (const auto& m : {unit_quadratic(), unit_stable(0.5), unit_stable(0.8)}) {
    const auto d = derive_offspring(m);
    for (int i = 0; i <= 9; ++i) {
      const double s = 0.1 * i;
      double F = 0.0, sk = 1.0;
      for (std::size_t k = 0; k <= d.kmax(); ++k, sk *= s) F += d.pk(k) * sk;
      EXPECT_NEAR(d.q() * (F - s), eval_psi(m, 1.0 - s), 1e-8) << "s=" << s;
    }
  }
}

TEST(Offspring, MonotoneAtomsBeyondTwo) {
  OffspringOptions opt;
  opt.tail_tol = 1e-6;  // the k^{-2.3} tail cannot reach 1e-9 below the cap
  const auto d = derive_offspring(unit_stable(0.3), opt);
  for (std::size_t k = 4; k < d.kmax(); ++k) ASSERT_LE(d.pk(k), d.pk(k - 1)) << k;
}

TEST(Offspring, QIsBetaForStableFamily) {
  OffspringOptions opt;
  opt.tail_tol = 1e-5;
  for (double beta : {0.2, 0.5, 0.9}) EXPECT_NEAR(derive_offspring(unit_stable(beta), opt).q(), beta, 1e-13);
}

TEST(Offspring, TailCapThrows) {
  OffspringOptions opt;
  opt.kmax_cap = 256;
  EXPECT_THROW(derive_offspring(unit_stable(0.5), opt), ConfigError);
}

TEST(Offspring, MassScaledQuadratic) {
  for (double N : {1.0, 10.0, 400.0}) {
    OffspringOptions opt;
    opt.mass_scale = N;
    const auto d = derive_offspring(unit_quadratic(), opt);
    EXPECT_NEAR(d.rate, 2 * N - 1, 1e-12);
    EXPECT_NEAR(d.pk(0), (N - 1) / (2 * N - 1), 1e-14);
    EXPECT_NEAR(d.pk(2), N / (2 * N - 1), 1e-14);
  }
}

TEST(Offspring, MassScaledGeneratorMatchesPsi) {
  // rate (F(s) - s) = psi(N (1 - s)) / N at every N.
  const auto m = unit_stable(0.5);
  for (double N : {5.0, 100.0}) {
    OffspringOptions opt;
    opt.mass_scale = N;
    opt.tail_tol = 1e-7;
    const auto d = derive_offspring(m, opt);
    for (double s : {0.0, 0.3, 0.9, 0.99}) {
      double F = 0.0, sk = 1.0;
      for (std::size_t k = 0; k <= d.kmax() && sk > 1e-300; ++k, sk *= s) F += d.pk(k) * sk;
      EXPECT_NEAR(d.rate * (F - s), eval_psi(m, N * (1 - s)) / N, 1e-6 * std::max(1.0, std::abs(eval_psi(m, N * (1 - s)) / N)));
    }
  }
}

TEST(Sampler, QuadraticAlwaysTwo) {
  OffspringSampler sampler(derive_offspring(unit_quadratic()));
  Stream rng(1, 0);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(sample_offspring(sampler, rng), 2u);
}

TEST(Sampler, StableFrequencies) {
  const auto d = derive_offspring(unit_stable(0.5));
  OffspringSampler sampler(d);
  Stream rng(7, 0);
  const int n = 1'000'000;
  int twos = 0;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto k = sample_offspring(sampler, rng);
    twos += (k == 2);
    sum += static_cast<double>(k);
  }
  EXPECT_NEAR(twos / double(n), 0.75, 3.0 * std::sqrt(0.75 * 0.25 / n));
  double second = 0.0;
  for (std::size_t k = 0; k <= d.kmax(); ++k) second += double(k) * double(k) * d.pk(k);
  const double var = second - d.mean() * d.mean();
  EXPECT_NEAR(sum / n, d.mean(), 3.0 * std::sqrt(var / n));
}

TEST(Sampler, AliasTableMatchesWeights) {
  const std::vector<double> w{0.1, 0.0, 0.5, 0.25, 0.15};
  AliasTable t(w);
  Stream rng(3, 4);
  std::vector<int> counts(w.size());
  const int n = 400000;
  for (int i = 0; i < n; ++i) ++counts[t.sample(rng)];
  for (std::size_t i = 0; i < w.size(); ++i) EXPECT_NEAR(counts[i] / double(n), w[i], 4.0 * std::sqrt(w[i] * (1 - w[i]) / n) + 1e-12);
}

TEST(Rng, StreamsAreKeyedAndReproducible) {
  Stream a(42, 5), b(42, 5), c(42, 6), d(43, 5);
  const double x = a.uniform();
  EXPECT_EQ(x, b.uniform());
  EXPECT_NE(x, c.uniform());
  EXPECT_NE(x, d.uniform());
}
