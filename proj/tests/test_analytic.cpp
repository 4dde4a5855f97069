#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "sbmlab/analytic.hpp"
#include "test_util.hpp"

using namespace sbmlab;
using sbmlab::testing::unit_quadratic;
using sbmlab::testing::unit_stable;

namespace {

/// Blind oracle: u' = -psi(u) by DOPRI5 on the mechanism's psi.
cplx integrate_u(const BranchingMechanism& m, double t, cplx z) {
  if (t == 0.0) return z;
  ode::Options opt;
  opt.rel_tol = 1e-13;
  opt.abs_tol = 1e-15;
  return ode::dopri5<cplx>([&](double, cplx u) { return -eval_psi(m, u); }, 0.0, z, t, opt).y_end;
}

double sup_gap(const ComplexGridFunction& a, const ComplexGridFunction& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a.values[i] - b.values[i]));
  return d;
}

}  // namespace

TEST(Ode, LinearAndDenseOutput) {
  const auto sol = ode::dopri5<double>([](double, double y) { return -2.0 * y; }, 0.0, 1.0, 3.0);
  EXPECT_NEAR(sol.y_end, std::exp(-6.0), 1e-11);
  for (double x : {0.1, 0.77, 1.5, 2.9}) EXPECT_NEAR(sol(x), std::exp(-2.0 * x), 1e-9) << x;
}

TEST(Ode, ComplexRotation) {
  const auto sol = ode::dopri5<cplx>([](double, cplx y) { return cplx{0.0, 1.0} * y; }, 0.0, cplx{1.0, 0.0}, 10.0);
  EXPECT_LT(std::abs(sol.y_end - std::exp(cplx{0.0, 10.0})), 1e-9);
}

TEST(Cumulant, Examples) {
  const auto q = Family::make_quadratic();
  const auto s = Family::make_stable(0.5);
  EXPECT_NEAR(std::abs(cumulant_u_t(q, 2.0, 1.0) - 1.0), 0.0, 1e-15);
  EXPECT_LT(std::abs(integrate_u(unit_quadratic(), 2.0, 1.0) - 1.0), 1e-8);
  EXPECT_EQ(cumulant_u_t(q, 3.0, 0.0), cplx(0.0));
  EXPECT_EQ(cumulant_u_t(s, 3.0, 0.0), cplx(0.0));
  EXPECT_LT(std::abs(cumulant_u_t(s, 3.0, 0.3) - cumulant_u_t(s, 1.0, cumulant_u_t(s, 2.0, 0.3))), 1e-10);
  EXPECT_THROW(cumulant_u_t(q, 1.0, cplx(-0.5, 0.1)), BranchError);
  EXPECT_THROW(Family::make_stable(1.0), ConfigError);
}

TEST(Cumulant, MatchesBlindOde) {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (const auto& fam : {Family::make_quadratic(), Family::make_stable(0.5), Family::make_stable(0.3)}) {
    const auto m = fam.mechanism();
    for (int i = 0; i < 20; ++i) {
      const double t = 10.0 * U(gen);
      const double rad = 5.0 * U(gen);
      const double arg = kPi * (U(gen) - 0.5);
      const cplx z = std::polar(rad, arg);
      const cplx want = integrate_u(m, t, z);
      EXPECT_LE(std::abs(cumulant_u_t(fam, t, z) - want), 1e-8 * std::abs(want)) << fam.name() << " t=" << t << " z=" << z;
    }
  }
}

TEST(Cumulant, Semigroup) {
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  for (const auto& fam : {Family::make_quadratic(), Family::make_stable(0.5)}) {
    for (int i = 0; i < 20; ++i) {
      const double t = 5.0 * U(gen), s = 5.0 * U(gen);
      const cplx z = std::polar(5.0 * U(gen), kPi * (U(gen) - 0.5));
      const cplx a = cumulant_u_t(fam, t + s, z);
      const cplx b = cumulant_u_t(fam, t, cumulant_u_t(fam, s, z));
      EXPECT_LE(std::abs(a - b), 1e-10 * std::max(1.0, std::abs(a)));
    }
  }
}

TEST(Phi, Examples) {
  const auto q = Family::make_quadratic();
  EXPECT_EQ(limit_cumulant_Phi(q, 0.0), cplx(0.0));
  EXPECT_NEAR(limit_cumulant_Phi(q, 1e12).real(), 1.0, 1e-11);
  for (const auto& fam : {q, Family::make_stable(0.5)}) {
    const cplx lhs = limit_cumulant_Phi(fam, 2.0);
    const cplx rhs = cumulant_u_t(fam, 3.0, limit_cumulant_Phi(fam, 2.0 * std::exp(-3.0)));
    EXPECT_LE(std::abs(lhs - rhs), 1e-10);
    // Phi(z) is the limit of u_t(z e^{-t}).
    EXPECT_LE(std::abs(cumulant_u_t(fam, 40.0, cplx(0.7, 0.4) * std::exp(-40.0)) - limit_cumulant_Phi(fam, cplx(0.7, 0.4))), 1e-8);
  }
}

TEST(SolveW0, QuadraticOracle) {
  const auto sol = solve_W0(unit_quadratic(), 10.0, 1e-8);
  double err = 0.0;
  for (int i = -1000; i <= 1000; ++i) {
    const double th = 0.01 * i;
    const cplx it{0.0, th};
    err = std::max(err, std::abs(sol.h(th) - it / (1.0 - it)));
  }
  EXPECT_LE(err, 1e-6);
  EXPECT_EQ(sol.h(0.0), cplx(0.0));
}

TEST(SolveW0, StableBounds) {
  for (double beta : {0.5, 0.3, 0.8}) {
    const auto sol = solve_W0(unit_stable(beta), 10.0, 1e-8);
    const auto g = sol.on_grid(symmetric_grid(10.0, 400));
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double th = g.grid[i];
      EXPECT_LE(g.values[i].real(), 1e-12) << th;
      EXPECT_LE(std::abs(g.values[i]), std::min(2.0, std::abs(th)) + 1e-9) << th;
      const std::size_t j = g.size() - 1 - i;
      EXPECT_LE(std::abs(g.values[j] - std::conj(g.values[i])), 1e-10);
    }
  }
}

TEST(SolveW0, TabulatedAgreesWithStable) {
  // The same Levy measure given as a table through the ray-split Laplace path.
  const double beta = 0.5;
  const auto ref = unit_stable(beta);
  const double A1 = ref.stable()->A1;
  auto table = sbmlab::testing::tabulate([&](double r) { return A1 * (1.0 + beta) * std::pow(r, -2.0 - beta); }, 1e-30, 1e10, 801,
                                         -2.0 - beta);
  auto m = tabulated_mechanism(1.0, 0.0, table);
  m.normalized = true;
  const auto a = solve_W0(ref, 5.0, 1e-7, 50);
  const auto b = solve_W0(m, 5.0, 1e-7, 50);
  for (double th : {0.01, 0.3, 1.0, 2.5, 5.0}) EXPECT_LT(std::abs(a.h(th) - b.h(th)), 1e-6) << th;
}

TEST(SolveW0, ResidualErrorCarriesProfile) {
  try {
    solve_W0(unit_quadratic(), 3.0, 1e-17, 10);
    FAIL() << "expected a residual error";
  } catch (const ResidualError& e) {
    EXPECT_EQ(e.grid().size(), 10u);
    EXPECT_EQ(e.residual().size(), 10u);
  }
}

TEST(SolveW0, NeedsNormalized) {
  auto m = quadratic_mechanism(2.0, 1.0);
  EXPECT_THROW(solve_W0(m, 1.0), ConfigError);
}

TEST(TailCf, QuadraticConvergence) {
  const auto fam = Family::make_quadratic();
  const auto sol = solve_W0(unit_quadratic(), 10.0, 1e-8);
  const auto grid = symmetric_grid(5.0, 100);
  const auto lim = limit_fluctuation_cf(fam, grid);
  double last = 1e300;
  for (double t : {5.0, 10.0, 15.0, 20.0, 25.0}) {
    const auto cf = tail_fluctuation_cf(fam, sol, t, grid);
    EXPECT_NEAR(std::abs(cf.values[100] - 1.0), 0.0, 1e-15);
    for (const auto& v : cf.values) EXPECT_LE(std::abs(v), 1.0 + 1e-12);
    const double gap = sup_gap(cf, lim);
    EXPECT_LE(gap, last) << t;
    last = gap;
    if (t == 15.0) EXPECT_LE(gap, 0.01);
  }
}

TEST(TailCf, StableConvergence) {
  const auto fam = Family::make_stable(0.5);
  const auto sol = solve_W0(unit_stable(0.5), 10.0, 1e-8);
  const auto grid = symmetric_grid(3.0, 60);
  const auto lim = limit_fluctuation_cf(fam, grid);
  EXPECT_NEAR(std::abs(lim.values[60] - 1.0), 0.0, 1e-15);
  double last = 1e300;
  for (double t : {5.0, 10.0, 15.0, 20.0, 25.0}) {
    const auto cf = tail_fluctuation_cf(fam, sol, t, grid);
    const double gap = sup_gap(cf, lim);
    EXPECT_LE(gap, last) << t;
    last = gap;
    if (t == 25.0) EXPECT_LE(gap, 0.02);
  }
}
