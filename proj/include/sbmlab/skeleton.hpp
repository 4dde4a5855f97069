#pragma once

// Offspring laws of branching particle systems driven by a normalized
// mechanism psi.
//
// With mass scale N every particle carries mass 1/N, branches at rate psi'(N)
// and leaves k children with probability p_k, where
//
//   F(s) = sum_k p_k s^k = s + psi(N (1 - s)) / (N psi'(N)).
//
// Then w = N (1 - E[s^{Z_t}]) solves w' = -psi(w) exactly, so the particle
// system's total mass has the log-Laplace flow of psi at every N. Expanding F
// at s = 0 gives p_1 = 0, p_0 = psi(N)/(N psi'(N)) and for k >= 2
//
//   p_k = [ b N 1{k=2} + (1/N) int Poisson(k; N y) pi(dy) ] / psi'(N).
//
// N = 1 is the skeleton: p_0 = 0 since psi(1) = 0, rate q = psi'(1), and
// q (F(s) - s) = psi(1 - s).

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "sbmlab/errors.hpp"
#include "sbmlab/mechanism.hpp"
#include "sbmlab/numeric.hpp"
#include "sbmlab/rng.hpp"

namespace sbmlab {

struct OffspringDistribution {
  double mass_scale = 1.0;
  /// Branching rate (q for the skeleton).
  double rate = 1.0;
  /// p[k] for k = 0..kmax; p[1] = 0 always. The truncated tail is folded into p[kmax].
  std::vector<double> p;
  /// Probability beyond kmax before folding.
  double tail_mass = 0.0;
  /// Untruncated mean 1 + 1/psi'(N) (1 + 1/q for the skeleton).
  double mean_exact = 2.0;

  double q() const { return rate; }
  std::size_t kmax() const { return p.empty() ? 0 : p.size() - 1; }
  double pk(std::size_t k) const { return k < p.size() ? p[k] : 0.0; }
  double mean() const {
    CompensatedSum<double> s;
    for (std::size_t k = 0; k < p.size(); ++k) s.add(static_cast<double>(k) * p[k]);
    return s.value();
  }
};

struct OffspringOptions {
  double mass_scale = 1.0;
  double tail_tol = 1e-9;
  std::size_t kmax_start = 64;
  std::size_t kmax_cap = 1'000'000;
};

namespace detail {

/// (1/N) int Poisson(k; N y) pi(dy), evaluated in log space.
inline double jump_weight(const BranchingMechanism& m, std::size_t k, double N) {
  const double kk = static_cast<double>(k);
  if (const auto* s = m.stable()) {
    // A1 (1+beta) Gamma(k-1-beta) N^beta / k!
    return s->A1 * (1.0 + s->beta) * std::exp(std::lgamma(kk - 1.0 - s->beta) - std::lgamma(kk + 1.0) + s->beta * std::log(N));
  }
  if (const auto* t = m.tabulated()) {
    const double lk = std::lgamma(kk + 1.0);
    auto pois = [kk, lk, N](double y) {
      const double x = N * y;
      return std::exp(kk * std::log(x) - x - lk);
    };
    quad::Options opt;
    opt.abs_tol = 1e-300;
    opt.rel_tol = 1e-12;
    return t->integrate(pois, 0.0, std::numeric_limits<double>::infinity(), opt).value / N;
  }
  return 0.0;
}

}  // namespace detail

/// Offspring law at the given mass scale. kmax doubles from kmax_start until
/// the tail mass is at most tail_tol; exceeding kmax_cap throws.
inline OffspringDistribution derive_offspring(const BranchingMechanism& m, const OffspringOptions& opt = {}) {
  if (!m.normalized) throw ConfigError("derive_offspring needs a normalized mechanism");
  const double N = opt.mass_scale;
  if (!(N >= 1.0)) throw ConfigError("mass scale must be >= 1");
  OffspringDistribution d;
  d.mass_scale = N;
  const double dpsi = psi_derivative(m, N);
  if (!(dpsi > 0.0)) throw ConfigError("psi'(N) must be positive to define a branching rate");
  d.rate = dpsi;
  d.mean_exact = 1.0 + 1.0 / dpsi;
  const double p0 = N == 1.0 ? 0.0 : std::max(0.0, eval_psi(m, N) / (N * dpsi));

  std::vector<double> p{p0, 0.0};
  CompensatedSum<double> total;
  total.add(p0);
  std::size_t kmax = std::max<std::size_t>(opt.kmax_start, 2);
  double tail = 1.0;
  for (;;) {
    for (std::size_t k = p.size(); k <= kmax; ++k) {
      double v = detail::jump_weight(m, k, N);
      if (k == 2) v += m.b * N;
      v /= dpsi;
      p.push_back(v);
      total.add(v);
    }
    tail = std::max(0.0, 1.0 - total.value());
    if (!m.has_jumps() || tail <= opt.tail_tol) break;
    if (kmax >= opt.kmax_cap) {
      throw ConfigError("offspring tail mass " + std::to_string(tail) + " still above tolerance at kmax cap " +
                        std::to_string(opt.kmax_cap));
    }
    kmax = std::min(2 * kmax, opt.kmax_cap);
  }
  if (!m.has_jumps()) p.resize(3);
  d.tail_mass = m.has_jumps() ? tail : 0.0;
  p.back() += d.tail_mass;
  d.p = std::move(p);
  return d;
}

/// Vose alias table: O(n) build, O(1) draws.
class AliasTable {
 public:
  AliasTable() = default;
  explicit AliasTable(const std::vector<double>& weights) {
    const std::size_t n = weights.size();
    if (n == 0) throw ConfigError("alias table needs at least one weight");
    double sum = 0.0;
    for (double w : weights) sum += w;
    prob_.assign(n, 0.0);
    alias_.assign(n, 0);
    std::vector<double> scaled(n);
    std::vector<std::uint32_t> small, large;
    for (std::size_t i = 0; i < n; ++i) {
      scaled[i] = weights[i] * static_cast<double>(n) / sum;
      (scaled[i] < 1.0 ? small : large).push_back(static_cast<std::uint32_t>(i));
    }
    while (!small.empty() && !large.empty()) {
      const auto s = small.back();
      small.pop_back();
      const auto l = large.back();
      prob_[s] = scaled[s];
      alias_[s] = l;
      scaled[l] = (scaled[l] + scaled[s]) - 1.0;
      if (scaled[l] < 1.0) {
        large.pop_back();
        small.push_back(l);
      }
    }
    for (auto i : large) prob_[i] = 1.0;
    for (auto i : small) prob_[i] = 1.0;
  }

  std::size_t size() const { return prob_.size(); }

  std::size_t sample(Stream& rng) const {
    const double u = rng.uniform() * static_cast<double>(prob_.size());
    std::size_t i = static_cast<std::size_t>(u);
    if (i >= prob_.size()) i = prob_.size() - 1;
    return (u - static_cast<double>(i)) < prob_[i] ? i : alias_[i];
  }

 private:
  std::vector<double> prob_;
  std::vector<std::uint32_t> alias_;
};

/// Shared read-only sampler for an offspring law.
class OffspringSampler {
 public:
  explicit OffspringSampler(const OffspringDistribution& d) : table_(d.p) {
    std::size_t support = 0;
    for (std::size_t k = 0; k < d.p.size(); ++k) {
      if (d.p[k] > 0.0) {
        ++support;
        only_ = k;
      }
    }
    if (support != 1) only_ = kNone;
  }

  std::size_t operator()(Stream& rng) const { return only_ != kNone ? only_ : table_.sample(rng); }

 private:
  static constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  AliasTable table_;
  std::size_t only_ = kNone;
};

inline std::size_t sample_offspring(const OffspringSampler& sampler, Stream& rng) { return sampler(rng); }

}  // namespace sbmlab
