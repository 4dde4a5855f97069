#pragma once

// Monte Carlo side: branching Brownian particle systems (the skeleton and the
// 1/N-weighted approximation of super-Brownian motion), exact total-mass
// samplers for the quadratic mechanism, and the martingale and extremal
// statistics read off a particle cloud.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "sbmlab/errors.hpp"
#include "sbmlab/limits.hpp"
#include "sbmlab/mechanism.hpp"
#include "sbmlab/numeric.hpp"
#include "sbmlab/rng.hpp"
#include "sbmlab/skeleton.hpp"

namespace sbmlab {

inline constexpr std::size_t kDefaultPopulationCap = 2'000'000;

struct ParticleCloud {
  double time = 0.0;
  std::vector<double> positions;
  std::vector<double> weights;
  /// The population cap was hit before this snapshot; the cloud is empty.
  bool truncated = false;

  std::size_t count() const { return positions.size(); }
  double total_weight() const {
    CompensatedSum<double> s;
    for (double w : weights) s.add(w);
    return s.value();
  }
};

struct MassPath {
  std::vector<double> times;
  std::vector<double> masses;
  double initial_mass = 1.0;
};

/// A branching Brownian particle system: `initial` particles of weight
/// `weight` at the origin, each branching at law.rate into law.p children.
struct ParticleSystem {
  OffspringDistribution law;
  OffspringSampler sampler;
  double weight = 1.0;
  std::size_t initial = 1;

  ParticleSystem(OffspringDistribution d, double w, std::size_t n) : law(std::move(d)), sampler(law), weight(w), initial(n) {}

  /// The skeleton BBM of a normalized mechanism.
  static ParticleSystem skeleton(const BranchingMechanism& m, const OffspringOptions& opt = {}) {
    OffspringOptions o = opt;
    o.mass_scale = 1.0;
    return {derive_offspring(m, o), 1.0, 1};
  }

  /// N particles of mass 1/N whose total mass has the log-Laplace flow of psi.
  static ParticleSystem sbm(const BranchingMechanism& m, std::size_t N, const OffspringOptions& opt = {}) {
    if (N < 1) throw ConfigError("particle approximation needs N >= 1");
    OffspringOptions o = opt;
    o.mass_scale = static_cast<double>(N);
    return {derive_offspring(m, o), 1.0 / static_cast<double>(N), N};
  }
};

namespace detail {

inline void check_snapshots(const std::vector<double>& snapshots) {
  if (snapshots.empty()) throw ConfigError("at least one snapshot time is required");
  for (std::size_t i = 0; i < snapshots.size(); ++i) {
    if (!(snapshots[i] >= 0.0) || (i > 0 && !(snapshots[i] > snapshots[i - 1])))
      throw ConfigError("snapshot times must be nonnegative and increasing");
  }
}

}  // namespace detail

/// Exact simulation of the particle system, recorded at each snapshot time.
/// Particles are independent between events, so each one is advanced to the
/// next snapshot on its own: Exp(rate) lifetimes, Gaussian displacement over
/// each lifetime, children appended and advanced in the same sweep. If the
/// population exceeds cap, this and all later snapshots come back truncated.
inline std::vector<ParticleCloud> simulate_particles(const ParticleSystem& sys, const std::vector<double>& snapshots,
                                                     std::size_t cap, Stream& rng) {
  detail::check_snapshots(snapshots);
  const double rate = sys.law.rate;
  std::vector<double> pos(sys.initial, 0.0);
  std::vector<double> clock(sys.initial, 0.0);
  std::vector<ParticleCloud> out;
  out.reserve(snapshots.size());
  bool truncated = sys.initial > cap;
  double now = 0.0;
  for (double target : snapshots) {
    if (!truncated && target > now) {
      std::size_t i = 0;
      while (i < pos.size()) {
        double x = pos[i];
        double c = clock[i];
        bool alive = true;
        for (;;) {
          const double death = c + rng.exponential(rate);
          if (death >= target) {
            x += std::sqrt(target - c) * rng.normal();
            c = target;
            break;
          }
          x += std::sqrt(death - c) * rng.normal();
          c = death;
          const std::size_t k = sys.sampler(rng);
          if (k == 0) {
            alive = false;
            break;
          }
          if (pos.size() + (k - 1) > cap) {
            truncated = true;
            break;
          }
          for (std::size_t j = 1; j < k; ++j) {
            pos.push_back(x);
            clock.push_back(c);
          }
        }
        if (truncated) break;
        pos[i] = x;
        clock[i] = alive ? c : -1.0;
        ++i;
      }
      if (!truncated) {
        std::size_t keep = 0;
        for (std::size_t j = 0; j < pos.size(); ++j) {
          if (clock[j] >= 0.0) pos[keep++] = pos[j];
        }
        pos.resize(keep);
        clock.assign(keep, target);
      }
      now = target;
    }
    ParticleCloud cloud;
    cloud.time = target;
    cloud.truncated = truncated;
    if (!truncated) {
      cloud.positions = pos;
      cloud.weights.assign(pos.size(), sys.weight);
    }
    out.push_back(std::move(cloud));
  }
  return out;
}

/// The skeleton BBM. Build the system once per offspring law: its alias
/// table has kmax entries.
inline std::vector<ParticleCloud> simulate_bbm(const ParticleSystem& skeleton, const std::vector<double>& snapshots,
                                               std::size_t cap, Stream& rng) {
  if (skeleton.law.pk(0) > 0.0 || skeleton.initial != 1 || skeleton.weight != 1.0)
    throw ConfigError("skeleton BBM needs one unit-weight particle and no deaths");
  return simulate_particles(skeleton, snapshots, cap, rng);
}

inline std::vector<ParticleCloud> simulate_sbm_particles(const ParticleSystem& sys, const std::vector<double>& snapshots,
                                                         std::size_t cap, Stream& rng) {
  return simulate_particles(sys, snapshots, cap, rng);
}

// ---------------------------------------------------------------------------
// Statistics of a cloud. e_lambda(x) = e^{-lambda x}, and with a = 1 the
// additive martingale is e^{-(lambda^2/2 + 1) t} <e_lambda, Z_t>.

/// sum_i w_i e^{-lambda x_i - (lambda^2/2 + 1) t}, in log space when the
/// exponents are large.
inline double additive_martingale(const ParticleCloud& c, double lambda) {
  if (c.truncated) throw ConfigError("martingale of a truncated cloud");
  const double drift = -(0.5 * lambda * lambda + 1.0) * c.time;
  double top = -std::numeric_limits<double>::infinity();
  double spread = 0.0;
  for (std::size_t i = 0; i < c.count(); ++i) {
    const double e = -lambda * c.positions[i] + std::log(c.weights[i]);
    top = std::max(top, e);
    spread = std::max(spread, std::abs(lambda * c.positions[i]));
  }
  if (c.count() == 0) return 0.0;
  CompensatedSum<double> s;
  if (spread <= 600.0) {
    for (std::size_t i = 0; i < c.count(); ++i) s.add(c.weights[i] * std::exp(-lambda * c.positions[i] + drift));
    return s.value();
  }
  for (std::size_t i = 0; i < c.count(); ++i) s.add(std::exp(-lambda * c.positions[i] + std::log(c.weights[i]) - top));
  return std::exp(top + drift + std::log(s.value()));
}

/// e^{-2t} sum_i w_i (sqrt2 t +- x_i) e^{-+ sqrt2 x_i}; sign is +1 or -1.
/// The value can be negative at finite t.
inline double derivative_martingale(const ParticleCloud& c, int sign) {
  if (c.truncated) throw ConfigError("martingale of a truncated cloud");
  if (sign != 1 && sign != -1) throw ConfigError("derivative martingale sign must be +1 or -1");
  CompensatedSum<double> s;
  for (std::size_t i = 0; i < c.count(); ++i) {
    const double x = c.positions[i];
    s.add(c.weights[i] * (kSqrt2 * c.time + sign * x) * std::exp(-sign * kSqrt2 * x - 2.0 * c.time));
  }
  return s.value();
}

inline double max_position(const ParticleCloud& c) {
  if (c.truncated || c.count() == 0) throw ConfigError("extinct/empty");
  return *std::max_element(c.positions.begin(), c.positions.end());
}

/// m(t) = sqrt2 t - (3/(2 sqrt2)) log t.
inline double max_centering(double t) {
  if (!(t > 0.0)) throw ConfigError("centering needs t > 0");
  return kSqrt2 * t - 3.0 / (2.0 * kSqrt2) * std::log(t);
}

inline double centered_max(const ParticleCloud& c) { return max_position(c) - max_centering(c.time); }

// ---------------------------------------------------------------------------
// Exact total-mass samplers for the quadratic mechanism psi(l) = -l + l^2.

namespace detail {

inline void check_grid(const std::vector<double>& t_grid) {
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    if (!(t_grid[i] >= 0.0) || (i > 0 && !(t_grid[i] > t_grid[i - 1])))
      throw ConfigError("time grid must be nonnegative and increasing");
  }
}

}  // namespace detail

/// One exact CSBP transition over time s from mass x: a Poisson(x e^s/(e^s-1))
/// number of Exp(mean e^s - 1) masses.
inline double csbp_quadratic_step(double x, double s, Stream& rng) {
  if (x <= 0.0 || s <= 0.0) return std::max(x, 0.0);
  const double c = std::expm1(s);
  const auto K = rng.poisson(x * std::exp(s) / c);
  return K == 0 ? 0.0 : rng.gamma(static_cast<double>(K), c);
}

inline MassPath simulate_csbp_quadratic(double x0, const std::vector<double>& t_grid, Stream& rng) {
  if (!(x0 > 0.0)) throw ConfigError("initial mass must be positive");
  detail::check_grid(t_grid);
  MassPath path;
  path.initial_mass = x0;
  double x = x0, now = 0.0;
  for (double t : t_grid) {
    x = csbp_quadratic_step(x, t - now, rng);
    now = t;
    path.times.push_back(t);
    path.masses.push_back(x);
  }
  return path;
}

/// Exact count transition of a linear birth-death process (per-particle birth
/// rate `birth`, death rate `death`, birth > death) over time s from n: of n
/// independent lines, Binomial(n, 1 - alpha) survive, and each survivor holds
/// a Geometric(1 - g) number of descendants on {1, 2, ...}.
inline std::int64_t birth_death_step(std::int64_t n, double birth, double death, double s, Stream& rng) {
  if (n <= 0 || s <= 0.0) return std::max<std::int64_t>(n, 0);
  const double em1 = std::expm1((birth - death) * s);
  const double denom = birth * em1 + (birth - death);
  const double alpha = death * em1 / denom;
  const double g = birth * em1 / denom;
  const std::int64_t alive = rng.binomial(n, 1.0 - alpha);
  return alive + rng.negative_binomial(alive, 1.0 - g);
}

/// Total mass of the quadratic particle approximation at mass scale N, sampled
/// exactly on a time grid. Particles of mass 1/N branch at rate 2N - 1 into 0
/// or 2 children, so the count is birth-death with rates N and N - 1.
inline MassPath simulate_sbm_mass_quadratic(std::int64_t N, const std::vector<double>& t_grid, Stream& rng) {
  if (N < 1) throw ConfigError("particle approximation needs N >= 1");
  detail::check_grid(t_grid);
  MassPath path;
  path.initial_mass = 1.0;
  std::int64_t n = N;
  double now = 0.0;
  for (double t : t_grid) {
    n = birth_death_step(n, static_cast<double>(N), static_cast<double>(N - 1), t - now, rng);
    now = t;
    path.times.push_back(t);
    path.masses.push_back(static_cast<double>(n) / static_cast<double>(N));
  }
  return path;
}

// ---------------------------------------------------------------------------
// Tail fluctuations D = d(t) (W_{t+s}(lambda) - W_t(lambda)).

enum class Process { csbp, skeleton, sbm, sbm_mass };

inline const char* to_string(Process p) {
  switch (p) {
    case Process::csbp: return "csbp";
    case Process::skeleton: return "skeleton";
    case Process::sbm: return "sbm";
    default: return "sbm_mass";
  }
}

inline Process parse_process(const std::string& s) {
  if (s == "csbp") return Process::csbp;
  if (s == "skeleton" || s == "bbm") return Process::skeleton;
  if (s == "sbm") return Process::sbm;
  if (s == "sbm_mass") return Process::sbm_mass;
  throw ConfigError("unknown process '" + s + "'");
}

struct FluctuationConfig {
  Process process = Process::csbp;
  double lambda = 0.0;
  double t = 10.0;
  double s = 15.0;
  std::int64_t N = 100;
  std::size_t cap = kDefaultPopulationCap;
  Regime regime;
};

struct FluctuationSample {
  double W_t = 0.0;
  double W_ts = 0.0;
  double D = 0.0;
  bool truncated = false;
};

/// One path to t + s. `system` is required for the particle processes; the
/// exact mass samplers are quadratic-only and need lambda = 0.
inline FluctuationSample fluctuation_sample(const FluctuationConfig& cfg, const ParticleSystem* system, Stream& rng) {
  if (!(cfg.t > 0.0 && cfg.s > 0.0)) throw ConfigError("fluctuation needs t > 0 and s > 0");
  const double d = normalizer(cfg.regime, cfg.lambda, cfg.t);
  FluctuationSample out;
  const std::vector<double> grid{cfg.t, cfg.t + cfg.s};
  switch (cfg.process) {
    case Process::csbp:
    case Process::sbm_mass: {
      if (cfg.lambda != 0.0) throw ConfigError("total-mass samplers only carry W(0)");
      const auto path = cfg.process == Process::csbp ? simulate_csbp_quadratic(1.0, grid, rng) : simulate_sbm_mass_quadratic(cfg.N, grid, rng);
      out.W_t = std::exp(-cfg.t) * path.masses[0];
      out.W_ts = std::exp(-(cfg.t + cfg.s)) * path.masses[1];
      break;
    }
    default: {
      if (system == nullptr) throw ConfigError("particle processes need a particle system");
      const auto clouds = simulate_particles(*system, grid, cfg.cap, rng);
      if (clouds.back().truncated) {
        out.truncated = true;
        return out;
      }
      out.W_t = additive_martingale(clouds[0], cfg.lambda);
      out.W_ts = additive_martingale(clouds[1], cfg.lambda);
    }
  }
  out.D = d * (out.W_ts - out.W_t);
  return out;
}

/// Runs body(rep, stream) for every replication in parallel and collects the
/// results in replication order.
template <class Body>
auto replicate(std::size_t reps, std::uint64_t seed, Body&& body, unsigned threads = 0) {
  using R = std::decay_t<decltype(body(std::size_t{0}, std::declval<Stream&>()))>;
  std::vector<R> out(reps);
  parallel_for(
      reps,
      [&](std::size_t i) {
        Stream rng(seed, i);
        out[i] = body(i, rng);
      },
      threads);
  return out;
}

}  // namespace sbmlab
