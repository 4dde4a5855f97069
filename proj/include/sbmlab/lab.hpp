#pragma once

// Experiment orchestration: a JSON configuration names a mechanism, a process
// and a (lambda, t, s) slice; run_experiment draws the tail fluctuations in
// parallel, compares them with the regime's limit law and writes the samples
// and a JSON report into a directory keyed by the configuration hash.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "sbmlab/analytic.hpp"
#include "sbmlab/conditions.hpp"
#include "sbmlab/errors.hpp"
#include "sbmlab/limits.hpp"
#include "sbmlab/mechanism.hpp"
#include "sbmlab/mechanism_io.hpp"
#include "sbmlab/rng.hpp"
#include "sbmlab/simulate.hpp"
#include "sbmlab/stats.hpp"

namespace sbmlab {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Grid statistics

inline ComplexGridFunction ecf(const std::vector<double>& samples, const std::vector<double>& grid) {
  ComplexGridFunction out;
  out.grid = grid;
  out.role = ComplexGridFunction::Role::ECF;
  out.values = stats::ecf(samples, grid);
  return out;
}

inline double cf_distance(const ComplexGridFunction& f, const ComplexGridFunction& g) {
  if (f.grid != g.grid) throw ConfigError("CF distance needs identical grids");
  return stats::sup_distance(f.values, g.values);
}

// ---------------------------------------------------------------------------
// Configuration

struct Tolerances {
  double cf = 0.02;
  double ks = 0.02;
  /// Upper bound on |ECF(1)| in the large regime, ruling out a degenerate limit.
  double nondegenerate = 0.99;
};

struct ExperimentConfig {
  std::filesystem::path mechanism_file;
  std::optional<BranchingMechanism> mechanism;  // set directly instead of a file
  std::optional<Process> process;
  double lambda = 0.0;
  std::optional<RegimeKind> regime_override;
  double t = 10.0;
  double s = 15.0;
  /// Second horizon for the large regime, where the target is the fluctuation at t_compare.
  std::optional<double> t_compare;
  std::size_t reps = 100000;
  std::int64_t N = 100;
  std::uint64_t seed = 0;
  std::vector<double> theta;
  std::size_t cap = kDefaultPopulationCap;
  unsigned threads = 0;
  Tolerances tol;
  std::filesystem::path output;
  json source;  // the parsed document, echoed into the report

  void validate() const {
    if (reps < 100) throw ConfigError("reps must be at least 100");
    if (theta.empty()) throw ConfigError("theta grid is empty");
    bool has_zero = false;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      if (theta[i] == 0.0) has_zero = true;
      if (i > 0 && !(theta[i] > theta[i - 1])) throw ConfigError("theta grid must be increasing");
      if (std::abs(theta[i] + theta[theta.size() - 1 - i]) > 1e-12) throw ConfigError("theta grid must be symmetric about 0");
    }
    if (!has_zero) throw ConfigError("theta grid must contain 0");
    if (!(t > 0.0 && s > 0.0)) throw ConfigError("t and s must be positive");
    if (t_compare && !(*t_compare > 0.0 && *t_compare != t)) throw ConfigError("t_compare must be positive and differ from t");
  }
};

inline RegimeKind parse_regime_kind(const std::string& s) {
  for (auto k : {RegimeKind::small, RegimeKind::boundary, RegimeKind::large, RegimeKind::critical_sqrt2, RegimeKind::degenerate})
    if (s == to_string(k)) return k;
  throw ConfigError("unknown regime '" + s + "'");
}

/// Parses a configuration document. Relative paths resolve against base_dir.
inline ExperimentConfig parse_experiment(const json& j, const std::filesystem::path& base_dir = ".") {
  static const std::vector<std::string> known{"mechanism", "process", "lambda", "regime", "t", "s", "t_compare", "reps", "N",
                                              "seed", "theta", "cap", "threads", "tolerance", "output"};
  if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) throw ConfigError("unknown config key '" + key + "'");
  }
  ExperimentConfig c;
  c.source = j;
  try {
    if (!j.contains("mechanism")) throw ConfigError("config needs a mechanism file");
    c.mechanism_file = base_dir / j.at("mechanism").get<std::string>();
    if (!j.contains("seed")) throw ConfigError("config needs an explicit seed");
    c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("process")) c.process = parse_process(j.at("process").get<std::string>());
    c.lambda = j.value("lambda", 0.0);
    if (j.contains("regime")) c.regime_override = parse_regime_kind(j.at("regime").get<std::string>());
    c.t = j.value("t", c.t);
    c.s = j.value("s", c.s);
    if (j.contains("t_compare")) c.t_compare = j.at("t_compare").get<double>();
    c.reps = j.value("reps", c.reps);
    c.N = j.value("N", c.N);
    c.cap = j.value("cap", c.cap);
    c.threads = j.value("threads", 0u);
    const auto& th = j.contains("theta") ? j.at("theta") : json{{"max", 5.0}, {"n", 50}};
    if (th.is_array()) {
      c.theta = th.get<std::vector<double>>();
    } else {
      c.theta = symmetric_grid(th.at("max").get<double>(), th.at("n").get<int>());
    }
    if (j.contains("tolerance")) {
      const auto& t = j.at("tolerance");
      c.tol.cf = t.value("cf", c.tol.cf);
      c.tol.ks = t.value("ks", c.tol.ks);
      c.tol.nondegenerate = t.value("nondegenerate", c.tol.nondegenerate);
    }
    c.output = base_dir / j.value("output", std::string("runs"));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  c.validate();
  return c;
}

inline ExperimentConfig load_experiment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
  return parse_experiment(j, path.parent_path());
}

/// FNV-1a 64 of the canonical config dump, without the output location.
inline std::string config_hash(const json& config) {
  json j = config;
  j.erase("output");
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : j.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// Report

enum class Status { pass, fail, unreliable };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::pass: return "pass";
    case Status::fail: return "fail";
    default: return "unreliable";
  }
}

inline int exit_code(Status s) { return s == Status::pass ? 0 : s == Status::fail ? 1 : 2; }

struct SampleSummary {
  std::size_t count = 0;
  std::size_t dropped = 0;
  double mean = 0.0;
  double sd = 0.0;
  double stderr_ = 0.0;
};

struct FluctuationReport {
  json config;
  std::string hash;
  std::string process;
  std::string regime;
  std::string theorem;
  double normalizer = 1.0;
  SampleSummary summary;
  ComplexGridFunction ecf;
  std::string target_id;
  ComplexGridFunction target;
  double cf_distance = 0.0;
  std::optional<double> ks_distance;
  std::optional<std::uint64_t> ks_seed;
  std::optional<std::uint64_t> compare_seed;
  std::optional<double> ecf_at_one;
  Tolerances tol;
  Status status = Status::fail;
  std::vector<std::string> notes;
  std::filesystem::path directory;
  /// Per-replication draws, in replication order; dropped ones are flagged.
  std::vector<FluctuationSample> samples;
};

inline json grid_to_json(const ComplexGridFunction& g) {
  json re = json::array(), im = json::array();
  for (const auto& v : g.values) {
    re.push_back(v.real());
    im.push_back(v.imag());
  }
  return {{"theta", g.grid}, {"re", re}, {"im", im}, {"role", to_string(g.role)}};
}

inline json to_json(const FluctuationReport& r) {
  json j{{"config", r.config},
         {"hash", r.hash},
         {"process", r.process},
         {"regime", r.regime},
         {"theorem", r.theorem},
         {"normalizer", r.normalizer},
         {"summary",
          {{"count", r.summary.count},
           {"dropped", r.summary.dropped},
           {"mean", r.summary.mean},
           {"sd", r.summary.sd},
           {"stderr", r.summary.stderr_}}},
         {"ecf", grid_to_json(r.ecf)},
         {"target", {{"id", r.target_id}, {"values", grid_to_json(r.target)}}},
         {"cf_distance", r.cf_distance},
         {"tolerance", {{"cf", r.tol.cf}, {"ks", r.tol.ks}, {"nondegenerate", r.tol.nondegenerate}}},
         {"status", to_string(r.status)},
         {"notes", r.notes}};
  if (r.ks_distance) j["ks_distance"] = *r.ks_distance;
  if (r.ks_seed) j["ks_seed"] = *r.ks_seed;
  if (r.compare_seed) j["compare_seed"] = *r.compare_seed;
  if (r.ecf_at_one) j["abs_ecf_at_1"] = *r.ecf_at_one;
  return j;
}

// ---------------------------------------------------------------------------
// Running

namespace detail {

struct Draws {
  std::vector<FluctuationSample> all;
  std::vector<double> D;
  std::vector<double> mixing;
  std::size_t dropped = 0;
};

/// The mixing variable of the small and boundary limit laws, read at t + s.
inline double mixing_value(const Regime& regime, double lambda, const ParticleCloud& cloud) {
  if (regime.kind == RegimeKind::boundary) return derivative_martingale(cloud, lambda < 0.0 ? -1 : 1);
  const double factor = regime.theorem == Theorem::stable_tail ? 1.0 + regime.beta.value() : 2.0;
  return additive_martingale(cloud, factor * lambda);
}

inline Draws draw(const FluctuationConfig& fc, const ParticleSystem* sys, const Regime& regime, std::size_t reps,
                  std::uint64_t seed, unsigned threads) {
  struct One {
    FluctuationSample f;
    double mix = 0.0;
  };
  auto body = [&](std::size_t, Stream& rng) {
    One o;
    if (fc.process == Process::csbp || fc.process == Process::sbm_mass) {
      o.f = fluctuation_sample(fc, sys, rng);
      o.mix = o.f.W_ts;
      return o;
    }
    // Same path as fluctuation_sample, keeping the cloud for the mixing variable.
    const auto clouds = simulate_particles(*sys, {fc.t, fc.t + fc.s}, fc.cap, rng);
    if (clouds.back().truncated) {
      o.f.truncated = true;
      return o;
    }
    o.f.W_t = additive_martingale(clouds[0], fc.lambda);
    o.f.W_ts = additive_martingale(clouds[1], fc.lambda);
    o.f.D = normalizer(fc.regime, fc.lambda, fc.t) * (o.f.W_ts - o.f.W_t);
    if (regime.kind == RegimeKind::small || regime.kind == RegimeKind::boundary) o.mix = mixing_value(regime, fc.lambda, clouds[1]);
    return o;
  };
  const auto ones = replicate(reps, seed, body, threads);
  Draws d;
  for (const auto& o : ones) {
    d.all.push_back(o.f);
    if (o.f.truncated) {
      ++d.dropped;
      continue;
    }
    d.D.push_back(o.f.D);
    d.mixing.push_back(o.mix);
  }
  return d;
}

}  // namespace detail

/// Runs the experiment and writes samples.csv and report.json under
/// cfg.output/<hash>. Set write = false to skip the files.
inline FluctuationReport run_experiment(const ExperimentConfig& cfg, bool write = true) {
  cfg.validate();
  const BranchingMechanism raw = cfg.mechanism ? *cfg.mechanism : load_mechanism(cfg.mechanism_file);
  const BranchingMechanism mech = raw.normalized ? raw : normalize(raw).mechanism;
  const auto conditions = check_conditions(mech);
  Regime regime = regime_classify(cfg.lambda, conditions);
  if (cfg.regime_override) regime.kind = *cfg.regime_override;
  const auto family = family_of(mech);

  FluctuationReport rep;
  rep.config = cfg.source.is_null() ? json::object() : cfg.source;
  rep.hash = config_hash(rep.config);
  rep.tol = cfg.tol;
  rep.regime = to_string(regime.kind);
  rep.theorem = to_string(regime.theorem);

  FluctuationConfig fc;
  fc.process = cfg.process ? *cfg.process
                           : (family && family->kind == Family::quadratic && cfg.lambda == 0.0 ? Process::csbp : Process::sbm);
  fc.lambda = cfg.lambda;
  fc.t = cfg.t;
  fc.s = cfg.s;
  fc.N = cfg.N;
  fc.cap = cfg.cap;
  fc.regime = regime;
  rep.process = to_string(fc.process);
  rep.normalizer = normalizer(regime, cfg.lambda, cfg.t);
  const bool mass_only = fc.process == Process::csbp || fc.process == Process::sbm_mass;
  if (mass_only && !(family && family->kind == Family::quadratic)) throw ConfigError("exact mass samplers need the quadratic mechanism");

  std::optional<ParticleSystem> sys;
  if (fc.process == Process::skeleton) sys.emplace(ParticleSystem::skeleton(mech));
  if (fc.process == Process::sbm) sys.emplace(ParticleSystem::sbm(mech, static_cast<std::size_t>(cfg.N)));

  auto draws = detail::draw(fc, sys ? &*sys : nullptr, regime, cfg.reps, cfg.seed, cfg.threads);
  rep.samples = draws.all;
  rep.summary.count = draws.D.size();
  rep.summary.dropped = draws.dropped;
  if (draws.D.size() >= 2) {
    const auto m = stats::mean_estimate(draws.D);
    rep.summary.mean = m.mean;
    rep.summary.stderr_ = m.stderr_;
    rep.summary.sd = m.stderr_ * std::sqrt(static_cast<double>(m.n));
  }
  if (draws.D.empty()) throw ConfigError("every replication was truncated");
  rep.ecf = ecf(draws.D, cfg.theta);

  bool pass = true;
  if (regime.kind == RegimeKind::small || regime.kind == RegimeKind::boundary) {
    // Closed-form limit CF when lambda = 0 in a family with closed-form cumulants.
    if (family && cfg.lambda == 0.0 && regime.kind == RegimeKind::small) {
      rep.target = limit_fluctuation_cf(*family, cfg.theta);
      rep.target_id = "limitCF:" + family->name();
    } else {
      rep.target_id = "mixture-ecf";
    }
    // Mixture-sampler draws with W from the proxy at t + s; for the quadratic
    // family at lambda = 0 the exact W_inf law is used.
    MixtureConstants mc;
    mc.sigma2 = sigma2(mech);
    if (regime.theorem == Theorem::stable_tail) {
      mc.A1 = conditions.A1_hat.value();
      mc.beta = regime.beta.value();
    }
    const std::uint64_t ks_seed = cfg.seed ^ 0x5bd1e9955bd1e995ULL;
    rep.ks_seed = ks_seed;
    std::vector<double> mixing = draws.mixing;
    if (family && family->kind == Family::quadratic && cfg.lambda == 0.0) {
      mixing = replicate(draws.D.size(), ks_seed ^ 1ULL, [](std::size_t, Stream& rng) {
        const auto k = rng.poisson(1.0);
        return k == 0 ? 0.0 : rng.gamma(static_cast<double>(k), 1.0);
      }, cfg.threads);
      rep.notes.push_back("mixing variable: exact W_inf(0) law (Poisson(1) sum of Exp(1))");
    } else {
      rep.notes.push_back("mixing variable: proxy at t + s from the same paths");
    }
    const auto target_draws = replicate(
        draws.D.size(), ks_seed, [&](std::size_t, Stream& rng) { return mixture_limit_sample(regime, cfg.lambda, mixing, mc, rng); },
        cfg.threads);
    if (rep.target_id == "mixture-ecf") rep.target = ecf(target_draws, cfg.theta);
    rep.target.role = ComplexGridFunction::Role::limitCF;
    rep.ks_distance = stats::ks_distance(draws.D, target_draws);
    pass = pass && *rep.ks_distance <= cfg.tol.ks;
  } else if (regime.kind == RegimeKind::large) {
    // No computable limit: compare against the fluctuation at a second horizon.
    if (!cfg.t_compare) throw ConfigError("the large regime needs t_compare");
    FluctuationConfig other = fc;
    other.t = *cfg.t_compare;
    const std::uint64_t compare_seed = cfg.seed ^ 0x27d4eb2f165667c5ULL;
    rep.compare_seed = compare_seed;
    auto second = detail::draw(other, sys ? &*sys : nullptr, regime, cfg.reps, compare_seed, cfg.threads);
    rep.summary.dropped += second.dropped;
    if (second.D.empty()) throw ConfigError("every replication at t_compare was truncated");
    rep.target = ecf(second.D, cfg.theta);
    rep.target_id = "ecf:t=" + std::to_string(*cfg.t_compare);
    rep.ecf_at_one = std::abs(stats::ecf(draws.D, 1.0));
    pass = pass && *rep.ecf_at_one <= cfg.tol.nondegenerate;
  } else {
    throw ConfigError(std::string("no fluctuation target for the ") + to_string(regime.kind) + " regime");
  }
  rep.cf_distance = cf_distance(rep.ecf, rep.target);
  pass = pass && rep.cf_distance <= cfg.tol.cf;

  const double dropped_fraction = static_cast<double>(rep.summary.dropped) / static_cast<double>(cfg.reps * (cfg.t_compare ? 2 : 1));
  if (dropped_fraction >= 0.01) {
    rep.status = Status::unreliable;
    rep.notes.push_back("dropped fraction " + std::to_string(dropped_fraction) + " at or above 1%");
  } else {
    rep.status = pass ? Status::pass : Status::fail;
  }

  if (write) {
    rep.directory = cfg.output / rep.hash;
    std::filesystem::create_directories(rep.directory);
    std::ofstream csv(rep.directory / "samples.csv");
    csv << "rep,seed,t,lambda,W_t,W_ts,D,truncated\n";
    csv.precision(17);
    for (std::size_t i = 0; i < rep.samples.size(); ++i) {
      const auto& f = rep.samples[i];
      csv << i << ',' << cfg.seed << ',' << cfg.t << ',' << cfg.lambda << ',' << f.W_t << ',' << f.W_ts << ',' << f.D << ','
          << (f.truncated ? 1 : 0) << '\n';
    }
    std::ofstream(rep.directory / "report.json") << to_json(rep).dump(2) << '\n';
  }
  return rep;
}

}  // namespace sbmlab
