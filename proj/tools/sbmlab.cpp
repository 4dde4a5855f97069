// Command-line front end: mechanism checks, offspring laws, simulation,
// characteristic-function solvers, limit-law sampling and experiments.
//
// Exit codes: 0 pass, 1 fail, 2 unreliable, 3 usage or configuration error.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "sbmlab/analytic.hpp"
#include "sbmlab/conditions.hpp"
#include "sbmlab/lab.hpp"
#include "sbmlab/limits.hpp"
#include "sbmlab/mechanism.hpp"
#include "sbmlab/mechanism_io.hpp"
#include "sbmlab/simulate.hpp"
#include "sbmlab/skeleton.hpp"

namespace {

using namespace sbmlab;
using nlohmann::json;

constexpr int kUsage = 3;

BranchingMechanism load_normalized(const std::string& path) {
  const auto raw = load_mechanism(path);
  return normalize(raw).mechanism;
}

std::ostream& open_out(const std::string& path, std::ofstream& file) {
  if (path.empty() || path == "-") return std::cout;
  file.open(path);
  if (!file) throw ConfigError("cannot write " + path);
  return file;
}

void write_grid_csv(const ComplexGridFunction& g, const std::string& path) {
  std::ofstream file;
  auto& out = open_out(path, file);
  out.precision(17);
  out << "theta,re,im\n";
  for (std::size_t i = 0; i < g.size(); ++i) out << g.grid[i] << ',' << g.values[i].real() << ',' << g.values[i].imag() << '\n';
}

std::vector<double> read_column(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::vector<double> v;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      std::size_t used = 0;
      const double x = std::stod(line, &used);
      v.push_back(x);
    } catch (const std::exception&) {
      if (v.empty()) continue;  // header row
      throw ConfigError("non-numeric row in " + path + ": '" + line + "'");
    }
  }
  if (v.empty()) throw ConfigError(path + " holds no samples");
  return v;
}

int cmd_mech_check(const std::string& file) {
  const auto raw = load_mechanism(file);
  const auto norm = normalize(raw);
  json j = to_json(check_conditions(norm.mechanism));
  j["scaling"] = {{"time", norm.scaling.time_factor}, {"space", norm.scaling.space_factor}, {"mass", norm.scaling.mass_factor}};
  j["kind"] = raw.kind();
  j["sigma2"] = sigma2(norm.mechanism);
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_skeleton(const std::string& file, double tail_tol) {
  OffspringOptions opt;
  opt.tail_tol = tail_tol;
  const auto d = derive_offspring(load_normalized(file), opt);
  std::vector<double> first;
  for (std::size_t k = 0; k < 20 && k <= d.kmax(); ++k) first.push_back(d.pk(k));
  json j{{"q", d.q()}, {"p", first}, {"tail_mass", d.tail_mass}, {"kmax", d.kmax()}, {"mean", d.mean()},
         {"mean_exact", d.mean_exact}};
  std::cout << j.dump(2) << '\n';
  return 0;
}

struct SimulateArgs {
  std::string kind, mech, out;
  double t = 5.0, lambda = 0.0;
  std::size_t reps = 1000, N = 100, cap = kDefaultPopulationCap;
  std::uint64_t seed = 0;
  unsigned threads = 0;
};

int cmd_simulate(const SimulateArgs& a) {
  const auto m = load_normalized(a.mech);
  struct Row {
    double w = 0.0, dplus = std::numeric_limits<double>::quiet_NaN(), dminus = std::numeric_limits<double>::quiet_NaN(),
           maxc = std::numeric_limits<double>::quiet_NaN();
    bool truncated = false;
  };
  std::vector<Row> rows;
  if (a.kind == "csbp") {
    if (!family_of(m) || family_of(m)->kind != Family::quadratic) throw ConfigError("csbp needs the quadratic mechanism");
    if (a.lambda != 0.0) throw ConfigError("csbp only carries W(0)");
    rows = replicate(a.reps, a.seed, [&](std::size_t, Stream& rng) {
      Row r;
      r.w = std::exp(-a.t) * simulate_csbp_quadratic(1.0, {a.t}, rng).masses[0];
      return r;
    }, a.threads);
  } else {
    const auto sys = a.kind == "bbm" ? ParticleSystem::skeleton(m) : ParticleSystem::sbm(m, a.N);
    rows = replicate(a.reps, a.seed, [&](std::size_t, Stream& rng) {
      Row r;
      const auto c = simulate_particles(sys, {a.t}, a.cap, rng)[0];
      if (c.truncated) {
        r.truncated = true;
        return r;
      }
      r.w = additive_martingale(c, a.lambda);
      r.dplus = derivative_martingale(c, 1);
      r.dminus = derivative_martingale(c, -1);
      if (c.count() > 0 && a.t > 0.0) r.maxc = centered_max(c);
      return r;
    }, a.threads);
  }
  std::ofstream file;
  auto& out = open_out(a.out, file);
  out.precision(17);
  out << "rep,seed,t,lambda,Z_or_W,dW_plus,dW_minus,max_centered,truncated\n";
  auto field = [&out](double v) {
    if (std::isfinite(v)) out << v;
  };
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    out << i << ',' << a.seed << ',' << a.t << ',' << a.lambda << ',';
    if (!r.truncated) field(r.w);
    out << ',';
    field(r.dplus);
    out << ',';
    field(r.dminus);
    out << ',';
    field(r.maxc);
    out << ',' << (r.truncated ? 1 : 0) << '\n';
  }
  return 0;
}

Family parse_family(const std::string& name, double beta) {
  if (name == "quadratic") return Family::make_quadratic();
  if (name == "stable") return Family::make_stable(beta);
  throw ConfigError("unknown family '" + name + "'");
}

int cmd_limits_sample(const std::string& regime_name, double lambda, double beta, double sigma2_value, double A1,
                      const std::string& w_file, std::size_t n, std::uint64_t seed, const std::string& out_path) {
  Regime r;
  r.kind = parse_regime_kind(regime_name);
  if (beta > 0.0) {
    r.theorem = Theorem::stable_tail;
    r.beta = beta;
    r.inner = kSqrt2 / (1.0 + beta);
  } else {
    r.theorem = Theorem::finite_variance;
  }
  MixtureConstants c;
  c.sigma2 = sigma2_value;
  c.beta = beta > 0.0 ? beta : 0.5;
  c.A1 = A1 > 0.0 ? A1 : (beta > 0.0 ? beta / std::tgamma(1.0 - beta) : 0.0);
  const auto W = read_column(w_file);
  const auto draws = replicate(n, seed, [&](std::size_t, Stream& rng) { return mixture_limit_sample(r, lambda, W, c, rng); });
  std::ofstream file;
  auto& out = open_out(out_path, file);
  out.precision(17);
  out << "value\n";
  for (double v : draws) out << v << '\n';
  return 0;
}

int cmd_report_show(const std::string& dir) {
  const std::filesystem::path p = std::filesystem::path(dir) / "report.json";
  std::ifstream in(p);
  if (!in) throw ConfigError("no report at " + p.string());
  const auto j = json::parse(in);
  std::cout << "hash        " << j.at("hash").get<std::string>() << '\n'
            << "process     " << j.at("process").get<std::string>() << '\n'
            << "regime      " << j.at("regime").get<std::string>() << " (" << j.at("theorem").get<std::string>() << ")\n"
            << "samples     " << j.at("summary").at("count") << " kept, " << j.at("summary").at("dropped") << " dropped\n"
            << "mean        " << j.at("summary").at("mean") << " +- " << j.at("summary").at("stderr") << '\n'
            << "target      " << j.at("target").at("id").get<std::string>() << '\n'
            << "cf distance " << j.at("cf_distance") << " (tol " << j.at("tolerance").at("cf") << ")\n";
  if (j.contains("ks_distance")) std::cout << "ks distance " << j.at("ks_distance") << " (tol " << j.at("tolerance").at("ks") << ")\n";
  if (j.contains("abs_ecf_at_1")) std::cout << "|ecf(1)|    " << j.at("abs_ecf_at_1") << '\n';
  const auto status = j.at("status").get<std::string>();
  std::cout << "status      " << status << '\n';
  return status == "pass" ? 0 : status == "fail" ? 1 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tail fluctuations of super-Brownian martingales: checks, solvers and simulation"};
  app.require_subcommand(1);
  int code = 0;

  auto* mech = app.add_subcommand("mech", "Branching mechanism tools");
  mech->require_subcommand(1);
  std::string mech_file;
  auto* mech_check = mech->add_subcommand("check", "Print the condition report as JSON");
  mech_check->add_option("file", mech_file, "Mechanism file")->required()->check(CLI::ExistingFile);

  auto* skel = app.add_subcommand("skeleton", "Skeleton offspring law");
  skel->require_subcommand(1);
  auto* skel_derive = skel->add_subcommand("derive", "Print q, the first p_k and the tail mass as JSON");
  double tail_tol = 1e-9;
  skel_derive->add_option("file", mech_file, "Mechanism file")->required()->check(CLI::ExistingFile);
  skel_derive->add_option("--tail-tol", tail_tol, "Tail mass tolerance");

  auto* sim = app.add_subcommand("simulate", "Simulate bbm | sbm | csbp and write per-replication CSV");
  SimulateArgs sa;
  sim->add_option("kind", sa.kind, "bbm, sbm or csbp")->required()->check(CLI::IsMember({"bbm", "sbm", "csbp"}));
  sim->add_option("--mech", sa.mech, "Mechanism file")->required()->check(CLI::ExistingFile);
  sim->add_option("--t", sa.t, "Time horizon")->check(CLI::NonNegativeNumber);
  sim->add_option("--lambda", sa.lambda, "Martingale parameter");
  sim->add_option("--reps", sa.reps, "Replications")->check(CLI::PositiveNumber);
  sim->add_option("--N", sa.N, "Particle count for sbm")->check(CLI::PositiveNumber);
  sim->add_option("--cap", sa.cap, "Population cap");
  sim->add_option("--seed", sa.seed, "Seed")->required();
  sim->add_option("--threads", sa.threads, "Worker threads (0 = all cores)");
  sim->add_option("--out", sa.out, "Output CSV (default stdout)");

  auto* cfsolve = app.add_subcommand("cfsolve", "Solve the lambda = 0 fixed point and write theta,re,im");
  double theta_max = 10.0, tol = 1e-8;
  int nodes = 200;
  std::string out_path;
  cfsolve->add_option("--mech", mech_file, "Mechanism file")->required()->check(CLI::ExistingFile);
  cfsolve->add_option("--theta-max", theta_max, "Largest |theta|")->check(CLI::PositiveNumber);
  cfsolve->add_option("--tol", tol, "Residual tolerance")->check(CLI::PositiveNumber);
  cfsolve->add_option("--n", nodes, "Nodes per half grid")->check(CLI::PositiveNumber);
  cfsolve->add_option("--out", out_path, "Output CSV (default stdout)");

  auto* limitcf = app.add_subcommand("limitcf", "Tail-fluctuation CF at time t, or its limit when --t is absent");
  std::string family_name = "quadratic";
  double beta = 0.5;
  std::optional<double> t_opt;
  limitcf->add_option("--family", family_name, "quadratic or stable")->check(CLI::IsMember({"quadratic", "stable"}));
  limitcf->add_option("--beta", beta, "Stable index in (0,1)");
  limitcf->add_option("--t", t_opt, "Time");
  limitcf->add_option("--theta-max", theta_max, "Largest |theta|")->check(CLI::PositiveNumber);
  limitcf->add_option("--n", nodes, "Nodes per half grid")->check(CLI::PositiveNumber);
  limitcf->add_option("--out", out_path, "Output CSV (default stdout)");

  auto* limits = app.add_subcommand("limits", "Limit-law samplers");
  limits->require_subcommand(1);
  auto* lsample = limits->add_subcommand("sample", "Draw from a mixture limit law");
  std::string regime_name = "small", w_file;
  double lambda = 0.0, sigma2_value = 2.0, A1 = 0.0, lbeta = 0.0;
  std::size_t n = 100000;
  std::uint64_t seed = 0;
  lsample->add_option("--regime", regime_name, "small or boundary");
  lsample->add_option("--lambda", lambda, "lambda");
  lsample->add_option("--beta", lbeta, "Stable index; omit for the finite-variance law");
  lsample->add_option("--sigma2", sigma2_value, "sigma^2 for the finite-variance law");
  lsample->add_option("--A1", A1, "Tail constant for the stable law (default: unit stable)");
  lsample->add_option("--w-samples", w_file, "CSV column of mixing samples")->required()->check(CLI::ExistingFile);
  lsample->add_option("--n", n, "Draws")->check(CLI::PositiveNumber);
  lsample->add_option("--seed", seed, "Seed")->required();
  lsample->add_option("--out", out_path, "Output CSV (default stdout)");

  auto* fluct = app.add_subcommand("fluct", "Tail-fluctuation experiments");
  fluct->require_subcommand(1);
  auto* frun = fluct->add_subcommand("run", "Run an experiment config; exit code reports the verdict");
  std::string config_file;
  frun->add_option("config", config_file, "Experiment JSON")->required()->check(CLI::ExistingFile);

  auto* report = app.add_subcommand("report", "Experiment reports");
  report->require_subcommand(1);
  auto* rshow = report->add_subcommand("show", "Summarize a report directory");
  std::string report_dir;
  rshow->add_option("dir", report_dir, "Report directory")->required()->check(CLI::ExistingDirectory);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kUsage;
  }

  try {
    if (mech_check->parsed()) code = cmd_mech_check(mech_file);
    if (skel_derive->parsed()) code = cmd_skeleton(mech_file, tail_tol);
    if (sim->parsed()) code = cmd_simulate(sa);
    if (cfsolve->parsed()) {
      const auto sol = solve_W0(load_normalized(mech_file), theta_max, tol, nodes);
      write_grid_csv(sol.on_grid(symmetric_grid(theta_max, nodes)), out_path);
    }
    if (limitcf->parsed()) {
      const auto fam = parse_family(family_name, beta);
      const auto grid = symmetric_grid(theta_max, nodes);
      if (t_opt) {
        const auto sol = solve_W0(fam.mechanism(), theta_max, 1e-8);
        write_grid_csv(tail_fluctuation_cf(fam, sol, *t_opt, grid), out_path);
      } else {
        write_grid_csv(limit_fluctuation_cf(fam, grid), out_path);
      }
    }
    if (lsample->parsed()) code = cmd_limits_sample(regime_name, lambda, lbeta, sigma2_value, A1, w_file, n, seed, out_path);
    if (frun->parsed()) {
      const auto rep = run_experiment(load_experiment(config_file));
      std::cout << "report: " << rep.directory.string() << '\n';
      code = cmd_report_show(rep.directory.string());
    }
    if (rshow->parsed()) code = cmd_report_show(report_dir);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return code;
}
