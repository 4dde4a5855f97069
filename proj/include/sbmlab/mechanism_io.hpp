#pragma once

// Mechanism specification files: one `key = value` per line, '#' starts a
// comment.
//
//   kind = quadratic | stable | tabulated
//   a = 1                      (default 1)
//   b = 1                      (default 1 for quadratic, 0 otherwise)
//   A1 = 0.2821  or  A2 = 1    (stable; exactly one of the two)
//   beta = 0.5                 (stable)
//   density = levy.txt         (tabulated; two columns r, density)
//   tail_exponent = -3.5       (tabulated; optional stub exponent)
//
// A relative density path is resolved against the spec file's directory.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sbmlab/errors.hpp"
#include "sbmlab/mechanism.hpp"

namespace sbmlab {

namespace detail {

inline std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

inline double parse_number(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("mechanism key '" + key + "': not a number: '" + text + "'");
  }
}

}  // namespace detail

/// Reads two whitespace- or comma-separated columns (r, density).
inline TabulatedDensity read_density_table(const std::filesystem::path& path, std::optional<double> tail_exponent) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open density table " + path.string());
  std::vector<double> r, d;
  std::string line;
  while (std::getline(in, line)) {
    line = detail::trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    for (char& c : line)
      if (c == ',') c = ' ';
    std::istringstream row(line);
    double x = 0.0, y = 0.0;
    if (!(row >> x >> y)) throw ConfigError("density table " + path.string() + ": malformed row '" + line + "'");
    r.push_back(x);
    d.push_back(y);
  }
  return TabulatedDensity(std::move(r), std::move(d), tail_exponent);
}

inline BranchingMechanism parse_mechanism(const std::string& text, const std::filesystem::path& base_dir = ".") {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = detail::trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("mechanism line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    static const char* known[] = {"kind", "a", "b", "A1", "A2", "beta", "density", "tail_exponent", "label"};
    if (std::find(std::begin(known), std::end(known), key) == std::end(known)) {
      throw ConfigError("mechanism line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    if (!kv.emplace(key, value).second) throw ConfigError("mechanism key '" + key + "' given twice");
  }
  auto get = [&kv](const std::string& k) -> std::optional<double> {
    auto it = kv.find(k);
    if (it == kv.end()) return std::nullopt;
    return detail::parse_number(k, it->second);
  };
  if (!kv.count("kind")) throw ConfigError("mechanism file lacks 'kind'");
  const std::string kind = kv["kind"];
  const double a = get("a").value_or(1.0);
  if (!(a > 0.0)) throw ConfigError("mechanism needs a > 0");

  BranchingMechanism m;
  if (kind == "quadratic") {
    m = quadratic_mechanism(a, get("b").value_or(1.0));
  } else if (kind == "stable") {
    const auto beta = get("beta");
    if (!beta) throw ConfigError("stable mechanism needs 'beta'");
    const auto A1 = get("A1");
    const auto A2 = get("A2");
    if (A1.has_value() == A2.has_value()) throw ConfigError("stable mechanism needs exactly one of 'A1', 'A2'");
    const double b = get("b").value_or(0.0);
    m = A1 ? stable_mechanism(a, b, *A1, *beta) : stable_mechanism_from_A2(a, b, *A2, *beta);
  } else if (kind == "tabulated") {
    if (!kv.count("density")) throw ConfigError("tabulated mechanism needs 'density'");
    std::filesystem::path path = kv["density"];
    if (path.is_relative()) path = base_dir / path;
    m = tabulated_mechanism(a, get("b").value_or(0.0), read_density_table(path, get("tail_exponent")));
  } else {
    throw ConfigError("unknown mechanism kind '" + kind + "'");
  }
  if (m.b < 0.0) throw ConfigError("mechanism needs b >= 0");
  if (kv.count("label")) m.label = kv["label"];
  m.normalized = false;
  return m;
}

inline BranchingMechanism load_mechanism(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open mechanism file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_mechanism(buf.str(), path.parent_path().empty() ? std::filesystem::path(".") : path.parent_path());
}

}  // namespace sbmlab
