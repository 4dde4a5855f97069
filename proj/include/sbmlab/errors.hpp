#pragma once

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace sbmlab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Adaptive quadrature did not reach its tolerance. Carries what it had.
class QuadratureError : public Error {
 public:
  QuadratureError(const std::string& what, std::complex<double> partial, double error_estimate)
      : Error(what + " (partial estimate " + std::to_string(partial.real()) + (partial.imag() != 0.0 ? " + " + std::to_string(partial.imag()) + "i" : "") +
              ", error estimate " + std::to_string(error_estimate) + ")"),
        partial_(partial),
        error_estimate_(error_estimate) {}

  std::complex<double> partial_estimate() const noexcept { return partial_; }
  double error_estimate() const noexcept { return error_estimate_; }

 private:
  std::complex<double> partial_;
  double error_estimate_;
};

/// A complex power was requested off the closed right half-plane.
class BranchError : public Error {
 public:
  BranchError(const std::string& what, std::complex<double> offending)
      : Error(what + " (offending value " + std::to_string(offending.real()) + " + " + std::to_string(offending.imag()) + "i)"),
        offending_(offending) {}

  std::complex<double> offending() const noexcept { return offending_; }

 private:
  std::complex<double> offending_;
};

class RootError : public Error {
 public:
  using Error::Error;
};

/// The fixed-point solver left a residual above tolerance; the profile is kept.
class ResidualError : public Error {
 public:
  ResidualError(const std::string& what, std::vector<double> grid, std::vector<double> residual)
      : Error(what), grid_(std::move(grid)), residual_(std::move(residual)) {}

  const std::vector<double>& grid() const noexcept { return grid_; }
  const std::vector<double>& residual() const noexcept { return residual_; }

 private:
  std::vector<double> grid_;
  std::vector<double> residual_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace sbmlab
