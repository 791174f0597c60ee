#pragma once

#include <stdexcept>
#include <string>

namespace dlrv {

/// Base class for all errors thrown by this library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidArgument : Error {
  using Error::Error;
};

/// Cholesky factorization hit a non-positive pivot.
struct NotPositiveDefinite : Error {
  using Error::Error;
};

/// Orthonormalization input had numerically dependent columns.
struct RankDeficient : Error {
  using Error::Error;
};

/// Mesh file parsing or mesh validation failure; message names the
/// offending element/facet index.
struct MeshError : Error {
  using Error::Error;
};

/// Singular Poisson system outside the supported gauge setting.
struct GaugeViolation : Error {
  using Error::Error;
};

/// A time integration produced non-finite values.
struct NumericalBlowup : Error {
  NumericalBlowup(const std::string& what, double time)
      : Error(what + " at t = " + std::to_string(time)), t(time) {}
  double t;
};

/// Scenario configuration problem; message names the offending key.
struct ConfigError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace dlrv
