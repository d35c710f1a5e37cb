#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace elliptorus {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionError : Error {
  using Error::Error;
};

/// Parse or IO failure of a model/series/config file.
struct IoError : Error {
  using Error::Error;
};

/// Input Hamiltonian violates a structural hypothesis (d'Alembert, grades, averages).
struct ModelError : Error {
  using Error::Error;
};

/// An internal consistency check failed (class membership, back-substitution, ...).
struct InvariantViolation : Error {
  using Error::Error;
};

/// A numeric series or sequence left its valid range (divergence, overflow).
struct NumericalError : Error {
  using Error::Error;
};

/// A small divisor fell below its floor. k and l identify the offending combination.
struct ResonanceDetected : Error {
  ResonanceDetected(std::string what, std::vector<int> k_, std::vector<int> l_, int r_)
      : Error(std::move(what)), k(std::move(k_)), l(std::move(l_)), r(r_) {}
  std::vector<int> k;
  std::vector<int> l;
  int r;
};

}  // namespace elliptorus
