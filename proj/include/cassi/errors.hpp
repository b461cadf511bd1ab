#pragma once

#include <stdexcept>
#include <string>

namespace cassi {

// Invalid argument values (negative wavelength, zero oversampling, ...).
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// Malformed or inconsistent configuration / data files.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shapes or geometries of two inputs disagree.
struct GeometryMismatch : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace cassi
