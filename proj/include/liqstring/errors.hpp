#pragma once

#include <stdexcept>
#include <string>

namespace liqstring {

// Base of everything the library throws on purpose.
struct error : std::runtime_error {
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept { return 1; }
};

// Bad or inconsistent configuration, bad flags.
struct config_error : error {
  using error::error;
  int exit_code() const noexcept override { return 2; }
};

// Malformed input data.
struct data_error : error {
  using error::error;
  int exit_code() const noexcept override { return 3; }
};

struct parse_error : data_error {
  using data_error::data_error;
};

struct dimension_error : data_error {
  using data_error::data_error;
};

// Anything that goes wrong inside the numerics.
struct numerical_error : error {
  using error::error;
  int exit_code() const noexcept override { return 4; }
};

struct domain_error : numerical_error {
  using numerical_error::numerical_error;
};

struct solver_error : numerical_error {
  using numerical_error::numerical_error;
};

struct positivity_violation : numerical_error {
  using numerical_error::numerical_error;
};

struct clearing_failure : numerical_error {
  using numerical_error::numerical_error;
};

struct calibration_error : numerical_error {
  using numerical_error::numerical_error;
};

struct inversion_error : numerical_error {
  using numerical_error::numerical_error;
};

struct inapplicable_error : numerical_error {
  using numerical_error::numerical_error;
};

}  // namespace liqstring
