#pragma once

#include <stdexcept>

namespace windstr {

// Bad user input: malformed config file, missing field, out-of-range
// override. The CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical failure at runtime: singular solve, diverged fixed point,
// unstable fit. The CLI maps this to exit code 3.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A component was queried before it had enough state (e.g. identifier
// still in its warm-up window).
struct NotReadyError : std::logic_error {
  using std::logic_error::logic_error;
};

}  // namespace windstr
