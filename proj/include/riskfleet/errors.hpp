#pragma once

#include <stdexcept>
#include <string>

namespace riskfleet {

// Invalid scenario files, plans, or parameter ranges. The CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite loss or other numeric breakdown during training. Exit code 3.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Contract violations are programming errors, not user input.
[[noreturn]] inline void contract_violation(const std::string& what) {
  throw std::logic_error("contract violation: " + what);
}

inline void expect(bool cond, const char* what) {
  if (!cond) contract_violation(what);
}

}  // namespace riskfleet
