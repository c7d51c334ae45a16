#pragma once

#include <stdexcept>
#include <string>

namespace m1rt {

// Bad input: parameters, configs, preconditions. CLI exit code 2.
class ValidationError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

// Failure while solving (CFL, non-finite state, I/O). CLI exit code 3.
class SolverError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw ValidationError(what);
}

}  // namespace m1rt
