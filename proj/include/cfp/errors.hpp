#pragma once

#include <stdexcept>
#include <string>

namespace cfp {

// runtime failures of a solver (exit code 2 in the CLI)
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// argument outside the domain of an operation
class DomainError : public Error {
 public:
  using Error::Error;
};

// malformed or incomplete user input (exit code 1 in the CLI)
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace cfp
