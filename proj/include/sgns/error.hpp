#pragma once

#include <stdexcept>
#include <string>

namespace sgns {

/// Invalid input: out-of-range parameters, mismatched grids, bad configuration.
class ParameterError : public std::invalid_argument {
 public:
  explicit ParameterError(const std::string& what) : std::invalid_argument(what) {}
};

/// A computation ran but did not produce a trustworthy answer.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace sgns
