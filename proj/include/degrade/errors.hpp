#pragma once

#include <stdexcept>
#include <string>

namespace degrade {

// Bad input: malformed files, inconsistent dimensions, unsupported options.
class ValidationError : public std::invalid_argument {
 public:
  explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

// Numerical breakdown: rank deficiency, non-PSD covariance, non-finite likelihood.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace degrade
