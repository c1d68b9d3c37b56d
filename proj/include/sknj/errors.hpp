#pragma once

#include <stdexcept>
#include <string>

namespace sknj {

/// Malformed input data: corrupt dataset files, invalid vectors, bad spectra text.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or command-line arguments.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace sknj
