#pragma once

#include <stdexcept>
#include <string>

namespace dfrnet {

// Error taxonomy shared by every module. The CLI maps these onto exit codes
// (ParameterError -> 1, DataError/IoError -> 2, NumericError -> 3).

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dfrnet
