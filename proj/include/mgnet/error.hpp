#pragma once

#include <stdexcept>
#include <string>

namespace mgnet {

// Dimension/contract violations (mismatched shapes, mode out of range).
class ShapeError : public std::invalid_argument {
public:
  explicit ShapeError(const std::string &msg) : std::invalid_argument(msg) {}
};

// Malformed or degenerate input data (files, manifests, labels, zero tensors).
class DataError : public std::runtime_error {
public:
  explicit DataError(const std::string &msg) : std::runtime_error(msg) {}
};

// Numerical failure (non-finite values where finite ones are required).
class NumericError : public std::runtime_error {
public:
  explicit NumericError(const std::string &msg) : std::runtime_error(msg) {}
};

}  // namespace mgnet
