#pragma once

#include <stdexcept>
#include <string>

namespace aunets {

// Malformed or inconsistent input data (shapes, files, label rows).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor/layer shapes that do not line up.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A (view, AU) slot of the ensemble has no usable checkpoint.
class MissingCheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace aunets
