#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "aunets/common.hpp"

namespace aunets::netcore {

// Channel-major (C, H, W) shape. Flat feature vectors use (1, 1, n).
struct Shape {
  int channels = 0;
  int height = 0;
  int width = 0;

  constexpr std::size_t size() const {
    return static_cast<std::size_t>(channels) * height * width;
  }
  constexpr bool valid() const { return channels > 0 && height > 0 && width > 0; }
  static constexpr Shape flat(int n) { return {1, 1, n}; }
  constexpr bool is_flat() const { return channels == 1 && height == 1; }

  friend constexpr bool operator==(const Shape&, const Shape&) = default;
};

inline std::string to_string(const Shape& s) {
  return std::to_string(s.height) + "x" + std::to_string(s.width) + "x" + std::to_string(s.channels);
}

// Storage aligned for the widest vector unit, so kernels take the same path on every allocation.
template <typename T>
using Buffer = std::vector<T, Eigen::aligned_allocator<T>>;

// Dense CHW array.
template <typename T>
struct Tensor {
  Shape shape;
  Buffer<T> values;

  Tensor() = default;
  explicit Tensor(Shape s, T fill = T(0)) : shape(s), values(s.size(), fill) {}
  Tensor(Shape s, Buffer<T> v) : shape(s), values(std::move(v)) {
    if (values.size() != shape.size()) throw ShapeError("tensor value count does not match shape " + to_string(shape));
  }

  T& at(int c, int y, int x) {
    return values[(static_cast<std::size_t>(c) * shape.height + y) * shape.width + x];
  }
  const T& at(int c, int y, int x) const {
    return values[(static_cast<std::size_t>(c) * shape.height + y) * shape.width + x];
  }
  std::size_t size() const { return values.size(); }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape);
    for (std::size_t i = 0; i < values.size(); ++i) out.values[i] = static_cast<U>(values[i]);
    return out;
  }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

}  // namespace aunets::netcore
