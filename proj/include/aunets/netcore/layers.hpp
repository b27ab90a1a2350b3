#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "aunets/netcore/tensor.hpp"

namespace aunets::netcore {

enum class LayerKind : std::uint8_t {
  Conv3x3 = 0,  // stride 1, pad 1
  MaxPool2x2 = 1,
  Relu = 2,
  Flatten = 3,
  Fc = 4,
  Softmax = 5,
};

inline const char* to_string(LayerKind k) {
  switch (k) {
    case LayerKind::Conv3x3: return "conv3x3";
    case LayerKind::MaxPool2x2: return "maxpool2x2";
    case LayerKind::Relu: return "relu";
    case LayerKind::Flatten: return "flatten";
    case LayerKind::Fc: return "fc";
    case LayerKind::Softmax: return "softmax";
  }
  return "?";
}

// `in`/`out` are channels for Conv3x3 and dimensions for Fc; zero otherwise.
struct LayerSpec {
  LayerKind kind = LayerKind::Relu;
  int in = 0;
  int out = 0;
  bool trainable = true;

  static LayerSpec conv(int in_ch, int out_ch) { return {LayerKind::Conv3x3, in_ch, out_ch, true}; }
  static LayerSpec fc(int in_dim, int out_dim) { return {LayerKind::Fc, in_dim, out_dim, true}; }
  static LayerSpec pool() { return {LayerKind::MaxPool2x2, 0, 0, true}; }
  static LayerSpec relu() { return {LayerKind::Relu, 0, 0, true}; }
  static LayerSpec flatten() { return {LayerKind::Flatten, 0, 0, true}; }
  static LayerSpec softmax() { return {LayerKind::Softmax, 0, 0, true}; }

  bool has_params() const { return kind == LayerKind::Conv3x3 || kind == LayerKind::Fc; }

  std::size_t weight_count() const {
    switch (kind) {
      case LayerKind::Conv3x3: return static_cast<std::size_t>(out) * in * 9;
      case LayerKind::Fc: return static_cast<std::size_t>(out) * in;
      default: return 0;
    }
  }
  std::size_t bias_count() const { return has_params() ? static_cast<std::size_t>(out) : 0; }
  std::size_t param_count() const { return weight_count() + bias_count(); }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

// Output shape of `spec` applied to `in`; throws ShapeError on incompatibility.
inline Shape propagate(const LayerSpec& spec, const Shape& in, std::size_t index = 0) {
  auto fail = [&](const std::string& why) {
    throw ShapeError("layer " + std::to_string(index) + " (" + to_string(spec.kind) + "): " + why +
                     ", input " + to_string(in));
  };
  switch (spec.kind) {
    case LayerKind::Conv3x3:
      if (spec.in <= 0 || spec.out <= 0) fail("channel counts must be positive");
      if (in.channels != spec.in) fail("expects " + std::to_string(spec.in) + " channels");
      return {spec.out, in.height, in.width};
    case LayerKind::MaxPool2x2:
      if (in.height < 2 || in.width < 2) fail("spatial extent below 2");
      return {in.channels, in.height / 2, in.width / 2};
    case LayerKind::Relu:
      return in;
    case LayerKind::Flatten:
      return Shape::flat(static_cast<int>(in.size()));
    case LayerKind::Fc:
      if (spec.in <= 0 || spec.out <= 0) fail("dimensions must be positive");
      if (!in.is_flat() || in.width != spec.in) fail("expects flat input of " + std::to_string(spec.in));
      return Shape::flat(spec.out);
    case LayerKind::Softmax:
      if (!in.is_flat()) fail("expects flat input");
      return in;
  }
  fail("unknown kind");
  return in;
}

// Shape after every layer (element 0 is the input shape).
inline std::vector<Shape> propagate_all(const Shape& input, std::span<const LayerSpec> layers) {
  if (!input.valid()) throw ShapeError("invalid input shape " + to_string(input));
  std::vector<Shape> shapes{input};
  shapes.reserve(layers.size() + 1);
  for (std::size_t i = 0; i < layers.size(); ++i) shapes.push_back(propagate(layers[i], shapes.back(), i));
  return shapes;
}

inline std::size_t count_params(std::span<const LayerSpec> layers, bool learnable_only) {
  std::size_t n = 0;
  for (const auto& l : layers)
    if (!learnable_only || l.trainable) n += l.param_count();
  return n;
}

}  // namespace aunets::netcore
