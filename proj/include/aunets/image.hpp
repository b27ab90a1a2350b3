#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>

#include "aunets/common.hpp"
#include "aunets/io/png.hpp"
#include "aunets/netcore/tensor.hpp"

namespace aunets {

// Float CHW image with values in [0, 1].
using Image = netcore::Tensor<float>;

// Face bounding box in pixels.
struct FaceBox {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  friend bool operator==(const FaceBox&, const FaceBox&) = default;
};

inline bool inside(const FaceBox& b, int width, int height) {
  return b.w > 0 && b.h > 0 && b.x >= 0 && b.y >= 0 && b.x + b.w <= width && b.y + b.h <= height;
}

inline Image to_gray(const Image& img) {
  if (img.shape.channels == 1) return img;
  if (img.shape.channels != 3) throw ShapeError("grayscale conversion needs 1 or 3 channels");
  Image g({1, img.shape.height, img.shape.width});
  const std::size_t n = static_cast<std::size_t>(img.shape.height) * img.shape.width;
  for (std::size_t k = 0; k < n; ++k)
    g.values[k] = 0.299f * img.values[k] + 0.587f * img.values[n + k] + 0.114f * img.values[2 * n + k];
  return g;
}

// Bilinear sample of channel c at (x, y), clamping to the border.
inline float sample_bilinear(const Image& img, int c, float x, float y) {
  const int W = img.shape.width, H = img.shape.height;
  x = std::clamp(x, 0.f, static_cast<float>(W - 1));
  y = std::clamp(y, 0.f, static_cast<float>(H - 1));
  const int x0 = static_cast<int>(x), y0 = static_cast<int>(y);
  const int x1 = std::min(x0 + 1, W - 1), y1 = std::min(y0 + 1, H - 1);
  const float fx = x - x0, fy = y - y0;
  const float a = img.at(c, y0, x0), b = img.at(c, y0, x1);
  const float d = img.at(c, y1, x0), e = img.at(c, y1, x1);
  return (1 - fy) * ((1 - fx) * a + fx * b) + fy * ((1 - fx) * d + fx * e);
}

// Crops `box` and resizes it bilinearly to out_h x out_w (pixel-centre aligned).
inline Image crop_resize(const Image& img, const FaceBox& box, int out_h, int out_w) {
  if (box.w <= 0 || box.h <= 0) throw ShapeError("crop box has zero area");
  Image out({img.shape.channels, out_h, out_w});
  const float sx = static_cast<float>(box.w) / out_w, sy = static_cast<float>(box.h) / out_h;
  for (int c = 0; c < img.shape.channels; ++c)
    for (int y = 0; y < out_h; ++y)
      for (int x = 0; x < out_w; ++x)
        out.at(c, y, x) = sample_bilinear(img, c, box.x + (x + 0.5f) * sx - 0.5f, box.y + (y + 0.5f) * sy - 0.5f);
  return out;
}

inline Image resize(const Image& img, int out_h, int out_w) {
  return crop_resize(img, {0, 0, img.shape.width, img.shape.height}, out_h, out_w);
}

inline std::uint16_t quantize8(float v) {
  return static_cast<std::uint16_t>(std::lround(std::clamp(v, 0.f, 1.f) * 255.f));
}

// 8-bit quantised export; 1- or 3-channel images.
inline void save_image_png(const std::filesystem::path& path, const Image& img) {
  io::PngImage png;
  png.width = img.shape.width;
  png.height = img.shape.height;
  png.channels = img.shape.channels;
  png.bit_depth = 8;
  png.samples.resize(img.size());
  for (int y = 0; y < png.height; ++y)
    for (int x = 0; x < png.width; ++x)
      for (int c = 0; c < png.channels; ++c)
        png.samples[(static_cast<std::size_t>(y) * png.width + x) * png.channels + c] = quantize8(img.at(c, y, x));
  io::write_png(path, png);
}

inline Image load_image_png(const std::filesystem::path& path) {
  const auto png = io::read_png(path);
  const float scale = png.bit_depth == 16 ? 65535.f : 255.f;
  Image img({png.channels, png.height, png.width});
  for (int y = 0; y < png.height; ++y)
    for (int x = 0; x < png.width; ++x)
      for (int c = 0; c < png.channels; ++c) img.at(c, y, x) = png.at(y, x, c) / scale;
  return img;
}

}  // namespace aunets
