#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "aunets/common.hpp"
#include "aunets/image.hpp"
#include "aunets/motion/embed.hpp"
#include "aunets/netcore/fusion.hpp"

namespace aunets::evalkit {

using ProbabilityFn = std::function<double(const netcore::NetInput<float>&)>;

// value(r, c) = p_base - p with the patch at (r * stride, c * stride) occluded.
struct SaliencyMap {
  int rows = 0;
  int cols = 0;
  int patch = 0;
  int stride = 0;
  double p_base = 0;
  std::vector<double> values;

  double at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
};

// Side of the face crop inside the assembled input of `mode`.
inline int crop_side(const netcore::NetInput<float>& in, netcore::FusionMode mode) {
  return mode == netcore::FusionMode::Horizontal ? in.primary.shape.width / 2 : in.primary.shape.width;
}

// Slides a patch_side square over the face crop; colour pixels under it take `fill_rgb` (the
// dataset mean colour) and flow pixels the zero-motion value. stride 0 means patch_side / 2.
inline SaliencyMap occlusion_saliency(const ProbabilityFn& detector, const netcore::NetInput<float>& in,
                                      netcore::FusionMode mode, int patch_side, int stride, const float fill_rgb[3]) {
  const int side = crop_side(in, mode);
  if (patch_side < 1) throw std::invalid_argument("patch side must be positive");
  if (patch_side > side || patch_side > in.primary.shape.height)
    throw std::invalid_argument("patch side " + std::to_string(patch_side) + " exceeds input side " +
                                std::to_string(side));
  if (stride <= 0) stride = std::max(1, patch_side / 2);
  SaliencyMap m;
  m.patch = patch_side;
  m.stride = stride;
  m.rows = (in.primary.shape.height - patch_side) / stride + 1;
  m.cols = (side - patch_side) / stride + 1;
  m.p_base = detector(in);
  m.values.reserve(static_cast<std::size_t>(m.rows) * m.cols);
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c) {
      auto occluded = in;
      motion::fill_region(occluded, mode, {c * stride, r * stride, patch_side, patch_side}, fill_rgb);
      m.values.push_back(m.p_base - detector(occluded));
    }
  return m;
}

// Mean colour of a set of crops.
inline std::array<float, 3> mean_color(const std::vector<Image>& crops) {
  std::array<double, 3> acc{0, 0, 0};
  std::size_t n = 0;
  for (const auto& img : crops) {
    const std::size_t plane = static_cast<std::size_t>(img.shape.height) * img.shape.width;
    for (int c = 0; c < 3; ++c)
      for (std::size_t k = 0; k < plane; ++k) acc[static_cast<std::size_t>(c)] += img.values[c * plane + k];
    n += plane;
  }
  if (n == 0) return {0.5f, 0.5f, 0.5f};
  return {static_cast<float>(acc[0] / n), static_cast<float>(acc[1] / n), static_cast<float>(acc[2] / n)};
}

// Grey-level heat map (0.5 = no change, brighter = occlusion lowers the probability) upscaled
// by `cell` pixels per grid cell, plus a CSV of the raw values.
inline void save_saliency(const std::filesystem::path& png_path, const std::filesystem::path& csv_path,
                          const SaliencyMap& m, int cell = 8) {
  double peak = 0;
  for (double v : m.values) peak = std::max(peak, std::abs(v));
  Image img({1, m.rows * cell, m.cols * cell});
  for (int y = 0; y < img.shape.height; ++y)
    for (int x = 0; x < img.shape.width; ++x) {
      const double v = m.at(y / cell, x / cell);
      img.at(0, y, x) = static_cast<float>(peak > 0 ? 0.5 + 0.5 * v / peak : 0.5);
    }
  if (png_path.has_parent_path()) std::filesystem::create_directories(png_path.parent_path());
  save_image_png(png_path, img);
  std::ofstream out(csv_path);
  if (!out) throw DataError("cannot write " + csv_path.string());
  out.precision(9);
  out << "row,col,x,y,value\n";
  for (int r = 0; r < m.rows; ++r)
    for (int c = 0; c < m.cols; ++c)
      out << r << ',' << c << ',' << c * m.stride << ',' << r * m.stride << ',' << m.at(r, c) << '\n';
}

}  // namespace aunets::evalkit
