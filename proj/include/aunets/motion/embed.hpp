#pragma once

#include <cmath>
#include <optional>
#include <string>

#include "aunets/image.hpp"
#include "aunets/motion/flow.hpp"
#include "aunets/netcore/fusion.hpp"

namespace aunets::motion {

// Three-channel motion image in [0, 1]: normalised x motion, normalised y motion, magnitude.
using FlowImage = Image;

inline constexpr float kZeroMotion[3] = {0.5f, 0.5f, 0.f};
inline constexpr double kMinFlowScale = 1e-6;

// Largest flow magnitude inside the box.
inline double flow_scale(const FlowField& flow, const FaceBox& box) {
  double s = 0;
  for (int y = box.y; y < box.y + box.h; ++y)
    for (int x = box.x; x < box.x + box.w; ++x)
      s = std::max(s, std::hypot(static_cast<double>(flow.u(y, x)), static_cast<double>(flow.v(y, x))));
  return s;
}

// Normalises the flow by the largest magnitude inside the face box, maps it to [0, 1], crops the
// box and resizes it to out_side x out_side. Fields below kMinFlowScale give the zero-motion image.
inline FlowImage embed_flow(const FlowField& flow, const FaceBox& box, int out_side) {
  if (box.w <= 0 || box.h <= 0) throw ShapeError("face box has zero area");
  if (!inside(box, flow.width, flow.height)) throw ShapeError("face box outside the flow field");
  if (out_side <= 0) throw ShapeError("output side must be positive");
  const double s = flow_scale(flow, box);
  if (s < kMinFlowScale) {
    FlowImage out({3, out_side, out_side});
    for (int c = 0; c < 3; ++c)
      std::fill(out.values.begin() + static_cast<std::size_t>(c) * out_side * out_side,
                out.values.begin() + static_cast<std::size_t>(c + 1) * out_side * out_side, kZeroMotion[c]);
    return out;
  }
  Image full({3, flow.height, flow.width});
  for (int y = 0; y < flow.height; ++y)
    for (int x = 0; x < flow.width; ++x) {
      const double u = flow.u(y, x), v = flow.v(y, x);
      full.at(0, y, x) = static_cast<float>(std::clamp((u / s + 1.0) / 2.0, 0.0, 1.0));
      full.at(1, y, x) = static_cast<float>(std::clamp((v / s + 1.0) / 2.0, 0.0, 1.0));
      full.at(2, y, x) = static_cast<float>(std::clamp(std::hypot(u, v) / s, 0.0, 1.0));
    }
  return crop_resize(full, box, out_side, out_side);
}

// Assembles the network input for `mode` from a color face crop and a flow image.
inline netcore::NetInput<float> build_bundle(const std::optional<Image>& rgb, const std::optional<FlowImage>& flow,
                                             netcore::FusionMode mode) {
  using netcore::FusionMode;
  const bool need_rgb = mode != FusionMode::OfOnly;
  const bool need_flow = mode != FusionMode::RgbOnly;
  if (need_rgb && !rgb) throw ShapeError(netcore::to_string(mode) + " needs a color crop");
  if (need_flow && !flow) throw ShapeError(netcore::to_string(mode) + " needs a flow image");
  if (need_rgb && rgb->shape.channels != 3) throw ShapeError("color crop must have 3 channels");
  if (need_flow && flow->shape.channels != 3) throw ShapeError("flow image must have 3 channels");
  if (need_rgb && need_flow && rgb->shape != flow->shape)
    throw ShapeError("color crop and flow image differ in shape");
  switch (mode) {
    case FusionMode::RgbOnly: return {*rgb, std::nullopt};
    case FusionMode::OfOnly: return {*flow, std::nullopt};
    case FusionMode::Channels: {
      Image six({6, rgb->shape.height, rgb->shape.width});
      std::copy(rgb->values.begin(), rgb->values.end(), six.values.begin());
      std::copy(flow->values.begin(), flow->values.end(), six.values.begin() + rgb->size());
      return {std::move(six), std::nullopt};
    }
    case FusionMode::Horizontal: {
      const int h = rgb->shape.height, w = rgb->shape.width;
      Image wide({3, h, 2 * w});
      for (int c = 0; c < 3; ++c)
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x) {
            wide.at(c, y, x) = rgb->at(c, y, x);
            wide.at(c, y, x + w) = flow->at(c, y, x);
          }
      return {std::move(wide), std::nullopt};
    }
    case FusionMode::PiConv:
    case FusionMode::PiFc6:
    case FusionMode::PiFc7: return {*rgb, *flow};
  }
  throw ShapeError("unknown fusion mode");
}

// Network input for one frame: the face crop and, when the mode uses motion, the embedded flow
// that ends at this frame.
inline netcore::NetInput<float> frame_bundle(const Image& frame, const FlowField* flow, const FaceBox& box,
                                             netcore::FusionMode mode, int side) {
  std::optional<Image> rgb;
  std::optional<FlowImage> motion;
  if (mode != netcore::FusionMode::OfOnly) rgb = crop_resize(frame, box, side, side);
  if (mode != netcore::FusionMode::RgbOnly) {
    if (!flow) throw ShapeError(netcore::to_string(mode) + " needs a flow field");
    motion = embed_flow(*flow, box, side);
  }
  return build_bundle(rgb, motion, mode);
}

// Replaces every spatial position of `region` (in face-crop coordinates) with the given fill,
// in each image of the bundle: color parts get `rgb_fill`, flow parts the zero-motion value.
inline void fill_region(netcore::NetInput<float>& in, netcore::FusionMode mode, const FaceBox& region,
                        const float rgb_fill[3]) {
  using netcore::FusionMode;
  auto paint = [&](Image& img, int x_offset, const float* fill) {
    for (int c = 0; c < 3; ++c)
      for (int y = region.y; y < region.y + region.h; ++y)
        for (int x = region.x; x < region.x + region.w; ++x) img.at(c, y, x + x_offset) = fill[c];
  };
  switch (mode) {
    case FusionMode::RgbOnly: paint(in.primary, 0, rgb_fill); break;
    case FusionMode::OfOnly: paint(in.primary, 0, kZeroMotion); break;
    case FusionMode::Channels:
      for (int c = 0; c < 6; ++c)
        for (int y = region.y; y < region.y + region.h; ++y)
          for (int x = region.x; x < region.x + region.w; ++x)
            in.primary.at(c, y, x) = c < 3 ? rgb_fill[c] : kZeroMotion[c - 3];
      break;
    case FusionMode::Horizontal:
      paint(in.primary, 0, rgb_fill);
      paint(in.primary, in.primary.shape.width / 2, kZeroMotion);
      break;
    default:
      paint(in.primary, 0, rgb_fill);
      paint(*in.secondary, 0, kZeroMotion);
      break;
  }
}

}  // namespace aunets::motion
