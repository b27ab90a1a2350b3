#pragma once

#include <string>

#include "aunets/netcore/layer_graph.hpp"

namespace aunets::netcore {

// Weight surgery used to grow a pretrained color encoder into the motion-aware variants.
enum class TransplantOp {
  CopyFirstLayerToExtraChannels,  // 3-channel first conv -> 6-channel, extra channels copied
  TileFcForDoubledInput,          // first FC widened for a doubled input, second half copied
  CloneTrunk,                     // identical layers copied verbatim
};

namespace detail {

inline bool same_kind_and_dims(const LayerSpec& a, const LayerSpec& b) {
  return a.kind == b.kind && a.in == b.in && a.out == b.out;
}

[[noreturn]] inline void incompatible(TransplantOp op, const std::string& why) {
  const char* name = op == TransplantOp::CloneTrunk                    ? "CLONE_TRUNK"
                     : op == TransplantOp::CopyFirstLayerToExtraChannels ? "COPY_FIRST_LAYER_TO_EXTRA_CHANNELS"
                                                                       : "TILE_FC_FOR_DOUBLED_INPUT";
  throw ShapeError(std::string(name) + ": " + why);
}

// Logical (C, H, W) layout of the features entering FC layer `i`: the pre-flatten map when the
// FC directly follows a FLATTEN, else the flat vector itself.
template <typename T>
Shape fc_feature_layout(const LayerGraph<T>& g, std::size_t i) {
  if (i > 0 && g.layer(i - 1).kind == LayerKind::Flatten) return g.shape_at(i - 1);
  return g.shape_at(i);
}

}  // namespace detail

template <typename T>
void transplant(TransplantOp op, const LayerGraph<T>& src, LayerGraph<T>& dst) {
  using detail::incompatible;
  switch (op) {
    case TransplantOp::CloneTrunk: {
      if (dst.size() > src.size()) incompatible(op, "destination longer than source");
      if (dst.input_shape() != src.input_shape()) incompatible(op, "input shapes differ");
      for (std::size_t i = 0; i < dst.size(); ++i)
        if (!detail::same_kind_and_dims(src.layer(i), dst.layer(i)))
          incompatible(op, "layer " + std::to_string(i) + " differs");
      for (std::size_t i = 0; i < dst.size(); ++i) dst.params(i) = src.params(i);
      return;
    }
    case TransplantOp::CopyFirstLayerToExtraChannels: {
      if (src.size() != dst.size() || src.empty()) incompatible(op, "layer counts differ");
      const LayerSpec& s0 = src.layer(0);
      const LayerSpec& d0 = dst.layer(0);
      if (s0.kind != LayerKind::Conv3x3 || d0.kind != LayerKind::Conv3x3) incompatible(op, "first layer must be conv");
      if (d0.out != s0.out || d0.in != 2 * s0.in) incompatible(op, "destination must have twice the input channels");
      for (std::size_t i = 1; i < src.size(); ++i)
        if (!detail::same_kind_and_dims(src.layer(i), dst.layer(i)))
          incompatible(op, "layer " + std::to_string(i) + " differs");
      const std::size_t k = 9;
      const auto& sw = src.params(0).weight;
      auto& dw = dst.params(0).weight;
      for (int o = 0; o < d0.out; ++o)
        for (int c = 0; c < d0.in; ++c)
          for (std::size_t t = 0; t < k; ++t)
            dw[(static_cast<std::size_t>(o) * d0.in + c) * k + t] = sw[(static_cast<std::size_t>(o) * s0.in + c % s0.in) * k + t];
      dst.params(0).bias = src.params(0).bias;
      for (std::size_t i = 1; i < src.size(); ++i) dst.params(i) = src.params(i);
      return;
    }
    case TransplantOp::TileFcForDoubledInput: {
      if (src.size() != dst.size()) incompatible(op, "layer counts differ");
      std::size_t fc = src.size();
      for (std::size_t i = 0; i < src.size(); ++i)
        if (src.layer(i).kind == LayerKind::Fc) {
          fc = i;
          break;
        }
      if (fc == src.size()) incompatible(op, "source has no FC layer");
      for (std::size_t i = 0; i < src.size(); ++i) {
        const auto& a = src.layer(i);
        const auto& b = dst.layer(i);
        if (i == fc) {
          if (b.kind != LayerKind::Fc || b.out != a.out || b.in != 2 * a.in)
            incompatible(op, "destination FC must take twice the source input");
        } else if (!detail::same_kind_and_dims(a, b)) {
          incompatible(op, "layer " + std::to_string(i) + " differs");
        }
      }
      const Shape s_in = detail::fc_feature_layout(src, fc);
      const Shape d_in = detail::fc_feature_layout(dst, fc);
      if (s_in.channels != d_in.channels || s_in.height != d_in.height || d_in.width != 2 * s_in.width)
        incompatible(op, "feature layouts " + to_string(s_in) + " and " + to_string(d_in) + " are not a width doubling");
      for (std::size_t i = 0; i < src.size(); ++i)
        if (i != fc) dst.params(i) = src.params(i);
      const int out = src.layer(fc).out;
      const int s_dim = src.layer(fc).in, d_dim = dst.layer(fc).in;
      const auto& sw = src.params(fc).weight;
      auto& dw = dst.params(fc).weight;
      for (int o = 0; o < out; ++o)
        for (int c = 0; c < d_in.channels; ++c)
          for (int y = 0; y < d_in.height; ++y)
            for (int x = 0; x < d_in.width; ++x) {
              const std::size_t df = (static_cast<std::size_t>(c) * d_in.height + y) * d_in.width + x;
              const std::size_t sf = (static_cast<std::size_t>(c) * s_in.height + y) * s_in.width + x % s_in.width;
              dw[static_cast<std::size_t>(o) * d_dim + df] = sw[static_cast<std::size_t>(o) * s_dim + sf];
            }
      dst.params(fc).bias = src.params(fc).bias;
      return;
    }
  }
}

}  // namespace aunets::netcore
