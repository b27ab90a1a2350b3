#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "aunets/common.hpp"
#include "aunets/image.hpp"

namespace aunets::motion {

// Dense per-pixel displacement (in pixels) from one frame to the next.
struct FlowField {
  int height = 0;
  int width = 0;
  std::vector<float> dx;
  std::vector<float> dy;

  FlowField() = default;
  FlowField(int h, int w) : height(h), width(w), dx(static_cast<std::size_t>(h) * w, 0.f), dy(dx) {}

  float& u(int y, int x) { return dx[static_cast<std::size_t>(y) * width + x]; }
  float& v(int y, int x) { return dy[static_cast<std::size_t>(y) * width + x]; }
  float u(int y, int x) const { return dx[static_cast<std::size_t>(y) * width + x]; }
  float v(int y, int x) const { return dy[static_cast<std::size_t>(y) * width + x]; }

  friend bool operator==(const FlowField&, const FlowField&) = default;
};

// Any dense estimator can drive the pipeline through this signature.
using FlowEstimator = std::function<FlowField(const Image& prev, const Image& next)>;

struct FlowOptions {
  int max_levels = 4;
  int min_level_side = 12;
  int warps = 3;
  int iterations = 80;
  float smoothness = 0.1f;  // Horn-Schunck alpha, intensities in [0, 1]
};

namespace detail {

using Plane = std::vector<float>;

inline Plane blur5(const Plane& src, int h, int w) {
  static constexpr float k[5] = {1.f / 16, 4.f / 16, 6.f / 16, 4.f / 16, 1.f / 16};
  Plane tmp(src.size()), out(src.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      float s = 0;
      for (int t = -2; t <= 2; ++t) s += k[t + 2] * src[y * w + std::clamp(x + t, 0, w - 1)];
      tmp[y * w + x] = s;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      float s = 0;
      for (int t = -2; t <= 2; ++t) s += k[t + 2] * tmp[std::clamp(y + t, 0, h - 1) * w + x];
      out[y * w + x] = s;
    }
  return out;
}

struct Level {
  int h, w;
  Plane img;
};

inline std::vector<Level> pyramid(const Image& gray, const FlowOptions& opt) {
  std::vector<Level> levels{{gray.shape.height, gray.shape.width, Plane(gray.values.begin(), gray.values.end())}};
  while (static_cast<int>(levels.size()) < opt.max_levels) {
    const auto& top = levels.back();
    const int h = top.h / 2, w = top.w / 2;
    if (std::min(h, w) < opt.min_level_side) break;
    const Plane b = blur5(top.img, top.h, top.w);
    Plane d(static_cast<std::size_t>(h) * w);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) d[y * w + x] = b[(2 * y) * top.w + 2 * x];
    levels.push_back({h, w, std::move(d)});
  }
  return levels;
}

inline float bilinear(const Plane& p, int h, int w, float x, float y) {
  x = std::clamp(x, 0.f, static_cast<float>(w - 1));
  y = std::clamp(y, 0.f, static_cast<float>(h - 1));
  const int x0 = static_cast<int>(x), y0 = static_cast<int>(y);
  const int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
  const float fx = x - x0, fy = y - y0;
  return (1 - fy) * ((1 - fx) * p[y0 * w + x0] + fx * p[y0 * w + x1]) +
         fy * ((1 - fx) * p[y1 * w + x0] + fx * p[y1 * w + x1]);
}

inline Plane upsample(const Plane& p, int h, int w, int nh, int nw, float scale) {
  Plane out(static_cast<std::size_t>(nh) * nw);
  const float sx = static_cast<float>(w) / nw, sy = static_cast<float>(h) / nh;
  for (int y = 0; y < nh; ++y)
    for (int x = 0; x < nw; ++x)
      out[y * nw + x] = scale * bilinear(p, h, w, (x + 0.5f) * sx - 0.5f, (y + 0.5f) * sy - 0.5f);
  return out;
}

inline float neighbour_mean(const Plane& p, int h, int w, int y, int x) {
  return 0.25f * (p[y * w + std::max(x - 1, 0)] + p[y * w + std::min(x + 1, w - 1)] +
                  p[std::max(y - 1, 0) * w + x] + p[std::min(y + 1, h - 1) * w + x]);
}

}  // namespace detail

// Coarse-to-fine Horn-Schunck with iterative warping. Deterministic; identical frames give an
// exactly zero field.
inline FlowField estimate_flow(const Image& prev, const Image& next, const FlowOptions& opt = {}) {
  if (prev.shape != next.shape)
    throw ShapeError("flow frames differ in shape: " + netcore::to_string(prev.shape) + " vs " +
                     netcore::to_string(next.shape));
  const auto p1 = detail::pyramid(to_gray(prev), opt);
  const auto p2 = detail::pyramid(to_gray(next), opt);
  const float a2 = opt.smoothness * opt.smoothness;
  detail::Plane u, v;
  int uh = 0, uw = 0;
  for (int l = static_cast<int>(p1.size()) - 1; l >= 0; --l) {
    const int h = p1[l].h, w = p1[l].w;
    if (u.empty()) {
      u.assign(static_cast<std::size_t>(h) * w, 0.f);
      v = u;
    } else {
      u = detail::upsample(u, uh, uw, h, w, static_cast<float>(w) / uw);
      v = detail::upsample(v, uh, uw, h, w, static_cast<float>(h) / uh);
    }
    uh = h;
    uw = w;
    const auto& i1 = p1[l].img;
    const auto& i2 = p2[l].img;
    detail::Plane warped(i1.size()), ix(i1.size()), iy(i1.size()), it(i1.size());
    for (int pass = 0; pass < opt.warps; ++pass) {
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
          warped[y * w + x] = detail::bilinear(i2, h, w, x + u[y * w + x], y + v[y * w + x]);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          const int xl = std::max(x - 1, 0), xr = std::min(x + 1, w - 1);
          const int yu = std::max(y - 1, 0), yd = std::min(y + 1, h - 1);
          const float sx = xr > xl ? 1.f / (xr - xl) : 0.f, sy = yd > yu ? 1.f / (yd - yu) : 0.f;
          ix[y * w + x] = 0.5f * sx * (i1[y * w + xr] - i1[y * w + xl] + warped[y * w + xr] - warped[y * w + xl]);
          iy[y * w + x] = 0.5f * sy * (i1[yd * w + x] - i1[yu * w + x] + warped[yd * w + x] - warped[yu * w + x]);
          it[y * w + x] = warped[y * w + x] - i1[y * w + x];
        }
      const detail::Plane u0 = u, v0 = v;
      detail::Plane nu(u.size()), nv(v.size());
      for (int iter = 0; iter < opt.iterations; ++iter) {
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x) {
            const std::size_t k = static_cast<std::size_t>(y) * w + x;
            const float ub = detail::neighbour_mean(u, h, w, y, x);
            const float vb = detail::neighbour_mean(v, h, w, y, x);
            const float r = ix[k] * (ub - u0[k]) + iy[k] * (vb - v0[k]) + it[k];
            const float den = a2 + ix[k] * ix[k] + iy[k] * iy[k];
            nu[k] = ub - ix[k] * r / den;
            nv[k] = vb - iy[k] * r / den;
          }
        u.swap(nu);
        v.swap(nv);
      }
    }
  }
  FlowField f(prev.shape.height, prev.shape.width);
  f.dx = std::move(u);
  f.dy = std::move(v);
  return f;
}

inline FlowEstimator default_flow_estimator(FlowOptions opt = {}) {
  return [opt](const Image& a, const Image& b) { return estimate_flow(a, b, opt); };
}

// Flow for frame t comes from (t-1, t); frame 0 receives the zero field.
inline std::vector<FlowField> first_frame_policy(const std::vector<Image>& frames, const FlowEstimator& estimator) {
  std::vector<FlowField> out;
  out.reserve(frames.size());
  for (std::size_t t = 0; t < frames.size(); ++t) {
    if (t == 0)
      out.emplace_back(frames[0].shape.height, frames[0].shape.width);
    else
      out.push_back(estimator(frames[t - 1], frames[t]));
  }
  return out;
}

}  // namespace aunets::motion
