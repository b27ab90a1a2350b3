#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <initializer_list>
#include <vector>

#include "aunets/io/png.hpp"
#include "aunets/motion/flow.hpp"

namespace aunets::motion {

// Flow fields cached as 16-bit RGB PNGs: R = dx, G = dy, B unused, each stored as
// 32768 + round(256 * d). Resolution 1/256 px, range +-128 px.
inline constexpr float kFlowCacheScale = 256.f;

inline std::uint16_t encode_flow_sample(float d) {
  const long q = std::lround(static_cast<double>(d) * kFlowCacheScale) + 32768;
  return static_cast<std::uint16_t>(std::clamp(q, 0L, 65535L));
}

inline float decode_flow_sample(std::uint16_t q) { return (static_cast<float>(q) - 32768.f) / kFlowCacheScale; }

// Rounds a field to the cache resolution, so cached and freshly computed flows agree exactly.
inline FlowField quantize_flow(FlowField f) {
  for (auto& v : f.dx) v = decode_flow_sample(encode_flow_sample(v));
  for (auto& v : f.dy) v = decode_flow_sample(encode_flow_sample(v));
  return f;
}

inline void write_flow_cache(const std::filesystem::path& path, const FlowField& flow) {
  io::PngImage png;
  png.width = flow.width;
  png.height = flow.height;
  png.channels = 3;
  png.bit_depth = 16;
  png.samples.assign(static_cast<std::size_t>(flow.width) * flow.height * 3, 0);
  for (std::size_t k = 0; k < flow.dx.size(); ++k) {
    png.samples[3 * k] = encode_flow_sample(flow.dx[k]);
    png.samples[3 * k + 1] = encode_flow_sample(flow.dy[k]);
  }
  io::write_png(path, png);
}

inline FlowField read_flow_cache(const std::filesystem::path& path) {
  const auto png = io::read_png(path);
  if (png.channels != 3 || png.bit_depth != 16) throw DataError("not a flow cache image: " + path.string());
  FlowField f(png.height, png.width);
  for (std::size_t k = 0; k < f.dx.size(); ++k) {
    f.dx[k] = decode_flow_sample(png.samples[3 * k]);
    f.dy[k] = decode_flow_sample(png.samples[3 * k + 1]);
  }
  return f;
}

// FNV-1a over the frame files a flow field was computed from.
inline std::uint64_t flow_cache_key(std::initializer_list<const std::vector<std::uint8_t>*> sources) {
  std::uint64_t h = 14695981039346656037ull;
  for (const auto* src : sources)
    for (std::uint8_t b : *src) {
      h ^= b;
      h *= 1099511628211ull;
    }
  return h;
}

// <cache_root>/<frame path relative to data_root, extension replaced by .<key>.png>. Changed
// frames get a new key, so a stale entry is never read.
inline std::filesystem::path flow_cache_path(const std::filesystem::path& cache_root,
                                             const std::filesystem::path& data_root,
                                             const std::filesystem::path& frame_path, std::uint64_t key) {
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(key));
  auto rel = std::filesystem::relative(frame_path, data_root);
  rel.replace_extension(std::string(".") + hex + ".png");
  return cache_root / rel;
}

}  // namespace aunets::motion
