#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "aunets/common.hpp"
#include "aunets/netcore/fusion.hpp"

namespace aunets::netcore {

// Checkpoint container, all integers little-endian:
//   magic "AUNETCKP", u32 format version, u32 length + profile name bytes, u8 fusion mode,
//   u64 seed, u32 part count, then per part: i32 C, H, W input shape, u32 layer count and per
//   layer u8 kind, u8 trainable, u32 in, u32 out. The header is followed by the float32 arrays of
//   every parameter layer (weight, then bias) in part and layer order.
inline constexpr char kCheckpointMagic[8] = {'A', 'U', 'N', 'E', 'T', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

class ByteWriter {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  explicit ByteReader(const std::vector<std::uint8_t>& b) : b_(b) {}
  std::uint8_t u8() {
    need(1);
    return b_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b_[pos_++]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b_[pos_++]) << (8 * i);
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  float f32() { return std::bit_cast<float>(u32()); }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > b_.size()) throw DataError("checkpoint truncated");
  }
  const std::vector<std::uint8_t>& b_;
  std::size_t pos_ = 0;
};

}  // namespace detail

template <typename T>
std::vector<std::uint8_t> encode_checkpoint(const FusionNet<T>& net) {
  detail::ByteWriter w;
  w.raw(kCheckpointMagic, sizeof kCheckpointMagic);
  w.u32(kCheckpointVersion);
  const std::string profile = to_string(net.profile());
  w.u32(static_cast<std::uint32_t>(profile.size()));
  w.raw(profile.data(), profile.size());
  w.u8(static_cast<std::uint8_t>(net.mode()));
  w.u64(net.seed());
  const auto parts = net.parts();
  w.u32(static_cast<std::uint32_t>(parts.size()));
  for (const auto* p : parts) {
    w.i32(p->input_shape().channels);
    w.i32(p->input_shape().height);
    w.i32(p->input_shape().width);
    w.u32(static_cast<std::uint32_t>(p->size()));
    for (const auto& l : p->layers()) {
      w.u8(static_cast<std::uint8_t>(l.kind));
      w.u8(l.trainable ? 1 : 0);
      w.u32(static_cast<std::uint32_t>(l.in));
      w.u32(static_cast<std::uint32_t>(l.out));
    }
  }
  for (const auto* p : parts)
    for (std::size_t i = 0; i < p->size(); ++i) {
      for (T v : p->params(i).weight) w.f32(static_cast<float>(v));
      for (T v : p->params(i).bias) w.f32(static_cast<float>(v));
    }
  return w.take();
}

template <typename T = float>
FusionNet<T> decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  detail::ByteReader r(bytes);
  if (r.str(sizeof kCheckpointMagic) != std::string(kCheckpointMagic, sizeof kCheckpointMagic))
    throw DataError("not a checkpoint (bad magic)");
  if (const auto v = r.u32(); v != kCheckpointVersion)
    throw DataError("unsupported checkpoint version " + std::to_string(v));
  const ProfileName profile = parse_profile_name(r.str(r.u32()));
  const auto mode_raw = r.u8();
  if (mode_raw > static_cast<std::uint8_t>(FusionMode::PiFc7)) throw DataError("bad fusion mode in checkpoint");
  const auto mode = static_cast<FusionMode>(mode_raw);
  const std::uint64_t seed = r.u64();
  const std::uint32_t n_parts = r.u32();
  if (n_parts != (is_two_stream(mode) ? 3u : 1u)) throw DataError("part count does not match fusion mode");
  std::vector<LayerGraph<T>> parts;
  for (std::uint32_t p = 0; p < n_parts; ++p) {
    Shape in;
    in.channels = r.i32();
    in.height = r.i32();
    in.width = r.i32();
    const std::uint32_t n = r.u32();
    std::vector<LayerSpec> layers(n);
    for (auto& l : layers) {
      const auto kind = r.u8();
      if (kind > static_cast<std::uint8_t>(LayerKind::Softmax)) throw DataError("bad layer kind in checkpoint");
      l.kind = static_cast<LayerKind>(kind);
      l.trainable = r.u8() != 0;
      l.in = static_cast<int>(r.u32());
      l.out = static_cast<int>(r.u32());
    }
    try {
      parts.emplace_back(in, std::move(layers));
    } catch (const ShapeError& e) {
      throw DataError(std::string("inconsistent checkpoint layers: ") + e.what());
    }
  }
  for (auto& g : parts)
    for (std::size_t i = 0; i < g.size(); ++i) {
      for (auto& v : g.params(i).weight) v = static_cast<T>(r.f32());
      for (auto& v : g.params(i).bias) v = static_cast<T>(r.f32());
    }
  if (!r.done()) throw DataError("trailing bytes after checkpoint payload");
  if (n_parts == 1) return FusionNet<T>(mode, profile, seed, std::move(parts[0]));
  return FusionNet<T>(mode, profile, seed,
                      TwoStreamGraph<T>{std::move(parts[0]), std::move(parts[1]), std::move(parts[2]), fusion_point(mode)});
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("write failed for " + path.string());
}

template <typename T>
void save_checkpoint(const std::filesystem::path& path, const FusionNet<T>& net) {
  write_file_bytes(path, encode_checkpoint(net));
}

template <typename T = float>
FusionNet<T> load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint<T>(read_file_bytes(path));
}

}  // namespace aunets::netcore
