#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "aunets/netcore/layer_graph.hpp"

namespace aunets::netcore {

enum class ProfileName : std::uint8_t { Vgg16 = 0, Tiny = 1 };

inline std::string to_string(ProfileName p) { return p == ProfileName::Vgg16 ? "vgg16" : "tiny"; }

inline ProfileName parse_profile_name(const std::string& s) {
  if (s == "vgg16" || s == "VGG16") return ProfileName::Vgg16;
  if (s == "tiny" || s == "TINY") return ProfileName::Tiny;
  throw std::invalid_argument("unknown profile '" + s + "' (expected vgg16 or tiny)");
}

// Encoder shape family: 3x3 conv blocks, each closed by a 2x2 max-pool, then hidden FC layers
// and a K-way softmax classifier.
struct Profile {
  ProfileName name = ProfileName::Tiny;
  int side = 64;
  std::vector<std::vector<int>> conv_blocks;
  std::vector<int> hidden_fc;
  int k_outputs = 2;

  static Profile vgg16(int k = 2) {
    return {ProfileName::Vgg16, 224, {{64, 64}, {128, 128}, {256, 256, 256}, {512, 512, 512}, {512, 512, 512}},
            {4096, 4096}, k};
  }
  static Profile tiny(int k = 2) { return {ProfileName::Tiny, 64, {{8}, {16}, {32}}, {64}, k}; }
  static Profile named(ProfileName n, int k = 2) { return n == ProfileName::Vgg16 ? vgg16(k) : tiny(k); }

  Shape rgb_input() const { return {3, side, side}; }
  int last_conv_channels() const { return conv_blocks.back().back(); }

  friend bool operator==(const Profile&, const Profile&) = default;
};

inline void validate(const Profile& p) {
  if (p.side <= 0 || p.conv_blocks.empty() || p.hidden_fc.empty() || p.k_outputs < 2)
    throw std::invalid_argument("invalid profile " + to_string(p.name));
  for (const auto& block : p.conv_blocks)
    if (block.empty()) throw std::invalid_argument("empty conv block in profile " + to_string(p.name));
}

// Conv trunk (conv/relu blocks with pooling) followed by FLATTEN, for an input of `input` shape.
inline std::vector<LayerSpec> conv_trunk_layers(const Profile& p, const Shape& input) {
  std::vector<LayerSpec> layers;
  int ch = input.channels;
  for (const auto& block : p.conv_blocks) {
    for (int width : block) {
      layers.push_back(LayerSpec::conv(ch, width));
      layers.push_back(LayerSpec::relu());
      ch = width;
    }
    layers.push_back(LayerSpec::pool());
  }
  layers.push_back(LayerSpec::flatten());
  return layers;
}

// Flat feature dimension leaving the conv trunk for a given input shape.
inline int trunk_feature_dim(const Profile& p, const Shape& input) {
  int h = input.height, w = input.width;
  for (std::size_t b = 0; b < p.conv_blocks.size(); ++b) {
    h /= 2;
    w /= 2;
  }
  return p.last_conv_channels() * h * w;
}

// Hidden FC layers (fc6, fc7, ...) plus the K-way classifier, starting from `in_dim` features.
inline std::vector<LayerSpec> fc_head_layers(const Profile& p, int in_dim, std::size_t first_hidden = 0) {
  std::vector<LayerSpec> layers;
  int d = in_dim;
  for (std::size_t i = first_hidden; i < p.hidden_fc.size(); ++i) {
    layers.push_back(LayerSpec::fc(d, p.hidden_fc[i]));
    layers.push_back(LayerSpec::relu());
    d = p.hidden_fc[i];
  }
  layers.push_back(LayerSpec::fc(d, p.k_outputs));
  layers.push_back(LayerSpec::softmax());
  return layers;
}

inline std::vector<LayerSpec> encoder_layers(const Profile& p, const Shape& input) {
  auto layers = conv_trunk_layers(p, input);
  auto head = fc_head_layers(p, trunk_feature_dim(p, input));
  layers.insert(layers.end(), head.begin(), head.end());
  return layers;
}

// Index one past the FLATTEN layer, i.e. the number of conv-trunk layers.
inline std::size_t conv_trunk_size(std::span<const LayerSpec> layers) {
  for (std::size_t i = 0; i < layers.size(); ++i)
    if (layers[i].kind == LayerKind::Flatten) return i + 1;
  throw ShapeError("network has no flatten layer");
}

// Index one past the ReLU that follows hidden FC number `hidden` (0 = fc6).
inline std::size_t after_hidden_fc(std::span<const LayerSpec> layers, std::size_t hidden) {
  std::size_t seen = 0;
  for (std::size_t i = conv_trunk_size(layers); i < layers.size(); ++i) {
    if (layers[i].kind != LayerKind::Fc) continue;
    if (seen == hidden) {
      if (i + 1 >= layers.size() || layers[i + 1].kind != LayerKind::Relu)
        throw ShapeError("hidden FC " + std::to_string(hidden) + " not found");
      return i + 2;
    }
    ++seen;
  }
  throw ShapeError("hidden FC " + std::to_string(hidden) + " not found");
}

enum class InitScheme : std::uint8_t { Normal, He };

inline std::string to_string(InitScheme s) { return s == InitScheme::Normal ? "normal" : "he"; }

inline InitScheme parse_init_scheme(const std::string& s) {
  if (s == "normal") return InitScheme::Normal;
  if (s == "he") return InitScheme::He;
  throw std::invalid_argument("unknown init scheme '" + s + "' (expected normal or he)");
}

// Fresh encoder for `profile`, every layer trainable. Normal draws weights from normal(0, 0.01);
// He scales each layer by its fan-in. Biases start at zero.
template <typename T = float>
LayerGraph<T> build(const Profile& profile, std::uint64_t seed, int in_channels = 3,
                    InitScheme scheme = InitScheme::Normal) {
  validate(profile);
  const Shape input{in_channels, profile.side, profile.side};
  LayerGraph<T> net(input, encoder_layers(profile, input));
  if (scheme == InitScheme::He)
    net.init_he(seed);
  else
    net.init_normal(seed);
  return net;
}

}  // namespace aunets::netcore
