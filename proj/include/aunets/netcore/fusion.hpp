#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "aunets/netcore/layer_graph.hpp"
#include "aunets/netcore/profile.hpp"
#include "aunets/netcore/transplant.hpp"

namespace aunets::netcore {

enum class FusionMode : std::uint8_t {
  RgbOnly = 0,
  OfOnly = 1,
  Channels = 2,
  Horizontal = 3,
  PiConv = 4,
  PiFc6 = 5,
  PiFc7 = 6,
};

inline constexpr FusionMode kAllFusionModes[] = {FusionMode::RgbOnly,    FusionMode::OfOnly, FusionMode::Channels,
                                                 FusionMode::Horizontal, FusionMode::PiConv, FusionMode::PiFc6,
                                                 FusionMode::PiFc7};

inline std::string to_string(FusionMode m) {
  switch (m) {
    case FusionMode::RgbOnly: return "rgb_only";
    case FusionMode::OfOnly: return "of_only";
    case FusionMode::Channels: return "channels";
    case FusionMode::Horizontal: return "horizontal";
    case FusionMode::PiConv: return "pi_conv";
    case FusionMode::PiFc6: return "pi_fc6";
    case FusionMode::PiFc7: return "pi_fc7";
  }
  return "?";
}

inline FusionMode parse_fusion_mode(std::string s) {
  for (auto& c : s) c = c == '-' ? '_' : static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (s == "rgb") return FusionMode::RgbOnly;
  if (s == "of") return FusionMode::OfOnly;
  for (FusionMode m : kAllFusionModes)
    if (to_string(m) == s) return m;
  throw std::invalid_argument("unknown fusion mode '" + s + "'");
}

inline bool is_two_stream(FusionMode m) {
  return m == FusionMode::PiConv || m == FusionMode::PiFc6 || m == FusionMode::PiFc7;
}

enum class FusionPoint : std::uint8_t { AfterConv, AfterFc6, AfterFc7 };

inline FusionPoint fusion_point(FusionMode m) {
  switch (m) {
    case FusionMode::PiConv: return FusionPoint::AfterConv;
    case FusionMode::PiFc6: return FusionPoint::AfterFc6;
    case FusionMode::PiFc7: return FusionPoint::AfterFc7;
    default: throw std::invalid_argument(to_string(m) + " is not a two-stream mode");
  }
}

// The seven detector architectures whose sizes are compared against each other.
enum class Architecture : std::uint8_t { HydraNet, AUNets, Channels, Horizontal, PiConv, PiFc6, PiFc7 };

inline constexpr Architecture kAllArchitectures[] = {Architecture::HydraNet, Architecture::AUNets,
                                                     Architecture::Channels, Architecture::Horizontal,
                                                     Architecture::PiConv,   Architecture::PiFc6,
                                                     Architecture::PiFc7};

inline std::string to_string(Architecture a) {
  switch (a) {
    case Architecture::HydraNet: return "HydraNet";
    case Architecture::AUNets: return "AUNets";
    case Architecture::Channels: return "Channels";
    case Architecture::Horizontal: return "Horizontal";
    case Architecture::PiConv: return "Pi/conv";
    case Architecture::PiFc6: return "Pi/fc6";
    case Architecture::PiFc7: return "Pi/fc7";
  }
  return "?";
}

inline Architecture parse_architecture(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  for (Architecture a : kAllArchitectures) {
    std::string n = to_string(a);
    for (auto& c : n) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (n == s) return a;
  }
  throw std::invalid_argument("unknown architecture descriptor '" + s + "'");
}

inline Architecture architecture_of(FusionMode m) {
  switch (m) {
    case FusionMode::RgbOnly:
    case FusionMode::OfOnly: return Architecture::AUNets;
    case FusionMode::Channels: return Architecture::Channels;
    case FusionMode::Horizontal: return Architecture::Horizontal;
    case FusionMode::PiConv: return Architecture::PiConv;
    case FusionMode::PiFc6: return Architecture::PiFc6;
    case FusionMode::PiFc7: return Architecture::PiFc7;
  }
  return Architecture::AUNets;
}

// One feed-forward chain of an architecture, before any weights exist.
struct PartLayout {
  Shape input;
  std::vector<LayerSpec> layers;
};

// Number of layers in each stream trunk of a two-stream split of the RGB encoder.
// Profiles with a single hidden FC fuse after it for both fc6 and fc7 points.
inline std::size_t stream_split_index(std::span<const LayerSpec> encoder, FusionPoint point) {
  switch (point) {
    case FusionPoint::AfterConv: return conv_trunk_size(encoder);
    case FusionPoint::AfterFc6: return after_hidden_fc(encoder, 0);
    case FusionPoint::AfterFc7: {
      std::size_t hidden = 0;
      for (std::size_t i = conv_trunk_size(encoder); i < encoder.size(); ++i)
        if (encoder[i].kind == LayerKind::Fc) ++hidden;
      return after_hidden_fc(encoder, hidden >= 3 ? 1 : 0);
    }
  }
  return 0;
}

inline std::size_t hidden_fcs_before(std::span<const LayerSpec> encoder, std::size_t split) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < split; ++i)
    if (encoder[i].kind == LayerKind::Fc) ++n;
  return n;
}

// Parts of an architecture: one chain for single-stream variants, or (color trunk, motion trunk,
// head) for two-stream variants. Trainable flags follow the freezing policy of each variant.
inline std::vector<PartLayout> architecture_layout(Architecture arch, const Profile& p) {
  validate(p);
  const Shape rgb = p.rgb_input();
  switch (arch) {
    case Architecture::HydraNet: {
      PartLayout part{rgb, encoder_layers(p, rgb)};
      const std::size_t trunk = conv_trunk_size(part.layers);
      for (std::size_t i = 0; i < trunk; ++i) part.layers[i].trainable = false;
      return {part};
    }
    case Architecture::AUNets: return {{rgb, encoder_layers(p, rgb)}};
    case Architecture::Channels: {
      const Shape six{6, p.side, p.side};
      return {{six, encoder_layers(p, six)}};
    }
    case Architecture::Horizontal: {
      const Shape wide{3, p.side, 2 * p.side};
      return {{wide, encoder_layers(p, wide)}};
    }
    case Architecture::PiConv:
    case Architecture::PiFc6:
    case Architecture::PiFc7: {
      const FusionMode m = arch == Architecture::PiConv  ? FusionMode::PiConv
                           : arch == Architecture::PiFc6 ? FusionMode::PiFc6
                                                         : FusionMode::PiFc7;
      const auto enc = encoder_layers(p, rgb);
      const std::size_t split = stream_split_index(enc, fusion_point(m));
      std::vector<LayerSpec> trunk(enc.begin(), enc.begin() + split);
      const Shape stream_out = propagate_all(rgb, trunk).back();
      PartLayout color{rgb, trunk};
      for (auto& l : color.layers) l.trainable = false;
      PartLayout motion{rgb, trunk};
      PartLayout head{Shape::flat(2 * stream_out.width), fc_head_layers(p, 2 * stream_out.width, hidden_fcs_before(enc, split))};
      return {color, motion, head};
    }
  }
  return {};
}

// Exact parameter count of an architecture; `learnable_only` drops frozen layers.
inline std::size_t param_count(Architecture arch, const Profile& p, bool learnable_only) {
  std::size_t n = 0;
  for (const auto& part : architecture_layout(arch, p)) {
    propagate_all(part.input, part.layers);
    n += count_params(part.layers, learnable_only);
  }
  return n;
}

inline std::size_t param_count(const std::string& descriptor, const Profile& p, bool learnable_only) {
  return param_count(parse_architecture(descriptor), p, learnable_only);
}

template <typename T>
struct NetInput {
  Tensor<T> primary;                  // assembled single-stream input, or the color image
  std::optional<Tensor<T>> secondary;  // flow image for two-stream modes

  template <typename U>
  NetInput<U> cast() const {
    NetInput<U> out{primary.template cast<U>(), std::nullopt};
    if (secondary) out.secondary = secondary->template cast<U>();
    return out;
  }
};

template <typename T>
struct TwoStreamGraph {
  LayerGraph<T> color_trunk;
  LayerGraph<T> motion_trunk;
  LayerGraph<T> head;
  FusionPoint fusion_point = FusionPoint::AfterConv;

  friend bool operator==(const TwoStreamGraph&, const TwoStreamGraph&) = default;
};

// A detector network for one fusion mode: a single chain or a two-stream join.
template <typename T>
class FusionNet {
 public:
  FusionNet() = default;
  FusionNet(FusionMode mode, ProfileName profile, std::uint64_t seed, LayerGraph<T> single)
      : mode_(mode), profile_(profile), seed_(seed), body_(std::move(single)) {
    if (is_two_stream(mode)) throw std::invalid_argument("two-stream mode needs a TwoStreamGraph");
  }
  FusionNet(FusionMode mode, ProfileName profile, std::uint64_t seed, TwoStreamGraph<T> streams)
      : mode_(mode), profile_(profile), seed_(seed), body_(std::move(streams)) {
    if (!is_two_stream(mode)) throw std::invalid_argument(to_string(mode) + " is a single-stream mode");
    auto& s = std::get<TwoStreamGraph<T>>(body_);
    if (s.color_trunk.output_shape() != s.motion_trunk.output_shape() || !s.color_trunk.output_shape().is_flat())
      throw ShapeError("stream trunks must produce equal flat features");
    if (s.head.input_shape() != Shape::flat(2 * s.color_trunk.output_shape().width))
      throw ShapeError("head input must be twice the per-stream feature dimension");
  }

  FusionMode mode() const { return mode_; }
  ProfileName profile() const { return profile_; }
  std::uint64_t seed() const { return seed_; }
  bool two_stream() const { return std::holds_alternative<TwoStreamGraph<T>>(body_); }

  LayerGraph<T>& single() { return std::get<LayerGraph<T>>(body_); }
  const LayerGraph<T>& single() const { return std::get<LayerGraph<T>>(body_); }
  TwoStreamGraph<T>& streams() { return std::get<TwoStreamGraph<T>>(body_); }
  const TwoStreamGraph<T>& streams() const { return std::get<TwoStreamGraph<T>>(body_); }

  // Chains in a fixed order: [single] or [color, motion, head].
  std::vector<LayerGraph<T>*> parts() {
    if (two_stream()) {
      auto& s = streams();
      return {&s.color_trunk, &s.motion_trunk, &s.head};
    }
    return {&single()};
  }
  std::vector<const LayerGraph<T>*> parts() const {
    if (two_stream()) {
      const auto& s = streams();
      return {&s.color_trunk, &s.motion_trunk, &s.head};
    }
    return {&single()};
  }

  std::size_t param_count(bool learnable_only = false) const {
    std::size_t n = 0;
    for (const auto* p : parts()) n += p->param_count(learnable_only);
    return n;
  }

  std::size_t k_outputs() const { return static_cast<std::size_t>(parts().back()->output_shape().width); }

  std::vector<Gradients<T>> make_gradients() const {
    std::vector<Gradients<T>> g;
    for (const auto* p : parts()) g.push_back(p->make_gradients());
    return g;
  }

  // Forward pass keeping one cache per part (same order as parts()).
  const Tensor<T>& forward(const NetInput<T>& in, std::vector<ForwardCache<T>>& caches) const {
    check_input(in);
    if (!two_stream()) {
      caches.resize(1);
      return single().forward(in.primary, caches[0]);
    }
    const auto& s = streams();
    caches.resize(3);
    s.color_trunk.forward(in.primary, caches[0]);
    s.motion_trunk.forward(*in.secondary, caches[1]);
    return s.head.forward(concat(caches[0].output(), caches[1].output()), caches[2]);
  }

  Tensor<T> forward(const NetInput<T>& in) const {
    check_input(in);
    if (!two_stream()) return single().forward(in.primary);
    const auto& s = streams();
    const auto a = s.color_trunk.forward(in.primary);
    const auto b = s.motion_trunk.forward(*in.secondary);
    return s.head.forward(concat(a, b));
  }

  // Cross-entropy loss for one example; gradients accumulated per part.
  T accumulate_gradients(const NetInput<T>& in, int target, std::vector<Gradients<T>>& grads) const {
    check_input(in);
    if (!two_stream()) return netcore::accumulate_gradients(single(), in.primary, target, grads.at(0));
    const auto& s = streams();
    require_softmax_head(s.head);
    ForwardCache<T> cc, mc, hc;
    s.color_trunk.forward(in.primary, cc);
    s.motion_trunk.forward(*in.secondary, mc);
    s.head.forward(concat(cc.output(), mc.output()), hc);
    auto [loss, dlogits] = softmax_cross_entropy(hc.output(), target);
    const bool color_learns = has_trainable(s.color_trunk);
    const bool motion_learns = has_trainable(s.motion_trunk);
    Tensor<T> dfeat = s.head.backward(hc, std::move(dlogits), grads.at(2), color_learns || motion_learns,
                                      s.head.size() - 1);
    if (color_learns || motion_learns) {
      const int d = s.color_trunk.output_shape().width;
      Tensor<T> ga(Shape::flat(d)), gb(Shape::flat(d));
      std::copy(dfeat.values.begin(), dfeat.values.begin() + d, ga.values.begin());
      std::copy(dfeat.values.begin() + d, dfeat.values.end(), gb.values.begin());
      if (color_learns) s.color_trunk.backward(cc, std::move(ga), grads.at(0), false);
      if (motion_learns) s.motion_trunk.backward(mc, std::move(gb), grads.at(1), false);
    }
    return loss;
  }

  T loss(const NetInput<T>& in, int target) const {
    return softmax_cross_entropy(forward(in), target).first;
  }

  friend bool operator==(const FusionNet&, const FusionNet&) = default;

 private:
  static bool has_trainable(const LayerGraph<T>& g) {
    for (const auto& l : g.layers())
      if (l.has_params() && l.trainable) return true;
    return false;
  }
  static Tensor<T> concat(const Tensor<T>& a, const Tensor<T>& b) {
    Tensor<T> out(Shape::flat(static_cast<int>(a.size() + b.size())));
    std::copy(a.values.begin(), a.values.end(), out.values.begin());
    std::copy(b.values.begin(), b.values.end(), out.values.begin() + a.size());
    return out;
  }
  void check_input(const NetInput<T>& in) const {
    if (two_stream() && !in.secondary)
      throw ShapeError(to_string(mode_) + " expects a color image and a flow image");
    if (!two_stream() && in.secondary) throw ShapeError(to_string(mode_) + " expects a single assembled input");
  }

  FusionMode mode_ = FusionMode::RgbOnly;
  ProfileName profile_ = ProfileName::Tiny;
  std::uint64_t seed_ = 0;
  std::variant<LayerGraph<T>, TwoStreamGraph<T>> body_;
};

// Grows a pretrained 3-channel color encoder into the network for `mode`, using the weight
// transplants of each fusion variant. `base` must be a full encoder of `profile`.
template <typename T>
FusionNet<T> make_fusion_net(FusionMode mode, const Profile& profile, const LayerGraph<T>& base, std::uint64_t seed) {
  if (base.input_shape() != profile.rgb_input()) throw ShapeError("base encoder does not match the profile input");
  const auto layout = architecture_layout(architecture_of(mode), profile);
  switch (mode) {
    case FusionMode::RgbOnly:
    case FusionMode::OfOnly: {
      LayerGraph<T> net(layout[0].input, layout[0].layers);
      transplant(TransplantOp::CloneTrunk, base, net);
      return FusionNet<T>(mode, profile.name, seed, std::move(net));
    }
    case FusionMode::Channels: {
      LayerGraph<T> net(layout[0].input, layout[0].layers);
      transplant(TransplantOp::CopyFirstLayerToExtraChannels, base, net);
      return FusionNet<T>(mode, profile.name, seed, std::move(net));
    }
    case FusionMode::Horizontal: {
      LayerGraph<T> net(layout[0].input, layout[0].layers);
      transplant(TransplantOp::TileFcForDoubledInput, base, net);
      return FusionNet<T>(mode, profile.name, seed, std::move(net));
    }
    case FusionMode::PiConv:
    case FusionMode::PiFc6:
    case FusionMode::PiFc7: {
      TwoStreamGraph<T> s{LayerGraph<T>(layout[0].input, layout[0].layers),
                          LayerGraph<T>(layout[1].input, layout[1].layers),
                          LayerGraph<T>(layout[2].input, layout[2].layers), fusion_point(mode)};
      transplant(TransplantOp::CloneTrunk, base, s.color_trunk);
      transplant(TransplantOp::CloneTrunk, base, s.motion_trunk);
      const LayerGraph<T> base_head = base.slice(s.color_trunk.size(), base.size());
      transplant(TransplantOp::TileFcForDoubledInput, base_head, s.head);
      return FusionNet<T>(mode, profile.name, seed, std::move(s));
    }
  }
  throw std::invalid_argument("unknown fusion mode");
}

// Fresh network for `mode`: a random color encoder grown into the fusion variant.
template <typename T = float>
FusionNet<T> build_fusion_net(FusionMode mode, const Profile& profile, std::uint64_t seed,
                              InitScheme scheme = InitScheme::Normal) {
  return make_fusion_net<T>(mode, profile, build<T>(profile, seed, 3, scheme), seed);
}

}  // namespace aunets::netcore
