#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "aunets/au.hpp"
#include "aunets/netcore/fusion.hpp"
#include "aunets/netcore/profile.hpp"

namespace aunets::detectors {

using netcore::LayerGraph;
using netcore::LayerKind;
using netcore::LayerSpec;

inline constexpr double kHeadInitStddev = 0.01;

// Replaces the final FC of an FC+softmax network with a fresh k-way layer drawn from
// normal(0, 0.01); every other layer keeps its weights and trainable flag.
template <typename T>
LayerGraph<T> adapt_head(const LayerGraph<T>& net, int k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("head needs at least 2 outputs, got " + std::to_string(k));
  const auto layers = net.layers();
  const std::size_t n = layers.size();
  if (n < 2 || layers[n - 1].kind != LayerKind::Softmax || layers[n - 2].kind != LayerKind::Fc)
    throw std::invalid_argument("network must end in FC + softmax");
  std::vector<LayerSpec> specs(layers.begin(), layers.end());
  specs[n - 2].out = k;
  LayerGraph<T> out(net.input_shape(), specs);
  for (std::size_t i = 0; i + 2 < n; ++i) out.params(i) = net.params(i);
  std::mt19937_64 rng(seed);
  out.init_normal(rng, n - 2, n - 1, kHeadInitStddev);
  return out;
}

// Shared frozen conv trunk with one FC head (hidden FCs + binary output) per AU.
template <typename T>
class HydraNet {
 public:
  HydraNet() = default;

  // Takes the conv trunk (everything up to and including the flatten) of `encoder`.
  HydraNet(const LayerGraph<T>& encoder, const netcore::Profile& profile) : profile_(profile) {
    const std::size_t cut = netcore::conv_trunk_size(encoder.layers());
    trunk_ = encoder.slice(0, cut);
    trunk_.set_all_trainable(false);
    std::vector<LayerSpec> head(encoder.layers().begin() + static_cast<std::ptrdiff_t>(cut), encoder.layers().end());
    if (head.size() < 2 || head.back().kind != LayerKind::Softmax || head[head.size() - 2].kind != LayerKind::Fc)
      throw std::invalid_argument("encoder must end in FC + softmax");
    head[head.size() - 2].out = 2;
    head_specs_ = std::move(head);
  }

  const LayerGraph<T>& trunk() const { return trunk_; }
  const std::map<AUCode, LayerGraph<T>>& heads() const { return heads_; }
  bool has(AUCode au) const { return heads_.count(au) > 0; }

  LayerGraph<T>& head(AUCode au) {
    auto it = heads_.find(au);
    if (it == heads_.end()) throw std::out_of_range("no head for " + to_string(au));
    return it->second;
  }
  const LayerGraph<T>& head(AUCode au) const { return const_cast<HydraNet*>(this)->head(au); }

  // Adds a freshly initialised binary head for `au`.
  void grow_head(AUCode au, std::uint64_t seed) {
    if (has(au)) throw std::invalid_argument(to_string(au) + " already has a head");
    LayerGraph<T> h(trunk_.output_shape(), head_specs_);
    h.init_normal(seed, kHeadInitStddev);
    heads_.emplace(au, std::move(h));
  }

  void remove_head(AUCode au) {
    if (heads_.erase(au) == 0) throw std::out_of_range("no head for " + to_string(au));
  }

  // Trunk followed by the head of `au`, as a single network whose trunk layers are frozen.
  netcore::FusionNet<T> detector(AUCode au, std::uint64_t seed = 0) const {
    return {netcore::FusionMode::RgbOnly, profile_.name, seed, trunk_.then(head(au))};
  }

  // Writes the head part of a trained detector back; the trunk must be unchanged.
  void store_head(AUCode au, const netcore::FusionNet<T>& det) {
    const auto& g = det.single();
    if (!(g.slice(0, trunk_.size()) == trunk_)) throw std::logic_error("detector trunk diverged from the shared trunk");
    head(au) = g.slice(trunk_.size(), g.size());
  }

  double predict(AUCode au, const netcore::Tensor<T>& crop) const {
    const auto feat = trunk_.forward(crop);
    return static_cast<double>(head(au).forward(feat).values[1]);
  }

  friend bool operator==(const HydraNet&, const HydraNet&) = default;

 private:
  netcore::Profile profile_ = netcore::Profile::tiny(2);
  LayerGraph<T> trunk_;
  std::vector<LayerSpec> head_specs_;
  std::map<AUCode, LayerGraph<T>> heads_;
};

// Independent full networks, one per AU, with no shared parameters.
template <typename T>
using AUNetEnsemble = std::map<AUCode, netcore::FusionNet<T>>;

}  // namespace aunets::detectors
