#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "aunets/netcore/fusion.hpp"
#include "aunets/netcore/layer_graph.hpp"

namespace aunets::netcore {

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;  // L2 coefficient added to the gradient
};

template <typename T>
struct AdamState {
  std::vector<Gradients<T>> first;   // m, one record per network part
  std::vector<Gradients<T>> second;  // v
  std::int64_t step = 0;
};

template <typename T>
AdamState<T> make_adam_state(const FusionNet<T>& net) {
  return {net.make_gradients(), net.make_gradients(), 0};
}

template <typename T>
AdamState<T> make_adam_state(const LayerGraph<T>& net) {
  return {{net.make_gradients()}, {net.make_gradients()}, 0};
}

namespace detail {

template <typename T>
void adam_block(Buffer<T>& x, const Buffer<T>& g, Buffer<T>& m, Buffer<T>& v,
                const AdamConfig& cfg, double c1, double c2) {
  if (g.size() != x.size() || m.size() != x.size() || v.size() != x.size())
    throw ShapeError("adam state does not match parameter dimensions");
  const double b1 = cfg.beta1, b2 = cfg.beta2;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double gi = static_cast<double>(g[i]) + cfg.weight_decay * static_cast<double>(x[i]);
    const double mi = b1 * static_cast<double>(m[i]) + (1.0 - b1) * gi;
    const double vi = b2 * static_cast<double>(v[i]) + (1.0 - b2) * gi * gi;
    m[i] = static_cast<T>(mi);
    v[i] = static_cast<T>(vi);
    x[i] = static_cast<T>(static_cast<double>(x[i]) - cfg.lr * (mi / c1) / (std::sqrt(vi / c2) + cfg.epsilon));
  }
}

template <typename T>
void adam_part(LayerGraph<T>& net, const Gradients<T>& grads, Gradients<T>& m, Gradients<T>& v, const AdamConfig& cfg,
               double c1, double c2) {
  if (grads.layers.size() != net.size() || m.layers.size() != net.size() || v.layers.size() != net.size())
    throw ShapeError("adam state does not match network layers");
  for (std::size_t i = 0; i < net.size(); ++i) {
    if (!grads.layers[i]) continue;
    if (!net.layer(i).trainable) continue;
    if (!m.layers[i] || !v.layers[i]) throw ShapeError("adam state missing for trainable layer " + std::to_string(i));
    adam_block(net.params(i).weight, grads.layers[i]->weight, m.layers[i]->weight, v.layers[i]->weight, cfg, c1, c2);
    adam_block(net.params(i).bias, grads.layers[i]->bias, m.layers[i]->bias, v.layers[i]->bias, cfg, c1, c2);
  }
}

}  // namespace detail

// One Adam update with bias correction. Layers without a gradient record are left untouched.
template <typename T>
void adam_step(FusionNet<T>& net, const std::vector<Gradients<T>>& grads, AdamState<T>& state, const AdamConfig& cfg) {
  auto parts = net.parts();
  if (grads.size() != parts.size() || state.first.size() != parts.size() || state.second.size() != parts.size())
    throw ShapeError("adam state does not match network parts");
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  for (std::size_t p = 0; p < parts.size(); ++p)
    detail::adam_part(*parts[p], grads[p], state.first[p], state.second[p], cfg, c1, c2);
}

template <typename T>
void adam_step(LayerGraph<T>& net, const Gradients<T>& grads, AdamState<T>& state, const AdamConfig& cfg) {
  if (state.first.size() != 1 || state.second.size() != 1) throw ShapeError("adam state does not match network");
  ++state.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  detail::adam_part(net, grads, state.first[0], state.second[0], cfg, c1, c2);
}

}  // namespace aunets::netcore
