#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "aunets/netcore/layers.hpp"
#include "aunets/netcore/tensor.hpp"

namespace aunets::netcore {

template <typename T>
struct ParamBlock {
  Buffer<T> weight;
  Buffer<T> bias;

  friend bool operator==(const ParamBlock&, const ParamBlock&) = default;
};

// Per-layer gradient records; a slot is engaged only for trainable parameter layers.
template <typename T>
struct Gradients {
  std::vector<std::optional<ParamBlock<T>>> layers;

  void scale(T s) {
    for (auto& g : layers)
      if (g) {
        for (auto& v : g->weight) v *= s;
        for (auto& v : g->bias) v *= s;
      }
  }
  void zero() {
    for (auto& g : layers)
      if (g) {
        std::fill(g->weight.begin(), g->weight.end(), T(0));
        std::fill(g->bias.begin(), g->bias.end(), T(0));
      }
  }
};

template <typename T>
struct ForwardCache {
  std::vector<Tensor<T>> activations;              // activations[i] is the input of layer i
  std::vector<Buffer<T>> columns;             // im2col buffers, conv layers only
  std::vector<std::vector<std::uint32_t>> argmax;  // pooling switches

  const Tensor<T>& output() const { return activations.back(); }
};

// Feed-forward chain of layers with dense parameters.
template <typename T>
class LayerGraph {
 public:
  using Scalar = T;

  LayerGraph() = default;

  LayerGraph(Shape input, std::vector<LayerSpec> layers)
      : input_shape_(input), layers_(std::move(layers)), shapes_(propagate_all(input_shape_, layers_)) {
    params_.resize(layers_.size());
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      params_[i].weight.assign(layers_[i].weight_count(), T(0));
      params_[i].bias.assign(layers_[i].bias_count(), T(0));
    }
  }

  const Shape& input_shape() const { return input_shape_; }
  const Shape& output_shape() const { return shapes_.back(); }
  // Shape of the input to layer i; index size() gives the output shape.
  const Shape& shape_at(std::size_t i) const { return shapes_.at(i); }
  std::size_t size() const { return layers_.size(); }
  bool empty() const { return layers_.empty(); }
  std::span<const LayerSpec> layers() const { return layers_; }
  const LayerSpec& layer(std::size_t i) const { return layers_.at(i); }

  ParamBlock<T>& params(std::size_t i) { return params_.at(i); }
  const ParamBlock<T>& params(std::size_t i) const { return params_.at(i); }
  std::span<const ParamBlock<T>> all_params() const { return params_; }

  void set_trainable(std::size_t i, bool trainable) { layers_.at(i).trainable = trainable; }
  void set_trainable_range(std::size_t begin, std::size_t end, bool trainable) {
    for (std::size_t i = begin; i < end && i < layers_.size(); ++i) layers_[i].trainable = trainable;
  }
  void set_all_trainable(bool trainable) { set_trainable_range(0, layers_.size(), trainable); }

  std::size_t param_count(bool learnable_only = false) const { return count_params(layers_, learnable_only); }

  // Weights ~ normal(0, stddev), biases zero, drawn in layer order.
  void init_normal(std::uint64_t seed, double stddev = 0.01) {
    std::mt19937_64 rng(seed);
    init_normal(rng, 0, layers_.size(), stddev);
  }
  void init_normal(std::mt19937_64& rng, std::size_t begin, std::size_t end, double stddev) {
    std::normal_distribution<double> dist(0.0, stddev);
    for (std::size_t i = begin; i < end && i < layers_.size(); ++i) {
      for (auto& w : params_[i].weight) w = static_cast<T>(dist(rng));
      std::fill(params_[i].bias.begin(), params_[i].bias.end(), T(0));
    }
  }

  // He scaling: weights ~ normal(0, sqrt(2 / fan_in)), biases zero.
  void init_he(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      if (!layers_[i].has_params()) continue;
      const int fan_in = layers_[i].kind == LayerKind::Conv3x3 ? layers_[i].in * 9 : layers_[i].in;
      init_normal(rng, i, i + 1, std::sqrt(2.0 / fan_in));
    }
  }

  Gradients<T> make_gradients() const {
    Gradients<T> g;
    g.layers.resize(layers_.size());
    for (std::size_t i = 0; i < layers_.size(); ++i)
      if (layers_[i].has_params() && layers_[i].trainable)
        g.layers[i] = ParamBlock<T>{Buffer<T>(params_[i].weight.size(), T(0)),
                                    Buffer<T>(params_[i].bias.size(), T(0))};
    return g;
  }

  // Layers [begin, end) as an independent graph with copied parameters.
  LayerGraph slice(std::size_t begin, std::size_t end) const {
    if (begin > end || end > layers_.size()) throw ShapeError("slice range out of bounds");
    LayerGraph out(shapes_[begin], std::vector<LayerSpec>(layers_.begin() + begin, layers_.begin() + end));
    for (std::size_t i = begin; i < end; ++i) out.params_[i - begin] = params_[i];
    return out;
  }

  // `head` must accept this graph's output shape.
  LayerGraph then(const LayerGraph& head) const {
    if (head.input_shape() != output_shape())
      throw ShapeError("cannot chain " + to_string(output_shape()) + " into " + to_string(head.input_shape()));
    std::vector<LayerSpec> specs = layers_;
    specs.insert(specs.end(), head.layers_.begin(), head.layers_.end());
    LayerGraph out(input_shape_, std::move(specs));
    for (std::size_t i = 0; i < layers_.size(); ++i) out.params_[i] = params_[i];
    for (std::size_t i = 0; i < head.layers_.size(); ++i) out.params_[layers_.size() + i] = head.params_[i];
    return out;
  }

  Tensor<T> forward(const Tensor<T>& input) const {
    ForwardCache<T> cache;
    forward(input, cache);
    return std::move(cache.activations.back());
  }

  const Tensor<T>& forward(const Tensor<T>& input, ForwardCache<T>& cache) const {
    if (input.shape != input_shape_)
      throw ShapeError("input shape " + to_string(input.shape) + " does not match network input " +
                       to_string(input_shape_));
    cache.activations.resize(layers_.size() + 1);
    cache.columns.resize(layers_.size());
    cache.argmax.resize(layers_.size());
    cache.activations[0] = input;
    for (std::size_t i = 0; i < layers_.size(); ++i)
      cache.activations[i + 1] = forward_layer(i, cache.activations[i], cache);
    return cache.activations.back();
  }

  // Back-propagates `grad` (gradient w.r.t. the output of layer end-1) down the chain,
  // accumulating into `grads`. Returns the input gradient when requested, else an empty tensor.
  Tensor<T> backward(const ForwardCache<T>& cache, Tensor<T> grad, Gradients<T>& grads, bool need_input_grad,
                     std::size_t end) const {
    if (end > layers_.size()) throw ShapeError("backward end beyond network");
    if (grads.layers.size() != layers_.size()) throw ShapeError("gradient record does not match network");
    std::size_t lowest = 0;
    if (!need_input_grad) {
      lowest = end;
      for (std::size_t i = 0; i < end; ++i)
        if (layers_[i].has_params() && layers_[i].trainable) {
          lowest = i;
          break;
        }
    }
    for (std::size_t i = end; i-- > lowest;) {
      const bool want_input = need_input_grad || i > lowest;
      grad = backward_layer(i, cache, grad, grads, want_input);
    }
    if (!need_input_grad) return {};
    return grad;
  }

  Tensor<T> backward(const ForwardCache<T>& cache, Tensor<T> grad, Gradients<T>& grads, bool need_input_grad) const {
    return backward(cache, std::move(grad), grads, need_input_grad, layers_.size());
  }

  friend bool operator==(const LayerGraph& a, const LayerGraph& b) {
    return a.input_shape_ == b.input_shape_ && a.layers_ == b.layers_ && a.params_ == b.params_;
  }

 private:
  using MatR = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

  Tensor<T> forward_layer(std::size_t i, const Tensor<T>& x, ForwardCache<T>& cache) const {
    const LayerSpec& spec = layers_[i];
    const Shape out_shape = shapes_[i + 1];
    Tensor<T> y(out_shape);
    switch (spec.kind) {
      case LayerKind::Conv3x3: {
        const int hw = x.shape.height * x.shape.width;
        auto& cols = cache.columns[i];
        im2col(x, cols);
        Eigen::Map<const MatR> w(params_[i].weight.data(), spec.out, spec.in * 9);
        Eigen::Map<const MatR> c(cols.data(), spec.in * 9, hw);
        Eigen::Map<MatR> out(y.values.data(), spec.out, hw);
        out.noalias() = w * c;
        Eigen::Map<const Vec> b(params_[i].bias.data(), spec.out);
        out.colwise() += b;
        break;
      }
      case LayerKind::MaxPool2x2: {
        auto& sw = cache.argmax[i];
        sw.resize(y.size());
        std::size_t k = 0;
        for (int c = 0; c < out_shape.channels; ++c)
          for (int oy = 0; oy < out_shape.height; ++oy)
            for (int ox = 0; ox < out_shape.width; ++ox, ++k) {
              std::uint32_t best_idx = 0;
              T best = -std::numeric_limits<T>::infinity();
              for (int dy = 0; dy < 2; ++dy)
                for (int dx = 0; dx < 2; ++dx) {
                  const std::size_t idx =
                      (static_cast<std::size_t>(c) * x.shape.height + 2 * oy + dy) * x.shape.width + 2 * ox + dx;
                  if (x.values[idx] > best) {
                    best = x.values[idx];
                    best_idx = static_cast<std::uint32_t>(idx);
                  }
                }
              y.values[k] = best;
              sw[k] = best_idx;
            }
        break;
      }
      case LayerKind::Relu:
        for (std::size_t k = 0; k < x.size(); ++k) y.values[k] = x.values[k] > T(0) ? x.values[k] : T(0);
        break;
      case LayerKind::Flatten:
        y.values = x.values;
        break;
      case LayerKind::Fc: {
        Eigen::Map<const MatR> w(params_[i].weight.data(), spec.out, spec.in);
        Eigen::Map<const Vec> in(x.values.data(), spec.in);
        Eigen::Map<const Vec> b(params_[i].bias.data(), spec.out);
        Eigen::Map<Vec> out(y.values.data(), spec.out);
        out.noalias() = w * in;
        out += b;
        break;
      }
      case LayerKind::Softmax: {
        const T mx = *std::max_element(x.values.begin(), x.values.end());
        T sum = 0;
        for (std::size_t k = 0; k < x.size(); ++k) {
          y.values[k] = std::exp(x.values[k] - mx);
          sum += y.values[k];
        }
        for (auto& v : y.values) v /= sum;
        break;
      }
    }
    return y;
  }

  Tensor<T> backward_layer(std::size_t i, const ForwardCache<T>& cache, const Tensor<T>& gy, Gradients<T>& grads,
                           bool want_input) const {
    const LayerSpec& spec = layers_[i];
    const Tensor<T>& x = cache.activations[i];
    const Tensor<T>& y = cache.activations[i + 1];
    Tensor<T> gx;
    if (want_input) gx = Tensor<T>(x.shape);
    auto& record = grads.layers[i];
    switch (spec.kind) {
      case LayerKind::Conv3x3: {
        const int hw = x.shape.height * x.shape.width;
        Eigen::Map<const MatR> dy(gy.values.data(), spec.out, hw);
        Eigen::Map<const MatR> c(cache.columns[i].data(), spec.in * 9, hw);
        if (record) {
          Eigen::Map<MatR> dw(record->weight.data(), spec.out, spec.in * 9);
          dw.noalias() += dy * c.transpose();
          Eigen::Map<Vec> db(record->bias.data(), spec.out);
          db += dy.rowwise().sum();
        }
        if (want_input) {
          Eigen::Map<const MatR> w(params_[i].weight.data(), spec.out, spec.in * 9);
          Buffer<T> dcols(static_cast<std::size_t>(spec.in) * 9 * hw);
          Eigen::Map<MatR> dc(dcols.data(), spec.in * 9, hw);
          dc.noalias() = w.transpose() * dy;
          col2im(dcols, gx);
        }
        break;
      }
      case LayerKind::MaxPool2x2:
        if (want_input) {
          const auto& sw = cache.argmax[i];
          for (std::size_t k = 0; k < gy.size(); ++k) gx.values[sw[k]] += gy.values[k];
        }
        break;
      case LayerKind::Relu:
        if (want_input)
          for (std::size_t k = 0; k < x.size(); ++k) gx.values[k] = x.values[k] > T(0) ? gy.values[k] : T(0);
        break;
      case LayerKind::Flatten:
        if (want_input) gx.values = gy.values;
        break;
      case LayerKind::Fc: {
        Eigen::Map<const Vec> dy(gy.values.data(), spec.out);
        if (record) {
          Eigen::Map<const Vec> in(x.values.data(), spec.in);
          Eigen::Map<MatR> dw(record->weight.data(), spec.out, spec.in);
          dw.noalias() += dy * in.transpose();
          Eigen::Map<Vec> db(record->bias.data(), spec.out);
          db += dy;
        }
        if (want_input) {
          Eigen::Map<const MatR> w(params_[i].weight.data(), spec.out, spec.in);
          Eigen::Map<Vec> dx(gx.values.data(), spec.in);
          dx.noalias() = w.transpose() * dy;
        }
        break;
      }
      case LayerKind::Softmax:
        if (want_input) {
          T dot = 0;
          for (std::size_t k = 0; k < y.size(); ++k) dot += gy.values[k] * y.values[k];
          for (std::size_t k = 0; k < y.size(); ++k) gx.values[k] = y.values[k] * (gy.values[k] - dot);
        }
        break;
    }
    return gx;
  }

  static void im2col(const Tensor<T>& x, Buffer<T>& cols) {
    const int C = x.shape.channels, H = x.shape.height, W = x.shape.width;
    cols.assign(static_cast<std::size_t>(C) * 9 * H * W, T(0));
    std::size_t row = 0;
    for (int c = 0; c < C; ++c)
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx, ++row) {
          T* dst = cols.data() + row * H * W;
          for (int yy = 0; yy < H; ++yy) {
            const int sy = yy + ky - 1;
            if (sy < 0 || sy >= H) continue;
            const T* src = x.values.data() + (static_cast<std::size_t>(c) * H + sy) * W;
            const int x0 = std::max(0, 1 - kx), x1 = std::min(W, W + 1 - kx);
            for (int xx = x0; xx < x1; ++xx) dst[yy * W + xx] = src[xx + kx - 1];
          }
        }
  }

  static void col2im(const Buffer<T>& cols, Tensor<T>& gx) {
    const int C = gx.shape.channels, H = gx.shape.height, W = gx.shape.width;
    std::size_t row = 0;
    for (int c = 0; c < C; ++c)
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx, ++row) {
          const T* src = cols.data() + row * H * W;
          for (int yy = 0; yy < H; ++yy) {
            const int sy = yy + ky - 1;
            if (sy < 0 || sy >= H) continue;
            T* dst = gx.values.data() + (static_cast<std::size_t>(c) * H + sy) * W;
            const int x0 = std::max(0, 1 - kx), x1 = std::min(W, W + 1 - kx);
            for (int xx = x0; xx < x1; ++xx) dst[xx + kx - 1] += src[yy * W + xx];
          }
        }
  }

  Shape input_shape_;
  std::vector<LayerSpec> layers_;
  std::vector<Shape> shapes_;
  std::vector<ParamBlock<T>> params_;
};

// Cross-entropy on a softmax output: loss and gradient w.r.t. the pre-softmax logits.
template <typename T>
std::pair<T, Tensor<T>> softmax_cross_entropy(const Tensor<T>& probs, int target) {
  if (target < 0 || static_cast<std::size_t>(target) >= probs.size())
    throw ShapeError("target class " + std::to_string(target) + " outside output range");
  Tensor<T> g = probs;
  g.values[target] -= T(1);
  const T p = std::max(probs.values[target], std::numeric_limits<T>::min());
  return {-std::log(p), std::move(g)};
}

template <typename T>
void require_softmax_head(const LayerGraph<T>& net) {
  if (net.empty() || net.layer(net.size() - 1).kind != LayerKind::Softmax)
    throw ShapeError("network must end in a softmax layer");
}

// Forward + backward for one labelled example; gradients are accumulated into `grads`.
template <typename T>
T accumulate_gradients(const LayerGraph<T>& net, const Tensor<T>& input, int target, Gradients<T>& grads) {
  require_softmax_head(net);
  ForwardCache<T> cache;
  net.forward(input, cache);
  auto [loss, dlogits] = softmax_cross_entropy(cache.output(), target);
  net.backward(cache, std::move(dlogits), grads, false, net.size() - 1);
  return loss;
}

// Gradients of the cross-entropy loss for every trainable parameter (and only those).
template <typename T>
Gradients<T> backward(const LayerGraph<T>& net, const Tensor<T>& input, int target) {
  Gradients<T> g = net.make_gradients();
  accumulate_gradients(net, input, target, g);
  return g;
}

template <typename T>
T cross_entropy_loss(const LayerGraph<T>& net, const Tensor<T>& input, int target) {
  require_softmax_head(net);
  const auto probs = net.forward(input);
  return softmax_cross_entropy(probs, target).first;
}

}  // namespace aunets::netcore
