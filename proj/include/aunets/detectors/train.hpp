#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "aunets/common.hpp"
#include "aunets/evalkit/metrics.hpp"
#include "aunets/netcore/adam.hpp"
#include "aunets/netcore/fusion.hpp"
#include "aunets/temporal/median.hpp"

namespace aunets::detectors {

using netcore::FusionNet;
using netcore::NetInput;

struct TrainConfig {
  double lr0 = 1e-4;
  int decay_epochs = 12;  // lr reaches 0 here
  double beta1 = 0.5;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;
  int plateau_epochs = 3;
  double plateau_tolerance = 1e-4;
  std::uint64_t seed = 0;
  int max_epochs = 12;
  int batch_size = 16;
};

// lr0 * max(0, 1 - epoch / decay_epochs)
inline double learning_rate(const TrainConfig& cfg, int epoch) {
  return cfg.lr0 * std::max(0.0, 1.0 - static_cast<double>(epoch) / cfg.decay_epochs);
}

// Early stopping on validation F1: stop once `patience` consecutive epochs fail to beat the
// best value by more than `tolerance`.
class PlateauTracker {
 public:
  PlateauTracker(int patience, double tolerance) : patience_(patience), tolerance_(tolerance) {}

  // Returns true when training should stop after this epoch.
  bool update(double f1) {
    if (best_epoch_ < 0 || f1 > best_ + tolerance_) {
      best_ = f1;
      best_epoch_ = epoch_;
      stale_ = 0;
    } else {
      ++stale_;
    }
    ++epoch_;
    return stale_ >= patience_;
  }

  bool improved_last() const { return best_epoch_ == epoch_ - 1; }
  int best_epoch() const { return best_epoch_; }
  double best() const { return best_; }

 private:
  int patience_;
  double tolerance_;
  double best_ = 0;
  int best_epoch_ = -1;
  int epoch_ = 0;
  int stale_ = 0;
};

struct Example {
  NetInput<float> input;
  int label = 0;
};

struct EpochLog {
  int epoch = 0;
  double loss = 0;
  double f1_val = 0;
  double lr = 0;

  friend bool operator==(const EpochLog&, const EpochLog&) = default;
};

struct TrainResult {
  FusionNet<float> net;  // best-F1-val snapshot
  std::vector<EpochLog> log;
  int best_epoch = 0;
  double best_f1 = 0;
};

// Probability of the positive class.
inline double predict_frame(const FusionNet<float>& net, const NetInput<float>& in) {
  if (net.k_outputs() != 2) throw std::invalid_argument("detector must have a 2-way output");
  return static_cast<double>(net.forward(in).values[1]);
}

inline int decision(double prob) { return temporal::decide(prob); }

inline double validation_f1(const FusionNet<float>& net, std::span<const Example> val) {
  std::vector<int> d, l;
  for (const auto& ex : val) {
    d.push_back(decision(predict_frame(net, ex.input)));
    l.push_back(ex.label);
  }
  return evalkit::f1_frame(d, l).f1;
}

// Arg-max class of the network output, lowest index on ties.
inline int predict_class(const FusionNet<float>& net, const NetInput<float>& in) {
  const auto out = net.forward(in);
  return static_cast<int>(std::max_element(out.values.begin(), out.values.end()) - out.values.begin());
}

inline double validation_accuracy(const FusionNet<float>& net, std::span<const Example> val) {
  std::size_t hits = 0;
  for (const auto& ex : val) hits += predict_class(net, ex.input) == ex.label;
  return static_cast<double>(hits) / static_cast<double>(val.size());
}

using ValidationMetric = std::function<double(const FusionNet<float>&, std::span<const Example>)>;

// Mini-batch Adam with linear lr decay and plateau stopping on `metric`. Deterministic given the
// initial weights, the data order and cfg.seed.
inline TrainResult train_network(FusionNet<float> net, std::span<const Example> train, std::span<const Example> val,
                                 const TrainConfig& cfg, const ValidationMetric& metric) {
  if (train.empty()) throw std::invalid_argument("training data is empty");
  if (val.empty()) throw std::invalid_argument("validation data is empty");
  if (cfg.batch_size < 1) throw std::invalid_argument("batch size must be positive");
  auto state = netcore::make_adam_state(net);
  auto grads = net.make_gradients();
  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(train.size());
  PlateauTracker plateau(cfg.plateau_epochs, cfg.plateau_tolerance);
  TrainResult result;
  result.net = net;
  const int epochs = std::min(cfg.max_epochs, cfg.decay_epochs);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    const double lr = learning_rate(cfg, epoch);
    const netcore::AdamConfig adam{lr, cfg.beta1, cfg.beta2, cfg.epsilon, cfg.weight_decay};
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = std::uniform_int_distribution<std::size_t>(0, i - 1)(rng);
      std::swap(order[i - 1], order[j]);
    }
    double loss = 0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t e = std::min(order.size(), b + static_cast<std::size_t>(cfg.batch_size));
      for (auto& g : grads) g.zero();
      for (std::size_t k = b; k < e; ++k) {
        const auto& ex = train[order[k]];
        loss += net.accumulate_gradients(ex.input, ex.label, grads);
      }
      for (auto& g : grads) g.scale(1.0f / static_cast<float>(e - b));
      netcore::adam_step(net, grads, state, adam);
    }
    const double score = metric(net, val);
    result.log.push_back({epoch, loss / static_cast<double>(train.size()), score, lr});
    const bool stop = plateau.update(score);
    if (plateau.improved_last()) result.net = net;
    if (stop) break;
  }
  result.best_epoch = plateau.best_epoch();
  result.best_f1 = plateau.best();
  return result;
}

// Binary AU detector training; the validation metric is frame F1.
inline TrainResult train_detector(FusionNet<float> net, std::span<const Example> train, std::span<const Example> val,
                                  const TrainConfig& cfg) {
  if (net.k_outputs() != 2) throw std::invalid_argument("detector must have a 2-way output");
  return train_network(std::move(net), train, val, cfg, validation_f1);
}

inline void write_training_log(const std::filesystem::path& path, const std::vector<EpochLog>& log) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "epoch,loss,f1_val,lr\n";
  out.precision(9);
  for (const auto& e : log) out << e.epoch << ',' << e.loss << ',' << e.f1_val << ',' << e.lr << '\n';
}

}  // namespace aunets::detectors
