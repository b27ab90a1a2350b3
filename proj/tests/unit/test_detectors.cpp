#include <gtest/gtest.h>

#include <cstring>
#include <random>

#include "aunets/detectors/heads.hpp"
#include "aunets/detectors/train.hpp"
#include "aunets/netcore.hpp"

using namespace aunets;
using namespace aunets::detectors;
using namespace aunets::netcore;

namespace {

Tensor<float> random_image(Shape s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.f, 1.f);
  Tensor<float> t(s);
  for (auto& v : t.values) v = u(rng);
  return t;
}

// Bright-left versus bright-right 16x16 images; a tiny profile separates them quickly.
Profile toy_profile(int k = 2) { return {ProfileName::Tiny, 16, {{4}}, {8}, k}; }

std::vector<Example> toy_examples(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> noise(0.f, 0.3f);
  std::vector<Example> out;
  for (int i = 0; i < n; ++i) {
    const int label = i % 2;
    Tensor<float> img({3, 16, 16});
    for (int c = 0; c < 3; ++c)
      for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) img.at(c, y, x) = noise(rng) + ((x < 8) == (label == 1) ? 0.7f : 0.f);
    out.push_back({{img, std::nullopt}, label});
  }
  return out;
}

FusionNet<float> toy_net(std::uint64_t seed) {
  return {FusionMode::RgbOnly, ProfileName::Tiny, seed, build<float>(toy_profile(), seed, 3, InitScheme::He)};
}

}  // namespace

TEST(Schedule, LinearDecay) {
  const TrainConfig cfg;
  EXPECT_DOUBLE_EQ(learning_rate(cfg, 0), 1e-4);
  EXPECT_DOUBLE_EQ(learning_rate(cfg, 6), 5e-5);
  EXPECT_DOUBLE_EQ(learning_rate(cfg, 12), 0.0);
  EXPECT_DOUBLE_EQ(learning_rate(cfg, 20), 0.0);
  EXPECT_EQ(cfg.beta1, 0.5);
  EXPECT_EQ(cfg.beta2, 0.999);
}

TEST(Plateau, StopsAfterThreeStaleEpochs) {
  PlateauTracker p(3, 1e-4);
  const std::vector<double> trace{0.50, 0.60, 0.60, 0.60, 0.60};
  std::vector<bool> stops;
  for (double f : trace) stops.push_back(p.update(f));
  EXPECT_EQ(stops, (std::vector<bool>{false, false, false, false, true}));
  EXPECT_EQ(p.best_epoch(), 1);
  EXPECT_EQ(p.best(), 0.60);
}

TEST(Plateau, GainsBelowToleranceAreStale) {
  PlateauTracker p(3, 1e-4);
  p.update(0.5);
  p.update(0.50005);
  p.update(0.5001);
  EXPECT_TRUE(p.update(0.50009));
  EXPECT_EQ(p.best_epoch(), 0);
}

TEST(Train, DeterministicLogAndBestSnapshot) {
  const auto train = toy_examples(64, 1), val = toy_examples(32, 2);
  TrainConfig cfg;
  cfg.lr0 = 3e-3;
  cfg.seed = 5;
  cfg.batch_size = 8;
  const auto a = train_detector(toy_net(3), train, val, cfg);
  const auto b = train_detector(toy_net(3), train, val, cfg);
  EXPECT_EQ(a.log, b.log);
  EXPECT_TRUE(a.net == b.net);
  double best = 0;
  for (const auto& e : a.log) best = std::max(best, e.f1_val);
  EXPECT_EQ(a.best_f1, best);
  EXPECT_EQ(validation_f1(a.net, val), a.best_f1);
  EXPECT_GE(a.best_f1, 0.9);
  for (const auto& e : a.log) EXPECT_DOUBLE_EQ(e.lr, learning_rate(cfg, e.epoch));
}

TEST(Train, EmptyDataRejected) {
  const auto val = toy_examples(4, 2);
  EXPECT_THROW(train_detector(toy_net(1), {}, val, {}), std::invalid_argument);
  EXPECT_THROW(train_detector(toy_net(1), val, {}, {}), std::invalid_argument);
}

TEST(Predict, ZeroWeightsGiveHalfAndHalfIsPositive) {
  auto net = toy_net(1);
  for (std::size_t i = 0; i < net.single().size(); ++i) {
    auto& p = net.single().params(i);
    std::fill(p.weight.begin(), p.weight.end(), 0.f);
    std::fill(p.bias.begin(), p.bias.end(), 0.f);
  }
  const double p = predict_frame(net, {random_image({3, 16, 16}, 4), std::nullopt});
  EXPECT_EQ(p, 0.5);
  EXPECT_EQ(decision(p), 1);
}

TEST(Predict, ModeMismatchRejected) {
  const auto net = toy_net(1);
  EXPECT_THROW(predict_frame(net, {random_image({3, 16, 32}, 1), std::nullopt}), ShapeError);
  const FusionNet<float> nine{FusionMode::RgbOnly, ProfileName::Tiny, 1, build<float>(toy_profile(9), 1)};
  EXPECT_THROW(predict_frame(nine, {random_image({3, 16, 16}, 1), std::nullopt}), std::invalid_argument);
}

TEST(AdaptHead, KeepsBodyAndResizesOutput) {
  const auto emotion = build<float>(Profile::tiny(22), 11);
  const auto binary = adapt_head(emotion, 2, 4);
  ASSERT_EQ(binary.size(), emotion.size());
  for (std::size_t i = 0; i + 2 < emotion.size(); ++i) {
    EXPECT_EQ(binary.params(i).weight, emotion.params(i).weight);
    EXPECT_EQ(binary.params(i).bias, emotion.params(i).bias);
  }
  EXPECT_EQ(binary.output_shape(), Shape::flat(2));
  const auto back = adapt_head(binary, 22, 4);
  const auto out = back.forward(random_image({3, 64, 64}, 2));
  ASSERT_EQ(out.values.size(), 22u);
  double sum = 0;
  for (float v : out.values) sum += v;
  EXPECT_NEAR(sum, 1.0, 1e-6);
  EXPECT_THROW(adapt_head(emotion, 1, 0), std::invalid_argument);
}

TEST(Hydra, GrowingAHeadLeavesOthersUntouched) {
  HydraNet<float> hydra(build<float>(Profile::tiny(22), 2), Profile::tiny());
  hydra.grow_head(AUCode{1}, 10);
  hydra.grow_head(AUCode{12}, 11);
  const auto x = random_image({3, 64, 64}, 8);
  const double p1 = hydra.predict(AUCode{1}, x), p12 = hydra.predict(AUCode{12}, x);
  const auto before = hydra;
  hydra.grow_head(AUCode{17}, 12);
  EXPECT_EQ(hydra.predict(AUCode{1}, x), p1);
  EXPECT_EQ(hydra.predict(AUCode{12}, x), p12);
  EXPECT_TRUE(hydra.trunk() == before.trunk());
  EXPECT_TRUE(hydra.head(AUCode{1}) == before.head(AUCode{1}));
  EXPECT_THROW(hydra.grow_head(AUCode{17}, 1), std::invalid_argument);
  hydra.remove_head(AUCode{17});
  EXPECT_TRUE(hydra == before);
}

TEST(Hydra, TrunkIsFrozenDuringHeadTraining) {
  HydraNet<float> hydra(build<float>(toy_profile(22), 2, 3, InitScheme::He), toy_profile());
  hydra.grow_head(AUCode{2}, 1);
  const auto trunk = hydra.trunk();
  TrainConfig cfg;
  cfg.lr0 = 3e-3;
  cfg.max_epochs = 3;
  const auto r = train_detector(hydra.detector(AUCode{2}), toy_examples(32, 5), toy_examples(16, 6), cfg);
  hydra.store_head(AUCode{2}, r.net);
  EXPECT_TRUE(hydra.trunk() == trunk);
  EXPECT_EQ(hydra.detector(AUCode{2}).param_count(true), hydra.head(AUCode{2}).param_count(true));
}

TEST(Hydra, LearnableCountAtVgg16) {
  EXPECT_EQ(param_count(Architecture::HydraNet, Profile::vgg16(), true), 119'554'050u);
}
