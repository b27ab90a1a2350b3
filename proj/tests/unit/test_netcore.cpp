#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "aunets/netcore.hpp"
#include "support/gradcheck.hpp"

using namespace aunets;
using namespace aunets::netcore;

namespace {

template <typename T>
bool bit_equal(const Buffer<T>& a, const Buffer<T>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(T)) == 0;
}

template <typename T>
bool params_bit_equal(const LayerGraph<T>& a, const LayerGraph<T>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!bit_equal(a.params(i).weight, b.params(i).weight) || !bit_equal(a.params(i).bias, b.params(i).bias))
      return false;
  return true;
}

Tensor<float> random_image(Shape s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.f, 1.f);
  Tensor<float> t(s);
  for (auto& v : t.values) v = u(rng);
  return t;
}

// Closed-form parameter counts written independently of the layer builders.
constexpr std::size_t conv(std::size_t in, std::size_t out) { return 9 * in * out + out; }
constexpr std::size_t fc(std::size_t in, std::size_t out) { return in * out + out; }

std::size_t vgg_conv(std::size_t first_in) {
  return conv(first_in, 64) + conv(64, 64) + conv(64, 128) + conv(128, 128) + conv(128, 256) + 2 * conv(256, 256) +
         conv(256, 512) + 5 * conv(512, 512);
}

}  // namespace

TEST(Build, DeterministicForSeed) {
  const auto a = build<float>(Profile::tiny(2), 7);
  const auto b = build<float>(Profile::tiny(2), 7);
  EXPECT_TRUE(params_bit_equal(a, b));
  const auto c = build<float>(Profile::tiny(2), 8);
  EXPECT_FALSE(params_bit_equal(a, c));
}

TEST(Build, InitialisationStatistics) {
  const auto net = build<double>(Profile::tiny(2), 3);
  double sum = 0, sq = 0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < net.size(); ++i) {
    for (double w : net.params(i).weight) {
      sum += w;
      sq += w * w;
      ++n;
    }
    for (double b : net.params(i).bias) EXPECT_EQ(b, 0.0);
    EXPECT_TRUE(net.layer(i).trainable);
  }
  EXPECT_NEAR(sum / n, 0.0, 1e-3);
  EXPECT_NEAR(std::sqrt(sq / n), 0.01, 5e-4);
}

TEST(Build, Vgg16HasExpectedParameterCount) {
  const auto net = build<float>(Profile::vgg16(2), 1);
  EXPECT_EQ(net.param_count(), 134268738u);
  EXPECT_EQ(net.output_shape(), Shape::flat(2));
}

TEST(Build, TinyShapes) {
  const auto net = build<float>(Profile::tiny(2), 1);
  EXPECT_EQ(net.input_shape(), (Shape{3, 64, 64}));
  EXPECT_EQ(net.shape_at(conv_trunk_size(net.layers())), Shape::flat(2048));
  EXPECT_EQ(net.param_count(), conv(3, 8) + conv(8, 16) + conv(16, 32) + fc(2048, 64) + fc(64, 2));
}

TEST(Forward, SoftmaxSumsToOne) {
  const auto net = build<float>(Profile::tiny(2), 7);
  const auto out = net.forward(random_image({3, 64, 64}, 1));
  ASSERT_EQ(out.size(), 2u);
  EXPECT_NEAR(out.values[0] + out.values[1], 1.0f, 1e-6f);
  EXPECT_GE(out.values[0], 0.f);
  EXPECT_GE(out.values[1], 0.f);
}

TEST(Forward, ZeroWeightsGiveUniformOutput) {
  LayerGraph<float> net({3, 64, 64}, encoder_layers(Profile::tiny(2), {3, 64, 64}));
  const auto out = net.forward(Tensor<float>({3, 64, 64}));
  EXPECT_FLOAT_EQ(out.values[0], 0.5f);
  EXPECT_FLOAT_EQ(out.values[1], 0.5f);
}

TEST(Forward, ReluIsIdentityOnNonNegativeInput) {
  LayerGraph<float> net({2, 3, 3}, {LayerSpec::relu()});
  auto x = random_image({2, 3, 3}, 5);
  EXPECT_EQ(net.forward(x), x);
}

TEST(Forward, FcIdentityMatrix) {
  LayerGraph<double> net(Shape::flat(2), {LayerSpec::fc(2, 2)});
  net.params(0).weight = {1, 0, 0, 1};
  const auto out = net.forward(Tensor<double>(Shape::flat(2), {3.0, 1.0}));
  EXPECT_EQ(out.values, (Buffer<double>{3.0, 1.0}));
}

TEST(Forward, ShapeMismatchIsRejected) {
  const auto net = build<float>(Profile::tiny(2), 7);
  try {
    net.forward(Tensor<float>({3, 32, 32}));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("32x32x3"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("64x64x3"), std::string::npos);
  }
}

TEST(Forward, SoftmaxStableForLargeLogits) {
  LayerGraph<float> net(Shape::flat(3), {LayerSpec::softmax()});
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<float> u(-500.f, 500.f);
  for (int t = 0; t < 200; ++t) {
    Tensor<float> x(Shape::flat(3), {u(rng), u(rng), u(rng)});
    const auto p = net.forward(x);
    double s = 0;
    for (float v : p.values) {
      ASSERT_TRUE(std::isfinite(v));
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
}

TEST(Forward, IncompatibleLayersAreRejected) {
  EXPECT_THROW(LayerGraph<float>({3, 8, 8}, {LayerSpec::conv(4, 8)}), ShapeError);
  EXPECT_THROW(LayerGraph<float>({3, 8, 8}, {LayerSpec::fc(192, 2)}), ShapeError);
  EXPECT_NO_THROW(LayerGraph<float>({3, 8, 8}, {LayerSpec::flatten(), LayerSpec::fc(192, 2)}));
}

TEST(Backward, FrozenLayerHasNoGradientRecord) {
  auto net = build<float>(Profile::tiny(2), 7);
  net.set_trainable(0, false);
  const auto g = backward(net, random_image({3, 64, 64}, 2), 1);
  EXPECT_FALSE(g.layers[0].has_value());
  for (std::size_t i = 1; i < net.size(); ++i) EXPECT_EQ(g.layers[i].has_value(), net.layer(i).has_params());
}

TEST(Backward, SaturatedCrossEntropyHasVanishingGradient) {
  LayerGraph<double> net(Shape::flat(2), {LayerSpec::fc(2, 2), LayerSpec::softmax()});
  net.params(0).weight = {100, 0, -100, 0};
  const auto g = backward(net, Tensor<double>(Shape::flat(2), {1.0, 0.5}), 0);
  double mag = 0;
  for (double v : g.layers[0]->weight) mag = std::max(mag, std::abs(v));
  for (double v : g.layers[0]->bias) mag = std::max(mag, std::abs(v));
  EXPECT_LT(mag, 1e-6);
}

TEST(Backward, InputGradientMatchesCentralDifferences) {
  LayerGraph<double> net({2, 4, 4}, {LayerSpec::conv(2, 3), LayerSpec::relu(), LayerSpec::pool(), LayerSpec::flatten(),
                                     LayerSpec::fc(12, 3), LayerSpec::softmax()});
  net.init_normal(4, 0.5);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor<double> x({2, 4, 4});
  for (auto& v : x.values) v = u(rng);
  ForwardCache<double> cache;
  net.forward(x, cache);
  auto [loss, dlogits] = softmax_cross_entropy(cache.output(), 2);
  auto grads = net.make_gradients();
  const auto gx = net.backward(cache, dlogits, grads, true, net.size() - 1);
  for (std::size_t k = 0; k < x.size(); ++k) {
    auto xp = x, xm = x;
    xp.values[k] += 1e-5;
    xm.values[k] -= 1e-5;
    const double num = (cross_entropy_loss(net, xp, 2) - cross_entropy_loss(net, xm, 2)) / 2e-5;
    EXPECT_NEAR(gx.values[k], num, 1e-6 + 1e-4 * std::abs(num));
  }
}

TEST(Backward, TinyParameterGradientsMatchCentralDifferences) {
  std::mt19937_64 rng(11);
  auto net = build_fusion_net<double>(FusionMode::RgbOnly, Profile::tiny(2), 5);
  oracle::randomize(net, rng);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  NetInput<double> in{Tensor<double>({3, 64, 64})};
  for (auto& v : in.primary.values) v = u(rng);
  const auto r = oracle::check_parameter_gradients(net, in, 1, rng, 10);
  EXPECT_GT(r.checked, 30u);
  EXPECT_LT(r.max_rel_error, 1e-3);
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  auto net = build_fusion_net<float>(FusionMode::RgbOnly, Profile::tiny(2), 1);
  const auto before = net;
  auto state = make_adam_state(net);
  const auto zero = net.make_gradients();
  adam_step(net, zero, state, AdamConfig{});
  EXPECT_TRUE(net == before);
}

TEST(Adam, FirstStepMovesBySignOfGradient) {
  LayerGraph<double> net(Shape::flat(3), {LayerSpec::fc(3, 2), LayerSpec::softmax()});
  net.init_normal(1, 0.1);
  const auto before = net.params(0).weight;
  auto g = net.make_gradients();
  g.layers[0]->weight = {0.3, -2.0, 1e-3, -0.5, 4.0, 0.0};
  auto state = make_adam_state(net);
  AdamConfig cfg;
  cfg.lr = 1e-3;
  adam_step(net, g, state, cfg);
  for (std::size_t k = 0; k < before.size(); ++k) {
    const double gk = g.layers[0]->weight[k];
    const double expected = gk == 0 ? 0.0 : -cfg.lr * gk / (std::abs(gk) + cfg.epsilon);
    EXPECT_NEAR(net.params(0).weight[k] - before[k], expected, 1e-12);
  }
}

TEST(Adam, DeterministicForIdenticalInputs) {
  auto a = build_fusion_net<float>(FusionMode::Horizontal, Profile::tiny(2), 3);
  auto b = a;
  auto sa = make_adam_state(a);
  auto sb = sa;
  NetInput<float> in{random_image({3, 64, 128}, 4)};
  auto g = a.make_gradients();
  a.accumulate_gradients(in, 1, g);
  adam_step(a, g, sa, AdamConfig{});
  adam_step(b, g, sb, AdamConfig{});
  EXPECT_TRUE(a == b);
  EXPECT_EQ(sa.step, sb.step);
}

TEST(Adam, MismatchedStateIsRejected) {
  auto a = build_fusion_net<float>(FusionMode::RgbOnly, Profile::tiny(2), 3);
  auto other = build_fusion_net<float>(FusionMode::PiConv, Profile::tiny(2), 3);
  auto state = make_adam_state(other);
  EXPECT_THROW(adam_step(a, a.make_gradients(), state, AdamConfig{}), ShapeError);
}

TEST(ParamCount, MatchesClosedFormsForVgg16) {
  const auto p = Profile::vgg16(2);
  const std::size_t c3 = vgg_conv(3);
  const std::size_t head = fc(25088, 4096) + fc(4096, 4096) + fc(4096, 2);
  const std::size_t wide_head = fc(2 * 25088, 4096) + fc(4096, 4096) + fc(4096, 2);
  EXPECT_EQ(param_count(Architecture::AUNets, p, false), c3 + head);
  EXPECT_EQ(param_count(Architecture::AUNets, p, false), 134268738u);
  EXPECT_EQ(param_count(Architecture::HydraNet, p, false), c3 + head);
  EXPECT_EQ(param_count(Architecture::HydraNet, p, true), head);
  EXPECT_EQ(param_count(Architecture::HydraNet, p, true), 119554050u);
  EXPECT_EQ(param_count(Architecture::Channels, p, false), vgg_conv(6) + head);
  EXPECT_EQ(param_count(Architecture::Horizontal, p, false), c3 + wide_head);
  EXPECT_EQ(param_count(Architecture::Horizontal, p, false), 237029186u);
  EXPECT_EQ(param_count(Architecture::PiConv, p, false), 2 * c3 + wide_head);
  EXPECT_EQ(param_count(Architecture::PiConv, p, true), c3 + wide_head);
  const std::size_t fc6 = fc(25088, 4096);
  EXPECT_EQ(param_count(Architecture::PiFc6, p, false), 2 * (c3 + fc6) + fc(8192, 4096) + fc(4096, 2));
  EXPECT_EQ(param_count(Architecture::PiFc6, p, true), c3 + fc6 + fc(8192, 4096) + fc(4096, 2));
  EXPECT_EQ(param_count(Architecture::PiFc6, p, true), 151045954u);
  const std::size_t fc7 = fc(4096, 4096);
  EXPECT_EQ(param_count(Architecture::PiFc7, p, false), 2 * (c3 + fc6 + fc7) + fc(8192, 2));
  EXPECT_EQ(param_count(Architecture::PiFc7, p, true), c3 + fc6 + fc7 + fc(8192, 2));
  for (Architecture a : {Architecture::AUNets, Architecture::Channels, Architecture::Horizontal})
    EXPECT_EQ(param_count(a, p, true), param_count(a, p, false));
}

TEST(ParamCount, UnknownDescriptorIsRejected) {
  EXPECT_THROW(param_count("resnet", Profile::vgg16(2), false), std::invalid_argument);
  EXPECT_EQ(param_count("horizontal", Profile::vgg16(2), false), 237029186u);
}

TEST(ParamCount, BuiltNetworksAgreeWithLayouts) {
  const auto p = Profile::tiny(2);
  for (FusionMode m : kAllFusionModes) {
    const auto net = build_fusion_net<float>(m, p, 1);
    EXPECT_EQ(net.param_count(false), param_count(architecture_of(m), p, false)) << to_string(m);
    EXPECT_EQ(net.param_count(true), param_count(architecture_of(m), p, true)) << to_string(m);
  }
}

TEST(Transplant, ChannelsCopiesFirstLayerAndIsLinear) {
  const auto p = Profile::tiny(2);
  const auto base = build<float>(p, 21);
  const auto net = make_fusion_net(FusionMode::Channels, p, base, 21);
  const auto& w6 = net.single().params(0).weight;
  const auto& w3 = base.params(0).weight;
  for (int o = 0; o < 8; ++o)
    for (int c = 0; c < 3; ++c) {
      EXPECT_EQ(std::memcmp(&w6[(o * 6 + c + 3) * 9], &w6[(o * 6 + c) * 9], 9 * sizeof(float)), 0);
      EXPECT_EQ(std::memcmp(&w6[(o * 6 + c) * 9], &w3[(o * 3 + c) * 9], 9 * sizeof(float)), 0);
    }
  for (std::size_t i = 1; i < base.size(); ++i) {
    EXPECT_TRUE(bit_equal(net.single().params(i).weight, base.params(i).weight));
  }

  // Duplicated input: first-layer pre-activation doubles, bias counted once.
  auto biased = base;
  for (auto& b : biased.params(0).bias) b = 0.25f;
  const auto net_b = make_fusion_net(FusionMode::Channels, p, biased, 21);
  const auto rgb = random_image({3, 64, 64}, 8);
  Tensor<float> six({6, 64, 64});
  std::copy(rgb.values.begin(), rgb.values.end(), six.values.begin());
  std::copy(rgb.values.begin(), rgb.values.end(), six.values.begin() + rgb.size());
  const auto conv3 = biased.slice(0, 1).forward(rgb);
  const auto conv6 = net_b.single().slice(0, 1).forward(six);
  for (std::size_t k = 0; k < conv3.size(); ++k) EXPECT_NEAR(conv6.values[k], 2 * conv3.values[k] - 0.25f, 1e-5);
}

TEST(Transplant, CloneTrunkIsIndependentCopy) {
  const auto p = Profile::tiny(2);
  const auto base = build<float>(p, 4);
  auto net = make_fusion_net(FusionMode::PiFc6, p, base, 4);
  auto& s = net.streams();
  EXPECT_TRUE(params_bit_equal(s.color_trunk, s.motion_trunk));
  EXPECT_TRUE(params_bit_equal(s.color_trunk, base.slice(0, s.color_trunk.size())));
  const auto color_before = s.color_trunk;
  s.motion_trunk.params(0).weight[0] += 1.0f;
  EXPECT_TRUE(params_bit_equal(s.color_trunk, color_before));
}

TEST(Transplant, TiledFcIgnoresZeroSecondHalf) {
  const auto p = Profile::tiny(2);
  const auto base = build<float>(p, 12);
  const auto net = make_fusion_net(FusionMode::Horizontal, p, base, 12);
  const std::size_t fc6 = conv_trunk_size(base.layers());
  const auto& wide = net.single().params(fc6).weight;
  const auto& narrow = base.params(fc6).weight;
  // Feature (c, y, x + 8) of the 8x16 map reuses the weight of (c, y, x).
  for (int o = 0; o < 64; ++o)
    for (int c = 0; c < 32; ++c)
      for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) {
          const float left = wide[o * 4096 + (c * 8 + y) * 16 + x];
          const float right = wide[o * 4096 + (c * 8 + y) * 16 + x + 8];
          const float orig = narrow[o * 2048 + (c * 8 + y) * 8 + x];
          ASSERT_EQ(std::memcmp(&left, &orig, sizeof(float)), 0);
          ASSERT_EQ(std::memcmp(&right, &orig, sizeof(float)), 0);
        }

  const auto fc_narrow = base.slice(fc6, fc6 + 1);
  const auto fc_wide = net.single().slice(fc6, fc6 + 1);
  const auto feat = random_image({32, 8, 8}, 3);
  Tensor<float> narrow_in(Shape::flat(2048), feat.values);
  Tensor<float> wide_in({32, 8, 16});
  for (int c = 0; c < 32; ++c)
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) wide_in.at(c, y, x) = feat.at(c, y, x);
  Tensor<float> wide_flat(Shape::flat(4096), wide_in.values);
  const auto a = fc_narrow.forward(narrow_in);
  const auto b = fc_wide.forward(wide_flat);
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(a.values[k], b.values[k], 1e-5);
}

TEST(Transplant, IncompatibleShapesAreRejected) {
  const auto tiny = build<float>(Profile::tiny(2), 1);
  auto other = build<float>(Profile::tiny(3), 1);
  EXPECT_THROW(transplant(TransplantOp::CloneTrunk, tiny, other), ShapeError);
  auto same = build<float>(Profile::tiny(2), 2);
  EXPECT_THROW(transplant(TransplantOp::CopyFirstLayerToExtraChannels, tiny, same), ShapeError);
  EXPECT_THROW(transplant(TransplantOp::TileFcForDoubledInput, tiny, same), ShapeError);
}

TEST(TwoStream, HeadInputIsTwiceStreamFeatures) {
  const auto p = Profile::tiny(2);
  for (FusionMode m : {FusionMode::PiConv, FusionMode::PiFc6, FusionMode::PiFc7}) {
    const auto net = build_fusion_net<float>(m, p, 1);
    const auto& s = net.streams();
    EXPECT_EQ(s.head.input_shape().width, 2 * s.color_trunk.output_shape().width);
    for (const auto& l : s.color_trunk.layers()) EXPECT_FALSE(l.trainable);
    for (const auto& l : s.motion_trunk.layers()) EXPECT_TRUE(l.trainable);
  }
  EXPECT_EQ(build_fusion_net<float>(FusionMode::PiConv, p, 1).streams().head.input_shape().width, 4096);
  EXPECT_EQ(build_fusion_net<float>(FusionMode::PiFc6, p, 1).streams().head.input_shape().width, 128);
}

TEST(TwoStream, FreezingIsExactAcrossTraining) {
  const auto p = Profile::tiny(2);
  auto net = build_fusion_net<float>(FusionMode::PiFc6, p, 6);
  const auto color = net.streams().color_trunk;
  const auto motion = net.streams().motion_trunk;
  auto state = make_adam_state(net);
  AdamConfig cfg;
  cfg.lr = 1e-2;
  for (int step = 0; step < 5; ++step) {
    auto g = net.make_gradients();
    NetInput<float> in{random_image({3, 64, 64}, step), random_image({3, 64, 64}, 100 + step)};
    net.accumulate_gradients(in, step % 2, g);
    adam_step(net, g, state, cfg);
  }
  EXPECT_TRUE(params_bit_equal(net.streams().color_trunk, color));
  EXPECT_FALSE(params_bit_equal(net.streams().motion_trunk, motion));
}

TEST(Checkpoint, RoundTripIsByteExact) {
  const auto p = Profile::tiny(2);
  for (FusionMode m : kAllFusionModes) {
    const auto net = build_fusion_net<float>(m, p, 42);
    const auto bytes = encode_checkpoint(net);
    const auto back = decode_checkpoint<float>(bytes);
    EXPECT_TRUE(back == net) << to_string(m);
    EXPECT_EQ(encode_checkpoint(back), bytes) << to_string(m);
  }
}

TEST(Checkpoint, HeaderLayout) {
  const auto net = build_fusion_net<float>(FusionMode::Horizontal, Profile::tiny(2), 0x0102030405060708ull);
  const auto bytes = encode_checkpoint(net);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 8), "AUNETCKP");
  EXPECT_EQ(bytes[8], 1);  // version, little-endian
  EXPECT_EQ(bytes[12], 4);
  EXPECT_EQ(std::string(bytes.begin() + 16, bytes.begin() + 20), "tiny");
  EXPECT_EQ(bytes[20], static_cast<std::uint8_t>(FusionMode::Horizontal));
  EXPECT_EQ(bytes[21], 0x08);
  EXPECT_EQ(bytes[28], 0x01);
  // Payload is exactly the float32 parameters.
  const std::size_t header = 8 + 4 + 4 + 4 + 1 + 8 + 4 + 12 + 4 + net.single().size() * 10;
  EXPECT_EQ(bytes.size(), header + 4 * net.param_count());
}

TEST(Checkpoint, CorruptionIsRejected) {
  const auto net = build_fusion_net<float>(FusionMode::RgbOnly, Profile::tiny(2), 1);
  auto bytes = encode_checkpoint(net);
  auto truncated = bytes;
  truncated.resize(bytes.size() - 3);
  EXPECT_THROW(decode_checkpoint<float>(truncated), DataError);
  auto bad = bytes;
  bad[0] = 'X';
  EXPECT_THROW(decode_checkpoint<float>(bad), DataError);
  bytes.push_back(0);
  EXPECT_THROW(decode_checkpoint<float>(bytes), DataError);
}
