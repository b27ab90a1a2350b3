#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <random>

#include "aunets/multiview/cascade.hpp"
#include "aunets/multiview/ensemble.hpp"
#include "aunets/multiview/view_classifier.hpp"
#include "aunets/netcore/checkpoint.hpp"

using namespace aunets;
using namespace aunets::multiview;
using netcore::FusionMode;
using netcore::FusionNet;
namespace fs = std::filesystem;

namespace {

std::vector<double> peaked(int view, double conf = 0.9) {
  std::vector<double> d(kNumViews, (1.0 - conf) / (kNumViews - 1));
  d[static_cast<std::size_t>(view - 1)] = conf;
  return d;
}

netcore::Profile toy_profile() { return {netcore::ProfileName::Tiny, 16, {{4}}, {8}, 2}; }

FusionNet<float> toy_net(std::uint64_t seed) {
  return netcore::build_fusion_net<float>(FusionMode::RgbOnly, toy_profile(), seed, netcore::InitScheme::He);
}

Image noise_image(int side, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<float> u(0.f, 1.f);
  Image img({3, side, side});
  for (auto& v : img.values) v = u(rng);
  return img;
}

struct ManifestDir {
  fs::path root;
  EnsembleIndex index;

  explicit ManifestDir(const std::string& name) : root(fs::temp_directory_path() / ("aunets_mv_" + name)) {
    fs::remove_all(root);
    fs::create_directories(root);
  }
  ~ManifestDir() { fs::remove_all(root); }

  void put(Viewpoint v, AUCode au, const FusionNet<float>& net) {
    const auto rel = fs::path(to_string(v)) / (to_string(au) + ".ckpt");
    fs::create_directories(root / rel.parent_path());
    netcore::save_checkpoint(root / rel, net);
    index.add(v, au, rel, root);
  }

  EnsembleIndex reload() const {
    index.save(root / "ensemble.csv");
    return EnsembleIndex::load(root / "ensemble.csv");
  }
};

}  // namespace

TEST(ViewAggregation, AllFramesPeakedAtV3) {
  EXPECT_EQ(aggregate_views(std::vector(7, peaked(3)), ViewAggregation::Mean), (Viewpoint{3}));
}

TEST(ViewAggregation, SixtyFortySplitPicksMajorityView) {
  std::vector<std::vector<double>> d(6, peaked(2));
  for (int i = 0; i < 4; ++i) d.push_back(peaked(7));
  EXPECT_EQ(aggregate_views(d, ViewAggregation::Mean), (Viewpoint{2}));
  EXPECT_EQ(aggregate_views(d, ViewAggregation::Majority), (Viewpoint{2}));
}

TEST(ViewAggregation, UniformTiesGoToV1) {
  const std::vector<double> u(kNumViews, 1.0 / kNumViews);
  EXPECT_EQ(aggregate_views({u, u, u}, ViewAggregation::Mean), (Viewpoint{1}));
  EXPECT_EQ(aggregate_views({u}, ViewAggregation::Majority), (Viewpoint{1}));
}

TEST(ViewAggregation, MeanAndMajorityCanDisagree) {
  // one confident V8 frame outweighs two hesitant V4 frames on average, not by vote
  auto hesitant = peaked(4, 0.3);
  hesitant[7] = 0.25;
  const std::vector<std::vector<double>> d{hesitant, hesitant, peaked(8, 0.95)};
  EXPECT_EQ(aggregate_views(d, ViewAggregation::Mean), (Viewpoint{8}));
  EXPECT_EQ(aggregate_views(d, ViewAggregation::Majority), (Viewpoint{4}));
}

TEST(ViewAggregation, BadInputRejected) {
  EXPECT_THROW(aggregate_views({}, ViewAggregation::Mean), std::invalid_argument);
  EXPECT_THROW(aggregate_views({{0.5, 0.5}}, ViewAggregation::Mean), std::invalid_argument);
  EXPECT_THROW(parse_view_aggregation("max"), std::invalid_argument);
}

TEST(ClassifyVideo, SubsamplesAndRejectsEmpty) {
  int calls = 0;
  const ViewScorer scorer = [&](const Image&) {
    ++calls;
    return peaked(6);
  };
  const std::vector<Image> frames(25, Image({3, 4, 4}));
  const auto d = classify_view_video(scorer, frames);
  EXPECT_EQ(d.view, (Viewpoint{6}));
  EXPECT_EQ(d.sampled_frames, (std::vector<int>{0, 10, 20}));
  EXPECT_EQ(calls, 3);
  EXPECT_THROW(classify_view_video(scorer, {}), std::invalid_argument);
  EXPECT_THROW(classify_view_video(scorer, frames, 0), std::invalid_argument);
}

TEST(ClassifyVideo, MeanIsPermutationInvariant) {
  std::mt19937_64 rng(12);
  std::vector<std::vector<double>> d;
  for (int i = 0; i < 15; ++i) {
    std::vector<double> p(kNumViews);
    double s = 0;
    for (auto& v : p) s += (v = std::uniform_real_distribution<double>(0, 1)(rng));
    for (auto& v : p) v /= s;
    d.push_back(p);
  }
  const auto want = aggregate_views(d, ViewAggregation::Mean);
  for (int trial = 0; trial < 20; ++trial) {
    std::shuffle(d.begin(), d.end(), rng);
    ASSERT_EQ(aggregate_views(d, ViewAggregation::Mean), want);
  }
}

TEST(ViewClassifierNet, NineWayDistribution) {
  const ViewClassifier vc{
      netcore::build_fusion_net<float>(FusionMode::RgbOnly, netcore::Profile::tiny(kNumViews), 3), 64};
  const auto d = vc.distribution(noise_image(96, 1));
  ASSERT_EQ(d.size(), 9u);
  double s = 0;
  for (double v : d) s += v;
  EXPECT_NEAR(s, 1.0, 1e-6);
}

TEST(Route, MissingSlotIsNamed) {
  ManifestDir dir("missing");
  for (int v = 1; v <= 9; ++v)
    for (int au : {1, 23})
      if (!(v == 9 && au == 23)) dir.put(Viewpoint{v}, AUCode{au}, toy_net(static_cast<std::uint64_t>(v * 100 + au)));
  const auto index = dir.reload();
  EXPECT_EQ(index.size(), 17u);
  EXPECT_EQ(index.missing(all_views(), {AUCode{1}, AUCode{23}}),
            (std::vector<std::pair<Viewpoint, AUCode>>{{Viewpoint{9}, AUCode{23}}}));
  try {
    route(index, Viewpoint{9}, {AUCode{1}, AUCode{23}});
    FAIL() << "expected a missing checkpoint";
  } catch (const MissingCheckpointError& e) {
    EXPECT_NE(std::string(e.what()).find("V9/AU23"), std::string::npos) << e.what();
  }
  EXPECT_NO_THROW(route(index, Viewpoint{8}, {AUCode{1}, AUCode{23}}));
}

TEST(Route, MatchesDirectLoadAndIsRepeatable) {
  ManifestDir dir("direct");
  dir.put(Viewpoint{5}, AUCode{12}, toy_net(1));
  dir.put(Viewpoint{5}, AUCode{4}, toy_net(2));
  const auto index = dir.reload();
  const auto a = route(index, Viewpoint{5}, {AUCode{4}, AUCode{12}});
  const auto b = route(index, Viewpoint{5}, {AUCode{4}, AUCode{12}});
  const auto direct = netcore::load_checkpoint(dir.root / "V5" / "AU12.ckpt");
  EXPECT_TRUE(a.at(AUCode{12}) == direct);
  EXPECT_TRUE(a.at(AUCode{12}) == b.at(AUCode{12}));
  EXPECT_TRUE(a.at(AUCode{4}) == b.at(AUCode{4}));
  const netcore::NetInput<float> x{noise_image(16, 3), std::nullopt};
  EXPECT_EQ(detectors::predict_frame(a.at(AUCode{12}), x), detectors::predict_frame(direct, x));
}

TEST(Route, TamperedCheckpointFailsHashCheck) {
  ManifestDir dir("tamper");
  dir.put(Viewpoint{2}, AUCode{1}, toy_net(1));
  const auto index = dir.reload();
  netcore::save_checkpoint(dir.root / "V2" / "AU1.ckpt", toy_net(2));
  EXPECT_THROW(route(index, Viewpoint{2}, {AUCode{1}}), DataError);
  fs::remove(dir.root / "V2" / "AU1.ckpt");
  EXPECT_THROW(route(index, Viewpoint{2}, {AUCode{1}}), MissingCheckpointError);
}

TEST(Manifest, RoundTripAndMalformedLine) {
  ManifestDir dir("manifest");
  dir.put(Viewpoint{3}, AUCode{17}, toy_net(4));
  const auto back = dir.reload();
  ASSERT_EQ(back.size(), 1u);
  const auto* e = back.find(Viewpoint{3}, AUCode{17});
  ASSERT_NE(e, nullptr);
  EXPECT_EQ(e->sha256, sha256_file(dir.root / "V3" / "AU17.ckpt"));
  EXPECT_EQ(e->sha256.size(), 64u);
  {
    std::ofstream out(dir.root / "bad.csv");
    out << "view,au,checkpoint,sha256\nV3,AU17,x.ckpt\n";
  }
  EXPECT_THROW(EnsembleIndex::load(dir.root / "bad.csv"), DataError);
  EXPECT_THROW(EnsembleIndex::load(dir.root / "absent.csv"), MissingCheckpointError);
}

TEST(Sha256, KnownDigest) {
  const std::string abc = "abc";
  EXPECT_EQ(sha256_hex({abc.begin(), abc.end()}),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(CheckpointName, FollowsDatasetViewAuMode) {
  EXPECT_EQ(checkpoint_name("fera", Viewpoint{4}, AUCode{12}, FusionMode::Horizontal).generic_string(),
            "fera/V4/AU12_horizontal");
  EXPECT_EQ(checkpoint_name("bp4d", std::nullopt, AUCode{1}, FusionMode::RgbOnly).generic_string(),
            "bp4d/frontal/AU1_rgb_only");
}

TEST(DetectSequence, ConstantStubsGivePositiveTracks) {
  std::vector<Image> frames;
  for (int t = 0; t < 12; ++t) frames.push_back(noise_image(32, static_cast<std::uint64_t>(t)));
  const std::vector<FaceBox> boxes(12, FaceBox{4, 4, 24, 24});
  Viewpoint routed{0};
  Cascade c;
  c.view_scorer = [](const Image&) { return peaked(4); };
  c.router = [&](Viewpoint v) {
    routed = v;
    std::map<AUCode, DetectorFn> m;
    for (int au : {1, 12}) m.emplace(AUCode{au}, [](const netcore::NetInput<float>&) { return 0.9; });
    return m;
  };
  c.config.side = 16;
  const auto out = detect_sequence(c, "vid", frames, boxes);
  EXPECT_EQ(out.view.view, (Viewpoint{4}));
  EXPECT_EQ(routed, (Viewpoint{4}));
  ASSERT_EQ(out.sequences.size(), 2u);
  EXPECT_EQ(out.sequences[0].au, (AUCode{1}));
  for (const auto& s : out.sequences) {
    EXPECT_EQ(s.decisions_smoothed, std::vector<int>(12, 1));
    EXPECT_EQ(s.probs_smoothed, s.probs_raw);
  }
}

TEST(DetectSequence, DeterministicAndEqualToStageComposition) {
  std::vector<Image> frames;
  for (int t = 0; t < 9; ++t) frames.push_back(noise_image(32, static_cast<std::uint64_t>(40 + t)));
  const std::vector<FaceBox> boxes(9, FaceBox{2, 2, 28, 28});
  const auto net = toy_net(7);
  Cascade c;
  c.view_scorer = [](const Image& f) { return peaked(1 + static_cast<int>(f.values[0] * 9) % 9); };
  c.router = [&](Viewpoint) {
    return std::map<AUCode, DetectorFn>{
        {AUCode{12}, [&](const netcore::NetInput<float>& in) { return detectors::predict_frame(net, in); }}};
  };
  c.config.side = 16;
  c.config.median_window = 3;
  const auto a = detect_sequence(c, "v", frames, boxes);
  const auto b = detect_sequence(c, "v", frames, boxes);
  EXPECT_EQ(a.sequences[0].probs_raw, b.sequences[0].probs_raw);
  EXPECT_EQ(a.view.view, b.view.view);

  // wrapping each stage in a pass-through changes nothing
  Cascade wrapped = c;
  wrapped.view_scorer = [inner = c.view_scorer](const Image& f) { return inner(f); };
  wrapped.router = [inner = c.router](Viewpoint v) {
    std::map<AUCode, DetectorFn> out;
    for (auto& [au, fn] : inner(v)) out.emplace(au, [fn](const netcore::NetInput<float>& in) { return fn(in); });
    return out;
  };
  const auto w = detect_sequence(wrapped, "v", frames, boxes);
  EXPECT_EQ(w.sequences[0].probs_raw, a.sequences[0].probs_raw);
  EXPECT_EQ(w.sequences[0].probs_smoothed, a.sequences[0].probs_smoothed);

  // the cascade is the composition of classify, route, per-frame inference and smoothing
  const auto view = classify_view_video(c.view_scorer, frames, c.config.view_stride);
  std::vector<double> probs;
  for (std::size_t t = 0; t < frames.size(); ++t)
    probs.push_back(detectors::predict_frame(net, motion::frame_bundle(frames[t], nullptr, boxes[t], FusionMode::RgbOnly, 16)));
  EXPECT_EQ(a.view.view, view.view);
  EXPECT_EQ(a.sequences[0].probs_raw, probs);
  EXPECT_EQ(a.sequences[0].probs_smoothed, temporal::median_smooth(probs, 3));
}

TEST(DetectSequence, BoxCountMustMatch) {
  Cascade c;
  c.view_scorer = [](const Image&) { return peaked(5); };
  c.router = [](Viewpoint) { return std::map<AUCode, DetectorFn>{}; };
  EXPECT_THROW(detect_sequence(c, "v", {Image({3, 8, 8})}, {}), std::invalid_argument);
  EXPECT_THROW(detect_sequence(c, "v", {}, {}), std::invalid_argument);
}

TEST(Router, CachesEachViewOnce) {
  ManifestDir dir("router");
  dir.put(Viewpoint{1}, AUCode{2}, toy_net(5));
  const auto router = make_router(dir.reload(), {AUCode{2}});
  const netcore::NetInput<float> x{noise_image(16, 9), std::nullopt};
  const double first = router(Viewpoint{1}).at(AUCode{2})(x);
  fs::remove(dir.root / "V1" / "AU2.ckpt");  // a second lookup must not touch the disk
  EXPECT_EQ(router(Viewpoint{1}).at(AUCode{2})(x), first);
  EXPECT_THROW(router(Viewpoint{2}), MissingCheckpointError);
}

TEST(TrainingOrder, FrontalFirstThenRemainingViews) {
  const auto plan = adapt_training_order({Viewpoint{9}, Viewpoint{5}, Viewpoint{2}, Viewpoint{9}, Viewpoint{1}});
  ASSERT_EQ(plan.size(), 5u);
  EXPECT_EQ(plan[0].kind, StageKind::Pretrain);
  EXPECT_EQ(plan[1], (TrainingStage{StageKind::Frontal, kFrontalView, std::nullopt}));
  EXPECT_EQ(plan[2], (TrainingStage{StageKind::View, Viewpoint{1}, kFrontalView}));
  EXPECT_EQ(plan[4].view, (Viewpoint{9}));
  EXPECT_EQ(adapt_training_order(all_views()).size(), 10u);
  EXPECT_THROW(adapt_training_order({Viewpoint{1}, Viewpoint{2}}), std::invalid_argument);
}
