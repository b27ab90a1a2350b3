#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "aunets/datakit/dataset.hpp"
#include "aunets/datakit/records.hpp"
#include "aunets/datakit/synthetic.hpp"
#include "aunets/netcore/checkpoint.hpp"

using namespace aunets;
using namespace aunets::datakit;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("aunets_datakit_" + name);
  fs::remove_all(p);
  return p;
}

std::vector<FrameRecord> balance_input(int positives, int negatives) {
  std::vector<FrameRecord> out;
  for (int i = 0; i < positives + negatives; ++i) {
    FrameRecord r;
    r.video_id = "v";
    r.frame_index = i;
    r.image_width = r.image_height = 100;
    r.face_box = {20, 20, 60, 60};
    r.labels[12] = i < positives ? 1 : 0;
    out.push_back(r);
  }
  return out;
}

long count_label(const std::vector<FrameRecord>& rs, int value) {
  return std::count_if(rs.begin(), rs.end(), [&](const FrameRecord& r) { return r.labels.at(12) == value; });
}

SyntheticSpec small_spec() {
  SyntheticSpec s;
  s.n_subjects = 3;
  s.n_views = 2;
  s.frames_per_video = 6;
  s.image_side = 48;
  return s;
}

}  // namespace

TEST(Splits, SixSubjectsGiveDisjointFoldsOfTwo) {
  const auto plan = make_splits({"S06", "S01", "S04", "S03", "S02", "S05"}, 3);
  std::set<std::string> all;
  for (const auto& f : plan.folds) {
    EXPECT_EQ(f.test.size(), 2u);
    for (const auto& s : f.test) EXPECT_TRUE(all.insert(s).second);
    std::set<std::string> train(f.train.begin(), f.train.end());
    train.insert(f.validation);
    EXPECT_EQ(train.size(), 4u);
    for (const auto& s : f.test) EXPECT_EQ(train.count(s), 0u);
    EXPECT_LT(f.validation, *std::min_element(f.train.begin(), f.train.end()));
  }
  EXPECT_EQ(all.size(), 6u);
  EXPECT_EQ(plan.folds[0].test, (std::vector<std::string>{"S01", "S04"}));
  EXPECT_EQ(plan.folds[0].validation, "S02");
}

TEST(Splits, DeterministicAndOrderIndependent) {
  const auto a = make_splits({"b", "a", "c", "e", "d"}, 1);
  const auto b = make_splits({"e", "d", "c", "b", "a"}, 1);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(a.folds[k].test, b.folds[k].test);
    EXPECT_EQ(a.folds[k].train, b.folds[k].train);
    EXPECT_EQ(a.folds[k].validation, b.folds[k].validation);
  }
}

TEST(Splits, TooFewSubjectsRejected) { EXPECT_THROW(make_splits({"a", "b"}, 0), std::invalid_argument); }

TEST(Jitter, SixToOneRatioNeedsFiveShifts) {
  const auto out = jitter_balance(balance_input(100, 600), AUCode{12});
  EXPECT_EQ(count_label(out, 1), 600);
  EXPECT_EQ(count_label(out, 0), 600);
  // copies follow R, L, U, D, UR pass by pass
  const FaceBox base{20, 20, 60, 60};
  EXPECT_EQ(out[700].face_box, (FaceBox{23, 20, 60, 60}));
  EXPECT_EQ(out[800].face_box, (FaceBox{17, 20, 60, 60}));
  EXPECT_EQ(out[900].face_box, (FaceBox{20, 17, 60, 60}));
  EXPECT_EQ(out[1000].face_box, (FaceBox{20, 23, 60, 60}));
  EXPECT_EQ(out[1100].face_box, (FaceBox{23, 17, 60, 60}));
  EXPECT_EQ(out[0].face_box, base);
}

TEST(Jitter, CapHonored) {
  const auto out = jitter_balance(balance_input(10, 200), AUCode{12}, 9);
  EXPECT_EQ(count_label(out, 1), 90);
}

TEST(Jitter, BalancedAndDegenerateInputsPassThrough) {
  EXPECT_EQ(jitter_balance(balance_input(50, 50), AUCode{12}).size(), 100u);
  EXPECT_EQ(jitter_balance(balance_input(5, 0), AUCode{12}).size(), 5u);
}

TEST(Jitter, RatioInRangeWhenCapPermits) {
  for (auto [p, n] : std::vector<std::pair<int, int>>{{30, 100}, {7, 50}, {40, 41}, {13, 99}}) {
    const auto out = jitter_balance(balance_input(p, n), AUCode{12});
    const double ratio = static_cast<double>(count_label(out, 1)) / static_cast<double>(count_label(out, 0));
    EXPECT_GE(ratio, 0.9);
    EXPECT_LE(ratio, 1.2);
  }
}

TEST(Jitter, ShiftedBoxesStayInsideImage) {
  auto in = balance_input(3, 60);
  for (auto& r : in) r.face_box = {0, 38, 62, 62};
  for (const auto& r : jitter_balance(in, AUCode{12})) EXPECT_TRUE(inside(r.face_box, r.image_width, r.image_height));
}

TEST(Synthetic, ProfileLabelsFollowHalfApex) {
  SyntheticSpec s = small_spec();
  s.frames_per_video = 40;
  s.au_set = {12};
  s.activations = std::map<int, std::vector<ActivationProfile>>{{12, {{10, 15, 25, 30}}}};
  const auto sched = make_schedule(s, 0);
  for (int f = 0; f < 40; ++f) {
    const double a = profile_amplitude({10, 15, 25, 30}, f);
    EXPECT_EQ(sched.labels.at(12)[static_cast<std::size_t>(f)], a > 0.5 ? 1 : 0) << "frame " << f;
  }
  EXPECT_EQ(sched.labels.at(12)[20], 1);
  EXPECT_EQ(sched.labels.at(12)[12], 0);  // amplitude 0.4 on the onset ramp
  EXPECT_EQ(sched.labels.at(12)[13], 1);  // 0.6
  EXPECT_EQ(sched.labels.at(12)[28], 0);  // 0.4 on the offset ramp
}

TEST(Synthetic, ZeroActivationsGiveNegativeLabelsAndStillFrames) {
  SyntheticSpec s = small_spec();
  s.activations.emplace();
  const auto v = render_video(s, 1, kFrontalView);
  for (const auto& [au, l] : v.schedule.labels) EXPECT_TRUE(std::all_of(l.begin(), l.end(), [](int x) { return x == 0; }));
  for (const auto& f : v.frames) EXPECT_EQ(f.values, v.frames[0].values);
}

TEST(Synthetic, MotionRuleLabelsAmplitudeChanges) {
  EXPECT_EQ(labels_from_amplitude({0.2, 0.2, 0.4, 0.6, 0.6}, LabelRule::Motion, 0.03),
            (std::vector<int>{0, 0, 1, 1, 0}));
  EXPECT_EQ(labels_from_amplitude({0.2, 0.7, 0.5}, LabelRule::Amplitude, 0.03), (std::vector<int>{0, 1, 0}));
}

TEST(Synthetic, BoxesContainTheHead) {
  for (int subject = 0; subject < 4; ++subject)
    for (auto view : all_views()) {
      const auto style = make_subject_style(7, subject);
      const auto box = face_box_for(style, view, 96);
      EXPECT_TRUE(inside(box, 96, 96));
      const auto img = render_face(style, view, {}, 96).image;
      // background corners on the same row match
      EXPECT_EQ(img.at(0, 0, 0), img.at(0, 0, 95));
    }
}

TEST(Synthetic, GenerateIsDeterministicAndRoundTrips) {
  const auto a = scratch("gen_a"), b = scratch("gen_b");
  const auto spec = small_spec();
  const auto written = generate_synthetic(spec, a);
  generate_synthetic(spec, b);
  EXPECT_EQ(written.size(), 3u * 2u * 6u);
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    const auto other = b / fs::relative(e.path(), a);
    ASSERT_TRUE(fs::exists(other)) << other;
    EXPECT_EQ(netcore::read_file_bytes(e.path()), netcore::read_file_bytes(other)) << e.path();
  }
  const auto loaded = load_dataset(a);
  ASSERT_EQ(loaded.size(), written.size());
  for (std::size_t i = 0; i < loaded.size(); ++i) {
    EXPECT_EQ(loaded[i].video_id, written[i].video_id);
    EXPECT_EQ(loaded[i].frame_index, written[i].frame_index);
    EXPECT_EQ(loaded[i].face_box, written[i].face_box);
    EXPECT_EQ(loaded[i].labels, written[i].labels);
    EXPECT_EQ(loaded[i].view, written[i].view);
    EXPECT_EQ(loaded[i].subject_id, written[i].subject_id);
  }
  EXPECT_TRUE(std::is_sorted(loaded.begin(), loaded.end(), [](const FrameRecord& x, const FrameRecord& y) {
    return std::tie(x.video_id, x.frame_index) < std::tie(y.video_id, y.frame_index);
  }));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Synthetic, UnwritableDestinationRejected) {
  const auto blocker = scratch("blocker");
  std::ofstream(blocker) << "x";
  EXPECT_THROW(generate_synthetic(small_spec(), blocker / "inside"), DataError);
  fs::remove(blocker);
}

TEST(Synthetic, InvalidSpecRejected) {
  auto s = small_spec();
  s.au_set = {4};
  EXPECT_THROW(validate(s), std::invalid_argument);
}

TEST(Dataset, EmptyDirectoryGivesNoRecords) {
  const auto d = scratch("empty");
  fs::create_directories(d);
  EXPECT_TRUE(load_dataset(d).empty());
  fs::remove_all(d);
}

TEST(Dataset, NonBinaryLabelNamesTheRow) {
  const auto d = scratch("bad_label");
  generate_synthetic(small_spec(), d);
  std::vector<std::string> lines;
  {
    std::ifstream in(d / "labels.csv");
    for (std::string l; std::getline(in, l);) lines.push_back(l);
  }
  lines[4].back() = '2';
  {
    std::ofstream out(d / "labels.csv");
    for (const auto& l : lines) out << l << '\n';
  }
  try {
    load_dataset(d);
    FAIL() << "expected a data error";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("labels.csv:5"), std::string::npos) << e.what();
  }
  fs::remove_all(d);
}

TEST(Pretrain, SamplesCoverAllClassesDeterministically) {
  const auto a = pretrain_samples(44, 32, 64, 3);
  const auto b = pretrain_samples(44, 32, 64, 3);
  ASSERT_EQ(a.size(), 44u);
  std::set<int> classes;
  for (std::size_t i = 0; i < a.size(); ++i) {
    classes.insert(a[i].label);
    EXPECT_EQ(a[i].crop.values, b[i].crop.values);
    EXPECT_EQ(a[i].crop.shape, (netcore::Shape{3, 32, 32}));
  }
  EXPECT_EQ(classes.size(), static_cast<std::size_t>(kPretrainClasses));
}
