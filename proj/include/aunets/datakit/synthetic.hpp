#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "aunets/common.hpp"
#include "aunets/datakit/records.hpp"
#include "aunets/image.hpp"
#include "aunets/view.hpp"

namespace aunets::datakit {

inline constexpr int kGeneratorVersion = 1;
inline constexpr const char* kGeneratorName = "aunets-synthetic";

// Trapezoid: 0 up to onset_start, linear rise to 1 at apex_start, flat to apex_end, linear fall
// to 0 at offset_end.
struct ActivationProfile {
  int onset_start = 0;
  int apex_start = 0;
  int apex_end = 0;
  int offset_end = 0;

  friend bool operator==(const ActivationProfile&, const ActivationProfile&) = default;
};

inline double profile_amplitude(const ActivationProfile& p, double t) {
  if (t <= p.onset_start || t >= p.offset_end) return 0.0;
  if (t < p.apex_start) return (t - p.onset_start) / static_cast<double>(p.apex_start - p.onset_start);
  if (t <= p.apex_end) return 1.0;
  return (p.offset_end - t) / static_cast<double>(p.offset_end - p.apex_end);
}

// How a frame's label follows from the amplitude track: Amplitude marks frames above half the
// apex; Motion marks frames whose amplitude changed by more than the motion threshold since
// the previous frame.
enum class LabelRule { Amplitude, Motion };

inline std::string to_string(LabelRule r) { return r == LabelRule::Amplitude ? "amplitude" : "motion"; }

inline LabelRule parse_label_rule(const std::string& s) {
  if (s == "amplitude") return LabelRule::Amplitude;
  if (s == "motion") return LabelRule::Motion;
  throw std::invalid_argument("unknown label rule '" + s + "'");
}

struct SyntheticSpec {
  int n_subjects = 9;
  int n_views = 9;  // V5 plus the lowest-numbered other views
  int frames_per_video = 48;
  std::vector<int> au_set = {1, 2, 12, 24};
  // Same schedule for every video when set; otherwise random per subject.
  std::optional<std::map<int, std::vector<ActivationProfile>>> activations;
  std::map<int, LabelRule> label_rules;
  double event_probability = 1.0;
  double motion_threshold = 0.03;
  std::uint64_t seed = 1;
  int image_side = 96;
};

inline std::vector<Viewpoint> spec_views(const SyntheticSpec& spec) {
  if (spec.n_views < 1 || spec.n_views > kNumViews) throw std::invalid_argument("n_views must be in [1, 9]");
  if (spec.n_views == 1) return {kFrontalView};
  std::vector<Viewpoint> v{kFrontalView};
  for (auto w : all_views())
    if (w != kFrontalView && static_cast<int>(v.size()) < spec.n_views) v.push_back(w);
  std::sort(v.begin(), v.end());
  return v;
}

inline void validate(const SyntheticSpec& spec) {
  if (spec.n_subjects < 1) throw std::invalid_argument("n_subjects must be positive");
  if (spec.frames_per_video < 1) throw std::invalid_argument("frames_per_video must be positive");
  if (spec.image_side < 32) throw std::invalid_argument("image_side must be at least 32");
  for (int au : spec.au_set)
    if (au != 1 && au != 2 && au != 12 && au != 24)
      throw std::invalid_argument("synthetic faces only render AU1, AU2, AU12 and AU24, not AU" + std::to_string(au));
  spec_views(spec);
}

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = seed ^ (a * 0x9E3779B97F4A7C15ULL) ^ (b * 0xC2B2AE3D27D4EB4FULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline double uniform(std::mt19937_64& rng, double a, double b) {
  return std::uniform_real_distribution<double>(a, b)(rng);
}

inline int uniform_int(std::mt19937_64& rng, int a, int b) { return std::uniform_int_distribution<int>(a, b)(rng); }

}  // namespace detail

// Per-subject appearance in canonical face coordinates (head centre at the origin, unit radius,
// v pointing down).
struct SubjectStyle {
  std::array<float, 3> skin, hair, lips;
  double head_rx, head_ry, hairline;
  double eye_sep, eye_v, eye_r;
  double brow_gap, brow_inner, brow_outer, brow_thick;
  double nose_v;
  double mouth_v, mouth_w, lip_thick;
  double tex_phase[3];
};

inline SubjectStyle make_subject_style(std::uint64_t seed, int subject_index) {
  std::mt19937_64 rng(detail::mix_seed(seed, static_cast<std::uint64_t>(subject_index), 1));
  using detail::uniform;
  SubjectStyle s{};
  const double r = uniform(rng, 0.62, 0.9);
  s.skin = {static_cast<float>(r), static_cast<float>(r * uniform(rng, 0.68, 0.84)),
            static_cast<float>(r * uniform(rng, 0.52, 0.7))};
  const double h = uniform(rng, 0.08, 0.4);
  s.hair = {static_cast<float>(h), static_cast<float>(h * uniform(rng, 0.6, 0.9)),
            static_cast<float>(h * uniform(rng, 0.4, 0.8))};
  s.lips = {static_cast<float>(uniform(rng, 0.55, 0.75)), static_cast<float>(uniform(rng, 0.18, 0.3)),
            static_cast<float>(uniform(rng, 0.22, 0.35))};
  s.head_rx = uniform(rng, 0.7, 0.8);
  s.head_ry = uniform(rng, 0.92, 1.0);
  s.hairline = uniform(rng, -0.72, -0.6);
  s.eye_sep = uniform(rng, 0.26, 0.33);
  s.eye_v = uniform(rng, -0.16, -0.12);
  s.eye_r = uniform(rng, 0.085, 0.105);
  s.brow_gap = uniform(rng, 0.15, 0.18);
  s.brow_inner = uniform(rng, 0.07, 0.11);
  s.brow_outer = uniform(rng, 0.42, 0.5);
  s.brow_thick = uniform(rng, 0.05, 0.065);
  s.nose_v = uniform(rng, 0.13, 0.2);
  s.mouth_v = uniform(rng, 0.44, 0.5);
  s.mouth_w = uniform(rng, 0.24, 0.3);
  s.lip_thick = uniform(rng, 0.06, 0.075);
  for (double& p : s.tex_phase) p = uniform(rng, 0.0, 2 * std::numbers::pi);
  return s;
}

// A view is the fixed affine map (u, v) -> (hx * u + shear * v, pitch * v): yaw shear over the
// columns of the 3x3 grid, pitch scale over its rows.
struct ViewTransform {
  double hx = 1, shear = 0, pitch = 1;
};

inline ViewTransform view_transform(Viewpoint v) {
  static constexpr double shear[3] = {-0.35, 0.0, 0.35};
  static constexpr double hx[3] = {0.9, 1.0, 0.9};
  static constexpr double pitch[3] = {0.75, 1.0, 1.25};
  const int col = (v.index - 1) % 3, row = (v.index - 1) / 3;
  return {hx[col], shear[col], pitch[row]};
}

// Amplitudes in [0, 1] for AU1, AU2, AU12 and AU24.
struct Expression {
  double au1 = 0, au2 = 0, au12 = 0, au24 = 0;

  double& operator[](int au) {
    switch (au) {
      case 1: return au1;
      case 2: return au2;
      case 12: return au12;
      default: return au24;
    }
  }
};

struct RenderedFrame {
  Image image;
  FaceBox box;
};

inline constexpr double kFaceRadius = 0.36;  // head unit radius as a fraction of the image side

namespace detail {

inline double ellipse_sd(double u, double v, double cu, double cv, double ru, double rv) {
  return (std::hypot((u - cu) / ru, (v - cv) / rv) - 1.0) * std::min(ru, rv);
}

inline double segment_sd(double u, double v, double au, double av, double bu, double bv, double half) {
  const double eu = bu - au, ev = bv - av;
  const double t = std::clamp(((u - au) * eu + (v - av) * ev) / (eu * eu + ev * ev), 0.0, 1.0);
  return std::hypot(u - au - t * eu, v - av - t * ev) - half;
}

}  // namespace detail

inline FaceBox face_box_for(const SubjectStyle& s, Viewpoint view, int side, double shift_x = 0, double shift_y = 0) {
  const auto t = view_transform(view);
  const double R = kFaceRadius * side;
  const double hw = R * std::hypot(t.hx * s.head_rx, t.shear * s.head_ry) + 2.0;
  const double hh = R * t.pitch * s.head_ry + 2.0;
  const double cx = side / 2.0 + shift_x, cy = side / 2.0 + shift_y;
  const int x0 = std::max(0, static_cast<int>(std::floor(cx - hw)));
  const int y0 = std::max(0, static_cast<int>(std::floor(cy - hh)));
  const int x1 = std::min(side, static_cast<int>(std::ceil(cx + hw)));
  const int y1 = std::min(side, static_cast<int>(std::ceil(cy + hh)));
  return {x0, y0, x1 - x0, y1 - y0};
}

// Renders one anti-aliased frame. shift_x / shift_y translate the whole face in pixels.
inline RenderedFrame render_face(const SubjectStyle& s, Viewpoint view, Expression e, int side, double shift_x = 0,
                                 double shift_y = 0) {
  using detail::ellipse_sd;
  using detail::segment_sd;
  const auto t = view_transform(view);
  const double R = kFaceRadius * side;
  const double px_scale = R * std::sqrt(t.hx * t.pitch);
  const double cx = side / 2.0 + shift_x, cy = side / 2.0 + shift_y;

  const double inner_v = s.eye_v - s.brow_gap - 0.2 * e.au1;
  const double outer_v = s.eye_v - s.brow_gap + 0.02 - 0.2 * e.au2;
  const double mw = s.mouth_w * (1 + 0.2 * e.au12) * (1 - 0.1 * e.au24);
  const double lift = 0.2 * e.au12;
  const double gap = 0.09 * (1 - e.au24);
  const double lip = s.lip_thick * (1 - 0.45 * e.au24);

  RenderedFrame out{Image({3, side, side}), face_box_for(s, view, side, shift_x, shift_y)};
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x) {
      const double v = (y + 0.5 - cy) / (R * t.pitch);
      const double u = ((x + 0.5 - cx) / R - t.shear * v) / t.hx;
      float col[3];
      const float bg = static_cast<float>(0.28 + 0.08 * (y + 0.5) / side);
      col[0] = bg;
      col[1] = bg + 0.02f;
      col[2] = bg + 0.06f;
      auto paint = [&](double sd, const float* c) {
        const float a = static_cast<float>(std::clamp(0.5 - sd * px_scale, 0.0, 1.0));
        if (a <= 0.f) return;
        for (int k = 0; k < 3; ++k) col[k] = (1 - a) * col[k] + a * c[k];
      };
      const double head = ellipse_sd(u, v, 0, 0, s.head_rx, s.head_ry);
      const double tex = 1.0 + 0.06 * std::sin(9 * u + s.tex_phase[0]) * std::sin(7 * v + s.tex_phase[1]) +
                         0.035 * std::sin(15 * (u - v) + s.tex_phase[2]);
      const float skin[3] = {static_cast<float>(s.skin[0] * tex), static_cast<float>(s.skin[1] * tex),
                             static_cast<float>(s.skin[2] * tex)};
      paint(head, skin);
      const double hairline = s.hairline + 0.05 * std::sin(5 * u + s.tex_phase[0]);
      paint(std::max(head, v - hairline), s.hair.data());
      const float shade[3] = {s.skin[0] * 0.82f, s.skin[1] * 0.8f, s.skin[2] * 0.8f};
      paint(ellipse_sd(u, v, 0, s.nose_v, 0.055, 0.1), shade);
      static constexpr float white[3] = {0.93f, 0.93f, 0.9f};
      static constexpr float pupil[3] = {0.08f, 0.07f, 0.1f};
      for (double side_sign : {-1.0, 1.0}) {
        paint(ellipse_sd(u, v, side_sign * s.eye_sep, s.eye_v, s.eye_r * 1.35, s.eye_r * 0.8), white);
        paint(ellipse_sd(u, v, side_sign * s.eye_sep, s.eye_v, s.eye_r * 0.55, s.eye_r * 0.55), pupil);
        paint(segment_sd(u, v, side_sign * s.brow_inner, inner_v, side_sign * s.brow_outer, outer_v, s.brow_thick / 2),
              s.hair.data());
      }
      const double rel = std::min(std::abs(u) / mw, 1.0);
      const double dv = v - (s.mouth_v - lift * rel * rel);
      const double ends = std::abs(u) - mw;
      paint(std::max(std::abs(dv) - (gap / 2 + lip), ends), s.lips.data());
      if (gap > 0) {
        static constexpr float mouth[3] = {0.16f, 0.05f, 0.06f};
        paint(std::max(std::abs(dv) - gap / 2, ends + 0.02), mouth);
      }
      for (int k = 0; k < 3; ++k) out.image.at(k, y, x) = std::clamp(col[k], 0.f, 1.f);
    }
  return out;
}

// Amplitude and label tracks of one subject's session; every view of the subject shares them.
struct SessionSchedule {
  std::map<int, std::vector<double>> amplitude;
  std::map<int, std::vector<int>> labels;
};

namespace detail {

// One or two trapezoid events, the second confined to the later half of the video.
inline std::vector<double> random_trapezoid_track(std::mt19937_64& rng, int frames, double event_probability) {
  std::vector<double> a(static_cast<std::size_t>(frames), 0.0);
  if (std::uniform_real_distribution<double>(0, 1)(rng) >= event_probability) return a;
  const int events = frames >= 40 ? uniform_int(rng, 1, 2) : 1;
  const int slot = frames / events;
  for (int k = 0; k < events; ++k) {
    const int onset = uniform_int(rng, 2, 4), apex = uniform_int(rng, 5, 12), offset = uniform_int(rng, 2, 4);
    const int span = onset + apex + offset;
    const int start = k * slot + uniform_int(rng, -1, std::max(-1, slot - span - 1));
    const ActivationProfile p{start, start + onset, start + onset + apex, start + span};
    for (int f = 0; f < frames; ++f)
      a[static_cast<std::size_t>(f)] = std::max(a[static_cast<std::size_t>(f)], profile_amplitude(p, f));
  }
  return a;
}

// Holds at random levels joined by linear ramps of at least 0.35.
inline std::vector<double> random_hold_track(std::mt19937_64& rng, int frames) {
  std::vector<double> a;
  double level = uniform(rng, 0.0, 1.0);
  while (static_cast<int>(a.size()) < frames) {
    const int hold = uniform_int(rng, 3, 8);
    for (int k = 0; k < hold; ++k) a.push_back(level);
    double next = level;
    while (std::abs(next - level) < 0.35) next = uniform(rng, 0.0, 1.0);
    const int ramp = uniform_int(rng, 3, 5);
    for (int k = 1; k <= ramp; ++k) a.push_back(level + (next - level) * k / ramp);
    level = next;
  }
  a.resize(static_cast<std::size_t>(frames));
  return a;
}

}  // namespace detail

inline std::vector<int> labels_from_amplitude(const std::vector<double>& a, LabelRule rule, double motion_threshold) {
  std::vector<int> l(a.size(), 0);
  for (std::size_t f = 0; f < a.size(); ++f) {
    if (rule == LabelRule::Amplitude)
      l[f] = a[f] > 0.5 ? 1 : 0;
    else
      l[f] = f > 0 && std::abs(a[f] - a[f - 1]) > motion_threshold ? 1 : 0;
  }
  return l;
}

inline LabelRule label_rule(const SyntheticSpec& spec, int au) {
  const auto it = spec.label_rules.find(au);
  return it == spec.label_rules.end() ? LabelRule::Amplitude : it->second;
}

inline SessionSchedule make_schedule(const SyntheticSpec& spec, int subject_index) {
  std::mt19937_64 rng(detail::mix_seed(spec.seed, static_cast<std::uint64_t>(subject_index), 2));
  SessionSchedule s;
  for (int au : spec.au_set) {
    const LabelRule rule = label_rule(spec, au);
    std::vector<double> a(static_cast<std::size_t>(spec.frames_per_video), 0.0);
    if (spec.activations) {
      const auto it = spec.activations->find(au);
      if (it != spec.activations->end())
        for (int f = 0; f < spec.frames_per_video; ++f)
          for (const auto& p : it->second)
            a[static_cast<std::size_t>(f)] = std::max(a[static_cast<std::size_t>(f)], profile_amplitude(p, f));
    } else if (rule == LabelRule::Motion) {
      a = detail::random_hold_track(rng, spec.frames_per_video);
    } else {
      a = detail::random_trapezoid_track(rng, spec.frames_per_video, spec.event_probability);
    }
    s.labels[au] = labels_from_amplitude(a, rule, spec.motion_threshold);
    s.amplitude[au] = std::move(a);
  }
  return s;
}

struct SyntheticVideo {
  std::string subject_id;
  Viewpoint view;
  std::string video_id;
  std::vector<Image> frames;
  FaceBox box;
  SessionSchedule schedule;
};

inline SyntheticVideo render_video(const SyntheticSpec& spec, int subject_index, Viewpoint view) {
  SyntheticVideo v;
  v.subject_id = subject_name(subject_index);
  v.view = view;
  v.video_id = video_name(v.subject_id, view);
  v.schedule = make_schedule(spec, subject_index);
  const auto style = make_subject_style(spec.seed, subject_index);
  v.box = face_box_for(style, view, spec.image_side);
  for (int f = 0; f < spec.frames_per_video; ++f) {
    Expression e;
    for (int au : spec.au_set) e[au] = v.schedule.amplitude.at(au)[static_cast<std::size_t>(f)];
    v.frames.push_back(render_face(style, view, e, spec.image_side).image);
  }
  return v;
}

inline nlohmann::json manifest_json(const SyntheticSpec& spec) {
  nlohmann::json j;
  j["generator"] = kGeneratorName;
  j["generator_version"] = kGeneratorVersion;
  j["au_set"] = spec.au_set;
  std::vector<std::string> views;
  for (auto v : spec_views(spec)) views.push_back(to_string(v));
  j["views"] = views;
  j["seed"] = spec.seed;
  j["n_subjects"] = spec.n_subjects;
  j["frames_per_video"] = spec.frames_per_video;
  j["image_side"] = spec.image_side;
  nlohmann::json rules = nlohmann::json::object();
  for (int au : spec.au_set) rules["AU" + std::to_string(au)] = to_string(label_rule(spec, au));
  j["label_rules"] = rules;
  return j;
}

// Writes frames, labels.csv and manifest.json under `root` and returns the emitted records in
// (video_id, frame) order.
inline std::vector<FrameRecord> generate_synthetic(const SyntheticSpec& spec, const std::filesystem::path& root) {
  namespace fs = std::filesystem;
  validate(spec);
  std::error_code ec;
  fs::create_directories(root, ec);
  if (ec || !fs::is_directory(root)) throw DataError("cannot create dataset directory " + root.string());
  std::vector<FrameRecord> records;
  for (int s = 0; s < spec.n_subjects; ++s)
    for (Viewpoint view : spec_views(spec)) {
      const auto video = render_video(spec, s, view);
      const fs::path dir = root / "subjects" / video.subject_id / to_string(view) / video.video_id;
      fs::create_directories(dir, ec);
      if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
      for (int f = 0; f < spec.frames_per_video; ++f) {
        FrameRecord r;
        r.video_id = video.video_id;
        r.frame_index = f;
        r.image_path = dir / frame_file_name(f);
        r.image_width = r.image_height = spec.image_side;
        r.face_box = video.box;
        for (int au : spec.au_set) r.labels[au] = video.schedule.labels.at(au)[static_cast<std::size_t>(f)];
        r.view = view;
        r.subject_id = video.subject_id;
        try {
          save_image_png(r.image_path, video.frames[static_cast<std::size_t>(f)]);
        } catch (const std::exception& e) {
          throw DataError(e.what());
        }
        records.push_back(std::move(r));
      }
    }
  std::sort(records.begin(), records.end(), [](const FrameRecord& a, const FrameRecord& b) {
    return std::tie(a.video_id, a.frame_index) < std::tie(b.video_id, b.frame_index);
  });
  std::ofstream labels(root / "labels.csv");
  if (!labels) throw DataError("cannot write " + (root / "labels.csv").string());
  labels << "video_id,frame,face_x,face_y,face_w,face_h";
  for (int au : spec.au_set) labels << ",AU" << au;
  labels << '\n';
  for (const auto& r : records) {
    labels << r.video_id << ',' << r.frame_index << ',' << r.face_box.x << ',' << r.face_box.y << ',' << r.face_box.w
           << ',' << r.face_box.h;
    for (int au : spec.au_set) labels << ',' << r.labels.at(au);
    labels << '\n';
  }
  std::ofstream manifest(root / "manifest.json");
  manifest << manifest_json(spec).dump(2) << '\n';
  if (!labels || !manifest) throw DataError("failed writing metadata under " + root.string());
  return records;
}

// Pretraining stand-in: 22 expression classes, each a fixed combination of AU amplitudes drawn
// from {0, 0.5, 1}^4, rendered on subjects disjoint from the generated dataset.
inline constexpr int kPretrainClasses = 22;

inline Expression pretrain_class_expression(int cls) {
  int code = (cls * 37) % 81;
  Expression e;
  for (int au : {1, 2, 12, 24}) {
    e[au] = 0.5 * (code % 3);
    code /= 3;
  }
  return e;
}

struct LabelledCrop {
  Image crop;
  int label = 0;
};

inline std::vector<LabelledCrop> pretrain_samples(int count, int crop_side, int image_side, std::uint64_t seed,
                                                  int n_styles = 24) {
  std::mt19937_64 rng(detail::mix_seed(seed, 0x5EED, 3));
  std::vector<LabelledCrop> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const int cls = i % kPretrainClasses;
    const int style_index = 1000 + detail::uniform_int(rng, 0, n_styles - 1);
    const Viewpoint view{detail::uniform_int(rng, 1, kNumViews)};
    Expression e = pretrain_class_expression(cls);
    for (int au : {1, 2, 12, 24}) e[au] = std::clamp(e[au] + detail::uniform(rng, -0.06, 0.06), 0.0, 1.0);
    const auto frame = render_face(make_subject_style(seed, style_index), view, e, image_side);
    out.push_back({crop_resize(frame.image, frame.box, crop_side, crop_side), cls});
  }
  return out;
}

}  // namespace aunets::datakit
