#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "aunets/au.hpp"
#include "aunets/image.hpp"
#include "aunets/view.hpp"

namespace aunets::datakit {

// One annotated frame.
struct FrameRecord {
  std::string video_id;
  int frame_index = 0;
  std::filesystem::path image_path;
  int image_width = 0;
  int image_height = 0;
  FaceBox face_box;
  std::map<int, int> labels;  // AU code -> {0, 1}
  std::optional<Viewpoint> view;
  std::string subject_id;

  int label(AUCode au) const {
    const auto it = labels.find(au.value);
    if (it == labels.end()) throw std::out_of_range(video_id + " frame " + std::to_string(frame_index) +
                                                    " has no label for " + to_string(au));
    return it->second;
  }
};

inline std::string subject_name(int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "S%02d", index + 1);
  return buf;
}

inline std::string video_name(const std::string& subject, Viewpoint view) { return subject + "_" + to_string(view); }

inline std::string frame_file_name(int frame) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%06d.png", frame);
  return buf;
}

struct Fold {
  std::vector<std::string> test;
  std::vector<std::string> train;       // training subjects without the validation subject
  std::string validation;
};

// Three subject-disjoint folds with one validation subject held out of each training set.
struct SplitPlan {
  std::array<Fold, 3> folds;
  std::uint64_t seed = 0;
};

// Subjects are sorted and dealt round-robin into three folds; the validation subject of a fold is
// the lexicographically smallest of its training subjects. The assignment does not depend on the
// seed, which is only recorded.
inline SplitPlan make_splits(std::vector<std::string> subjects, std::uint64_t seed) {
  std::sort(subjects.begin(), subjects.end());
  subjects.erase(std::unique(subjects.begin(), subjects.end()), subjects.end());
  if (subjects.size() < 3)
    throw std::invalid_argument("need at least 3 subjects for a 3-fold split, got " + std::to_string(subjects.size()));
  std::array<std::vector<std::string>, 3> groups;
  for (std::size_t i = 0; i < subjects.size(); ++i) groups[i % 3].push_back(subjects[i]);
  SplitPlan plan;
  plan.seed = seed;
  for (std::size_t k = 0; k < 3; ++k) {
    Fold& f = plan.folds[k];
    f.test = groups[k];
    std::vector<std::string> rest;
    for (std::size_t j = 0; j < 3; ++j)
      if (j != k) rest.insert(rest.end(), groups[j].begin(), groups[j].end());
    std::sort(rest.begin(), rest.end());
    f.validation = rest.front();
    f.train.assign(rest.begin() + 1, rest.end());
  }
  return plan;
}

inline std::vector<std::string> subjects_of(const std::vector<FrameRecord>& records) {
  std::set<std::string> s;
  for (const auto& r : records) s.insert(r.subject_id);
  return {s.begin(), s.end()};
}

inline std::vector<FrameRecord> select_subjects(const std::vector<FrameRecord>& records,
                                                const std::vector<std::string>& subjects) {
  const std::set<std::string> keep(subjects.begin(), subjects.end());
  std::vector<FrameRecord> out;
  for (const auto& r : records)
    if (keep.count(r.subject_id)) out.push_back(r);
  return out;
}

inline std::vector<FrameRecord> select_view(const std::vector<FrameRecord>& records, Viewpoint view) {
  std::vector<FrameRecord> out;
  for (const auto& r : records)
    if (r.view && *r.view == view) out.push_back(r);
  return out;
}

// Jitter directions in application order: R, L, U, D, UR, UL, DR, DL.
inline constexpr std::array<std::array<int, 2>, 8> kJitterDirections{
    {{1, 0}, {-1, 0}, {0, -1}, {0, 1}, {1, -1}, {-1, -1}, {1, 1}, {-1, 1}}};

inline constexpr double kJitterFraction = 0.05;
inline constexpr double kBalanceTarget = 0.9;

// Box moved by 5% of its side along (dx, dy), then clamped inside the image.
inline FaceBox jitter_box(const FaceBox& box, int dx, int dy, int image_width, int image_height) {
  const int sx = std::max(1, static_cast<int>(std::lround(kJitterFraction * box.w)));
  const int sy = std::max(1, static_cast<int>(std::lround(kJitterFraction * box.h)));
  FaceBox out = box;
  out.w = std::min(box.w, image_width);
  out.h = std::min(box.h, image_height);
  out.x = std::clamp(box.x + dx * sx, 0, image_width - out.w);
  out.y = std::clamp(box.y + dy * sy, 0, image_height - out.h);
  return out;
}

// Adds shifted copies of every positive record, one direction per pass, until positives reach
// 90% of the negatives or the positives have been multiplied by `max_factor`. Output: the input
// records in order, followed by the jittered copies pass by pass.
inline std::vector<FrameRecord> jitter_balance(const std::vector<FrameRecord>& records, AUCode au, int max_factor = 9) {
  std::vector<const FrameRecord*> positives;
  std::size_t negatives = 0;
  for (const auto& r : records) {
    if (r.label(au))
      positives.push_back(&r);
    else
      ++negatives;
  }
  std::vector<FrameRecord> out = records;
  if (positives.empty() || negatives == 0) return out;
  const int passes_allowed = std::min<int>(std::max(max_factor, 1) - 1, static_cast<int>(kJitterDirections.size()));
  std::size_t pos_count = positives.size();
  for (int pass = 0; pass < passes_allowed; ++pass) {
    if (static_cast<double>(pos_count) >= kBalanceTarget * static_cast<double>(negatives)) break;
    const auto [dx, dy] = kJitterDirections[static_cast<std::size_t>(pass)];
    for (const auto* p : positives) {
      FrameRecord copy = *p;
      copy.face_box = jitter_box(p->face_box, dx, dy, p->image_width, p->image_height);
      out.push_back(std::move(copy));
    }
    pos_count += positives.size();
  }
  return out;
}

}  // namespace aunets::datakit
