#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "aunets/au.hpp"
#include "aunets/common.hpp"
#include "aunets/detectors/train.hpp"
#include "aunets/motion/embed.hpp"
#include "aunets/motion/flow.hpp"
#include "aunets/multiview/ensemble.hpp"
#include "aunets/multiview/view_classifier.hpp"
#include "aunets/temporal/median.hpp"

namespace aunets::multiview {

// Probability of one AU for one assembled frame input.
using DetectorFn = std::function<double(const netcore::NetInput<float>&)>;

// The detectors to run once a view is known.
using Router = std::function<std::map<AUCode, DetectorFn>(Viewpoint)>;

struct CascadeConfig {
  netcore::FusionMode mode = netcore::FusionMode::RgbOnly;
  int side = 64;
  int median_window = temporal::kDefaultMedianWindow;
  temporal::SmoothTarget smooth_target = temporal::SmoothTarget::Probabilities;
  int view_stride = kViewStride;
  ViewAggregation view_aggregation = ViewAggregation::Mean;
};

struct Cascade {
  ViewScorer view_scorer;
  Router router;
  motion::FlowEstimator flow_estimator = motion::default_flow_estimator();
  CascadeConfig config;
};

struct VideoPrediction {
  std::string video_id;
  ViewDecision view;
  std::vector<temporal::DetectionSequence> sequences;  // one per AU, in AU order
  std::vector<int> frame_indices;                      // dataset frame numbers; empty means 0, 1, ...

  int frame_index(std::size_t t) const { return frame_indices.empty() ? static_cast<int>(t) : frame_indices[t]; }
};

// Flow -> view classification -> per-AU per-frame inference -> median smoothing. `flows`, when
// given, replaces the flow stage (one field per frame, frame 0 zero).
inline VideoPrediction detect_sequence(const Cascade& cascade, const std::string& video_id,
                                       const std::vector<Image>& frames, const std::vector<FaceBox>& boxes,
                                       const std::vector<motion::FlowField>* flows = nullptr) {
  if (frames.empty()) throw std::invalid_argument("video " + video_id + " has no frames");
  if (boxes.size() != frames.size())
    throw std::invalid_argument("video " + video_id + ": one face box per frame is required");
  const auto& cfg = cascade.config;
  std::vector<motion::FlowField> computed;
  const bool needs_flow = cfg.mode != netcore::FusionMode::RgbOnly;
  if (needs_flow && !flows) {
    computed = motion::first_frame_policy(frames, cascade.flow_estimator);
    flows = &computed;
  }
  if (needs_flow && flows->size() != frames.size())
    throw std::invalid_argument("video " + video_id + ": one flow field per frame is required");

  VideoPrediction out;
  out.video_id = video_id;
  out.view = classify_view_video(cascade.view_scorer, frames, cfg.view_stride, cfg.view_aggregation);
  const auto detectors = cascade.router(out.view.view);

  std::map<AUCode, std::vector<double>> probs;
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const auto input =
        motion::frame_bundle(frames[t], needs_flow ? &(*flows)[t] : nullptr, boxes[t], cfg.mode, cfg.side);
    for (const auto& [au, fn] : detectors) probs[au].push_back(fn(input));
  }
  for (auto& [au, p] : probs)
    out.sequences.push_back(
        temporal::smooth_sequence(temporal::make_sequence(au, std::move(p)), cfg.median_window, cfg.smooth_target));
  return out;
}

// Router over an ensemble manifest; each view's detectors are loaded once and then reused.
inline Router make_router(const EnsembleIndex& index, std::vector<AUCode> aus) {
  auto cache = std::make_shared<std::map<int, std::map<AUCode, netcore::FusionNet<float>>>>();
  return [index, aus = std::move(aus), cache](Viewpoint view) {
    auto it = cache->find(view.index);
    if (it == cache->end()) it = cache->emplace(view.index, route(index, view, aus)).first;
    std::map<AUCode, DetectorFn> fns;
    for (const auto& [au, net] : it->second) {
      const auto* p = &net;
      fns.emplace(au, [p](const netcore::NetInput<float>& in) { return detectors::predict_frame(*p, in); });
    }
    return fns;
  };
}

// Prediction CSV: video_id, frame, predicted_view, au, prob_raw, prob_smoothed, decision_raw,
// decision_smoothed.
inline void write_predictions_csv(const std::filesystem::path& path, const std::vector<VideoPrediction>& preds) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "video_id,frame,predicted_view,au,prob_raw,prob_smoothed,decision_raw,decision_smoothed\n";
  out.precision(9);
  for (const auto& v : preds)
    for (const auto& s : v.sequences)
      for (std::size_t t = 0; t < s.size(); ++t)
        out << v.video_id << ',' << v.frame_index(t) << ',' << to_string(v.view.view) << ',' << to_string(s.au) << ','
            << s.probs_raw[t] << ',' << s.probs_smoothed[t] << ',' << s.decisions_raw[t] << ','
            << s.decisions_smoothed[t] << '\n';
}

// Gradual domain adaptation: emotion pretraining, then the frontal detectors, then every other
// view initialised from the frontal weights.
enum class StageKind { Pretrain, Frontal, View };

struct TrainingStage {
  StageKind kind;
  std::optional<Viewpoint> view;
  std::optional<Viewpoint> init_from;

  friend bool operator==(const TrainingStage&, const TrainingStage&) = default;
};

inline std::vector<TrainingStage> adapt_training_order(const std::vector<Viewpoint>& views) {
  if (std::find(views.begin(), views.end(), kFrontalView) == views.end())
    throw std::invalid_argument("the training plan has no frontal-view data");
  std::vector<TrainingStage> out{{StageKind::Pretrain, std::nullopt, std::nullopt},
                                 {StageKind::Frontal, kFrontalView, std::nullopt}};
  std::vector<Viewpoint> rest;
  for (auto v : views)
    if (v != kFrontalView) rest.push_back(v);
  std::sort(rest.begin(), rest.end());
  rest.erase(std::unique(rest.begin(), rest.end()), rest.end());
  for (auto v : rest) out.push_back({StageKind::View, v, kFrontalView});
  return out;
}

}  // namespace aunets::multiview
