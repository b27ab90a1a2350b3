#pragma once

#include <algorithm>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "aunets/detectors/train.hpp"
#include "aunets/image.hpp"
#include "aunets/netcore/fusion.hpp"
#include "aunets/view.hpp"

namespace aunets::multiview {

inline constexpr int kViewStride = 10;

// How per-frame distributions become one view per video.
enum class ViewAggregation { Mean, Majority };

inline ViewAggregation parse_view_aggregation(const std::string& s) {
  if (s == "mean") return ViewAggregation::Mean;
  if (s == "majority") return ViewAggregation::Majority;
  throw std::invalid_argument("unknown view aggregation '" + s + "' (expected mean or majority)");
}

// Per-frame 9-way distribution over V1..V9.
using ViewScorer = std::function<std::vector<double>(const Image& frame)>;

// Index of the largest entry; the first one wins ties.
inline std::size_t argmax_lowest(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

inline Viewpoint aggregate_views(const std::vector<std::vector<double>>& dists, ViewAggregation agg) {
  if (dists.empty()) throw std::invalid_argument("no frame distributions to aggregate");
  std::vector<double> acc(kNumViews, 0.0);
  for (const auto& d : dists) {
    if (d.size() != static_cast<std::size_t>(kNumViews))
      throw std::invalid_argument("view distribution must have 9 entries, got " + std::to_string(d.size()));
    if (agg == ViewAggregation::Mean)
      for (int k = 0; k < kNumViews; ++k) acc[static_cast<std::size_t>(k)] += d[static_cast<std::size_t>(k)];
    else
      acc[argmax_lowest(d)] += 1.0;
  }
  if (agg == ViewAggregation::Mean)
    for (auto& a : acc) a /= static_cast<double>(dists.size());
  return {static_cast<int>(argmax_lowest(acc)) + 1};
}

struct ViewDecision {
  Viewpoint view;
  std::vector<int> sampled_frames;
  std::vector<std::vector<double>> distributions;
};

// Scores every `stride`-th frame (starting at 0) and aggregates.
inline ViewDecision classify_view_video(const ViewScorer& scorer, const std::vector<Image>& frames,
                                        int stride = kViewStride, ViewAggregation agg = ViewAggregation::Mean) {
  if (frames.empty()) throw std::invalid_argument("cannot classify the view of an empty video");
  if (stride < 1) throw std::invalid_argument("view sub-sampling stride must be positive");
  ViewDecision out;
  for (std::size_t t = 0; t < frames.size(); t += static_cast<std::size_t>(stride)) {
    out.sampled_frames.push_back(static_cast<int>(t));
    out.distributions.push_back(scorer(frames[t]));
  }
  out.view = aggregate_views(out.distributions, agg);
  return out;
}

// A 9-way network over the whole frame resized to the profile side.
struct ViewClassifier {
  netcore::FusionNet<float> net;
  int side = 64;

  Image prepare(const Image& frame) const { return resize(frame, side, side); }

  std::vector<double> distribution(const Image& frame) const {
    const auto out = net.forward({prepare(frame), std::nullopt});
    if (out.values.size() != static_cast<std::size_t>(kNumViews))
      throw ShapeError("view classifier must have 9 outputs");
    return {out.values.begin(), out.values.end()};
  }

  ViewScorer scorer() const {
    return [this](const Image& f) { return distribution(f); };
  }
};

}  // namespace aunets::multiview
