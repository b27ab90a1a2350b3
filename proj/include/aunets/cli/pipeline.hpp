#pragma once

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "aunets/cli/config.hpp"
#include "aunets/datakit/dataset.hpp"
#include "aunets/datakit/records.hpp"
#include "aunets/datakit/synthetic.hpp"
#include "aunets/evalkit/report.hpp"
#include "aunets/detectors/heads.hpp"
#include "aunets/detectors/train.hpp"
#include "aunets/motion/embed.hpp"
#include "aunets/motion/flow.hpp"
#include "aunets/motion/flow_cache.hpp"
#include "aunets/multiview/cascade.hpp"
#include "aunets/multiview/ensemble.hpp"
#include "aunets/multiview/view_classifier.hpp"
#include "aunets/netcore/checkpoint.hpp"

namespace aunets::cli {

namespace fs = std::filesystem;
using datakit::FrameRecord;
using detectors::Example;
using netcore::FusionNet;
using netcore::LayerGraph;

// Frames and flows of a dataset, loaded per video on first use. Flows are rounded to the cache
// resolution whether or not a cache directory is set.
class VideoStore {
 public:
  VideoStore(std::vector<FrameRecord> records, fs::path data_root, fs::path cache_root = {},
             motion::FlowEstimator estimator = motion::default_flow_estimator())
      : records_(std::move(records)),
        data_root_(std::move(data_root)),
        cache_root_(std::move(cache_root)),
        estimator_(std::move(estimator)) {
    for (std::size_t i = 0; i < records_.size(); ++i) by_video_[records_[i].video_id].push_back(i);
    for (auto& [id, idx] : by_video_)
      std::sort(idx.begin(), idx.end(),
                [&](std::size_t a, std::size_t b) { return records_[a].frame_index < records_[b].frame_index; });
  }

  const std::vector<FrameRecord>& records() const { return records_; }

  std::vector<std::string> video_ids() const {
    std::vector<std::string> out;
    for (const auto& [id, idx] : by_video_) out.push_back(id);
    return out;
  }

  std::vector<FrameRecord> video_records(const std::string& id) const {
    std::vector<FrameRecord> out;
    for (auto i : indices(id)) out.push_back(records_[i]);
    return out;
  }

  const std::vector<Image>& frames(const std::string& id) {
    auto it = frames_.find(id);
    if (it != frames_.end()) return it->second;
    std::vector<Image> f;
    for (auto i : indices(id)) f.push_back(load_image_png(records_[i].image_path));
    return frames_.emplace(id, std::move(f)).first->second;
  }

  const std::vector<motion::FlowField>& flows(const std::string& id) {
    auto it = flows_.find(id);
    if (it != flows_.end()) return it->second;
    const auto& idx = indices(id);
    std::vector<motion::FlowField> out(idx.size());
    bool cached = !cache_root_.empty();
    std::vector<fs::path> paths;
    if (cached) paths = cache_paths(idx);
    for (std::size_t t = 0; cached && t < idx.size(); ++t) {
      const auto& p = paths[t];
      if (!fs::exists(p)) cached = false;
      else out[t] = motion::read_flow_cache(p);
    }
    if (!cached) {
      out = motion::first_frame_policy(frames(id), estimator_);
      for (auto& f : out) f = motion::quantize_flow(std::move(f));
      if (!cache_root_.empty())
        for (std::size_t t = 0; t < idx.size(); ++t) {
          const auto& p = paths[t];
          fs::create_directories(p.parent_path());
          motion::write_flow_cache(p, out[t]);
        }
    }
    return flows_.emplace(id, std::move(out)).first->second;
  }

  // Frame index -> position inside the video.
  std::size_t position(const FrameRecord& r) const {
    const auto& idx = indices(r.video_id);
    for (std::size_t t = 0; t < idx.size(); ++t)
      if (records_[idx[t]].frame_index == r.frame_index) return t;
    throw DataError(r.video_id + " has no frame " + std::to_string(r.frame_index));
  }

  void release(const std::string& id) {
    frames_.erase(id);
    flows_.erase(id);
  }

  void clear() {
    frames_.clear();
    flows_.clear();
  }

 private:
  const std::vector<std::size_t>& indices(const std::string& id) const {
    const auto it = by_video_.find(id);
    if (it == by_video_.end()) throw DataError("unknown video " + id);
    return it->second;
  }

  std::vector<fs::path> cache_paths(const std::vector<std::size_t>& idx) const {
    std::vector<fs::path> out;
    std::vector<std::uint8_t> prev;
    for (std::size_t t = 0; t < idx.size(); ++t) {
      auto cur = netcore::read_file_bytes(records_[idx[t]].image_path);
      const auto key = t == 0 ? motion::flow_cache_key({&cur}) : motion::flow_cache_key({&prev, &cur});
      out.push_back(motion::flow_cache_path(cache_root_, data_root_, records_[idx[t]].image_path, key));
      prev = std::move(cur);
    }
    return out;
  }

  std::vector<FrameRecord> records_;
  fs::path data_root_;
  fs::path cache_root_;
  motion::FlowEstimator estimator_;
  std::map<std::string, std::vector<std::size_t>> by_video_;
  std::map<std::string, std::vector<Image>> frames_;
  std::map<std::string, std::vector<motion::FlowField>> flows_;
};

// One network input per record, labelled for `au`.
inline std::vector<Example> make_examples(VideoStore& store, const std::vector<FrameRecord>& records, AUCode au,
                                          netcore::FusionMode mode, int side) {
  const bool needs_flow = mode != netcore::FusionMode::RgbOnly;
  std::vector<Example> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    const std::size_t t = store.position(r);
    const auto& frame = store.frames(r.video_id)[t];
    const motion::FlowField* flow = needs_flow ? &store.flows(r.video_id)[t] : nullptr;
    out.push_back({motion::frame_bundle(frame, flow, r.face_box, mode, side), r.label(au)});
  }
  return out;
}

// Training set for one AU: jitter-balanced, then assembled.
inline std::vector<Example> make_training_examples(VideoStore& store, const std::vector<FrameRecord>& records, AUCode au,
                                                   netcore::FusionMode mode, int side, int max_factor) {
  return make_examples(store, datakit::jitter_balance(records, au, max_factor), au, mode, side);
}

struct FoldRecords {
  std::vector<FrameRecord> train;
  std::vector<FrameRecord> validation;
  std::vector<FrameRecord> test;
};

inline FoldRecords fold_records(const std::vector<FrameRecord>& records, int fold, std::uint64_t seed) {
  const auto plan = datakit::make_splits(datakit::subjects_of(records), seed);
  const auto& f = plan.folds.at(static_cast<std::size_t>(fold));
  return {datakit::select_subjects(records, f.train), datakit::select_subjects(records, {f.validation}),
          datakit::select_subjects(records, f.test)};
}

// Records of one view; a dataset without view metadata is treated as all frontal.
inline std::vector<FrameRecord> view_records(const std::vector<FrameRecord>& records, Viewpoint view) {
  std::vector<FrameRecord> out;
  for (const auto& r : records)
    if (r.view ? *r.view == view : view == kFrontalView) out.push_back(r);
  return out;
}

inline bool has_views(const std::vector<FrameRecord>& records) {
  return std::any_of(records.begin(), records.end(), [](const FrameRecord& r) { return r.view.has_value(); });
}

inline std::vector<Viewpoint> dataset_views(const std::vector<FrameRecord>& records) {
  std::set<Viewpoint> s;
  for (const auto& r : records) s.insert(r.view.value_or(kFrontalView));
  return {s.begin(), s.end()};
}

inline std::vector<AUCode> dataset_aus(const std::vector<FrameRecord>& records) {
  std::set<AUCode> s;
  for (const auto& r : records)
    for (const auto& [au, v] : r.labels) s.insert(AUCode{au});
  return {s.begin(), s.end()};
}

// ---- checkpoint layout under <checkpoints>/<dataset>/

inline fs::path dataset_dir(const RunConfig& c) { return c.checkpoints / c.dataset; }
inline fs::path encoder_path(const RunConfig& c) { return dataset_dir(c) / "encoder.ckpt"; }
inline fs::path view_classifier_path(const RunConfig& c) { return dataset_dir(c) / "view_classifier.ckpt"; }

inline fs::path ensemble_path(const RunConfig& c) {
  return dataset_dir(c) / ("ensemble_" + netcore::to_string(c.fusion) + ".csv");
}

// Relative to the dataset directory.
inline fs::path detector_relpath(const RunConfig& c, std::optional<Viewpoint> view, AUCode au) {
  auto p = multiview::checkpoint_name(c.dataset, view, au, c.fusion).lexically_relative(c.dataset);
  p += ".ckpt";
  return p;
}

inline fs::path detector_path(const RunConfig& c, std::optional<Viewpoint> view, AUCode au) {
  return dataset_dir(c) / detector_relpath(c, view, au);
}

inline detectors::TrainConfig pretrain_config(const RunConfig& c) {
  auto t = c.train;
  t.lr0 = c.pretrain_lr;
  t.max_epochs = t.decay_epochs = c.pretrain_epochs;
  t.seed = c.seed;
  return t;
}

inline detectors::TrainConfig detector_config(const RunConfig& c) {
  auto t = c.train;
  t.seed = c.seed;
  return t;
}

// 22-way expression classifier trained on rendered crops of held-out synthetic subjects; every
// tenth sample is kept for validation accuracy.
inline detectors::TrainResult pretrain_encoder(const RunConfig& c, int image_side = 96) {
  const auto profile = c.net_profile(datakit::kPretrainClasses);
  const auto samples = datakit::pretrain_samples(c.pretrain_samples, profile.side, image_side, c.seed);
  std::vector<Example> train, val;
  for (std::size_t i = 0; i < samples.size(); ++i)
    (i % 10 == 0 ? val : train).push_back({{samples[i].crop, std::nullopt}, samples[i].label});
  FusionNet<float> net(netcore::FusionMode::RgbOnly, profile.name, c.seed,
                       netcore::build<float>(profile, c.seed, 3, c.init));
  return detectors::train_network(std::move(net), train, val, pretrain_config(c), detectors::validation_accuracy);
}

// Starting weights for a detector: the pretrained encoder with a fresh binary head when given,
// otherwise a random encoder, grown into the configured fusion mode.
inline FusionNet<float> initial_detector(const RunConfig& c, const LayerGraph<float>* encoder) {
  const auto profile = c.net_profile(2);
  const auto base = encoder ? detectors::adapt_head(*encoder, 2, c.seed) : netcore::build<float>(profile, c.seed, 3, c.init);
  return netcore::make_fusion_net<float>(c.fusion, profile, base, c.seed);
}

// Trains one (view, AU) detector; `train` and `val` are already restricted to that view.
inline detectors::TrainResult train_au_detector(VideoStore& store, const std::vector<FrameRecord>& train,
                                                const std::vector<FrameRecord>& val, AUCode au,
                                                FusionNet<float> init, const RunConfig& c) {
  const int side = c.net_profile().side;
  const auto tr = make_training_examples(store, train, au, c.fusion, side, c.max_jitter_factor);
  const auto va = make_examples(store, val, au, c.fusion, side);
  return detectors::train_detector(std::move(init), tr, va, detector_config(c));
}

// Whole frames, every `stride`-th, labelled with their view (0-based class).
inline std::vector<Example> view_examples(VideoStore& store, const std::vector<FrameRecord>& records, int side,
                                          int stride) {
  std::vector<Example> out;
  for (const auto& r : records) {
    if (!r.view) throw DataError(r.video_id + " has no view label");
    if (r.frame_index % stride != 0) continue;
    out.push_back({{resize(store.frames(r.video_id)[store.position(r)], side, side), std::nullopt}, r.view->index - 1});
  }
  return out;
}

inline detectors::TrainResult train_view_classifier(VideoStore& store, const std::vector<FrameRecord>& train,
                                                    const std::vector<FrameRecord>& val, const RunConfig& c) {
  const auto profile = c.net_profile(kNumViews);
  const auto tr = view_examples(store, train, profile.side, c.view_train_stride);
  const auto va = view_examples(store, val, profile.side, c.view_train_stride);
  FusionNet<float> net(netcore::FusionMode::RgbOnly, profile.name, c.seed,
                       netcore::build<float>(profile, c.seed, 3, c.init));
  auto cfg = c.train;
  cfg.lr0 = c.view_lr;
  cfg.max_epochs = cfg.decay_epochs = c.view_epochs;
  cfg.seed = c.seed;
  return detectors::train_network(std::move(net), tr, va, cfg, detectors::validation_accuracy);
}

inline multiview::CascadeConfig cascade_config(const RunConfig& c) {
  return {c.fusion, c.net_profile().side, c.median_window, c.smooth_target, c.view_stride, c.view_aggregation};
}

// Runs the cascade on every listed video, reusing the store's frames and flows.
inline std::vector<multiview::VideoPrediction> run_cascade(VideoStore& store, const std::vector<std::string>& videos,
                                                           const multiview::Cascade& cascade) {
  std::vector<multiview::VideoPrediction> out;
  const bool needs_flow = cascade.config.mode != netcore::FusionMode::RgbOnly;
  for (const auto& id : videos) {
    std::vector<FaceBox> boxes;
    std::vector<int> indices;
    for (const auto& r : store.video_records(id)) {
      boxes.push_back(r.face_box);
      indices.push_back(r.frame_index);
    }
    out.push_back(multiview::detect_sequence(cascade, id, store.frames(id), boxes,
                                             needs_flow ? &store.flows(id) : nullptr));
    out.back().frame_indices = std::move(indices);
  }
  return out;
}

// The rows the prediction CSV would hold, without the round trip through a file.
inline std::vector<evalkit::PredictionRow> prediction_rows(const std::vector<multiview::VideoPrediction>& preds) {
  std::vector<evalkit::PredictionRow> out;
  for (const auto& v : preds)
    for (const auto& s : v.sequences)
      for (std::size_t t = 0; t < s.size(); ++t)
        out.push_back({v.video_id, v.frame_index(t), to_string(v.view.view), s.au, s.probs_raw[t],
                       s.probs_smoothed[t], s.decisions_raw[t], s.decisions_smoothed[t]});
  return out;
}

inline std::vector<std::string> video_ids_of(const std::vector<FrameRecord>& records) {
  std::set<std::string> s;
  for (const auto& r : records) s.insert(r.video_id);
  return {s.begin(), s.end()};
}

}  // namespace aunets::cli
