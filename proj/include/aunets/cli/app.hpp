#pragma once

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "aunets/cli/config.hpp"
#include "aunets/cli/pipeline.hpp"
#include "aunets/evalkit/report.hpp"
#include "aunets/evalkit/saliency.hpp"

namespace aunets::cli {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitMissingCheckpoint = 3 };

// ---- params

inline std::string with_commas(std::size_t n) {
  std::string s = std::to_string(n);
  for (int i = static_cast<int>(s.size()) - 3; i > 0; i -= 3) s.insert(static_cast<std::size_t>(i), ",");
  return s;
}

// Whole millions, truncated.
inline std::size_t millions(std::size_t n) { return n / 1000000; }

inline std::string params_table(const netcore::Profile& p) {
  std::ostringstream out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-10s %15s %6s %15s %6s\n", "arch", "total", "M", "learnable", "M");
  out << "profile: " << netcore::to_string(p.name) << "  outputs: " << p.k_outputs << '\n' << buf;
  for (auto arch : netcore::kAllArchitectures) {
    const auto total = netcore::param_count(arch, p, false);
    const auto learn = netcore::param_count(arch, p, true);
    std::snprintf(buf, sizeof buf, "%-10s %15s %6zu %15s %6zu\n", netcore::to_string(arch).c_str(),
                  with_commas(total).c_str(), millions(total), with_commas(learn).c_str(), millions(learn));
    out << buf;
  }
  return out.str();
}

// ---- flag plumbing

struct Flags {
  std::optional<std::string> config, seed, profile, fusion, median_window, out, data, checkpoints, dataset, fold;
  std::vector<std::string> set;
  std::optional<std::string> au, view;
};

inline void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "key=value config file");
  cmd->add_option("--seed", f.seed, "random seed");
  cmd->add_option("--profile", f.profile, "network profile: tiny or vgg16");
  cmd->add_option("--fusion", f.fusion, "fusion mode, e.g. rgb_only, horizontal, pi_fc6");
  cmd->add_option("--median-window", f.median_window, "odd temporal median window");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--data", f.data, "dataset root");
  cmd->add_option("--checkpoints", f.checkpoints, "checkpoint root");
  cmd->add_option("--dataset", f.dataset, "dataset name used in checkpoint paths");
  cmd->add_option("--fold", f.fold, "cross-validation fold 0..2");
  cmd->add_option("--set", f.set, "extra key=value override (repeatable)");
}

inline RunConfig resolve_config(const Flags& f) {
  RunConfig c;
  if (f.config) load_config_file(c, *f.config);
  auto apply = [&](const char* key, const std::optional<std::string>& v) {
    if (v) set_option(c, key, *v);
  };
  apply("seed", f.seed);
  apply("profile", f.profile);
  apply("fusion", f.fusion);
  apply("median_window", f.median_window);
  apply("out", f.out);
  apply("data", f.data);
  apply("checkpoints", f.checkpoints);
  apply("dataset", f.dataset);
  apply("fold", f.fold);
  for (const auto& kv : f.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw UsageError("--set expects key=value, got '" + kv + "'");
    set_option(c, kv.substr(0, eq), kv.substr(eq + 1));
  }
  validate(c);
  return c;
}

inline AUCode require_au(const Flags& f) {
  if (!f.au) throw UsageError("--au is required");
  try {
    return AUCode{parse_au_value(*f.au)};
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

inline std::optional<Viewpoint> parse_view_flag(const Flags& f) {
  if (!f.view) return std::nullopt;
  try {
    return parse_view(*f.view);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

inline std::vector<FrameRecord> load_records(const RunConfig& c) {
  if (!fs::is_directory(c.data)) throw DataError("dataset directory not found: " + c.data.string());
  auto recs = datakit::load_dataset(c.data);
  if (recs.empty()) throw DataError("no labelled frames under " + c.data.string());
  return recs;
}

inline VideoStore make_store(const RunConfig& c, std::vector<FrameRecord> recs) {
  return VideoStore(std::move(recs), c.data, c.flow_cache);
}

// Slot of a dataset: the view, or none for frontal-only data without view metadata.
inline std::optional<Viewpoint> storage_view(const std::vector<FrameRecord>& recs, Viewpoint view) {
  return has_views(recs) ? std::optional<Viewpoint>(view) : std::nullopt;
}

inline std::optional<LayerGraph<float>> load_encoder(const RunConfig& c) {
  if (!fs::exists(encoder_path(c))) return std::nullopt;
  return netcore::load_checkpoint<float>(encoder_path(c)).single();
}

// ---- subcommands

struct GenFlags {
  int subjects = 12;
  int views = 9;
  int frames = 48;
  int side = 96;
  std::vector<int> motion_aus;
  bool no_activations = false;
};

inline int cmd_gen_data(const RunConfig& c, const GenFlags& g, std::ostream& out) {
  datakit::SyntheticSpec spec;
  spec.n_subjects = g.subjects;
  spec.n_views = g.views;
  spec.frames_per_video = g.frames;
  spec.image_side = g.side;
  spec.seed = c.seed;
  for (int au : g.motion_aus) spec.label_rules[au] = datakit::LabelRule::Motion;
  if (g.no_activations) spec.activations.emplace();
  try {
    datakit::validate(spec);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const auto recs = datakit::generate_synthetic(spec, c.data);
  out << "wrote " << recs.size() << " frames to " << c.data.string() << '\n';
  return kExitOk;
}

inline int cmd_pretrain(const RunConfig& c, std::ostream& out) {
  const auto r = pretrain_encoder(c);
  netcore::save_checkpoint(encoder_path(c), r.net);
  detectors::write_training_log(dataset_dir(c) / "logs" / "pretrain.csv", r.log);
  out << "encoder " << encoder_path(c).string() << " validation accuracy " << r.best_f1 << " (epoch " << r.best_epoch
      << ")\n";
  return kExitOk;
}

inline int cmd_train_view(const RunConfig& c, std::ostream& out) {
  auto recs = load_records(c);
  if (!has_views(recs)) throw DataError("dataset has no view labels");
  const auto fr = fold_records(recs, c.fold, c.seed);
  auto store = make_store(c, recs);
  const auto r = train_view_classifier(store, fr.train, fr.validation, c);
  netcore::save_checkpoint(view_classifier_path(c), r.net);
  detectors::write_training_log(dataset_dir(c) / "logs" / "view_classifier.csv", r.log);
  out << "view classifier " << view_classifier_path(c).string() << " validation accuracy " << r.best_f1 << '\n';
  return kExitOk;
}

enum class InitFrom { Auto, Encoder, Frontal, Random };

inline InitFrom parse_init_from(const std::string& s) {
  if (s == "auto") return InitFrom::Auto;
  if (s == "encoder") return InitFrom::Encoder;
  if (s == "frontal") return InitFrom::Frontal;
  if (s == "random") return InitFrom::Random;
  throw UsageError("unknown --init-from '" + s + "' (expected auto, encoder, frontal or random)");
}

// Trains exactly one (view, AU, fusion) detector and records it in the ensemble manifest.
inline int cmd_train_au(const RunConfig& c, AUCode au, Viewpoint view, InitFrom init_from, std::ostream& out) {
  auto recs = load_records(c);
  const auto aus = dataset_aus(recs);
  if (std::find(aus.begin(), aus.end(), au) == aus.end())
    throw DataError("dataset has no labels for " + to_string(au));
  const auto fr = fold_records(recs, c.fold, c.seed);
  const auto slot = storage_view(recs, view);
  const auto train = view_records(fr.train, view);
  const auto val = view_records(fr.validation, view);
  if (train.empty()) throw DataError("no training frames for " + to_string(view));

  const auto frontal = detector_path(c, storage_view(recs, kFrontalView), au);
  const bool can_frontal = view != kFrontalView && fs::exists(frontal);
  if (init_from == InitFrom::Auto) init_from = can_frontal ? InitFrom::Frontal : InitFrom::Encoder;
  FusionNet<float> init;
  std::string init_desc;
  if (init_from == InitFrom::Frontal) {
    if (!can_frontal) throw MissingCheckpointError("no frontal checkpoint to start " + multiview::slot_name(view, au));
    init = netcore::load_checkpoint<float>(frontal);
    init_desc = frontal.string();
  } else {
    const auto enc = init_from == InitFrom::Encoder ? load_encoder(c) : std::nullopt;
    init = initial_detector(c, enc ? &*enc : nullptr);
    init_desc = enc ? "encoder" : "random";
  }

  auto store = make_store(c, recs);
  const auto r = train_au_detector(store, train, val, au, std::move(init), c);
  const auto path = detector_path(c, slot, au);
  netcore::save_checkpoint(path, r.net);
  const auto rel = detector_relpath(c, slot, au);
  detectors::write_training_log(dataset_dir(c) / "logs" / (rel.stem().string() + "_" + (slot ? to_string(*slot) : "frontal") + ".csv"),
                                r.log);

  multiview::EnsembleIndex index;
  if (fs::exists(ensemble_path(c))) index = multiview::EnsembleIndex::load(ensemble_path(c));
  index.set_base_dir(dataset_dir(c));
  index.add(view, au, rel, dataset_dir(c));
  index.save(ensemble_path(c));
  out << multiview::slot_name(view, au) << ' ' << netcore::to_string(c.fusion) << " from " << init_desc << ": "
      << r.log.size() << " epochs, best F1-val " << r.best_f1 << " at epoch " << r.best_epoch << " -> "
      << path.string() << '\n';
  return kExitOk;
}

inline std::vector<FrameRecord> split_records(const std::vector<FrameRecord>& recs, const RunConfig& c,
                                              const std::string& split) {
  if (split == "all") return recs;
  const auto fr = fold_records(recs, c.fold, c.seed);
  if (split == "test") return fr.test;
  if (split == "validation") return fr.validation;
  if (split == "train") return fr.train;
  throw UsageError("unknown split '" + split + "' (expected test, validation, train or all)");
}

inline int cmd_predict(const RunConfig& c, const std::string& split, std::ostream& out) {
  const auto recs = load_records(c);
  const auto selected = split_records(recs, c, split);
  const auto index = multiview::EnsembleIndex::load(ensemble_path(c));
  multiview::Cascade cascade;
  cascade.config = cascade_config(c);
  std::optional<multiview::ViewClassifier> vc;
  if (has_views(recs)) {
    if (!fs::exists(view_classifier_path(c)))
      throw MissingCheckpointError("view classifier not found: " + view_classifier_path(c).string());
    vc.emplace(multiview::ViewClassifier{netcore::load_checkpoint<float>(view_classifier_path(c)),
                                         c.net_profile().side});
    cascade.view_scorer = vc->scorer();
  } else {
    cascade.view_scorer = [](const Image&) {
      std::vector<double> d(kNumViews, 0.0);
      d[static_cast<std::size_t>(kFrontalView.index - 1)] = 1.0;
      return d;
    };
  }
  cascade.router = multiview::make_router(index, dataset_aus(recs));
  auto store = make_store(c, recs);
  const auto preds = run_cascade(store, video_ids_of(selected), cascade);
  const auto path = c.out / "predictions.csv";
  multiview::write_predictions_csv(path, preds);
  out << "predicted " << preds.size() << " videos -> " << path.string() << '\n';
  return kExitOk;
}

inline int cmd_evaluate(const RunConfig& c, const std::optional<std::string>& predictions, const std::string& group_by,
                        bool raw, std::ostream& out) {
  const auto recs = load_records(c);
  const fs::path path = predictions ? fs::path(*predictions) : c.out / "predictions.csv";
  const auto rows = evalkit::read_predictions_csv(path);
  evalkit::GroupBy g;
  try {
    g = evalkit::parse_group_by(group_by);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  const auto rep = evalkit::report(rows, recs, g, !raw,
                                   {{"fold", std::to_string(c.fold)},
                                    {"fusion", netcore::to_string(c.fusion)},
                                    {"smoothing", raw ? "raw" : "median" + std::to_string(c.median_window)}});
  evalkit::write_report(c.out / "report", rep);
  out << evalkit::render_text(rep);
  return kExitOk;
}

struct SaliencyFlags {
  std::string video;
  int frame = 0;
  int patch = 16;
  int stride = 0;
};

inline int cmd_saliency(const RunConfig& c, AUCode au, Viewpoint view, const SaliencyFlags& s, std::ostream& out) {
  const auto recs = load_records(c);
  const auto path = detector_path(c, storage_view(recs, view), au);
  if (!fs::exists(path)) throw MissingCheckpointError("no checkpoint for " + multiview::slot_name(view, au));
  const auto net = netcore::load_checkpoint<float>(path);
  auto store = make_store(c, recs);
  std::string video = s.video;
  if (video.empty()) {
    const auto test = view_records(fold_records(recs, c.fold, c.seed).test, view);
    if (test.empty()) throw DataError("no test video for " + to_string(view));
    video = test.front().video_id;
  }
  const auto vrecs = store.video_records(video);
  const auto it = std::find_if(vrecs.begin(), vrecs.end(), [&](const FrameRecord& r) { return r.frame_index == s.frame; });
  if (it == vrecs.end()) throw DataError(video + " has no frame " + std::to_string(s.frame));
  const int side = c.net_profile().side;

  std::vector<Image> crops;
  for (const auto& r : view_records(fold_records(recs, c.fold, c.seed).train, view))
    if (r.frame_index % 10 == 0) crops.push_back(crop_resize(store.frames(r.video_id)[store.position(r)], r.face_box, side, side));
  const auto fill = evalkit::mean_color(crops);

  const std::size_t t = store.position(*it);
  const bool needs_flow = c.fusion != netcore::FusionMode::RgbOnly;
  const auto input = motion::frame_bundle(store.frames(video)[t], needs_flow ? &store.flows(video)[t] : nullptr,
                                          it->face_box, c.fusion, side);
  const auto map = evalkit::occlusion_saliency(
      [&](const netcore::NetInput<float>& in) { return detectors::predict_frame(net, in); }, input, c.fusion, s.patch,
      s.stride, fill.data());
  const auto stem = c.out / ("saliency_" + video + "_" + std::to_string(s.frame) + "_" + to_string(au));
  evalkit::save_saliency(stem.string() + ".png", stem.string() + ".csv", map);
  out << "p_base " << map.p_base << ", " << map.rows << "x" << map.cols << " map -> " << stem.string() << ".png\n";
  return kExitOk;
}

// ---- dispatch

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"AU detection toolkit: synthetic data, detector training, multi-view cascade and evaluation", "aunets"};
  app.require_subcommand(1);
  Flags f;
  GenFlags gen;
  SaliencyFlags sal;
  std::string split = "test", group_by = "none", init_from = "auto";
  std::optional<std::string> predictions;
  bool raw = false;

  auto* gen_cmd = app.add_subcommand("gen-data", "render a synthetic multi-view dataset into --data");
  add_common(gen_cmd, f);
  gen_cmd->add_option("--subjects", gen.subjects, "number of subjects");
  gen_cmd->add_option("--views", gen.views, "number of views (1 = frontal only)");
  gen_cmd->add_option("--frames", gen.frames, "frames per video");
  gen_cmd->add_option("--side", gen.side, "image side in pixels");
  gen_cmd->add_option("--motion-au", gen.motion_aus, "AUs labelled by motion instead of amplitude");
  gen_cmd->add_flag("--no-activations", gen.no_activations, "render neutral faces only");

  auto* pre_cmd = app.add_subcommand("pretrain", "train the 22-class expression encoder");
  add_common(pre_cmd, f);

  auto* au_cmd = app.add_subcommand("train-au", "train one (view, AU, fusion) detector");
  add_common(au_cmd, f);
  au_cmd->add_option("--au", f.au, "AU code, e.g. 12 or AU12")->required();
  au_cmd->add_option("--view", f.view, "view V1..V9 or frontal (default frontal)");
  au_cmd->add_option("--init-from", init_from, "auto, encoder, frontal or random");

  auto* view_cmd = app.add_subcommand("train-view", "train the 9-way view classifier");
  add_common(view_cmd, f);

  auto* pred_cmd = app.add_subcommand("predict", "run the view -> ensemble -> smoothing cascade");
  add_common(pred_cmd, f);
  pred_cmd->add_option("--split", split, "test, validation, train or all");

  auto* eval_cmd = app.add_subcommand("evaluate", "score predictions against the dataset labels");
  add_common(eval_cmd, f);
  eval_cmd->add_option("--predictions", predictions, "prediction CSV (default <out>/predictions.csv)");
  eval_cmd->add_option("--group-by", group_by, "none or view");
  eval_cmd->add_flag("--raw", raw, "score unsmoothed decisions");

  auto* params_cmd = app.add_subcommand("params", "print exact parameter counts for every architecture");
  add_common(params_cmd, f);

  auto* sal_cmd = app.add_subcommand("saliency", "occlusion saliency map of one detector on one frame");
  add_common(sal_cmd, f);
  sal_cmd->add_option("--au", f.au, "AU code")->required();
  sal_cmd->add_option("--view", f.view, "view V1..V9 or frontal (default frontal)");
  sal_cmd->add_option("--video", sal.video, "video id (default: first test video of the view)");
  sal_cmd->add_option("--frame", sal.frame, "frame index");
  sal_cmd->add_option("--patch", sal.patch, "occluder side in input pixels");
  sal_cmd->add_option("--stride", sal.stride, "occluder stride (0 = patch / 2)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    const RunConfig c = resolve_config(f);
    const Viewpoint view = parse_view_flag(f).value_or(kFrontalView);
    if (*gen_cmd) return cmd_gen_data(c, gen, out);
    if (*pre_cmd) return cmd_pretrain(c, out);
    if (*au_cmd) return cmd_train_au(c, require_au(f), view, parse_init_from(init_from), out);
    if (*view_cmd) return cmd_train_view(c, out);
    if (*pred_cmd) return cmd_predict(c, split, out);
    if (*eval_cmd) return cmd_evaluate(c, predictions, group_by, raw, out);
    if (*params_cmd) {
      out << params_table(c.net_profile());
      return kExitOk;
    }
    if (*sal_cmd) return cmd_saliency(c, require_au(f), view, sal, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  } catch (const MissingCheckpointError& e) {
    err << "missing checkpoint: " << e.what() << '\n';
    return kExitMissingCheckpoint;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace aunets::cli
