#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "aunets/common.hpp"
#include "aunets/detectors/train.hpp"
#include "aunets/multiview/view_classifier.hpp"
#include "aunets/netcore/fusion.hpp"
#include "aunets/netcore/profile.hpp"
#include "aunets/temporal/median.hpp"

namespace aunets::cli {

// Raised for bad flags or config values; maps to exit status 1.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Everything a subcommand needs. Defaults give a working TINY run on the synthetic data; a
// config file of key=value lines overrides them, and command-line flags override the file.
struct RunConfig {
  std::filesystem::path data = "data";
  std::filesystem::path checkpoints = "checkpoints";
  std::filesystem::path out = "out";
  std::string dataset = "synthetic";
  std::uint64_t seed = 1;

  netcore::ProfileName profile = netcore::ProfileName::Tiny;
  netcore::FusionMode fusion = netcore::FusionMode::RgbOnly;
  netcore::InitScheme init = netcore::InitScheme::He;
  int fold = 0;

  detectors::TrainConfig train{.lr0 = 1e-3};
  int max_jitter_factor = 9;

  int pretrain_samples = 4000;
  int pretrain_epochs = 10;
  double pretrain_lr = 1e-3;

  int view_epochs = 8;
  double view_lr = 1e-3;
  int view_train_stride = 3;

  int median_window = temporal::kDefaultMedianWindow;
  temporal::SmoothTarget smooth_target = temporal::SmoothTarget::Probabilities;
  int view_stride = multiview::kViewStride;
  multiview::ViewAggregation view_aggregation = multiview::ViewAggregation::Mean;

  std::filesystem::path flow_cache = "flow_cache";  // empty disables the on-disk cache

  netcore::Profile net_profile(int k = 2) const {
    return profile == netcore::ProfileName::Vgg16 ? netcore::Profile::vgg16(k) : netcore::Profile::tiny(k);
  }
};

namespace detail {

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  std::istringstream in(v);
  T out{};
  if (!(in >> out) || !in.eof()) throw UsageError("bad value for " + key + ": '" + v + "'");
  return out;
}

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

}  // namespace detail

inline temporal::SmoothTarget parse_smooth_target(const std::string& s) {
  if (s == "probabilities") return temporal::SmoothTarget::Probabilities;
  if (s == "decisions") return temporal::SmoothTarget::Decisions;
  throw std::invalid_argument("unknown smoothing target '" + s + "' (expected probabilities or decisions)");
}

inline std::string to_string(temporal::SmoothTarget t) {
  return t == temporal::SmoothTarget::Probabilities ? "probabilities" : "decisions";
}

inline std::string to_string(multiview::ViewAggregation a) {
  return a == multiview::ViewAggregation::Mean ? "mean" : "majority";
}

// Applies one key=value setting.
inline void set_option(RunConfig& c, const std::string& key, const std::string& value) {
  using detail::parse_number;
  try {
    if (key == "data") c.data = value;
    else if (key == "checkpoints") c.checkpoints = value;
    else if (key == "out") c.out = value;
    else if (key == "dataset") c.dataset = value;
    else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
    else if (key == "profile") c.profile = netcore::parse_profile_name(value);
    else if (key == "fusion") c.fusion = netcore::parse_fusion_mode(value);
    else if (key == "init") c.init = netcore::parse_init_scheme(value);
    else if (key == "fold") c.fold = parse_number<int>(key, value);
    else if (key == "lr0") c.train.lr0 = parse_number<double>(key, value);
    else if (key == "decay_epochs") c.train.decay_epochs = parse_number<int>(key, value);
    else if (key == "max_epochs") c.train.max_epochs = parse_number<int>(key, value);
    else if (key == "beta1") c.train.beta1 = parse_number<double>(key, value);
    else if (key == "beta2") c.train.beta2 = parse_number<double>(key, value);
    else if (key == "epsilon") c.train.epsilon = parse_number<double>(key, value);
    else if (key == "weight_decay") c.train.weight_decay = parse_number<double>(key, value);
    else if (key == "plateau_epochs") c.train.plateau_epochs = parse_number<int>(key, value);
    else if (key == "plateau_tolerance") c.train.plateau_tolerance = parse_number<double>(key, value);
    else if (key == "batch_size") c.train.batch_size = parse_number<int>(key, value);
    else if (key == "max_jitter_factor") c.max_jitter_factor = parse_number<int>(key, value);
    else if (key == "pretrain_samples") c.pretrain_samples = parse_number<int>(key, value);
    else if (key == "pretrain_epochs") c.pretrain_epochs = parse_number<int>(key, value);
    else if (key == "pretrain_lr") c.pretrain_lr = parse_number<double>(key, value);
    else if (key == "view_epochs") c.view_epochs = parse_number<int>(key, value);
    else if (key == "view_lr") c.view_lr = parse_number<double>(key, value);
    else if (key == "view_train_stride") c.view_train_stride = parse_number<int>(key, value);
    else if (key == "median_window") c.median_window = parse_number<int>(key, value);
    else if (key == "smooth_target") c.smooth_target = parse_smooth_target(value);
    else if (key == "view_stride") c.view_stride = parse_number<int>(key, value);
    else if (key == "view_aggregation") c.view_aggregation = multiview::parse_view_aggregation(value);
    else if (key == "flow_cache") c.flow_cache = value;
    else throw UsageError("unknown config key '" + key + "'");
  } catch (const UsageError&) {
    throw;
  } catch (const std::exception& e) {
    throw UsageError(key + ": " + e.what());
  }
}

inline void validate(const RunConfig& c) {
  if (c.fold < 0 || c.fold > 2) throw UsageError("fold must be 0, 1 or 2");
  if (c.median_window < 1 || c.median_window % 2 == 0) throw UsageError("median window must be odd and positive");
  if (c.train.batch_size < 1) throw UsageError("batch_size must be positive");
  if (c.train.max_epochs < 1 || c.train.decay_epochs < 1) throw UsageError("epoch counts must be positive");
  if (c.view_stride < 1 || c.view_train_stride < 1) throw UsageError("strides must be positive");
  if (c.max_jitter_factor < 1) throw UsageError("max_jitter_factor must be positive");
}

// Flat key=value lines; '#' starts a comment.
inline void load_config_file(RunConfig& c, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path.string());
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw UsageError(path.string() + ":" + std::to_string(line_no) + ": expected key=value");
    try {
      set_option(c, detail::trim(line.substr(0, eq)), detail::trim(line.substr(eq + 1)));
    } catch (const UsageError& e) {
      throw UsageError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

inline std::string render_config(const RunConfig& c) {
  std::ostringstream o;
  o.precision(9);
  o << "data=" << c.data.string() << "\ncheckpoints=" << c.checkpoints.string() << "\nout=" << c.out.string()
    << "\ndataset=" << c.dataset << "\nseed=" << c.seed << "\nprofile=" << netcore::to_string(c.profile)
    << "\nfusion=" << netcore::to_string(c.fusion) << "\ninit=" << netcore::to_string(c.init) << "\nfold=" << c.fold
    << "\nlr0=" << c.train.lr0 << "\ndecay_epochs=" << c.train.decay_epochs << "\nmax_epochs=" << c.train.max_epochs
    << "\nbeta1=" << c.train.beta1 << "\nbeta2=" << c.train.beta2 << "\nepsilon=" << c.train.epsilon
    << "\nweight_decay=" << c.train.weight_decay << "\nplateau_epochs=" << c.train.plateau_epochs
    << "\nplateau_tolerance=" << c.train.plateau_tolerance << "\nbatch_size=" << c.train.batch_size
    << "\nmax_jitter_factor=" << c.max_jitter_factor << "\npretrain_samples=" << c.pretrain_samples
    << "\npretrain_epochs=" << c.pretrain_epochs << "\npretrain_lr=" << c.pretrain_lr
    << "\nview_epochs=" << c.view_epochs << "\nview_lr=" << c.view_lr << "\nview_train_stride=" << c.view_train_stride
    << "\nmedian_window=" << c.median_window << "\nsmooth_target=" << to_string(c.smooth_target)
    << "\nview_stride=" << c.view_stride << "\nview_aggregation=" << to_string(c.view_aggregation)
    << "\nflow_cache=" << c.flow_cache.string() << '\n';
  return o.str();
}

}  // namespace aunets::cli
