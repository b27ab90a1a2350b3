// Library-level tour: parameter accounting, a one-frame forward pass, smoothing and scoring.
#include <cstdio>
#include <random>
#include <vector>

#include "aunets/aunets.hpp"

using namespace aunets;

int main() {
  const auto vgg = netcore::Profile::vgg16();
  for (auto arch : netcore::kAllArchitectures)
    std::printf("%-11s total %11zu  learnable %11zu\n", netcore::to_string(arch).c_str(),
                netcore::param_count(arch, vgg, false), netcore::param_count(arch, vgg, true));

  // An untrained two-stream TINY detector on random color and motion images.
  const auto tiny = netcore::Profile::tiny();
  const auto net = netcore::build_fusion_net<float>(netcore::FusionMode::PiFc6, tiny, 7);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<float> u(0.f, 1.f);
  netcore::Tensor<float> rgb({3, tiny.side, tiny.side}), flow({3, tiny.side, tiny.side});
  for (auto& v : rgb.values) v = u(rng);
  for (auto& v : flow.values) v = u(rng);
  std::printf("p(AU present) = %.4f\n", detectors::predict_frame(net, {rgb, flow}));

  // A flickering track: the median filter removes isolated flips.
  const std::vector<int> labels{0, 0, 0, 1, 1, 1, 1, 1, 0, 0, 0, 0};
  const std::vector<double> probs{.1, .9, .2, .8, .7, .1, .9, .8, .3, .2, .7, .1};
  const auto smooth = temporal::median_smooth(probs, 3);
  std::vector<int> raw_d, smooth_d;
  for (std::size_t t = 0; t < probs.size(); ++t) {
    raw_d.push_back(detectors::decision(probs[t]));
    smooth_d.push_back(detectors::decision(smooth[t]));
  }
  std::printf("F1 raw %.3f, smoothed %.3f\n", evalkit::f1_frame(raw_d, labels).f1, evalkit::f1_frame(smooth_d, labels).f1);
}
