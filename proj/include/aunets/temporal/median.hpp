#pragma once

#include <algorithm>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "aunets/au.hpp"

namespace aunets::temporal {

inline constexpr int kDefaultMedianWindow = 7;
inline constexpr double kDecisionThreshold = 0.5;

inline void check_window(int window) {
  if (window < 1 || window % 2 == 0)
    throw std::invalid_argument("median window must be odd and positive, got " + std::to_string(window));
}

// Mirror index into [0, n), repeating the edge sample (c b a | a b c d | d c b).
inline std::size_t reflect_index(long i, std::size_t n) {
  const long period = 2 * static_cast<long>(n);
  long k = i % period;
  if (k < 0) k += period;
  return static_cast<std::size_t>(k < static_cast<long>(n) ? k : period - 1 - k);
}

// Centred sliding median with reflect padding at both ends.
template <typename T>
std::vector<T> median_smooth(std::span<const T> track, int window = kDefaultMedianWindow) {
  check_window(window);
  if (track.empty()) throw std::invalid_argument("cannot smooth an empty track");
  const long half = window / 2;
  const std::size_t n = track.size();
  std::vector<T> out(n), buf(static_cast<std::size_t>(window));
  for (std::size_t i = 0; i < n; ++i) {
    for (long k = -half; k <= half; ++k) buf[static_cast<std::size_t>(k + half)] = track[reflect_index(static_cast<long>(i) + k, n)];
    std::nth_element(buf.begin(), buf.begin() + half, buf.end());
    out[i] = buf[static_cast<std::size_t>(half)];
  }
  return out;
}

template <typename T>
std::vector<T> median_smooth(const std::vector<T>& track, int window = kDefaultMedianWindow) {
  return median_smooth(std::span<const T>(track), window);
}

inline int decide(double prob) { return prob >= kDecisionThreshold ? 1 : 0; }

inline std::vector<int> decide(std::span<const double> probs) {
  std::vector<int> d(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) d[i] = decide(probs[i]);
  return d;
}

// Per-frame track of one AU in one video, raw and smoothed.
struct DetectionSequence {
  AUCode au;
  std::vector<double> probs_raw;
  std::vector<double> probs_smoothed;
  std::vector<int> decisions_raw;
  std::vector<int> decisions_smoothed;
  int window = 1;

  std::size_t size() const { return probs_raw.size(); }
};

inline DetectionSequence make_sequence(AUCode au, std::vector<double> probs) {
  DetectionSequence s;
  s.au = au;
  s.decisions_raw = decide(probs);
  s.decisions_smoothed = s.decisions_raw;
  s.probs_smoothed = probs;
  s.probs_raw = std::move(probs);
  return s;
}

// What the median runs over: probabilities (then re-thresholded) or the binary decisions.
enum class SmoothTarget { Probabilities, Decisions };

inline DetectionSequence smooth_sequence(DetectionSequence seq, int window = kDefaultMedianWindow,
                                         SmoothTarget target = SmoothTarget::Probabilities) {
  check_window(window);
  seq.window = window;
  if (target == SmoothTarget::Probabilities) {
    seq.probs_smoothed = median_smooth(std::span<const double>(seq.probs_raw), window);
    seq.decisions_smoothed = decide(seq.probs_smoothed);
  } else {
    seq.decisions_smoothed = median_smooth(std::span<const int>(seq.decisions_raw), window);
    seq.probs_smoothed = seq.probs_raw;
  }
  return seq;
}

}  // namespace aunets::temporal
