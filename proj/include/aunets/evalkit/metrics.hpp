#pragma once

#include <span>
#include <stdexcept>
#include <string>

namespace aunets::evalkit {

struct Confusion {
  long tp = 0, fp = 0, fn = 0, tn = 0;

  long total() const { return tp + fp + fn + tn; }
};

struct PrecisionRecallF1 {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

inline void check_binary_tracks(std::span<const int> decisions, std::span<const int> labels) {
  if (decisions.size() != labels.size())
    throw std::invalid_argument("decision and label tracks differ in length (" + std::to_string(decisions.size()) +
                                " vs " + std::to_string(labels.size()) + ")");
  for (std::size_t i = 0; i < decisions.size(); ++i)
    if ((decisions[i] != 0 && decisions[i] != 1) || (labels[i] != 0 && labels[i] != 1))
      throw std::invalid_argument("non-binary entry at frame " + std::to_string(i));
}

inline Confusion confusion(std::span<const int> decisions, std::span<const int> labels) {
  check_binary_tracks(decisions, labels);
  Confusion c;
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    if (decisions[i] && labels[i]) ++c.tp;
    else if (decisions[i]) ++c.fp;
    else if (labels[i]) ++c.fn;
    else ++c.tn;
  }
  return c;
}

// Any 0/0 ratio counts as 0.
inline PrecisionRecallF1 prf(const Confusion& c) {
  PrecisionRecallF1 r;
  r.precision = c.tp + c.fp > 0 ? static_cast<double>(c.tp) / (c.tp + c.fp) : 0.0;
  r.recall = c.tp + c.fn > 0 ? static_cast<double>(c.tp) / (c.tp + c.fn) : 0.0;
  r.f1 = r.precision + r.recall > 0 ? 2 * r.precision * r.recall / (r.precision + r.recall) : 0.0;
  return r;
}

// Frame-level precision, recall and F1 of binary decisions.
inline PrecisionRecallF1 f1_frame(std::span<const int> decisions, std::span<const int> labels) {
  return prf(confusion(decisions, labels));
}

inline double accuracy(std::span<const int> decisions, std::span<const int> labels) {
  if (decisions.empty() || labels.empty()) throw std::invalid_argument("accuracy of empty tracks is undefined");
  const auto c = confusion(decisions, labels);
  return static_cast<double>(c.tp + c.tn) / c.total();
}

}  // namespace aunets::evalkit
