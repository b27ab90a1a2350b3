#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace aunets {

inline constexpr int kNumViews = 9;

// Camera viewpoint V1..V9.
struct Viewpoint {
  int index = 1;

  friend auto operator<=>(const Viewpoint&, const Viewpoint&) = default;
};

// The centre of the 3x3 yaw/pitch grid.
inline constexpr Viewpoint kFrontalView{5};

inline std::string to_string(Viewpoint v) { return "V" + std::to_string(v.index); }

inline Viewpoint make_view(int index) {
  if (index < 1 || index > kNumViews) throw std::invalid_argument("view index out of range: " + std::to_string(index));
  return {index};
}

// Accepts "V3", "v3", "3" or "frontal".
inline Viewpoint parse_view(const std::string& s) {
  if (s == "frontal") return kFrontalView;
  std::string digits = (!s.empty() && (s[0] == 'V' || s[0] == 'v')) ? s.substr(1) : s;
  if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos)
    throw std::invalid_argument("not a viewpoint: '" + s + "'");
  return make_view(std::stoi(digits));
}

inline std::vector<Viewpoint> all_views() {
  std::vector<Viewpoint> v;
  for (int i = 1; i <= kNumViews; ++i) v.push_back({i});
  return v;
}

}  // namespace aunets
