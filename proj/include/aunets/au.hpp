#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

namespace aunets {

// FACS action unit code, e.g. 12 = lip corner puller.
struct AUCode {
  int value = 0;

  friend auto operator<=>(const AUCode&, const AUCode&) = default;
};

inline std::string to_string(AUCode au) { return "AU" + std::to_string(au.value); }

enum class AUSet { Bp4d, Fera, Synthetic };

inline const std::vector<int>& au_values(AUSet set) {
  static const std::vector<int> bp4d{1, 2, 4, 6, 7, 10, 12, 14, 15, 17, 23, 24};
  static const std::vector<int> fera{1, 4, 6, 7, 10, 12, 14, 15, 17, 23};
  // inner brow raise, outer brow raise, lip corner pull, lip press
  static const std::vector<int> synthetic{1, 2, 12, 24};
  switch (set) {
    case AUSet::Bp4d: return bp4d;
    case AUSet::Fera: return fera;
    case AUSet::Synthetic: return synthetic;
  }
  return bp4d;
}

inline std::vector<AUCode> au_codes(AUSet set) {
  std::vector<AUCode> out;
  for (int v : au_values(set)) out.push_back({v});
  return out;
}

inline AUCode make_au(int value, AUSet set) {
  const auto& allowed = au_values(set);
  if (std::find(allowed.begin(), allowed.end(), value) == allowed.end())
    throw std::invalid_argument("AU" + std::to_string(value) + " is not in the active AU set");
  return {value};
}

// Accepts "12" or "AU12".
inline int parse_au_value(const std::string& s) {
  std::string digits = s;
  if (digits.size() > 2 && (digits.rfind("AU", 0) == 0 || digits.rfind("au", 0) == 0)) digits = digits.substr(2);
  std::size_t used = 0;
  int v = 0;
  try {
    v = std::stoi(digits, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("not an AU code: '" + s + "'");
  }
  if (used != digits.size() || v <= 0) throw std::invalid_argument("not an AU code: '" + s + "'");
  return v;
}

}  // namespace aunets
