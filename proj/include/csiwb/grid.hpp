#pragma once

#include <vector>

#include "csiwb/common.hpp"

namespace csiwb {

inline constexpr double kNominalSpacingHz = 312.5e3;

/// Signed subcarrier indices carrying data or pilots, sorted ascending.
struct SubcarrierGrid {
  std::vector<int> indices;
  std::vector<int> pilot_indices;
  double spacing = kNominalSpacingHz;

  std::size_t size() const { return indices.size(); }
  std::vector<int> data_indices() const;
  /// Position of `index` in `indices`, or -1.
  int position_of(int index) const;
  bool contains(int index) const { return position_of(index) >= 0; }
  /// Same grid moved by `offset` tones.
  SubcarrierGrid shifted(int offset) const;

  bool operator==(const SubcarrierGrid&) const = default;
};

/// 802.11a/g legacy grid: -26..-1, 1..26; pilots at +-7, +-21.
SubcarrierGrid grid_nonht();
/// HT20 grid: -28..-1, 1..28; pilots at +-7, +-21.
SubcarrierGrid grid_ht20();
/// HT40 grid: -58..-2, 2..58; pilots at +-11, +-25, +-53.
SubcarrierGrid grid_ht40();

}  // namespace csiwb
