#include <algorithm>

#include "csiwb/common.hpp"
#include "csiwb/grid.hpp"

namespace csiwb {

const char* to_string(ChannelMode mode) {
  switch (mode) {
    case ChannelMode::HT20:
      return "HT20";
    case ChannelMode::HT40Plus:
      return "HT40+";
    case ChannelMode::HT40Minus:
      return "HT40-";
  }
  return "?";
}

ChannelMode channel_mode_from_string(const std::string& text) {
  std::string t = text;
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::toupper(c); });
  if (t == "HT20") return ChannelMode::HT20;
  if (t == "HT40+" || t == "HT40PLUS") return ChannelMode::HT40Plus;
  if (t == "HT40-" || t == "HT40MINUS") return ChannelMode::HT40Minus;
  throw DomainError("unknown channel mode '" + text + "'");
}

std::vector<int> SubcarrierGrid::data_indices() const {
  std::vector<int> out;
  out.reserve(indices.size());
  for (int k : indices) {
    if (std::find(pilot_indices.begin(), pilot_indices.end(), k) == pilot_indices.end()) out.push_back(k);
  }
  return out;
}

int SubcarrierGrid::position_of(int index) const {
  auto it = std::lower_bound(indices.begin(), indices.end(), index);
  if (it == indices.end() || *it != index) return -1;
  return static_cast<int>(it - indices.begin());
}

SubcarrierGrid SubcarrierGrid::shifted(int offset) const {
  SubcarrierGrid g = *this;
  for (int& k : g.indices) k += offset;
  for (int& k : g.pilot_indices) k += offset;
  return g;
}

namespace {

SubcarrierGrid make_grid(int lo_gap, int hi, std::vector<int> pilots) {
  SubcarrierGrid g;
  for (int k = -hi; k <= -lo_gap; ++k) g.indices.push_back(k);
  for (int k = lo_gap; k <= hi; ++k) g.indices.push_back(k);
  g.pilot_indices = std::move(pilots);
  return g;
}

}  // namespace

SubcarrierGrid grid_nonht() { return make_grid(1, 26, {-21, -7, 7, 21}); }
SubcarrierGrid grid_ht20() { return make_grid(1, 28, {-21, -7, 7, 21}); }
SubcarrierGrid grid_ht40() { return make_grid(2, 58, {-53, -25, -11, 11, 25, 53}); }

}  // namespace csiwb
