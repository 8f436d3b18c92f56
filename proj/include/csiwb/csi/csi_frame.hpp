#pragma once

#include <string>

#include "csiwb/common.hpp"
#include "csiwb/grid.hpp"

namespace csiwb::csi {

struct SourceMeta {
  std::string tx_id = "tx";
  std::string rx_id = "rx";
  int mcs = 0;
  int seed = 0;

  bool operator==(const SourceMeta&) const = default;
};

/// Per-packet CSI: one complex value per grid index plus capture metadata.
struct CsiFrame {
  CVec values;
  SubcarrierGrid grid;
  double center_freq = 0.0;
  double bandwidth = 20e6;
  ChannelMode channel_mode = ChannelMode::HT20;
  double timestamp = 0.0;  // seconds, virtual
  SourceMeta source;

  /// Throws DomainError when values and grid disagree or entries are not finite.
  void validate() const;
  /// Value at signed subcarrier `index`; throws when absent.
  Complex at(int index) const;
  /// Absolute RF frequency of the tone at `position` in the grid.
  double tone_frequency(std::size_t position) const {
    return center_freq + grid.spacing * grid.indices[position];
  }
};

/// Identity of a Tx/Rx/channel-mode/bandwidth combination sharing one template.
struct ComboKey {
  std::string tx_id;
  std::string rx_id;
  ChannelMode channel_mode = ChannelMode::HT20;
  double bandwidth = 20e6;

  bool operator==(const ComboKey&) const = default;
};

ComboKey combo_key_of(const CsiFrame& frame);

}  // namespace csiwb::csi
