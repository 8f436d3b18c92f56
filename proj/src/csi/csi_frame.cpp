#include "csiwb/csi/csi_frame.hpp"

namespace csiwb::csi {

void CsiFrame::validate() const {
  if (values.size() != grid.size())
    throw DomainError("CSI frame holds " + std::to_string(values.size()) + " values for a grid of " +
                      std::to_string(grid.size()) + " subcarriers");
  for (const auto& v : values) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) throw DomainError("CSI frame holds a non-finite value");
  }
  if (!(bandwidth > 0.0) || !(grid.spacing > 0.0)) throw DomainError("CSI frame bandwidth and spacing must be positive");
}

Complex CsiFrame::at(int index) const {
  const int pos = grid.position_of(index);
  if (pos < 0 || static_cast<std::size_t>(pos) >= values.size())
    throw DomainError("subcarrier " + std::to_string(index) + " is not on the frame grid");
  return values[static_cast<std::size_t>(pos)];
}

ComboKey combo_key_of(const CsiFrame& frame) {
  return {frame.source.tx_id, frame.source.rx_id, frame.channel_mode, frame.bandwidth};
}

}  // namespace csiwb::csi
