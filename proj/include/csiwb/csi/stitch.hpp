#pragma once

#include <span>

#include "csiwb/csi/csi_frame.hpp"

namespace csiwb::csi {

/// Frequencies closer than this are the same tone.
inline constexpr double kToneMatchHz = 1.0;

struct OverlapResidual {
  double mag_db_rms = 0.0;
  double phase_rad_rms = 0.0;
  std::size_t n_tones = 0;  // overlapping tone comparisons pooled
};

struct StitchResult {
  std::vector<double> freq;  // Hz, strictly increasing
  CVec values;
  OverlapResidual overlap_residual;
};

/// Merges CSI from adjacent, partially overlapping channels. Frames are sorted
/// by center frequency; each is aligned to the wideband built so far with one
/// gain and a linear phase (offset + slope over frequency) fitted on the shared
/// tones, then shared tones are averaged. Throws when neighbours share no tone.
StitchResult stitch(std::span<const CsiFrame> frames);

/// Absolute frequencies present in both frames.
std::vector<double> shared_tone_frequencies(const CsiFrame& a, const CsiFrame& b);

}  // namespace csiwb::csi
