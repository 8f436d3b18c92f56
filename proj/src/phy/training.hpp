#pragma once

// Internal: training-field and SIGNAL tone sets shared by Tx and Rx.

#include "csiwb/phy/frame.hpp"

namespace csiwb::phy::detail {

struct ToneSet {
  std::vector<int> indices;
  CVec values;
};

/// L-STF tones over every legacy band (also used as the HT-STF).
ToneSet lstf_tones(const FrameLayout& layout);
/// L-LTF tones over every legacy band.
ToneSet lltf_tones(const FrameLayout& layout);
/// HT-LTF tones over the HT grid of the frame.
ToneSet htltf_tones(const FrameLayout& layout);

/// One 48-bit BPSK (or QBPSK) coded SIGNAL symbol duplicated over every
/// legacy band, with legacy pilots of polarity index `pilot_n`.
ToneSet signal_tones(const FrameLayout& layout, std::span<const std::uint8_t> coded48, std::size_t pilot_n,
                     bool qbpsk);

/// Pilot values of HT/NonHT data symbol `n`, ordered as layout.grid.pilot_indices.
CVec data_pilots(const FrameLayout& layout, std::size_t n);

/// SIGNAL field payload bits.
Bits lsig_bits(int rate_code, std::size_t length);
Bits htsig_bits(int mcs, bool cbw40, std::size_t length, bool short_gi, int n_ess);
std::uint8_t htsig_crc(std::span<const std::uint8_t> bits34);
/// 4-bit L-SIG rate code (R1 first, packed MSB = R1) for NonHT MCS index.
int legacy_rate_code(int mcs);
int legacy_mcs_from_rate_code(int code);
/// L-SIG length for an HT frame (spoofed duration).
std::size_t ht_lsig_length(const FrameLayout& layout, std::size_t n_sym, int n_ess);

/// Encoded, interleaved and mapped data symbols (grid order, pilots included).
std::vector<CVec> data_symbols(std::span<const std::uint8_t> psdu, const FrameLayout& layout, int seed);

}  // namespace csiwb::phy::detail
