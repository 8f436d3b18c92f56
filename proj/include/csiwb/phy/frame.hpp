#pragma once

// 802.11a/g (NonHT) and 802.11n HT-mixed single-stream frame assembly.

#include <span>

#include "csiwb/common.hpp"
#include "csiwb/grid.hpp"
#include "csiwb/phy/coding.hpp"
#include "csiwb/phy/modulation.hpp"

namespace csiwb::phy {

enum class Format { NonHT, HT };
enum class GuardInterval { Long, Short };

const char* to_string(Format format);
const char* to_string(GuardInterval guard);

struct FrameConfig {
  Format format = Format::HT;
  ChannelMode channel_mode = ChannelMode::HT20;
  int mcs = 0;
  GuardInterval guard = GuardInterval::Long;
  int scrambler_seed = 93;
  int n_ess = 0;
  /// HT40+/- NIC talking to an HT20 peer: a 20 MHz frame placed in the
  /// primary half of the 40 MHz band, the other half left empty.
  bool ht20_peer = false;
  std::vector<std::uint8_t> payload;

  void validate() const;
};

/// Complex baseband samples; unit of Tx/Rx exchange.
struct BasebandBurst {
  CVec samples;
  double sample_rate = 20e6;
  double center_freq = 0.0;  // annotation only

  std::size_t size() const { return samples.size(); }
};

/// A 20 MHz legacy sub-band inside the FFT: tone offset and phase rotation.
struct LegacyBand {
  int offset = 0;
  Complex rotation{1.0, 0.0};
};

/// Everything the Tx and Rx need to agree on about the frame shape.
struct FrameLayout {
  Format format = Format::HT;
  ChannelMode channel_mode = ChannelMode::HT20;
  bool ht20_peer = false;
  bool frame_is_40mhz = false;  // native HT40 frame (CBW = 40)
  std::size_t fft_size = 64;
  std::size_t cp_long = 16;
  std::size_t cp_data = 16;
  double norm = 1.0;  // time-domain scale 1/sqrt(52 * N/64)
  std::vector<LegacyBand> legacy_bands;
  int frame_offset = 0;           // tone offset of a 20 MHz frame inside the FFT
  SubcarrierGrid grid;            // data + pilot tones of data symbols / CSI grid
  InterleaverKind interleaver = InterleaverKind::HT20;
  McsInfo mcs{Modulation::BPSK, CodeRate::R1_2};
  int mcs_index = 0;
  std::size_t n_sd = 52;  // data subcarriers
  std::size_t n_bpsc = 1;
  std::size_t n_cbps = 52;
  std::size_t n_dbps = 26;
  std::size_t rx_backoff = 0;  // receiver FFT window advance into the CP

  std::size_t legacy_preamble_samples() const { return 5 * fft_size; }  // L-STF + L-LTF
  std::size_t symbol_samples(bool data) const { return fft_size + (data ? cp_data : cp_long); }
  /// Sample index (from frame start) of the first HT-LTF; 0 for NonHT.
  std::size_t ht_ltf_start() const { return 10 * fft_size; }
  std::size_t data_start(int n_ess) const;
};

FrameLayout make_layout(Format format, ChannelMode mode, bool ht20_peer, int mcs, GuardInterval guard);
FrameLayout make_layout(const FrameConfig& cfg);

/// Number of data OFDM symbols for a PSDU of `psdu_bytes` (payload + FCS).
std::size_t data_symbol_count(std::size_t psdu_bytes, const FrameLayout& layout);
/// Total burst length in samples of a frame.
std::size_t frame_sample_count(const FrameConfig& cfg);
/// Largest payload (excluding the 4-byte FCS) one PPDU can carry.
std::size_t max_payload_bytes(Format format);

BasebandBurst assemble_frame(const FrameConfig& cfg);

/// Frequency-domain data symbols X_i (data + pilot tones over layout.grid,
/// ascending index order) the transmitter maps for `payload` under `cfg`.
std::vector<CVec> regenerate_symbols(std::span<const std::uint8_t> payload, const FrameConfig& cfg);

/// Pilot polarity p_n (+-1), n taken modulo 127.
int pilot_polarity(std::size_t n);

// ---- OFDM symbol helpers -------------------------------------------------

/// Places `values` at signed tone `indices` of an N-point FFT and returns
/// the N time samples scaled by `norm`.
CVec ofdm_modulate(std::span<const int> indices, std::span<const Complex> values, std::size_t fft_size,
                   double norm);
/// Inverse of ofdm_modulate for one N-sample window.
CVec ofdm_demodulate(std::span<const Complex> window, std::span<const int> indices, std::size_t fft_size,
                     double norm);
/// Prepends the last `cp` samples.
CVec add_cyclic_prefix(std::span<const Complex> symbol, std::size_t cp);

// ---- sub-band placement ------------------------------------------------

/// Moves a 20 MHz burst into the primary half of an HT40+/- band (40 MHz).
BasebandBurst place_in_primary(const BasebandBurst& burst20, ChannelMode mode);
/// Extracts the primary 20 MHz half of an HT40+/- burst.
BasebandBurst extract_primary(const BasebandBurst& burst40, ChannelMode mode);

}  // namespace csiwb::phy
