#pragma once

#include <optional>

#include "csiwb/csi/csi_frame.hpp"
#include "csiwb/phy/frame.hpp"

namespace csiwb::phy {

struct RxConfig {
  Format format = Format::HT;
  ChannelMode channel_mode = ChannelMode::HT20;
  /// Expect a 20 MHz frame in the primary half of an HT40+/- band.
  bool ht20_peer = false;
  /// Common pilot phase tracking while decoding.
  bool pilot_tracking = true;
  double detect_threshold = 0.75;
  /// Consecutive lags above threshold, in 20 MHz samples (scaled with FFT size).
  std::size_t detect_run = 16;
  /// FFT windows start this many 20 MHz samples early, inside the cyclic prefix.
  std::size_t window_backoff = 3;
  /// Guard interval of NonHT data symbols; L-SIG has no field for it.
  GuardInterval nonht_guard = GuardInterval::Long;
};

/// Decoded SIGNAL field contents.
struct SignalInfo {
  Format format = Format::HT;
  int mcs = 0;
  std::size_t psdu_length = 0;  // bytes including FCS
  GuardInterval guard = GuardInterval::Long;
  int n_ess = 0;
  bool cbw40 = false;
  bool lsig_ok = false;
  bool htsig_ok = false;
};

struct RxResult {
  csi::CsiFrame csi;
  std::vector<std::uint8_t> payload;  // PSDU without FCS
  bool fcs_ok = false;
  double cfo_preamble = 0.0;  // Hz
  double evm_db = 0.0;
  /// H_i^d = Y_i / X_i per data symbol, no pilot tracking, preamble CFO phase kept.
  std::vector<CVec> data_symbol_csi;
  /// Same train with per-symbol common pilot phase removed.
  std::vector<CVec> data_symbol_csi_tracked;
  double sym_duration = 4e-6;
  SignalInfo signal;
  int scrambler_seed = 0;
  std::size_t offset = 0;
};

/// Failure stage plus whatever was recovered before it.
struct RxDiagnostics {
  std::string stage;
  std::optional<std::size_t> offset;
  std::optional<double> cfo;
  std::optional<SignalInfo> signal;
};

class RxError : public std::runtime_error {
 public:
  RxError(const std::string& what, RxDiagnostics diag) : std::runtime_error(what), diag_(std::move(diag)) {}
  const RxDiagnostics& diagnostics() const { return diag_; }

 private:
  RxDiagnostics diag_;
};

/// Layout of the frame a receiver configured with `cfg` expects (MCS 0, long GI).
FrameLayout rx_layout(const RxConfig& cfg);

/// Frame start (first L-STF sample) or nullopt.
std::optional<std::size_t> detect_packet(const BasebandBurst& burst, const RxConfig& cfg);

/// Coarse (L-STF, N/4 lag) plus fine (L-LTF, N lag) CFO estimate in Hz.
double estimate_cfo_preamble(const BasebandBurst& burst, std::size_t offset, const RxConfig& cfg);

/// Multiplies sample n by exp(-j 2 pi cfo n / fs).
BasebandBurst correct_cfo(const BasebandBurst& burst, double cfo);

/// Decodes L-SIG (and HT-SIG for HT). Throws RxError on failure.
SignalInfo decode_signal(const BasebandBurst& burst, std::size_t offset, const RxConfig& cfg);

/// H = Y/X on the training tones (HT-LTF for HT, L-LTF for NonHT).
csi::CsiFrame estimate_csi(const BasebandBurst& burst, std::size_t offset, const RxConfig& cfg);

/// Equalizes and decodes the data field. `cfo_applied` is the correction
/// already applied to `burst`; it is put back into the data CSI train.
RxResult equalize_and_decode(const BasebandBurst& burst, std::size_t offset, const csi::CsiFrame& csi,
                             const RxConfig& cfg, double cfo_applied = 0.0);

/// Full chain: detect, CFO, CSI, decode. Throws RxError when nothing decodable is found.
RxResult receive(const BasebandBurst& burst, const RxConfig& cfg);

}  // namespace csiwb::phy
