#pragma once

// Front-end and channel impairment models.

#include <optional>
#include <span>
#include <string>

#include "csiwb/phy/frame.hpp"

namespace csiwb::imp {

using phy::BasebandBurst;

struct FilterSpec {
  int order = 2;
  double cutoff = 10e6;  // Hz
  bool enabled = true;

  bool operator==(const FilterSpec&) const = default;
};

struct IqMismatch {
  double gain_ratio = 1.0;
  double phase_deg = 0.0;

  bool operator==(const IqMismatch&) const = default;
};

struct Tap {
  std::size_t delay = 0;  // samples
  Complex gain{1.0, 0.0};

  bool operator==(const Tap&) const = default;
};

/// One propagation path of the RF channel.
struct Path {
  double delay = 0.0;  // seconds
  Complex gain{1.0, 0.0};
};

struct ImpairmentProfile {
  std::string name = "default20";
  bool dac_zoh = true;
  int dac_oversample = 1;
  double predistortion_overcomp = 2.5;  // alpha; 0 disables predistortion
  FilterSpec recon{2, 12e6, true};
  FilterSpec acr{5, 7.75e6, true};
  /// Sample rate the predistorter and analog filters were designed for.
  double design_rate = 20e6;
  /// When set, predistortion and filter cutoffs follow the working sample rate.
  bool track_clock = false;
  IqMismatch iq;
  double cfo = 0.0;  // Hz
  double sfo_ppm = 0.0;
  std::optional<double> snr_db;
  std::vector<Tap> multipath;
  std::optional<double> agc_target_rms;

  void validate() const;
  bool operator==(const ImpairmentProfile&) const = default;

  /// Every stage disabled.
  static ImpairmentProfile clean();
  /// Shipped front-end model for a 20 MHz or 40 MHz design.
  static ImpairmentProfile default_for(double design_rate);
};

/// Named built-in profiles: clean, default20, default40, tracked20.
ImpairmentProfile named_profile(const std::string& name);
/// key = value text config; unknown keys are errors.
ImpairmentProfile parse_profile(const std::string& text);
std::string format_profile(const ImpairmentProfile& profile);
/// A built-in name or a path to a config file.
ImpairmentProfile load_profile(const std::string& name_or_path);

// ---- stages ------------------------------------------------------------------

Complex dac_zoh_response(double f, double fs_dac);
/// (1/sinc(f/fs_dac))^alpha, held constant beyond |f| = fs_dac/2.
Complex predistortion_response(double f, double alpha, double fs_dac);

/// Second-order section b0 + b1 z^-1 + b2 z^-2 over 1 + a1 z^-1 + a2 z^-2.
struct Sos {
  double b0 = 1, b1 = 0, b2 = 0;
  double a1 = 0, a2 = 0;
};

/// Digital Butterworth low-pass (bilinear transform, prewarped cutoff).
struct Butterworth {
  std::vector<Sos> sections;
  double sample_rate = 1.0;

  Complex response(double f) const;
  CVec apply(std::span<const Complex> x) const;
};

Butterworth design_butterworth(int order, double cutoff, double sample_rate);
/// Analog prototype magnitude 1/sqrt(1 + (f/fc)^(2n)).
double butterworth_analog_magnitude(double f, double cutoff, int order);
/// Analog prototype complex response at f.
Complex butterworth_analog_response(double f, double cutoff, int order);

BasebandBurst butterworth_apply(const BasebandBurst& burst, int order, double cutoff);
BasebandBurst predistort(const BasebandBurst& burst, double alpha, double fs_dac);
BasebandBurst apply_dac_zoh(const BasebandBurst& burst, double fs_dac);
BasebandBurst apply_iq_mismatch(const BasebandBurst& burst, double gain_ratio, double phase_deg);
BasebandBurst apply_cfo(const BasebandBurst& burst, double hz);
BasebandBurst apply_sfo(const BasebandBurst& burst, double ppm);
BasebandBurst apply_awgn(const BasebandBurst& burst, double snr_db, std::uint64_t seed);
BasebandBurst apply_multipath(const BasebandBurst& burst, std::span<const Tap> taps);
BasebandBurst agc(const BasebandBurst& burst, double target_rms);
/// Frequency-selective RF channel H(f) = sum a exp(-j 2 pi (carrier + f) tau).
BasebandBurst apply_air_channel(const BasebandBurst& burst, std::span<const Path> paths, double carrier);
Complex air_channel_response(std::span<const Path> paths, double carrier, double f);

// ---- chains ------------------------------------------------------------------

/// Fraction of the sample rate up to which chain responses are applied exactly;
/// above it (empty guard band) the response is blended smoothly through Nyquist.
inline constexpr double kDefaultBandEdge = 60.5 / 128.0;

/// predistortion -> DAC hold -> reconstruction filter, applied as one
/// equivalent response at the burst rate.
BasebandBurst tx_chain(const BasebandBurst& burst, const ImpairmentProfile& profile,
                       std::optional<double> band_edge = std::nullopt);
/// ACR filter -> I/Q mismatch -> AGC.
BasebandBurst rx_chain(const BasebandBurst& burst, const ImpairmentProfile& profile,
                       std::optional<double> band_edge = std::nullopt);
/// multipath -> SFO -> CFO (plus `extra_cfo`) -> AWGN.
BasebandBurst channel(const BasebandBurst& burst, const ImpairmentProfile& profile, double extra_cfo,
                      std::uint64_t seed);

/// Linear responses of the chains at baseband frequency f for working rate fs.
Complex tx_response(double f, double fs, const ImpairmentProfile& profile);
Complex rx_response(double f, double fs, const ImpairmentProfile& profile);

}  // namespace csiwb::imp
