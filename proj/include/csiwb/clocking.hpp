#pragma once

// Baseband clocking and carrier synthesis arithmetic of a QCA9300-class NIC.
//
// All frequencies are computed as exact rationals (integer numerator over a
// power-of-two / small-integer denominator) and converted to double once, so
// table reproduction is bit-stable.

#include <cstdint>
#include <optional>
#include <string>

namespace csiwb::clocking {

inline constexpr double kXtalHz = 40e6;
inline constexpr std::int64_t kXtalHzInt = 40'000'000;
inline constexpr std::int64_t kSynthDenominator = 1 << 17;

/// PLL tuning parameters (DIV_INT, REF_DIV, CLK_SEL, HT20_40).
struct PllQuadruple {
  int div_int = 44;
  int ref_div = 5;
  int clk_sel = 0;
  int ht20_40 = 0;

  bool operator==(const PllQuadruple&) const = default;
};

std::string to_string(const PllQuadruple& quad);

struct ClockSet {
  double f_pll = 0.0;
  double f_digi_bb = 0.0;
  double f_rx_adc = 0.0;
  double f_tx_dac = 0.0;
  double bandwidth = 0.0;
};

enum class Band { Band2G4, Band5G };

Band band_from_string(const std::string& text);
const char* to_string(Band band);

struct SynthesizerSetting {
  std::uint32_t chansel = 0;
  Band band = Band::Band5G;
  double f_syn = 0.0;
  double f_rf = 0.0;
  /// True when f_syn lies in the VCO's 3.0-4.0 GHz operating range.
  bool valid = false;
};

struct CarrierQuantization {
  double lower = 0.0;
  double upper = 0.0;
  double chosen = 0.0;
  double step = 0.0;
  /// Index of `chosen` on the band's carrier grid (chosen = grid_index * step).
  std::int64_t grid_index = 0;
};

/// Throws DomainError unless the quadruple invariants hold.
void validate(const PllQuadruple& quad);

double pll_frequency(const PllQuadruple& quad);
ClockSet derived_clocks(const PllQuadruple& quad);
double bandwidth_for_quad(const PllQuadruple& quad);

/// True for the (quadruple, HT20_40) rows documented in the bandwidth table.
bool is_documented_quad(const PllQuadruple& quad);

/// Inverse of the bandwidth table: the quadruple whose bandwidth is closest to
/// `target_hz` over div_int in [1,255], ref_div in [1,10]. Ties prefer
/// documented table rows, then HT20_40 = 0, then smaller ref_div, smaller
/// div_int and smaller clk_sel.
PllQuadruple quad_for_bandwidth(double target_hz);

double synth_frequency(std::uint32_t chansel);
SynthesizerSetting synth_setting(std::uint32_t chansel, Band band);

/// Carrier grid step of a band (see tuning_resolution).
double carrier_step(Band band);

enum class Resolution { Synthesizer, Band2G4, Band5G, Band2G4Documented };

/// Minimal tuning resolution. Band5G = 3*f_xtal/2^17 (matches the 5.2 GHz
/// example), Band2G4 = (3/4)*f_xtal/2^17 by the 2.4 GHz mixing plan.
/// Band2G4Documented is the 203.3 Hz figure listed for the band, which the
/// mixing plan does not reproduce; it is surfaced but never used.
double tuning_resolution(Resolution which);
double tuning_resolution(Band band);

/// Supported carrier range of a band, inclusive.
std::pair<double, double> carrier_range(Band band);

CarrierQuantization quantize_carrier(double target_hz, Band band);

/// Band guess from a carrier frequency (2.25-3.0 GHz or 4.5-6.0 GHz).
std::optional<Band> band_for_carrier(double carrier_hz);

}  // namespace csiwb::clocking
