#include "csiwb/clocking.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <tuple>

#include "csiwb/common.hpp"

namespace csiwb::clocking {

namespace {

// Exact rational representation of a frequency in Hz.
struct Rational {
  std::int64_t num;
  std::int64_t den;
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

Rational pll_rational(const PllQuadruple& q) {
  validate(q);
  return {kXtalHzInt * q.div_int * (std::int64_t{1} << q.ht20_40),
          static_cast<std::int64_t>(q.ref_div) * (std::int64_t{1} << (2 + q.clk_sel))};
}

// bandwidth = f_pll * 20 / 88 = f_pll * 5 / 22
Rational bandwidth_rational(const PllQuadruple& q) {
  Rational pll = pll_rational(q);
  return {pll.num * 5, pll.den * 22};
}

struct TableRow {
  int div_int, ref_div, clk_sel;
};

constexpr std::array<TableRow, 7> kBandwidthTable{{
    {22, 10, 1}, {22, 10, 0}, {22, 5, 1}, {22, 5, 0}, {33, 5, 0}, {44, 5, 0}, {88, 5, 0}}};

// Carrier grid step numerators over 2^17: Band5G = 3 * f_xtal, Band2G4 = 3/4 * f_xtal.
std::int64_t step_numerator(Band band) {
  return band == Band::Band5G ? 3 * kXtalHzInt : 3 * kXtalHzInt / 4;
}

}  // namespace

std::string to_string(const PllQuadruple& q) {
  return "(" + std::to_string(q.div_int) + ", " + std::to_string(q.ref_div) + ", " +
         std::to_string(q.clk_sel) + ", " + std::to_string(q.ht20_40) + ")";
}

Band band_from_string(const std::string& text) {
  if (text == "2g4" || text == "2.4g" || text == "2g" || text == "2.4") return Band::Band2G4;
  if (text == "5g" || text == "5") return Band::Band5G;
  throw DomainError("unknown band '" + text + "' (expected 2g4 or 5g)");
}

const char* to_string(Band band) { return band == Band::Band5G ? "5g" : "2g4"; }

void validate(const PllQuadruple& q) {
  if (q.clk_sel < 0 || q.clk_sel > 2) throw DomainError("CLK_SEL must be 0, 1 or 2");
  if (q.ht20_40 < 0 || q.ht20_40 > 1) throw DomainError("HT20_40 must be 0 or 1");
  if (q.div_int < 1) throw DomainError("DIV_INT must be >= 1");
  if (q.ref_div < 1) throw DomainError("REF_DIV must be >= 1");
}

double pll_frequency(const PllQuadruple& quad) { return pll_rational(quad).value(); }

ClockSet derived_clocks(const PllQuadruple& quad) {
  Rational pll = pll_rational(quad);
  ClockSet clocks;
  clocks.f_pll = pll.value();
  clocks.f_digi_bb = Rational{pll.num, pll.den * 2}.value();
  clocks.f_rx_adc = clocks.f_pll;
  clocks.f_tx_dac = Rational{pll.num * 2, pll.den}.value();
  clocks.bandwidth = bandwidth_rational(quad).value();
  return clocks;
}

double bandwidth_for_quad(const PllQuadruple& quad) { return bandwidth_rational(quad).value(); }

bool is_documented_quad(const PllQuadruple& quad) {
  for (const auto& row : kBandwidthTable) {
    if (row.div_int == quad.div_int && row.ref_div == quad.ref_div && row.clk_sel == quad.clk_sel)
      return true;
  }
  return false;
}

PllQuadruple quad_for_bandwidth(double target_hz) {
  if (!(target_hz >= 2.5e6 && target_hz <= 80e6))
    throw DomainError("bandwidth must lie within [2.5 MHz, 80 MHz]");

  PllQuadruple best;
  // (distance, undocumented, ht20_40, ref_div, div_int, clk_sel)
  auto key_of = [&](const PllQuadruple& q, double dist) {
    return std::make_tuple(dist, !is_documented_quad(q), q.ht20_40, q.ref_div, q.div_int, q.clk_sel);
  };
  auto best_key = std::make_tuple(std::numeric_limits<double>::infinity(), true, 2, 0, 0, 0);

  for (int ref_div = 1; ref_div <= 10; ++ref_div) {
    for (int div_int = 1; div_int <= 255; ++div_int) {
      for (int clk_sel = 0; clk_sel <= 2; ++clk_sel) {
        for (int ht = 0; ht <= 1; ++ht) {
          PllQuadruple q{div_int, ref_div, clk_sel, ht};
          // |bw - target| compared on the exact rational to keep ties exact.
          Rational bw = bandwidth_rational(q);
          double dist = std::abs(static_cast<long double>(bw.num) -
                                 static_cast<long double>(target_hz) * bw.den) /
                        static_cast<long double>(bw.den);
          auto key = key_of(q, dist);
          if (key < best_key) {
            best_key = key;
            best = q;
          }
        }
      }
    }
  }
  return best;
}

double synth_frequency(std::uint32_t chansel) {
  return static_cast<double>(static_cast<std::int64_t>(chansel) * kXtalHzInt) /
         static_cast<double>(kSynthDenominator);
}

SynthesizerSetting synth_setting(std::uint32_t chansel, Band band) {
  SynthesizerSetting s;
  s.chansel = chansel;
  s.band = band;
  std::int64_t num = static_cast<std::int64_t>(chansel) * kXtalHzInt;
  s.f_syn = static_cast<double>(num) / static_cast<double>(kSynthDenominator);
  if (band == Band::Band2G4) {
    s.f_rf = static_cast<double>(num * 3) / static_cast<double>(kSynthDenominator * 4);
  } else {
    s.f_rf = static_cast<double>(num * 3) / static_cast<double>(kSynthDenominator * 2);
  }
  s.valid = s.f_syn >= 3.0e9 && s.f_syn <= 4.0e9;
  return s;
}

double carrier_step(Band band) {
  return static_cast<double>(step_numerator(band)) / static_cast<double>(kSynthDenominator);
}

double tuning_resolution(Resolution which) {
  switch (which) {
    case Resolution::Synthesizer:
      return synth_frequency(1);
    case Resolution::Band2G4:
      return carrier_step(Band::Band2G4);
    case Resolution::Band5G:
      return carrier_step(Band::Band5G);
    case Resolution::Band2G4Documented:
      return 203.3;
  }
  return 0.0;
}

double tuning_resolution(Band band) { return carrier_step(band); }

std::pair<double, double> carrier_range(Band band) {
  return band == Band::Band5G ? std::pair{4.5e9, 6.0e9} : std::pair{2.25e9, 3.0e9};
}

CarrierQuantization quantize_carrier(double target_hz, Band band) {
  auto [lo, hi] = carrier_range(band);
  if (!(target_hz >= lo && target_hz <= hi))
    throw DomainError("carrier " + std::to_string(target_hz) + " Hz outside the supported range of band " +
                      to_string(band));

  const std::int64_t step_num = step_numerator(band);
  const long double scaled = static_cast<long double>(target_hz) * kSynthDenominator;
  auto n = static_cast<std::int64_t>(std::floor(scaled / step_num));
  // grid point n sits at n * step_num / 2^17; fix any rounding in the floor.
  while (static_cast<long double>(n + 1) * step_num <= scaled) ++n;
  while (static_cast<long double>(n) * step_num > scaled) --n;

  auto grid_hz = [&](std::int64_t idx) {
    return static_cast<double>(idx * step_num) / static_cast<double>(kSynthDenominator);
  };

  CarrierQuantization q;
  q.step = carrier_step(band);
  const bool on_grid = static_cast<long double>(n) * step_num == scaled;
  q.lower = grid_hz(n);
  q.upper = on_grid ? q.lower : grid_hz(n + 1);
  if (on_grid) {
    q.chosen = q.lower;
    q.grid_index = n;
  } else {
    long double below = scaled - static_cast<long double>(n) * step_num;
    long double above = static_cast<long double>(n + 1) * step_num - scaled;
    q.grid_index = above < below ? n + 1 : n;
    q.chosen = grid_hz(q.grid_index);
  }
  return q;
}

std::optional<Band> band_for_carrier(double carrier_hz) {
  for (Band b : {Band::Band2G4, Band::Band5G}) {
    auto [lo, hi] = carrier_range(b);
    if (carrier_hz >= lo && carrier_hz <= hi) return b;
  }
  return std::nullopt;
}

}  // namespace csiwb::clocking
