#pragma once

#include <span>

#include "csiwb/common.hpp"
#include "csiwb/phy/coding.hpp"

namespace csiwb::phy {

enum class Modulation { BPSK, QPSK, QAM16, QAM64 };

std::size_t bits_per_symbol(Modulation mod);
const char* to_string(Modulation mod);

/// Gray-coded, unit-average-power constellation point for `bits_per_symbol`
/// bits starting at `bits[0]` (first bit drives the in-phase axis MSB).
Complex map_point(std::span<const std::uint8_t> bits, Modulation mod);
CVec map_qam(std::span<const std::uint8_t> bits, Modulation mod);
/// Hard-decision demapper; inverse of map_qam.
Bits demap_qam(std::span<const Complex> symbols, Modulation mod);
/// Max-log soft bits (positive favours 1) scaled by per-symbol reliability.
std::vector<double> demap_soft(std::span<const Complex> symbols, std::span<const double> reliability,
                               Modulation mod);
/// Nearest constellation point.
Complex slice(Complex symbol, Modulation mod);
/// All constellation points, indexed by their bit label read MSB-first.
const CVec& constellation(Modulation mod);

/// Rate/modulation of one MCS index (0-7). HT indices use the 802.11n single
/// stream table; NonHT indices enumerate the 6..54 Mb/s legacy rates.
struct McsInfo {
  Modulation modulation;
  CodeRate rate;
};

McsInfo mcs_info(int mcs, bool ht);

}  // namespace csiwb::phy
