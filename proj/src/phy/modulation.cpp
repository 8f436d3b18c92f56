#include "csiwb/phy/modulation.hpp"

#include <array>
#include <limits>

namespace csiwb::phy {

namespace {

// Per-axis Gray levels indexed by the axis bits read MSB-first.
constexpr std::array<double, 2> kLevels1{-1, 1};
constexpr std::array<double, 4> kLevels2{-3, -1, 3, 1};                 // 00 01 10 11
constexpr std::array<double, 8> kLevels3{-7, -5, -1, -3, 7, 5, 1, 3};  // 000..111

double axis_level(std::span<const std::uint8_t> bits, std::size_t n) {
  unsigned v = 0;
  for (std::size_t i = 0; i < n; ++i) v = (v << 1) | (bits[i] & 1u);
  switch (n) {
    case 1:
      return kLevels1[v];
    case 2:
      return kLevels2[v];
    default:
      return kLevels3[v];
  }
}

double norm_factor(Modulation mod) {
  switch (mod) {
    case Modulation::BPSK:
      return 1.0;
    case Modulation::QPSK:
      return 1.0 / std::sqrt(2.0);
    case Modulation::QAM16:
      return 1.0 / std::sqrt(10.0);
    case Modulation::QAM64:
      return 1.0 / std::sqrt(42.0);
  }
  return 1.0;
}

CVec build_constellation(Modulation mod) {
  const std::size_t nb = bits_per_symbol(mod);
  CVec pts(std::size_t{1} << nb);
  Bits bits(nb);
  for (std::size_t label = 0; label < pts.size(); ++label) {
    for (std::size_t b = 0; b < nb; ++b) bits[b] = static_cast<std::uint8_t>((label >> (nb - 1 - b)) & 1u);
    pts[label] = map_point(bits, mod);
  }
  return pts;
}

}  // namespace

std::size_t bits_per_symbol(Modulation mod) {
  switch (mod) {
    case Modulation::BPSK:
      return 1;
    case Modulation::QPSK:
      return 2;
    case Modulation::QAM16:
      return 4;
    case Modulation::QAM64:
      return 6;
  }
  return 1;
}

const char* to_string(Modulation mod) {
  switch (mod) {
    case Modulation::BPSK:
      return "BPSK";
    case Modulation::QPSK:
      return "QPSK";
    case Modulation::QAM16:
      return "16-QAM";
    case Modulation::QAM64:
      return "64-QAM";
  }
  return "?";
}

Complex map_point(std::span<const std::uint8_t> bits, Modulation mod) {
  const double k = norm_factor(mod);
  switch (mod) {
    case Modulation::BPSK:
      return {axis_level(bits, 1) * k, 0.0};
    case Modulation::QPSK:
      return {axis_level(bits, 1) * k, axis_level(bits.subspan(1), 1) * k};
    case Modulation::QAM16:
      return {axis_level(bits, 2) * k, axis_level(bits.subspan(2), 2) * k};
    case Modulation::QAM64:
      return {axis_level(bits, 3) * k, axis_level(bits.subspan(3), 3) * k};
  }
  return {};
}

const CVec& constellation(Modulation mod) {
  static const std::array<CVec, 4> tables{build_constellation(Modulation::BPSK),
                                          build_constellation(Modulation::QPSK),
                                          build_constellation(Modulation::QAM16),
                                          build_constellation(Modulation::QAM64)};
  return tables[static_cast<std::size_t>(mod)];
}

CVec map_qam(std::span<const std::uint8_t> bits, Modulation mod) {
  const std::size_t nb = bits_per_symbol(mod);
  if (bits.size() % nb != 0)
    throw DomainError("bit count " + std::to_string(bits.size()) + " is not a multiple of " + std::to_string(nb));
  CVec out(bits.size() / nb);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = map_point(bits.subspan(i * nb, nb), mod);
  return out;
}

Complex slice(Complex symbol, Modulation mod) {
  const auto& pts = constellation(mod);
  Complex best = pts[0];
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& p : pts) {
    double d = std::norm(symbol - p);
    if (d < best_d) {
      best_d = d;
      best = p;
    }
  }
  return best;
}

Bits demap_qam(std::span<const Complex> symbols, Modulation mod) {
  const auto& pts = constellation(mod);
  const std::size_t nb = bits_per_symbol(mod);
  Bits out;
  out.reserve(symbols.size() * nb);
  for (const auto& s : symbols) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t label = 0; label < pts.size(); ++label) {
      double d = std::norm(s - pts[label]);
      if (d < best_d) {
        best_d = d;
        best = label;
      }
    }
    for (std::size_t b = 0; b < nb; ++b) out.push_back(static_cast<std::uint8_t>((best >> (nb - 1 - b)) & 1u));
  }
  return out;
}

std::vector<double> demap_soft(std::span<const Complex> symbols, std::span<const double> reliability,
                               Modulation mod) {
  const auto& pts = constellation(mod);
  const std::size_t nb = bits_per_symbol(mod);
  std::vector<double> out;
  out.reserve(symbols.size() * nb);
  std::array<double, 64> dist{};
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    for (std::size_t label = 0; label < pts.size(); ++label) dist[label] = std::norm(symbols[i] - pts[label]);
    const double w = reliability.empty() ? 1.0 : reliability[i];
    for (std::size_t b = 0; b < nb; ++b) {
      double d0 = std::numeric_limits<double>::infinity();
      double d1 = d0;
      const std::size_t mask = std::size_t{1} << (nb - 1 - b);
      for (std::size_t label = 0; label < pts.size(); ++label) {
        if (label & mask)
          d1 = std::min(d1, dist[label]);
        else
          d0 = std::min(d0, dist[label]);
      }
      out.push_back(w * (d0 - d1));
    }
  }
  return out;
}

McsInfo mcs_info(int mcs, bool ht) {
  if (mcs < 0 || mcs > 7) throw DomainError("MCS must lie in [0,7]");
  static constexpr std::array<McsInfo, 8> kHt{{{Modulation::BPSK, CodeRate::R1_2},
                                              {Modulation::QPSK, CodeRate::R1_2},
                                              {Modulation::QPSK, CodeRate::R3_4},
                                              {Modulation::QAM16, CodeRate::R1_2},
                                              {Modulation::QAM16, CodeRate::R3_4},
                                              {Modulation::QAM64, CodeRate::R2_3},
                                              {Modulation::QAM64, CodeRate::R3_4},
                                              {Modulation::QAM64, CodeRate::R5_6}}};
  static constexpr std::array<McsInfo, 8> kLegacy{{{Modulation::BPSK, CodeRate::R1_2},
                                                  {Modulation::BPSK, CodeRate::R3_4},
                                                  {Modulation::QPSK, CodeRate::R1_2},
                                                  {Modulation::QPSK, CodeRate::R3_4},
                                                  {Modulation::QAM16, CodeRate::R1_2},
                                                  {Modulation::QAM16, CodeRate::R3_4},
                                                  {Modulation::QAM64, CodeRate::R2_3},
                                                  {Modulation::QAM64, CodeRate::R3_4}}};
  return ht ? kHt[static_cast<std::size_t>(mcs)] : kLegacy[static_cast<std::size_t>(mcs)];
}

}  // namespace csiwb::phy
