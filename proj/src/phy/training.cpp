#include "training.hpp"

#include <array>

namespace csiwb::phy::detail {

namespace {

// L-LTF for tones -26..26 (DC zero).
constexpr std::array<int, 53> kLltf{1,  1,  -1, -1, 1,  1,  -1, 1,  -1, 1,  1,  1,  1,  1,  1,  -1, -1, 1,
                                    1,  -1, 1,  -1, 1,  1,  1,  1,  0,  1,  -1, -1, 1,  1,  -1, 1,  -1, 1,
                                    -1, -1, -1, -1, -1, 1,  1,  -1, -1, 1,  -1, 1,  -1, 1,  1,  1,  1};

const std::vector<int>& htltf40() {
  static const std::vector<int> seq = [] {
    std::vector<int> s;
    auto append_core = [&s] {
      for (int k = -26; k <= 26; ++k) s.push_back(k == 0 ? 1 : kLltf[static_cast<std::size_t>(k + 26)]);
    };
    append_core();
    s.insert(s.end(), {-1, -1, -1, 1, 0, 0, 0, -1, 1, 1, -1});
    append_core();
    return s;  // tones -58..58
  }();
  return seq;
}

Complex lstf_value(int k) {
  static const double a = std::sqrt(13.0 / 6.0);
  const Complex p{a, a};
  switch (k) {
    case -24:
    case -16:
    case -4:
    case 12:
    case 16:
    case 20:
    case 24:
      return p;
    case -20:
    case -12:
    case -8:
    case 4:
    case 8:
      return -p;
    default:
      return {};
  }
}

}  // namespace

ToneSet lstf_tones(const FrameLayout& layout) {
  ToneSet t;
  for (const auto& band : layout.legacy_bands) {
    for (int k = -24; k <= 24; k += 4) {
      if (k == 0) continue;
      t.indices.push_back(k + band.offset);
      t.values.push_back(lstf_value(k) * band.rotation);
    }
  }
  return t;
}

ToneSet lltf_tones(const FrameLayout& layout) {
  ToneSet t;
  for (const auto& band : layout.legacy_bands) {
    for (int k = -26; k <= 26; ++k) {
      if (k == 0) continue;
      t.indices.push_back(k + band.offset);
      t.values.push_back(static_cast<double>(kLltf[static_cast<std::size_t>(k + 26)]) * band.rotation);
    }
  }
  return t;
}

ToneSet htltf_tones(const FrameLayout& layout) {
  ToneSet t;
  for (int k : layout.grid.indices) {
    t.indices.push_back(k);
    const int local = k - layout.frame_offset;
    double v = 0.0;
    if (layout.frame_is_40mhz) {
      v = htltf40()[static_cast<std::size_t>(local + 58)];
    } else if (local == -28 || local == -27) {
      v = 1.0;
    } else if (local == 27 || local == 28) {
      v = -1.0;
    } else {
      v = kLltf[static_cast<std::size_t>(local + 26)];
    }
    t.values.emplace_back(v, 0.0);
  }
  return t;
}

ToneSet signal_tones(const FrameLayout& layout, std::span<const std::uint8_t> coded48, std::size_t pilot_n,
                     bool qbpsk) {
  static const SubcarrierGrid legacy = grid_nonht();
  Bits inter = interleave(coded48, InterleaverKind::Legacy, 1);
  const double p = pilot_polarity(pilot_n);
  ToneSet t;
  for (const auto& band : layout.legacy_bands) {
    std::size_t d = 0;
    for (int k : legacy.indices) {
      Complex v;
      if (k == -21 || k == -7 || k == 7) {
        v = p;
      } else if (k == 21) {
        v = -p;
      } else {
        v = inter[d++] ? 1.0 : -1.0;
        if (qbpsk) v *= Complex{0.0, 1.0};
      }
      t.indices.push_back(k + band.offset);
      t.values.push_back(v * band.rotation);
    }
  }
  return t;
}

CVec data_pilots(const FrameLayout& layout, std::size_t n) {
  const std::size_t np = layout.grid.pilot_indices.size();
  CVec out(np);
  if (layout.format == Format::NonHT) {
    static constexpr std::array<double, 4> base{1, 1, 1, -1};
    const double p = pilot_polarity(n + 1);
    for (std::size_t i = 0; i < np; ++i) out[i] = base[i] * p;
    return out;
  }
  const double p = pilot_polarity(n + 3);
  if (np == 4) {
    static constexpr std::array<double, 4> psi{1, 1, 1, -1};
    for (std::size_t i = 0; i < 4; ++i) out[i] = psi[(i + n) % 4] * p;
  } else {
    static constexpr std::array<double, 6> psi{1, 1, 1, -1, -1, 1};
    for (std::size_t i = 0; i < 6; ++i) out[i] = psi[(i + n) % 6] * p;
  }
  return out;
}

Bits lsig_bits(int rate_code, std::size_t length) {
  Bits b(24, 0);
  for (int i = 0; i < 4; ++i) b[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>((rate_code >> (3 - i)) & 1);
  for (int i = 0; i < 12; ++i) b[static_cast<std::size_t>(5 + i)] = static_cast<std::uint8_t>((length >> i) & 1u);
  unsigned parity = 0;
  for (int i = 0; i < 17; ++i) parity ^= b[static_cast<std::size_t>(i)];
  b[17] = static_cast<std::uint8_t>(parity);
  return b;
}

std::uint8_t htsig_crc(std::span<const std::uint8_t> bits34) {
  unsigned c = 0xff;
  for (auto bit : bits34) {
    const unsigned fb = ((c >> 7) & 1u) ^ (bit & 1u);
    c = (c << 1) & 0xffu;
    if (fb) c ^= 0x07u;
  }
  return static_cast<std::uint8_t>(~c & 0xffu);
}

Bits htsig_bits(int mcs, bool cbw40, std::size_t length, bool short_gi, int n_ess) {
  Bits b(48, 0);
  for (int i = 0; i < 7; ++i) b[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>((mcs >> i) & 1);
  b[7] = cbw40 ? 1 : 0;
  for (int i = 0; i < 16; ++i) b[static_cast<std::size_t>(8 + i)] = static_cast<std::uint8_t>((length >> i) & 1u);
  b[24] = 1;  // smoothing
  b[25] = 1;  // not sounding
  b[26] = 1;  // reserved
  b[31] = short_gi ? 1 : 0;
  b[32] = static_cast<std::uint8_t>(n_ess & 1);
  b[33] = static_cast<std::uint8_t>((n_ess >> 1) & 1);
  const std::uint8_t crc = htsig_crc(std::span<const std::uint8_t>(b).first(34));
  for (int i = 0; i < 8; ++i) b[static_cast<std::size_t>(34 + i)] = static_cast<std::uint8_t>((crc >> (7 - i)) & 1u);
  return b;
}

int legacy_rate_code(int mcs) {
  static constexpr std::array<int, 8> codes{0b1101, 0b1111, 0b0101, 0b0111, 0b1001, 0b1011, 0b0001, 0b0011};
  if (mcs < 0 || mcs > 7) throw DomainError("NonHT rate index must lie in [0,7]");
  return codes[static_cast<std::size_t>(mcs)];
}

int legacy_mcs_from_rate_code(int code) {
  for (int m = 0; m < 8; ++m) {
    if (legacy_rate_code(m) == code) return m;
  }
  return -1;
}

std::size_t ht_lsig_length(const FrameLayout& layout, std::size_t n_sym, int n_ess) {
  // Durations in units of 0.4 us (one short-GI symbol is 9 units).
  const std::size_t sym_units = layout.cp_data < layout.cp_long ? 9 : 10;
  const std::size_t data_units = n_sym * sym_units;
  const std::size_t data_us = 4 * ((data_units * 4 + 39) / 40);  // rounded up to 4 us
  const std::size_t txtime = 20 + 8 + 4 + 4 * static_cast<std::size_t>(1 + n_ess) + data_us;
  const std::size_t len = ((txtime - 20 + 3) / 4) * 3 - 3;
  return std::min<std::size_t>(len, 4095);
}

std::vector<CVec> data_symbols(std::span<const std::uint8_t> psdu, const FrameLayout& layout, int seed) {
  const std::size_t n_sym = data_symbol_count(psdu.size(), layout);
  Bits bits(n_sym * layout.n_dbps, 0);
  Bits payload_bits = bytes_to_bits(psdu);
  std::copy(payload_bits.begin(), payload_bits.end(), bits.begin() + 16);
  Bits scrambled = scramble(seed, bits);
  const std::size_t tail = 16 + payload_bits.size();
  for (std::size_t i = tail; i < tail + 6; ++i) scrambled[i] = 0;
  Bits coded = bcc_encode(scrambled, layout.mcs.rate);

  std::vector<CVec> out(n_sym);
  for (std::size_t n = 0; n < n_sym; ++n) {
    std::span<const std::uint8_t> block(coded.data() + n * layout.n_cbps, layout.n_cbps);
    Bits inter = interleave(block, layout.interleaver, layout.n_bpsc);
    CVec mapped = map_qam(inter, layout.mcs.modulation);
    CVec pilots = data_pilots(layout, n);
    CVec sym(layout.grid.size());
    std::size_t d = 0;
    std::size_t p = 0;
    for (std::size_t pos = 0; pos < layout.grid.size(); ++pos) {
      const int k = layout.grid.indices[pos];
      if (p < layout.grid.pilot_indices.size() && layout.grid.pilot_indices[p] == k)
        sym[pos] = pilots[p++];
      else
        sym[pos] = mapped[d++];
    }
    out[n] = std::move(sym);
  }
  return out;
}

}  // namespace csiwb::phy::detail
