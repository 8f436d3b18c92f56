#include "csiwb/phy/coding.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <limits>

namespace csiwb::phy {

// ---- scrambler -------------------------------------------------------------

Bits scrambler_sequence(int seed, std::size_t length) {
  if (seed < 1 || seed > 127) throw DomainError("scrambler seed must lie in [1,127]");
  Bits out(length);
  unsigned state = static_cast<unsigned>(seed);
  for (std::size_t i = 0; i < length; ++i) {
    unsigned fb = ((state >> 6) ^ (state >> 3)) & 1u;
    state = ((state << 1) | fb) & 0x7fu;
    out[i] = static_cast<std::uint8_t>(fb);
  }
  return out;
}

Bits scramble(int seed, std::span<const std::uint8_t> bits) {
  Bits out = scrambler_sequence(seed, bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) out[i] ^= (bits[i] & 1u);
  return out;
}

int recover_scrambler_seed(std::span<const std::uint8_t> first_bits) {
  if (first_bits.size() < 7) return 0;
  for (int seed = 1; seed <= 127; ++seed) {
    Bits ks = scrambler_sequence(seed, 7);
    if (std::equal(ks.begin(), ks.end(), first_bits.begin())) return seed;
  }
  return 0;
}

// ---- BCC -------------------------------------------------------------------

namespace {

constexpr unsigned kG0 = 0133;
constexpr unsigned kG1 = 0171;
constexpr int kStates = 64;

unsigned parity(unsigned v) { return static_cast<unsigned>(__builtin_parity(v)); }

// Keep-masks over one period of the rate-1/2 output stream (A0 B0 A1 B1 ...).
std::span<const std::uint8_t> puncture_pattern(CodeRate rate) {
  static constexpr std::array<std::uint8_t, 2> r12{1, 1};
  static constexpr std::array<std::uint8_t, 4> r23{1, 1, 1, 0};
  static constexpr std::array<std::uint8_t, 6> r34{1, 1, 1, 0, 0, 1};
  static constexpr std::array<std::uint8_t, 10> r56{1, 1, 1, 0, 0, 1, 1, 0, 0, 1};
  switch (rate) {
    case CodeRate::R1_2:
      return r12;
    case CodeRate::R2_3:
      return r23;
    case CodeRate::R3_4:
      return r34;
    case CodeRate::R5_6:
      return r56;
  }
  return r12;
}

struct Trellis {
  // Output pair (A<<1 | B) for (state, input).
  std::array<std::array<std::uint8_t, 2>, kStates> out{};
  Trellis() {
    for (unsigned s = 0; s < kStates; ++s) {
      for (unsigned b = 0; b < 2; ++b) {
        unsigned w = (b << 6) | s;
        out[s][b] = static_cast<std::uint8_t>((parity(w & kG0) << 1) | parity(w & kG1));
      }
    }
  }
};

const Trellis& trellis() {
  static const Trellis t;
  return t;
}

}  // namespace

const char* to_string(CodeRate rate) {
  switch (rate) {
    case CodeRate::R1_2:
      return "1/2";
    case CodeRate::R2_3:
      return "2/3";
    case CodeRate::R3_4:
      return "3/4";
    case CodeRate::R5_6:
      return "5/6";
  }
  return "?";
}

std::size_t rate_input_period(CodeRate rate) { return puncture_pattern(rate).size() / 2; }

std::size_t rate_output_period(CodeRate rate) {
  auto p = puncture_pattern(rate);
  return static_cast<std::size_t>(std::count(p.begin(), p.end(), std::uint8_t{1}));
}

Bits bcc_encode(std::span<const std::uint8_t> bits, CodeRate rate) {
  if (bits.size() % rate_input_period(rate) != 0)
    throw DomainError("BCC input length " + std::to_string(bits.size()) + " is not a multiple of the rate " +
                      to_string(rate) + " puncturing period");
  auto pattern = puncture_pattern(rate);
  const auto& t = trellis();
  Bits out;
  out.reserve(bits.size() * 2);
  unsigned state = 0;
  std::size_t pos = 0;
  for (auto bit : bits) {
    unsigned b = bit & 1u;
    unsigned ab = t.out[state][b];
    if (pattern[pos % pattern.size()]) out.push_back(static_cast<std::uint8_t>(ab >> 1));
    ++pos;
    if (pattern[pos % pattern.size()]) out.push_back(static_cast<std::uint8_t>(ab & 1u));
    ++pos;
    state = (b << 5) | (state >> 1);
  }
  return out;
}

Bits bcc_decode_soft(std::span<const double> soft, CodeRate rate) {
  const std::size_t out_period = rate_output_period(rate);
  if (soft.size() % out_period != 0)
    throw DomainError("BCC coded length " + std::to_string(soft.size()) + " is not a multiple of the rate " +
                      to_string(rate) + " output period");
  auto pattern = puncture_pattern(rate);
  const std::size_t n_bits = soft.size() / out_period * rate_input_period(rate);

  // Depuncture into the rate-1/2 stream with erasures as zeros.
  std::vector<double> full(2 * n_bits, 0.0);
  std::size_t src = 0;
  for (std::size_t i = 0; i < full.size(); ++i) {
    if (pattern[i % pattern.size()]) full[i] = soft[src++];
  }

  const auto& t = trellis();
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  std::array<double, kStates> metric;
  metric.fill(kNegInf);
  metric[0] = 0.0;
  std::vector<std::uint64_t> decisions(n_bits);

  // Branch-metric index per (next state, predecessor parity); next state n has predecessors
  // (2n mod 64) and (2n mod 64) | 1 under input bit n >> 5.
  std::array<std::array<std::uint8_t, 2>, kStates> idx{};
  for (unsigned n = 0; n < kStates; ++n) {
    const unsigned p0 = (n << 1) & 0x3fu;
    idx[n] = {t.out[p0][n >> 5], t.out[p0 | 1u][n >> 5]};
  }

  for (std::size_t step = 0; step < n_bits; ++step) {
    const double sa = full[2 * step];
    const double sb = full[2 * step + 1];
    // Branch correlation for output pair (A,B) in {00,01,10,11}.
    const std::array<double, 4> bm{-sa - sb, -sa + sb, sa - sb, sa + sb};
    std::array<double, kStates> next;
    std::uint64_t dec = 0;
    for (unsigned n = 0; n < kStates; ++n) {
      const unsigned p0 = (n << 1) & 0x3fu;
      const double m0 = metric[p0] + bm[idx[n][0]];
      const double m1 = metric[p0 | 1u] + bm[idx[n][1]];
      const bool take1 = m1 > m0;
      next[n] = take1 ? m1 : m0;
      dec |= std::uint64_t{take1} << n;
    }
    // Keep metrics bounded on long frames.
    if ((step & 255u) == 255u) {
      const double top = *std::max_element(next.begin(), next.end());
      for (auto& m : next) m -= top;
    }
    metric = next;
    decisions[step] = dec;
  }

  unsigned state = static_cast<unsigned>(std::max_element(metric.begin(), metric.end()) - metric.begin());
  Bits out(n_bits);
  for (std::size_t step = n_bits; step-- > 0;) {
    out[step] = static_cast<std::uint8_t>(state >> 5);
    const unsigned x = (decisions[step] >> state) & 1u;
    state = ((state << 1) & 0x3fu) | x;
  }
  return out;
}

Bits bcc_decode(std::span<const std::uint8_t> coded, CodeRate rate) {
  std::vector<double> soft(coded.size());
  for (std::size_t i = 0; i < coded.size(); ++i) soft[i] = (coded[i] & 1u) ? 1.0 : -1.0;
  return bcc_decode_soft(soft, rate);
}

// ---- interleaver -----------------------------------------------------------

std::vector<std::size_t> interleaver_permutation(InterleaverKind kind, std::size_t n_cbps,
                                                 std::size_t n_bpsc) {
  std::size_t n_col = 16;
  std::size_t n_row = 0;
  switch (kind) {
    case InterleaverKind::Legacy:
      n_col = 16;
      n_row = n_cbps / 16;
      break;
    case InterleaverKind::HT20:
      n_col = 13;
      n_row = 4 * n_bpsc;
      break;
    case InterleaverKind::HT40:
      n_col = 18;
      n_row = 6 * n_bpsc;
      break;
  }
  if (n_bpsc == 0 || n_col * n_row != n_cbps)
    throw DomainError("interleaver block of " + std::to_string(n_cbps) + " bits does not match " +
                      std::to_string(n_bpsc) + " bits per subcarrier");
  const std::size_t s = std::max<std::size_t>(n_bpsc / 2, 1);
  std::vector<std::size_t> perm(n_cbps);
  for (std::size_t k = 0; k < n_cbps; ++k) {
    const std::size_t i = n_row * (k % n_col) + k / n_col;
    const std::size_t j = s * (i / s) + (i + n_cbps - (n_col * i) / n_cbps) % s;
    perm[k] = j;
  }
  return perm;
}

Bits interleave(std::span<const std::uint8_t> bits, InterleaverKind kind, std::size_t n_bpsc) {
  auto perm = interleaver_permutation(kind, bits.size(), n_bpsc);
  Bits out(bits.size());
  for (std::size_t k = 0; k < bits.size(); ++k) out[perm[k]] = bits[k];
  return out;
}

std::vector<double> deinterleave(std::span<const double> values, InterleaverKind kind, std::size_t n_bpsc) {
  auto perm = interleaver_permutation(kind, values.size(), n_bpsc);
  std::vector<double> out(values.size());
  for (std::size_t k = 0; k < values.size(); ++k) out[k] = values[perm[k]];
  return out;
}

Bits deinterleave(std::span<const std::uint8_t> bits, InterleaverKind kind, std::size_t n_bpsc) {
  auto perm = interleaver_permutation(kind, bits.size(), n_bpsc);
  Bits out(bits.size());
  for (std::size_t k = 0; k < bits.size(); ++k) out[k] = bits[perm[k]];
  return out;
}

// ---- misc ------------------------------------------------------------------

Bits bytes_to_bits(std::span<const std::uint8_t> bytes) {
  Bits out;
  out.reserve(bytes.size() * 8);
  for (auto byte : bytes) {
    for (int b = 0; b < 8; ++b) out.push_back(static_cast<std::uint8_t>((byte >> b) & 1u));
  }
  return out;
}

std::vector<std::uint8_t> bits_to_bytes(std::span<const std::uint8_t> bits) {
  std::vector<std::uint8_t> out(bits.size() / 8, 0);
  for (std::size_t i = 0; i < out.size() * 8; ++i) {
    out[i / 8] = static_cast<std::uint8_t>(out[i / 8] | ((bits[i] & 1u) << (i % 8)));
  }
  return out;
}

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  return static_cast<std::uint32_t>(::crc32(0L, bytes.data(), static_cast<uInt>(bytes.size())));
}

}  // namespace csiwb::phy
