#pragma once

// Bit-level 802.11 processing: scrambler, BCC encoder / Viterbi decoder and
// the block interleaver.

#include <span>

#include "csiwb/common.hpp"

namespace csiwb::phy {

// ---- scrambler (x^7 + x^4 + 1) --------------------------------------------

/// Keystream of the 7-bit LFSR starting from `seed`.
Bits scrambler_sequence(int seed, std::size_t length);
/// XORs `bits` with the keystream; an involution for a fixed seed.
Bits scramble(int seed, std::span<const std::uint8_t> bits);
/// Recovers the seed from the first 7 scrambled bits of an all-zero SERVICE
/// prefix. Returns 0 when no seed reproduces them.
int recover_scrambler_seed(std::span<const std::uint8_t> first_bits);

// ---- binary convolutional code (K=7, 133/171 octal) -----------------------

enum class CodeRate { R1_2, R2_3, R3_4, R5_6 };

const char* to_string(CodeRate rate);
/// Data bits consumed per puncturing period.
std::size_t rate_input_period(CodeRate rate);
/// Coded bits emitted per puncturing period.
std::size_t rate_output_period(CodeRate rate);

Bits bcc_encode(std::span<const std::uint8_t> bits, CodeRate rate);

/// Viterbi decoding of soft coded bits (positive = 1, negative = 0, zero =
/// erasure). Output length is the number of encoded data bits.
Bits bcc_decode_soft(std::span<const double> soft, CodeRate rate);
/// Hard-decision convenience wrapper over bcc_decode_soft.
Bits bcc_decode(std::span<const std::uint8_t> coded, CodeRate rate);

// ---- interleaver -----------------------------------------------------------

/// Column count of the first permutation: 16 legacy, 13 HT20, 18 HT40.
enum class InterleaverKind { Legacy, HT20, HT40 };

/// Destination index j of input bit k for one OFDM symbol.
std::vector<std::size_t> interleaver_permutation(InterleaverKind kind, std::size_t n_cbps,
                                                 std::size_t n_bpsc);
Bits interleave(std::span<const std::uint8_t> bits, InterleaverKind kind, std::size_t n_bpsc);
std::vector<double> deinterleave(std::span<const double> values, InterleaverKind kind,
                                 std::size_t n_bpsc);
Bits deinterleave(std::span<const std::uint8_t> bits, InterleaverKind kind, std::size_t n_bpsc);

// ---- misc ------------------------------------------------------------------

Bits bytes_to_bits(std::span<const std::uint8_t> bytes);  // LSB first
std::vector<std::uint8_t> bits_to_bytes(std::span<const std::uint8_t> bits);
std::uint32_t crc32(std::span<const std::uint8_t> bytes);

}  // namespace csiwb::phy
