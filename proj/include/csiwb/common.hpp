#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

namespace csiwb {

using Complex = std::complex<double>;
using CVec = std::vector<Complex>;
using Bits = std::vector<std::uint8_t>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Raised when an operation's documented precondition is violated.
class DomainError : public std::domain_error {
 public:
  explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

enum class ChannelMode { HT20, HT40Plus, HT40Minus };

const char* to_string(ChannelMode mode);
ChannelMode channel_mode_from_string(const std::string& text);

inline bool is_ht40(ChannelMode mode) { return mode != ChannelMode::HT20; }

inline double db10(double power) { return 10.0 * std::log10(power); }
inline double db20(double amplitude) { return 20.0 * std::log10(amplitude); }

}  // namespace csiwb
