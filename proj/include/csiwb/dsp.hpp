#pragma once

// Thin FFT layer over FFTW plus a few whole-buffer spectral helpers.

#include <functional>
#include <span>

#include "csiwb/common.hpp"

namespace csiwb::dsp {

/// Unnormalized forward DFT: X[k] = sum_n x[n] e^{-j2pi kn/N}.
CVec fft(std::span<const Complex> x);
/// Unnormalized inverse DFT: x[n] = sum_k X[k] e^{+j2pi kn/N}.
CVec ifft(std::span<const Complex> x);

/// Signed frequency of FFT bin `k` for an `n`-point transform at `fs`.
inline double bin_frequency(std::size_t k, std::size_t n, double fs) {
  const auto sk = static_cast<long>(k);
  const auto sn = static_cast<long>(n);
  return static_cast<double>(sk < (sn + 1) / 2 ? sk : sk - sn) * fs / static_cast<double>(n);
}

/// Band-limited (spectrum zero-pad / truncate) resampling to `out_len` samples.
CVec fft_resample(std::span<const Complex> x, std::size_t out_len);

/// Multiplies the spectrum of `x` (at sample rate `fs`) by `response(f)`.
/// Circular; callers pad when the response is not short in time.
CVec apply_frequency_response(std::span<const Complex> x, double fs,
                              const std::function<Complex(double)>& response);

double mean_power(std::span<const Complex> x);

/// Multiplies x[i] by exp(j (phase0 + w i)) in place.
void rotate(std::span<Complex> x, double w, double phase0 = 0.0);

/// Smallest n' >= n whose only prime factors are 2, 3 and 5.
std::size_t fast_fft_size(std::size_t n);

}  // namespace csiwb::dsp
