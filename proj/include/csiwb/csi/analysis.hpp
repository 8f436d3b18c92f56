#pragma once

#include <span>

#include "csiwb/csi/csi_frame.hpp"

namespace csiwb::csi {

/// Adds 2*pi multiples so successive differences lie in (-pi, pi].
std::vector<double> unwrap_phase(std::span<const double> wrapped);
/// Unwrapped argument of a complex sequence.
std::vector<double> unwrapped_phase(std::span<const Complex> values);

struct LinearFit {
  std::vector<double> detrended;
  double slope = 0.0;
  double intercept = 0.0;  // value of the fitted line at index 0
};

/// Removes the least-squares line over `indices` (signed subcarrier numbers).
LinearFit detrend_linear(std::span<const double> values, std::span<const int> indices);
LinearFit detrend_linear(std::span<const double> values, std::span<const double> x);

/// H_i = Y_i / X_i; throws naming the tone when X has a zero.
CVec data_symbol_csi(std::span<const Complex> y, std::span<const Complex> x);

/// Principal-value angle of H_next / H_i per tone, in (-pi, pi].
std::vector<double> adjacent_phase_diff(std::span<const Complex> h_i, std::span<const Complex> h_next);

struct CfoSfoEstimate {
  double cfo_hz = 0.0;
  double sfo_ppm = 0.0;
  double residual_rms = 0.0;  // rad
  std::size_t n_symbols = 0;
  bool consistent = true;  // residual_rms below the model threshold
};

enum class CfoSfoMethod {
  /// Per-tone phase accumulated from principal differences, fitted as c_k + i (A + B k).
  CumulativePhase,
  /// Direct fit of every principal difference to A + B k.
  PhaseDifference,
};

/// Fits the residual phase progression of a data-symbol CSI train:
/// per-symbol phase advance 2 pi t_sym (cfo + k * spacing * zeta).
CfoSfoEstimate estimate_cfo_sfo(std::span<const CVec> train, const SubcarrierGrid& grid, double t_sym,
                                CfoSfoMethod method = CfoSfoMethod::CumulativePhase,
                                double residual_threshold = 0.5);

}  // namespace csiwb::csi
