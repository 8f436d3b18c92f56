#include "csiwb/csi/analysis.hpp"

#include <numeric>

namespace csiwb::csi {

namespace {

double principal(double a) {
  // Maps into (-pi, pi].
  double r = std::remainder(a, kTwoPi);
  if (r <= -kPi) r += kTwoPi;
  return r;
}

}  // namespace

std::vector<double> unwrap_phase(std::span<const double> wrapped) {
  std::vector<double> out(wrapped.begin(), wrapped.end());
  for (std::size_t i = 1; i < out.size(); ++i) out[i] = out[i - 1] + principal(wrapped[i] - wrapped[i - 1]);
  return out;
}

std::vector<double> unwrapped_phase(std::span<const Complex> values) {
  std::vector<double> a(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) a[i] = std::arg(values[i]);
  return unwrap_phase(a);
}

LinearFit detrend_linear(std::span<const double> values, std::span<const double> x) {
  if (values.size() != x.size()) throw DomainError("detrend: values and abscissae differ in length");
  LinearFit fit;
  const std::size_t n = values.size();
  fit.detrended.assign(values.begin(), values.end());
  if (n == 0) return fit;
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  const double my = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(n);
  double sxx = 0.0;
  double sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (values[i] - my);
  }
  fit.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  fit.intercept = my - fit.slope * mx;
  for (std::size_t i = 0; i < n; ++i) fit.detrended[i] = values[i] - (fit.intercept + fit.slope * x[i]);
  return fit;
}

LinearFit detrend_linear(std::span<const double> values, std::span<const int> indices) {
  std::vector<double> x(indices.begin(), indices.end());
  return detrend_linear(values, x);
}

CVec data_symbol_csi(std::span<const Complex> y, std::span<const Complex> x) {
  if (y.size() != x.size()) throw DomainError("Y and X differ in length");
  CVec h(y.size());
  for (std::size_t k = 0; k < y.size(); ++k) {
    if (x[k] == Complex{}) throw DomainError("zero reference symbol on tone position " + std::to_string(k));
    h[k] = y[k] / x[k];
  }
  return h;
}

std::vector<double> adjacent_phase_diff(std::span<const Complex> h_i, std::span<const Complex> h_next) {
  if (h_i.size() != h_next.size()) throw DomainError("CSI vectors differ in length");
  std::vector<double> d(h_i.size());
  for (std::size_t k = 0; k < d.size(); ++k) d[k] = principal(std::arg(h_next[k] * std::conj(h_i[k])));
  return d;
}

CfoSfoEstimate estimate_cfo_sfo(std::span<const CVec> train, const SubcarrierGrid& grid, double t_sym,
                                CfoSfoMethod method, double residual_threshold) {
  if (train.size() < 2) throw DomainError("CFO/SFO estimation needs at least two data symbols");
  if (!(t_sym > 0.0)) throw DomainError("symbol duration must be positive");
  const std::size_t n_tones = grid.size();
  for (const auto& h : train) {
    if (h.size() != n_tones) throw DomainError("CSI train entry does not match the grid");
  }
  const std::size_t n_diff = train.size() - 1;
  std::vector<std::vector<double>> dtheta(n_diff);
  for (std::size_t i = 0; i < n_diff; ++i) dtheta[i] = adjacent_phase_diff(train[i], train[i + 1]);

  std::vector<double> k(grid.indices.begin(), grid.indices.end());
  double a = 0.0;
  double b = 0.0;
  double sq = 0.0;
  std::size_t count = 0;

  if (method == CfoSfoMethod::PhaseDifference) {
    // Every (i, k) sample shares the same abscissa k; the LS line over the pooled set
    // equals the line through per-tone means.
    std::vector<double> mean(n_tones, 0.0);
    for (const auto& d : dtheta)
      for (std::size_t t = 0; t < n_tones; ++t) mean[t] += d[t] / static_cast<double>(n_diff);
    const LinearFit fit = detrend_linear(mean, k);
    a = fit.intercept;
    b = fit.slope;
    for (const auto& d : dtheta) {
      for (std::size_t t = 0; t < n_tones; ++t) {
        const double r = d[t] - (a + b * k[t]);
        sq += r * r;
        ++count;
      }
    }
  } else {
    // theta_i[k] = c_k + i (A + B k): per-tone slopes regressed on k.
    const std::size_t n_sym = train.size();
    const double mi = static_cast<double>(n_sym - 1) / 2.0;
    double sii = 0.0;
    for (std::size_t i = 0; i < n_sym; ++i) sii += (static_cast<double>(i) - mi) * (static_cast<double>(i) - mi);
    std::vector<std::vector<double>> theta(n_tones, std::vector<double>(n_sym, 0.0));
    std::vector<double> slope(n_tones, 0.0);
    for (std::size_t t = 0; t < n_tones; ++t) {
      for (std::size_t i = 1; i < n_sym; ++i) theta[t][i] = theta[t][i - 1] + dtheta[i - 1][t];
      double sxy = 0.0;
      for (std::size_t i = 0; i < n_sym; ++i) sxy += (static_cast<double>(i) - mi) * theta[t][i];
      slope[t] = sxy / sii;
    }
    const LinearFit fit = detrend_linear(slope, k);
    a = fit.intercept;
    b = fit.slope;
    for (std::size_t t = 0; t < n_tones; ++t) {
      const double s = a + b * k[t];
      double mean_t = 0.0;
      for (std::size_t i = 0; i < n_sym; ++i) mean_t += theta[t][i];
      mean_t /= static_cast<double>(n_sym);
      for (std::size_t i = 0; i < n_sym; ++i) {
        const double r = theta[t][i] - (mean_t + (static_cast<double>(i) - mi) * s);
        sq += r * r;
        ++count;
      }
    }
  }

  CfoSfoEstimate est;
  est.cfo_hz = a / (kTwoPi * t_sym);
  est.sfo_ppm = b / (kTwoPi * t_sym * grid.spacing) * 1e6;
  est.residual_rms = std::sqrt(sq / static_cast<double>(std::max<std::size_t>(count, 1)));
  est.n_symbols = train.size();
  est.consistent = est.residual_rms <= residual_threshold;
  return est;
}

}  // namespace csiwb::csi
