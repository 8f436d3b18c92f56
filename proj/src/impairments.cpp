#include "csiwb/impairments.hpp"

#include <algorithm>
#include <functional>
#include <random>

#include "csiwb/dsp.hpp"

namespace csiwb::imp {

namespace {

constexpr std::size_t kTailSamples = 64;

double sinc(double x) {
  if (std::abs(x) < 1e-12) return 1.0;
  return std::sin(kPi * x) / (kPi * x);
}

BasebandBurst with_samples(const BasebandBurst& like, CVec samples) {
  BasebandBurst out;
  out.samples = std::move(samples);
  out.sample_rate = like.sample_rate;
  out.center_freq = like.center_freq;
  return out;
}

double effective_cutoff(const FilterSpec& f, double fs, const ImpairmentProfile& p) {
  return p.track_clock ? f.cutoff * fs / p.design_rate : f.cutoff;
}

CVec padded(std::span<const Complex> x, std::size_t tail) {
  CVec out(x.begin(), x.end());
  out.resize(x.size() + tail);
  return out;
}

}  // namespace

// ---- profile -----------------------------------------------------------------

void ImpairmentProfile::validate() const {
  if (dac_oversample < 1) throw DomainError("dac_oversample must be at least 1");
  if (predistortion_overcomp < 0.0) throw DomainError("predistortion over-compensation must be non-negative");
  if (recon.order != 2) throw DomainError("reconstruction filter order is fixed at 2");
  if (acr.order != 5) throw DomainError("ACR filter order is fixed at 5");
  if (!(recon.cutoff > 0.0) || !(acr.cutoff > 0.0)) throw DomainError("filter cutoffs must be positive");
  if (!(design_rate > 0.0)) throw DomainError("design rate must be positive");
  if (!(iq.gain_ratio > 0.0)) throw DomainError("I/Q gain ratio must be positive");
  if (agc_target_rms && !(*agc_target_rms > 0.0)) throw DomainError("AGC target RMS must be positive");
  for (const auto& t : multipath) {
    if (!std::isfinite(t.gain.real()) || !std::isfinite(t.gain.imag())) throw DomainError("multipath gain not finite");
  }
}

ImpairmentProfile ImpairmentProfile::clean() {
  ImpairmentProfile p;
  p.name = "clean";
  p.dac_zoh = false;
  p.predistortion_overcomp = 0.0;
  p.recon.enabled = false;
  p.acr.enabled = false;
  return p;
}

ImpairmentProfile ImpairmentProfile::default_for(double design_rate) {
  ImpairmentProfile p;
  const double scale = design_rate / 20e6;
  p.name = design_rate > 20e6 ? "default40" : "default20";
  p.design_rate = design_rate;
  p.recon.cutoff = 12e6 * scale;
  p.acr.cutoff = 7.75e6 * scale;
  return p;
}

// ---- stage responses ---------------------------------------------------------

Complex dac_zoh_response(double f, double fs_dac) {
  if (!(fs_dac > 0.0)) throw DomainError("DAC rate must be positive");
  const double x = f / fs_dac;
  return sinc(x) * std::polar(1.0, -kPi * x);
}

Complex predistortion_response(double f, double alpha, double fs_dac) {
  if (alpha == 0.0) return {1.0, 0.0};
  const double x = std::min(std::abs(f), 0.5 * fs_dac) / fs_dac;
  return {std::pow(1.0 / sinc(x), alpha), 0.0};
}

double butterworth_analog_magnitude(double f, double cutoff, int order) {
  return 1.0 / std::sqrt(1.0 + std::pow(f / cutoff, 2.0 * order));
}

Complex butterworth_analog_response(double f, double cutoff, int order) {
  if (order < 1) throw DomainError("Butterworth order must be at least 1");
  if (!(cutoff > 0.0)) throw DomainError("Butterworth cutoff must be positive");
  const Complex s{0.0, f / cutoff};
  Complex h{1.0, 0.0};
  for (int k = 0; k < order; ++k) {
    const Complex pole = std::polar(1.0, kPi * (2.0 * k + order + 1) / (2.0 * order));
    h *= -pole / (s - pole);
  }
  return h;
}

Butterworth design_butterworth(int order, double cutoff, double sample_rate) {
  if (order < 1) throw DomainError("Butterworth order must be at least 1");
  if (!(cutoff > 0.0) || cutoff >= sample_rate / 2.0)
    throw DomainError("Butterworth cutoff " + std::to_string(cutoff) + " Hz must lie in (0, Nyquist of " +
                      std::to_string(sample_rate) + " Hz)");
  Butterworth bw;
  bw.sample_rate = sample_rate;
  const double k = 2.0 * sample_rate;
  const double wc = k * std::tan(kPi * cutoff / sample_rate);
  for (int m = 0; m < order / 2; ++m) {
    const double theta = kPi * (2.0 * m + order + 1) / (2.0 * order);
    const double a1 = -2.0 * std::cos(theta) * wc;
    const double a0 = wc * wc;
    const double d0 = k * k + a1 * k + a0;
    Sos s;
    s.b0 = a0 / d0;
    s.b1 = 2.0 * a0 / d0;
    s.b2 = a0 / d0;
    s.a1 = (-2.0 * k * k + 2.0 * a0) / d0;
    s.a2 = (k * k - a1 * k + a0) / d0;
    bw.sections.push_back(s);
  }
  if (order % 2 == 1) {
    const double d0 = k + wc;
    Sos s;
    s.b0 = wc / d0;
    s.b1 = wc / d0;
    s.a1 = (wc - k) / d0;
    bw.sections.push_back(s);
  }
  return bw;
}

Complex Butterworth::response(double f) const {
  const Complex z1 = std::polar(1.0, -kTwoPi * f / sample_rate);
  const Complex z2 = z1 * z1;
  Complex h{1.0, 0.0};
  for (const auto& s : sections) h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
  return h;
}

CVec Butterworth::apply(std::span<const Complex> x) const {
  CVec y(x.begin(), x.end());
  for (const auto& s : sections) {
    Complex w1{}, w2{};
    for (auto& v : y) {
      const Complex in = v;
      const Complex out = s.b0 * in + w1;
      w1 = s.b1 * in - s.a1 * out + w2;
      w2 = s.b2 * in - s.a2 * out;
      v = out;
    }
  }
  return y;
}

// ---- stages ------------------------------------------------------------------

BasebandBurst butterworth_apply(const BasebandBurst& burst, int order, double cutoff) {
  const Butterworth bw = design_butterworth(order, cutoff, burst.sample_rate);
  return with_samples(burst, bw.apply(burst.samples));
}

BasebandBurst predistort(const BasebandBurst& burst, double alpha, double fs_dac) {
  if (alpha < 0.0) throw DomainError("predistortion exponent must be non-negative");
  if (alpha == 0.0) return burst;
  return with_samples(burst, dsp::apply_frequency_response(burst.samples, burst.sample_rate, [&](double f) {
                        return predistortion_response(f, alpha, fs_dac);
                      }));
}

BasebandBurst apply_dac_zoh(const BasebandBurst& burst, double fs_dac) {
  return with_samples(burst, dsp::apply_frequency_response(burst.samples, burst.sample_rate,
                                                           [&](double f) { return dac_zoh_response(f, fs_dac); }));
}

BasebandBurst apply_iq_mismatch(const BasebandBurst& burst, double gain_ratio, double phase_deg) {
  if (!(gain_ratio > 0.0)) throw DomainError("I/Q gain ratio must be positive");
  if (gain_ratio == 1.0 && phase_deg == 0.0) return burst;
  const double phi = phase_deg * kPi / 180.0;
  const double c = std::cos(phi);
  const double s = std::sin(phi);
  BasebandBurst out = burst;
  for (auto& v : out.samples) {
    const double i = v.real();
    const double q = v.imag();
    v = {i, gain_ratio * (q * c + i * s)};
  }
  return out;
}

BasebandBurst apply_cfo(const BasebandBurst& burst, double hz) {
  if (hz == 0.0) return burst;
  BasebandBurst out = burst;
  const double w = kTwoPi * hz / burst.sample_rate;
  dsp::rotate(out.samples, w);
  return out;
}

BasebandBurst apply_sfo(const BasebandBurst& burst, double ppm) {
  if (ppm == 0.0) return burst;
  constexpr int kHalf = 16;  // 33 taps
  constexpr double kBeta = 8.0;
  const double eps = ppm * 1e-6;
  const auto& x = burst.samples;
  if (x.empty()) return burst;
  const auto n_out = static_cast<std::size_t>(std::floor(static_cast<double>(x.size() - 1) / (1.0 + eps))) + 1;
  const double i0b = std::cyl_bessel_i(0.0, kBeta);
  const double radius = kHalf + 1.0;
  CVec y(n_out);
  for (std::size_t m = 0; m < n_out; ++m) {
    const double t = static_cast<double>(m) * (1.0 + eps);
    const auto n0 = static_cast<long>(std::floor(t));
    Complex acc{};
    for (long j = -kHalf; j <= kHalf; ++j) {
      const long idx = n0 + j;
      if (idx < 0 || idx >= static_cast<long>(x.size())) continue;
      const double d = t - static_cast<double>(idx);
      const double u = d / radius;
      const double w = std::cyl_bessel_i(0.0, kBeta * std::sqrt(std::max(0.0, 1.0 - u * u))) / i0b;
      acc += x[static_cast<std::size_t>(idx)] * (sinc(d) * w);
    }
    y[m] = acc;
  }
  return with_samples(burst, std::move(y));
}

BasebandBurst apply_awgn(const BasebandBurst& burst, double snr_db, std::uint64_t seed) {
  const double p = dsp::mean_power(burst.samples);
  const double sigma = std::sqrt(p / std::pow(10.0, snr_db / 10.0) / 2.0);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> nd(0.0, 1.0);
  BasebandBurst out = burst;
  for (auto& v : out.samples) {
    const double re = nd(rng);
    const double im = nd(rng);
    v += Complex{re, im} * sigma;
  }
  return out;
}

BasebandBurst apply_multipath(const BasebandBurst& burst, std::span<const Tap> taps) {
  if (taps.empty()) return burst;
  std::size_t max_delay = 0;
  for (const auto& t : taps) max_delay = std::max(max_delay, t.delay);
  CVec y(burst.size() + max_delay);
  for (const auto& t : taps) {
    for (std::size_t n = 0; n < burst.size(); ++n) y[n + t.delay] += burst.samples[n] * t.gain;
  }
  return with_samples(burst, std::move(y));
}

BasebandBurst agc(const BasebandBurst& burst, double target_rms) {
  if (!(target_rms > 0.0)) throw DomainError("AGC target RMS must be positive");
  const double rms = std::sqrt(dsp::mean_power(burst.samples));
  if (rms == 0.0) return burst;
  BasebandBurst out = burst;
  const double g = target_rms / rms;
  for (auto& v : out.samples) v *= g;
  return out;
}

Complex air_channel_response(std::span<const Path> paths, double carrier, double f) {
  Complex h{};
  for (const auto& p : paths) h += p.gain * std::polar(1.0, -kTwoPi * (carrier + f) * p.delay);
  return h;
}

BasebandBurst apply_air_channel(const BasebandBurst& burst, std::span<const Path> paths, double carrier) {
  if (paths.empty()) return burst;
  double max_delay = 0.0;
  for (const auto& p : paths) max_delay = std::max(max_delay, p.delay);
  const auto tail = static_cast<std::size_t>(std::ceil(max_delay * burst.sample_rate)) + 16;
  CVec x = padded(burst.samples, tail);
  return with_samples(burst, dsp::apply_frequency_response(x, burst.sample_rate, [&](double f) {
                        return air_channel_response(paths, carrier, f);
                      }));
}

// ---- chains ------------------------------------------------------------------

namespace {

// Bulk delay of `h` at DC, rounded to whole samples.
long integer_delay(const std::function<Complex(double)>& h, double fs) {
  const double df = fs * 1e-4;
  const double dphi = std::arg(h(df) * std::conj(h(-df)));
  return std::lround(-dphi / (kTwoPi * 2.0 * df) * fs);
}

// Periodic equivalent of an analog response at rate fs: exact for |f| <= edge,
// raised-cosine blend across the guard band through Nyquist after removing the
// integer bulk delay, so the discrete response has no jump at +-fs/2.
std::function<Complex(double)> equivalent(std::function<Complex(double)> h, double fs, double edge) {
  const long d = integer_delay(h, fs);
  auto g = [h, d, fs](double f) { return h(f) * std::polar(1.0, kTwoPi * f * static_cast<double>(d) / fs); };
  const Complex ga = g(edge);
  const Complex gb = g(-edge);
  const double pa = std::arg(ga);
  const double pb = pa + std::arg(gb * std::conj(ga));
  return [=](double f) {
    if (std::abs(f) <= edge) return h(f);
    const double width = fs - 2.0 * edge;
    const double t = f > 0.0 ? (f - edge) / width : (f + fs - edge) / width;
    const double w = 0.5 - 0.5 * std::cos(kPi * t);
    const double mag = std::abs(ga) * (1.0 - w) + std::abs(gb) * w;
    const double ph = pa + w * (pb - pa) - kTwoPi * f * static_cast<double>(d) / fs;
    return std::polar(mag, ph);
  };
}

// Recently used chain spectra; scans reuse a handful of (length, rate, profile) combinations.
struct SpectrumKey {
  int chain = 0;  // 0 tx, 1 rx
  std::size_t n = 0;
  double fs = 0.0;
  double edge = 0.0;
  ImpairmentProfile profile;

  bool operator==(const SpectrumKey&) const = default;
};

const CVec& chain_spectrum(const SpectrumKey& key, const std::function<Complex(double)>& h) {
  constexpr std::size_t kEntries = 16;
  thread_local std::vector<std::pair<SpectrumKey, CVec>> cache;
  for (std::size_t i = 0; i < cache.size(); ++i) {
    if (cache[i].first == key) {
      if (i > 0) std::swap(cache[i], cache[i - 1]);
      return cache[i > 0 ? i - 1 : 0].second;
    }
  }
  const auto resp = equivalent(h, key.fs, key.edge);
  CVec spec(key.n);
  for (std::size_t k = 0; k < key.n; ++k) spec[k] = resp(dsp::bin_frequency(k, key.n, key.fs));
  if (cache.size() == kEntries) cache.pop_back();
  cache.emplace_back(key, std::move(spec));
  return cache.back().second;
}

BasebandBurst apply_equivalent(const BasebandBurst& burst, int chain, const ImpairmentProfile& p,
                               const std::function<Complex(double)>& h, double edge) {
  const double fs = burst.sample_rate;
  const long d = integer_delay(h, fs);
  const std::size_t len = dsp::fast_fft_size(burst.size() + kTailSamples + static_cast<std::size_t>(std::max(d, 0L)));
  CVec x = padded(burst.samples, len - burst.size());
  const CVec& spec = chain_spectrum({chain, len, fs, edge, p}, h);
  CVec y = dsp::fft(x);
  const double scale = 1.0 / static_cast<double>(len);
  for (std::size_t k = 0; k < len; ++k) y[k] *= spec[k] * scale;
  return with_samples(burst, dsp::ifft(y));
}

}  // namespace

Complex tx_response(double f, double fs, const ImpairmentProfile& p) {
  Complex h{1.0, 0.0};
  if (p.predistortion_overcomp > 0.0) {
    const double fs_pd = p.dac_oversample * (p.track_clock ? fs : p.design_rate);
    h *= predistortion_response(f, p.predistortion_overcomp, fs_pd);
  }
  if (p.dac_zoh) h *= dac_zoh_response(f, p.dac_oversample * fs);
  if (p.recon.enabled) h *= butterworth_analog_response(f, effective_cutoff(p.recon, fs, p), p.recon.order);
  return h;
}

Complex rx_response(double f, double fs, const ImpairmentProfile& p) {
  if (!p.acr.enabled) return {1.0, 0.0};
  return butterworth_analog_response(f, effective_cutoff(p.acr, fs, p), p.acr.order);
}

double default_band_edge(double fs) { return fs * kDefaultBandEdge; }

BasebandBurst tx_chain(const BasebandBurst& burst, const ImpairmentProfile& p, std::optional<double> band_edge) {
  p.validate();
  if (p.predistortion_overcomp == 0.0 && !p.dac_zoh && !p.recon.enabled) return burst;
  const double fs = burst.sample_rate;
  return apply_equivalent(burst, 0, p, [&p, fs](double f) { return tx_response(f, fs, p); },
                          band_edge.value_or(default_band_edge(fs)));
}

BasebandBurst rx_chain(const BasebandBurst& burst, const ImpairmentProfile& p, std::optional<double> band_edge) {
  p.validate();
  const double fs = burst.sample_rate;
  BasebandBurst out = burst;
  if (p.acr.enabled)
    out = apply_equivalent(burst, 1, p, [&p, fs](double f) { return rx_response(f, fs, p); },
                           band_edge.value_or(default_band_edge(fs)));
  out = apply_iq_mismatch(out, p.iq.gain_ratio, p.iq.phase_deg);
  if (p.agc_target_rms) out = agc(out, *p.agc_target_rms);
  return out;
}

BasebandBurst channel(const BasebandBurst& burst, const ImpairmentProfile& p, double extra_cfo, std::uint64_t seed) {
  BasebandBurst out = apply_multipath(burst, p.multipath);
  out = apply_sfo(out, p.sfo_ppm);
  out = apply_cfo(out, p.cfo + extra_cfo);
  if (p.snr_db) out = apply_awgn(out, *p.snr_db, seed);
  return out;
}

}  // namespace csiwb::imp
