#include "csiwb/csi/stitch.hpp"

#include <algorithm>
#include <numeric>

#include "csiwb/csi/analysis.hpp"

namespace csiwb::csi {

namespace {

struct Accum {
  double freq = 0.0;
  Complex sum{};
  int count = 0;

  Complex value() const { return sum / static_cast<double>(count); }
};

// Index of the accumulated tone within kToneMatchHz of f, or -1.
long find_tone(const std::vector<Accum>& acc, double f) {
  auto it = std::lower_bound(acc.begin(), acc.end(), f - kToneMatchHz,
                             [](const Accum& a, double v) { return a.freq < v; });
  if (it != acc.end() && std::abs(it->freq - f) <= kToneMatchHz) return it - acc.begin();
  return -1;
}

}  // namespace

std::vector<double> shared_tone_frequencies(const CsiFrame& a, const CsiFrame& b) {
  std::vector<double> out;
  for (std::size_t i = 0; i < a.grid.size(); ++i) {
    const double f = a.tone_frequency(i);
    for (std::size_t j = 0; j < b.grid.size(); ++j) {
      if (std::abs(b.tone_frequency(j) - f) <= kToneMatchHz) {
        out.push_back(f);
        break;
      }
    }
  }
  return out;
}

StitchResult stitch(std::span<const CsiFrame> frames) {
  if (frames.empty()) throw DomainError("stitch needs at least one frame");
  std::vector<std::size_t> order(frames.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](auto a, auto b) { return frames[a].center_freq < frames[b].center_freq; });

  std::vector<Accum> acc;
  double sq_mag = 0.0;
  double sq_phase = 0.0;
  std::size_t n_cmp = 0;

  for (std::size_t oi = 0; oi < order.size(); ++oi) {
    const CsiFrame& fr = frames[order[oi]];
    fr.validate();
    const std::size_t n = fr.grid.size();
    std::vector<double> f(n);
    for (std::size_t k = 0; k < n; ++k) f[k] = fr.tone_frequency(k);
    CVec v = fr.values;

    if (oi > 0) {
      std::vector<long> match(n);
      std::vector<std::size_t> shared;
      for (std::size_t k = 0; k < n; ++k) {
        match[k] = find_tone(acc, f[k]);
        if (match[k] >= 0) shared.push_back(k);
      }
      if (shared.empty()) {
        throw DomainError("frames at " + std::to_string(frames[order[oi - 1]].center_freq) + " Hz and " +
                          std::to_string(fr.center_freq) + " Hz share no subcarrier frequency");
      }
      // Gain from the mean log-magnitude ratio, phase line from the unwrapped ratio.
      double log_gain = 0.0;
      std::vector<double> ratio_phase;
      std::vector<double> x;
      for (auto k : shared) {
        const Complex w = acc[static_cast<std::size_t>(match[k])].value();
        log_gain += std::log(std::abs(w) / std::abs(v[k]));
        ratio_phase.push_back(std::arg(w * std::conj(v[k])));
        x.push_back(f[k]);
      }
      log_gain /= static_cast<double>(shared.size());
      const LinearFit fit = detrend_linear(unwrap_phase(ratio_phase), x);
      for (std::size_t k = 0; k < n; ++k) v[k] *= std::polar(std::exp(log_gain), fit.intercept + fit.slope * f[k]);

      for (auto k : shared) {
        const Complex w = acc[static_cast<std::size_t>(match[k])].value();
        const double dm = db20(std::abs(v[k])) - db20(std::abs(w));
        const double dp = std::arg(v[k] * std::conj(w));
        sq_mag += dm * dm;
        sq_phase += dp * dp;
        ++n_cmp;
      }
    }

    for (std::size_t k = 0; k < n; ++k) {
      const long idx = acc.empty() ? -1 : find_tone(acc, f[k]);
      if (idx >= 0) {
        acc[static_cast<std::size_t>(idx)].sum += v[k];
        ++acc[static_cast<std::size_t>(idx)].count;
      } else {
        Accum a{f[k], v[k], 1};
        acc.insert(std::upper_bound(acc.begin(), acc.end(), f[k],
                                    [](double val, const Accum& e) { return val < e.freq; }),
                   a);
      }
    }
  }

  StitchResult res;
  res.freq.reserve(acc.size());
  res.values.reserve(acc.size());
  for (const auto& a : acc) {
    res.freq.push_back(a.freq);
    res.values.push_back(a.value());
  }
  res.overlap_residual.n_tones = n_cmp;
  if (n_cmp > 0) {
    res.overlap_residual.mag_db_rms = std::sqrt(sq_mag / static_cast<double>(n_cmp));
    res.overlap_residual.phase_rad_rms = std::sqrt(sq_phase / static_cast<double>(n_cmp));
  }
  return res;
}

}  // namespace csiwb::csi
