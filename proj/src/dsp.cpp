#include "csiwb/dsp.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>

namespace csiwb::dsp {

namespace {

// FFTW planning is not thread-safe; execution with the new-array interface is.
// Plans are unaligned so they can run on any std::vector buffer.
class PlanCache {
 public:
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  fftw_plan get(std::size_t n, int sign) {
    std::lock_guard lock(mutex_);
    auto key = std::make_pair(n, sign);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    CVec in(n), out(n);
    fftw_plan plan = fftw_plan_dft_1d(static_cast<int>(n), reinterpret_cast<fftw_complex*>(in.data()),
                                      reinterpret_cast<fftw_complex*>(out.data()), sign,
                                      FFTW_ESTIMATE | FFTW_UNALIGNED);
    plans_.emplace(key, plan);
    return plan;
  }

 private:
  std::mutex mutex_;
  std::map<std::pair<std::size_t, int>, fftw_plan> plans_;
};

PlanCache& plan_cache() {
  static PlanCache cache;
  return cache;
}

CVec transform(std::span<const Complex> x, int sign) {
  CVec in(x.begin(), x.end());
  CVec out(x.size());
  if (x.empty()) return out;
  fftw_plan plan = plan_cache().get(x.size(), sign);
  fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(in.data()),
                   reinterpret_cast<fftw_complex*>(out.data()));
  return out;
}

}  // namespace

CVec fft(std::span<const Complex> x) { return transform(x, FFTW_FORWARD); }
CVec ifft(std::span<const Complex> x) { return transform(x, FFTW_BACKWARD); }

CVec fft_resample(std::span<const Complex> x, std::size_t out_len) {
  const std::size_t n = x.size();
  if (n == 0 || out_len == 0) return CVec(out_len);
  if (out_len == n) return CVec(x.begin(), x.end());
  CVec spec = fft(x);
  CVec out_spec(out_len);
  const std::size_t keep = std::min(n, out_len);
  // Positive frequencies [0, keep/2), negative frequencies in the tail.
  const std::size_t pos = (keep + 1) / 2;
  const std::size_t neg = keep - pos;
  for (std::size_t k = 0; k < pos; ++k) out_spec[k] = spec[k];
  for (std::size_t k = 1; k <= neg; ++k) out_spec[out_len - k] = spec[n - k];
  CVec out = ifft(out_spec);
  const double scale = 1.0 / static_cast<double>(n);
  for (auto& v : out) v *= scale;
  return out;
}

CVec apply_frequency_response(std::span<const Complex> x, double fs,
                              const std::function<Complex(double)>& response) {
  const std::size_t n = x.size();
  if (n == 0) return {};
  CVec spec = fft(x);
  for (std::size_t k = 0; k < n; ++k) spec[k] *= response(bin_frequency(k, n, fs));
  CVec out = ifft(spec);
  const double scale = 1.0 / static_cast<double>(n);
  for (auto& v : out) v *= scale;
  return out;
}

double mean_power(std::span<const Complex> x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& v : x) acc += std::norm(v);
  return acc / static_cast<double>(x.size());
}

void rotate(std::span<Complex> x, double w, double phase0) {
  // Phasor recursion, re-anchored exactly every block to bound drift.
  constexpr std::size_t kBlock = 256;
  const Complex step = std::polar(1.0, w);
  for (std::size_t b = 0; b < x.size(); b += kBlock) {
    Complex ph = std::polar(1.0, phase0 + w * static_cast<double>(b));
    const std::size_t end = std::min(x.size(), b + kBlock);
    for (std::size_t i = b; i < end; ++i) {
      x[i] *= ph;
      ph *= step;
    }
  }
}

std::size_t fast_fft_size(std::size_t n) {
  for (std::size_t m = std::max<std::size_t>(n, 1);; ++m) {
    std::size_t r = m;
    for (std::size_t f : {2u, 3u, 5u})
      while (r % f == 0) r /= f;
    if (r == 1) return m;
  }
}

}  // namespace csiwb::dsp
