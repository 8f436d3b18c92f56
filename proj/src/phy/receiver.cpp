#include "csiwb/phy/receiver.hpp"

#include <algorithm>

#include "csiwb/dsp.hpp"
#include "training.hpp"

namespace csiwb::phy {

namespace {

using detail::ToneSet;

std::span<const Complex> window_at(const BasebandBurst& burst, std::size_t start, std::size_t n,
                                   const char* stage) {
  if (start + n > burst.size())
    throw RxError(std::string("burst ends inside the ") + stage + " field", RxDiagnostics{stage, {}, {}, {}});
  return {burst.samples.data() + start, n};
}

// Demodulates the window starting `l.rx_backoff` samples early (inside the CP)
// and undoes the resulting phase ramp.
CVec demod(const BasebandBurst& burst, std::size_t start, std::span<const int> indices, const FrameLayout& l,
           const char* stage) {
  const std::size_t b = std::min(l.rx_backoff, start);
  CVec y = ofdm_demodulate(window_at(burst, start - b, l.fft_size, stage), indices, l.fft_size, l.norm);
  if (b == 0) return y;
  const double w = kTwoPi * static_cast<double>(b) / static_cast<double>(l.fft_size);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] *= std::polar(1.0, w * indices[i]);
  return y;
}

// Legacy-band channel including the per-band rotation, from both L-LTF symbols.
struct LegacyChannel {
  std::vector<int> indices;
  CVec h;

  Complex at(int k) const {
    auto it = std::lower_bound(indices.begin(), indices.end(), k);
    return h[static_cast<std::size_t>(it - indices.begin())];
  }
};

LegacyChannel legacy_channel(const BasebandBurst& burst, std::size_t offset, const FrameLayout& l) {
  FrameLayout unrotated = l;
  for (auto& b : unrotated.legacy_bands) b.rotation = {1.0, 0.0};
  ToneSet t = detail::lltf_tones(unrotated);
  const std::size_t n = l.fft_size;
  CVec y1 = demod(burst, offset + 3 * n, t.indices, l, "L-LTF");
  CVec y2 = demod(burst, offset + 4 * n, t.indices, l, "L-LTF");
  LegacyChannel ch;
  std::vector<std::size_t> order(t.indices.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return t.indices[a] < t.indices[b]; });
  for (auto i : order) {
    ch.indices.push_back(t.indices[i]);
    ch.h.push_back(0.5 * (y1[i] + y2[i]) / t.values[i]);
  }
  return ch;
}

// Soft bits of one 48-bit SIGNAL symbol, combined over every legacy band.
std::vector<double> signal_soft(const BasebandBurst& burst, std::size_t start, const FrameLayout& l,
                                const LegacyChannel& ch, bool qbpsk, const char* stage) {
  static const std::vector<int> data_idx = grid_nonht().data_indices();
  std::vector<double> soft(48, 0.0);
  for (const auto& band : l.legacy_bands) {
    std::vector<int> idx(data_idx);
    for (int& k : idx) k += band.offset;
    CVec y = demod(burst, start, idx, l, stage);
    for (std::size_t i = 0; i < 48; ++i) {
      const Complex m = y[i] * std::conj(ch.at(idx[i]));
      soft[i] += qbpsk ? m.imag() : m.real();
    }
  }
  return deinterleave(std::span<const double>(soft), InterleaverKind::Legacy, 1);
}

std::size_t bits_value(const Bits& b, std::size_t from, std::size_t count) {
  std::size_t v = 0;
  for (std::size_t i = 0; i < count; ++i) v |= static_cast<std::size_t>(b[from + i] & 1u) << i;
  return v;
}

void set_backoff(FrameLayout& l, const RxConfig& cfg) {
  l.rx_backoff = std::min(cfg.window_backoff * l.fft_size / 64, l.cp_data);
}

FrameLayout layout_for(const RxConfig& cfg, const SignalInfo& sig) {
  FrameLayout l = make_layout(cfg.format, cfg.channel_mode, cfg.ht20_peer, sig.mcs, sig.guard);
  set_backoff(l, cfg);
  return l;
}

// Sample index of the window whose phase the CSI estimate refers to.
double csi_reference_sample(const FrameLayout& l, std::size_t offset) {
  const auto n = static_cast<double>(l.fft_size);
  if (l.format == Format::HT) return static_cast<double>(offset + l.ht_ltf_start() + l.cp_long);
  return static_cast<double>(offset) + 3.5 * n;
}

}  // namespace

FrameLayout rx_layout(const RxConfig& cfg) {
  FrameLayout l = make_layout(cfg.format, cfg.channel_mode, cfg.ht20_peer, 0, GuardInterval::Long);
  set_backoff(l, cfg);
  return l;
}

std::optional<std::size_t> detect_packet(const BasebandBurst& burst, const RxConfig& cfg) {
  const FrameLayout l = rx_layout(cfg);
  const std::size_t n = l.fft_size;
  const std::size_t lag = n / 4;
  const std::size_t win = 2 * lag;
  const std::size_t run = std::max<std::size_t>(1, cfg.detect_run * n / 64);
  const auto& r = burst.samples;
  if (r.size() < 5 * n) return std::nullopt;

  // Sliding delay-autocorrelation, normalized by both window energies.
  const std::size_t last = r.size() - win - lag;
  Complex c{};
  double p1 = 0.0;
  double p2 = 0.0;
  for (std::size_t m = 0; m < win; ++m) {
    c += r[m + lag] * std::conj(r[m]);
    p1 += std::norm(r[m]);
    p2 += std::norm(r[m + lag]);
  }
  std::optional<std::size_t> coarse;
  std::size_t streak = 0;
  for (std::size_t i = 0;; ++i) {
    const double den = std::sqrt(p1 * p2);
    const double metric = den > 0.0 ? std::abs(c) / den : 0.0;
    if (metric >= cfg.detect_threshold) {
      if (++streak >= run) {
        coarse = i + 1 - run;
        break;
      }
    } else {
      streak = 0;
    }
    if (i >= last) break;
    c += r[i + win + lag] * std::conj(r[i + win]) - r[i + lag] * std::conj(r[i]);
    p1 += std::norm(r[i + win]) - std::norm(r[i]);
    p2 += std::norm(r[i + win + lag]) - std::norm(r[i + lag]);
    p1 = std::max(p1, 0.0);
    p2 = std::max(p2, 0.0);
  }
  if (!coarse) return std::nullopt;

  // Coarse CFO over the short-training periods, used to derotate the search span.
  Complex acc{};
  const std::size_t s_end = std::min(*coarse + 2 * n, r.size() - lag);
  for (std::size_t i = *coarse + lag; i < s_end; ++i) acc += r[i + lag] * std::conj(r[i]);
  const double w = std::arg(acc) / static_cast<double>(lag);  // rad/sample

  // Fine timing: matched filter against both L-LTF symbols.
  ToneSet t = detail::lltf_tones(l);
  const CVec ref = ofdm_modulate(t.indices, t.values, n, l.norm);
  const long guess = static_cast<long>(*coarse + 3 * n);
  const long lo = std::max<long>(0, guess - static_cast<long>(n / 2));
  const long hi = std::min<long>(guess + static_cast<long>(n / 2), static_cast<long>(r.size()) - 2 * static_cast<long>(n));
  if (hi < lo) return std::nullopt;
  CVec seg(r.begin() + lo, r.begin() + hi + 2 * static_cast<long>(n));
  dsp::rotate(seg, -w, -w * static_cast<double>(lo));
  auto corr = [&](long p) {
    Complex s{};
    for (std::size_t m = 0; m < n; ++m) s += seg[static_cast<std::size_t>(p - lo) + m] * std::conj(ref[m]);
    return std::abs(s);
  };
  long best = lo;
  double best_v = -1.0;
  for (long p = lo; p <= hi; ++p) {
    const double v = corr(p) + corr(p + static_cast<long>(n));
    if (v > best_v) {
      best_v = v;
      best = p;
    }
  }
  const long start = best - 3 * static_cast<long>(n);
  if (start < -2) return std::nullopt;
  return static_cast<std::size_t>(std::max<long>(start, 0));
}

double estimate_cfo_preamble(const BasebandBurst& burst, std::size_t offset, const RxConfig& cfg) {
  const FrameLayout l = rx_layout(cfg);
  const std::size_t n = l.fft_size;
  const std::size_t lag = n / 4;
  const auto& r = burst.samples;
  if (offset + 5 * n > r.size()) throw DomainError("frame offset leaves no room for the legacy preamble");
  const double fs = burst.sample_rate;

  Complex acc{};
  for (std::size_t i = offset + lag; i + lag < offset + 5 * n / 2; ++i) acc += r[i + lag] * std::conj(r[i]);
  const double coarse = std::arg(acc) * fs / (kTwoPi * static_cast<double>(lag));

  Complex acc2{};
  const std::size_t p = offset + 3 * n;
  for (std::size_t i = p - n / 4; i < p + n; ++i) {
    const double rot = -kTwoPi * coarse * static_cast<double>(n) / fs;
    acc2 += r[i + n] * std::conj(r[i]) * std::polar(1.0, rot);
  }
  const double fine = std::arg(acc2) * fs / (kTwoPi * static_cast<double>(n));
  return coarse + fine;
}

BasebandBurst correct_cfo(const BasebandBurst& burst, double cfo) {
  BasebandBurst out = burst;
  const double w = -kTwoPi * cfo / burst.sample_rate;
  dsp::rotate(out.samples, w);
  return out;
}

SignalInfo decode_signal(const BasebandBurst& burst, std::size_t offset, const RxConfig& cfg) {
  const FrameLayout l = rx_layout(cfg);
  const std::size_t n = l.fft_size;
  SignalInfo sig;
  sig.format = cfg.format;
  RxDiagnostics diag{"SIGNAL", offset, {}, {}};

  const LegacyChannel ch = legacy_channel(burst, offset, l);
  const Bits lsig = bcc_decode_soft(signal_soft(burst, offset + 5 * n + l.cp_long, l, ch, false, "L-SIG"),
                                    CodeRate::R1_2);
  unsigned parity = 0;
  for (std::size_t i = 0; i < 18; ++i) parity ^= lsig[i];
  const bool tail_ok = std::all_of(lsig.begin() + 18, lsig.end(), [](auto b) { return b == 0; });
  int rate_code = 0;
  for (std::size_t i = 0; i < 4; ++i) rate_code = (rate_code << 1) | lsig[i];
  sig.lsig_ok = parity == 0 && tail_ok && lsig[4] == 0;

  if (cfg.format == Format::NonHT) {
    sig.mcs = detail::legacy_mcs_from_rate_code(rate_code);
    sig.psdu_length = bits_value(lsig, 5, 12);
    sig.guard = cfg.nonht_guard;
    if (!sig.lsig_ok || sig.mcs < 0 || sig.psdu_length < 4) {
      diag.signal = sig;
      throw RxError("L-SIG check failed", diag);
    }
    return sig;
  }

  std::vector<double> soft;
  for (std::size_t s = 0; s < 2; ++s) {
    const std::size_t start = offset + 5 * n + (1 + s) * l.symbol_samples(false) + l.cp_long;
    auto part = signal_soft(burst, start, l, ch, true, "HT-SIG");
    soft.insert(soft.end(), part.begin(), part.end());
  }
  const Bits ht = bcc_decode_soft(soft, CodeRate::R1_2);
  const std::uint8_t crc = detail::htsig_crc(std::span<const std::uint8_t>(ht).first(34));
  std::uint8_t rx_crc = 0;
  for (std::size_t i = 0; i < 8; ++i) rx_crc = static_cast<std::uint8_t>((rx_crc << 1) | ht[34 + i]);
  sig.htsig_ok = rx_crc == crc;
  sig.mcs = static_cast<int>(bits_value(ht, 0, 7));
  sig.cbw40 = ht[7] != 0;
  sig.psdu_length = bits_value(ht, 8, 16);
  sig.guard = ht[31] ? GuardInterval::Short : GuardInterval::Long;
  sig.n_ess = static_cast<int>(bits_value(ht, 32, 2));
  diag.signal = sig;
  if (!sig.htsig_ok) throw RxError("HT-SIG CRC failed", diag);
  if (sig.mcs > 7) throw RxError("HT-SIG carries unsupported MCS " + std::to_string(sig.mcs), diag);
  if (sig.cbw40 != l.frame_is_40mhz) throw RxError("HT-SIG bandwidth does not match the receiver mode", diag);
  if (sig.psdu_length < 4) throw RxError("HT-SIG length shorter than the FCS", diag);
  return sig;
}

csi::CsiFrame estimate_csi(const BasebandBurst& burst, std::size_t offset, const RxConfig& cfg) {
  const SignalInfo sig = decode_signal(burst, offset, cfg);
  const FrameLayout l = layout_for(cfg, sig);
  const std::size_t n = l.fft_size;

  csi::CsiFrame frame;
  frame.grid = l.grid;
  frame.grid.spacing = burst.sample_rate / static_cast<double>(n);
  frame.center_freq = burst.center_freq;
  frame.bandwidth = burst.sample_rate;
  frame.channel_mode = cfg.channel_mode;
  frame.source.mcs = sig.mcs;
  frame.values.assign(l.grid.size(), Complex{});

  if (cfg.format == Format::HT) {
    ToneSet t = detail::htltf_tones(l);
    const int count = 1 + sig.n_ess;
    for (int i = 0; i < count; ++i) {
      const std::size_t start = offset + l.ht_ltf_start() + static_cast<std::size_t>(i) * l.symbol_samples(false) +
                                l.cp_long;
      CVec y = demod(burst, start, t.indices, l, "HT-LTF");
      for (std::size_t k = 0; k < y.size(); ++k) frame.values[k] += y[k] / t.values[k];
    }
    for (auto& v : frame.values) v /= static_cast<double>(count);
  } else {
    const LegacyChannel ch = legacy_channel(burst, offset, l);
    for (std::size_t k = 0; k < l.grid.size(); ++k) frame.values[k] = ch.at(l.grid.indices[k]);
  }
  return frame;
}

RxResult equalize_and_decode(const BasebandBurst& burst, std::size_t offset, const csi::CsiFrame& csi,
                             const RxConfig& cfg, double cfo_applied) {
  RxResult res;
  res.signal = decode_signal(burst, offset, cfg);
  res.offset = offset;
  const FrameLayout l = layout_for(cfg, res.signal);
  if (csi.grid.indices != l.grid.indices) throw DomainError("CSI grid does not match the frame layout");
  const std::size_t n_sym = data_symbol_count(res.signal.psdu_length, l);
  const std::size_t sym_len = l.symbol_samples(true);
  const std::size_t data0 = offset + l.data_start(res.signal.n_ess);
  if (data0 + n_sym * sym_len > burst.size())
    throw RxError("burst ends inside the data field", RxDiagnostics{"DATA", offset, {}, res.signal});

  const auto& grid = l.grid;
  std::vector<bool> is_pilot(grid.size(), false);
  for (int p : grid.pilot_indices) is_pilot[static_cast<std::size_t>(grid.position_of(p))] = true;
  std::vector<double> rel(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) rel[k] = std::norm(csi.values[k]);

  std::vector<CVec> ys(n_sym);
  std::vector<double> phases(n_sym, 0.0);
  std::vector<double> soft;
  soft.reserve(n_sym * l.n_cbps);
  double err = 0.0;
  std::size_t err_count = 0;
  for (std::size_t i = 0; i < n_sym; ++i) {
    ys[i] = demod(burst, data0 + i * sym_len + l.cp_data, grid.indices, l, "DATA");
    const CVec pilots = detail::data_pilots(l, i);
    Complex pacc{};
    for (std::size_t k = 0, p = 0; k < grid.size(); ++k) {
      if (is_pilot[k]) pacc += ys[i][k] * std::conj(csi.values[k] * pilots[p++]);
    }
    phases[i] = std::abs(pacc) > 0.0 ? std::arg(pacc) : 0.0;
    const Complex derot = cfg.pilot_tracking ? std::polar(1.0, -phases[i]) : Complex{1.0, 0.0};
    CVec z;
    std::vector<double> w;
    z.reserve(l.n_sd);
    w.reserve(l.n_sd);
    for (std::size_t k = 0; k < grid.size(); ++k) {
      if (is_pilot[k]) continue;
      const Complex h = csi.values[k];
      const Complex zk = std::abs(h) > 0.0 ? ys[i][k] / h * derot : Complex{};
      z.push_back(zk);
      w.push_back(rel[k]);
      err += std::norm(zk - slice(zk, l.mcs.modulation));
      ++err_count;
    }
    auto s = demap_soft(z, w, l.mcs.modulation);
    auto d = deinterleave(std::span<const double>(s), l.interleaver, l.n_bpsc);
    soft.insert(soft.end(), d.begin(), d.end());
  }
  res.evm_db = db10(std::max(err / static_cast<double>(std::max<std::size_t>(err_count, 1)), 1e-30));

  const Bits coded_bits = bcc_decode_soft(soft, l.mcs.rate);
  res.scrambler_seed = recover_scrambler_seed(coded_bits);
  const std::size_t psdu_bits = 8 * res.signal.psdu_length;
  std::vector<std::uint8_t> psdu;
  if (res.scrambler_seed != 0) {
    const Bits plain = scramble(res.scrambler_seed, coded_bits);
    psdu = bits_to_bytes(std::span<const std::uint8_t>(plain).subspan(16, psdu_bits));
    res.payload.assign(psdu.begin(), psdu.end() - 4);
    std::uint32_t fcs = 0;
    for (int b = 0; b < 4; ++b) fcs |= static_cast<std::uint32_t>(psdu[psdu.size() - 4 + static_cast<std::size_t>(b)]) << (8 * b);
    res.fcs_ok = crc32(res.payload) == fcs;
  }

  res.csi = csi;
  res.csi.source.mcs = res.signal.mcs;
  res.csi.source.seed = res.scrambler_seed;
  res.cfo_preamble = cfo_applied;
  res.sym_duration = static_cast<double>(sym_len) / burst.sample_rate;

  if (res.scrambler_seed != 0) {
    const auto xs = detail::data_symbols(psdu, l, res.scrambler_seed);
    const double ref = csi_reference_sample(l, offset);
    const double w = kTwoPi * cfo_applied / burst.sample_rate;
    res.data_symbol_csi.resize(n_sym);
    res.data_symbol_csi_tracked.resize(n_sym);
    for (std::size_t i = 0; i < n_sym; ++i) {
      const double start = static_cast<double>(data0 + i * sym_len + l.cp_data);
      const Complex restore = std::polar(1.0, w * (start - ref));
      const Complex untrack = std::polar(1.0, -phases[i]);
      CVec h(grid.size());
      CVec ht(grid.size());
      for (std::size_t k = 0; k < grid.size(); ++k) {
        const Complex hk = ys[i][k] / xs[i][k];
        h[k] = hk * restore;
        ht[k] = hk * untrack;
      }
      res.data_symbol_csi[i] = std::move(h);
      res.data_symbol_csi_tracked[i] = std::move(ht);
    }
  }
  return res;
}

RxResult receive(const BasebandBurst& burst, const RxConfig& cfg) {
  const auto offset = detect_packet(burst, cfg);
  if (!offset) throw RxError("no packet detected", RxDiagnostics{"DETECT", {}, {}, {}});
  double cfo = 0.0;
  try {
    cfo = estimate_cfo_preamble(burst, *offset, cfg);
    const BasebandBurst corrected = correct_cfo(burst, cfo);
    const csi::CsiFrame csi = estimate_csi(corrected, *offset, cfg);
    RxResult res = equalize_and_decode(corrected, *offset, csi, cfg, cfo);
    return res;
  } catch (const RxError& e) {
    RxDiagnostics d = e.diagnostics();
    d.offset = *offset;
    d.cfo = cfo;
    throw RxError(e.what(), d);
  } catch (const DomainError& e) {
    throw RxError(e.what(), RxDiagnostics{"PREAMBLE", *offset, cfo, {}});
  }
}

}  // namespace csiwb::phy
