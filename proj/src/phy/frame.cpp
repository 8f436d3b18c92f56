#include "csiwb/phy/frame.hpp"

#include "csiwb/dsp.hpp"
#include "training.hpp"

namespace csiwb::phy {

const char* to_string(Format format) { return format == Format::HT ? "HT" : "NonHT"; }
const char* to_string(GuardInterval guard) { return guard == GuardInterval::Short ? "short" : "long"; }

void FrameConfig::validate() const {
  if (mcs < 0 || mcs > 7) throw DomainError("MCS must lie in [0,7]");
  if (scrambler_seed < 1 || scrambler_seed > 127) throw DomainError("scrambler seed must lie in [1,127]");
  if (n_ess < 0 || n_ess > 3) throw DomainError("extension spatial streams must lie in [0,3]");
  if (format == Format::NonHT) {
    if (n_ess != 0) throw DomainError("NonHT frames carry no HT-LTF extension");
    if (is_ht40(channel_mode) && !ht20_peer)
      throw DomainError("NonHT frames on an HT40 channel must be sent as 20 MHz (ht20_peer)");
  }
  if (payload.size() > max_payload_bytes(format))
    throw DomainError("payload of " + std::to_string(payload.size()) + " bytes exceeds the " +
                      std::to_string(max_payload_bytes(format)) + "-byte limit");
}

std::size_t FrameLayout::data_start(int n_ess) const {
  if (format == Format::NonHT) return 5 * fft_size + symbol_samples(false);
  return ht_ltf_start() + static_cast<std::size_t>(1 + n_ess) * symbol_samples(false);
}

FrameLayout make_layout(Format format, ChannelMode mode, bool ht20_peer, int mcs, GuardInterval guard) {
  FrameLayout l;
  l.format = format;
  l.channel_mode = mode;
  l.ht20_peer = is_ht40(mode) && ht20_peer;
  l.mcs_index = mcs;
  l.mcs = mcs_info(mcs, format == Format::HT);
  const bool ht40 = is_ht40(mode);
  l.fft_size = ht40 ? 128 : 64;
  l.cp_long = l.fft_size / 4;
  l.cp_data = guard == GuardInterval::Short ? l.fft_size / 8 : l.cp_long;

  if (ht40 && !l.ht20_peer) {
    if (format == Format::NonHT) throw DomainError("NonHT frames on an HT40 channel must be sent as 20 MHz");
    l.frame_is_40mhz = true;
    l.legacy_bands = {{-32, {1.0, 0.0}}, {32, {0.0, 1.0}}};
    l.grid = grid_ht40();
    l.interleaver = InterleaverKind::HT40;
  } else {
    // HT40+ keeps its primary channel in the lower half, HT40- in the upper half.
    l.frame_offset = !l.ht20_peer ? 0 : (mode == ChannelMode::HT40Plus ? -32 : 32);
    l.legacy_bands = {{l.frame_offset, {1.0, 0.0}}};
    l.grid = (format == Format::HT ? grid_ht20() : grid_nonht()).shifted(l.frame_offset);
    l.interleaver = format == Format::HT ? InterleaverKind::HT20 : InterleaverKind::Legacy;
  }
  l.norm = 1.0 / std::sqrt(52.0 * static_cast<double>(l.legacy_bands.size()));
  l.n_sd = l.grid.size() - l.grid.pilot_indices.size();
  l.n_bpsc = bits_per_symbol(l.mcs.modulation);
  l.n_cbps = l.n_sd * l.n_bpsc;
  l.n_dbps = l.n_cbps * rate_input_period(l.mcs.rate) / rate_output_period(l.mcs.rate);
  return l;
}

FrameLayout make_layout(const FrameConfig& cfg) {
  return make_layout(cfg.format, cfg.channel_mode, cfg.ht20_peer, cfg.mcs, cfg.guard);
}

std::size_t data_symbol_count(std::size_t psdu_bytes, const FrameLayout& layout) {
  const std::size_t bits = 16 + 8 * psdu_bytes + 6;
  return (bits + layout.n_dbps - 1) / layout.n_dbps;
}

std::size_t max_payload_bytes(Format format) { return (format == Format::HT ? 65535u : 4095u) - 4u; }

std::size_t frame_sample_count(const FrameConfig& cfg) {
  const FrameLayout l = make_layout(cfg);
  return l.data_start(cfg.n_ess) + data_symbol_count(cfg.payload.size() + 4, l) * l.symbol_samples(true);
}

int pilot_polarity(std::size_t n) {
  static const Bits seq = scrambler_sequence(127, 127);
  return seq[n % 127] ? -1 : 1;
}

CVec ofdm_modulate(std::span<const int> indices, std::span<const Complex> values, std::size_t fft_size,
                   double norm) {
  CVec bins(fft_size);
  const auto n = static_cast<long>(fft_size);
  for (std::size_t i = 0; i < indices.size(); ++i) bins[static_cast<std::size_t>((indices[i] + n) % n)] = values[i];
  CVec t = dsp::ifft(bins);
  for (auto& v : t) v *= norm;
  return t;
}

CVec ofdm_demodulate(std::span<const Complex> window, std::span<const int> indices, std::size_t fft_size,
                     double norm) {
  if (window.size() != fft_size) throw DomainError("demodulation window must hold exactly one FFT");
  CVec bins = dsp::fft(window);
  const auto n = static_cast<long>(fft_size);
  const double scale = 1.0 / (norm * static_cast<double>(fft_size));
  CVec out(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) out[i] = bins[static_cast<std::size_t>((indices[i] + n) % n)] * scale;
  return out;
}

CVec add_cyclic_prefix(std::span<const Complex> symbol, std::size_t cp) {
  CVec out;
  out.reserve(symbol.size() + cp);
  out.insert(out.end(), symbol.end() - static_cast<long>(cp), symbol.end());
  out.insert(out.end(), symbol.begin(), symbol.end());
  return out;
}

namespace {

void append(CVec& dst, const CVec& src) { dst.insert(dst.end(), src.begin(), src.end()); }

CVec tone_symbol(const detail::ToneSet& t, const FrameLayout& l) {
  return ofdm_modulate(t.indices, t.values, l.fft_size, l.norm);
}

// 48 coded BPSK bits of a SIGNAL field (rate 1/2, no scrambling).
Bits encode_signal(std::span<const std::uint8_t> bits) { return bcc_encode(bits, CodeRate::R1_2); }

}  // namespace

BasebandBurst assemble_frame(const FrameConfig& cfg) {
  cfg.validate();
  const FrameLayout l = make_layout(cfg);
  const std::size_t n = l.fft_size;

  std::vector<std::uint8_t> psdu(cfg.payload);
  const std::uint32_t fcs = crc32(cfg.payload);
  for (int i = 0; i < 4; ++i) psdu.push_back(static_cast<std::uint8_t>((fcs >> (8 * i)) & 0xffu));
  const std::size_t n_sym = data_symbol_count(psdu.size(), l);

  BasebandBurst burst;
  burst.sample_rate = is_ht40(cfg.channel_mode) ? 40e6 : 20e6;
  CVec& x = burst.samples;
  x.reserve(l.data_start(cfg.n_ess) + n_sym * l.symbol_samples(true));

  // L-STF: 10 short periods.
  const CVec stf = tone_symbol(detail::lstf_tones(l), l);
  for (std::size_t i = 0; i < 5 * n / 2; ++i) x.push_back(stf[i % n]);
  // L-LTF: double guard then two long symbols.
  const CVec ltf = tone_symbol(detail::lltf_tones(l), l);
  x.insert(x.end(), ltf.end() - static_cast<long>(n / 2), ltf.end());
  append(x, ltf);
  append(x, ltf);

  // L-SIG.
  std::size_t lsig_len = psdu.size();
  int rate_code = detail::legacy_rate_code(0);
  if (cfg.format == Format::NonHT)
    rate_code = detail::legacy_rate_code(cfg.mcs);
  else
    lsig_len = detail::ht_lsig_length(l, n_sym, cfg.n_ess);
  const Bits lsig = encode_signal(detail::lsig_bits(rate_code, lsig_len));
  append(x, add_cyclic_prefix(tone_symbol(detail::signal_tones(l, lsig, 0, false), l), l.cp_long));

  if (cfg.format == Format::HT) {
    const Bits htsig = encode_signal(detail::htsig_bits(cfg.mcs, l.frame_is_40mhz, psdu.size(),
                                                        cfg.guard == GuardInterval::Short, cfg.n_ess));
    for (std::size_t s = 0; s < 2; ++s) {
      std::span<const std::uint8_t> half(htsig.data() + 48 * s, 48);
      append(x, add_cyclic_prefix(tone_symbol(detail::signal_tones(l, half, 1 + s, true), l), l.cp_long));
    }
    FrameLayout ht_stf_layout = l;
    if (l.frame_is_40mhz) ht_stf_layout.legacy_bands = {{-32, {1.0, 0.0}}, {32, {1.0, 0.0}}};
    append(x, add_cyclic_prefix(tone_symbol(detail::lstf_tones(ht_stf_layout), l), l.cp_long));
    const CVec htltf = add_cyclic_prefix(tone_symbol(detail::htltf_tones(l), l), l.cp_long);
    for (int i = 0; i <= cfg.n_ess; ++i) append(x, htltf);
  }

  const auto symbols = detail::data_symbols(psdu, l, cfg.scrambler_seed);
  for (const auto& sym : symbols)
    append(x, add_cyclic_prefix(ofdm_modulate(l.grid.indices, sym, n, l.norm), l.cp_data));
  return burst;
}

std::vector<CVec> regenerate_symbols(std::span<const std::uint8_t> payload, const FrameConfig& cfg) {
  const FrameLayout l = make_layout(cfg);
  std::vector<std::uint8_t> psdu(payload.begin(), payload.end());
  const std::uint32_t fcs = crc32(payload);
  for (int i = 0; i < 4; ++i) psdu.push_back(static_cast<std::uint8_t>((fcs >> (8 * i)) & 0xffu));
  return detail::data_symbols(psdu, l, cfg.scrambler_seed);
}

namespace {

double primary_shift(ChannelMode mode) {
  if (mode == ChannelMode::HT40Plus) return -10e6;
  if (mode == ChannelMode::HT40Minus) return 10e6;
  throw DomainError("primary-channel placement needs an HT40+ or HT40- mode");
}

void mix(CVec& x, double f, double fs) {
  dsp::rotate(x, kTwoPi * f / fs);
}

}  // namespace

BasebandBurst place_in_primary(const BasebandBurst& burst20, ChannelMode mode) {
  const double shift = primary_shift(mode);
  BasebandBurst out;
  out.sample_rate = 2.0 * burst20.sample_rate;
  out.center_freq = burst20.center_freq - shift;
  out.samples = dsp::fft_resample(burst20.samples, 2 * burst20.size());
  mix(out.samples, shift, out.sample_rate);
  return out;
}

BasebandBurst extract_primary(const BasebandBurst& burst40, ChannelMode mode) {
  const double shift = primary_shift(mode);
  BasebandBurst out;
  CVec x = burst40.samples;
  mix(x, -shift, burst40.sample_rate);
  out.sample_rate = burst40.sample_rate / 2.0;
  out.center_freq = burst40.center_freq + shift;
  out.samples = dsp::fft_resample(x, burst40.size() / 2);
  return out;
}

}  // namespace csiwb::phy
