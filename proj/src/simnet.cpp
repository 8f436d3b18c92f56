#include "csiwb/simnet.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <bit>
#include <random>

#include "csiwb/dsp.hpp"

namespace csiwb::sim {

// ---- scheduler ---------------------------------------------------------------

Scheduler::EventId Scheduler::schedule(Micros at, std::string label, Action action) {
  const Micros t = std::max(at, now_);
  const EventId id = next_++;
  queue_.emplace(std::pair{t, id}, Pending{std::move(label), std::move(action)});
  when_.emplace(id, t);
  return id;
}

Scheduler::EventId Scheduler::schedule_in(Micros delay, std::string label, Action action) {
  return schedule(now_ + std::max(delay, 0.0), std::move(label), std::move(action));
}

bool Scheduler::cancel(EventId id) {
  auto it = when_.find(id);
  if (it == when_.end()) return false;
  queue_.erase({it->second, id});
  when_.erase(it);
  return true;
}

std::size_t Scheduler::run_until_idle(std::size_t max_events) {
  std::size_t ran = 0;
  while (!queue_.empty() && ran < max_events) {
    auto node = queue_.extract(queue_.begin());
    const auto [t, id] = node.key();
    when_.erase(id);
    now_ = t;
    if (tracing_) trace_.push_back({t, id, node.mapped().label});
    node.mapped().action();
    ++ran;
  }
  return ran;
}

void Scheduler::note(std::string label) {
  if (tracing_) trace_.push_back({now_, next_++, std::move(label)});
}

std::string format_trace(const std::vector<TraceEntry>& trace) {
  std::string out;
  for (const auto& e : trace) out += fmt::format("{:.3f} {} {}\n", e.time, e.seq, e.label);
  return out;
}

// ---- NICs --------------------------------------------------------------------

const char* to_string(Rounding r) {
  switch (r) {
    case Rounding::Nearest:
      return "nearest";
    case Rounding::Lower:
      return "lower";
    case Rounding::Upper:
      return "upper";
  }
  return "?";
}

Rounding rounding_from_string(const std::string& text) {
  if (text == "nearest") return Rounding::Nearest;
  if (text == "lower") return Rounding::Lower;
  if (text == "upper") return Rounding::Upper;
  throw DomainError("unknown rounding '" + text + "' (nearest, lower, upper)");
}

Tuning tune_for(const NicConfig& cfg, double cf, double sf) {
  Tuning t;
  t.requested_cf = cf;
  t.requested_sf = sf;
  const auto band = cfg.band ? cfg.band : clocking::band_for_carrier(cf);
  if (!band) throw DomainError(fmt::format("carrier {:.3f} Hz is in no supported band", cf));
  t.band = *band;
  const auto q = clocking::quantize_carrier(cf, t.band);
  switch (cfg.rounding) {
    case Rounding::Nearest:
      t.cf = q.chosen;
      break;
    case Rounding::Lower:
      t.cf = q.lower;
      break;
    case Rounding::Upper:
      t.cf = q.upper;
      break;
  }
  t.quad = clocking::quad_for_bandwidth(sf);
  t.sf = clocking::bandwidth_for_quad(t.quad);
  return t;
}

namespace {

int lowest_chain(unsigned mask, const char* what) {
  if (mask == 0 || mask > 7) throw DomainError(fmt::format("{} mask {} must select chains 1..3 (1-7)", what, mask));
  return std::countr_zero(mask);
}

}  // namespace

VirtualNic::VirtualNic(NicConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.profile.validate();
  lowest_chain(cfg_.txcm, "txcm");
  lowest_chain(cfg_.rxcm, "rxcm");
}

const Tuning& VirtualNic::tune(double cf, double sf) {
  tuning_ = tune_for(cfg_, cf, sf);
  return tuning_;
}

int VirtualNic::tx_chain() const { return lowest_chain(cfg_.txcm, "txcm"); }
int VirtualNic::rx_chain() const { return lowest_chain(cfg_.rxcm, "rxcm"); }

phy::FrameConfig VirtualNic::frame_for(std::vector<std::uint8_t> payload, int mcs, int n_ess,
                                       phy::GuardInterval guard) const {
  phy::FrameConfig f;
  f.format = cfg_.format;
  f.channel_mode = cfg_.channel_mode;
  f.mcs = mcs;
  f.n_ess = n_ess;
  f.guard = guard;
  f.payload = std::move(payload);
  return f;
}

phy::RxConfig VirtualNic::rx_config() const {
  phy::RxConfig rc;
  rc.format = cfg_.format;
  rc.channel_mode = cfg_.channel_mode;
  rc.nonht_guard = cfg_.nonht_guard;
  return rc;
}

// ---- link --------------------------------------------------------------------

const char* to_string(Fidelity f) { return f == Fidelity::Waveform ? "waveform" : "analytic"; }

Fidelity fidelity_from_string(const std::string& text) {
  if (text == "waveform") return Fidelity::Waveform;
  if (text == "analytic") return Fidelity::Analytic;
  throw DomainError("unknown fidelity '" + text + "' (waveform, analytic)");
}

void LinkConfig::validate() const {
  if (!(latency >= 0.0)) throw DomainError("link latency must be non-negative");
  if (!(loss_prob >= 0.0 && loss_prob <= 1.0)) throw DomainError("loss probability must lie in [0, 1]");
  for (const auto& p : channel) p.validate();
  for (const auto& p : air)
    if (!(p.delay >= 0.0 && std::isfinite(p.delay) && std::isfinite(std::abs(p.gain))))
      throw DomainError("air path delays must be finite and non-negative");
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t key(std::uint64_t seed, std::uint64_t index, std::uint64_t stream) {
  return splitmix64(splitmix64(splitmix64(seed) ^ index) ^ stream);
}

}  // namespace

double keyed_uniform(std::uint64_t seed, std::uint64_t index, std::uint64_t stream) {
  return static_cast<double>(key(seed, index, stream) >> 11) * 0x1.0p-53;
}

bool tunings_overlap(const Tuning& tx, const Tuning& rx) {
  // The receiver's CFO estimator covers +-fs/32; wider bands must nest.
  const double lo = std::min(tx.sf, rx.sf);
  const double hi = std::max(tx.sf, rx.sf);
  return std::abs(tx.cf - rx.cf) <= (hi - lo) / 2.0 + lo / 32.0;
}

VirtualLink::VirtualLink(Scheduler& sched, VirtualNic& a, VirtualNic& b, LinkConfig cfg)
    : sched_(sched), a_(a), b_(b), cfg_(std::move(cfg)) {
  cfg_.validate();
}

void VirtualLink::set_handler(int side, Handler handler) { handlers_.at(static_cast<std::size_t>(side)) = std::move(handler); }

bool VirtualLink::mistuned() const {
  return a_.tuning().cf != b_.tuning().cf || a_.tuning().sf != b_.tuning().sf;
}

std::uint64_t VirtualLink::transmit(int side, const phy::FrameConfig& frame, bool data) {
  return send(side, &frame, nullptr, data);
}

std::uint64_t VirtualLink::transmit_burst(int side, const phy::BasebandBurst& burst) {
  return send(side, nullptr, &burst, false);
}

phy::BasebandBurst VirtualLink::propagate(const phy::BasebandBurst& burst, const VirtualNic& tx, const VirtualNic& rx,
                                          int direction, double extra_cfo, std::uint64_t index) const {
  phy::BasebandBurst x = burst;
  x.sample_rate = tx.tuning().sf;
  x.center_freq = tx.tuning().cf;
  x = imp::tx_chain(x, tx.config().profile);
  const double fs_rx = rx.tuning().sf;
  if (fs_rx != x.sample_rate) {
    const auto n = static_cast<std::size_t>(std::llround(static_cast<double>(x.size()) * fs_rx / x.sample_rate));
    x.samples = dsp::fft_resample(x.samples, n);
    x.sample_rate = fs_rx;
  }
  x = imp::apply_air_channel(x, cfg_.air, tx.tuning().cf);
  x = imp::channel(x, cfg_.channel[static_cast<std::size_t>(direction)], extra_cfo, key(cfg_.seed, index, 1));
  x = imp::rx_chain(x, rx.config().profile);
  x.center_freq = rx.tuning().cf;
  return x;
}

phy::RxResult VirtualLink::analytic_receive(const phy::FrameConfig& frame, const Tuning& tx, const Tuning& rx,
                                            int direction, double cfo, std::uint64_t index) const {
  // Per-tone product of the analytic Tx, channel and Rx responses, with complex
  // Gaussian estimation noise at the channel SNR and the CFO/SFO phase ramp on the data train.
  const auto& chan = cfg_.channel[static_cast<std::size_t>(direction)];
  const VirtualNic& txn = direction == 0 ? a_ : b_;
  const VirtualNic& rxn = direction == 0 ? b_ : a_;
  const phy::FrameLayout layout = phy::make_layout(frame);
  const double fs = rx.sf;
  const double spacing = fs / static_cast<double>(layout.fft_size);
  std::mt19937_64 rng(key(cfg_.seed, index, 2));
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double sigma = chan.snr_db ? std::sqrt(std::pow(10.0, -*chan.snr_db / 10.0) / 2.0) : 0.0;
  auto noise = [&] { return sigma > 0.0 ? Complex{gauss(rng), gauss(rng)} * sigma : Complex{}; };

  phy::RxResult res;
  res.csi.grid = layout.grid;
  res.csi.grid.spacing = spacing;
  res.csi.bandwidth = fs;
  res.csi.center_freq = rx.cf;
  res.csi.channel_mode = frame.channel_mode;
  res.csi.source.tx_id = txn.config().id;
  res.csi.source.rx_id = rxn.config().id;
  res.csi.source.mcs = frame.mcs;
  res.csi.source.seed = frame.scrambler_seed;
  CVec h(layout.grid.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double f = spacing * layout.grid.indices[i];
    Complex m{};
    for (const auto& tap : chan.multipath)
      m += tap.gain * std::polar(1.0, -kTwoPi * f * static_cast<double>(tap.delay) / tx.sf);
    if (chan.multipath.empty()) m = 1.0;
    if (!cfg_.air.empty()) m *= imp::air_channel_response(cfg_.air, tx.cf, f);
    h[i] = imp::tx_response(f, tx.sf, txn.config().profile) * m * imp::rx_response(f, fs, rxn.config().profile);
  }
  res.csi.values = h;
  for (auto& v : res.csi.values) v += noise();
  res.payload = frame.payload;
  res.fcs_ok = true;
  res.cfo_preamble = cfo;
  res.evm_db = chan.snr_db ? -*chan.snr_db : -100.0;
  res.signal.format = frame.format;
  res.signal.mcs = frame.mcs;
  res.signal.psdu_length = frame.payload.size() + 4;
  res.signal.guard = frame.guard;
  res.signal.n_ess = frame.n_ess;
  res.signal.cbw40 = layout.frame_is_40mhz;
  res.signal.lsig_ok = res.signal.htsig_ok = true;
  res.scrambler_seed = frame.scrambler_seed;
  res.sym_duration = static_cast<double>(layout.symbol_samples(true)) / fs;
  const std::size_t n_sym = phy::data_symbol_count(frame.payload.size() + 4, layout);
  const double zeta = chan.sfo_ppm * 1e-6;
  for (std::size_t s = 0; s < n_sym; ++s) {
    CVec hs(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) {
      const double f = spacing * layout.grid.indices[i];
      const double phase = kTwoPi * static_cast<double>(s) * res.sym_duration * (cfo + f * zeta);
      hs[i] = h[i] * std::polar(1.0, phase) + noise();
    }
    res.data_symbol_csi.push_back(hs);
  }
  res.data_symbol_csi_tracked = res.data_symbol_csi;
  return res;
}

std::uint64_t VirtualLink::send(int side, const phy::FrameConfig* frame, const phy::BasebandBurst* burst, bool data) {
  if (side != 0 && side != 1) throw DomainError("link side must be 0 or 1");
  const std::uint64_t index = next_index_++;
  ++stats_.sent;
  const bool is_data = frame != nullptr && data;
  if (is_data && mistuned()) ++stats_.mistuned_in_flight;
  const std::string tag = fmt::format("msg {} {}->{}", index, side == 0 ? "a" : "b", side == 0 ? "b" : "a");

  // Loss is decided up front from (seed, index) alone.
  if (cfg_.loss_prob > 0.0 && keyed_uniform(cfg_.seed, index, 0) < cfg_.loss_prob) {
    ++stats_.lost;
    sched_.note(tag + " lost");
    return index;
  }
  const Tuning tx_tuning = nic(side).tuning();
  const Micros sent_at = sched_.now();
  std::optional<phy::FrameConfig> frame_copy;
  std::optional<phy::BasebandBurst> burst_copy;
  if (frame) frame_copy = *frame;
  if (burst) burst_copy = *burst;

  sched_.schedule_in(cfg_.latency, tag + " deliver",
                     [this, side, index, is_data, tx_tuning, sent_at, frame_copy = std::move(frame_copy),
                      burst_copy = std::move(burst_copy), tag]() {
    const int to = 1 - side;
    VirtualNic& rx = nic(to);
    Arrival arr;
    arr.message_index = index;
    arr.from = side;
    arr.sent_at = sent_at;
    arr.arrived_at = sched_.now();
    arr.tx_tuning = tx_tuning;
    arr.rx_tuning = rx.tuning();
    if (is_data && mistuned()) ++stats_.mistuned_in_flight;
    if (!tunings_overlap(tx_tuning, arr.rx_tuning)) {
      ++stats_.off_channel;
      sched_.note(fmt::format("{} dropped: tuned {:.3f}/{:.0f} vs {:.3f}/{:.0f}", tag, tx_tuning.cf, tx_tuning.sf,
                              arr.rx_tuning.cf, arr.rx_tuning.sf));
      return;
    }
    const auto& chan = cfg_.channel[static_cast<std::size_t>(side)];
    const double quant = cfg_.quantization_cfo ? tx_tuning.cf - arr.rx_tuning.cf : 0.0;
    arr.injected_cfo = quant + chan.cfo;

    // Propagation sees the transmitter as it was tuned at send time.
    VirtualNic tx_view = nic(side);
    tx_view.tune(tx_tuning.requested_cf, tx_tuning.requested_sf);

    if (burst_copy) {
      arr.burst = propagate(*burst_copy, tx_view, rx, side, quant, index);
    } else if (cfg_.fidelity == Fidelity::Analytic) {
      arr.rx = analytic_receive(*frame_copy, tx_tuning, arr.rx_tuning, side, arr.injected_cfo, index);
    } else {
      arr.burst = propagate(phy::assemble_frame(*frame_copy), tx_view, rx, side, quant, index);
      try {
        phy::RxResult r = phy::receive(*arr.burst, rx.rx_config());
        r.csi.source.tx_id = tx_view.config().id;
        r.csi.source.rx_id = rx.config().id;
        if (r.fcs_ok) {
          arr.rx = std::move(r);
        } else {
          arr.error = "FCS mismatch";
        }
      } catch (const phy::RxError& e) {
        arr.error = e.what();
      }
      if (!arr.rx) {
        ++stats_.undecodable;
        sched_.note(tag + " undecodable: " + arr.error);
      }
    }
    ++stats_.delivered;
    if (const auto& h = handlers_[static_cast<std::size_t>(to)]) h(arr);
  });
  return index;
}

}  // namespace csiwb::sim
