#include "csiwb/cli.hpp"

#include <fmt/format.h>

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>

#include "csiwb/capture.hpp"
#include "csiwb/clocking.hpp"
#include "csiwb/csi/analysis.hpp"
#include "csiwb/csi/distortion.hpp"
#include "csiwb/csi/stitch.hpp"
#include "csiwb/echoprobe.hpp"
#include "csiwb/export.hpp"
#include "csiwb/scan.hpp"

namespace csiwb::cli {

namespace {

/// Bad flags, malformed values or unreadable inputs.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
}

io::Capture load_capture(const std::string& path) {
  if (!std::filesystem::is_regular_file(path)) throw UsageError("cannot read capture '" + path + "'");
  return io::read_capture(path);
}

std::vector<double> range_flag(const std::string& flag, const std::string& text) {
  try {
    return echo::expand_range(text);
  } catch (const DomainError& e) {
    throw UsageError(flag + ": " + e.what());
  }
}

template <typename F>
auto usage_guard(F&& f) {
  try {
    return f();
  } catch (const DomainError& e) {
    throw UsageError(e.what());
  }
}

phy::GuardInterval guard_from(const std::string& gi) {
  if (gi == "long") return phy::GuardInterval::Long;
  if (gi == "short") return phy::GuardInterval::Short;
  throw UsageError("--gi must be long or short");
}

phy::Format format_from(const std::string& f) {
  if (f == "ht") return phy::Format::HT;
  if (f == "nonht") return phy::Format::NonHT;
  throw UsageError("--format must be ht or nonht");
}

/// Channel part of a profile (multipath, SFO, CFO, AWGN); front-end stages off.
imp::ImpairmentProfile channel_of(const imp::ImpairmentProfile& p, std::optional<double> snr, std::optional<double> cfo,
                                  std::optional<double> sfo) {
  imp::ImpairmentProfile c = imp::ImpairmentProfile::clean();
  c.name = p.name + "/channel";
  c.multipath = p.multipath;
  c.cfo = cfo.value_or(p.cfo);
  c.sfo_ppm = sfo.value_or(p.sfo_ppm);
  c.snr_db = snr ? snr : (p.snr_db ? p.snr_db : std::optional<double>(30.0));
  return c;
}

std::vector<csi::CsiFrame> frames_of(const io::Capture& cap, const std::string& tx_id, const std::string& rx_id) {
  std::vector<csi::CsiFrame> frames;
  for (const auto& r : cap.records) {
    auto f = io::frame_from_record(r);
    f.source.tx_id = tx_id;
    f.source.rx_id = rx_id;
    frames.push_back(std::move(f));
  }
  return frames;
}

io::Capture select_sf(const io::Capture& cap, std::optional<double> sf) {
  if (cap.records.empty()) return cap;
  const auto want = static_cast<std::uint64_t>(std::llround(sf.value_or(static_cast<double>(cap.records[0].sf_hz))));
  io::Capture out;
  for (const auto& r : cap.records)
    if (r.sf_hz == want) out.records.push_back(r);
  return out;
}

std::string stem_with(const std::string& path, const std::string& suffix) {
  std::filesystem::path p(path);
  return (p.parent_path() / p.stem()).string() + suffix;
}

// ---- subcommands -----------------------------------------------------------------

struct ScanArgs {
  std::string cf = "2.412e9";
  std::string sf = "20e6";
  std::size_t repeat = 1;
  double delay = 0.0;
  int mcs = 0;
  int ness = 0;
  unsigned txcm = 1;
  unsigned rxcm = 1;
  std::string mode = "initiator";
  std::string profile = "tracked20";
  std::uint64_t seed = 0;
  std::string out;
  std::string responder_out;
  std::string report;
  std::string trace;
  double loss = 0.0;
  double latency = 50.0;
  std::size_t retries = 5;
  double retry_timeout = 2000.0;
  std::string fidelity = "waveform";
  std::string format = "ht";
  std::string channel_mode = "HT20";
  std::string gi = "long";
  std::string rounding_initiator = "nearest";
  std::string rounding_responder = "nearest";
  std::optional<double> snr;
  std::optional<double> cfo;
  std::optional<double> sfo;
};

int do_scan(const ScanArgs& a, std::ostream& out) {
  echo::ScanPlan plan;
  plan.cf_points = range_flag("--cf", a.cf);
  plan.sf_points = range_flag("--sf", a.sf);
  plan.repeat = a.repeat;
  plan.delay_us = a.delay;
  plan.tx = {a.mcs, a.ness, a.txcm, a.rxcm};
  echo::ScanConfig cfg;
  const auto profile = usage_guard([&] { return imp::load_profile(a.profile); });
  usage_guard([&] {
    plan.validate();
    cfg.initiator.profile = cfg.responder.profile = profile;
    cfg.initiator.format = cfg.responder.format = format_from(a.format);
    cfg.initiator.channel_mode = cfg.responder.channel_mode = channel_mode_from_string(a.channel_mode);
    cfg.initiator.rounding = sim::rounding_from_string(a.rounding_initiator);
    cfg.responder.rounding = sim::rounding_from_string(a.rounding_responder);
    cfg.link.fidelity = sim::fidelity_from_string(a.fidelity);
    return 0;
  });
  cfg.link.channel = {channel_of(profile, a.snr, a.cfo, a.sfo), channel_of(profile, a.snr, a.cfo, a.sfo)};
  cfg.link.latency = a.latency;
  cfg.link.loss_prob = a.loss;
  cfg.link.seed = a.seed;
  cfg.protocol.max_retries = a.retries;
  cfg.protocol.retry_timeout_us = a.retry_timeout;
  cfg.guard = guard_from(a.gi);
  cfg.keep_trace = !a.trace.empty();
  usage_guard([&] {
    cfg.link.validate();
    return 0;
  });

  const echo::ScanResult res = echo::run_scan(plan, cfg);
  io::write_capture(a.out, res.initiator);
  const std::string resp = a.responder_out.empty() ? stem_with(a.out, ".responder.csi") : a.responder_out;
  io::write_capture(resp, res.responder);
  const std::string report = a.report.empty() ? stem_with(a.out, ".json") : a.report;
  write_text(report, echo::report_to_json(res.report));
  if (!a.trace.empty()) write_text(a.trace, sim::format_trace(res.trace));

  const auto& r = res.report;
  out << fmt::format("grid points      {} ({} cf x {} sf), repeat {}\n", plan.n_points(), plan.cf_points.size(),
                     plan.sf_points.size(), plan.repeat);
  out << fmt::format("records          {} of {}\n", r.records, plan.n_points() * plan.repeat);
  out << fmt::format("failed exchanges {} ({} points flagged)\n", r.failed_exchanges, r.failed_points);
  out << fmt::format("messages         {} (lost {}, off-channel {}, undecodable {})\n", r.messages, r.link_stats.lost,
                     r.link_stats.off_channel, r.link_stats.undecodable);
  out << fmt::format("round trip       max {:.3f} us, mean {:.3f} us\n", r.rtt_max_us, r.rtt_mean_us);
  out << fmt::format("virtual duration {:.3f} us\n", r.duration_us);
  out << fmt::format("wrote {} , {} , {}\n", a.out, resp, report);
  return r.finished ? kOk : kRuntimeFailure;
}

struct LoopbackArgs {
  std::string format = "ht";
  std::string channel_mode = "HT20";
  int mcs = 0;
  int ness = 0;
  std::string gi = "long";
  std::size_t payload = 200;
  std::size_t count = 1;
  std::string profile = "default20";
  std::string rx_profile;
  double cf = 5.2e9;
  std::optional<double> sf;
  std::uint64_t seed = 0;
  std::optional<double> snr;
  std::optional<double> cfo;
  std::optional<double> sfo;
  std::string out;
  std::string iq_out;
};

int do_loopback(const LoopbackArgs& a, std::ostream& out) {
  sim::NicConfig tx;
  sim::NicConfig rx;
  tx.id = "tx";
  rx.id = "rx";
  const auto tx_profile = usage_guard([&] { return imp::load_profile(a.profile); });
  const auto rx_profile = a.rx_profile.empty() ? tx_profile : usage_guard([&] { return imp::load_profile(a.rx_profile); });
  tx.profile = tx_profile;
  rx.profile = rx_profile;
  tx.format = rx.format = format_from(a.format);
  tx.channel_mode = rx.channel_mode = usage_guard([&] { return channel_mode_from_string(a.channel_mode); });
  tx.nonht_guard = rx.nonht_guard = guard_from(a.gi);
  const double sf = a.sf.value_or(is_ht40(tx.channel_mode) ? 40e6 : 20e6);

  sim::Scheduler sched;
  sched.set_tracing(false);
  sim::VirtualNic na(tx);
  sim::VirtualNic nb(rx);
  usage_guard([&] {
    na.tune(a.cf, sf);
    nb.tune(a.cf, sf);
    return 0;
  });
  sim::LinkConfig lc;
  lc.seed = a.seed;
  lc.channel = {channel_of(tx_profile, a.snr, a.cfo, a.sfo), channel_of(tx_profile, a.snr, a.cfo, a.sfo)};
  sim::VirtualLink link(sched, na, nb, lc);
  io::Capture cap;
  std::size_t ok = 0;
  link.set_handler(1, [&](const sim::Arrival& arr) {
    if (!arr.rx) {
      out << fmt::format("frame {}: not decoded ({})\n", arr.message_index, arr.error);
      return;
    }
    ++ok;
    const auto& r = *arr.rx;
    std::vector<double> mag;
    for (auto v : r.csi.values) mag.push_back(db20(std::abs(v)));
    out << fmt::format("frame {}: fcs ok, mcs {}, {} data symbols, evm {:.2f} dB, cfo {:.3f} Hz, distortion {}\n",
                       arr.message_index, r.signal.mcs, r.data_symbol_csi.size(), r.evm_db, r.cfo_preamble,
                       csi::to_string(csi::classify_distortion(mag)));
    cap.records.push_back(io::record_from_rx(r, arr.arrived_at * 1e-6, a.cf));
  });

  std::mt19937_64 rng(a.seed);
  const auto guard = guard_from(a.gi);
  for (std::size_t i = 0; i < a.count; ++i) {
    std::vector<std::uint8_t> payload(a.payload);
    for (auto& b : payload) b = static_cast<std::uint8_t>(rng() & 0xff);
    const auto frame = usage_guard([&] {
      auto f = na.frame_for(payload, a.mcs, a.ness, guard);
      f.validate();
      return f;
    });
    if (!a.iq_out.empty() && i == 0) {
      auto burst = phy::assemble_frame(frame);
      burst.sample_rate = na.tuning().sf;
      burst.center_freq = na.tuning().cf;
      io::write_iq(a.iq_out + ".tx.cf32", burst);
      io::write_iq(a.iq_out + ".rx.cf32", link.propagate(burst, na, nb, 0, na.tuning().cf - nb.tuning().cf, 0));
    }
    link.transmit(0, frame);
    sched.run_until_idle();
  }
  if (!a.out.empty()) io::write_capture(a.out, cap);
  out << fmt::format("decoded {} of {}\n", ok, a.count);
  return ok == a.count ? kOk : kRuntimeFailure;
}

struct CalibrateArgs {
  std::string in;
  std::string out;
  std::string tx_id = "tx";
  std::string rx_id = "rx";
  std::optional<double> sf;
};

int do_calibrate(const CalibrateArgs& a, std::ostream& out) {
  const auto cap = select_sf(load_capture(a.in), a.sf);
  const auto frames = frames_of(cap, a.tx_id, a.rx_id);
  const auto t = csi::build_distortion_template(frames);
  csi::save_template(a.out, t);
  const auto m = csi::shape_metrics(t.mag_db);
  out << fmt::format("template from {} frames, {} tones, bandwidth {:.3f} Hz\n", t.n_frames, t.grid.size(),
                     t.combo_key.bandwidth);
  out << fmt::format("range {:.3f} dB, centre dip {:.3f} dB, edge drop {:.3f} dB, asymmetry {:.3f} dB\n", m.range_db,
                     m.center_dip_db, m.edge_drop_db, m.asymmetry_db);
  out << fmt::format("distortion {}\n", csi::to_string(csi::classify_distortion(t)));
  return kOk;
}

struct CleanArgs {
  std::string in;
  std::string tmpl;
  std::string out;
  std::string tx_id = "tx";
  std::string rx_id = "rx";
};

int do_clean(const CleanArgs& a, std::ostream& out) {
  auto cap = load_capture(a.in);
  if (!std::filesystem::is_regular_file(a.tmpl)) throw UsageError("cannot read template '" + a.tmpl + "'");
  const auto t = csi::load_template(a.tmpl);
  for (auto& rec : cap.records) {
    auto f = io::frame_from_record(rec);
    f.source.tx_id = a.tx_id;
    f.source.rx_id = a.rx_id;
    const auto cleaned = csi::remove_distortion(f, t);
    for (std::size_t k = 0; k < rec.csi.size(); ++k)
      rec.csi[k] = {static_cast<float>(cleaned.values[k].real()), static_cast<float>(cleaned.values[k].imag())};
    // The data train gets the same per-tone correction.
    const std::size_t n = rec.tones.size();
    for (std::size_t s = 0; s < rec.n_data_symbols; ++s) {
      for (std::size_t k = 0; k < n; ++k) {
        const Complex v(rec.data_csi[s * n + k].real(), rec.data_csi[s * n + k].imag());
        const Complex c = v * std::polar(std::pow(10.0, -t.mag_db[k] / 20.0), -t.phase_rad[k]);
        rec.data_csi[s * n + k] = {static_cast<float>(c.real()), static_cast<float>(c.imag())};
      }
    }
  }
  io::write_capture(a.out, cap);
  out << fmt::format("cleaned {} records\n", cap.records.size());
  return kOk;
}

struct StitchArgs {
  std::string in;
  std::string out;
  std::string tmpl;
  std::optional<double> sf;
};

int do_stitch(const StitchArgs& a, std::ostream& out) {
  const auto cap = select_sf(load_capture(a.in), a.sf);
  if (cap.records.empty()) throw std::runtime_error("capture holds no records to stitch");
  auto frames = frames_of(cap, "tx", "rx");
  if (!a.tmpl.empty()) {
    if (!std::filesystem::is_regular_file(a.tmpl)) throw UsageError("cannot read template '" + a.tmpl + "'");
    const auto t = csi::load_template(a.tmpl);
    for (auto& f : frames) {
      f.source.tx_id = t.combo_key.tx_id;
      f.source.rx_id = t.combo_key.rx_id;
      f = csi::remove_distortion(f, t);
    }
  }
  const auto s = csi::stitch(frames);
  std::string csv = "freq_hz,mag_db,phase_rad\n";
  const auto ph = csi::unwrapped_phase(s.values);
  for (std::size_t k = 0; k < s.freq.size(); ++k)
    csv += fmt::format("{:.3f},{:.6f},{:.6f}\n", s.freq[k], db20(std::abs(s.values[k])), ph[k]);
  write_text(a.out, csv);
  out << fmt::format("stitched {} frames into {} tones, {:.3f} Hz to {:.3f} Hz\n", frames.size(), s.freq.size(),
                     s.freq.front(), s.freq.back());
  out << fmt::format("overlap residual {:.4f} dB rms, {:.4f} rad rms over {} tone pairs\n",
                     s.overlap_residual.mag_db_rms, s.overlap_residual.phase_rad_rms, s.overlap_residual.n_tones);
  return kOk;
}

struct CfoSfoArgs {
  std::string in;
  std::string out;
  std::string gi = "long";
  std::string method = "cumulative";
};

int do_cfosfo(const CfoSfoArgs& a, std::ostream& out) {
  const auto cap = load_capture(a.in);
  const bool short_gi = guard_from(a.gi) == phy::GuardInterval::Short;
  csi::CfoSfoMethod method = csi::CfoSfoMethod::CumulativePhase;
  if (a.method == "difference") {
    method = csi::CfoSfoMethod::PhaseDifference;
  } else if (a.method != "cumulative") {
    throw UsageError("--method must be cumulative or difference");
  }
  std::string csv = "index,cf_hz,sf_hz,n_symbols,cfo_hz,sfo_ppm,residual_rad,consistent,preamble_cfo_hz\n";
  double sum_cfo = 0.0;
  double sum_sfo = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < cap.records.size(); ++i) {
    const auto& r = cap.records[i];
    if (r.n_data_symbols < 2) continue;
    const auto f = io::frame_from_record(r);
    const auto train = io::data_train(r);
    const auto e = csi::estimate_cfo_sfo(train, f.grid, io::record_symbol_duration(r, short_gi), method);
    csv += fmt::format("{},{},{},{},{:.3f},{:.4f},{:.5f},{},{:.3f}\n", i, r.cf_hz, r.sf_hz, e.n_symbols, e.cfo_hz,
                       e.sfo_ppm, e.residual_rms, e.consistent ? 1 : 0, io::record_cfo_hz(r));
    sum_cfo += e.cfo_hz;
    sum_sfo += e.sfo_ppm;
    ++n;
  }
  if (a.out.empty()) {
    out << csv;
  } else {
    write_text(a.out, csv);
  }
  if (n == 0) throw std::runtime_error("no record carries a data-symbol CSI train of two or more symbols");
  out << fmt::format("# packets {}, mean cfo {:.3f} Hz, mean sfo {:.4f} ppm\n", n, sum_cfo / static_cast<double>(n),
                     sum_sfo / static_cast<double>(n));
  return kOk;
}

struct ClockArgs {
  std::optional<double> bw;
  std::string quad;
  std::optional<double> cf;
  std::optional<std::uint32_t> chansel;
  std::string band;
};

void print_clocks(std::ostream& out, const clocking::PllQuadruple& q) {
  const auto c = clocking::derived_clocks(q);
  out << fmt::format("quad (div_int, ref_div, clk_sel, ht20_40) = {}{}\n", clocking::to_string(q),
                     clocking::is_documented_quad(q) ? "" : " (not a documented row)");
  out << fmt::format("f_pll      {:.3f} Hz ({:.9f} MHz)\n", c.f_pll, c.f_pll / 1e6);
  out << fmt::format("f_digi_bb  {:.3f} Hz ({:.9f} MHz)\n", c.f_digi_bb, c.f_digi_bb / 1e6);
  out << fmt::format("f_rx_adc   {:.3f} Hz ({:.9f} MHz)\n", c.f_rx_adc, c.f_rx_adc / 1e6);
  out << fmt::format("f_tx_dac   {:.3f} Hz ({:.9f} MHz)\n", c.f_tx_dac, c.f_tx_dac / 1e6);
  out << fmt::format("bandwidth  {:.3f} Hz ({:.9f} MHz)\n", c.bandwidth, c.bandwidth / 1e6);
}

int do_clock(const ClockArgs& a, std::ostream& out) {
  std::optional<clocking::Band> band;
  if (!a.band.empty()) band = usage_guard([&] { return clocking::band_from_string(a.band); });
  bool any = false;
  if (a.bw) {
    any = true;
    print_clocks(out, usage_guard([&] { return clocking::quad_for_bandwidth(*a.bw); }));
  }
  if (!a.quad.empty()) {
    any = true;
    clocking::PllQuadruple q;
    char c1 = 0, c2 = 0, c3 = 0;
    std::istringstream in(a.quad);
    if (!(in >> q.div_int >> c1 >> q.ref_div >> c2 >> q.clk_sel >> c3 >> q.ht20_40) || c1 != ',' || c2 != ',' ||
        c3 != ',')
      throw UsageError("--quad expects div_int,ref_div,clk_sel,ht20_40");
    usage_guard([&] {
      clocking::validate(q);
      return 0;
    });
    print_clocks(out, q);
  }
  if (a.cf) {
    any = true;
    const auto b = band ? band : clocking::band_for_carrier(*a.cf);
    if (!b) throw UsageError(fmt::format("carrier {:.3f} Hz is in no supported band; pass --band", *a.cf));
    const auto q = usage_guard([&] { return clocking::quantize_carrier(*a.cf, *b); });
    out << fmt::format("band     {}\n", clocking::to_string(*b));
    out << fmt::format("step     {:.3f} Hz\n", q.step);
    out << fmt::format("lower    {:.3f} Hz ({:.9f} MHz)\n", q.lower, q.lower / 1e6);
    out << fmt::format("upper    {:.3f} Hz ({:.9f} MHz)\n", q.upper, q.upper / 1e6);
    out << fmt::format("chosen   {:.3f} Hz ({:.9f} MHz), grid index {}\n", q.chosen, q.chosen / 1e6, q.grid_index);
  }
  if (a.chansel) {
    any = true;
    const auto s = clocking::synth_setting(*a.chansel, band.value_or(clocking::Band::Band5G));
    out << fmt::format("chansel  {}\nf_syn    {:.3f} Hz\nf_rf     {:.3f} Hz ({:.9f} MHz)\nvco ok   {}\n", s.chansel,
                       s.f_syn, s.f_rf, s.f_rf / 1e6, s.valid ? "yes" : "no");
  }
  if (!any) throw UsageError("clock needs one of --bw, --quad, --cf, --chansel");
  return kOk;
}

struct InfoArgs {
  std::string in;
  std::size_t max = 20;
};

int do_info(const InfoArgs& a, std::ostream& out) {
  const auto cap = load_capture(a.in);
  out << fmt::format("CSF1 version {}, {} records\n", io::kCaptureVersion, cap.records.size());
  std::map<std::pair<std::uint64_t, std::uint64_t>, std::size_t> per_point;
  for (const auto& r : cap.records) ++per_point[{r.cf_hz, r.sf_hz}];
  out << fmt::format("{} distinct (cf, sf) points\n", per_point.size());
  for (std::size_t i = 0; i < cap.records.size() && i < a.max; ++i) {
    const auto& r = cap.records[i];
    out << fmt::format("#{} t={} us cf={}.000 Hz sf={}.000 Hz mode={} mcs={} tones={} data_symbols={} cfo={:.3f} Hz "
                       "evm={:.2f} dB\n",
                       i, r.timestamp_us, r.cf_hz, r.sf_hz, to_string(r.channel_mode), r.mcs, r.tones.size(),
                       r.n_data_symbols, io::record_cfo_hz(r), io::record_evm_db(r));
  }
  if (cap.records.size() > a.max) out << fmt::format("... {} more\n", cap.records.size() - a.max);
  return kOk;
}

struct ExportArgs {
  std::string in;
  std::string kind = "mag";
  std::string out;
  std::string tmpl;
};

int do_export(const ExportArgs& a, std::ostream& out) {
  const auto cap = load_capture(a.in);
  const auto kind = usage_guard([&] { return io::plot_kind_from_string(a.kind); });
  std::optional<csi::DistortionTemplate> t;
  if (!a.tmpl.empty()) {
    if (!std::filesystem::is_regular_file(a.tmpl)) throw UsageError("cannot read template '" + a.tmpl + "'");
    t = csi::load_template(a.tmpl);
  }
  const std::string csv = io::export_plotdata(cap, kind, t);
  if (a.out.empty()) {
    out << csv;
  } else {
    write_text(a.out, csv);
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Wi-Fi sensing workbench", "csiwb"};
  app.require_subcommand(1);

  ScanArgs scan;
  auto* sc = app.add_subcommand("scan", "round-trip CSI scan over a simulated initiator/responder link");
  sc->add_option("--cf", scan.cf, "carrier range start:step:stop or a single value (Hz)");
  sc->add_option("--sf", scan.sf, "bandwidth range start:step:stop or a single value (Hz)");
  sc->add_option("--repeat", scan.repeat, "exchanges per grid point")->check(CLI::PositiveNumber);
  sc->add_option("--delay", scan.delay, "spacing between exchanges (us)")->check(CLI::NonNegativeNumber);
  sc->add_option("--mcs", scan.mcs)->check(CLI::Range(0, 7));
  sc->add_option("--ness", scan.ness, "extension spatial streams")->check(CLI::Range(0, 3));
  sc->add_option("--txcm", scan.txcm, "Tx chain mask")->check(CLI::Range(1, 7));
  sc->add_option("--rxcm", scan.rxcm, "Rx chain mask")->check(CLI::Range(1, 7));
  sc->add_option("--mode", scan.mode, "accepted for command compatibility; both ends run in this process")
      ->check(CLI::IsMember({"initiator", "responder"}));
  sc->add_option("--profile", scan.profile, "front-end profile name or config file");
  sc->add_option("--seed", scan.seed);
  sc->add_option("--out", scan.out, "initiator-side capture (.csi)")->required();
  sc->add_option("--responder-out", scan.responder_out, "responder-side capture (default <out>.responder.csi)");
  sc->add_option("--report", scan.report, "JSON scan report (default <out>.json)");
  sc->add_option("--trace", scan.trace, "event trace text file");
  sc->add_option("--loss", scan.loss, "per-frame loss probability")->check(CLI::Range(0.0, 1.0));
  sc->add_option("--latency", scan.latency, "one-way link latency (us)")->check(CLI::NonNegativeNumber);
  sc->add_option("--retries", scan.retries, "retransmissions per message");
  sc->add_option("--retry-timeout", scan.retry_timeout, "retry timer (us)")->check(CLI::PositiveNumber);
  sc->add_option("--fidelity", scan.fidelity)->check(CLI::IsMember({"waveform", "analytic"}));
  sc->add_option("--format", scan.format)->check(CLI::IsMember({"ht", "nonht"}));
  sc->add_option("--channel-mode", scan.channel_mode)->check(CLI::IsMember({"HT20", "HT40+", "HT40-"}));
  sc->add_option("--gi", scan.gi)->check(CLI::IsMember({"long", "short"}));
  sc->add_option("--rounding-initiator", scan.rounding_initiator)->check(CLI::IsMember({"nearest", "lower", "upper"}));
  sc->add_option("--rounding-responder", scan.rounding_responder)->check(CLI::IsMember({"nearest", "lower", "upper"}));
  sc->add_option("--snr", scan.snr, "channel SNR (dB), default from profile or 30");
  sc->add_option("--cfo", scan.cfo, "channel CFO (Hz), default from profile");
  sc->add_option("--sfo", scan.sfo, "channel SFO (ppm), default from profile");

  LoopbackArgs lb;
  auto* lc = app.add_subcommand("loopback", "single-link transmit and receive through a profile");
  lc->add_option("--format", lb.format)->check(CLI::IsMember({"ht", "nonht"}));
  lc->add_option("--channel-mode", lb.channel_mode)->check(CLI::IsMember({"HT20", "HT40+", "HT40-"}));
  lc->add_option("--mcs", lb.mcs)->check(CLI::Range(0, 7));
  lc->add_option("--ness", lb.ness)->check(CLI::Range(0, 3));
  lc->add_option("--gi", lb.gi)->check(CLI::IsMember({"long", "short"}));
  lc->add_option("--payload", lb.payload, "payload bytes per frame");
  lc->add_option("--count", lb.count, "frames")->check(CLI::PositiveNumber);
  lc->add_option("--profile", lb.profile, "Tx front end (and Rx unless --rx-profile)");
  lc->add_option("--rx-profile", lb.rx_profile);
  lc->add_option("--cf", lb.cf, "carrier (Hz)");
  lc->add_option("--sf", lb.sf, "bandwidth (Hz)");
  lc->add_option("--seed", lb.seed);
  lc->add_option("--snr", lb.snr);
  lc->add_option("--cfo", lb.cfo);
  lc->add_option("--sfo", lb.sfo);
  lc->add_option("--out", lb.out, "capture of the received frames");
  lc->add_option("--iq-out", lb.iq_out, "prefix for cf32 sample files of the first frame");

  CalibrateArgs cal;
  auto* cc = app.add_subcommand("calibrate", "build a distortion template from a capture");
  cc->add_option("--in", cal.in)->required();
  cc->add_option("--out", cal.out)->required();
  cc->add_option("--tx-id", cal.tx_id);
  cc->add_option("--rx-id", cal.rx_id);
  cc->add_option("--sf", cal.sf, "use records of this bandwidth (default: the first record's)");

  CleanArgs cl;
  auto* clc = app.add_subcommand("clean", "remove a distortion template from every record");
  clc->add_option("--in", cl.in)->required();
  clc->add_option("--template", cl.tmpl)->required();
  clc->add_option("--out", cl.out)->required();
  clc->add_option("--tx-id", cl.tx_id);
  clc->add_option("--rx-id", cl.rx_id);

  StitchArgs st;
  auto* stc = app.add_subcommand("stitch", "stitch overlapping channels into wideband CSI (CSV)");
  stc->add_option("--in", st.in)->required();
  stc->add_option("--out", st.out)->required();
  stc->add_option("--template", st.tmpl, "remove this template before stitching");
  stc->add_option("--sf", st.sf, "use records of this bandwidth (default: the first record's)");

  CfoSfoArgs cs;
  auto* csc = app.add_subcommand("cfosfo", "per-packet CFO/SFO from data-symbol CSI trains");
  csc->add_option("--in", cs.in)->required();
  csc->add_option("--out", cs.out, "CSV file (default: standard output)");
  csc->add_option("--gi", cs.gi, "guard interval of the captured frames")->check(CLI::IsMember({"long", "short"}));
  csc->add_option("--method", cs.method)->check(CLI::IsMember({"cumulative", "difference"}));

  ClockArgs ck;
  auto* ckc = app.add_subcommand("clock", "clocking arithmetic: quadruples, bandwidths, carrier quantization");
  ckc->add_option("--bw", ck.bw, "bandwidth (Hz) -> quadruple and clocks");
  ckc->add_option("--quad", ck.quad, "div_int,ref_div,clk_sel,ht20_40 -> clocks");
  ckc->add_option("--cf", ck.cf, "carrier (Hz) -> quantized grid neighbours");
  ckc->add_option("--chansel", ck.chansel, "synthesizer channel word");
  ckc->add_option("--band", ck.band, "2g4 or 5g");

  InfoArgs in;
  auto* ic = app.add_subcommand("info", "summarize a capture");
  ic->add_option("--in", in.in)->required();
  ic->add_option("--max", in.max, "records listed");

  ExportArgs ex;
  auto* ec = app.add_subcommand("export", "plot-ready CSV (subcarrier_or_freq,value,series_id)");
  ec->add_option("--in", ex.in)->required();
  ec->add_option("--kind", ex.kind)->check(CLI::IsMember({"mag", "phase", "template", "stitched"}));
  ec->add_option("--out", ex.out, "CSV file (default: standard output)");
  ec->add_option("--template", ex.tmpl, "template file for kind=template");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err) == 0 ? kOk : kUsageError;
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err) == 0 ? kOk : kUsageError;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsageError;
  }

  try {
    if (sc->parsed()) return do_scan(scan, out);
    if (lc->parsed()) return do_loopback(lb, out);
    if (cc->parsed()) return do_calibrate(cal, out);
    if (clc->parsed()) return do_clean(cl, out);
    if (stc->parsed()) return do_stitch(st, out);
    if (csc->parsed()) return do_cfosfo(cs, out);
    if (ckc->parsed()) return do_clock(ck, out);
    if (ic->parsed()) return do_info(in, out);
    if (ec->parsed()) return do_export(ex, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeFailure;
  }
  err << "error: no subcommand\n";
  return kUsageError;
}

}  // namespace csiwb::cli
