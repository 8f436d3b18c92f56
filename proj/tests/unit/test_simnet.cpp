#include <doctest.h>

#include "csiwb/csi/analysis.hpp"
#include "csiwb/simnet.hpp"

using namespace csiwb;
using namespace csiwb::sim;

namespace {

NicConfig nic(const std::string& id, Rounding r = Rounding::Nearest) {
  NicConfig c;
  c.id = id;
  c.profile = imp::ImpairmentProfile::clean();
  c.rounding = r;
  return c;
}

phy::FrameConfig small_frame(const VirtualNic& n, std::uint8_t fill) {
  return n.frame_for(std::vector<std::uint8_t>(40, fill), 1, 0);
}

}  // namespace

TEST_CASE("scheduler orders by time then insertion") {
  Scheduler s;
  std::vector<int> order;
  s.schedule(10, "b", [&] { order.push_back(2); });
  s.schedule(5, "a", [&] { order.push_back(1); });
  s.schedule(10, "c", [&] { order.push_back(3); });
  s.schedule(10, "d", [&] {
    order.push_back(4);
    s.schedule_in(0, "e", [&] { order.push_back(5); });
  });
  const auto dead = s.schedule(7, "x", [&] { order.push_back(99); });
  CHECK(s.cancel(dead));
  CHECK_FALSE(s.cancel(dead));
  CHECK(s.run_until_idle() == 5);
  CHECK(order == std::vector<int>{1, 2, 3, 4, 5});
  CHECK(s.now() == 10);
  double last = -1;
  for (const auto& e : s.trace()) {
    CHECK(e.time >= last);
    last = e.time;
  }
  CHECK(format_trace(s.trace()).find("10.000 ") != std::string::npos);

  Scheduler empty;
  CHECK(empty.run_until_idle() == 0);
  CHECK(empty.now() == 0);
  CHECK(empty.idle());
}

TEST_CASE("lossless link delivers every frame after the latency") {
  Scheduler s;
  VirtualNic a(nic("a")), b(nic("b"));
  a.tune(2.412e9, 20e6);
  b.tune(2.412e9, 20e6);
  LinkConfig cfg;
  cfg.latency = 50;
  VirtualLink link(s, a, b, cfg);
  std::vector<Arrival> got;
  link.set_handler(1, [&](const Arrival& arr) { got.push_back(arr); });
  const int n = 12;
  for (int i = 0; i < n; ++i)
    s.schedule(100.0 * i, "send", [&, i] { link.transmit(0, small_frame(a, static_cast<std::uint8_t>(i))); });
  s.run_until_idle();
  REQUIRE(got.size() == n);
  for (int i = 0; i < n; ++i) {
    CHECK(got[static_cast<std::size_t>(i)].arrived_at - got[static_cast<std::size_t>(i)].sent_at == 50.0);
    CHECK(got[static_cast<std::size_t>(i)].sent_at == 100.0 * i);
    REQUIRE(got[static_cast<std::size_t>(i)].rx.has_value());
    CHECK(got[static_cast<std::size_t>(i)].rx->payload == std::vector<std::uint8_t>(40, static_cast<std::uint8_t>(i)));
    CHECK(got[static_cast<std::size_t>(i)].rx->csi.source.tx_id == "a");
  }
  CHECK(link.stats().sent == n);
  CHECK(link.stats().delivered == n);
  CHECK(link.stats().lost == 0);
}

TEST_CASE("loss probability one delivers nothing") {
  Scheduler s;
  VirtualNic a(nic("a")), b(nic("b"));
  a.tune(2.412e9, 20e6);
  b.tune(2.412e9, 20e6);
  LinkConfig cfg;
  cfg.loss_prob = 1.0;
  VirtualLink link(s, a, b, cfg);
  int got = 0;
  link.set_handler(1, [&](const Arrival&) { ++got; });
  for (int i = 0; i < 20; ++i) link.transmit(0, small_frame(a, 1));
  s.run_until_idle();
  CHECK(got == 0);
  CHECK(link.stats().lost == 20);
}

TEST_CASE("loss draws are keyed and roughly uniform") {
  CHECK(keyed_uniform(1, 2, 3) == keyed_uniform(1, 2, 3));
  CHECK(keyed_uniform(1, 2, 3) != keyed_uniform(1, 3, 3));
  double sum = 0;
  int below = 0;
  for (std::uint64_t i = 0; i < 100000; ++i) {
    const double u = keyed_uniform(7, i);
    CHECK((u >= 0.0 && u < 1.0));
    sum += u;
    below += u < 0.1 ? 1 : 0;
  }
  CHECK(sum / 100000 == doctest::Approx(0.5).epsilon(0.01));
  CHECK(below / 100000.0 == doctest::Approx(0.1).epsilon(0.05));
}

TEST_CASE("carrier quantization shows up as CFO") {
  {
    Scheduler s;
    VirtualNic a(nic("a", Rounding::Lower)), b(nic("b", Rounding::Upper));
    a.tune(5.2e9, 20e6);
    b.tune(5.2e9, 20e6);
    CHECK(std::abs(a.tuning().cf - 5199.999389e6) < 1.0);
    CHECK(std::abs(b.tuning().cf - 5200.000305e6) < 1.0);
    VirtualLink link(s, a, b, {});
    std::optional<Arrival> got;
    link.set_handler(1, [&](const Arrival& arr) { got = arr; });
    link.transmit(0, small_frame(a, 3));
    s.run_until_idle();
    REQUIRE(got.has_value());
    CHECK(got->injected_cfo == doctest::Approx(-915.52734375).epsilon(1e-9));
    REQUIRE(got->rx.has_value());
    CHECK(got->rx->fcs_ok);
    CHECK(got->rx->cfo_preamble == doctest::Approx(-915.527).epsilon(0.01));
  }
  {
    Scheduler s;
    VirtualNic a(nic("a")), b(nic("b"));
    a.tune(5.2e9, 20e6);
    b.tune(5.2e9, 20e6);
    VirtualLink link(s, a, b, {});
    std::optional<Arrival> got;
    link.set_handler(1, [&](const Arrival& arr) { got = arr; });
    link.transmit(0, small_frame(a, 3));
    s.run_until_idle();
    REQUIRE(got.has_value());
    CHECK(got->injected_cfo == 0.0);
  }
}

TEST_CASE("tuning lands on the carrier grid and a table bandwidth") {
  VirtualNic n(nic("n"));
  for (double sf : {5e6, 20e6, 35e6, 40e6, 60e6}) {
    const auto t = n.tune(2.3e9 + sf, sf);
    const auto q = clocking::quantize_carrier(t.cf, t.band);
    CHECK(q.chosen == t.cf);
    CHECK(clocking::bandwidth_for_quad(t.quad) == t.sf);
  }
  CHECK(n.tune(2.35e9, 25e6).sf == 25e6);
}

TEST_CASE("clean link is a pure delay for raw bursts") {
  Scheduler s;
  VirtualNic a(nic("a")), b(nic("b"));
  a.tune(2.412e9, 20e6);
  b.tune(2.412e9, 20e6);
  VirtualLink link(s, a, b, {});
  std::optional<Arrival> got;
  link.set_handler(1, [&](const Arrival& arr) { got = arr; });
  auto burst = phy::assemble_frame(small_frame(a, 9));
  link.transmit_burst(0, burst);
  s.run_until_idle();
  REQUIRE(got.has_value());
  REQUIRE(got->burst.has_value());
  CHECK(got->arrived_at == 50.0);
  REQUIRE(got->burst->size() >= burst.size());
  for (std::size_t i = 0; i < burst.size(); ++i) CHECK(std::abs(got->burst->samples[i] - burst.samples[i]) < 1e-12);
  for (std::size_t i = burst.size(); i < got->burst->size(); ++i) CHECK(std::abs(got->burst->samples[i]) < 1e-12);
}

TEST_CASE("off-channel frames are dropped") {
  Scheduler s;
  VirtualNic a(nic("a")), b(nic("b"));
  a.tune(2.412e9, 20e6);
  b.tune(2.462e9, 20e6);
  VirtualLink link(s, a, b, {});
  int got = 0;
  link.set_handler(1, [&](const Arrival&) { ++got; });
  link.transmit(0, small_frame(a, 1));
  s.run_until_idle();
  CHECK(got == 0);
  CHECK(link.stats().off_channel == 1);
}

TEST_CASE("link output is deterministic") {
  auto run = [](std::uint64_t seed) {
    Scheduler s;
    VirtualNic a(nic("a")), b(nic("b"));
    a.tune(2.412e9, 20e6);
    b.tune(2.412e9, 20e6);
    LinkConfig cfg;
    cfg.seed = seed;
    cfg.loss_prob = 0.3;
    auto ch = imp::named_profile("default20");
    ch.snr_db = 20;
    ch.cfo = 2e3;
    cfg.channel = {ch, ch};
    VirtualLink link(s, a, b, cfg);
    std::vector<CVec> out;
    link.set_handler(1, [&](const Arrival& arr) { out.push_back(arr.burst->samples); });
    for (int i = 0; i < 10; ++i) link.transmit_burst(0, phy::assemble_frame(small_frame(a, 5)));
    s.run_until_idle();
    return std::make_pair(out, format_trace(s.trace()));
  };
  const auto x = run(3), y = run(3), z = run(4);
  CHECK(x.first == y.first);
  CHECK(x.second == y.second);
  CHECK(x.first != z.first);
}

TEST_CASE("link config validation") {
  LinkConfig c;
  c.loss_prob = 1.5;
  CHECK_THROWS_AS(c.validate(), DomainError);
  c.loss_prob = 0.1;
  c.latency = -1;
  CHECK_THROWS_AS(c.validate(), DomainError);
  NicConfig n = nic("x");
  n.txcm = 0;
  CHECK_THROWS_AS(VirtualNic{n}, DomainError);
  n.txcm = 4;
  n.rxcm = 7;
  VirtualNic v(n);
  CHECK(v.tx_chain() == 2);
  CHECK(v.rx_chain() == 0);
}

TEST_CASE("air paths follow the carrier-aware response at both fidelities") {
  // Whole-sample delays stay inside the cyclic prefix exactly; fractional ones
  // carry band-limited sinc tails past it, worth about 0.1 dB of ripple.
  const std::vector<imp::Path> whole{{0.0, {1.0, 0.0}}, {50e-9, std::polar(0.45, 1.0)}, {150e-9, std::polar(0.25, -2.0)}};
  const std::vector<imp::Path> frac{{0.0, {1.0, 0.0}}, {60e-9, std::polar(0.45, 1.0)}, {170e-9, std::polar(0.25, -2.0)}};
  for (const auto& [air, tol_db] : {std::pair{whole, 1e-6}, std::pair{frac, 0.15}})
  for (double cf : {2.412e9, 2.437e9}) {
    for (auto fid : {Fidelity::Waveform, Fidelity::Analytic}) {
      const double tol = fid == Fidelity::Analytic ? 1e-9 : tol_db;
      Scheduler s;
      VirtualNic a(nic("a")), b(nic("b"));
      a.tune(cf, 20e6);
      b.tune(cf, 20e6);
      LinkConfig cfg;
      cfg.air = air;
      cfg.fidelity = fid;
      VirtualLink link(s, a, b, cfg);
      std::optional<Arrival> got;
      link.set_handler(1, [&](const Arrival& arr) { got = arr; });
      link.transmit(0, small_frame(a, 4));
      s.run_until_idle();
      REQUIRE(got.has_value());
      REQUIRE(got->rx.has_value());
      const auto& csi = got->rx->csi;
      // Ratio to the analytic response: constant magnitude, linear phase.
      std::vector<double> mag, ph;
      CVec ratio;
      for (std::size_t i = 0; i < csi.values.size(); ++i) {
        const double f = csi.grid.spacing * csi.grid.indices[i];
        ratio.push_back(csi.values[i] / imp::air_channel_response(air, a.tuning().cf, f));
        mag.push_back(db20(std::abs(ratio.back())));
      }
      const auto fit = csi::detrend_linear(csi::unwrapped_phase(ratio), csi.grid.indices);
      for (std::size_t i = 0; i < mag.size(); ++i) {
        CHECK(std::abs(mag[i] - mag[0]) < tol);
        CHECK(std::abs(fit.detrended[i]) < 0.01);
      }
    }
  }
  LinkConfig bad;
  bad.air = {{-1e-9, {1.0, 0.0}}};
  CHECK_THROWS_AS(bad.validate(), DomainError);
}
