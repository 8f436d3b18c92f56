#include <doctest.h>

#include <random>

#include "csiwb/scan.hpp"

using namespace csiwb;
using namespace csiwb::echo;

namespace {

template <typename T>
std::size_t count_of(const std::vector<Action>& actions) {
  std::size_t n = 0;
  for (const auto& a : actions) n += std::holds_alternative<T>(a) ? 1 : 0;
  return n;
}

ScanPlan small_plan(std::size_t n_cf, std::size_t n_sf, std::size_t repeat) {
  ScanPlan p;
  for (std::size_t i = 0; i < n_cf; ++i) p.cf_points.push_back(2.412e9 + 5e6 * static_cast<double>(i));
  for (std::size_t i = 0; i < n_sf; ++i) p.sf_points.push_back(20e6 + 5e6 * static_cast<double>(i));
  p.repeat = repeat;
  return p;
}

ScanConfig analytic_config(std::uint64_t seed = 0, double loss = 0.0) {
  ScanConfig c;
  c.link.fidelity = sim::Fidelity::Analytic;
  c.link.seed = seed;
  c.link.loss_prob = loss;
  return c;
}

}  // namespace

TEST_CASE("range expansion") {
  CHECK(expand_range("2.3e9:5e6:2.4e9").size() == 21);
  CHECK(expand_range("20e6:5e6:60e6").size() == 9);
  const auto one = expand_range("2.412e9");
  REQUIRE(one.size() == 1);
  CHECK(one[0] == 2.412e9);
  const auto r = expand_range("20e6:5e6:60e6");
  for (std::size_t i = 0; i < r.size(); ++i) CHECK(r[i] == doctest::Approx(20e6 + 5e6 * static_cast<double>(i)));
  CHECK_THROWS_AS(expand_range(""), DomainError);
  CHECK_THROWS_AS(expand_range("1:2"), DomainError);
  CHECK_THROWS_AS(expand_range("a:b:c"), DomainError);
  CHECK_THROWS_AS(expand_range("1e9:0:2e9"), DomainError);
  CHECK_THROWS_AS(expand_range("1e9:-5e6:2e9"), DomainError);
}

TEST_CASE("wire messages round trip") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 200; ++i) {
    ProbeMessage m;
    m.kind = static_cast<MessageKind>(1 + rng() % 4);
    m.session_id = static_cast<std::uint32_t>(rng());
    m.seq = static_cast<std::uint32_t>(rng());
    m.point = {static_cast<double>(rng() % 6'000'000'000ULL), static_cast<double>(rng() % 80'000'000)};
    m.payload.resize(rng() % 300);
    for (auto& b : m.payload) b = static_cast<std::uint8_t>(rng());
    const auto bytes = encode_message(m);
    CHECK(bytes.size() == kMessageHeaderBytes + 20 + m.payload.size());
    CHECK(decode_message(bytes) == m);
    CHECK(encode_message(decode_message(bytes)) == bytes);
  }
  auto bytes = encode_message({});
  bytes[0] = 'X';
  CHECK_THROWS_AS(decode_message(bytes), DomainError);
  bytes = encode_message({});
  bytes.pop_back();
  CHECK_THROWS_AS(decode_message(bytes), DomainError);
  bytes = encode_message({});
  bytes[4] = 9;
  CHECK_THROWS_AS(decode_message(bytes), DomainError);
}

TEST_CASE("responder answers a probe with exactly one reply") {
  const GridPoint pt{2.412e9, 20e6};
  auto r = make_responder({}, pt);
  ProbeMessage req;
  req.kind = MessageKind::CSIProbeRequest;
  req.session_id = 1;
  req.seq = 7;
  req.point = pt;
  auto [s1, acts] = responder_step(r, FrameReceived{req, {}}, 0.0);
  REQUIRE(count_of<SendMessage>(acts) == 1);
  CHECK(acts.size() == 1);
  const auto& reply = std::get<SendMessage>(acts[0]).msg;
  CHECK(reply.kind == MessageKind::CSIProbeReply);
  CHECK(reply.seq == 7);
  CHECK(reply.point == pt);
  std::size_t pos = 0;
  CHECK_NOTHROW(io::decode_record(reply.payload, pos));
  CHECK(pos == reply.payload.size());
  CHECK(s1.replies == 1);

  // Frequency change: ack plus retune.
  ProbeMessage fc;
  fc.kind = MessageKind::FreqChangeRequest;
  fc.session_id = 1;
  fc.seq = 8;
  fc.point = {2.417e9, 25e6};
  auto [s2, acts2] = responder_step(s1, FrameReceived{fc, {}}, 10.0);
  CHECK(count_of<SendMessage>(acts2) == 1);
  CHECK(count_of<Retune>(acts2) == 1);
  CHECK(s2.acks == 1);
}

TEST_CASE("initiator starts with a handshake and times out into retries") {
  ScanPlan plan = small_plan(1, 1, 2);
  ProtocolConfig cfg;
  cfg.max_retries = 2;
  auto st = make_initiator(plan, cfg);
  auto [s1, a1] = initiator_step(st, PlanStarted{}, 0.0);
  CHECK(s1.phase == InitiatorPhase::Handshake);
  REQUIRE(count_of<SendMessage>(a1) == 1);
  CHECK(count_of<SetTimer>(a1) == 1);
  for (const auto& a : a1)
    if (const auto* m = std::get_if<SendMessage>(&a)) CHECK(m->msg.kind == MessageKind::FreqChangeRequest);

  // Every attempt times out: 1 + max_retries sends, then the plan fails and finishes.
  auto s = s1;
  std::size_t sends = 1;
  bool finished = false;
  for (int guard = 0; guard < 20 && !finished; ++guard) {
    auto [n, acts] = initiator_step(s, TimerFired{s.timer}, 1e4 * (guard + 1));
    s = n;
    sends += count_of<SendMessage>(acts);
    finished = count_of<Finish>(acts) > 0;
  }
  CHECK(finished);
  CHECK(s.phase == InitiatorPhase::Done);
  CHECK(s.records == 0);

  // Stale timers are ignored.
  auto [s3, a3] = initiator_step(s1, TimerFired{s1.timer + 100}, 5.0);
  CHECK(a3.empty());
  CHECK(s3.attempts == s1.attempts);
}

TEST_CASE("lossless scan counts") {
  for (auto fid : {sim::Fidelity::Analytic, sim::Fidelity::Waveform}) {
    const ScanPlan plan = small_plan(3, 2, 4);
    ScanConfig cfg = analytic_config();
    cfg.link.fidelity = fid;
    const auto res = run_scan(plan, cfg);
    const auto& rep = res.report;
    CHECK(rep.finished);
    CHECK(rep.records == plan.repeat * plan.n_points());
    CHECK(res.initiator.records.size() == rep.records);
    CHECK(res.responder.records.size() == rep.records);
    CHECK(rep.messages == 2 * rep.records + 2 * plan.n_points());
    CHECK(rep.failed_points == 0);
    CHECK(rep.failed_exchanges == 0);
    CHECK(rep.link_stats.mistuned_in_flight == 0);
    CHECK(rep.rtt_max_us <= 400.0);
    REQUIRE(rep.points.size() == plan.n_points());
    for (std::size_t i = 0; i < plan.n_points(); ++i) {
      CHECK(rep.points[i].point == plan.point(i));
      CHECK(rep.points[i].records.size() == plan.repeat);
    }
    // Records appear in grid order with the tuned carrier.
    for (std::size_t i = 0; i < res.initiator.records.size(); ++i) {
      const auto& pt = rep.points[i / plan.repeat].point;
      CHECK(res.initiator.records[i].cf_hz == static_cast<std::uint64_t>(std::llround(pt.cf)));
    }
  }
}

TEST_CASE("spacing delay stretches virtual time") {
  ScanPlan plan = small_plan(1, 1, 20);
  plan.delay_us = 5e3;
  const auto res = run_scan(plan, analytic_config());
  CHECK(res.report.records == 20);
  CHECK(res.report.duration_us >= 19 * 5e3);
}

TEST_CASE("total loss fails every point and terminates") {
  const ScanPlan plan = small_plan(2, 2, 3);
  ScanConfig cfg = analytic_config(1, 1.0);
  cfg.protocol.max_retries = 2;
  const auto res = run_scan(plan, cfg);
  CHECK(res.report.finished);
  CHECK(res.report.records == 0);
  CHECK(res.report.failed_points == plan.n_points());
}

TEST_CASE("lossy scans stay safe and complete with enough retries") {
  const ScanPlan plan = small_plan(3, 3, 5);
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    ScanConfig cfg = analytic_config(seed, 0.3);
    cfg.protocol.max_retries = 40;
    const auto res = run_scan(plan, cfg);
    CHECK(res.report.finished);
    CHECK(res.report.records == plan.repeat * plan.n_points());
    CHECK(res.report.link_stats.mistuned_in_flight == 0);
    CHECK(res.report.link_stats.lost > 0);
    // No duplicate or out-of-order records.
    std::size_t i = 0;
    for (std::size_t p = 0; p < plan.n_points(); ++p)
      for (std::size_t r = 0; r < plan.repeat; ++r, ++i) {
        CHECK(res.report.points[p].records[r].repeat == r);
        CHECK(res.initiator.records[i].cf_hz ==
              static_cast<std::uint64_t>(std::llround(res.report.points[p].point.cf)));
      }
  }
}

TEST_CASE("scan reports are deterministic") {
  const ScanPlan plan = small_plan(2, 2, 3);
  ScanConfig cfg = analytic_config(9, 0.1);
  cfg.keep_trace = true;
  const auto a = run_scan(plan, cfg);
  const auto b = run_scan(plan, cfg);
  CHECK(report_to_json(a.report) == report_to_json(b.report));
  CHECK(io::serialize_capture(a.initiator) == io::serialize_capture(b.initiator));
  CHECK(sim::format_trace(a.trace) == sim::format_trace(b.trace));
  CHECK_FALSE(a.trace.empty());
  cfg.link.seed = 10;
  const auto c = run_scan(plan, cfg);
  CHECK(sim::format_trace(a.trace) != sim::format_trace(c.trace));
}

TEST_CASE("plan validation") {
  ScanPlan p = small_plan(1, 1, 1);
  CHECK_NOTHROW(p.validate());
  p.repeat = 0;
  CHECK_THROWS_AS(p.validate(), DomainError);
  p = small_plan(1, 1, 1);
  p.cf_points.clear();
  CHECK_THROWS_AS(p.validate(), DomainError);
  p = small_plan(1, 1, 1);
  p.delay_us = -1;
  CHECK_THROWS_AS(p.validate(), DomainError);
  p = small_plan(2, 3, 1);
  CHECK(p.point(0) == GridPoint{2.412e9, 20e6});
  CHECK(p.point(1) == GridPoint{2.412e9, 25e6});
  CHECK(p.point(3) == GridPoint{2.417e9, 20e6});
}
