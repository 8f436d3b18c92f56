#include "csiwb/echoprobe.hpp"

#include <fmt/format.h>

#include <charconv>
#include <cmath>

namespace csiwb::echo {

const char* to_string(MessageKind kind) {
  switch (kind) {
    case MessageKind::CSIProbeRequest:
      return "CSIProbeRequest";
    case MessageKind::CSIProbeReply:
      return "CSIProbeReply";
    case MessageKind::FreqChangeRequest:
      return "FreqChangeRequest";
    case MessageKind::FreqChangeAck:
      return "FreqChangeAck";
  }
  return "?";
}

namespace {

void put(std::vector<std::uint8_t>& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get(const std::vector<std::uint8_t>& in, std::size_t& pos, int bytes) {
  if (pos + static_cast<std::size_t>(bytes) > in.size()) throw DomainError("probe message truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= std::uint64_t{in[pos + static_cast<std::size_t>(i)]} << (8 * i);
  pos += static_cast<std::size_t>(bytes);
  return v;
}

std::uint64_t whole_hz(double hz) {
  if (!(hz >= 0.0) || hz > 1.8e19) throw DomainError(fmt::format("frequency {} Hz cannot be encoded", hz));
  return static_cast<std::uint64_t>(std::llround(hz));
}

double parse_number(std::string_view s, const std::string& whole) {
  double v = 0.0;
  const auto* end = s.data() + s.size();
  auto [p, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc{} || p != end || !std::isfinite(v))
    throw DomainError("malformed range '" + whole + "': bad number '" + std::string(s) + "'");
  return v;
}

}  // namespace

std::vector<std::uint8_t> encode_message(const ProbeMessage& msg) {
  std::vector<std::uint8_t> out;
  out.reserve(kMessageHeaderBytes + 20 + msg.payload.size());
  out.insert(out.end(), std::begin(kMessageMagic), std::end(kMessageMagic));
  out.push_back(static_cast<std::uint8_t>(msg.kind));
  out.push_back(kMessageVersion);
  put(out, 0, 2);
  put(out, msg.session_id, 4);
  put(out, msg.seq, 4);
  put(out, whole_hz(msg.point.cf), 8);
  put(out, whole_hz(msg.point.sf), 8);
  if (msg.payload.size() > 0xffffffffu) throw DomainError("probe payload too large");
  put(out, msg.payload.size(), 4);
  out.insert(out.end(), msg.payload.begin(), msg.payload.end());
  return out;
}

ProbeMessage decode_message(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < kMessageHeaderBytes || !std::equal(std::begin(kMessageMagic), std::end(kMessageMagic), bytes.begin()))
    throw DomainError("not a probe message");
  ProbeMessage m;
  const std::uint8_t kind = bytes[4];
  if (kind < 1 || kind > 4) throw DomainError(fmt::format("unknown probe message kind {}", kind));
  m.kind = static_cast<MessageKind>(kind);
  if (bytes[5] != kMessageVersion) throw DomainError(fmt::format("unsupported probe message version {}", bytes[5]));
  std::size_t pos = 8;
  m.session_id = static_cast<std::uint32_t>(get(bytes, pos, 4));
  m.seq = static_cast<std::uint32_t>(get(bytes, pos, 4));
  m.point.cf = static_cast<double>(get(bytes, pos, 8));
  m.point.sf = static_cast<double>(get(bytes, pos, 8));
  const auto len = static_cast<std::size_t>(get(bytes, pos, 4));
  if (bytes.size() - pos != len) throw DomainError("probe message payload length mismatch");
  m.payload.assign(bytes.begin() + static_cast<long>(pos), bytes.end());
  return m;
}

std::vector<double> expand_range(const std::string& text) {
  std::vector<std::string_view> parts;
  std::string_view rest = text;
  while (true) {
    const auto c = rest.find(':');
    parts.push_back(rest.substr(0, c));
    if (c == std::string_view::npos) break;
    rest.remove_prefix(c + 1);
  }
  if (parts.size() == 1) return {parse_number(parts[0], text)};
  if (parts.size() != 3) throw DomainError("malformed range '" + text + "': expected start:step:stop");
  const double start = parse_number(parts[0], text);
  const double step = parse_number(parts[1], text);
  const double stop = parse_number(parts[2], text);
  if (!(step > 0.0)) throw DomainError("malformed range '" + text + "': step must be positive");
  if (stop < start) throw DomainError("malformed range '" + text + "': stop below start");
  const auto n = static_cast<std::size_t>(std::floor((stop - start) / step * (1.0 + 1e-12) + 1e-9)) + 1;
  if (n > 1'000'000) throw DomainError("range '" + text + "' has too many points");
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = start + step * static_cast<double>(i);
  return out;
}

void ScanPlan::validate() const {
  for (const auto* pts : {&cf_points, &sf_points}) {
    if (pts->empty()) throw DomainError("scan plan needs at least one carrier and one bandwidth");
    for (std::size_t i = 1; i < pts->size(); ++i)
      if (!((*pts)[i] > (*pts)[i - 1])) throw DomainError("scan plan points must be strictly increasing");
  }
  if (repeat < 1) throw DomainError("scan plan repeat must be at least 1");
  if (!(delay_us >= 0.0)) throw DomainError("scan plan delay must be non-negative");
}

GridPoint ScanPlan::point(std::size_t index) const {
  return {cf_points.at(index / sf_points.size()), sf_points.at(index % sf_points.size())};
}

const char* to_string(InitiatorPhase phase) {
  switch (phase) {
    case InitiatorPhase::Idle:
      return "idle";
    case InitiatorPhase::Handshake:
      return "handshake";
    case InitiatorPhase::Probing:
      return "probing";
    case InitiatorPhase::Spacing:
      return "spacing";
    case InitiatorPhase::Jumping:
      return "jumping";
    case InitiatorPhase::Done:
      return "done";
  }
  return "?";
}

// ---- initiator -------------------------------------------------------------------

InitiatorState make_initiator(ScanPlan plan, ProtocolConfig cfg) {
  plan.validate();
  InitiatorState s;
  s.plan = std::move(plan);
  s.cfg = cfg;
  s.point_failed.assign(s.plan.n_points(), false);
  return s;
}

namespace {

void transmit(InitiatorState& s, std::vector<Action>& acts, MessageKind kind, double now) {
  ProbeMessage m;
  m.kind = kind;
  m.session_id = s.cfg.session_id;
  m.seq = ++s.seq;
  m.point = s.plan.point(s.point);
  s.outstanding = m;
  s.attempts = 0;
  s.sent_at_us = now;
  s.timer = s.next_timer++;
  ++s.messages_sent;
  acts.push_back(SendMessage{std::move(m), 0.0});
  acts.push_back(SetTimer{s.timer, s.cfg.retry_timeout_us});
}

void start_probe(InitiatorState& s, std::vector<Action>& acts, double now) {
  s.phase = InitiatorPhase::Probing;
  transmit(s, acts, MessageKind::CSIProbeRequest, now);
}

void next_point(InitiatorState& s, std::vector<Action>& acts, double now) {
  if (s.point + 1 >= s.plan.n_points()) {
    s.phase = InitiatorPhase::Done;
    s.outstanding.reset();
    acts.push_back(Finish{});
    return;
  }
  ++s.point;
  s.repeat = 0;
  s.phase = InitiatorPhase::Jumping;
  transmit(s, acts, MessageKind::FreqChangeRequest, now);
}

// An exchange ended (recorded or given up): space the next one or jump.
void exchange_done(InitiatorState& s, std::vector<Action>& acts, double now) {
  s.outstanding.reset();
  ++s.repeat;
  if (s.repeat >= s.plan.repeat) {
    next_point(s, acts, now);
  } else if (s.plan.delay_us > 0.0) {
    s.phase = InitiatorPhase::Spacing;
    s.timer = s.next_timer++;
    acts.push_back(SetTimer{s.timer, s.plan.delay_us});
  } else {
    start_probe(s, acts, now);
  }
}

void tuned_to_point(InitiatorState& s, std::vector<Action>& acts, double now) {
  acts.push_back(Retune{s.plan.point(s.point), 0.0});
  start_probe(s, acts, now);
}

}  // namespace

std::pair<InitiatorState, std::vector<Action>> initiator_step(InitiatorState s, const Event& event, double now) {
  std::vector<Action> acts;
  if (const auto* started = std::get_if<PlanStarted>(&event)) {
    (void)started;
    if (s.phase != InitiatorPhase::Idle) return {std::move(s), std::move(acts)};
    s.phase = InitiatorPhase::Handshake;
    s.point = 0;
    s.repeat = 0;
    transmit(s, acts, MessageKind::FreqChangeRequest, now);
  } else if (const auto* rx = std::get_if<FrameReceived>(&event)) {
    const ProbeMessage& m = rx->msg;
    const bool current = s.outstanding && m.session_id == s.cfg.session_id && m.seq == s.seq;
    if (!current) {
      ++s.stale_replies;
      return {std::move(s), std::move(acts)};
    }
    if (m.kind == MessageKind::FreqChangeAck &&
        (s.phase == InitiatorPhase::Handshake || s.phase == InitiatorPhase::Jumping) &&
        s.outstanding->kind == MessageKind::FreqChangeRequest) {
      acts.push_back(CancelTimer{s.timer});
      tuned_to_point(s, acts, now);
    } else if (m.kind == MessageKind::CSIProbeReply && s.phase == InitiatorPhase::Probing &&
               s.outstanding->kind == MessageKind::CSIProbeRequest && m.point == s.outstanding->point) {
      io::CaptureRecord theirs;
      try {
        std::size_t pos = 0;
        theirs = io::decode_record(m.payload, pos);
        if (pos != m.payload.size()) throw DomainError("trailing bytes after the reply record");
      } catch (const DomainError&) {
        ++s.stale_replies;
        return {std::move(s), std::move(acts)};
      }
      acts.push_back(CancelTimer{s.timer});
      acts.push_back(RecordPair{s.point, s.repeat, s.seq, rx->csi, std::move(theirs), now - s.sent_at_us});
      ++s.records;
      exchange_done(s, acts, now);
    } else {
      ++s.stale_replies;
    }
  } else if (const auto* t = std::get_if<TimerFired>(&event)) {
    if (t->timer != s.timer) return {std::move(s), std::move(acts)};
    if (s.phase == InitiatorPhase::Spacing) {
      start_probe(s, acts, now);
    } else if (s.outstanding && (s.phase == InitiatorPhase::Probing || s.phase == InitiatorPhase::Handshake ||
                                 s.phase == InitiatorPhase::Jumping)) {
      if (s.attempts < s.cfg.max_retries) {
        ++s.attempts;
        s.sent_at_us = now;
        s.timer = s.next_timer++;
        ++s.messages_sent;
        acts.push_back(SendMessage{*s.outstanding, 0.0});
        acts.push_back(SetTimer{s.timer, s.cfg.retry_timeout_us});
      } else if (s.phase == InitiatorPhase::Probing) {
        acts.push_back(MarkFailed{s.point, s.repeat});
        s.point_failed[s.point] = true;
        ++s.failed_exchanges;
        exchange_done(s, acts, now);
      } else {
        // Unacknowledged frequency change: the responder most likely moved already.
        tuned_to_point(s, acts, now);
      }
    }
  }
  return {std::move(s), std::move(acts)};
}

// ---- responder -------------------------------------------------------------------

ResponderState make_responder(ProtocolConfig cfg, std::optional<GridPoint> tuned) {
  ResponderState s;
  s.cfg = cfg;
  s.tuned = tuned;
  s.session_id = cfg.session_id;
  return s;
}

std::pair<ResponderState, std::vector<Action>> responder_step(ResponderState s, const Event& event, double now) {
  (void)now;
  std::vector<Action> acts;
  const auto* rx = std::get_if<FrameReceived>(&event);
  if (!rx) return {std::move(s), std::move(acts)};
  const ProbeMessage& m = rx->msg;
  if (m.session_id != s.session_id) {
    ++s.ignored;
    return {std::move(s), std::move(acts)};
  }
  if (m.kind == MessageKind::CSIProbeRequest) {
    if (!s.tuned || !(m.point == *s.tuned)) {
      ++s.ignored;
      return {std::move(s), std::move(acts)};
    }
    io::CaptureRecord mine = rx->csi;
    mine.n_data_symbols = 0;
    mine.data_csi.clear();
    ProbeMessage reply{MessageKind::CSIProbeReply, m.session_id, m.seq, m.point, io::encode_record(mine)};
    acts.push_back(SendMessage{std::move(reply), s.cfg.turnaround_us});
    ++s.replies;
    ++s.messages_sent;
  } else if (m.kind == MessageKind::FreqChangeRequest) {
    // Acknowledge on the old channel, then move.
    acts.push_back(SendMessage{ProbeMessage{MessageKind::FreqChangeAck, m.session_id, m.seq, m.point, {}},
                               s.cfg.turnaround_us});
    acts.push_back(Retune{m.point, s.cfg.turnaround_us});
    s.tuned = m.point;
    ++s.acks;
    ++s.messages_sent;
  } else {
    ++s.ignored;
  }
  return {std::move(s), std::move(acts)};
}

}  // namespace csiwb::echo
