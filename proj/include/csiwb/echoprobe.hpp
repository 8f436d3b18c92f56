#pragma once

// Round-trip CSI measurement protocol: wire messages, scan plans and the
// initiator/responder state machines. Transitions are pure; simnet drives them.

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "csiwb/capture.hpp"

namespace csiwb::echo {

enum class MessageKind : std::uint8_t {
  CSIProbeRequest = 1,
  CSIProbeReply = 2,
  FreqChangeRequest = 3,
  FreqChangeAck = 4,
};
const char* to_string(MessageKind kind);

struct GridPoint {
  double cf = 0.0;  // Hz
  double sf = 0.0;  // Hz

  bool operator==(const GridPoint&) const = default;
};

inline constexpr char kMessageMagic[4] = {'E', 'P', 'R', 'B'};
inline constexpr std::uint8_t kMessageVersion = 1;
inline constexpr std::size_t kMessageHeaderBytes = 16;

struct ProbeMessage {
  MessageKind kind = MessageKind::CSIProbeRequest;
  std::uint32_t session_id = 0;
  std::uint32_t seq = 0;
  GridPoint point;  // current point for probes, the next point for frequency changes
  std::vector<std::uint8_t> payload;  // one encoded capture record in replies

  bool operator==(const ProbeMessage&) const = default;
};

/// 16-byte header (magic, kind, version, reserved u16, session u32, seq u32)
/// then cf u64, sf u64 (whole Hz), payload length u32 and the payload. Little-endian.
std::vector<std::uint8_t> encode_message(const ProbeMessage& msg);
/// Throws DomainError on a malformed message.
ProbeMessage decode_message(const std::vector<std::uint8_t>& bytes);

/// "start:step:stop" (inclusive) or a single value.
std::vector<double> expand_range(const std::string& text);

struct TxParams {
  int mcs = 0;
  int n_ess = 0;
  unsigned txcm = 1;
  unsigned rxcm = 1;
};

struct ScanPlan {
  std::vector<double> cf_points;
  std::vector<double> sf_points;
  std::size_t repeat = 1;
  double delay_us = 0.0;
  TxParams tx;

  void validate() const;
  std::size_t n_points() const { return cf_points.size() * sf_points.size(); }
  /// Grid order: carrier outer, bandwidth inner.
  GridPoint point(std::size_t index) const;
};

struct ProtocolConfig {
  std::size_t max_retries = 5;   // retransmissions after the first attempt
  double retry_timeout_us = 2000.0;
  double turnaround_us = 100.0;  // responder processing before it answers
  std::uint32_t session_id = 1;
};

// ---- events and actions --------------------------------------------------------

struct PlanStarted {};
struct FrameReceived {
  ProbeMessage msg;
  /// Receiver-side CSI of the frame that carried `msg`.
  io::CaptureRecord csi;
};
struct TimerFired {
  std::uint64_t timer = 0;
};
using Event = std::variant<PlanStarted, FrameReceived, TimerFired>;

struct SendMessage {
  ProbeMessage msg;
  double delay_us = 0.0;  // sent this long after the triggering event
};
struct SetTimer {
  std::uint64_t timer = 0;
  double after_us = 0.0;
};
struct CancelTimer {
  std::uint64_t timer = 0;
};
struct Retune {
  GridPoint point;
  double delay_us = 0.0;
};
struct RecordPair {
  std::size_t point_index = 0;
  std::size_t repeat_index = 0;
  std::uint32_t seq = 0;
  io::CaptureRecord initiator;  // CSI of the reply frame at the initiator
  io::CaptureRecord responder;  // CSI of the request frame at the responder
  double rtt_us = 0.0;
};
struct MarkFailed {
  std::size_t point_index = 0;
  std::size_t repeat_index = 0;
};
struct Finish {};
using Action = std::variant<SendMessage, SetTimer, CancelTimer, Retune, RecordPair, MarkFailed, Finish>;

// ---- initiator -------------------------------------------------------------------

enum class InitiatorPhase { Idle, Handshake, Probing, Spacing, Jumping, Done };
const char* to_string(InitiatorPhase phase);

struct InitiatorState {
  ScanPlan plan;
  ProtocolConfig cfg;
  InitiatorPhase phase = InitiatorPhase::Idle;
  std::size_t point = 0;
  std::size_t repeat = 0;
  std::uint32_t seq = 0;  // seq of the outstanding message
  std::size_t attempts = 0;
  std::optional<ProbeMessage> outstanding;
  double sent_at_us = 0.0;  // first transmission of the outstanding request
  std::uint64_t timer = 0;  // armed retry or spacing timer
  std::uint64_t next_timer = 1;
  std::vector<bool> point_failed;
  std::size_t records = 0;
  std::size_t failed_exchanges = 0;
  std::size_t messages_sent = 0;
  std::size_t stale_replies = 0;
};

InitiatorState make_initiator(ScanPlan plan, ProtocolConfig cfg);
/// Pure transition at virtual time `now_us`.
std::pair<InitiatorState, std::vector<Action>> initiator_step(InitiatorState state, const Event& event,
                                                              double now_us);

// ---- responder -------------------------------------------------------------------

struct ResponderState {
  ProtocolConfig cfg;
  std::optional<GridPoint> tuned;
  std::uint32_t session_id = 0;
  std::size_t replies = 0;
  std::size_t acks = 0;
  std::size_t ignored = 0;
  std::size_t messages_sent = 0;
};

ResponderState make_responder(ProtocolConfig cfg, std::optional<GridPoint> tuned = std::nullopt);
std::pair<ResponderState, std::vector<Action>> responder_step(ResponderState state, const Event& event,
                                                              double now_us);

}  // namespace csiwb::echo
