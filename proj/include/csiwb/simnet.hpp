#pragma once

// Deterministic virtual-time harness: a scheduler, two virtual NICs and the
// impaired link between them.

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "csiwb/clocking.hpp"
#include "csiwb/impairments.hpp"
#include "csiwb/phy/receiver.hpp"

namespace csiwb::sim {

/// Virtual time in microseconds.
using Micros = double;

struct TraceEntry {
  Micros time = 0.0;
  std::uint64_t seq = 0;  // insertion order
  std::string label;
};

class Scheduler {
 public:
  using Action = std::function<void()>;
  using EventId = std::uint64_t;

  Micros now() const { return now_; }
  /// Runs `action` at absolute time `at` (clamped to now). Equal times run in insertion order.
  EventId schedule(Micros at, std::string label, Action action);
  EventId schedule_in(Micros delay, std::string label, Action action);
  /// True when the event was still pending.
  bool cancel(EventId id);
  bool idle() const { return queue_.empty(); }
  std::size_t pending() const { return queue_.size(); }
  /// Processes events until the queue is empty or `max_events` ran; returns the count.
  std::size_t run_until_idle(std::size_t max_events = SIZE_MAX);

  void set_tracing(bool on) { tracing_ = on; }
  const std::vector<TraceEntry>& trace() const { return trace_; }
  /// Appends a note at the current time (kept only while tracing).
  void note(std::string label);

 private:
  struct Pending {
    std::string label;
    Action action;
  };
  Micros now_ = 0.0;
  EventId next_ = 0;
  std::map<std::pair<Micros, EventId>, Pending> queue_;
  std::map<EventId, Micros> when_;
  bool tracing_ = true;
  std::vector<TraceEntry> trace_;
};

/// One line per entry: "<time_us> <seq> <label>".
std::string format_trace(const std::vector<TraceEntry>& trace);

/// Which carrier-grid neighbour a NIC picks for a requested frequency.
enum class Rounding { Nearest, Lower, Upper };
const char* to_string(Rounding r);
Rounding rounding_from_string(const std::string& text);

struct NicConfig {
  std::string id = "nic";
  imp::ImpairmentProfile profile;
  phy::Format format = phy::Format::HT;
  ChannelMode channel_mode = ChannelMode::HT20;
  Rounding rounding = Rounding::Nearest;
  /// Chain bitmasks; the lowest set bit is the chain in use.
  unsigned txcm = 1;
  unsigned rxcm = 1;
  /// Forced band; otherwise picked from the carrier.
  std::optional<clocking::Band> band;
  /// Data guard interval assumed for received NonHT frames.
  phy::GuardInterval nonht_guard = phy::GuardInterval::Long;
};

struct Tuning {
  double requested_cf = 0.0;
  double requested_sf = 0.0;
  double cf = 0.0;  // quantized carrier actually used
  double sf = 0.0;  // achievable bandwidth actually used
  clocking::Band band = clocking::Band::Band5G;
  clocking::PllQuadruple quad;

  bool operator==(const Tuning&) const = default;
};

/// Tuning a NIC with `cfg` would adopt for (cf, sf).
Tuning tune_for(const NicConfig& cfg, double cf, double sf);

class VirtualNic {
 public:
  explicit VirtualNic(NicConfig cfg);

  const NicConfig& config() const { return cfg_; }
  const Tuning& tuning() const { return tuning_; }
  const Tuning& tune(double cf, double sf);
  int tx_chain() const;
  int rx_chain() const;

  /// Frame parameters for sending `payload` with the NIC's current tuning.
  phy::FrameConfig frame_for(std::vector<std::uint8_t> payload, int mcs, int n_ess,
                             phy::GuardInterval guard = phy::GuardInterval::Long) const;
  phy::RxConfig rx_config() const;

 private:
  NicConfig cfg_;
  Tuning tuning_;
};

/// How the link produces what the receiver sees.
enum class Fidelity {
  /// Sample-level Tx chain, channel and Rx chain followed by the full receiver.
  Waveform,
  /// Receiver output synthesized from the analytic chain responses (no samples).
  Analytic,
};
const char* to_string(Fidelity f);
Fidelity fidelity_from_string(const std::string& text);

struct LinkConfig {
  Micros latency = 50.0;
  double loss_prob = 0.0;
  std::uint64_t seed = 0;
  /// Channel impairments (multipath, SFO, CFO, AWGN) per direction: [0] a->b, [1] b->a.
  std::array<imp::ImpairmentProfile, 2> channel{imp::ImpairmentProfile::clean(), imp::ImpairmentProfile::clean()};
  /// Reciprocal RF paths, evaluated at the transmitter's carrier (applied before `channel`).
  std::vector<imp::Path> air;
  /// Add the carrier difference of the two NICs' quantized tunings as CFO.
  bool quantization_cfo = true;
  Fidelity fidelity = Fidelity::Waveform;

  void validate() const;
};

/// What reaches the receiving NIC.
struct Arrival {
  std::uint64_t message_index = 0;
  int from = 0;
  Micros sent_at = 0.0;
  Micros arrived_at = 0.0;
  double injected_cfo = 0.0;  // Hz
  Tuning tx_tuning;
  Tuning rx_tuning;
  /// Samples after the receiver's Rx chain (waveform fidelity or raw bursts).
  std::optional<phy::BasebandBurst> burst;
  /// Decoded frame, or the failure message.
  std::optional<phy::RxResult> rx;
  std::string error;
};

struct LinkStats {
  std::uint64_t sent = 0;
  std::uint64_t delivered = 0;
  std::uint64_t lost = 0;         // random loss
  std::uint64_t off_channel = 0;  // tunings do not overlap
  std::uint64_t undecodable = 0;  // delivered but the receiver failed
  /// Data frames sent or delivered while the two NICs were tuned differently.
  std::uint64_t mistuned_in_flight = 0;
};

/// Counter-based uniform draw in [0, 1) keyed by (seed, index, stream).
double keyed_uniform(std::uint64_t seed, std::uint64_t index, std::uint64_t stream = 0);

/// Carriers are close enough for a frame to be received.
bool tunings_overlap(const Tuning& tx, const Tuning& rx);

/// Two NICs ("a" = side 0, "b" = side 1) joined through the impairment chain.
class VirtualLink {
 public:
  using Handler = std::function<void(const Arrival&)>;

  VirtualLink(Scheduler& sched, VirtualNic& a, VirtualNic& b, LinkConfig cfg);

  void set_handler(int side, Handler handler);
  VirtualNic& nic(int side) { return side == 0 ? a_ : b_; }
  const LinkConfig& config() const { return cfg_; }
  const LinkStats& stats() const { return stats_; }

  /// Sends a frame from `side`; delivery (if any) happens after the link latency.
  /// Returns the message index. Control frames (`data` false) are left out of
  /// the mistuned_in_flight count.
  std::uint64_t transmit(int side, const phy::FrameConfig& frame, bool data = true);
  /// Sends raw samples; the arrival carries the processed burst and no decode.
  std::uint64_t transmit_burst(int side, const phy::BasebandBurst& burst);

  /// Samples `burst` as seen by `rx` after the Tx chain, channel and Rx chain.
  phy::BasebandBurst propagate(const phy::BasebandBurst& burst, const VirtualNic& tx, const VirtualNic& rx,
                               int direction, double extra_cfo, std::uint64_t index) const;

 private:
  std::uint64_t send(int side, const phy::FrameConfig* frame, const phy::BasebandBurst* burst, bool data);
  phy::RxResult analytic_receive(const phy::FrameConfig& frame, const Tuning& tx, const Tuning& rx,
                                 int direction, double cfo, std::uint64_t index) const;
  bool mistuned() const;

  Scheduler& sched_;
  VirtualNic& a_;
  VirtualNic& b_;
  LinkConfig cfg_;
  std::array<Handler, 2> handlers_;
  std::uint64_t next_index_ = 0;
  LinkStats stats_;
};

}  // namespace csiwb::sim
