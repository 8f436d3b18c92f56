#pragma once

// Runs an echoprobe scan plan over a simulated link.

#include <string>
#include <vector>

#include "csiwb/echoprobe.hpp"
#include "csiwb/simnet.hpp"

namespace csiwb::echo {

struct ScanConfig {
  ProtocolConfig protocol;
  sim::LinkConfig link;
  sim::NicConfig initiator = named_nic("initiator");
  sim::NicConfig responder = named_nic("responder");

  static sim::NicConfig named_nic(std::string id) {
    sim::NicConfig n;
    n.id = std::move(id);
    return n;
  }
  phy::GuardInterval guard = phy::GuardInterval::Long;
  bool keep_trace = false;
};

struct ExchangeReport {
  std::size_t repeat = 0;
  std::uint32_t seq = 0;
  double timestamp_us = 0.0;  // arrival of the reply
  double rtt_us = 0.0;
};

struct PointReport {
  GridPoint point;
  sim::Tuning initiator_tuning;
  sim::Tuning responder_tuning;
  std::vector<ExchangeReport> records;
  std::vector<std::size_t> failed_repeats;
  bool failed = false;
};

struct ScanReport {
  ScanPlan plan;
  ProtocolConfig protocol;
  sim::LinkConfig link;
  std::vector<PointReport> points;
  std::size_t records = 0;
  std::size_t failed_points = 0;
  std::size_t failed_exchanges = 0;
  std::size_t messages = 0;  // frames put on the link, retransmissions included
  sim::LinkStats link_stats;
  double duration_us = 0.0;
  double rtt_max_us = 0.0;
  double rtt_mean_us = 0.0;
  bool finished = false;
};

struct ScanResult {
  ScanReport report;
  io::Capture initiator;  // CSI of reply frames measured at the initiator
  io::Capture responder;  // CSI of request frames measured at the responder (no data train)
  std::vector<sim::TraceEntry> trace;
};

ScanResult run_scan(const ScanPlan& plan, const ScanConfig& cfg);

/// Deterministic JSON text of a report (schema "csiwb-scan-report", version 1).
std::string report_to_json(const ScanReport& report);

}  // namespace csiwb::echo
