#include "csiwb/scan.hpp"

#include <json.hpp>
#include <map>

namespace csiwb::echo {

namespace {

class ScanDriver {
 public:
  ScanDriver(const ScanPlan& plan, const ScanConfig& cfg)
      : cfg_(cfg),
        a_(with_masks(cfg.initiator, plan.tx, cfg.guard)),
        b_(with_masks(cfg.responder, plan.tx, cfg.guard)),
        init_(make_initiator(plan, cfg.protocol)),
        resp_(make_responder(cfg.protocol, plan.point(0))) {
    sched_.set_tracing(cfg.keep_trace);
    const GridPoint p0 = plan.point(0);
    a_.tune(p0.cf, p0.sf);
    b_.tune(p0.cf, p0.sf);
    link_.emplace(sched_, a_, b_, cfg.link);
    link_->set_handler(0, [this](const sim::Arrival& arr) { on_arrival(0, arr); });
    link_->set_handler(1, [this](const sim::Arrival& arr) { on_arrival(1, arr); });

    auto& rep = result_.report;
    rep.plan = plan;
    rep.protocol = cfg.protocol;
    rep.link = cfg.link;
    rep.points.resize(plan.n_points());
    for (std::size_t i = 0; i < plan.n_points(); ++i) {
      rep.points[i].point = plan.point(i);
      rep.points[i].initiator_tuning = sim::tune_for(a_.config(), rep.points[i].point.cf, rep.points[i].point.sf);
      rep.points[i].responder_tuning = sim::tune_for(b_.config(), rep.points[i].point.cf, rep.points[i].point.sf);
    }
  }

  ScanResult run() {
    sched_.schedule(0.0, "plan started", [this] { feed_initiator(PlanStarted{}); });
    sched_.run_until_idle();
    auto& rep = result_.report;
    rep.duration_us = sched_.now();
    rep.messages = link_->stats().sent;
    rep.link_stats = link_->stats();
    rep.failed_exchanges = init_.failed_exchanges;
    for (const auto& p : rep.points) rep.failed_points += p.failed ? 1 : 0;
    if (rep.records > 0) rep.rtt_mean_us = rtt_sum_ / static_cast<double>(rep.records);
    result_.trace = sched_.trace();
    return std::move(result_);
  }

 private:
  static sim::NicConfig with_masks(sim::NicConfig nic, const TxParams& tx, phy::GuardInterval guard) {
    nic.txcm = tx.txcm;
    nic.rxcm = tx.rxcm;
    nic.nonht_guard = guard;
    return nic;
  }

  void on_arrival(int side, const sim::Arrival& arr) {
    if (!arr.rx) return;
    ProbeMessage msg;
    try {
      msg = decode_message(arr.rx->payload);
    } catch (const DomainError&) {
      sched_.note("undecodable probe message");
      return;
    }
    FrameReceived ev{std::move(msg), io::record_from_rx(*arr.rx, arr.arrived_at * 1e-6, arr.rx_tuning.requested_cf)};
    if (side == 0) {
      feed_initiator(ev);
    } else {
      feed_responder(ev);
    }
  }

  void feed_initiator(const Event& ev) {
    auto [next, acts] = initiator_step(std::move(init_), ev, sched_.now());
    init_ = std::move(next);
    apply(0, acts);
  }

  void feed_responder(const Event& ev) {
    auto [next, acts] = responder_step(std::move(resp_), ev, sched_.now());
    resp_ = std::move(next);
    apply(1, acts);
  }

  void send(int side, const ProbeMessage& msg) {
    sim::VirtualNic& nic = side == 0 ? a_ : b_;
    const bool data = msg.kind == MessageKind::CSIProbeRequest || msg.kind == MessageKind::CSIProbeReply;
    link_->transmit(side, nic.frame_for(encode_message(msg), init_.plan.tx.mcs, init_.plan.tx.n_ess, cfg_.guard), data);
  }

  void apply(int side, std::vector<Action>& acts) {
    sim::VirtualNic& nic = side == 0 ? a_ : b_;
    for (auto& act : acts) {
      if (auto* s = std::get_if<SendMessage>(&act)) {
        if (s->delay_us > 0.0) {
          sched_.schedule_in(s->delay_us, "send", [this, side, msg = std::move(s->msg)] { send(side, msg); });
        } else {
          send(side, s->msg);
        }
      } else if (auto* t = std::get_if<SetTimer>(&act)) {
        const std::uint64_t id = t->timer;
        timers_[id] = sched_.schedule_in(t->after_us, "timer", [this, id] {
          timers_.erase(id);
          feed_initiator(TimerFired{id});
        });
      } else if (auto* c = std::get_if<CancelTimer>(&act)) {
        if (auto it = timers_.find(c->timer); it != timers_.end()) {
          sched_.cancel(it->second);
          timers_.erase(it);
        }
      } else if (auto* r = std::get_if<Retune>(&act)) {
        const GridPoint p = r->point;
        if (r->delay_us > 0.0) {
          sched_.schedule_in(r->delay_us, "retune", [&nic, p] { nic.tune(p.cf, p.sf); });
        } else {
          nic.tune(p.cf, p.sf);
        }
      } else if (auto* rec = std::get_if<RecordPair>(&act)) {
        auto& rep = result_.report;
        auto& pr = rep.points.at(rec->point_index);
        pr.records.push_back({rec->repeat_index, rec->seq, static_cast<double>(rec->initiator.timestamp_us), rec->rtt_us});
        rep.records += 1;
        rep.rtt_max_us = std::max(rep.rtt_max_us, rec->rtt_us);
        rtt_sum_ += rec->rtt_us;
        result_.initiator.records.push_back(std::move(rec->initiator));
        result_.responder.records.push_back(std::move(rec->responder));
      } else if (auto* f = std::get_if<MarkFailed>(&act)) {
        auto& pr = result_.report.points.at(f->point_index);
        pr.failed = true;
        pr.failed_repeats.push_back(f->repeat_index);
      } else if (std::holds_alternative<Finish>(act)) {
        result_.report.finished = true;
      }
    }
  }

  const ScanConfig& cfg_;
  sim::Scheduler sched_;
  sim::VirtualNic a_;
  sim::VirtualNic b_;
  std::optional<sim::VirtualLink> link_;
  InitiatorState init_;
  ResponderState resp_;
  std::map<std::uint64_t, sim::Scheduler::EventId> timers_;
  ScanResult result_;
  double rtt_sum_ = 0.0;
};

nlohmann::ordered_json tuning_json(const sim::Tuning& t) {
  return {{"cf_hz", t.cf},
          {"sf_hz", t.sf},
          {"band", clocking::to_string(t.band)},
          {"quad", clocking::to_string(t.quad)}};
}

}  // namespace

ScanResult run_scan(const ScanPlan& plan, const ScanConfig& cfg) {
  plan.validate();
  ScanDriver driver(plan, cfg);
  return driver.run();
}

std::string report_to_json(const ScanReport& r) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["schema"] = "csiwb-scan-report";
  j["version"] = 1;
  j["plan"] = {{"cf_points_hz", r.plan.cf_points},
               {"sf_points_hz", r.plan.sf_points},
               {"repeat", r.plan.repeat},
               {"delay_us", r.plan.delay_us},
               {"mcs", r.plan.tx.mcs},
               {"n_ess", r.plan.tx.n_ess},
               {"txcm", r.plan.tx.txcm},
               {"rxcm", r.plan.tx.rxcm}};
  j["protocol"] = {{"max_retries", r.protocol.max_retries},
                   {"retry_timeout_us", r.protocol.retry_timeout_us},
                   {"turnaround_us", r.protocol.turnaround_us},
                   {"session_id", r.protocol.session_id}};
  j["link"] = {{"latency_us", r.link.latency},
               {"loss_prob", r.link.loss_prob},
               {"seed", r.link.seed},
               {"fidelity", sim::to_string(r.link.fidelity)},
               {"quantization_cfo", r.link.quantization_cfo}};
  j["summary"] = {{"finished", r.finished},
                  {"points", r.points.size()},
                  {"records", r.records},
                  {"expected_records", r.plan.n_points() * r.plan.repeat},
                  {"failed_points", r.failed_points},
                  {"failed_exchanges", r.failed_exchanges},
                  {"messages", r.messages},
                  {"lost", r.link_stats.lost},
                  {"off_channel", r.link_stats.off_channel},
                  {"undecodable", r.link_stats.undecodable},
                  {"mistuned_in_flight", r.link_stats.mistuned_in_flight},
                  {"duration_us", r.duration_us},
                  {"rtt_max_us", r.rtt_max_us},
                  {"rtt_mean_us", r.rtt_mean_us}};
  ordered_json points = ordered_json::array();
  for (std::size_t i = 0; i < r.points.size(); ++i) {
    const auto& p = r.points[i];
    ordered_json recs = ordered_json::array();
    for (const auto& e : p.records)
      recs.push_back({{"repeat", e.repeat}, {"seq", e.seq}, {"timestamp_us", e.timestamp_us}, {"rtt_us", e.rtt_us}});
    points.push_back({{"index", i},
                      {"cf_hz", p.point.cf},
                      {"sf_hz", p.point.sf},
                      {"initiator_tuning", tuning_json(p.initiator_tuning)},
                      {"responder_tuning", tuning_json(p.responder_tuning)},
                      {"failed", p.failed},
                      {"failed_repeats", p.failed_repeats},
                      {"records", std::move(recs)}});
  }
  j["points"] = std::move(points);
  return j.dump(2) + "\n";
}

}  // namespace csiwb::echo
