#include <doctest.h>

#include <random>

#include "csiwb/phy/receiver.hpp"

using namespace csiwb;
using namespace csiwb::phy;

namespace {

std::vector<std::uint8_t> random_payload(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::uint8_t> p(n);
  for (auto& b : p) b = static_cast<std::uint8_t>(rng() & 0xff);
  return p;
}

RxConfig rx_for(const FrameConfig& cfg) {
  RxConfig rx;
  rx.format = cfg.format;
  rx.channel_mode = cfg.channel_mode;
  rx.ht20_peer = cfg.ht20_peer;
  rx.nonht_guard = cfg.guard;
  return rx;
}

}  // namespace

TEST_CASE("clean loopback decodes bit-exact across formats, modes and MCS") {
  struct Case {
    Format f;
    ChannelMode m;
    bool peer;
    GuardInterval g;
  };
  const Case cases[] = {
      {Format::HT, ChannelMode::HT20, false, GuardInterval::Long},
      {Format::HT, ChannelMode::HT20, false, GuardInterval::Short},
      {Format::HT, ChannelMode::HT40Plus, false, GuardInterval::Long},
      {Format::HT, ChannelMode::HT40Minus, false, GuardInterval::Short},
      {Format::HT, ChannelMode::HT40Plus, true, GuardInterval::Long},
      {Format::HT, ChannelMode::HT40Minus, true, GuardInterval::Long},
      {Format::NonHT, ChannelMode::HT20, false, GuardInterval::Long},
      {Format::NonHT, ChannelMode::HT40Plus, true, GuardInterval::Long},
      {Format::NonHT, ChannelMode::HT20, false, GuardInterval::Short},
  };
  int seed = 1;
  for (const auto& c : cases) {
    for (int mcs = 0; mcs <= 7; ++mcs) {
      FrameConfig cfg;
      cfg.format = c.f;
      cfg.channel_mode = c.m;
      cfg.ht20_peer = c.peer;
      cfg.guard = c.g;
      cfg.mcs = mcs;
      cfg.scrambler_seed = 1 + (seed * 37) % 127;
      cfg.n_ess = (c.f == Format::HT && mcs % 2) ? 1 : 0;
      cfg.payload = random_payload(50 + 37 * static_cast<std::size_t>(mcs), static_cast<std::uint64_t>(seed++));
      const auto burst = assemble_frame(cfg);
      CAPTURE(to_string(c.m));
      CAPTURE(to_string(c.f));
      CAPTURE(c.peer);
      CAPTURE(mcs);
      CHECK(burst.size() == frame_sample_count(cfg));
      const auto res = receive(burst, rx_for(cfg));
      CHECK(res.offset == 0);
      CHECK(res.fcs_ok);
      CHECK(res.payload == cfg.payload);
      CHECK(res.scrambler_seed == cfg.scrambler_seed);
      CHECK(res.evm_db < -80.0);
    }
  }
}
