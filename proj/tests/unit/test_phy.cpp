#include <doctest.h>

#include <algorithm>
#include <array>
#include <bit>
#include <random>

#include "csiwb/dsp.hpp"
#include "csiwb/impairments.hpp"
#include "csiwb/phy/receiver.hpp"

using namespace csiwb;
using namespace csiwb::phy;

namespace {

Bits random_bits(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Bits b(n);
  for (auto& v : b) v = static_cast<std::uint8_t>(rng() & 1u);
  return b;
}

std::vector<std::uint8_t> random_bytes(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::uint8_t> p(n);
  for (auto& b : p) b = static_cast<std::uint8_t>(rng() & 0xff);
  return p;
}

// Plain x^7 + x^4 + 1 shift register, state bit i holds x^(i+1).
std::vector<int> lfsr_oracle(std::array<int, 7> state, std::size_t n) {
  std::vector<int> out;
  for (std::size_t i = 0; i < n; ++i) {
    const int b = state[6] ^ state[3];
    for (int j = 6; j > 0; --j) state[static_cast<std::size_t>(j)] = state[static_cast<std::size_t>(j - 1)];
    state[0] = b;
    out.push_back(b);
  }
  return out;
}

// Two-step block interleaver written from the index formulas.
std::vector<std::size_t> interleaver_oracle(std::size_t n_cbps, std::size_t n_bpsc, std::size_t n_col) {
  const std::size_t s = std::max<std::size_t>(n_bpsc / 2, 1);
  const std::size_t n_row = n_cbps / n_col;
  std::vector<std::size_t> out(n_cbps);
  for (std::size_t k = 0; k < n_cbps; ++k) {
    const std::size_t i = n_row * (k % n_col) + k / n_col;
    const std::size_t j = s * (i / s) + (i + n_cbps - (n_col * i) / n_cbps) % s;
    out[k] = j;
  }
  return out;
}

RxConfig rx_for(const FrameConfig& cfg) {
  RxConfig rx;
  rx.format = cfg.format;
  rx.channel_mode = cfg.channel_mode;
  rx.ht20_peer = cfg.ht20_peer;
  return rx;
}

FrameConfig ht20(std::size_t bytes, int mcs = 0) {
  FrameConfig c;
  c.mcs = mcs;
  c.payload = random_bytes(bytes, 77 + bytes);
  return c;
}

}  // namespace

TEST_CASE("scrambler involution, keystream and period") {
  const Bits b = random_bits(1000, 3);
  for (int seed : {1, 45, 93, 127}) {
    CHECK(scramble(seed, scramble(seed, b)) == b);
    const Bits zero(300, 0);
    CHECK(scramble(seed, zero) == scrambler_sequence(seed, 300));
    const Bits ks = scrambler_sequence(seed, 254);
    CHECK(std::equal(ks.begin(), ks.begin() + 127, ks.begin() + 127));
    // Maximal length: no shorter period.
    for (std::size_t p = 1; p < 127; ++p)
      if (127 % p == 0) CHECK_FALSE(std::equal(ks.begin(), ks.begin() + 127 - static_cast<long>(p), ks.begin() + static_cast<long>(p)));
  }
  CHECK_THROWS_AS(scramble(0, b), DomainError);
  CHECK_THROWS_AS(scramble(128, b), DomainError);
}

TEST_CASE("scrambler seed recovery") {
  for (int seed = 1; seed <= 127; ++seed) CHECK(recover_scrambler_seed(scrambler_sequence(seed, 7)) == seed);
}

TEST_CASE("pilot polarity follows the all-ones LFSR") {
  const auto seq = lfsr_oracle({1, 1, 1, 1, 1, 1, 1}, 127);
  for (std::size_t n = 0; n < 300; ++n) CHECK(pilot_polarity(n) == (seq[n % 127] ? -1 : 1));
  const int head[] = {1, 1, 1, 1, -1, -1, -1, 1};
  for (std::size_t n = 0; n < 8; ++n) CHECK(pilot_polarity(n) == head[n]);
}

TEST_CASE("BCC round trip at all rates") {
  for (auto rate : {CodeRate::R1_2, CodeRate::R2_3, CodeRate::R3_4, CodeRate::R5_6}) {
    CAPTURE(to_string(rate));
    const std::size_t period = rate_input_period(rate);
    Bits x = random_bits(period * 200, 9);
    for (std::size_t i = x.size() - 6; i < x.size(); ++i) x[i] = 0;
    const Bits c = bcc_encode(x, rate);
    CHECK(c.size() == x.size() / period * rate_output_period(rate));
    CHECK(bcc_decode(c, rate) == x);
    const Bits zeros(period * 20, 0);
    const Bits cz = bcc_encode(zeros, rate);
    CHECK(std::all_of(cz.begin(), cz.end(), [](auto v) { return v == 0; }));
  }
}

TEST_CASE("Viterbi corrects isolated errors at rate 1/2") {
  Bits x = random_bits(1000, 17);
  for (std::size_t i = 994; i < 1000; ++i) x[i] = 0;
  const Bits c = bcc_encode(x, CodeRate::R1_2);
  for (std::size_t pos : {0u, 1u, 333u, 1200u, 1990u}) {
    Bits e = c;
    e[pos] ^= 1;
    CHECK(bcc_decode(e, CodeRate::R1_2) == x);
  }
  // Two-bit bursts spaced far apart.
  Bits e = c;
  for (std::size_t pos = 100; pos + 1 < e.size() - 40; pos += 200) {
    e[pos] ^= 1;
    e[pos + 1] ^= 1;
  }
  CHECK(bcc_decode(e, CodeRate::R1_2) == x);
}

TEST_CASE("interleaver matches index-formula oracle") {
  struct K {
    InterleaverKind kind;
    std::size_t n_sd, n_col;
  };
  for (auto [kind, n_sd, n_col] : {K{InterleaverKind::Legacy, 48, 16}, K{InterleaverKind::HT20, 52, 13},
                                    K{InterleaverKind::HT40, 108, 18}}) {
    for (std::size_t n_bpsc : {1u, 2u, 4u, 6u}) {
      const std::size_t n_cbps = n_sd * n_bpsc;
      CAPTURE(n_cbps);
      const auto perm = interleaver_permutation(kind, n_cbps, n_bpsc);
      CHECK(perm == interleaver_oracle(n_cbps, n_bpsc, n_col));
      const Bits b = random_bits(n_cbps, n_cbps);
      const Bits il = interleave(b, kind, n_bpsc);
      CHECK(deinterleave(il, kind, n_bpsc) == b);
      for (std::size_t k = 0; k < n_cbps; ++k) CHECK(il[perm[k]] == b[k]);
      auto sorted = perm;
      std::sort(sorted.begin(), sorted.end());
      for (std::size_t k = 0; k < n_cbps; ++k) CHECK(sorted[k] == k);
    }
  }
}

TEST_CASE("constellations: unit power, BPSK mapping, round trip") {
  for (auto mod : {Modulation::BPSK, Modulation::QPSK, Modulation::QAM16, Modulation::QAM64}) {
    const auto& pts = constellation(mod);
    double p = 0;
    for (auto v : pts) p += std::norm(v);
    CHECK(std::abs(p / static_cast<double>(pts.size()) - 1.0) < 1e-12);
    const std::size_t nb = bits_per_symbol(mod);
    const Bits b = random_bits(nb * 500, nb);
    CHECK(demap_qam(map_qam(b, mod), mod) == b);
    // Gray: nearest neighbours differ in one bit.
    for (std::size_t i = 0; i < pts.size(); ++i) {
      double dmin = 1e9;
      for (std::size_t j = 0; j < pts.size(); ++j)
        if (i != j) dmin = std::min(dmin, std::abs(pts[i] - pts[j]));
      for (std::size_t j = 0; j < pts.size(); ++j)
        if (i != j && std::abs(std::abs(pts[i] - pts[j]) - dmin) < 1e-9)
          CHECK(std::popcount(static_cast<unsigned>(i ^ j)) == 1);
    }
  }
  const std::uint8_t zero = 0, one = 1;
  CHECK(map_point(std::span(&zero, 1), Modulation::BPSK) == Complex(-1, 0));
  CHECK(map_point(std::span(&one, 1), Modulation::BPSK) == Complex(1, 0));
}

TEST_CASE("OFDM modulate/demodulate are inverse") {
  for (std::size_t n : {64u, 128u}) {
    const auto grid = n == 64 ? grid_ht20() : grid_ht40();
    std::mt19937_64 rng(n);
    std::normal_distribution<double> g;
    CVec v(grid.size());
    for (auto& x : v) x = {g(rng), g(rng)};
    const double norm = 1.0 / std::sqrt(52.0 * static_cast<double>(n) / 64.0);
    const CVec t = ofdm_modulate(grid.indices, v, n, norm);
    const CVec back = ofdm_demodulate(t, grid.indices, n, norm);
    for (std::size_t i = 0; i < v.size(); ++i) CHECK(std::abs(back[i] - v[i]) < 1e-12);
    // Null tones are exactly zero.
    const CVec bins = dsp::fft(t);
    for (std::size_t k = 0; k < n; ++k) {
      const int s = k < n / 2 ? static_cast<int>(k) : static_cast<int>(k) - static_cast<int>(n);
      if (!grid.contains(s)) CHECK(std::abs(bins[k]) < 1e-12);
    }
    const CVec cp = add_cyclic_prefix(t, n / 4);
    CHECK(cp.size() == n + n / 4);
    CHECK(cp.front() == t[n - n / 4]);
  }
}

TEST_CASE("grids") {
  CHECK(grid_ht20().size() == 56);
  CHECK(grid_ht40().size() == 114);
  CHECK(grid_nonht().size() == 52);
  CHECK(grid_ht40().pilot_indices == std::vector<int>{-53, -25, -11, 11, 25, 53});
  CHECK(grid_ht20().pilot_indices == std::vector<int>{-21, -7, 7, 21});
}

TEST_CASE("data symbol count and burst length against bit budget") {
  for (std::size_t bytes : {0u, 1u, 100u, 1000u}) {
    for (int mcs = 0; mcs <= 7; ++mcs) {
      for (auto fmt : {Format::NonHT, Format::HT}) {
        FrameConfig c;
        c.format = fmt;
        c.mcs = mcs;
        c.payload = random_bytes(bytes, bytes);
        const auto info = mcs_info(mcs, fmt == Format::HT);
        const std::size_t n_sd = fmt == Format::HT ? 52 : 48;
        const std::size_t bpsc = bits_per_symbol(info.modulation);
        const std::size_t n_dbps = n_sd * bpsc * rate_input_period(info.rate) / rate_output_period(info.rate);
        const std::size_t n_sym = (16 + 8 * (bytes + 4) + 6 + n_dbps - 1) / n_dbps;
        const auto l = make_layout(c);
        CHECK(l.n_dbps == n_dbps);
        CHECK(data_symbol_count(bytes + 4, l) == n_sym);
        const std::size_t pre = fmt == Format::HT ? 160 + 160 + 80 + 160 + 80 + 80 : 160 + 160 + 80;
        CHECK(frame_sample_count(c) == pre + 80 * n_sym);
        CHECK(assemble_frame(c).size() == pre + 80 * n_sym);
      }
    }
  }
  FrameConfig c = ht20(100);
  const std::size_t base = frame_sample_count(c);
  c.n_ess = 1;
  CHECK(frame_sample_count(c) == base + 80);
  c.guard = GuardInterval::Short;
  c.n_ess = 0;
  CHECK(frame_sample_count(c) == base - 8 * data_symbol_count(104, make_layout(c)));
  FrameConfig h40 = ht20(100);
  h40.channel_mode = ChannelMode::HT40Plus;
  CHECK(assemble_frame(h40).sample_rate == 40e6);
}

TEST_CASE("frame config validation") {
  FrameConfig c = ht20(10);
  c.format = Format::NonHT;
  c.n_ess = 1;
  CHECK_THROWS_AS(c.validate(), DomainError);
  c = ht20(10);
  c.mcs = 8;
  CHECK_THROWS_AS(assemble_frame(c), DomainError);
  c = ht20(10);
  c.scrambler_seed = 0;
  CHECK_THROWS_AS(assemble_frame(c), DomainError);
  c = ht20(max_payload_bytes(Format::HT) + 1);
  CHECK_THROWS_AS(assemble_frame(c), DomainError);
}

TEST_CASE("packet detection") {
  const FrameConfig c = ht20(200, 3);
  const auto frame = assemble_frame(c);
  CHECK(detect_packet(frame, rx_for(c)).value_or(99) == 0);

  BasebandBurst padded = frame;
  padded.samples.insert(padded.samples.begin(), 1000, Complex{});
  padded.samples.resize(padded.samples.size() + 200);
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto noisy = imp::apply_awgn(padded, 20.0, seed);
    const auto off = detect_packet(noisy, rx_for(c));
    REQUIRE(off.has_value());
    CHECK(std::abs(static_cast<long>(*off) - 1000) <= 1);
  }
  BasebandBurst noise;
  noise.samples.assign(4000, Complex(1e-3, 0));
  noise = imp::apply_awgn(noise, -100.0, 4);
  CHECK_FALSE(detect_packet(noise, rx_for(c)).has_value());
}

TEST_CASE("preamble CFO estimate") {
  const FrameConfig c = ht20(100);
  const auto frame = assemble_frame(c);
  const RxConfig rx = rx_for(c);
  // Single-trial std at 30 dB is ~250 Hz (80 lag-64 products); bound trials
  // at 6 sigma and Monte-Carlo means at the example tolerances.
  const int trials = 200;
  for (double f : {0.0, 50e3, -100e3}) {
    const auto shifted = imp::apply_cfo(frame, f);
    double sum = 0;
    for (int t = 0; t < trials; ++t) {
      const double est = estimate_cfo_preamble(imp::apply_awgn(shifted, 30.0, static_cast<std::uint64_t>(t + 1)), 0, rx);
      CHECK(std::abs(est - f) < 1500.0);
      if (f != 0.0) CHECK(std::signbit(est) == std::signbit(f));
      sum += est;
    }
    const double mean = sum / trials;
    CAPTURE(f);
    CHECK(std::abs(mean - f) < (f == 0.0 ? 50.0 : 200.0));
  }
  CHECK(std::abs(estimate_cfo_preamble(frame, 0, rx)) < 1e-6);
  CHECK(std::abs(estimate_cfo_preamble(imp::apply_cfo(frame, 200e3), 0, rx) - 200e3) < 1e-3);
}

TEST_CASE("CSI of flat and two-tap channels") {
  const FrameConfig c = ht20(120, 2);
  const auto frame = assemble_frame(c);
  const RxConfig rx = rx_for(c);

  auto res = receive(frame, rx);
  for (auto v : res.csi.values) CHECK(std::abs(v - 1.0) < 1e-9);

  BasebandBurst scaled = frame;
  const Complex g{0.3, -0.4};
  for (auto& s : scaled.samples) s *= g;
  res = receive(scaled, rx);
  for (auto v : res.csi.values) CHECK(std::abs(v - g) < 1e-9);

  const std::vector<imp::Tap> taps{{0, {1.0, 0.0}}, {3, {0.5, 0.0}}};
  res = receive(imp::apply_multipath(frame, taps), rx);
  CHECK(res.fcs_ok);
  for (std::size_t i = 0; i < res.csi.grid.size(); ++i) {
    const int k = res.csi.grid.indices[i];
    const Complex h = 1.0 + 0.5 * std::polar(1.0, -kTwoPi * k * 3.0 / 64.0);
    CHECK(std::abs(res.csi.values[i] - h) < 1e-9);
  }
}

TEST_CASE("data symbol CSI of a clean frame equals the training CSI") {
  for (auto fmt : {Format::HT, Format::NonHT}) {
    FrameConfig c = ht20(300, 4);
    c.format = fmt;
    const auto res = receive(assemble_frame(c), rx_for(c));
    REQUIRE(res.fcs_ok);
    CHECK(res.data_symbol_csi.size() == data_symbol_count(304, make_layout(c)));
    CHECK(res.sym_duration == doctest::Approx(4e-6));
    for (const auto& h : res.data_symbol_csi)
      for (std::size_t i = 0; i < h.size(); ++i) CHECK(std::abs(h[i] - res.csi.values[i]) < 1e-9);
  }
  FrameConfig s = ht20(100);
  s.guard = GuardInterval::Short;
  CHECK(receive(assemble_frame(s), rx_for(s)).sym_duration == doctest::Approx(3.6e-6));
}

TEST_CASE("regenerated symbols carry the pilot sequence and depend on the seed") {
  FrameConfig c = ht20(80, 1);
  c.format = Format::NonHT;
  const auto xs = regenerate_symbols(c.payload, c);
  const auto grid = grid_nonht();
  const double base[] = {1, 1, 1, -1};
  for (std::size_t n = 0; n < xs.size(); ++n)
    for (std::size_t p = 0; p < 4; ++p)
      CHECK(xs[n][static_cast<std::size_t>(grid.position_of(grid.pilot_indices[p]))] ==
            Complex(base[p] * pilot_polarity(n + 1), 0));
  FrameConfig d = c;
  d.scrambler_seed = 5;
  CHECK(regenerate_symbols(d.payload, d) != xs);
}

TEST_CASE("half-band HT40 frame only occupies the primary half") {
  for (auto mode : {ChannelMode::HT40Plus, ChannelMode::HT40Minus}) {
    FrameConfig c = ht20(200);
    c.channel_mode = mode;
    c.ht20_peer = true;
    const auto burst = assemble_frame(c);
    CHECK(burst.sample_rate == 40e6);
    // Every OFDM window after the legacy preamble has exact zeros in the other half.
    const auto l = make_layout(c);
    for (std::size_t start = l.data_start(0); start + l.symbol_samples(true) <= burst.size();
         start += l.symbol_samples(true)) {
      const CVec bins = dsp::fft(std::span(burst.samples).subspan(start + l.cp_data, l.fft_size));
      double used = 0, other = 0;
      for (std::size_t k = 0; k < bins.size(); ++k) {
        const bool upper = k > 0 && k < bins.size() / 2;
        ((mode == ChannelMode::HT40Plus) == upper ? other : used) += std::norm(bins[k]);
      }
      CHECK(other < 1e-24 * used);
    }
    const auto res = receive(burst, rx_for(c));
    CHECK(res.fcs_ok);
    CHECK(res.csi.grid.size() == 56);
    for (int k : res.csi.grid.indices) CHECK((mode == ChannelMode::HT40Plus ? k < 0 : k > 0));
  }
}

TEST_CASE("ESS frame adds one HT-LTF and still decodes") {
  FrameConfig c = ht20(100, 2);
  c.n_ess = 1;
  const auto res = receive(assemble_frame(c), rx_for(c));
  CHECK(res.fcs_ok);
  CHECK(res.signal.n_ess == 1);
}

TEST_CASE("AWGN at 15 dB keeps MCS0 frames decodable") {
  const FrameConfig c = ht20(100, 0);
  const auto frame = assemble_frame(c);
  int ok = 0;
  const int n = 200;
  for (int i = 0; i < n; ++i) {
    try {
      ok += receive(imp::apply_awgn(frame, 15.0, static_cast<std::uint64_t>(i + 1)), rx_for(c)).fcs_ok ? 1 : 0;
    } catch (const RxError&) {
    }
  }
  CHECK(ok >= n * 99 / 100);
}
