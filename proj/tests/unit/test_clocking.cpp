#include <doctest.h>

#include <cstdint>
#include <random>

#include "csiwb/clocking.hpp"
#include "csiwb/common.hpp"

using namespace csiwb;
using namespace csiwb::clocking;

namespace {

// Bandwidth table rows: (div_int, ref_div, clk_sel) -> MHz at HT20_40 = 0 / 1.
struct Row {
  int div_int, ref_div, clk_sel;
  double bw0, bw1;
};
constexpr Row kRows[] = {
    {22, 10, 1, 2.5, 5}, {22, 10, 0, 5, 10},  {22, 5, 1, 5, 10},
    {22, 5, 0, 10, 20},  {33, 5, 0, 15, 30},  {44, 5, 0, 20, 40},
    {88, 5, 0, 40, 80},
};

}  // namespace

TEST_CASE("bandwidth table rows reproduce exactly") {
  for (const auto& r : kRows) {
    CAPTURE(r.div_int);
    CAPTURE(r.ref_div);
    CAPTURE(r.clk_sel);
    CHECK(bandwidth_for_quad({r.div_int, r.ref_div, r.clk_sel, 0}) == r.bw0 * 1e6);
    CHECK(bandwidth_for_quad({r.div_int, r.ref_div, r.clk_sel, 1}) == r.bw1 * 1e6);
    CHECK(is_documented_quad({r.div_int, r.ref_div, r.clk_sel, 0}));
    CHECK(is_documented_quad({r.div_int, r.ref_div, r.clk_sel, 1}));
  }
}

TEST_CASE("pll frequency examples") {
  CHECK(pll_frequency({44, 5, 0, 0}) == 88e6);
  CHECK(pll_frequency({44, 5, 0, 1}) == 176e6);
  CHECK(pll_frequency({22, 10, 1, 0}) == 11e6);

  const auto c = derived_clocks({44, 5, 0, 0});
  CHECK(c.f_pll == 88e6);
  CHECK(c.f_digi_bb == 44e6);
  CHECK(c.f_rx_adc == 88e6);
  CHECK(c.f_tx_dac == 176e6);
  CHECK(c.bandwidth == 20e6);
  CHECK(derived_clocks({22, 10, 1, 0}).bandwidth == 2.5e6);
  CHECK(derived_clocks({88, 5, 0, 1}).bandwidth == 80e6);
}

TEST_CASE("pll frequency matches integer oracle and scales linearly") {
  for (int ref = 1; ref <= 10; ++ref)
    for (int cs = 0; cs <= 2; ++cs)
      for (int ht = 0; ht <= 1; ++ht)
        for (int di = 1; di <= 127; di += 7) {
          // f = 40e6 * di * 2^ht / (ref * 2^(2+cs)), kept as an exact rational.
          const std::int64_t num = 40'000'000LL * di * (1LL << ht);
          const std::int64_t den = ref * (1LL << (2 + cs));
          const double oracle = static_cast<double>(num) / static_cast<double>(den);
          CHECK(pll_frequency({di, ref, cs, ht}) == oracle);
          CHECK(pll_frequency({2 * di, ref, cs, ht}) == 2.0 * pll_frequency({di, ref, cs, ht}));
        }
}

TEST_CASE("invalid quadruples are rejected") {
  CHECK_THROWS_AS(validate({44, 5, 3, 0}), DomainError);
  CHECK_THROWS_AS(validate({44, 5, 0, 2}), DomainError);
  CHECK_THROWS_AS(validate({44, 0, 0, 0}), DomainError);
  CHECK_THROWS_AS(pll_frequency({44, 5, -1, 0}), DomainError);
}

TEST_CASE("quad_for_bandwidth") {
  CHECK(quad_for_bandwidth(20e6) == PllQuadruple{44, 5, 0, 0});
  CHECK(quad_for_bandwidth(2.5e6) == PllQuadruple{22, 10, 1, 0});
  CHECK(bandwidth_for_quad(quad_for_bandwidth(30e6)) == 30e6);
  CHECK(bandwidth_for_quad(quad_for_bandwidth(80e6)) == 80e6);
  CHECK_THROWS_AS(quad_for_bandwidth(1e6), DomainError);
  CHECK_THROWS_AS(quad_for_bandwidth(81e6), DomainError);

  // Exhaustive oracle: no quadruple in the search space is strictly closer.
  for (double target : {7.3e6, 12.5e6, 23.1e6, 41e6, 66.6e6}) {
    double best = 1e300;
    for (int di = 1; di <= 255; ++di)
      for (int ref = 1; ref <= 10; ++ref)
        for (int cs = 0; cs <= 2; ++cs)
          for (int ht = 0; ht <= 1; ++ht)
            best = std::min(best, std::abs(bandwidth_for_quad({di, ref, cs, ht}) - target));
    CAPTURE(target);
    CHECK(std::abs(bandwidth_for_quad(quad_for_bandwidth(target)) - target) == best);
  }
}

TEST_CASE("synthesizer frequency") {
  CHECK(synth_frequency(1) == 305.17578125);
  CHECK(synth_frequency(0) == 0.0);
  CHECK(synth_frequency(10485760) == 3.2e9);
  std::mt19937 rng(5);
  for (int i = 0; i < 200; ++i) {
    const std::uint32_t a = rng() % 8'000'000, b = rng() % 8'000'000;
    CHECK(synth_frequency(a + b) == synth_frequency(a) + synth_frequency(b));
  }
  const auto s5 = synth_setting(10485760, Band::Band5G);
  CHECK(s5.f_rf == 1.5 * 3.2e9);
  CHECK(s5.valid);
  const auto s2 = synth_setting(10485760, Band::Band2G4);
  CHECK(s2.f_rf == 0.75 * 3.2e9);
  CHECK_FALSE(synth_setting(100, Band::Band5G).valid);
}

TEST_CASE("tuning resolution constants") {
  CHECK(tuning_resolution(Band::Band5G) == 915.52734375);
  CHECK(tuning_resolution(Band::Band2G4) == 0.75 * 305.17578125);
  CHECK(std::abs(tuning_resolution(Band::Band2G4) - 228.881835938) < 1e-9);
  CHECK(tuning_resolution(Resolution::Synthesizer) == 305.17578125);
  CHECK(tuning_resolution(Resolution::Band2G4Documented) == 203.3);
}

TEST_CASE("5.2 GHz quantizes onto the documented neighbours") {
  const auto q = quantize_carrier(5.2e9, Band::Band5G);
  CHECK(q.step == 915.52734375);
  CHECK(std::abs(q.lower - 5199.999389e6) < 1.0);
  CHECK(std::abs(q.upper - 5200.000305e6) < 1.0);
  CHECK(q.upper - q.lower == q.step);
}

TEST_CASE("quantization against exact integer grid oracle") {
  std::mt19937_64 rng(11);
  for (Band band : {Band::Band2G4, Band::Band5G}) {
    const auto [lo, hi] = carrier_range(band);
    // Grid step = 40e6 * m / 2^17 with m = 3 (5G) or 3/4 (2.4G): integer
    // grid over 1/(4*2^17) of 40e6 Hz units avoids floating point.
    const std::int64_t m4 = band == Band::Band5G ? 12 : 3;
    std::uniform_real_distribution<double> u(lo, hi);
    for (int i = 0; i < 500; ++i) {
      const double t = std::round(u(rng));  // whole Hz targets
      const auto q = quantize_carrier(t, band);
      // k_lower = floor(t * 4 * 2^17 / (40e6 * m4)) exactly in 128-bit.
      const __int128 num = static_cast<__int128>(static_cast<std::int64_t>(t)) * 4 * kSynthDenominator;
      const __int128 den = static_cast<__int128>(kXtalHzInt) * m4;
      const auto k = static_cast<std::int64_t>(num / den);
      const double lower = static_cast<double>(k) * q.step;
      CAPTURE(t);
      CHECK(q.lower == doctest::Approx(lower).epsilon(1e-15));
      CHECK(q.lower <= t);
      CHECK(t <= q.upper);
      if (q.lower != q.upper) CHECK(q.upper - q.lower == doctest::Approx(q.step).epsilon(1e-9));
      CHECK(std::abs(q.chosen - t) <= q.step / 2 + 1e-6);
      const auto again = quantize_carrier(q.chosen, band);
      CHECK(again.chosen == q.chosen);
      CHECK(again.lower == again.upper);
    }
  }
}

TEST_CASE("grid point is a fixed point and out-of-range is rejected") {
  const double g = 5'680'000 * 915.52734375;  // grid index 5.68e6 lies in 5G range
  const auto q = quantize_carrier(g, Band::Band5G);
  CHECK(q.lower == g);
  CHECK(q.upper == g);
  CHECK(q.chosen == g);
  CHECK_THROWS_AS(quantize_carrier(3.5e9, Band::Band5G), DomainError);
  CHECK_THROWS_AS(quantize_carrier(5.2e9, Band::Band2G4), DomainError);
  // 2.4 GHz = 2.4e9 / 228.881835938 = 10485760 exactly.
  const auto q24 = quantize_carrier(2.4e9, Band::Band2G4);
  CHECK(q24.chosen == 2.4e9);
  CHECK(q24.grid_index == 10485760);
}

TEST_CASE("exact midpoint between grid points picks the lower one") {
  const double g = 5'680'000 * 915.52734375;
  const auto q = quantize_carrier(g + 915.52734375 / 2, Band::Band5G);
  CHECK(q.lower == g);
  CHECK(q.chosen == g);
}
