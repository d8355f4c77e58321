#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "nvstrain/error.hpp"
#include "nvstrain/spectrum.hpp"
#include "nvstrain/strain_model.hpp"

using namespace nvstrain;
using std::numbers::pi;

namespace {

StrainAmplitudes amps_of(const StrainTensor& t) {
  return amplitudes_from_tensor(t, default_couplings());
}

std::size_t argmin(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::min_element(v.begin(), v.end()) - v.begin());
}

// Local minima strictly below both neighbours.
std::vector<std::size_t> local_minima(const std::vector<double>& v) {
  std::vector<std::size_t> out;
  for (std::size_t i = 1; i + 1 < v.size(); ++i)
    if (v[i] < v[i - 1] && v[i] < v[i + 1]) out.push_back(i);
  return out;
}

}  // namespace

TEST_CASE("lorentzian") {
  CHECK(lorentzian(0.0, 5e-3) == doctest::Approx(200.0).epsilon(1e-15));
  CHECK(lorentzian(5e-3, 5e-3) == doctest::Approx(100.0).epsilon(1e-14));
  CHECK(lorentzian(0.1, 5e-3) == lorentzian(-0.1, 5e-3));
  // Integral of the unnormalised form is pi.
  double sum = 0.0;
  const double g = 1e-3, h = 1e-6;
  for (double x = -10.0; x <= 10.0; x += h * 100) sum += lorentzian(x, g) * h * 100;
  CHECK(sum == doctest::Approx(pi).epsilon(1e-3));
}

TEST_CASE("transition amplitudes") {
  auto t = transition_amplitudes(0.0, 0.0);
  CHECK(t.alpha_plus == 1.0);
  CHECK(t.alpha_minus == 0.0);
  t = transition_amplitudes(pi / 4, 0.0);
  CHECK(t.alpha_plus == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(t.alpha_minus == doctest::Approx(0.5).epsilon(1e-15));
  t = transition_amplitudes(pi / 2, 0.0);
  CHECK(t.alpha_plus == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(t.alpha_minus == doctest::Approx(1.0));

  SUBCASE("conventions differ only by the sign of phi_str") {
    const auto s = transition_amplitudes(0.3, 0.7, PhaseConvention::Sum);
    const auto d = transition_amplitudes(0.3, -0.7, PhaseConvention::Difference);
    CHECK(s.alpha_plus == d.alpha_plus);
    CHECK(transition_amplitudes(0.3, 0.7, PhaseConvention::Difference).alpha_plus ==
          doctest::Approx(0.5 * (1 + std::cos(0.6 - 0.7))));
  }

  SUBCASE("rates sum to one") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> ang(-10.0, 10.0);
    for (int i = 0; i < 10000; ++i) {
      const double pm = ang(rng), ps = ang(rng);
      for (auto conv : {PhaseConvention::Sum, PhaseConvention::Difference}) {
        const auto r = transition_amplitudes(pm, ps, conv);
        REQUIRE(std::abs(r.alpha_plus + r.alpha_minus - 1.0) <= 1e-15);
        REQUIRE(r.alpha_plus >= 0.0);
        REQUIRE(r.alpha_minus >= 0.0);
      }
    }
  }
}

TEST_CASE("transition frequencies") {
  StrainAmplitudes a{.m_z = -2e-3, .m_x = 3e-3, .m_y = 4e-3};
  const auto f = transition_frequencies(2.87, a);
  CHECK(f.nu_plus == doctest::Approx(2.873).epsilon(1e-15));
  CHECK(f.nu_minus == doctest::Approx(2.863).epsilon(1e-15));
}

TEST_CASE("grids") {
  const auto g = default_grid();
  REQUIRE(g.size() == 601);
  CHECK(g.front() == doctest::Approx(2.84));
  CHECK(g.back() == doctest::Approx(2.90));
  CHECK(g[300] == doctest::Approx(2.87).epsilon(1e-15));
  CHECK_THROWS_AS(linear_grid(1.0, 1.0, 10), InvalidArgument);
  CHECK_THROWS_AS(linear_grid(0.0, 1.0, 1), InvalidArgument);
}

TEST_CASE("synthesis examples") {
  const auto grid = default_grid();

  SUBCASE("zero strain gives one dip at d") {
    SpectrumModel m;
    m.gamma = 5e-3;
    m.a = 0.2 * m.gamma;
    const auto s = synthesize(m, grid);
    const auto i = argmin(s.pl);
    CHECK(grid[i] == doctest::Approx(2.87).epsilon(1e-15));
    CHECK(1.0 - s.pl[i] == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(local_minima(s.pl).size() == 1);
    const auto me = metrics(m);
    CHECK(me.degenerate);
    CHECK(me.shift == 0.0);
    CHECK(me.splitting == 0.0);
    CHECK(me.imbalance == 0.0);
  }

  SUBCASE("pure YZ shear splits symmetrically about d") {
    SpectrumModel m;
    m.amps = amps_of(scenario::shear_yz(1e-3));
    const auto f = transition_frequencies(m.d, m.amps);
    CHECK((f.nu_plus + f.nu_minus) / 2 == doctest::Approx(2.87).epsilon(1e-15));
    CHECK(f.nu_plus - f.nu_minus == doctest::Approx(19.66e-3).epsilon(1e-12));
    CHECK(*strain_phase(m.amps) == doctest::Approx(pi / 2));

    // phi_mw = 0: equal weights, mirror-symmetric pair.
    m.phi_mw = 0.0;
    CHECK(std::abs(metrics(m).imbalance) < 1e-12);
    const auto s = synthesize(m, grid);
    const auto mins = local_minima(s.pl);
    REQUIRE(mins.size() == 2);
    CHECK(std::abs(s.pl[mins[0]] - s.pl[mins[1]]) < 1e-12);

    // phi_mw = pi/4: 2 phi_mw + phi_str = pi, all weight on the lower line.
    m.phi_mw = pi / 4;
    CHECK(metrics(m).imbalance == doctest::Approx(-1.0).epsilon(1e-15));
    const auto w = model_amplitudes(m);
    CHECK(w.alpha_plus == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
  }

  SUBCASE("phi_mw 0 vs pi/2 keeps positions and swaps depths") {
    SpectrumModel m0;
    m0.amps = amps_of(scenario::shear_xy(2e-6, -1e-6, 1e-6)) * 1000.0;
    SpectrumModel m1 = m0;
    m1.phi_mw = pi / 2;
    const auto f = transition_frequencies(m0.d, m0.amps);
    const auto w0 = model_amplitudes(m0), w1 = model_amplitudes(m1);
    CHECK(w0.alpha_plus == doctest::Approx(w1.alpha_minus).epsilon(1e-14));
    CHECK(w0.alpha_minus == doctest::Approx(w1.alpha_plus).epsilon(1e-14));
    CHECK(metrics(m0).imbalance == doctest::Approx(-metrics(m1).imbalance).epsilon(1e-14));
    CHECK(metrics(m0).shift == metrics(m1).shift);
    CHECK(metrics(m0).splitting == metrics(m1).splitting);
    const std::vector<double> at{f.nu_minus, f.nu_plus};
    const auto s0 = synthesize(m0, at), s1 = synthesize(m1, at);
    // Depth at each line, dominated by its own Lorentzian.
    CHECK(((1 - s0.pl[1]) > (1 - s0.pl[0])) == (w0.alpha_plus > w0.alpha_minus));
    CHECK(((1 - s1.pl[1]) > (1 - s1.pl[0])) == (w1.alpha_plus > w1.alpha_minus));
  }
}

TEST_CASE("metrics identities") {
  SpectrumModel m;
  m.amps = {.m_z = -2e-3, .m_x = 3e-3, .m_y = 4e-3};
  auto me = metrics(m);
  CHECK(me.shift == -2e-3);
  CHECK(me.splitting == doctest::Approx(1e-2).epsilon(1e-15));
  CHECK_FALSE(me.degenerate);

  m.amps = {.m_z = 0.0, .m_x = 1e-3, .m_y = 0.0};
  m.phi_mw = 0.0;
  CHECK(metrics(m).imbalance == 1.0);

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1e-2, 1e-2), ph(-pi, pi), sc(1e-3, 1e3);
  for (int i = 0; i < 2000; ++i) {
    SpectrumModel r;
    r.amps = {.m_z = u(rng), .m_x = u(rng), .m_y = u(rng)};
    r.phi_mw = ph(rng);
    const auto f = transition_frequencies(r.d, r.amps);
    const auto mr = metrics(r);
    REQUIRE(mr.shift == r.amps.m_z);
    REQUIRE(mr.splitting == 2.0 * std::hypot(r.amps.m_x, r.amps.m_y));
    REQUIRE(std::abs((f.nu_plus + f.nu_minus) / 2 - r.d - mr.shift) < 1e-15);
    REQUIRE(std::abs(f.nu_plus - f.nu_minus - mr.splitting) < 1e-15);

    // Scale invariance of the rates.
    SpectrumModel s = r;
    const double k = sc(rng);
    s.amps.m_x *= k;
    s.amps.m_y *= k;
    const auto wr = model_amplitudes(r), ws = model_amplitudes(s);
    REQUIRE(std::abs(wr.alpha_plus - ws.alpha_plus) <= 1e-15);
    REQUIRE(std::abs(wr.alpha_minus - ws.alpha_minus) <= 1e-15);

    // phi_mw -> phi_mw + pi/2 flips the imbalance.
    SpectrumModel t = r;
    t.phi_mw += pi / 2;
    REQUIRE(std::abs(metrics(t).imbalance + mr.imbalance) < 1e-14);
  }
}

TEST_CASE("synthesis properties") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-5e-3, 5e-3), ph(-pi, pi), g(1e-3, 8e-3),
      depth(0.01, 0.9);
  for (int trial = 0; trial < 200; ++trial) {
    SpectrumModel m;
    m.amps = {.m_z = u(rng), .m_x = u(rng), .m_y = u(rng)};
    m.phi_mw = ph(rng);
    m.gamma = g(rng);
    m.a = depth(rng) * m.gamma;
    const auto grid = default_grid(m.d, 0.03, 601);
    const auto s = synthesize(m, grid);
    REQUIRE(s.size() == grid.size());
    for (double v : s.pl) {
      REQUIRE(v > m.baseline - m.a / m.gamma);
      REQUIRE(v <= m.baseline);
    }
  }

  SUBCASE("mirror symmetry with equal rates") {
    for (int trial = 0; trial < 50; ++trial) {
      SpectrumModel m;
      m.amps = {.m_z = u(rng), .m_x = u(rng), .m_y = u(rng)};
      const double phi_str = *strain_phase(m.amps);
      m.phi_mw = (pi / 2 - phi_str) / 2;  // cos(2 phi_mw + phi_str) = 0
      const auto w = model_amplitudes(m);
      REQUIRE(std::abs(w.alpha_plus - w.alpha_minus) < 1e-15);
      const double c = m.d + m.amps.m_z;
      std::vector<double> lo, hi;
      for (int k = 0; k <= 300; ++k) {
        lo.push_back(c - 1e-4 * k);
        hi.push_back(c + 1e-4 * k);
      }
      const auto sl = synthesize(m, std::vector<double>(lo.rbegin(), lo.rend()));
      const auto sh = synthesize(m, hi);
      for (int k = 0; k <= 300; ++k) REQUIRE(std::abs(sl.pl[300 - k] - sh.pl[k]) < 1e-12);
    }
  }
}

TEST_CASE("validation") {
  SpectrumModel m;
  m.gamma = 0.0;
  CHECK_THROWS_AS(m.validate(), InvalidArgument);
  m.gamma = 5e-3;
  m.a = -1.0;
  CHECK_THROWS_AS(m.validate(), InvalidArgument);
  m.a = 2.0 * m.gamma;  // depth 2 > baseline 1
  CHECK_THROWS_AS(m.validate(), InvalidArgument);
  m.a = 1e-3;
  m.amps.m_x = NAN;
  CHECK_THROWS_AS(m.validate(), InvalidArgument);
  const std::vector<double> grid{2.86, 2.87};
  CHECK_THROWS_AS(synthesize(m, grid), InvalidArgument);

  SpectrumSamples s{{1.0, 2.0, 2.0}, {1, 1, 1}, {}};
  CHECK_THROWS_AS(s.validate(), InvalidArgument);
  s = {{1.0, 2.0}, {1, 1, 1}, {}};
  CHECK_THROWS_AS(s.validate(), InvalidArgument);
  s = {{1.0, 2.0}, {1, 1}, {0.1, 0.0}};
  CHECK_THROWS_AS(s.validate(), InvalidArgument);
  s = {{1.0, 2.0}, {1, 1}, {0.1, 0.1}};
  CHECK_NOTHROW(s.validate());
}
