#include <doctest.h>

#include <cmath>
#include <random>

#include "skyloss/atmosphere.hpp"
#include "skyloss/geometry.hpp"
#include "support.hpp"

using namespace skyloss;
using doctest::Approx;

namespace {

AbsorptionProfile constant_continuum(double kappa, double h) {
  return AbsorptionProfile::continuum({{{kappa}, h}}, 0.1, 1.0);
}

AbsorptionProfile random_profile(std::mt19937_64& rng, bool lines) {
  std::uniform_real_distribution<double> amp(0.0, 2.0), height(0.5, 8.0), center(0.1, 1.0), width(0.001, 0.01),
      strength(0.0, 50.0);
  std::vector<ContinuumTerm> terms;
  const int n_terms = 1 + static_cast<int>(rng() % 3);
  for (int j = 0; j < n_terms; ++j) terms.push_back({{amp(rng), amp(rng), amp(rng)}, height(rng)});
  if (!lines) return AbsorptionProfile::continuum(std::move(terms), 0.1, 1.0);
  std::vector<AbsorptionLine> ls;
  const int n_lines = 1 + static_cast<int>(rng() % 4);
  for (int j = 0; j < n_lines; ++j) ls.push_back({center(rng), strength(rng), width(rng), height(rng)});
  return AbsorptionProfile::with_lines(std::move(terms), std::move(ls), 0.1, 1.0);
}

}  // namespace

TEST_SUITE("atmosphere") {

TEST_CASE("absorption coefficient examples") {
  const auto empty = AbsorptionProfile::continuum({}, 0.1, 1.0);
  CHECK(absorption_coefficient(empty, 0.0, 0.3) == 0.0);
  CHECK(absorption_coefficient(empty, 7.5, 0.9) == 0.0);

  const auto two = constant_continuum(2.0, 2.0);
  CHECK(absorption_coefficient(two, 2.0, 0.5) == Approx(2.0 * std::exp(-1.0)).epsilon(1e-15));
  CHECK(absorption_coefficient(two, 2.0, 0.5) == Approx(0.735759).epsilon(1e-6));

  const auto line = AbsorptionProfile::with_lines({}, {{0.4, 7.0, 0.003, 2.0}}, 0.1, 1.0);
  CHECK(absorption_coefficient(line, 0.0, 0.4) == Approx(7.0).epsilon(1e-15));
}

TEST_CASE("absorption coefficient errors") {
  const auto exact = AbsorptionProfile::model_exact(-0.4, -0.5, {-1.0}, {-1.0}, 0.3, 0.4);
  CHECK_ERROR(absorption_coefficient(exact, 0.0, 0.35), ErrorKind::UnsupportedOperation);
  const auto narrow = AbsorptionProfile::continuum({{{1.0}, 2.0}}, 0.3, 0.4);
  CHECK_ERROR(absorption_coefficient(narrow, 0.0, 0.5), ErrorKind::Range);
}

TEST_CASE("profile validation rejects negative absorption and bad heights") {
  CHECK_ERROR(AbsorptionProfile::continuum({{{1.0, -3.0}, 2.0}}, 0.1, 1.0), ErrorKind::Range);
  CHECK_ERROR(AbsorptionProfile::continuum({{{1.0}, 0.0}}, 0.1, 1.0), ErrorKind::Range);
  CHECK_ERROR(AbsorptionProfile::with_lines({}, {{0.4, 1.0, 0.003, -1.0}}, 0.1, 1.0), ErrorKind::Range);
}

TEST_CASE("transmittance examples") {
  const auto empty = AbsorptionProfile::continuum({}, 0.1, 1.0);
  CHECK(transmittance_along_path(empty, 3.0, 2.0, 40.0, 0.5) == 1.0);

  const auto half = constant_continuum(0.5, 2.0);
  const double horizontal = transmittance_along_path(half, 0.0, 1.0, 90.0, 0.3);
  CHECK(horizontal == Approx(std::exp(-0.5)).epsilon(1e-15));
  CHECK(horizontal == Approx(0.606531).epsilon(1e-6));
  CHECK(transmittance_quadrature(half, 0.0, 1.0, 90.0, 0.3, 1e-10) == Approx(horizontal).epsilon(1e-12));

  const double vertical = transmittance_along_path(half, 0.0, 1.0, 0.0, 0.3);
  CHECK(vertical == Approx(std::exp(-0.5 * 2.0 * (1.0 - std::exp(-0.5)))).epsilon(1e-15));
  CHECK(0.5 * 2.0 * (1.0 - std::exp(-0.5)) == Approx(0.393469).epsilon(1e-6));
  CHECK(transmittance_quadrature(half, 0.0, 1.0, 0.0, 0.3, 1e-10) == Approx(vertical).epsilon(1e-12));
}

TEST_CASE("transmittance range errors") {
  const auto half = constant_continuum(0.5, 2.0);
  CHECK_ERROR(transmittance_along_path(half, -0.1, 1.0, 0.0, 0.3), ErrorKind::Range);
  CHECK_ERROR(transmittance_along_path(half, 0.0, 0.0, 0.0, 0.3), ErrorKind::Range);
  CHECK_ERROR(transmittance_along_path(half, 0.0, 1.0, 91.0, 0.3), ErrorKind::Range);
}

TEST_CASE("quadrature examples and errors") {
  const auto empty = AbsorptionProfile::continuum({}, 0.1, 1.0);
  CHECK(transmittance_quadrature(empty, 1.0, 2.0, 30.0, 0.5, 1e-10) == 1.0);
  const auto half = constant_continuum(0.5, 2.0);
  CHECK_ERROR(transmittance_quadrature(half, 0.0, 1.0, 0.0, 0.3, 0.0), ErrorKind::Range);
  CHECK_ERROR(transmittance_quadrature(half, 0.0, 1.0, 0.0, 0.3, 1e-3), ErrorKind::Range);
}

TEST_CASE("quadrature near a line center") {
  const auto p = AbsorptionProfile::with_lines({{{0.2, 0.5}, 2.1}}, {{0.38, 90.0, 0.0031, 1.7}}, 0.1, 1.0);
  for (double f : {0.38, 0.3805, 0.379, 0.383}) {
    for (double theta : {0.0, 27.0, 63.0, 90.0}) {
      const double closed = transmittance_along_path(p, 0.2, 3.0, theta, f);
      const double quad = transmittance_quadrature(p, 0.2, 3.0, theta, f, 1e-10);
      CHECK(std::abs(quad - closed) <= 1e-8 * closed);
    }
  }
}

TEST_CASE("closed form agrees with quadrature on random profiles") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> alt(0.0, 20.0), len(0.01, 30.0), ang(0.0, 90.0), freq(0.1, 1.0);
  for (int i = 0; i < 300; ++i) {
    const auto p = random_profile(rng, i % 2 == 1);
    const double l = alt(rng), d = len(rng), t = i % 10 == 0 ? 90.0 : ang(rng), f = freq(rng);
    const double closed = optical_depth(p, l, d, t, f);
    const double quad = optical_depth_quadrature(p, l, d, t, f, 1e-10);
    REQUIRE(std::abs(quad - closed) <= 1e-10 * std::abs(closed));
  }
}

TEST_CASE("Beer-Lambert multiplicativity") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> alt(0.0, 10.0), len(0.1, 20.0), ang(0.0, 90.0), freq(0.1, 1.0), frac(0.01, 0.99);
  for (int i = 0; i < 500; ++i) {
    const auto p = random_profile(rng, i % 2 == 0);
    const double l = alt(rng), d = len(rng), t = ang(rng), f = freq(rng), s = d * frac(rng);
    const double whole = transmittance_along_path(p, l, d, t, f);
    const double first = transmittance_along_path(p, l, s, t, f);
    const double second = transmittance_along_path(p, l + s * cos_deg(t), d - s, t, f);
    REQUIRE(testing::rel_close(whole, first * second, 1e-12));
  }
}

TEST_CASE("monotonicity in distance, altitude and zenith angle") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> ang(0.0, 90.0), freq(0.1, 1.0);
  for (int i = 0; i < 50; ++i) {
    const auto p = random_profile(rng, i % 2 == 0);
    const auto c = random_profile(rng, false);
    const double t = ang(rng), f = freq(rng);
    for (double d = 0.5; d < 10.0; d += 0.5)
      REQUIRE(transmittance_along_path(p, 1.0, d + 0.5, t, f) <= transmittance_along_path(p, 1.0, d, t, f));
    for (double l = 0.0; l < 10.0; l += 0.5)
      REQUIRE(transmittance_along_path(p, l + 0.5, 2.0, t, f) >= transmittance_along_path(p, l, 2.0, t, f));
    for (double th = 0.0; th < 90.0; th += 4.5)
      REQUIRE(transmittance_along_path(c, 1.0, 2.0, th + 4.5, f) <= transmittance_along_path(c, 1.0, 2.0, th, f));
  }
}

TEST_CASE("grid generation") {
  SUBCASE("Dr2Dr x D-G shape") {
    const ScenarioSpec s = builtin_scenario("Dr2Dr");
    const SubBand b = builtin_band("D-G");
    CHECK(s.altitudes.size() * s.distances.size() * s.thetas.size() * b.sample_count() == 51u * 10 * 21 * 601);
    const ScenarioSpec small{"custom", {0.0, 0.1}, {0.01, 0.02}, {0.0, 45.0, 90.0}};
    const TransmittanceGrid g = generate_grid(standard_profile(), small, b);
    CHECK(g.n_f() == 601);
    CHECK(g.values.size() == 2u * 2 * 3 * 601);
  }
  SUBCASE("empty continuum gives unit transmittance") {
    const auto empty = AbsorptionProfile::continuum({}, 0.1, 1.0);
    const TransmittanceGrid g = generate_grid(empty, builtin_scenario("Dr2Dr"), builtin_band("Y0"));
    for (double v : g.values) REQUIRE(v == 1.0);
  }
  SUBCASE("model-exact cells equal the closed form") {
    const auto p = AbsorptionProfile::model_exact(-0.4, -0.55, {-1.0, 0.3, -0.2}, {-0.7, -0.1}, 0.327, 0.368);
    const ScenarioSpec s{"custom", {0.0, 0.3, 1.0}, {0.05, 0.1}, {0.0, 30.0, 90.0}};
    const TransmittanceGrid g = generate_grid(p, s, builtin_band("Y0"));
    const FrequencyMap map = FrequencyMap::for_band(0.327, 0.368);
    for (std::size_t il = 0; il < g.n_l(); ++il)
      for (std::size_t id = 0; id < g.n_d(); ++id)
        for (std::size_t it = 0; it < g.n_theta(); ++it)
          for (std::size_t jf = 0; jf < g.n_f(); ++jf) {
            const double l = s.altitudes[il], d = s.distances[id], th = s.thetas[it], f = g.frequencies[jf];
            const double u = map(f);
            const double lh = -1.0 + 0.3 * u - 0.2 * u * u, lv = -0.7 - 0.1 * u;
            const double expect = std::exp(lh * std::exp(-0.4 * l) * d * std::sin(th * M_PI / 180) +
                                           lv * std::exp(-0.55 * l) * d * std::cos(th * M_PI / 180));
            REQUIRE(testing::rel_close(g.at(il, id, it, jf), expect, 1e-13));
          }
  }
  SUBCASE("worker count does not change the grid") {
    const ScenarioSpec s{"custom", {0.0, 1.0, 2.0}, {0.5, 1.0, 5.0}, {0.0, 45.0, 90.0}};
    const auto a = generate_grid(standard_profile(), s, builtin_band("WR1"), 1);
    const auto b = generate_grid(standard_profile(), s, builtin_band("WR1"), 8);
    CHECK(a.values == b.values);
  }
  SUBCASE("profile must cover the band") {
    const auto narrow = AbsorptionProfile::continuum({{{1.0}, 2.0}}, 0.3, 0.4);
    CHECK_ERROR(generate_grid(narrow, builtin_scenario("Dr2Dr"), builtin_band("THz2")), ErrorKind::Range);
  }
}

TEST_CASE("profile files") {
  const AbsorptionProfile builtin = standard_profile();
  const AbsorptionProfile shipped = load_profile(std::string(SKYLOSS_DATA_DIR) + "/standard.prof");
  CHECK(shipped == builtin);
  CHECK(parse_profile(dump_profile(builtin)) == builtin);
  const auto exact = AbsorptionProfile::model_exact(-0.4, -0.55, {-1.0, 0.25}, {-0.5}, 0.3, 0.4);
  CHECK(parse_profile(dump_profile(exact)) == exact);
  CHECK_ERROR(parse_profile("format: 2\nmode: continuum\nband: [0.1, 1.0]\n"), ErrorKind::Schema);
  CHECK_ERROR(parse_profile("format: 1\nmode: sparkle\nband: [0.1, 1.0]\n"), ErrorKind::Schema);
}

}  // TEST_SUITE
