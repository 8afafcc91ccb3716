#include <doctest.h>

#include <cmath>
#include <random>

#include "skyloss/geometry.hpp"
#include "support.hpp"

using namespace skyloss;
using doctest::Approx;

TEST_SUITE("geometry") {

TEST_CASE("vertical link") {
  const LinkGeometry g = link_geometry_from_positions({0, 0, 1000}, {0, 0, 3000});
  CHECK(g.l == 1000.0);
  CHECK(g.d == 2000.0);
  CHECK(g.d_h == 0.0);
  CHECK(g.d_v == 2000.0);
  CHECK(g.theta == 0.0);
}

TEST_CASE("horizontal 3-4-5 link") {
  const LinkGeometry g = link_geometry_from_positions({0, 0, 500}, {300, 400, 500});
  CHECK(g.l == 500.0);
  CHECK(g.d == Approx(500.0).epsilon(1e-12));
  CHECK(g.d_h == Approx(500.0).epsilon(1e-12));
  CHECK(g.d_v == 0.0);
  CHECK(g.theta == 90.0);
}

TEST_CASE("oblique link") {
  const LinkGeometry g = link_geometry_from_positions({0, 0, 100}, {0, 300, 500});
  CHECK(g.l == 100.0);
  CHECK(g.d_v == 400.0);
  CHECK(g.d_h == Approx(300.0).epsilon(1e-12));
  CHECK(g.d == Approx(500.0).epsilon(1e-12));
  CHECK(g.theta == Approx(std::atan(0.75) * 180.0 / M_PI).epsilon(1e-12));
  CHECK(g.theta == Approx(36.8699).epsilon(1e-6));
  CHECK(g.d * g.d == Approx(g.d_h * g.d_h + g.d_v * g.d_v).epsilon(1e-12));
}

TEST_CASE("coincident positions are degenerate") {
  CHECK_ERROR(link_geometry_from_positions({1, 2, 3}, {1, 2, 3}), ErrorKind::DegenerateGeometry);
}

TEST_CASE("below sea level is rejected") {
  CHECK(testing::error_kind([] { link_geometry_from_positions({0, 0, -1}, {0, 0, 10}); }).has_value());
}

TEST_CASE("decompose examples") {
  auto s = decompose(1000, 0);
  CHECK(s.d_h == 0.0);
  CHECK(s.d_v == 1000.0);
  s = decompose(1000, 90);
  CHECK(s.d_h == 1000.0);
  CHECK(s.d_v == 0.0);
  s = decompose(2000, 30);
  CHECK(s.d_h == Approx(1000.0).epsilon(1e-12));
  CHECK(s.d_v == Approx(1732.0508).epsilon(1e-8));
  CHECK(s.d_v == Approx(1000.0 * std::sqrt(3.0)).epsilon(1e-12));
}

TEST_CASE("decompose rejects zenith outside [0, 90]") {
  CHECK_ERROR(decompose(1000, -0.5), ErrorKind::Range);
  CHECK_ERROR(decompose(1000, 90.5), ErrorKind::Range);
}

TEST_CASE("swap symmetry is exact") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> xy(-5000, 5000), z(0, 20000);
  for (int i = 0; i < 2000; ++i) {
    const Position3D a{xy(rng), xy(rng), z(rng)}, b{xy(rng), xy(rng), z(rng)};
    const LinkGeometry g1 = link_geometry_from_positions(a, b), g2 = link_geometry_from_positions(b, a);
    REQUIRE(g1.l == g2.l);
    REQUIRE(g1.d == g2.d);
    REQUIRE(g1.d_h == g2.d_h);
    REQUIRE(g1.d_v == g2.d_v);
    REQUIRE(g1.theta == g2.theta);
  }
}

TEST_CASE("geometry invariants and round trip") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> dist(1, 50000), ang(0, 90), alt(0, 20000);
  for (int i = 0; i < 2000; ++i) {
    const double l = alt(rng), d = dist(rng), theta = ang(rng);
    const DistanceSplit s = decompose(d, theta);
    const LinkGeometry g = link_geometry_from_positions({0, 0, l}, {s.d_h, 0, l + s.d_v});
    REQUIRE(testing::rel_close(g.l, l, 1e-12));
    REQUIRE(testing::rel_close(g.d, d, 1e-12));
    REQUIRE(testing::rel_close(g.d_h, s.d_h, 1e-12));
    REQUIRE(std::abs(g.d_v - s.d_v) <= 1e-12 * d);
    REQUIRE(std::abs(g.theta - theta) <= 1e-9);
    REQUIRE(testing::rel_close(g.d * g.d, g.d_h * g.d_h + g.d_v * g.d_v, 1e-12));
    REQUIRE(testing::rel_close(g.d_h, g.d * sin_deg(g.theta), 1e-12));
    REQUIRE(std::abs(g.d_v - g.d * cos_deg(g.theta)) <= 1e-12 * g.d);
  }
}

TEST_CASE("projections are monotone in zenith angle") {
  const double d = 1234.5;
  double prev_h = decompose(d, 0.01).d_h, prev_v = decompose(d, 0.01).d_v;
  for (double t = 0.02; t < 90.0; t += 0.01) {
    const DistanceSplit s = decompose(d, t);
    REQUIRE(s.d_h > prev_h);
    REQUIRE(s.d_v < prev_v);
    prev_h = s.d_h;
    prev_v = s.d_v;
  }
}

TEST_CASE("free-space loss") {
  const double oracle = 20.0 * std::log10(4.0 * M_PI * 0.3e12 * 1000.0 / 299792458.0);
  CHECK(fspl_db(0.3, 1000.0) == Approx(oracle).epsilon(1e-14));
  CHECK(std::abs(fspl_db(0.3, 1000.0) - 141.99) <= 0.01);
  CHECK(fspl_db(0.3, 1000.0) - fspl_db(0.3, 500.0) == Approx(20.0 * std::log10(2.0)).epsilon(1e-12));
}

}  // TEST_SUITE
