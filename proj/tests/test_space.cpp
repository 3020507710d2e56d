#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "contdyn/error.hpp"
#include "contdyn/space.hpp"

using namespace contdyn;
using Catch::Approx;

TEST_CASE("ball volumes in low dimension") {
  CHECK(ball_volume(1, 2.0) == Approx(4.0).epsilon(1e-14));
  CHECK(ball_volume(2, 1.0) == Approx(std::numbers::pi).epsilon(1e-14));
  CHECK(ball_volume(3, 1.0) == Approx(4.0 * std::numbers::pi / 3.0).epsilon(1e-14));
  CHECK(ball_volume(4, 0.0) == 0.0);
  CHECK_THROWS_AS(ball_volume(2, -1.0), InvalidArgument);
}

TEST_CASE("distance in full space and on the torus") {
  auto plane = Domain::full_space(Box{{-10, -10}, {10, 10}});
  std::vector<double> o{0, 0}, p{3, 4};
  CHECK(plane.distance(o, p) == Approx(5.0));
  CHECK(distance(plane, p, p) == 0.0);

  auto ring = Domain::torus(1, 10.0);
  std::vector<double> a{1.0}, b{9.0};
  CHECK(ring.distance(a, b) == Approx(2.0));

  std::vector<double> bad{1.0, 2.0};
  CHECK_THROWS_AS(ring.distance(a, bad), InvalidArgument);
}

TEST_CASE("torus wrap maps into the fundamental cell") {
  auto t = Domain::torus(2, 5.0);
  std::vector<double> x{-0.5, 12.25};
  t.wrap(x);
  CHECK(x[0] == Approx(4.5));
  CHECK(x[1] == Approx(2.25));
  CHECK(t.contains(x));
}

TEST_CASE("doubling constants for flat domains") {
  auto r3 = doubling_constants(Domain::full_space(Box{{0, 0, 0}, {1, 1, 1}}));
  CHECK(r3.m == 3);
  CHECK(r3.C == 1.0);
  CHECK(std::isinf(r3.valid_radius));
  auto r1 = doubling_constants(Domain::full_space(Box{{0}, {1}}));
  CHECK(r1.m == 1);
  auto t = doubling_constants(Domain::torus(2, 8.0));
  CHECK(t.m == 2);
  CHECK(t.valid_radius == 4.0);
  CHECK(ball_volume(2, 3.0) == Approx(9.0 * ball_volume(2, 1.0)).epsilon(1e-14));
}

TEST_CASE("volume doubling holds for sampled radii and dilations") {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> ur(1e-6, 10.0), ub(1.0, 10.0);
  for (std::size_t d = 1; d <= 4; ++d) {
    std::vector<double> lo(d, 0.0), hi(d, 1.0);
    auto dd = doubling_constants(Domain::full_space(Box{lo, hi}));
    for (int i = 0; i < 500; ++i) {
      const double r = ur(gen), beta = ub(gen);
      const double lhs = ball_volume(d, beta * r);
      const double rhs = dd.C * std::pow(beta, dd.m) * ball_volume(d, r);
      CHECK(lhs <= rhs * (1.0 + 1e-12));
    }
  }
}

TEST_CASE("distance is a metric on random triples") {
  std::mt19937_64 gen(11);
  auto check_domain = [&](const Domain& dom, double lo, double hi) {
    std::uniform_real_distribution<double> u(lo, hi);
    const std::size_t d = dom.dim();
    for (int i = 0; i < 1000; ++i) {
      std::vector<double> x(d), y(d), z(d);
      for (std::size_t k = 0; k < d; ++k) {
        x[k] = u(gen);
        y[k] = u(gen);
        z[k] = u(gen);
      }
      const double dxy = dom.distance(x, y), dyx = dom.distance(y, x);
      CHECK(std::abs(dxy - dyx) <= 1e-12);
      CHECK(dom.distance(x, x) == 0.0);
      CHECK(dxy > 0.0);
      CHECK(dom.distance(x, z) <= dxy + dom.distance(y, z) + 1e-12);
    }
  };
  check_domain(Domain::full_space(Box{{-5, -5, -5}, {5, 5, 5}}), -5, 5);
  check_domain(Domain::torus(2, 3.0), 0.0, 3.0);
  check_domain(Domain::torus(1, 1.0), 0.0, 1.0);
}

TEST_CASE("domain construction rejects degenerate input") {
  CHECK_THROWS_AS(Domain::full_space(Box{{0}, {0}}), InvalidArgument);
  CHECK_THROWS_AS(Domain::torus(0, 1.0), InvalidArgument);
  CHECK_THROWS_AS(Domain::torus(1, -2.0), InvalidArgument);
}
