#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "contdyn/error.hpp"
#include "contdyn/pointproc.hpp"
#include "stat_helpers.hpp"

using namespace contdyn;
using testutil::within_sigma;

namespace {

DomainPtr line(double lo, double hi) { return make_domain(Domain::full_space(Box{{lo}, {hi}})); }

double laplace_value(const Configuration& c, const std::function<double(std::span<const double>)>& phi) {
  double s = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) s += std::log1p(phi(c.point(i)));
  return std::exp(s);
}

}  // namespace

TEST_CASE("configurations are simple and contained") {
  auto dom = line(0, 10);
  CHECK_NOTHROW(Configuration(dom, {1.0, 2.0, 3.0}));
  CHECK_THROWS_AS(Configuration(dom, {1.0, 1.0}), InvalidArgument);
  CHECK_THROWS_AS(Configuration(dom, {11.0}), InvalidArgument);
  CHECK_THROWS_AS(Configuration(dom, {std::nan("")}), InvalidArgument);
  Configuration a(dom, {1.0}), b(dom, {2.0});
  CHECK(a.merged(b).size() == 2);
  CHECK_THROWS_AS(a.merged(a), InvalidArgument);
}

TEST_CASE("count_in_ball examples") {
  auto plane = make_domain(Domain::full_space(Box{{-1, -1}, {1, 1}}));
  CHECK(count_in_ball(Configuration(plane), std::vector<double>{0, 0}, 1.0) == 0);
  CHECK(count_in_ball(Configuration(plane, {0.0, 0.0}), std::vector<double>{0, 0}, 1.0) == 1);
  std::vector<double> grid;
  for (int i = 0; i <= 10; ++i) grid.push_back(i);
  Configuration g(line(0, 10), grid);
  CHECK(count_in_ball(g, std::vector<double>{5.0}, 2.5) == 5);
}

TEST_CASE("grid index agrees with a linear scan") {
  RngStream rng(21, 0);
  for (bool torus : {false, true}) {
    auto dom = torus ? make_domain(Domain::torus(2, 10.0))
                     : make_domain(Domain::full_space(Box{{0, 0}, {10, 10}}));
    auto c = sample_poisson(dom, Intensity::constant(3.0), rng);
    GridIndex idx(c, 1.0);
    for (int q = 0; q < 200; ++q) {
      std::vector<double> centre{10.0 * rng.uniform(), 10.0 * rng.uniform()};
      const double r = 4.0 * rng.uniform();
      REQUIRE(idx.count_in_ball(centre, r) == count_in_ball(c, centre, r));
    }
  }
}

TEST_CASE("Poisson sampler: mean count and empty intensity") {
  auto dom = line(0, 5);
  RngStream root(1, 0);
  std::vector<double> counts;
  for (std::uint64_t i = 0; i < 20000; ++i) {
    RngStream s = root.substream(i);
    counts.push_back(static_cast<double>(sample_poisson(dom, Intensity::constant(2.0), s).size()));
  }
  auto st = testutil::stats(counts);
  CHECK(within_sigma(st.mean, st.std_error, 10.0));
  CHECK(st.stddev * st.stddev == Catch::Approx(10.0).epsilon(0.05));
  RngStream s(2, 0);
  CHECK(sample_poisson(dom, Intensity::constant(0.0), s).empty());
  CHECK_THROWS_AS(sample_poisson(dom, Intensity::constant(std::nan("")), s), InvalidArgument);
}

TEST_CASE("Poisson Laplace functional and superposition") {
  auto dom = line(-1, 3);
  auto phi = [](std::span<const double> x) { return (x[0] >= 0 && x[0] <= 1) ? -0.5 : 0.0; };
  // E exp<log(1+phi), gamma> = exp(z int phi)
  const double z = 2.0;
  RngStream root(3, 0);
  std::vector<double> single, sup;
  for (std::uint64_t i = 0; i < 20000; ++i) {
    RngStream s = root.substream(i);
    auto c1 = sample_poisson(dom, Intensity::constant(z), s);
    single.push_back(laplace_value(c1, phi));
    auto c2 = sample_poisson(dom, Intensity::constant(1.5), s);
    sup.push_back(laplace_value(c1.merged(c2), phi));
  }
  auto a = testutil::stats(single), b = testutil::stats(sup);
  CHECK(within_sigma(a.mean, a.std_error, std::exp(-0.5 * z)));
  CHECK(within_sigma(b.mean, b.std_error, std::exp(-0.5 * (z + 1.5))));
}

TEST_CASE("Poisson counts in disjoint boxes are uncorrelated") {
  auto dom = line(0, 4);
  RngStream root(4, 0);
  std::vector<double> prod;
  double s1 = 0, s2 = 0;
  const int n = 20000;
  std::vector<double> n1(n), n2(n);
  for (int i = 0; i < n; ++i) {
    RngStream s = root.substream(static_cast<std::uint64_t>(i));
    auto c = sample_poisson(dom, Intensity::constant(1.0), s);
    for (std::size_t k = 0; k < c.size(); ++k) (c.point(k)[0] < 2.0 ? n1[i] : n2[i]) += 1.0;
    s1 += n1[i];
    s2 += n2[i];
  }
  const double m1 = s1 / n, m2 = s2 / n;
  for (int i = 0; i < n; ++i) prod.push_back((n1[i] - m1) * (n2[i] - m2));
  auto st = testutil::stats(prod);
  CHECK(within_sigma(st.mean, st.std_error, 0.0));
}

TEST_CASE("inhomogeneous intensity is respected") {
  auto dom = line(0, 2);
  auto inten = Intensity::box_indicator(4.0, Box{{0.0}, {1.0}});
  RngStream root(5, 0);
  std::vector<double> left, right;
  for (std::uint64_t i = 0; i < 5000; ++i) {
    RngStream s = root.substream(i);
    auto c = sample_poisson(dom, inten, s);
    double l = 0, r = 0;
    for (std::size_t k = 0; k < c.size(); ++k) (c.point(k)[0] <= 1.0 ? l : r) += 1;
    left.push_back(l);
    right.push_back(r);
  }
  auto L = testutil::stats(left);
  CHECK(within_sigma(L.mean, L.std_error, 4.0));
  CHECK(testutil::stats(right).mean == 0.0);
}

TEST_CASE("space-time Poisson process") {
  Box w{{0.0}, {5.0}};
  RngStream root(6, 0);
  std::vector<double> counts;
  std::vector<double> hist(5, 0.0);
  const int n = 10000;
  for (int i = 0; i < n; ++i) {
    RngStream s = root.substream(static_cast<std::uint64_t>(i));
    auto pts = sample_poisson_space_time(w, RateFunction::constant(1.0), 2.0, 3.0, s);
    counts.push_back(static_cast<double>(pts.size()));
    for (std::size_t k = 0; k < pts.size(); ++k) {
      REQUIRE(pts[k].t >= 0.0);
      REQUIRE(pts[k].t <= 3.0);
      if (k > 0) REQUIRE(pts[k].t >= pts[k - 1].t);
      hist[static_cast<std::size_t>(std::min(4.0, std::floor(pts[k].x[0])))] += 1.0;
    }
  }
  auto st = testutil::stats(counts);
  CHECK(within_sigma(st.mean, st.std_error, 30.0));
  // each unit bin has Poisson(T a z) = Poisson(6) counts per replica
  for (double h : hist) CHECK(std::abs(h / n - 6.0) <= 3.0 * std::sqrt(6.0 / n));
  RngStream s(7, 0);
  CHECK(sample_poisson_space_time(w, RateFunction::constant(1.0), 2.0, 0.0, s).empty());
}

TEST_CASE("theta check examples") {
  auto empty = theta_check(Configuration(line(-5, 5)), 1.0, 5);
  CHECK(empty.K_min == 1);
  CHECK(empty.member);
  CHECK(empty.window_truncated);

  const int r_max = 8;
  std::vector<double> unit;
  for (int k = 0; k < r_max; ++k) {
    unit.push_back(k + 0.5);
    unit.push_back(-(k + 0.5));
  }
  auto u = theta_check(Configuration(line(-r_max, r_max), unit), 1.0, r_max);
  CHECK(u.K_min == 1);
  for (int r = 1; r <= r_max; ++r) CHECK(u.counts[r - 1] == static_cast<std::size_t>(2 * r));

  std::vector<double> crowd;
  for (int k = 0; k < 100; ++k) crowd.push_back(-0.99 + 1.98 * k / 99.0);
  auto c = theta_check(Configuration(line(-3, 3), crowd), 1.0, 3);
  CHECK(c.K_min == 50);
  CHECK_THROWS_AS(theta_check(Configuration(line(-3, 3), crowd), 0.5, 3), InvalidArgument);
}

TEST_CASE("theta check is monotone in alpha") {
  RngStream root(8, 0);
  auto dom = make_domain(Domain::full_space(Box{{-6, -6}, {6, 6}}));
  for (std::uint64_t i = 0; i < 50; ++i) {
    RngStream s = root.substream(i);
    auto c = sample_poisson(dom, Intensity::constant(0.5 + 3.0 * s.uniform()), s);
    std::uint64_t prev = theta_check(c, 1.0, 6).K_min;
    for (double a : {1.2, 1.5, 2.0, 3.0}) {
      const std::uint64_t k = theta_check(c, a, 6).K_min;
      CHECK(k <= prev);
      prev = k;
    }
  }
}
