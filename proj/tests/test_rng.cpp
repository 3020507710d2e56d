#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "contdyn/error.hpp"
#include "contdyn/rng.hpp"

using namespace contdyn;

TEST_CASE("philox4x64-10 known-answer vectors") {
  auto z = philox4x64({0, 0, 0, 0}, {0, 0});
  CHECK(z[0] == 0x16554d9eca36314cULL);
  CHECK(z[1] == 0xdb20fe9d672d0fdcULL);
  CHECK(z[2] == 0xd7e772cee186176bULL);
  CHECK(z[3] == 0x7e68b68aec7ba23bULL);

  // numpy.random.Philox(counter=0, key=0) increments before its first block
  auto one = philox4x64({1, 0, 0, 0}, {0, 0});
  CHECK(one[0] == 0x02f4ba6408e4d89bULL);
  CHECK(one[1] == 0x3dd62b0b9ca8c5b2ULL);
  CHECK(one[2] == 0x1c8667a55d902e79ULL);
  CHECK(one[3] == 0x907d7a052fd5b4dcULL);

  auto keyed = philox4x64({6, 7, 0, 0}, {123, 456});
  CHECK(keyed[0] == 0x33f2650ab55cd3feULL);
  CHECK(keyed[1] == 0xc6698b2817a3e478ULL);
  CHECK(keyed[2] == 0x8dbfa34548f23c88ULL);
  CHECK(keyed[3] == 0xffc7debba821734aULL);
}

TEST_CASE("streams are reproducible and distinct") {
  RngStream a(42, 3), b(42, 3), c(42, 4), d(43, 3);
  std::vector<std::uint64_t> va, vb, vc, vd;
  for (int i = 0; i < 64; ++i) {
    va.push_back(a());
    vb.push_back(b());
    vc.push_back(c());
    vd.push_back(d());
  }
  CHECK(va == vb);
  CHECK(va != vc);
  CHECK(va != vd);
}

TEST_CASE("substreams form a reproducible tree") {
  RngStream root(5, 0);
  auto s1 = root.substream(1), s1b = root.substream(1), s2 = root.substream(2);
  CHECK(s1() == s1b());
  CHECK(s1.depth() == 1);
  std::set<std::uint64_t> firsts;
  for (std::uint64_t i = 0; i < 200; ++i) {
    auto s = root.substream(i);
    firsts.insert(s());
    firsts.insert(s.substream(0)());
  }
  CHECK(firsts.size() == 400);
  // consuming the parent does not change its children
  RngStream p(9, 9);
  auto c0 = p.substream(3)();
  for (int i = 0; i < 10; ++i) (void)p();
  CHECK(p.substream(3)() == c0);
  CHECK_THROWS_AS(root.substream(0).substream(0).substream(0).substream(0), InvalidArgument);
  (void)s2;
}

TEST_CASE("uniform doubles lie in the open unit interval with the right moments") {
  RngStream s(1, 1);
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = s.uniform();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
    sum += u;
    sq += u * u;
  }
  const double mean = sum / n, var = sq / n - mean * mean;
  CHECK(std::abs(mean - 0.5) < 3.0 * std::sqrt(1.0 / 12.0 / n));
  CHECK(std::abs(var - 1.0 / 12.0) < 0.002);
}

TEST_CASE("stream works as a std URBG") {
  RngStream s(77, 0);
  std::poisson_distribution<int> pois(4.0);
  double sum = 0.0;
  const int n = 50000;
  for (int i = 0; i < n; ++i) sum += pois(s);
  CHECK(std::abs(sum / n - 4.0) < 3.0 * std::sqrt(4.0 / n));
}

TEST_CASE("neighbouring streams are uncorrelated") {
  const int n = 20000;
  double sxy = 0.0, sx = 0.0, sy = 0.0;
  for (int i = 0; i < n; ++i) {
    RngStream a(3, static_cast<std::uint64_t>(i)), b(3, static_cast<std::uint64_t>(i) + 1);
    const double x = a.uniform() - 0.5, y = b.uniform() - 0.5;
    sxy += x * y;
    sx += x;
    sy += y;
  }
  const double cov = sxy / n - (sx / n) * (sy / n);
  CHECK(std::abs(cov) < 3.0 * (1.0 / 12.0) / std::sqrt(static_cast<double>(n)));
}
