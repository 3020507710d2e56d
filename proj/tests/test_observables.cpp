#include <catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

#include "contdyn/error.hpp"
#include "contdyn/observables.hpp"
#include "stat_helpers.hpp"

using namespace contdyn;
using Catch::Approx;
using testutil::within_sigma;

namespace {

double Phi(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

EvolutionPlan plan_for(const Domain& dom, std::vector<double> times) {
  EvolutionPlan p;
  p.times = std::move(times);
  p.boundary = default_boundary(dom);
  return p;
}

// Set partitions of {0..n-1} by brute-force recursion.
void partitions(std::size_t n, std::size_t i, std::vector<std::size_t>& blocks,
                const std::function<void(const std::vector<std::size_t>&)>& visit) {
  if (i == n) {
    visit(blocks);
    return;
  }
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    blocks[b] |= std::size_t(1) << i;
    partitions(n, i + 1, blocks, visit);
    blocks[b] &= ~(std::size_t(1) << i);
  }
  blocks.push_back(std::size_t(1) << i);
  partitions(n, i + 1, blocks, visit);
  blocks.pop_back();
}

double midpoint(const std::function<double(double)>& f, double a, double b, std::size_t n) {
  const double h = (b - a) / double(n);
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += f(a + h * (double(i) + 0.5));
  return s * h;
}

double trapezoid(const std::function<double(double)>& f, double a, double b, std::size_t n) {
  const double h = (b - a) / double(n);
  double s = 0.5 * (f(a) + f(b));
  for (std::size_t i = 1; i < n; ++i) s += f(a + h * double(i));
  return s * h;
}

}  // namespace

TEST_CASE("pairing") {
  auto dom = make_domain(Domain::full_space(Box{{0.0}, {10.0}}));
  const TestFunction half = TestFunction::box_indicator(0.5, Box{{0.0}, {10.0}});
  CHECK(pairing(half, Configuration(dom)) == 0.0);
  const Configuration four(dom, {1.0, 2.0, 3.0, 4.0});
  CHECK(pairing(half, four) == Approx(-2.0));
  const Configuration a(dom, {1.0, 2.5}), b(dom, {7.0, 8.0});
  const TestFunction bump = TestFunction::bump(0.7, {2.0}, 1.5);
  CHECK(pairing(bump, a.merged(b)) == Approx(pairing(bump, a) + pairing(bump, b)));
}

TEST_CASE("empirical Laplace functional") {
  auto dom = make_domain(Domain::full_space(Box{{0.0}, {10.0}}));
  const std::vector<TestFunction> zero = {TestFunction::zero(1)};
  std::vector<std::vector<Configuration>> samples;
  RngStream root(1, 0);
  for (std::uint64_t r = 0; r < 50; ++r) {
    RngStream s = root.substream(r);
    samples.push_back({sample_poisson(dom, Intensity::constant(1.0), s)});
  }
  const auto e0 = empirical_laplace(samples, zero);
  CHECK(e0.mean == 1.0);
  CHECK(e0.std_error == 0.0);

  const TestFunction phi = TestFunction::box_indicator(0.3, Box{{2.0}, {5.0}});
  const Configuration c(dom, {1.0, 2.5, 3.0, 4.9});
  const auto single = empirical_laplace({{c}}, std::vector<TestFunction>{phi});
  CHECK(single.mean == Approx(0.7 * 0.7 * 0.7).epsilon(1e-14));

  const double z = 1.5;
  std::vector<double> v(20000);
  for (std::size_t r = 0; r < v.size(); ++r) {
    RngStream s = root.substream(1000 + r);
    v[r] = laplace_factor(phi, sample_poisson(dom, Intensity::constant(z), s).coords(), 1);
  }
  const auto est = laplace_estimate(v);
  CHECK(within_sigma(est.mean, est.std_error, std::exp(z * -0.3 * 3.0)));
  CHECK_THROWS_AS(TestFunction::custom([](std::span<const double>) { return -1.0; },
                                       Box{{0.0}, {1.0}}, -1.0, 0.0),
                  InvalidArgument);
  CHECK_THROWS_AS(empirical_laplace(samples, std::vector<TestFunction>{phi, phi}), InvalidArgument);
}

TEST_CASE("Laplace factors lie in (0, 1]") {
  RngStream rng(2, 0);
  auto dom = make_domain(Domain::full_space(Box{{0.0, 0.0}, {5.0, 5.0}}));
  for (int r = 0; r < 200; ++r) {
    const double depth = 0.999 * rng.uniform();
    const TestFunction phi = r % 2 ? TestFunction::bump(depth, {2.5, 2.5}, 2.0)
                                   : TestFunction::box_indicator(depth, Box{{1.0, 1.0}, {4.0, 3.0}});
    const Configuration c = sample_poisson(dom, Intensity::constant(5.0 * rng.uniform()), rng);
    const double f = laplace_factor(phi, c.coords(), 2);
    REQUIRE(f > 0.0);
    REQUIRE(f <= 1.0);
  }
}

TEST_CASE("analytic Markov Laplace functional") {
  auto line = make_domain(Domain::full_space(Box{{-20.0}, {20.0}}));
  const TestFunction phi = TestFunction::box_indicator(0.5, Box{{-1.0}, {1.0}});
  const Configuration origin(line, {0.0});
  const KernelSpec b = KernelSpec::brownian();
  CHECK(analytic_laplace_markov(b, origin, phi, 1.0) ==
        Approx(1.0 - 0.5 * (2.0 * Phi(1.0) - 1.0)).epsilon(1e-9));
  CHECK(analytic_laplace_markov(b, origin, phi, 1.0) == Approx(0.65866).margin(1e-5));
  const Configuration c(line, {-0.5, 0.2, 3.0});
  CHECK(analytic_laplace_markov(b, c, phi, 0.0) == Approx(0.25));
  CHECK(analytic_laplace_markov(b, Configuration(line), phi, 1.0) == 1.0);
  CHECK_THROWS_AS(analytic_laplace_markov(KernelSpec::death(RateFunction::constant(1.0)), c, phi, 1.0),
                  InvalidArgument);
}

TEST_CASE("analytic sub-Markov Laplace functional") {
  auto line = make_domain(Domain::full_space(Box{{-20.0}, {20.0}}));
  const KernelSpec death = KernelSpec::death(RateFunction::constant(1.0));
  const TestFunction phi = TestFunction::box_indicator(0.5, Box{{-1.0}, {1.0}});
  const Configuration c(line, {0.0, 0.5, 4.0});
  CHECK(analytic_laplace_submarkov(death, c, phi, 0.0, 2.0) == Approx(0.25));
  CHECK(analytic_laplace_submarkov(death, Configuration(line), phi, 40.0, 3.0) ==
        Approx(std::exp(-3.0)).epsilon(1e-12));
  const double z = 0.8;
  const double expect = (1.0 - 0.25) * std::exp(z * (-1.0 - -0.5));
  CHECK(analytic_laplace_submarkov(death, Configuration(line, {0.0}), phi, std::log(2.0), z) ==
        Approx(expect).epsilon(1e-10));
}

TEST_CASE("Glauber joint Laplace closed form") {
  auto line = make_domain(Domain::full_space(Box{{0.0}, {10.0}}));
  const TestFunction p1 = TestFunction::box_indicator(0.4, Box{{2.0}, {5.0}});
  const TestFunction p2 = TestFunction::box_indicator(0.3, Box{{4.0}, {8.0}});
  const Configuration cfg(line, {1.0, 3.0, 4.5, 6.0});
  const double a = 0.7, z = 1.3;

  SECTION("one time, fixed start") {
    const double t = 0.9;
    double prod = 1.0;
    for (double x : {1.0, 3.0, 4.5, 6.0})
      prod *= 1.0 + std::exp(-a * t) * p1(std::vector<double>{x});
    const double expect = std::exp(z * (1.0 - std::exp(-a * t)) * (-0.4 * 3.0)) * prod;
    const std::vector<double> times = {t};
    CHECK(glauber_joint_laplace(cfg, a, z, times, std::vector<TestFunction>{p1}, *line) ==
          Approx(expect).epsilon(1e-12));
  }

  SECTION("Poisson start with matching activity is stationary") {
    for (double t : {0.1, 1.0, 5.0}) {
      const std::vector<double> times = {t};
      CHECK(glauber_joint_laplace(PoissonStart{z}, a, z, times, std::vector<TestFunction>{p1},
                                  *line) == Approx(std::exp(z * -1.2)).epsilon(1e-12));
    }
  }

  SECTION("zero test functions give one") {
    const std::vector<double> times = {0.5, 1.0, 2.0};
    const std::vector<TestFunction> zeros(3, TestFunction::zero(1));
    CHECK(glauber_joint_laplace(cfg, a, z, times, zeros, *line) == 1.0);
    CHECK(glauber_joint_laplace(ClusterStart{1.0, 0.5, 0.3}, a, z, times, zeros, *line) == 1.0);
  }

  SECTION("two times against a birth-time integral") {
    const double t1 = 0.5, t2 = 1.2;
    const double l1 = 3.0, l2 = 4.0, l12 = 1.0;
    const double c1 = -0.4, c2 = -0.3;
    auto fixed_factor = [&](double f1, double f2) {
      const double s2 = std::exp(-a * t2), s1 = std::exp(-a * t1);
      return s2 * (1 + f1) * (1 + f2) + (s1 - s2) * (1 + f1) + (1 - s1);
    };
    double logv = 0.0;
    for (double x : {1.0, 3.0, 4.5, 6.0}) {
      const std::vector<double> xv = {x};
      logv += std::log(fixed_factor(p1(xv), p2(xv)));
    }
    // Immigrant born at s: the expected factor minus one, integrated over x.
    auto immigrant = [&](double s) {
      if (s < t1) {
        const double e2 = std::exp(-a * (t2 - s)), e1 = std::exp(-a * (t1 - s));
        return e2 * (c1 * l1 + c2 * l2 + c1 * c2 * l12) + (e1 - e2) * c1 * l1;
      }
      return std::exp(-a * (t2 - s)) * c2 * l2;
    };
    logv += a * z * (midpoint(immigrant, 0.0, t1, 20000) + midpoint(immigrant, t1, t2, 20000));
    const std::vector<double> times = {t1, t2};
    CHECK(glauber_joint_laplace(cfg, a, z, times, std::vector<TestFunction>{p1, p2}, *line) ==
          Approx(std::exp(logv)).epsilon(1e-8));
  }

  SECTION("too many times") {
    std::vector<double> times(13);
    for (std::size_t i = 0; i < 13; ++i) times[i] = 0.1 * double(i + 1);
    CHECK_THROWS_AS(glauber_joint_laplace(cfg, a, z, times, std::vector<TestFunction>(13, p1), *line),
                    InvalidArgument);
  }
}

TEST_CASE("Glauber joint law matches simulation") {
  auto line = make_domain(Domain::full_space(Box{{0.0}, {10.0}}));
  const TestFunction p1 = TestFunction::box_indicator(0.5, Box{{2.0}, {6.0}});
  const TestFunction p2 = TestFunction::bump(0.6, {5.0}, 2.0);
  const std::vector<TestFunction> phis = {p1, p2};
  const std::vector<double> times = {0.5, 1.0};
  const double a = 1.0, z = 1.0;
  const RateFunction rate = RateFunction::constant(a);
  const std::size_t n = 40000;
  RngStream root(5, 0);

  SECTION("fixed start") {
    RngStream s0 = root.substream(999999);
    const Configuration cfg = sample_poisson(line, Intensity::constant(2.0), s0);
    std::vector<double> v(n);
    for (std::size_t r = 0; r < n; ++r)
      v[r] = joint_laplace_factor(phis, glauber_snapshot_coords(cfg, rate, z, times, root.substream(r)), 1);
    const auto e = laplace_estimate(v);
    CHECK(within_sigma(e.mean, e.std_error, glauber_joint_laplace(cfg, a, z, times, phis, *line)));
  }

  SECTION("Poisson start") {
    const double z0 = 2.0;
    std::vector<double> v(n), single(n);
    for (std::size_t r = 0; r < n; ++r) {
      RngStream rs = root.substream(r);
      RngStream init = rs.substream(7);
      const Configuration cfg = sample_poisson(line, Intensity::constant(z0), init);
      const auto snaps = glauber_snapshot_coords(cfg, rate, z, times, rs);
      v[r] = joint_laplace_factor(phis, snaps, 1);
    }
    const auto e = laplace_estimate(v);
    CHECK(within_sigma(e.mean, e.std_error,
                       glauber_joint_laplace(PoissonStart{z0}, a, z, times, phis, *line)));
  }

  SECTION("Poisson stationarity at several times") {
    for (double t : {0.5, 1.0, 2.0}) {
      std::vector<double> v(n);
      for (std::size_t r = 0; r < n; ++r) {
        RngStream rs = root.substream(r + 10 * n);
        RngStream init = rs.substream(7);
        const Configuration cfg = sample_poisson(line, Intensity::constant(z), init);
        v[r] = laplace_factor(p1, glauber_snapshot_coords(cfg, rate, z, {t}, rs)[0], 1);
      }
      const auto e = laplace_estimate(v);
      CHECK(within_sigma(e.mean, e.std_error, std::exp(z * -0.5 * 4.0)));
    }
  }
}

TEST_CASE("cluster generating functional") {
  auto line = make_domain(Domain::full_space(Box{{-30.0}, {30.0}}));
  const TestFunction p1 = TestFunction::box_indicator(0.5, Box{{-1.0}, {1.5}});
  const TestFunction p2 = TestFunction::bump(0.4, {0.5}, 1.0);
  const ClusterStart ns{0.8, 0.6, 0.7};
  const std::vector<std::vector<const TestFunction*>> groups = {{&p1}, {&p2}, {&p1, &p2}};
  const std::vector<double> w = {0.9, 0.5, 0.3};
  const double value = cluster_generating_functional(ns, w, groups, *line);

  SECTION("no pairs reduces to Poisson") {
    const double poisson = cluster_generating_functional(ClusterStart{0.8, 0.0, 0.7}, w, groups, *line);
    const double integral = w[0] * -0.5 * 2.5 + w[1] * p2.integral() +
                            w[2] * product_integral(std::vector<const TestFunction*>{&p1, &p2});
    CHECK(poisson == Approx(std::exp(0.8 * integral)).epsilon(1e-10));
  }

  SECTION("Monte Carlo with an independent sampler") {
    std::mt19937_64 gen(12345);
    std::normal_distribution<double> off(0.0, ns.sigma);
    const double range = 15.0;
    std::poisson_distribution<int> parents(ns.kappa * 2.0 * range);
    std::uniform_real_distribution<double> where(-range, range);
    std::bernoulli_distribution pair(ns.p2);
    auto h = [&](double x) {
      const std::vector<double> xv = {x};
      const double a = p1(xv), b = p2(xv);
      return w[0] * a + w[1] * b + w[2] * a * b;
    };
    std::vector<double> v(200000);
    for (auto& s : v) {
      double f = 1.0;
      const int np = parents(gen);
      for (int i = 0; i < np; ++i) {
        const double c = where(gen);
        f *= 1.0 + h(c + off(gen));
        if (pair(gen)) f *= 1.0 + h(c + off(gen));
      }
      s = f;
    }
    const auto st = testutil::stats(v);
    CHECK(within_sigma(st.mean, st.std_error, value));
  }
}

TEST_CASE("correlation estimation") {
  auto dom = make_domain(Domain::full_space(Box{{0.0, 0.0}, {4.0, 4.0}}));
  const double z = 3.0;
  RngStream root(9, 0);
  std::vector<Configuration> samples;
  for (std::uint64_t r = 0; r < 20000; ++r) {
    RngStream s = root.substream(r);
    samples.push_back(sample_poisson(dom, Intensity::constant(z), s));
  }
  const BinGrid bins{Box{{0.0, 0.0}, {4.0, 4.0}}, {2, 2}};
  CHECK(bins.size() == 4);
  CHECK(bins.cell_volume() == Approx(4.0));
  CHECK(bins.locate(std::vector<double>{3.0, 1.0}) == std::optional<std::size_t>(2));

  const auto k1 = estimate_correlations(samples, 1, bins);
  for (std::size_t i = 0; i < k1.estimates.size(); ++i)
    CHECK(within_sigma(k1.estimates[i], k1.std_errors[i], z));

  const auto k2 = estimate_correlations(samples, 2, bins);
  CHECK(k2.tuples.size() == 10);
  CHECK(k2.at({3, 1}) == k2.at({1, 3}));
  for (std::size_t i = 0; i < k2.estimates.size(); ++i)
    CHECK(within_sigma(k2.estimates[i], k2.std_errors[i], z * z));

  const auto single = estimate_correlations({Configuration(dom, {1.0, 1.0})}, 2, bins);
  for (double e : single.estimates) CHECK(e == 0.0);
  CHECK_THROWS_AS(estimate_correlations(std::vector<Configuration>{}, 2, bins), InvalidArgument);
}

TEST_CASE("Ursell functions") {
  SECTION("one and two points") {
    auto t = ursell_from_correlations(UrsellTable::with_correlations(1, {1.0, 2.5}));
    CHECK(t.u[1] == 2.5);
    t = ursell_from_correlations(UrsellTable::with_correlations(2, {1.0, 2.0, 3.0, 7.5}));
    CHECK(t.u[3] == Approx(7.5 - 2.0 * 3.0));
  }

  SECTION("Poisson tables have no connected part") {
    for (std::size_t n = 1; n <= kMaxUrsellPoints; ++n) {
      const auto t = ursell_from_correlations(UrsellTable::poisson(n, 1.75));
      for (std::size_t m = 1; m < t.u.size(); ++m) {
        if (std::popcount(m) == 1) CHECK(t.u[m] == 1.75);
        else CHECK(std::abs(t.u[m]) <= 1e-12);
      }
    }
  }

  SECTION("roundtrip and partition sums") {
    std::mt19937_64 gen(77);
    std::uniform_real_distribution<double> U(-1.0, 2.0);
    for (std::size_t n = 1; n <= 6; ++n) {
      for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> k(std::size_t(1) << n);
        for (auto& v : k) v = U(gen);
        const auto u = ursell_from_correlations(UrsellTable::with_correlations(n, k));
        const auto back = correlations_from_ursell(UrsellTable::with_ursell(n, u.u));
        for (std::size_t m = 1; m < k.size(); ++m) REQUIRE(std::abs(back.k[m] - k[m]) <= 1e-12);
        const std::size_t full = k.size() - 1;
        double brute = 0.0;
        std::vector<std::size_t> blocks;
        partitions(n, 0, blocks, [&](const std::vector<std::size_t>& bl) {
          double p = 1.0;
          for (std::size_t b : bl) p *= u.u[b];
          brute += p;
        });
        REQUIRE(std::abs(brute - k[full]) <= 1e-11);
      }
    }
  }

  SECTION("incomplete tables are rejected") {
    CHECK_THROWS_AS(ursell_from_correlations(UrsellTable::with_correlations(3, {1.0, 2.0})),
                    InvalidArgument);
    CHECK_THROWS_AS(correlations_from_ursell(UrsellTable::with_ursell(9, std::vector<double>(512))),
                    InvalidArgument);
  }
}

TEST_CASE("generator formulas") {
  auto dom = make_domain(Domain::full_space(Box{{-10.0}, {10.0}}));
  const Configuration cfg(dom, {-1.2, 0.3, 0.9, 4.0});
  const TestFunction box = TestFunction::box_indicator(0.4, Box{{-1.0}, {1.0}});
  const TestFunction bump = TestFunction::bump(0.5, {0.0}, 2.0);
  const FreeDynamics glauber = FreeDynamics::glauber(RateFunction::constant(1.0), 1.0);
  const FreeDynamics kawasaki = FreeDynamics::kawasaki(JumpProfile::gaussian(1, 1.3, 0.8));
  const FreeDynamics brownian{KernelSpec::brownian(), 0.0};

  SECTION("constants are annihilated") {
    const auto F = CylinderFunction::constant(3.0);
    for (const auto& dyn : {glauber, kawasaki, brownian}) CHECK(generator_apply(F, cfg, dyn) == 0.0);
  }

  SECTION("Glauber on a linear functional") {
    const auto F = CylinderFunction::linear(box);
    CHECK(generator_apply(F, cfg, glauber) == Approx(-0.8 - pairing(box, cfg)).margin(1e-10));
    const Configuration shifted(dom, {-0.5, 0.3, 0.9, 4.0});
    CHECK(generator_apply(F, shifted, glauber) == Approx(-0.8 - -1.2).margin(1e-10));
  }

  SECTION("Kawasaki on a linear functional") {
    const auto F = CylinderFunction::linear(box);
    double expect = 0.0;
    for (double x : {-1.2, 0.3, 0.9, 4.0}) {
      const double smooth = -0.4 * (Phi((1.0 - x) / 0.8) - Phi((-1.0 - x) / 0.8));
      expect += 1.3 * smooth - 1.3 * box(std::vector<double>{x});
    }
    CHECK(generator_apply(F, cfg, kawasaki) == Approx(expect).margin(1e-8));
  }

  SECTION("Kawasaki on an exponential functional") {
    const double kappa = 0.7;
    const auto F = CylinderFunction::exponential(bump, kappa);
    const double s = pairing(bump, cfg);
    double expect = 0.0;
    for (double x : {-1.2, 0.3, 0.9, 4.0}) {
      const double px = bump(std::vector<double>{x});
      expect += trapezoid(
          [&](double y) {
            const double dens = 1.3 * std::exp(-0.5 * (y - x) * (y - x) / 0.64) /
                                (0.8 * std::sqrt(2.0 * std::numbers::pi));
            return dens * (std::exp(kappa * (s - px + bump(std::vector<double>{y}))) -
                           std::exp(kappa * s));
          },
          x - 40.0, x + 40.0, 400000);
    }
    CHECK(generator_apply(F, cfg, kawasaki) == Approx(expect).margin(1e-7));
  }

  SECTION("Glauber on an exponential functional with a local death rate") {
    const RateFunction a = RateFunction::box_indicator(2.0, Box{{0.0}, {3.0}});
    const FreeDynamics dyn = FreeDynamics::glauber(a, 1.5);
    const double kappa = 0.9;
    const auto F = CylinderFunction::exponential(bump, kappa);
    const double s = pairing(bump, cfg);
    double expect = 0.0;
    for (double x : {0.3, 0.9})
      expect += 2.0 * (std::exp(kappa * (s - bump(std::vector<double>{x}))) - std::exp(kappa * s));
    expect += 1.5 * 2.0 * trapezoid([&](double y) {
      return std::exp(kappa * (s + bump(std::vector<double>{y}))) - std::exp(kappa * s);
    }, 0.0, 2.0, 200000);
    CHECK(generator_apply(F, cfg, dyn) == Approx(expect).margin(1e-8));
  }

  SECTION("Brownian generator against central differences") {
    const double kappa = 1.1;
    const auto F = CylinderFunction::exponential(bump, kappa);
    const double h = 1e-3;
    double expect = 0.0;
    for (std::size_t i = 0; i < cfg.size(); ++i) {
      std::vector<double> plus = cfg.coords(), minus = cfg.coords();
      plus[i] += h;
      minus[i] -= h;
      expect += 0.5 * (F(plus, 1) + F(minus, 1) - 2.0 * F(cfg)) / (h * h);
    }
    CHECK(generator_apply(F, cfg, brownian) == Approx(expect).epsilon(1e-5));
    CHECK_THROWS_AS(generator_apply(CylinderFunction::linear(box), cfg, brownian), Unsupported);
  }

  SECTION("Brownian generator in two dimensions") {
    auto plane = make_domain(Domain::full_space(Box{{-5.0, -5.0}, {5.0, 5.0}}));
    const Configuration c2(plane, {0.2, -0.3, 1.0, 0.5});
    const TestFunction b2 = TestFunction::bump(0.6, {0.0, 0.0}, 1.8);
    const auto F = CylinderFunction::exponential(b2, 0.8);
    const double h = 1e-3;
    double expect = 0.0;
    for (std::size_t i = 0; i < c2.coords().size(); ++i) {
      std::vector<double> plus = c2.coords(), minus = c2.coords();
      plus[i] += h;
      minus[i] -= h;
      expect += 0.5 * (F(plus, 2) + F(minus, 2) - 2.0 * F(c2)) / (h * h);
    }
    CHECK(generator_apply(F, c2, brownian) == Approx(expect).epsilon(1e-5));
  }
}

TEST_CASE("finite-difference generator checks") {
  auto dom = make_domain(Domain::full_space(Box{{-10.0}, {10.0}}));
  RngStream s0(13, 0);
  const Configuration cfg = sample_poisson(dom, Intensity::constant(2.0), s0);
  const TestFunction phi = TestFunction::box_indicator(0.5, Box{{-2.0}, {2.0}});

  SECTION("frozen dynamics") {
    const auto F = CylinderFunction::linear(phi);
    const auto c = generator_fd_check(F, cfg, FreeDynamics::glauber(RateFunction::constant(0.0), 0.0),
                                      0.01, 100, RngStream(14, 0));
    CHECK(c.fd_estimate == 0.0);
    CHECK(c.analytic == 0.0);
    CHECK(c.within());
  }

  SECTION("Glauber and Kawasaki finite differences") {
    const std::vector<FreeDynamics> dyns = {
        FreeDynamics::glauber(RateFunction::constant(1.0), 1.0),
        FreeDynamics::kawasaki(JumpProfile::gaussian(1, 1.0, 1.0))};
    for (const auto& dyn : dyns) {
      for (const auto& F : {CylinderFunction::linear(phi), CylinderFunction::exponential(phi, 0.5)}) {
        const auto checks = generator_fd_checks(F, cfg, dyn, {0.05, 0.025}, 40000, RngStream(15, 0));
        for (const auto& c : checks) {
          REQUIRE(c.exact_bias);
          CHECK(c.within());
        }
        CHECK(std::abs(*checks[1].exact_bias) < std::abs(*checks[0].exact_bias));
      }
    }
  }

  SECTION("thread count does not change the result") {
    const auto F = CylinderFunction::exponential(phi, 0.5);
    const auto dyn = FreeDynamics::kawasaki(JumpProfile::gaussian(1, 1.0, 1.0));
    const auto a = generator_fd_check(F, cfg, dyn, 0.02, 3000, RngStream(16, 0), 1);
    const auto b = generator_fd_check(F, cfg, dyn, 0.02, 3000, RngStream(16, 0), 3);
    CHECK(a.fd_estimate == b.fd_estimate);
    CHECK(a.std_error == b.std_error);
  }
}

TEST_CASE("Markov Laplace identity for each conservative kernel") {
  auto ring = make_domain(Domain::torus(1, 20.0));
  auto line = make_domain(Domain::full_space(Box{{-15.0}, {15.0}}));
  const TestFunction phi = TestFunction::bump(0.6, {10.0}, 2.5);
  const TestFunction phi0 = TestFunction::bump(0.6, {0.0}, 2.5);
  struct Case {
    KernelSpec k;
    DomainPtr dom;
    const TestFunction* phi;
  };
  const std::vector<Case> cases = {
      {KernelSpec::brownian(), line, &phi0},
      {KernelSpec::kawasaki(JumpProfile::gaussian(1, 1.0, 1.0)), line, &phi0},
      {KernelSpec::kawasaki(JumpProfile::bump(1, 2.0, 1.5)), ring, &phi},
      {KernelSpec::brownian(), ring, &phi}};
  for (const auto& c : cases) {
    RngStream s0(17, 0);
    const Domain& D = *c.dom;
    const double shift = D.is_torus() ? 10.0 : 0.0;
    std::vector<double> x;
    for (int i = 0; i < 12; ++i) x.push_back(shift - 3.0 + 0.5 * i);
    const Configuration cfg(c.dom, x);
    const double t = 0.7;
    const EvolutionPlan plan = resolve_plan(c.k, plan_for(D, {t}), D);
    std::vector<double> v(30000);
    for (std::size_t r = 0; r < v.size(); ++r)
      v[r] = laplace_factor(*c.phi,
                            simulate_snapshot_coords(cfg, c.k, plan, s0.substream(r))[0], 1);
    const auto e = laplace_estimate(v);
    CHECK(within_sigma(e.mean, e.std_error, analytic_laplace_markov(c.k, cfg, *c.phi, t)));
  }
}

TEST_CASE("sub-Markov Laplace identity with immigration") {
  auto line = make_domain(Domain::full_space(Box{{-6.0}, {6.0}}));
  const TestFunction phi = TestFunction::box_indicator(0.5, Box{{-1.5}, {1.0}});
  const Configuration cfg(line, {-1.0, -0.2, 0.4, 2.0});
  const std::vector<std::pair<KernelSpec, double>> cases = {
      {KernelSpec::death(RateFunction::constant(1.0)), 1.0},
      {KernelSpec::killed_brownian(RateFunction::box_indicator(1.0, Box{{-2.0}, {2.0}})), 1.0}};
  for (const auto& [k, z] : cases) {
    EvolutionPlan plan = plan_for(*line, {0.8});
    plan.mode = EvolutionMode::SubMarkovWithImmigration;
    plan.z = z;
    std::vector<double> v(40000);
    RngStream root(19, 0);
    for (std::size_t r = 0; r < v.size(); ++r)
      v[r] = laplace_factor(phi, simulate_snapshot_coords(cfg, k, plan, root.substream(r))[0], 1);
    const auto e = laplace_estimate(v);
    CHECK(within_sigma(e.mean, e.std_error, analytic_laplace_submarkov(k, cfg, phi, 0.8, z)));
  }
}
