#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <vector>

#include "contdyn/dynamics.hpp"
#include "contdyn/error.hpp"
#include "stat_helpers.hpp"

using namespace contdyn;
using testutil::within_sigma;

namespace {

EvolutionPlan plan_for(const Domain& dom, std::vector<double> times) {
  EvolutionPlan p;
  p.times = std::move(times);
  p.boundary = default_boundary(dom);
  return p;
}

Configuration lattice(const DomainPtr& dom, std::size_t n, double lo, double step) {
  std::vector<double> c(n);
  for (std::size_t i = 0; i < n; ++i) c[i] = lo + step * (double(i) + 0.5);
  return Configuration(dom, c);
}

double count(const std::vector<double>& coords, std::size_t d) {
  return double(coords.size() / d);
}

double log_laplace_term(const std::vector<double>& coords, double a, double b, double depth) {
  double s = 0.0;
  for (double x : coords)
    if (x >= a && x < b) s += std::log1p(-depth);
  return std::exp(s);
}

}  // namespace

TEST_CASE("death kernel survival after ln 2 is Binomial(100, 1/2)") {
  auto dom = make_domain(Domain::full_space(Box{{0.0}, {100.0}}));
  const Configuration cfg = lattice(dom, 100, 0.0, 1.0);
  const KernelSpec k = KernelSpec::death(RateFunction::constant(1.0));
  const EvolutionPlan plan = plan_for(*dom, {std::log(2.0)});
  RngStream root(101, 0);
  std::vector<double> n(20000);
  for (std::size_t r = 0; r < n.size(); ++r)
    n[r] = count(simulate_snapshot_coords(cfg, k, plan, root.substream(r))[0], 1);
  const auto s = testutil::stats(n);
  CHECK(within_sigma(s.mean, s.std_error, 50.0));
  CHECK(s.stddev * s.stddev == Catch::Approx(25.0).epsilon(0.05));
}

TEST_CASE("time zero returns the initial configuration for every kernel") {
  auto line = make_domain(Domain::full_space(Box{{-10.0}, {10.0}}));
  auto ring = make_domain(Domain::torus(1, 20.0));
  RngStream rng(7, 0);
  const std::vector<KernelSpec> kernels = {
      KernelSpec::brownian(), KernelSpec::death(RateFunction::constant(2.0)),
      KernelSpec::kawasaki(JumpProfile::gaussian(1, 1.0, 1.0)),
      KernelSpec::killed_brownian(RateFunction::constant(0.5))};
  for (const auto& k : kernels) {
    for (const auto& dom : {line, ring}) {
      RngStream s = rng;
      const Configuration cfg = sample_poisson(dom, Intensity::constant(1.0), s);
      const auto out = evolve_snapshot(cfg, k, plan_for(*dom, {0.0, 0.5}), rng);
      CHECK(out[0] == cfg);
    }
  }
}

TEST_CASE("torus Kawasaki conserves the particle count") {
  auto ring = make_domain(Domain::torus(1, 10.0));
  RngStream s(3, 0);
  const Configuration cfg = sample_poisson(ring, Intensity::constant(2.0), s);
  const KernelSpec k = KernelSpec::kawasaki(JumpProfile::bump(1, 3.0, 2.0));
  for (std::uint64_t r = 0; r < 50; ++r) {
    const auto out = evolve_snapshot(cfg, k, plan_for(*ring, {0.5, 1.0, 2.0, 5.0}),
                                     RngStream(4, 0).substream(r));
    for (const auto& c : out) REQUIRE(c.size() == cfg.size());
  }
}

TEST_CASE("Glauber from empty start fills to z V") {
  auto dom = make_domain(Domain::full_space(Box{{0.0}, {10.0}}));
  const Configuration empty(dom);
  const RateFunction a = RateFunction::constant(1.0);
  const double target = 2.0 * 10.0 * (1.0 - std::exp(-10.0));
  RngStream root(11, 0);
  std::vector<double> via_kernel(4000), via_events(4000);
  for (std::size_t r = 0; r < via_kernel.size(); ++r) {
    via_kernel[r] = double(evolve_with_immigration(empty, KernelSpec::death(a), 2.0,
                                                   plan_for(*dom, {10.0}), root.substream(r))[0]
                               .size());
    via_events[r] = double(glauber_evolve(empty, a, 2.0, plan_for(*dom, {10.0}),
                                          root.substream(r + 100000))[0]
                               .size());
  }
  const auto s1 = testutil::stats(via_kernel), s2 = testutil::stats(via_events);
  CHECK(within_sigma(s1.mean, s1.std_error, target));
  CHECK(within_sigma(s2.mean, s2.std_error, target));
}

TEST_CASE("immigration with a conservative kernel degenerates with a warning") {
  auto ring = make_domain(Domain::torus(1, 10.0));
  RngStream s(5, 0);
  const Configuration cfg = sample_poisson(ring, Intensity::constant(1.0), s);
  const KernelSpec k = KernelSpec::brownian();
  std::vector<std::string> warnings;
  const auto a = evolve_with_immigration(cfg, k, 3.0, plan_for(*ring, {1.0}), RngStream(6, 0),
                                         &warnings);
  const auto b = evolve_snapshot(cfg, k, plan_for(*ring, {1.0}), RngStream(6, 0));
  CHECK(warnings.size() == 1);
  CHECK(a[0] == b[0]);
}

TEST_CASE("Glauber keeps the Poisson measure invariant") {
  auto dom = make_domain(Domain::full_space(Box{{0.0}, {50.0}}));
  const RateFunction a = RateFunction::constant(1.0);
  RngStream root(21, 0);
  std::vector<double> n(4000);
  for (std::size_t r = 0; r < n.size(); ++r) {
    RngStream rs = root.substream(r);
    RngStream init = rs.substream(9);
    const Configuration cfg = sample_poisson(dom, Intensity::constant(2.0), init);
    n[r] = double(glauber_evolve(cfg, a, 2.0, plan_for(*dom, {1.0}), rs)[0].size()) / 50.0;
  }
  const auto s = testutil::stats(n);
  CHECK(within_sigma(s.mean, s.std_error, 2.0));
}

TEST_CASE("pure death thins monotonically") {
  auto dom = make_domain(Domain::full_space(Box{{0.0}, {40.0}}));
  const Configuration cfg = lattice(dom, 40, 0.0, 1.0);
  const RateFunction a = RateFunction::box_indicator(0.7, Box{{0.0}, {20.0}});
  const std::vector<double> times = {0.5, 1.0, 2.0};
  RngStream root(31, 0);
  std::vector<double> last(5000);
  for (std::size_t r = 0; r < last.size(); ++r) {
    const auto out = glauber_evolve(cfg, a, 0.0, plan_for(*dom, times), root.substream(r));
    for (std::size_t k = 1; k < out.size(); ++k) REQUIRE(out[k].size() <= out[k - 1].size());
    last[r] = double(out.back().size());
  }
  const auto s = testutil::stats(last);
  CHECK(within_sigma(s.mean, s.std_error, 20.0 + 20.0 * std::exp(-1.4)));
}

TEST_CASE("zero death rate freezes the configuration") {
  auto dom = make_domain(Domain::full_space(Box{{0.0}, {10.0}}));
  RngStream s(41, 0);
  const Configuration cfg = sample_poisson(dom, Intensity::constant(3.0), s);
  const auto out = glauber_evolve(cfg, RateFunction::constant(0.0), 5.0,
                                  plan_for(*dom, {1.0, 10.0}), RngStream(42, 0));
  for (const auto& c : out) CHECK(c == cfg);
  const auto k = evolve_with_immigration(cfg, KernelSpec::death(RateFunction::constant(0.0)), 5.0,
                                         plan_for(*dom, {1.0, 10.0}), RngStream(43, 0));
  for (const auto& c : k) CHECK(c == cfg);
}

TEST_CASE("invalid plans are rejected") {
  auto line = make_domain(Domain::full_space(Box{{0.0}, {1.0}}));
  auto ring = make_domain(Domain::torus(1, 1.0));
  const Configuration cfg(line);
  const KernelSpec k = KernelSpec::brownian();
  RngStream rng(1, 0);
  CHECK_THROWS_AS(evolve_snapshot(cfg, k, plan_for(*line, {1.0, 0.5}), rng), InvalidArgument);
  CHECK_THROWS_AS(evolve_snapshot(cfg, k, plan_for(*line, {}), rng), InvalidArgument);
  CHECK_THROWS_AS(evolve_snapshot(cfg, k, plan_for(*line, {-1.0}), rng), InvalidArgument);
  EvolutionPlan wrong = plan_for(*ring, {1.0});
  CHECK_THROWS_AS(evolve_snapshot(cfg, k, wrong, rng), InvalidArgument);
  EvolutionPlan buffered = plan_for(*line, {1.0});
  CHECK_THROWS_AS(evolve_snapshot(Configuration(ring), k, buffered, rng), InvalidArgument);
  CHECK_THROWS_AS(evolve_snapshot(cfg, k, plan_for(*line, {1.0}), rng.substream(1).substream(2)),
                  InvalidArgument);
  CHECK_THROWS_AS(evolve_with_immigration(cfg, k, 0.0, plan_for(*line, {1.0}), rng),
                  InvalidArgument);
}

TEST_CASE("event streams") {
  auto dom = make_domain(Domain::full_space(Box{{0.0}, {20.0}}));
  auto ring = make_domain(Domain::torus(1, 20.0));
  const RateFunction a = RateFunction::constant(1.0);

  SECTION("Glauber birth count has mean V T") {
    RngStream root(51, 0);
    std::vector<double> births(3000);
    for (std::size_t r = 0; r < births.size(); ++r) {
      const auto es = event_stream(Configuration(dom), FreeDynamics::glauber(a, 1.0), 3.0,
                                   root.substream(r));
      births[r] = double(std::count_if(es.events.begin(), es.events.end(),
                                       [](const Event& e) { return e.kind == EventKind::Birth; }));
    }
    const auto s = testutil::stats(births);
    CHECK(within_sigma(s.mean, s.std_error, 60.0));
  }

  SECTION("Kawasaki jump count has mean n T") {
    const Configuration cfg = lattice(ring, 30, 0.0, 20.0 / 30.0);
    RngStream root(52, 0);
    std::vector<double> jumps(3000);
    for (std::size_t r = 0; r < jumps.size(); ++r) {
      const auto es = event_stream(cfg, FreeDynamics::kawasaki(JumpProfile::gaussian(1, 1.0, 1.0)),
                                   2.0, root.substream(r));
      jumps[r] = double(es.events.size());
      std::vector<Point> at(cfg.size());
      for (std::size_t i = 0; i < cfg.size(); ++i)
        at[i] = Point(cfg.point(i).begin(), cfg.point(i).end());
      double prev = 0.0;
      for (const Event& e : es.events) {
        REQUIRE(e.time >= prev);
        REQUIRE(e.time <= 2.0);
        REQUIRE(e.from == at[e.particle]);
        at[e.particle] = e.to;
        prev = e.time;
      }
    }
    const auto s = testutil::stats(jumps);
    CHECK(within_sigma(s.mean, s.std_error, 60.0));
  }

  SECTION("empty start without immigration gives an empty stream") {
    const auto es = event_stream(Configuration(dom), FreeDynamics::glauber(a, 0.0), 5.0,
                                 RngStream(53, 0));
    CHECK(es.events.empty());
    CHECK_THROWS_AS(event_stream(Configuration(dom), FreeDynamics{KernelSpec::brownian(), 0.0},
                                 1.0, RngStream(53, 0)),
                    Unsupported);
  }

  SECTION("reconstructed snapshots match evolve in law") {
    const Configuration cfg = lattice(dom, 50, 0.0, 0.4);
    const double target = 50.0 * std::exp(-2.0) + 20.0 * (1.0 - std::exp(-2.0));
    RngStream root(54, 0);
    std::vector<double> from_events(4000), from_evolve(4000);
    for (std::size_t r = 0; r < from_events.size(); ++r) {
      const auto es = event_stream(cfg, FreeDynamics::glauber(a, 1.0), 3.0, root.substream(r));
      from_events[r] = double(snapshot_from_events(cfg, es, 2.0).size());
      from_evolve[r] = double(glauber_evolve(cfg, a, 1.0, plan_for(*dom, {2.0}),
                                             root.substream(r + 50000))[0]
                                  .size());
    }
    const auto s1 = testutil::stats(from_events), s2 = testutil::stats(from_evolve);
    CHECK(within_sigma(s1.mean, s1.std_error, target));
    CHECK(within_sigma(s2.mean, s2.std_error, target));
  }
}

TEST_CASE("disjoint initial subsets evolve independently") {
  auto dom = make_domain(Domain::full_space(Box{{-10.0}, {10.0}}));
  std::vector<double> c;
  for (int i = 0; i < 10; ++i) c.push_back(-3.0 + 0.1 * i);
  for (int i = 0; i < 10; ++i) c.push_back(2.0 + 0.1 * i);
  const Configuration cfg(dom, c);
  const KernelSpec k = KernelSpec::brownian();
  const EvolutionPlan plan = plan_for(*dom, {2.0});
  RngStream root(61, 0);
  const std::size_t n = 20000;
  std::vector<double> prod(n), na(n), nb(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto tracks = simulate_tracks(cfg, k, plan, root.substream(r));
    double a = 0.0, b = 0.0;
    for (std::size_t i = 0; i < tracks.size(); ++i) {
      const auto& p = tracks[i].positions[0];
      if (p && std::abs((*p)[0]) < 1.0) (i < 10 ? a : b) += 1.0;
    }
    na[r] = a;
    nb[r] = b;
  }
  const double ma = testutil::stats(na).mean, mb = testutil::stats(nb).mean;
  for (std::size_t r = 0; r < n; ++r) prod[r] = (na[r] - ma) * (nb[r] - mb);
  const auto cov = testutil::stats(prod);
  CHECK(within_sigma(cov.mean, cov.std_error, 0.0));
}

TEST_CASE("snapshots stay simple") {
  auto dom = make_domain(Domain::full_space(Box{{0.0, 0.0}, {4.0, 4.0}}));
  auto ring = make_domain(Domain::torus(1, 5.0));
  const KernelSpec kb = KernelSpec::killed_brownian(RateFunction::constant(1.0));
  for (std::uint64_t r = 0; r < 30; ++r) {
    RngStream s = RngStream(71, 0).substream(r);
    RngStream init = s.substream(9);
    const Configuration cfg = sample_poisson(dom, Intensity::constant(5.0), init);
    EvolutionPlan plan = plan_for(*dom, {0.3, 1.0});
    plan.mode = EvolutionMode::SubMarkovWithImmigration;
    plan.z = 5.0;
    for (const auto& snap : simulate_snapshot_coords(cfg, kb, plan, s))
      REQUIRE(all_distinct(snap, 2));
    RngStream init2 = s.substream(10);
    const Configuration cr = sample_poisson(ring, Intensity::constant(8.0), init2);
    const auto kaw = evolve_snapshot(cr, KernelSpec::kawasaki(JumpProfile::bump(1, 2.0, 0.5)),
                                     plan_for(*ring, {1.0, 4.0}), s);
    CHECK(kaw.size() == 2);
  }
}

TEST_CASE("evolution is a semigroup in law") {
  auto ring = make_domain(Domain::torus(1, 10.0));
  const Configuration cfg = lattice(ring, 12, 3.0, 0.25);
  const double depth = 0.5;
  auto check = [&](const KernelSpec& k) {
    RngStream root(81, 0);
    const std::size_t n = 20000;
    std::vector<double> direct(n), twostep(n);
    for (std::size_t r = 0; r < n; ++r) {
      direct[r] = log_laplace_term(
          simulate_snapshot_coords(cfg, k, plan_for(*ring, {1.0}), root.substream(r))[0], 4.0,
          6.0, depth);
      const auto mid = evolve_snapshot(cfg, k, plan_for(*ring, {0.4}), root.substream(n + r));
      twostep[r] = log_laplace_term(
          simulate_snapshot_coords(mid[0], k, plan_for(*ring, {0.6}), root.substream(2 * n + r))[0],
          4.0, 6.0, depth);
    }
    const auto a = testutil::stats(direct), b = testutil::stats(twostep);
    CHECK(std::abs(a.mean - b.mean) <= 3.0 * std::hypot(a.std_error, b.std_error));
  };
  check(KernelSpec::brownian());
  check(KernelSpec::kawasaki(JumpProfile::gaussian(1, 2.0, 0.7)));
}

TEST_CASE("buffer width is adequate") {
  auto dom = make_domain(Domain::full_space(Box{{0.0}, {10.0}}));
  const KernelSpec k = KernelSpec::brownian();
  const Intensity bg = Intensity::constant(1.0);
  EvolutionPlan plan = plan_for(*dom, {1.0});
  plan.boundary.background = bg;
  const double width = buffer_width(k, plan, *dom);
  CHECK(tail_bound(k, 1.0, width, 1) == Catch::Approx(1e-4).epsilon(1e-6));
  const double population = 2.0 * width;
  CHECK(buffer_leakage_bound(k, 1.0, width, 1) * population < 0.01);

  EvolutionPlan doubled = plan;
  doubled.boundary.width = 2.0 * width;
  RngStream root(91, 0);
  const std::size_t n = 20000;
  std::vector<double> a(n), b(n);
  for (std::size_t r = 0; r < n; ++r) {
    RngStream rs = root.substream(r);
    RngStream init = rs.substream(9);
    const Configuration cfg = sample_poisson(dom, bg, init);
    a[r] = count(simulate_snapshot_coords(cfg, k, plan, rs)[0], 1);
    b[r] = count(simulate_snapshot_coords(cfg, k, doubled, rs)[0], 1);
  }
  const auto sa = testutil::stats(a), sb = testutil::stats(b);
  CHECK(within_sigma(sa.mean, sa.std_error, 10.0));
  CHECK(within_sigma(sb.mean, sb.std_error, 10.0));
  CHECK(buffer_leakage_bound(k, 1.0, width, 1) * population < sa.std_error);
}
