// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/distributions/poisson.hpp>

#include "commands.hpp"
#include "contdyn/config.hpp"
#include "contdyn/error.hpp"
#include "contdyn/io.hpp"
#include "contdyn/parallel.hpp"

using namespace contdyn;

namespace {

constexpr std::size_t kReplicas = 100000;
constexpr double kSigmas = 3.0;

unsigned g_threads = 1;

struct Verdict {
  bool ok = true;
  std::vector<std::string> lines;

  void expect(bool cond, const std::string& what) {
    ok = ok && cond;
    lines.push_back(std::string(cond ? "ok   " : "FAIL ") + what);
  }
};

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c, d);
  return buf;
}

// |estimate - target| <= 3 se, logged with the z-score.
void expect_3se(Verdict& v, const std::string& what, double est, double se, double target) {
  const double z = se > 0.0 ? (est - target) / se : 0.0;
  const bool ok = se > 0.0 ? std::abs(est - target) <= kSigmas * se : est == target;
  v.expect(ok, what + fmt(": est %.6g se %.2g target %.6g (z=%+.2f)", est, se, target, z));
}

double Phi(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double box_depth_mass(double depth, double a, double b, double x, double var) {
  if (var == 0.0) return (x >= a && x <= b) ? -depth : 0.0;
  const double s = std::sqrt(var);
  return -depth * (Phi((b - x) / s) - Phi((a - x) / s));
}

LaplaceEstimate mean_of(const std::vector<double>& values) { return laplace_estimate(values); }

// ---------------------------------------------------------------- criterion 1

Verdict poisson_laplace() {
  Verdict v;
  for (std::size_t d : {1u, 2u}) {
    const double z = d == 1 ? 1.0 : 0.5;
    Box window{std::vector<double>(d, 0.0), std::vector<double>(d, 10.0)};
    const DomainPtr dom = make_domain(Domain::full_space(window));
    const Point c(d, 5.0);
    Box b1{std::vector<double>(d, 2.0), std::vector<double>(d, 6.0)};
    Box b3{std::vector<double>(d, 4.5), std::vector<double>(d, 5.5)};
    const std::vector<TestFunction> phis = {TestFunction::box_indicator(0.5, b1),
                                            TestFunction::bump(0.7, c, 2.0),
                                            TestFunction::box_indicator(0.9, b3)};
    // Independent integrals: boxes exactly, the bump radially.
    auto bump_profile = [](double r) { return r < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - r * r)) : 0.0; };
    const double radial = d == 1
        ? 2.0 * boost::math::quadrature::gauss_kronrod<double, 61>::integrate(bump_profile, 0.0, 1.0, 15, 1e-14)
        : 2.0 * M_PI * boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
              [&](double r) { return bump_profile(r) * r; }, 0.0, 1.0, 15, 1e-14);
    const std::vector<double> integrals = {-0.5 * std::pow(4.0, double(d)),
                                           -0.7 * radial * std::pow(2.0, double(d)),
                                           -0.9 * 1.0};
    const RngStream root(101 + d, 0);
    const auto draws = parallel_map<std::vector<double>>(kReplicas, g_threads, [&](std::size_t r) {
      RngStream rs = root.substream(r);
      return sample_poisson(dom, Intensity::constant(z), rs).coords();
    });
    for (std::size_t i = 0; i < phis.size(); ++i) {
      v.expect(std::abs(phis[i].integral() - integrals[i]) <= 1e-9,
               "d=" + std::to_string(d) + " " + phis[i].label() + fmt(" integral %.10f", integrals[i]));
      std::vector<double> vals(kReplicas);
      for (std::size_t r = 0; r < kReplicas; ++r) vals[r] = laplace_factor(phis[i], draws[r], d);
      const auto e = mean_of(vals);
      expect_3se(v, "d=" + std::to_string(d) + " " + phis[i].label(), e.mean, e.std_error,
                 std::exp(z * integrals[i]));
    }
  }
  return v;
}

// ---------------------------------------------------------------- criterion 2

// Box indicator on the torus: sum over images of the jump-count mixture.
double oracle_markov_box(bool kawasaki, double t, double x, double depth, double a, double b, double L) {
  double total = 0.0;
  for (int img = -3; img <= 3; ++img) {
    const double xs = x + img * L;
    if (!kawasaki) {
      total += box_depth_mass(depth, a, b, xs, t);
      continue;
    }
    const boost::math::poisson_distribution<double> N(t);
    for (int n = 0; n < 80; ++n) total += boost::math::pdf(N, n) * box_depth_mass(depth, a, b, xs, double(n));
  }
  return total;
}

Verdict markov_laplace() {
  Verdict v;
  const double L = 40.0;
  const DomainPtr ring = make_domain(Domain::torus(1, L));
  std::vector<double> x;
  for (int i = 0; i < 50; ++i) x.push_back(7.5 + 0.5 * i);
  const Configuration cfg(ring, x);
  const TestFunction phi = TestFunction::box_indicator(0.5, Box{{18.0}, {23.0}});
  const std::vector<std::pair<KernelSpec, bool>> kernels = {
      {KernelSpec::brownian(), false}, {KernelSpec::kawasaki(JumpProfile::gaussian(1, 1.0, 1.0)), true}};
  for (const auto& [k, is_kaw] : kernels) {
    for (double t : {0.25, 1.0}) {
      const std::string tag = k.name() + fmt(" t=%.2f", t);
      double oracle = 1.0;
      for (double xi : x) oracle *= 1.0 + oracle_markov_box(is_kaw, t, xi, 0.5, 18.0, 23.0, L);
      const double analytic = analytic_laplace_markov(k, cfg, phi, t, 1e-10);
      v.expect(std::abs(analytic - oracle) <= 1e-6,
               tag + fmt(" quadrature %.12g oracle %.12g (err %.1e)", analytic, oracle, std::abs(analytic - oracle)));
      EvolutionPlan plan;
      plan.times = {t};
      plan.boundary = default_boundary(*ring);
      plan = resolve_plan(k, plan, *ring);
      const RngStream root(200 + (is_kaw ? 10 : 0) + int(4 * t), 0);
      const auto vals = parallel_map<double>(kReplicas, g_threads, [&](std::size_t r) {
        return laplace_factor(phi, simulate_snapshot_coords(cfg, k, plan, root.substream(r))[0], 1);
      });
      const auto e = mean_of(vals);
      expect_3se(v, tag, e.mean, e.std_error, oracle);
    }
  }
  return v;
}

// ---------------------------------------------------------------- criterion 3

Verdict submarkov_laplace() {
  Verdict v;
  const DomainPtr line = make_domain(Domain::full_space(Box{{-6.0}, {6.0}}));
  const TestFunction phi = TestFunction::box_indicator(0.5, Box{{-1.5}, {1.0}});
  const Configuration cfg(line, {-1.0, -0.2, 0.4, 2.0});
  const double a = 1.0, z = 1.0, t = 0.8;
  const KernelSpec k = KernelSpec::death(RateFunction::constant(a));
  double oracle = std::exp(z * (1.0 - std::exp(-a * t)) * (-0.5 * 2.5));
  for (double xi : cfg.coords()) oracle *= 1.0 + std::exp(-a * t) * phi(std::span(&xi, 1));
  const double conv = analytic_laplace_submarkov(k, cfg, phi, t, z, 1e-12);
  v.expect(std::abs(conv - oracle) <= 1e-10, fmt("convolution form %.12g vs oracle %.12g", conv, oracle));

  EvolutionPlan plan;
  plan.times = {t};
  plan.mode = EvolutionMode::SubMarkovWithImmigration;
  plan.z = z;
  plan.boundary = default_boundary(*line);
  plan = resolve_plan(k, plan, *line);
  const RngStream root(300, 0), alt(301, 0);
  const auto st = parallel_map<double>(kReplicas, g_threads, [&](std::size_t r) {
    return laplace_factor(phi, simulate_snapshot_coords(cfg, k, plan, root.substream(r))[0], 1);
  });
  const auto ev = parallel_map<double>(kReplicas, g_threads, [&](std::size_t r) {
    return laplace_factor(phi, glauber_snapshot_coords(cfg, RateFunction::constant(a), z, {t}, alt.substream(r))[0], 1);
  });
  const auto e1 = mean_of(st), e2 = mean_of(ev);
  expect_3se(v, "space-time immigration", e1.mean, e1.std_error, oracle);
  expect_3se(v, "event-driven birth-death", e2.mean, e2.std_error, oracle);
  return v;
}

// ---------------------------------------------------------------- criterion 4

// Two-time Glauber law for box test functions, integrated by hand over the
// birth time and the lifetime.
struct TwoTimeOracle {
  double a, z, t1, t2;
  double int1, int2, int12;  // int phi1, int phi2, int phi1 phi2

  double immigrant_exponent() const {
    return z * ((1.0 - std::exp(-a * t1)) * int1 +
                (std::exp(-a * (t2 - t1)) - std::exp(-a * t2)) * (int2 + int12) +
                (1.0 - std::exp(-a * (t2 - t1))) * int2);
  }
  double fixed(const std::vector<double>& x, const TestFunction& p1, const TestFunction& p2) const {
    double prod = std::exp(immigrant_exponent());
    for (double xi : x) {
      const double f1 = p1(std::span(&xi, 1)), f2 = p2(std::span(&xi, 1));
      prod *= 1.0 + std::exp(-a * t1) * f1 + std::exp(-a * t2) * (1.0 + f1) * f2;
    }
    return prod;
  }
  double poisson(double z0) const {
    return std::exp(immigrant_exponent() +
                    z0 * (std::exp(-a * t1) * int1 + std::exp(-a * t2) * (int2 + int12)));
  }
};

Verdict glauber_joint() {
  Verdict v;
  const DomainPtr line = make_domain(Domain::full_space(Box{{0.0}, {10.0}}));
  const TestFunction p1 = TestFunction::box_indicator(0.5, Box{{2.0}, {6.0}});
  const TestFunction p2 = TestFunction::box_indicator(0.4, Box{{3.0}, {8.0}});
  const std::vector<TestFunction> phis = {p1, p2};
  const std::vector<double> times = {0.5, 1.0};
  const double a = 1.0, z = 1.0, z0 = 2.0;
  const RateFunction rate = RateFunction::constant(a);
  const TwoTimeOracle o{a, z, 0.5, 1.0, -2.0, -2.0, 0.5 * 0.4 * 3.0};

  RngStream s0(400, 0);
  const Configuration fixed = sample_poisson(line, Intensity::constant(z0), s0);
  const double closed_fixed = glauber_joint_laplace(fixed, a, z, times, phis, *line);
  const double closed_pois = glauber_joint_laplace(PoissonStart{z0}, a, z, times, phis, *line);
  v.expect(std::abs(closed_fixed - o.fixed(fixed.coords(), p1, p2)) <= 1e-10,
           fmt("fixed-start closed form %.12g vs oracle %.12g", closed_fixed, o.fixed(fixed.coords(), p1, p2)));
  v.expect(std::abs(closed_pois - o.poisson(z0)) <= 1e-10,
           fmt("Poisson-start closed form %.12g vs oracle %.12g", closed_pois, o.poisson(z0)));

  const RngStream root(401, 0);
  const auto vf = parallel_map<double>(kReplicas, g_threads, [&](std::size_t r) {
    return joint_laplace_factor(phis, glauber_snapshot_coords(fixed, rate, z, times, root.substream(r)), 1);
  });
  const auto ef = mean_of(vf);
  expect_3se(v, "fixed start (" + std::to_string(fixed.size()) + " points), t=(0.5, 1)", ef.mean,
             ef.std_error, closed_fixed);

  const RngStream root2(402, 0);
  const auto vp = parallel_map<double>(kReplicas, g_threads, [&](std::size_t r) {
    const RngStream rs = root2.substream(r);
    RngStream init = rs.substream(7);
    const Configuration c = sample_poisson(line, Intensity::constant(z0), init);
    return joint_laplace_factor(phis, glauber_snapshot_coords(c, rate, z, times, rs), 1);
  });
  const auto ep = mean_of(vp);
  expect_3se(v, "Poisson(2) start, t=(0.5, 1)", ep.mean, ep.std_error, closed_pois);

  for (double t : {0.5, 1.0, 2.0}) {
    const RngStream rt(403 + int(4 * t), 0);
    const auto vs = parallel_map<double>(kReplicas, g_threads, [&](std::size_t r) {
      const RngStream rs = rt.substream(r);
      RngStream init = rs.substream(7);
      const Configuration c = sample_poisson(line, Intensity::constant(z), init);
      return laplace_factor(p1, glauber_snapshot_coords(c, rate, z, {t}, rs)[0], 1);
    });
    const auto es = mean_of(vs);
    expect_3se(v, fmt("stationarity t=%.1f", t), es.mean, es.std_error, std::exp(z * p1.integral()));
  }
  return v;
}

// ---------------------------------------------------------------- criterion 5

Verdict kawasaki_structure() {
  Verdict v;
  const DomainPtr line = make_domain(Domain::full_space(Box{{-50.0}, {50.0}}));
  const std::vector<JumpProfile> profiles = {JumpProfile::gaussian(1, 1.0, 1.0),
                                             JumpProfile::bump(1, 1.5, 1.0)};
  for (const auto& xi : profiles) {
    const KernelSpec k = KernelSpec::kawasaki(xi);
    const std::string tag = xi.shape() == JumpProfile::Shape::Gaussian ? "gaussian" : "bump";
    for (double t : {0.5, 1.0, 2.0}) {
      const GtSeries g = g_t_series(xi, t);
      const double lam = xi.mass();
      v.expect(std::abs(g.atom() - std::exp(-t * lam)) <= 1e-12, tag + fmt(" t=%.1f atom %.12g", t, g.atom()));
      const double mass = g.total_mass();
      v.expect(std::abs(mass - (1.0 - std::exp(-t * lam))) <= 1e-6,
               tag + fmt(" t=%.1f <G_t> %.10f vs %.10f", t, mass, 1.0 - std::exp(-t * lam)));
    }
    const double t = 1.0;
    const RngStream root(500 + (tag == "bump"), 0);
    const auto stay = parallel_map<double>(kReplicas, g_threads, [&](std::size_t r) {
      RngStream rs = root.substream(r);
      double x0 = 0.0;
      unsigned jumps = 0;
      advance(k, *line, std::span(&x0, 1), t, rs, &jumps);
      return jumps == 0 ? 1.0 : 0.0;
    });
    const auto e = mean_of(stay);
    expect_3se(v, tag + " empirical atom at t=1", e.mean, e.std_error, std::exp(-t * xi.mass()));

    if (xi.shape() != JumpProfile::Shape::Gaussian) continue;
    const TestFunction phi = TestFunction::bump(0.8, {0.0}, 1.0);
    const double s = 0.4, u = 0.6;
    const TestFunction inner = TestFunction::custom(
        [&](std::span<const double> y) { return apply_semigroup(k, phi, s, y, *line, 1e-11); },
        Box{{-14.0}, {14.0}}, -0.8, 0.0, "T_s phi");
    for (double x : {0.0, 0.7, 2.5}) {
      const double composed = apply_semigroup(k, inner, u, std::span(&x, 1), *line, 1e-8);
      const double direct = apply_semigroup(k, phi, s + u, std::span(&x, 1), *line, 1e-10);
      v.expect(std::abs(composed - direct) <= 1e-6,
               tag + fmt(" T_0.6 T_0.4 = T_1 at x=%.1f (err %.1e)", x, std::abs(composed - direct)));
    }
  }
  return v;
}

// ---------------------------------------------------------------- criterion 6

Verdict scaling_limit() {
  Verdict v;
  const std::vector<std::pair<StartingMeasure, std::uint64_t>> measures = {
      {StartingMeasure::poisson(1.0), 600}, {StartingMeasure::neyman_scott(2.0 / 3.0, 0.5, 0.5), 601}};
  for (const auto& [mu, seed] : measures) {
    const ScalingExperiment exp = canonical_scaling_experiment(mu);
    const ScalingReport rep = run_scaling_experiment(exp, RngStream(seed, 0), g_threads);
    std::string rows;
    for (const auto& row : rep.rows) rows += fmt(" %.2g:%.4f", row.eps, row.distance);
    v.expect(rep.monotone, rep.measure + " distances decrease:" + rows);
    v.expect(rep.final_within, rep.measure + fmt(" eps=0.1 distance %.4f < tol %.4f", rep.final_distance,
                                                 rep.final_tolerance));
  }
  return v;
}

// ---------------------------------------------------------------- criterion 7

Verdict generator_consistency() {
  Verdict v;
  struct Case {
    std::string name;
    DomainPtr dom;
    FreeDynamics dyn;
    std::vector<double> start;
    TestFunction phi;
  };
  const DomainPtr w1 = make_domain(Domain::full_space(Box{{0.0}, {10.0}}));
  const DomainPtr w2 = make_domain(Domain::full_space(Box{{-10.0}, {10.0}}));
  const std::vector<Case> cases = {
      {"L^G", w1, FreeDynamics::glauber(RateFunction::constant(1.0), 1.0), {2.5, 3.1, 4.0, 5.2, 5.6, 6.6},
       TestFunction::box_indicator(0.5, Box{{2.0}, {6.0}})},
      {"L^K", w2, FreeDynamics::kawasaki(JumpProfile::gaussian(1, 1.0, 1.0)), {-1.2, -0.3, 0.4, 1.5},
       TestFunction::bump(0.6, {0.0}, 2.0)}};
  std::uint64_t seed = 700;
  for (const auto& c : cases) {
    const Configuration cfg(c.dom, c.start);
    for (const auto& F : {CylinderFunction::linear(c.phi), CylinderFunction::exponential(c.phi, 0.5)}) {
      const auto checks = generator_fd_checks(F, cfg, c.dyn, {0.01, 0.005}, kReplicas, RngStream(seed++, 0), g_threads);
      for (const auto& ch : checks)
        v.expect(ch.within(kSigmas),
                 c.name + " " + F.label() +
                     fmt(" h=%.3f: fd %.5f generator %.5f", ch.h, ch.fd_estimate, ch.analytic) +
                     fmt(", |disc| %.2e <= 3se %.2e + |bias| %.2e", std::abs(ch.discrepancy),
                         kSigmas * ch.std_error, std::abs(ch.exact_bias.value_or(NAN))));
      const bool have = checks[0].exact_bias && checks[1].exact_bias;
      v.expect(have && std::abs(*checks[1].exact_bias) < std::abs(*checks[0].exact_bias),
               c.name + " " + F.label() +
                   fmt(" bias shrinks as h halves: %.3e -> %.3e", std::abs(checks[0].exact_bias.value_or(NAN)),
                       std::abs(checks[1].exact_bias.value_or(NAN))));
    }
  }
  return v;
}

// ---------------------------------------------------------------- criterion 8

void partitions(std::size_t mask, std::vector<std::size_t>& blocks,
                const std::function<void(const std::vector<std::size_t>&)>& f) {
  if (mask == 0) {
    f(blocks);
    return;
  }
  const std::size_t low = mask & (~mask + 1);
  const std::size_t rest = mask ^ low;
  for (std::size_t sub = rest;; sub = (sub - 1) & rest) {
    blocks.push_back(low | sub);
    partitions(rest ^ sub, blocks, f);
    blocks.pop_back();
    if (sub == 0) break;
  }
}

Verdict combinatorics() {
  Verdict v;
  std::mt19937_64 gen(800);
  std::uniform_real_distribution<double> U(-1.0, 2.0);
  double worst_round = 0.0, worst_brute = 0.0;
  std::size_t tables = 0;
  for (std::size_t n = 1; n <= 6; ++n) {
    for (int rep = 0; rep < 50; ++rep, ++tables) {
      std::vector<double> k(std::size_t(1) << n);
      k[0] = 1.0;
      for (std::size_t m = 1; m < k.size(); ++m) k[m] = U(gen);
      const auto u = ursell_from_correlations(UrsellTable::with_correlations(n, k));
      const auto back = correlations_from_ursell(UrsellTable::with_ursell(n, u.u));
      for (std::size_t m = 1; m < k.size(); ++m) worst_round = std::max(worst_round, std::abs(back.k[m] - k[m]));
      std::vector<std::size_t> blocks;
      for (std::size_t m = 1; m < k.size(); ++m) {
        double brute = 0.0;
        partitions(m, blocks, [&](const std::vector<std::size_t>& bl) {
          double p = 1.0;
          for (std::size_t b : bl) p *= u.u[b];
          brute += p;
        });
        worst_brute = std::max(worst_brute, std::abs(brute - k[m]));
      }
    }
  }
  v.expect(worst_round <= 1e-12, fmt("k -> u -> k roundtrip on %.0f random tables: max err %.1e", double(tables), worst_round));
  v.expect(worst_brute <= 1e-12, fmt("u against brute-force set partitions: max err %.1e", worst_brute));
  for (double z : {0.5, 1.0, 1.75, 2.0}) {
    std::size_t nonzero = 0;
    bool singletons = true;
    for (std::size_t n = 1; n <= 6; ++n) {
      const auto t = ursell_from_correlations(UrsellTable::poisson(n, z));
      for (std::size_t m = 1; m < t.u.size(); ++m) {
        if (std::popcount(m) == 1) singletons = singletons && t.u[m] == z;
        else if (t.u[m] != 0.0) ++nonzero;
      }
    }
    v.expect(singletons && nonzero == 0, fmt("Poisson z=%.2f: u^(1) = z and u^(n>=2) == 0 exactly", z));
  }
  return v;
}

// ---------------------------------------------------------------- criterion 9

Verdict summability() {
  Verdict v;
  const KernelSpec bm = KernelSpec::brownian();
  const KernelSpec kaw = KernelSpec::kawasaki(JumpProfile::gaussian(1, 1.0, 1.0));
  const ConvergenceReport g = check_summability(bm, 1, 2.0, 1.0, 0.1, 1.0, 1e-10);
  v.expect(g.converges && g.remainder_bound < 1e-10,
           g.method + fmt(" Brownian: sum %.6g after %.0f terms, remainder %.1e", g.sum, double(g.n_terms),
                          g.remainder_bound));
  const ConvergenceReport k = check_summability(kaw, 1, 2.0, 1.0, 0.1, 1.0, 1e-10);
  v.expect(k.converges && k.remainder_bound < 1e-10,
           k.method + fmt(" Kawasaki: sum %.6g, remainder %.1e", k.sum, k.remainder_bound));
  const double lam_eps = 0.1;
  const double moment = lam_eps + 3.0 * lam_eps * lam_eps + lam_eps * lam_eps * lam_eps;
  const bool pl = k.power_law && k.power_law->converges && std::isfinite(k.power_law->bound) &&
                  std::abs(k.power_law->zeta - M_PI * M_PI / 6.0) <= 1e-12 &&
                  std::abs(k.power_law->moment - moment) <= 1e-12;
  v.expect(pl, fmt("power law alpha=2 > m=1: zeta(2) %.12f, E Z^3 %.6f, bound %.4g",
                   k.power_law ? k.power_law->zeta : NAN, k.power_law ? k.power_law->moment : NAN,
                   k.power_law ? k.power_law->bound : NAN));
  const ConvergenceReport bad = check_summability(kaw, 1, 1.0, 1.0, 0.1, 1.0, 1e-10, 1u << 16);
  v.expect(bad.power_law && !bad.power_law->converges, "power law alpha=1 = m is not certified");

  const DomainPtr line = make_domain(Domain::full_space(Box{{-50.0}, {50.0}}));
  const Point x{0.0};
  std::uint64_t seed = 900;
  for (const auto& kern : {bm, kaw}) {
    for (double r : {0.5, 1.0, 2.0}) {
      const ExitEstimate e = exit_probability(kern, *line, x, r, 0.1, 20000, 0.001, RngStream(seed++, 0));
      v.expect(e.estimate <= e.nelson_bound + kSigmas * e.std_error,
               kern.name() + fmt(" r=%.1f exit %.4f (se %.1e) <= Nelson %.4f", r, e.estimate, e.std_error,
                                 e.nelson_bound));
    }
  }
  return v;
}

// ---------------------------------------------------------------- criterion 10

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Verdict determinism(const std::string& configs) {
  Verdict v;
  auto same_fd = [](const std::vector<FdCheck>& a, const std::vector<FdCheck>& b) {
    for (std::size_t i = 0; i < a.size(); ++i)
      if (a[i].fd_estimate != b[i].fd_estimate || a[i].std_error != b[i].std_error) return false;
    return a.size() == b.size();
  };
  const DomainPtr w = make_domain(Domain::full_space(Box{{-10.0}, {10.0}}));
  const Configuration cfg(w, {-1.2, -0.3, 0.4, 1.5});
  const auto F = CylinderFunction::exponential(TestFunction::bump(0.6, {0.0}, 2.0), 0.5);
  const auto dyn = FreeDynamics::kawasaki(JumpProfile::gaussian(1, 1.0, 1.0));
  const auto f1 = generator_fd_checks(F, cfg, dyn, {0.01}, 20000, RngStream(1000, 0), 1);
  const auto f4 = generator_fd_checks(F, cfg, dyn, {0.01}, 20000, RngStream(1000, 0), 4);
  const auto f7 = generator_fd_checks(F, cfg, dyn, {0.01}, 20000, RngStream(1000, 0), 7);
  v.expect(same_fd(f1, f4) && same_fd(f1, f7), "generator check identical with 1, 4 and 7 threads");

  ScalingExperiment exp = canonical_scaling_experiment(StartingMeasure::neyman_scott(2.0 / 3.0, 0.5, 0.5));
  exp.n_samples = 3000;
  const auto s1 = run_scaling_experiment(exp, RngStream(1001, 0), 1);
  const auto s4 = run_scaling_experiment(exp, RngStream(1001, 0), 4);
  bool same = s1.rows.size() == s4.rows.size();
  for (std::size_t i = 0; same && i < s1.rows.size(); ++i)
    same = s1.rows[i].estimate == s4.rows[i].estimate && s1.rows[i].std_error == s4.rows[i].std_error;
  v.expect(same, "scaling experiment identical with 1 and 4 threads");

  namespace fs = std::filesystem;
  const std::vector<std::tuple<std::string, std::string, std::vector<std::string>>> runs = {
      {"sample-poisson", "sample_poisson.cfg", {"configuration.csv", "laplace.json"}},
      {"laplace", "laplace_glauber.cfg", {"laplace.json", "laplace.csv"}},
      {"correlation", "correlation_poisson.cfg", {"correlation.csv"}},
      {"evolve", "evolve_kawasaki.cfg", {"snapshots.csv", "events.jsonl"}},
      {"check-summability", "summability_kawasaki.cfg", {"summability.json"}}};
  const fs::path base = fs::temp_directory_path() / "contdyn_acceptance";
  for (const auto& [cmd, file, outputs] : runs) {
    std::vector<std::string> text;
    bool ran = true;
    for (const char* th : {"1", "4", "1"}) {
      const fs::path out = base / (cmd + "_" + std::to_string(text.size()));
      fs::remove_all(out);
      std::ostringstream sink;
      auto* old = std::cout.rdbuf(sink.rdbuf());
      const int code = cli::run({"contdyn", cmd, "--config", configs + "/" + file, "--threads", th,
                                 "--out", out.string()});
      std::cout.rdbuf(old);
      ran = ran && code == 0;
      std::string all;
      for (const auto& o : outputs) all += slurp(out / o);
      text.push_back(all);
    }
    v.expect(ran && !text[0].empty() && text[0] == text[1] && text[0] == text[2],
             "cli " + cmd + ": byte-identical outputs for threads 1, 4 and a rerun");
  }
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  std::string configs = CONTDYN_CONFIG_DIR;
  bool verbose = false;
  std::vector<std::size_t> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "-v" || a == "--verbose") verbose = true;
    else if (a == "--threads" && i + 1 < argc) g_threads = unsigned(std::stoul(argv[++i]));
    else if (a == "--configs" && i + 1 < argc) configs = argv[++i];
    else if (a == "--only" && i + 1 < argc) only.push_back(std::stoul(argv[++i]));
  }
  if (g_threads == 0) g_threads = hardware_threads();

  const std::vector<std::pair<std::string, std::function<Verdict()>>> criteria = {
      {"Poisson Laplace identity", poisson_laplace},
      {"Markov Laplace identity", markov_laplace},
      {"Sub-Markov identity with immigration", submarkov_laplace},
      {"Glauber joint law", glauber_joint},
      {"Kawasaki kernel structure", kawasaki_structure},
      {"Kawasaki to Glauber scaling limit", scaling_limit},
      {"Generator consistency", generator_consistency},
      {"Ursell combinatorics", combinatorics},
      {"Summability checkers", summability},
      {"Determinism", [&] { return determinism(configs); }},
  };
  int failed = 0;
  std::size_t ran = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!only.empty() && std::find(only.begin(), only.end(), i + 1) == only.end()) continue;
    ++ran;
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[i].second();
    } catch (const std::exception& e) {
      v.expect(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!v.ok) ++failed;
    std::printf("%s %2zu %s (%.1fs)\n", v.ok ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), secs);
    if (verbose || !v.ok)
      for (const auto& l : v.lines) std::printf("       %s\n", l.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", int(ran) - failed, ran);
  return failed == 0 ? 0 : 1;
}
