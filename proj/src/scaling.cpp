#include "contdyn/scaling.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "contdyn/error.hpp"
#include "contdyn/parallel.hpp"

namespace contdyn {

namespace {

double gaussian_density(double r2, double var, std::size_t d) {
  return std::exp(-0.5 * r2 / var) / std::pow(2.0 * std::numbers::pi * var, 0.5 * double(d));
}

}  // namespace

ScaledProfile scale_profile(const JumpProfile& xi, double eps) {
  if (!(eps > 0.0) || !std::isfinite(eps)) throw InvalidArgument("scale_profile: eps must be > 0");
  return ScaledProfile{xi, eps, xi.scaled(eps)};
}

GtSeries g_t_series(const JumpProfile& xi, double t, double tol, unsigned n_max) {
  if (!(t > 0.0) || !std::isfinite(t)) throw InvalidArgument("g_t_series: t must be > 0");
  if (!(tol > 0.0)) throw InvalidArgument("g_t_series: tol must be > 0");
  GtSeries g;
  g.xi_ = xi;
  g.t_ = t;
  const double mean = t * xi.mass();
  g.atom_ = std::exp(-mean);
  const unsigned N = std::max(1u, poisson_truncation(mean, 1.0, tol));
  if (N > n_max)
    throw NumericalError("g_t_series: tolerance needs more than n_max terms",
                         poisson_tail_above(mean, n_max));
  g.weights_.resize(N);
  for (unsigned n = 1; n <= N; ++n) g.weights_[n - 1] = poisson_pmf(mean, n);
  g.remainder_ = poisson_tail_above(mean, N);

  if (xi.shape() == JumpProfile::Shape::Bump) {
    if (xi.dim() != 1) throw Unsupported("g_t_series: bump profiles only in one dimension");
    const std::size_t K = 64;
    const double R = xi.scale();
    g.dx_ = R / double(K);
    std::vector<double> rho(2 * K + 1);
    for (std::size_t j = 0; j < rho.size(); ++j) {
      const double y = (double(j) - double(K)) * g.dx_;
      rho[j] = xi.jump_density(std::span<const double>(&y, 1));
    }
    double s = 0.0;
    for (double v : rho) s += v * g.dx_;
    for (double& v : rho) v /= s;
    g.grid_.assign(2 * N * K + 1, 0.0);
    g.grid_lo_ = -double(N * K) * g.dx_;
    std::vector<double> cur = rho;
    for (unsigned n = 1; n <= N; ++n) {
      const std::size_t offset = (N - n) * K;
      for (std::size_t i = 0; i < cur.size(); ++i) g.grid_[offset + i] += g.weights_[n - 1] * cur[i];
      if (n == N) break;
      std::vector<double> next(cur.size() + 2 * K, 0.0);
      for (std::size_t i = 0; i < cur.size(); ++i) {
        if (cur[i] == 0.0) continue;
        for (std::size_t j = 0; j < rho.size(); ++j) next[i + j] += cur[i] * rho[j] * g.dx_;
      }
      cur = std::move(next);
    }
  }
  return g;
}

double GtSeries::operator()(std::span<const double> x) const {
  if (xi_.shape() == JumpProfile::Shape::Gaussian) {
    double r2 = 0.0;
    for (double v : x) r2 += v * v;
    const double var = xi_.scale() * xi_.scale();
    double s = 0.0;
    for (std::size_t n = 1; n <= weights_.size(); ++n)
      s += weights_[n - 1] * gaussian_density(r2, double(n) * var, xi_.dim());
    return s;
  }
  const double u = (x[0] - grid_lo_) / dx_;
  if (u <= 0.0 || u >= double(grid_.size() - 1)) return 0.0;
  const std::size_t i = std::size_t(u);
  const double f = u - double(i);
  return grid_[i] * (1.0 - f) + grid_[i + 1] * f;
}

double GtSeries::truncated_mass() const {
  double s = 0.0;
  for (double w : weights_) s += w;
  return s;
}

double GtSeries::interval_mass(double lo, double hi) const {
  if (xi_.dim() != 1) throw Unsupported("GtSeries::interval_mass: one dimension only");
  if (!(hi > lo)) return 0.0;
  if (xi_.shape() == JumpProfile::Shape::Gaussian) {
    const double var = xi_.scale() * xi_.scale();
    double s = 0.0;
    for (std::size_t n = 1; n <= weights_.size(); ++n)
      s += weights_[n - 1] * normal_interval(lo, hi, 0.0, double(n) * var);
    return s;
  }
  // Exact integral of the piecewise-linear interpolant.
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < grid_.size(); ++i) {
    const double a = grid_lo_ + double(i) * dx_, b = a + dx_;
    const double l = std::max(a, lo), r = std::min(b, hi);
    if (!(r > l)) continue;
    auto at = [&](double x) { return grid_[i] + (grid_[i + 1] - grid_[i]) * (x - a) / dx_; };
    s += 0.5 * (at(l) + at(r)) * (r - l);
  }
  return s;
}

double GtSeries::total_mass(double abs_tol) const {
  const std::size_t d = xi_.dim();
  if (xi_.shape() == JumpProfile::Shape::Bump) {
    const double half = -grid_lo_;
    std::vector<double> bps;
    for (std::size_t i = 0; i < grid_.size(); i += 16) bps.push_back(grid_lo_ + double(i) * dx_);
    return integrate_1d([&](double x) { return (*this)(std::span<const double>(&x, 1)); }, -half,
                        half, abs_tol, bps)
        .value;
  }
  const double sd = xi_.scale() * std::sqrt(double(weights_.size()));
  const double reach = 40.0 * sd;
  std::vector<double> bps;
  for (std::size_t n = 1; n <= weights_.size(); n *= 2)
    for (double k : {1.0, 4.0, 10.0}) bps.push_back(k * xi_.scale() * std::sqrt(double(n)));
  std::vector<double> x(d, 0.0);
  if (d == 1) {
    std::vector<double> both = bps;
    for (double b : bps) both.push_back(-b);
    both.push_back(0.0);
    return integrate_1d(
               [&](double r) {
                 x[0] = r;
                 return (*this)(x);
               },
               -reach, reach, abs_tol, both)
        .value;
  }
  const double area = unit_sphere_area(d);
  return integrate_1d(
             [&](double r) {
               x[0] = r;
               return area * std::pow(r, double(d - 1)) * (*this)(x);
             },
             0.0, reach, abs_tol, bps)
      .value;
}

StartingMeasure StartingMeasure::poisson(double z) {
  if (!(z > 0.0) || !std::isfinite(z)) throw InvalidArgument("Poisson start: z must be > 0");
  StartingMeasure m;
  m.family_ = Family::Poisson;
  m.z_ = z;
  return m;
}

StartingMeasure StartingMeasure::neyman_scott(double kappa, double p2, double sigma) {
  if (!(kappa > 0.0) || !(p2 >= 0.0 && p2 <= 1.0) || !(sigma > 0.0))
    throw InvalidArgument("Neyman-Scott start: need kappa > 0, p2 in [0, 1], sigma > 0");
  StartingMeasure m;
  m.family_ = Family::NeymanScott;
  m.kappa_ = kappa;
  m.p2_ = p2;
  m.sigma_ = sigma;
  m.z_ = kappa * (1.0 + p2);
  return m;
}

std::string StartingMeasure::describe() const {
  std::ostringstream os;
  if (family_ == Family::Poisson) os << "poisson(z=" << z_ << ")";
  else os << "neyman_scott(kappa=" << kappa_ << ", p2=" << p2_ << ", sigma=" << sigma_ << ")";
  return os.str();
}

double StartingMeasure::k1() const { return z_; }

double StartingMeasure::u2(std::span<const double> x, std::span<const double> y) const {
  if (family_ == Family::Poisson) return 0.0;
  double r2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) r2 += (x[i] - y[i]) * (x[i] - y[i]);
  return 2.0 * kappa_ * p2_ * gaussian_density(r2, 2.0 * sigma_ * sigma_, x.size());
}

double StartingMeasure::u2_sup(std::size_t d) const {
  if (family_ == Family::Poisson) return 0.0;
  return 2.0 * kappa_ * p2_ * gaussian_density(0.0, 2.0 * sigma_ * sigma_, d);
}

double StartingMeasure::k_sup(std::size_t n, std::size_t d) const {
  if (family_ == Family::Poisson) return std::pow(z_, double(n));
  // Partitions into singletons and pairs, each contributing k1 or sup u2.
  const double U = u2_sup(d);
  double s = 0.0;
  for (std::size_t j = 0; 2 * j <= n; ++j) {
    const double logc = std::lgamma(double(n) + 1.0) - std::lgamma(double(j) + 1.0) -
                        std::lgamma(double(n - 2 * j) + 1.0) - double(j) * std::log(2.0);
    s += std::exp(logc) * std::pow(z_, double(n - 2 * j)) * std::pow(U, double(j));
  }
  return s;
}

UrsellTable StartingMeasure::ursell_table(std::span<const double> coords, std::size_t d) const {
  const std::size_t n = coords.size() / d;
  if (n == 0 || n > kMaxUrsellPoints) throw InvalidArgument("ursell_table: 1..8 points");
  std::vector<double> u(std::size_t(1) << n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    u[std::size_t(1) << i] = k1();
    for (std::size_t j = i + 1; j < n; ++j)
      u[(std::size_t(1) << i) | (std::size_t(1) << j)] =
          this->u2(coords.subspan(i * d, d), coords.subspan(j * d, d));
  }
  return correlations_from_ursell(UrsellTable::with_ursell(n, std::move(u)));
}

Configuration StartingMeasure::sample(const DomainPtr& domain, RngStream& rng) const {
  if (family_ == Family::Poisson) return sample_poisson(domain, Intensity::constant(z_), rng);
  const Domain& dom = *domain;
  const std::size_t d = dom.dim();
  const Box parents = dom.is_torus() ? dom.window() : dom.window().expanded(12.0 * sigma_);
  std::poisson_distribution<long> count(kappa_ * parents.volume());
  std::normal_distribution<double> offset(0.0, sigma_);
  const long np = count(rng);
  std::vector<double> coords, x(d), c(d);
  auto emit = [&] {
    for (std::size_t i = 0; i < d; ++i) x[i] = c[i] + offset(rng);
    if (dom.is_torus()) dom.wrap(x);
    else if (!dom.window().contains(x)) return;
    coords.insert(coords.end(), x.begin(), x.end());
  };
  for (long p = 0; p < np; ++p) {
    for (std::size_t i = 0; i < d; ++i)
      c[i] = parents.lo[i] + (parents.hi[i] - parents.lo[i]) * rng.uniform();
    emit();
    if (rng.uniform() < p2_) emit();
  }
  return Configuration(domain, std::move(coords));
}

GlauberStart StartingMeasure::glauber_start() const {
  if (family_ == Family::Poisson) return PoissonStart{z_};
  return ClusterStart{kappa_, p2_, sigma_};
}

MuConditionsReport verify_mu_conditions(const StartingMeasure& measure, std::size_t n_max,
                                        const std::vector<double>& eps_probes, std::size_t d,
                                        double tol) {
  MuConditionsReport r;
  r.measure = measure.describe();
  if (measure.family() == StartingMeasure::Family::Poisson) {
    r.gamma = 0.0;
    r.C = measure.z();
  } else {
    r.gamma = 0.5;
    r.C = 2.0 * std::max(measure.k1(), std::sqrt(measure.u2_sup(d)));
  }
  r.bound_holds = true;
  for (std::size_t n = 1; n <= n_max; ++n) {
    CorrelationBoundRow row;
    row.n = n;
    row.k_sup = measure.k_sup(n, d);
    row.bound = std::exp(r.gamma * std::lgamma(double(n) + 1.0) + double(n) * std::log(r.C));
    if (row.k_sup > row.bound * (1.0 + 1e-12)) r.bound_holds = false;
    r.bound_rows.push_back(row);
  }
  if (!r.bound_holds) r.reasons.push_back("correlation bound (n!)^gamma C^n violated");

  // Stationary families: compare u2 on shifted probe pairs.
  const std::vector<double> x = std::vector<double>(d, 0.3), y = std::vector<double>(d, -0.4);
  for (double shift : {1.7, -13.0, 250.0}) {
    std::vector<double> xs = x, ys = y;
    for (std::size_t i = 0; i < d; ++i) {
      xs[i] += shift;
      ys[i] += shift;
    }
    if (std::abs(measure.u2(xs, ys) - measure.u2(x, y)) > 1e-14 * (1.0 + measure.u2(x, y)))
      r.translation_invariant = false;
  }
  if (!r.translation_invariant) r.reasons.push_back("not translation invariant");

  std::vector<double> sorted = eps_probes;
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  std::vector<double> origin(d, 0.0), probe(d, 0.0);
  for (double eps : sorted) {
    if (!(eps > 0.0)) throw InvalidArgument("verify_mu_conditions: probes must be > 0");
    probe[0] = 1.0 / eps;
    r.probes.push_back({eps, measure.u2(probe, origin)});
  }
  if (measure.family() == StartingMeasure::Family::Poisson) {
    const auto table = ursell_from_correlations(
        UrsellTable::poisson(std::min<std::size_t>(n_max, kMaxUrsellPoints), measure.z()));
    bool zero = true;
    for (std::size_t m = 1; m < table.u.size(); ++m)
      if (std::popcount(m) > 1 && std::abs(table.u[m]) > 1e-12) zero = false;
    r.decay_holds = zero;
    r.decay_method = "Ursell functions of order >= 2 vanish identically";
  } else {
    bool decreasing = true;
    for (std::size_t i = 1; i < r.probes.size(); ++i)
      if (r.probes[i].u2 > r.probes[i - 1].u2) decreasing = false;
    r.decay_holds = decreasing && (!r.probes.empty() && r.probes.back().u2 < tol);
    r.decay_method = "pointwise probe u2(x/eps, 0) at x = 1, a proxy for convergence in measure";
  }
  if (!r.decay_holds) r.reasons.push_back("Ursell decay under scaling not confirmed");
  r.admissible = r.bound_holds && r.translation_invariant && r.decay_holds;
  return r;
}

ScalingExperiment canonical_scaling_experiment(const StartingMeasure& measure) {
  ScalingExperiment e;
  e.measure = measure;
  e.xi = JumpProfile::gaussian(1, 1.0, 1.0);
  e.domain = make_domain(Domain::torus(1, 100.0));
  e.times = {0.5, 1.0};
  const TestFunction phi = TestFunction::box_indicator(0.8, Box{{48.5}, {51.5}});
  e.phis = {phi, phi};
  return e;
}

ScalingReport run_scaling_experiment(const ScalingExperiment& exp, const RngStream& rng,
                                     unsigned threads) {
  if (!exp.domain) throw InvalidArgument("scaling experiment: domain missing");
  const Domain& dom = *exp.domain;
  if (!dom.is_torus()) throw InvalidArgument("scaling experiment: torus domain required");
  if (exp.phis.size() != exp.times.size() || exp.times.empty())
    throw InvalidArgument("scaling experiment: one test function per time");
  if (exp.eps_schedule.empty()) throw InvalidArgument("scaling experiment: empty eps schedule");
  for (std::size_t i = 0; i < exp.eps_schedule.size(); ++i)
    if (!(exp.eps_schedule[i] > 0.0) || (i > 0 && !(exp.eps_schedule[i] < exp.eps_schedule[i - 1])))
      throw InvalidArgument("scaling experiment: eps schedule must decrease and stay > 0");
  if (exp.n_samples < 2) throw InvalidArgument("scaling experiment: need at least 2 samples");
  if (rng.depth() != 0) throw InvalidArgument("scaling experiment: pass a root stream");
  if (exp.xi.dim() != dom.dim()) throw InvalidArgument("scaling experiment: profile dimension");

  const auto mu = verify_mu_conditions(exp.measure, 20, exp.decay_probes, dom.dim());
  if (!mu.admissible) {
    std::string why;
    for (const auto& s : mu.reasons) why += (why.empty() ? "" : "; ") + s;
    throw InvalidArgument("scaling experiment: inadmissible starting measure: " + why);
  }

  ScalingReport rep;
  rep.measure = exp.measure.describe();
  rep.eps_schedule = exp.eps_schedule;
  rep.times = exp.times;
  rep.n_samples = exp.n_samples;
  rep.target = glauber_joint_laplace(exp.measure.glauber_start(), exp.xi.mass(), exp.measure.k1(),
                                     exp.times, exp.phis, dom);
  rep.notes.push_back("target: Glauber joint closed form with a = <xi> = " +
                      std::to_string(exp.xi.mass()) + ", z = k1 = " +
                      std::to_string(exp.measure.k1()));
  if (exp.common_random_numbers)
    rep.notes.push_back("common random numbers: replica r reuses its stream at every eps");

  const std::size_t d = dom.dim();
  for (std::size_t e = 0; e < exp.eps_schedule.size(); ++e) {
    const KernelSpec k = KernelSpec::kawasaki(scale_profile(exp.xi, exp.eps_schedule[e]).profile);
    EvolutionPlan plan;
    plan.times = exp.times;
    plan.boundary = default_boundary(dom);
    const auto values = parallel_map<double>(exp.n_samples, threads, [&](std::size_t r) {
      const RngStream rs =
          rng.substream(exp.common_random_numbers ? r : e * exp.n_samples + r);
      RngStream init = rs.substream(7);
      const Configuration start = exp.measure.sample(exp.domain, init);
      return joint_laplace_factor(exp.phis, simulate_snapshot_coords(start, k, plan, rs), d);
    });
    const auto st = sample_stats(values);
    rep.rows.push_back({exp.eps_schedule[e], st.mean, st.std_error, std::abs(st.mean - rep.target)});
  }
  rep.monotone = true;
  for (std::size_t i = 1; i < rep.rows.size(); ++i)
    if (!(rep.rows[i].distance < rep.rows[i - 1].distance) &&
        !(rep.rows[i].distance == 0.0 && rep.rows[i - 1].distance == 0.0))
      rep.monotone = false;
  rep.final_distance = rep.rows.back().distance;
  rep.final_tolerance = std::max(3.0 * rep.rows.back().std_error, 0.01);
  rep.final_within = rep.final_distance < rep.final_tolerance;
  return rep;
}

}  // namespace contdyn
