#include "contdyn/observables.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numbers>

#include "contdyn/error.hpp"
#include "contdyn/parallel.hpp"

namespace contdyn {

namespace {

std::optional<Box> meet_supports(std::span<const TestFunction* const> phis) {
  Box meet = phis.front()->support();
  for (const TestFunction* p : phis) {
    if (p->support_empty()) return std::nullopt;
    for (std::size_t i = 0; i < meet.dim(); ++i) {
      meet.lo[i] = std::max(meet.lo[i], p->support().lo[i]);
      meet.hi[i] = std::min(meet.hi[i], p->support().hi[i]);
      if (!(meet.hi[i] > meet.lo[i])) return std::nullopt;
    }
  }
  return meet;
}

// Bounding box of the union of the nonempty supports.
std::optional<Box> hull_supports(const std::vector<TestFunction>& phis) {
  std::optional<Box> hull;
  for (const auto& p : phis) {
    if (p.support_empty()) continue;
    if (!hull) {
      hull = p.support();
      continue;
    }
    for (std::size_t i = 0; i < hull->dim(); ++i) {
      hull->lo[i] = std::min(hull->lo[i], p.support().lo[i]);
      hull->hi[i] = std::max(hull->hi[i], p.support().hi[i]);
    }
  }
  return hull;
}

std::optional<Box> clip(Box b, const Box& to) {
  for (std::size_t i = 0; i < b.dim(); ++i) {
    b.lo[i] = std::max(b.lo[i], to.lo[i]);
    b.hi[i] = std::min(b.hi[i], to.hi[i]);
    if (!(b.hi[i] > b.lo[i])) return std::nullopt;
  }
  return b;
}

double product_at(std::span<const TestFunction* const> phis, std::span<const double> x) {
  double v = 1.0;
  for (const TestFunction* p : phis) v *= (*p)(x);
  return v;
}

// (prod phis) convolved with N(0, var) at p, one dimension.
double smooth_product_1d(std::span<const TestFunction* const> phis, double var, double p,
                         double abs_tol) {
  const auto meet = meet_supports(phis);
  if (!meet) return 0.0;
  bool boxes = true;
  double coef = 1.0;
  for (const TestFunction* f : phis) {
    boxes = boxes && f->family() == TestFunction::Family::BoxIndicator;
    coef *= -f->depth();
  }
  if (boxes) return coef * normal_interval(meet->lo[0], meet->hi[0], p, var);
  const double sd = std::sqrt(var);
  std::vector<double> bps;
  for (const TestFunction* f : phis) {
    auto b = f->breakpoints(0);
    bps.insert(bps.end(), b.begin(), b.end());
  }
  for (double k : {-4.0, -1.0, 0.0, 1.0, 4.0}) bps.push_back(p + k * sd);
  const double norm = 1.0 / (sd * std::sqrt(2.0 * std::numbers::pi));
  return integrate_1d(
             [&](double y) {
               const double u = (y - p) / sd;
               return product_at(phis, std::span<const double>(&y, 1)) * norm *
                      std::exp(-0.5 * u * u);
             },
             meet->lo[0], meet->hi[0], abs_tol, bps)
      .value;
}

void check_class_d(std::span<const TestFunction> phis) {
  for (const auto& p : phis)
    if (!(p.inf() > -1.0) || p.sup() > 0.0)
      throw InvalidArgument("test function " + p.label() + " is outside the class -1 < phi <= 0");
}

}  // namespace

double pairing(const TestFunction& phi, std::span<const double> coords, std::size_t d) {
  if (phi.support_empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i + d <= coords.size(); i += d) s += phi(coords.subspan(i, d));
  return s;
}

double pairing(const TestFunction& phi, const Configuration& config) {
  return pairing(phi, config.coords(), config.dim());
}

double laplace_factor(const TestFunction& phi, std::span<const double> coords, std::size_t d) {
  if (phi.support_empty()) return 1.0;
  double s = 0.0;
  for (std::size_t i = 0; i + d <= coords.size(); i += d) {
    const double v = phi(coords.subspan(i, d));
    if (v != 0.0) s += std::log1p(v);
  }
  return std::exp(s);
}

double joint_laplace_factor(std::span<const TestFunction> phis,
                            const std::vector<std::vector<double>>& snapshots, std::size_t d) {
  if (phis.size() != snapshots.size())
    throw InvalidArgument("joint Laplace: one test function per time is required");
  double v = 1.0;
  for (std::size_t i = 0; i < phis.size(); ++i) v *= laplace_factor(phis[i], snapshots[i], d);
  return v;
}

LaplaceEstimate laplace_estimate(std::span<const double> values, std::vector<double> times,
                                 std::span<const TestFunction> phis) {
  if (values.empty()) throw InvalidArgument("Laplace estimate: no samples");
  const SampleStats s = sample_stats(values);
  LaplaceEstimate e;
  e.mean = s.mean;
  e.std_error = s.std_error;
  e.n_samples = s.n;
  e.times = std::move(times);
  for (const auto& p : phis) e.functions.push_back(p.label());
  return e;
}

LaplaceEstimate empirical_laplace(const std::vector<std::vector<Configuration>>& samples,
                                  std::span<const TestFunction> phis, std::vector<double> times) {
  check_class_d(phis);
  std::vector<double> values(samples.size());
  for (std::size_t r = 0; r < samples.size(); ++r) {
    if (samples[r].size() != phis.size())
      throw InvalidArgument("empirical_laplace: one test function per time is required");
    double v = 1.0;
    for (std::size_t i = 0; i < phis.size(); ++i)
      v *= laplace_factor(phis[i], samples[r][i].coords(), samples[r][i].dim());
    values[r] = v;
  }
  return laplace_estimate(values, std::move(times), phis);
}

double analytic_laplace_markov(const KernelSpec& kernel, const Configuration& config,
                               const TestFunction& phi, double t, double abs_tol) {
  if (!kernel.conservative())
    throw InvalidArgument("analytic_laplace_markov: kernel " + kernel.name() + " is not conservative");
  if (config.empty() || phi.support_empty()) return 1.0;
  const auto tphi = apply_semigroup_many(kernel, phi, t, config.coords(), config.domain(), abs_tol);
  double s = 0.0;
  for (double v : tphi) s += std::log1p(v);
  return std::exp(s);
}

double analytic_laplace_submarkov(const KernelSpec& kernel, const Configuration& config,
                                  const TestFunction& phi, double t, double z, double abs_tol) {
  if (kernel.conservative())
    throw InvalidArgument("analytic_laplace_submarkov: kernel " + kernel.name() + " is conservative");
  if (!(z >= 0.0)) throw InvalidArgument("analytic_laplace_submarkov: z must be >= 0");
  if (phi.support_empty()) return 1.0;
  double s = 0.0;
  if (!config.empty()) {
    const auto tphi = apply_semigroup_many(kernel, phi, t, config.coords(), config.domain(), abs_tol);
    for (double v : tphi) s += std::log1p(v);
  }
  if (z > 0.0 && t > 0.0)
    s += z * (phi.integral(abs_tol * 0.1) -
              semigroup_integral(kernel, phi, t, config.domain(), abs_tol));
  return std::exp(s);
}

double cluster_generating_functional(const ClusterStart& start, const std::vector<double>& weights,
                                     const std::vector<std::vector<const TestFunction*>>& groups,
                                     const Domain& domain, double abs_tol) {
  if (!(start.kappa >= 0.0) || !(start.p2 >= 0.0 && start.p2 <= 1.0) || !(start.sigma > 0.0))
    throw InvalidArgument("cluster start: need kappa >= 0, p2 in [0, 1], sigma > 0");
  if (weights.size() != groups.size()) throw InvalidArgument("cluster functional: size mismatch");
  if (domain.dim() != 1) throw Unsupported("cluster functional: only one dimension is supported");
  std::vector<Box> meets;
  std::vector<std::size_t> live;
  double first = 0.0;
  for (std::size_t k = 0; k < groups.size(); ++k) {
    auto meet = meet_supports(groups[k]);
    if (!meet || weights[k] == 0.0) continue;
    live.push_back(k);
    meets.push_back(*meet);
    first += weights[k] * product_integral(groups[k], abs_tol * 0.1);
  }
  if (live.empty()) return 1.0;
  double lo = meets.front().lo[0], hi = meets.front().hi[0];
  for (const Box& b : meets) {
    lo = std::min(lo, b.lo[0]);
    hi = std::max(hi, b.hi[0]);
  }
  const double var = start.sigma * start.sigma;
  const double reach = 12.0 * start.sigma;
  if (domain.is_torus() && (lo - reach < 0.0 || hi + reach > domain.torus_side()))
    throw Unsupported("cluster functional: supports too close to the torus seam");
  double second = 0.0;
  if (start.p2 > 0.0) {
    std::vector<double> bps;
    for (const Box& b : meets) {
      bps.push_back(b.lo[0]);
      bps.push_back(b.hi[0]);
    }
    auto H = [&](double p) {
      double v = 0.0;
      for (std::size_t k : live) v += weights[k] * smooth_product_1d(groups[k], var, p, abs_tol * 1e-2);
      return v;
    };
    second = integrate_1d([&](double p) { const double h = H(p); return h * h; }, lo - reach,
                          hi + reach, abs_tol, bps)
                 .value;
  }
  return std::exp(start.kappa * (1.0 + start.p2) * first + start.kappa * start.p2 * second);
}

double glauber_joint_laplace(const GlauberStart& start, double a, double z,
                             std::span<const double> times, std::span<const TestFunction> phis,
                             const Domain& domain, double abs_tol) {
  const std::size_t n = times.size();
  if (n == 0 || n > 12) throw InvalidArgument("glauber_joint_laplace: need 1 to 12 times");
  if (phis.size() != n) throw InvalidArgument("glauber_joint_laplace: one test function per time");
  if (!(a >= 0.0) || !(z >= 0.0)) throw InvalidArgument("glauber_joint_laplace: a, z must be >= 0");
  for (std::size_t i = 0; i < n; ++i)
    if (times[i] < 0.0 || (i > 0 && !(times[i] > times[i - 1])))
      throw InvalidArgument("glauber_joint_laplace: times must be increasing and >= 0");
  check_class_d(phis);

  const std::size_t masks = std::size_t(1) << n;
  std::vector<std::vector<const TestFunction*>> groups;
  std::vector<double> survive;  // e^{-a t_last}
  double immigrant = 0.0;
  for (std::size_t m = 1; m < masks; ++m) {
    std::vector<const TestFunction*> g;
    for (std::size_t i = 0; i < n; ++i)
      if (m >> i & 1) g.push_back(&phis[i]);
    if (!meet_supports(g)) continue;
    const std::size_t first = std::countr_zero(m);
    const std::size_t last = std::bit_width(m) - 1;
    const double w = std::exp(-a * times[last]);
    const double span_w = std::exp(-a * (times[last] - times[first]));
    const double integral = product_integral(g, abs_tol * 0.1);
    immigrant += z * (span_w - w) * integral;
    groups.push_back(std::move(g));
    survive.push_back(w);
  }
  double log_value = immigrant;
  if (const auto* cfg = std::get_if<Configuration>(&start)) {
    for (std::size_t i = 0; i < cfg->size(); ++i) {
      double h = 0.0;
      for (std::size_t k = 0; k < groups.size(); ++k)
        h += survive[k] * product_at(groups[k], cfg->point(i));
      log_value += std::log1p(h);
    }
  } else if (const auto* p = std::get_if<PoissonStart>(&start)) {
    for (std::size_t k = 0; k < groups.size(); ++k)
      log_value += p->z * survive[k] * product_integral(groups[k], abs_tol * 0.1);
  } else {
    log_value += std::log(cluster_generating_functional(std::get<ClusterStart>(start), survive,
                                                        groups, domain, abs_tol));
  }
  return std::exp(log_value);
}

std::size_t BinGrid::size() const {
  std::size_t n = 1;
  for (std::size_t k : per_axis) n *= k;
  return n;
}

double BinGrid::cell_volume() const { return region.volume() / double(size()); }

Box BinGrid::cell(std::size_t index) const {
  Box b = region;
  for (std::size_t i = per_axis.size(); i-- > 0;) {
    const std::size_t j = index % per_axis[i];
    index /= per_axis[i];
    const double w = (region.hi[i] - region.lo[i]) / double(per_axis[i]);
    b.lo[i] = region.lo[i] + w * double(j);
    b.hi[i] = region.lo[i] + w * double(j + 1);
  }
  return b;
}

std::optional<std::size_t> BinGrid::locate(std::span<const double> x) const {
  std::size_t idx = 0;
  for (std::size_t i = 0; i < per_axis.size(); ++i) {
    if (!(x[i] >= region.lo[i] && x[i] < region.hi[i])) return std::nullopt;
    const double w = (region.hi[i] - region.lo[i]) / double(per_axis[i]);
    const auto j = std::min(per_axis[i] - 1, std::size_t((x[i] - region.lo[i]) / w));
    idx = idx * per_axis[i] + j;
  }
  return idx;
}

std::size_t CorrelationGrid::index_of(std::vector<std::size_t> tuple) const {
  std::sort(tuple.begin(), tuple.end());
  const auto it = std::lower_bound(tuples.begin(), tuples.end(), tuple);
  if (it == tuples.end() || *it != tuple) throw InvalidArgument("correlation grid: unknown bin tuple");
  return std::size_t(it - tuples.begin());
}

CorrelationGrid estimate_correlations(const std::vector<std::vector<double>>& samples,
                                      std::size_t d, std::size_t order, const BinGrid& bins) {
  if (samples.empty()) throw InvalidArgument("estimate_correlations: empty sample set");
  if (order < 1 || order > 4) throw InvalidArgument("estimate_correlations: order must be 1..4");
  if (bins.per_axis.size() != d || bins.region.dim() != d)
    throw InvalidArgument("estimate_correlations: bin grid dimension mismatch");
  for (std::size_t k : bins.per_axis)
    if (k == 0) throw InvalidArgument("estimate_correlations: empty bin axis");

  CorrelationGrid grid;
  grid.order = order;
  grid.bins = bins;
  grid.n_samples = samples.size();
  const std::size_t B = bins.size();
  std::vector<std::size_t> cur(order, 0);
  for (;;) {
    grid.tuples.push_back(cur);
    std::size_t pos = order;
    while (pos > 0 && cur[pos - 1] == B - 1) --pos;
    if (pos == 0) break;
    ++cur[pos - 1];
    for (std::size_t j = pos; j < order; ++j) cur[j] = cur[pos - 1];
  }
  const double norm = std::pow(bins.cell_volume(), double(order));
  std::vector<double> mean(grid.tuples.size(), 0.0), m2(grid.tuples.size(), 0.0);
  std::vector<double> counts(B);
  std::size_t seen = 0;
  for (const auto& coords : samples) {
    std::fill(counts.begin(), counts.end(), 0.0);
    for (std::size_t i = 0; i + d <= coords.size(); i += d)
      if (auto b = bins.locate(std::span<const double>(coords).subspan(i, d))) counts[*b] += 1.0;
    ++seen;
    for (std::size_t t = 0; t < grid.tuples.size(); ++t) {
      const auto& tup = grid.tuples[t];
      double v = 1.0;
      for (std::size_t j = 0; j < order && v != 0.0;) {
        std::size_t run = 1;
        while (j + run < order && tup[j + run] == tup[j]) ++run;
        for (std::size_t q = 0; q < run; ++q) v *= counts[tup[j]] - double(q);
        j += run;
      }
      v /= norm;
      const double delta = v - mean[t];
      mean[t] += delta / double(seen);
      m2[t] += delta * (v - mean[t]);
    }
  }
  grid.estimates = mean;
  grid.std_errors.resize(mean.size());
  for (std::size_t t = 0; t < mean.size(); ++t)
    grid.std_errors[t] = seen > 1 ? std::sqrt(m2[t] / double(seen - 1) / double(seen)) : 0.0;
  return grid;
}

CorrelationGrid estimate_correlations(const std::vector<Configuration>& samples, std::size_t order,
                                      const BinGrid& bins) {
  if (samples.empty()) throw InvalidArgument("estimate_correlations: empty sample set");
  std::vector<std::vector<double>> coords;
  coords.reserve(samples.size());
  for (const auto& c : samples) coords.push_back(c.coords());
  return estimate_correlations(coords, samples.front().dim(), order, bins);
}

UrsellTable UrsellTable::with_correlations(std::size_t n, std::vector<double> k) {
  UrsellTable t;
  t.n = n;
  t.k = std::move(k);
  if (t.k.size() == (std::size_t(1) << n)) t.k[0] = 1.0;
  return t;
}

UrsellTable UrsellTable::with_ursell(std::size_t n, std::vector<double> u) {
  UrsellTable t;
  t.n = n;
  t.u = std::move(u);
  return t;
}

UrsellTable UrsellTable::poisson(std::size_t n, double z) {
  std::vector<double> k(std::size_t(1) << n);
  for (std::size_t m = 0; m < k.size(); ++m) k[m] = std::pow(z, double(std::popcount(m)));
  return with_correlations(n, std::move(k));
}

namespace {

void check_table(std::size_t n, const std::vector<double>& v, const char* what) {
  if (n == 0 || n > kMaxUrsellPoints)
    throw InvalidArgument(std::string("Ursell table: n must be 1..") +
                          std::to_string(kMaxUrsellPoints));
  if (v.size() != (std::size_t(1) << n))
    throw InvalidArgument(std::string("Ursell table: incomplete ") + what + " values");
}

}  // namespace

// k(eta) = sum over blocks B containing min(eta) of u(B) k(eta \ B).
UrsellTable ursell_from_correlations(UrsellTable table) {
  check_table(table.n, table.k, "correlation");
  const std::size_t full = (std::size_t(1) << table.n);
  table.k[0] = 1.0;
  table.u.assign(full, 0.0);
  for (std::size_t eta = 1; eta < full; ++eta) {
    const std::size_t low = eta & (~eta + 1);
    const std::size_t rest = eta ^ low;
    double s = 0.0;
    for (std::size_t sub = rest; sub != 0; sub = (sub - 1) & rest) {
      const std::size_t block = low | (rest ^ sub);
      s += table.u[block] * table.k[eta ^ block];
    }
    table.u[eta] = table.k[eta] - s;
  }
  return table;
}

UrsellTable correlations_from_ursell(UrsellTable table) {
  check_table(table.n, table.u, "Ursell");
  const std::size_t full = (std::size_t(1) << table.n);
  table.k.assign(full, 0.0);
  table.k[0] = 1.0;
  for (std::size_t eta = 1; eta < full; ++eta) {
    const std::size_t low = eta & (~eta + 1);
    const std::size_t rest = eta ^ low;
    double s = table.u[eta];
    for (std::size_t sub = rest; sub != 0; sub = (sub - 1) & rest) {
      const std::size_t block = low | (rest ^ sub);
      s += table.u[block] * table.k[eta ^ block];
    }
    table.k[eta] = s;
  }
  return table;
}

CylinderFunction CylinderFunction::linear(TestFunction phi) {
  CylinderFunction F;
  F.kind_ = Kind::Linear;
  F.label_ = "<" + phi.label() + ", gamma>";
  F.phis_ = {std::move(phi)};
  F.g_ = [](std::span<const double> s) { return s[0]; };
  F.dg_ = [](std::span<const double>, std::span<double> o) { o[0] = 1.0; };
  F.d2g_ = [](std::span<const double>, std::span<double> o) { o[0] = 0.0; };
  return F;
}

CylinderFunction CylinderFunction::exponential(TestFunction phi, double kappa) {
  CylinderFunction F;
  F.kind_ = Kind::Exponential;
  F.kappa_ = kappa;
  F.label_ = "exp(" + std::to_string(kappa) + " <" + phi.label() + ", gamma>)";
  F.phis_ = {std::move(phi)};
  F.g_ = [kappa](std::span<const double> s) { return std::exp(kappa * s[0]); };
  F.dg_ = [kappa](std::span<const double> s, std::span<double> o) {
    o[0] = kappa * std::exp(kappa * s[0]);
  };
  F.d2g_ = [kappa](std::span<const double> s, std::span<double> o) {
    o[0] = kappa * kappa * std::exp(kappa * s[0]);
  };
  return F;
}

CylinderFunction CylinderFunction::constant(double value) {
  CylinderFunction F;
  F.kind_ = Kind::General;
  F.label_ = "constant";
  F.g_ = [value](std::span<const double>) { return value; };
  F.dg_ = [](std::span<const double>, std::span<double>) {};
  F.d2g_ = [](std::span<const double>, std::span<double>) {};
  return F;
}

CylinderFunction CylinderFunction::general(std::vector<TestFunction> phis, Outer g,
                                           OuterGradient dg, OuterHessian d2g, std::string label) {
  if (!g) throw InvalidArgument("cylinder function: outer function required");
  CylinderFunction F;
  F.kind_ = Kind::General;
  F.phis_ = std::move(phis);
  F.g_ = std::move(g);
  F.dg_ = std::move(dg);
  F.d2g_ = std::move(d2g);
  F.label_ = std::move(label);
  return F;
}

void CylinderFunction::pairings(std::span<const double> coords, std::size_t d,
                                std::span<double> out) const {
  for (std::size_t j = 0; j < phis_.size(); ++j) out[j] = pairing(phis_[j], coords, d);
}

double CylinderFunction::operator()(std::span<const double> coords, std::size_t d) const {
  std::vector<double> s(phis_.size());
  pairings(coords, d, s);
  return g_(s);
}

double CylinderFunction::operator()(const Configuration& config) const {
  return (*this)(config.coords(), config.dim());
}

double generator_apply(const CylinderFunction& F, const Configuration& config,
                       const FreeDynamics& dyn, double abs_tol) {
  const Domain& dom = config.domain();
  const std::size_t d = dom.dim();
  const auto& phis = F.inner();
  const std::size_t N = phis.size();
  if (N == 0) return 0.0;
  std::vector<double> s(N), shifted(N);
  F.pairings(config.coords(), d, s);
  const double g0 = F.outer(s);
  const auto hull = hull_supports(phis);
  if (!hull) return 0.0;
  auto phis_at = [&](std::span<const double> x, std::span<double> out) {
    for (std::size_t j = 0; j < N; ++j) out[j] = phis[j](x);
  };
  std::vector<double> px(N);

  if (dyn.kernel.is_brownian()) {
    if (!F.has_derivatives()) throw Unsupported("Brownian generator: outer derivatives required");
    for (const auto& p : phis)
      if (!p.has_derivatives())
        throw Unsupported("Brownian generator: inner function " + p.label() + " is not smooth");
    std::vector<double> grad(N), hess(N * N), gr(N * d), lap(N);
    F.outer_gradient(s, grad);
    F.outer_hessian(s, hess);
    double total = 0.0;
    for (std::size_t i = 0; i < config.size(); ++i) {
      const auto x = config.point(i);
      for (std::size_t j = 0; j < N; ++j) {
        phis[j].gradient(x, std::span<double>(gr).subspan(j * d, d));
        lap[j] = phis[j].laplacian(x);
      }
      double v = 0.0;
      for (std::size_t j = 0; j < N; ++j) {
        v += grad[j] * lap[j];
        for (std::size_t k = 0; k < N; ++k) {
          double dot = 0.0;
          for (std::size_t q = 0; q < d; ++q) dot += gr[j * d + q] * gr[k * d + q];
          v += hess[j * N + k] * dot;
        }
      }
      total += 0.5 * v;
    }
    return total;
  }

  std::vector<std::vector<double>> bps(d);
  for (const auto& p : phis)
    for (std::size_t q = 0; q < d; ++q) {
      auto b = p.breakpoints(q);
      bps[q].insert(bps[q].end(), b.begin(), b.end());
    }

  if (const RateFunction* a = dyn.kernel.is_death() ? dyn.kernel.rate() : nullptr) {
    double total = 0.0;
    for (std::size_t i = 0; i < config.size(); ++i) {
      const auto x = config.point(i);
      const double rate = (*a)(x);
      if (rate == 0.0) continue;
      phis_at(x, px);
      for (std::size_t j = 0; j < N; ++j) shifted[j] = s[j] - px[j];
      total += rate * (F.outer(shifted) - g0);
    }
    if (dyn.z > 0.0 && !a->is_zero()) {
      std::optional<Box> region = clip(*hull, dom.window());
      if (region && a->box()) region = clip(*region, *a->box());
      if (region) {
        for (std::size_t q = 0; q < d; ++q) {
          auto b = a->breakpoints(q);
          bps[q].insert(bps[q].end(), b.begin(), b.end());
        }
        std::vector<double> py(N), sy(N);
        total += dyn.z * integrate_box(
                             [&](std::span<const double> y) {
                               const double rate = (*a)(y);
                               if (rate == 0.0) return 0.0;
                               phis_at(y, py);
                               for (std::size_t j = 0; j < N; ++j) sy[j] = s[j] + py[j];
                               return rate * (F.outer(sy) - g0);
                             },
                             *region, abs_tol * 0.1, bps)
                             .value;
      }
    }
    return total;
  }

  if (const JumpProfile* xi = dyn.kernel.profile()) {
    const double reach = xi->shape() == JumpProfile::Shape::Bump ? xi->scale() : 40.0 * xi->scale();
    const bool smooth_peak = xi->shape() == JumpProfile::Shape::Gaussian;
    double total = 0.0;
    std::vector<double> py(N), sy(N), disp(d);
    for (std::size_t i = 0; i < config.size(); ++i) {
      const auto x = config.point(i);
      phis_at(x, px);
      for (std::size_t j = 0; j < N; ++j) shifted[j] = s[j] - px[j];
      const double c0 = F.outer(shifted);
      total += xi->mass() * (c0 - g0);
      if (!dom.is_torus()) {
        double dist2 = 0.0;
        for (std::size_t q = 0; q < d; ++q) {
          const double e = std::max({0.0, hull->lo[q] - x[q], x[q] - hull->hi[q]});
          dist2 += e * e;
        }
        if (std::sqrt(dist2) >= reach) continue;
      }
      auto local = bps;
      if (smooth_peak)
        for (std::size_t q = 0; q < d; ++q)
          for (double k : {-8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0})
            local[q].push_back(x[q] + k * xi->scale());
      total += integrate_box(
                   [&](std::span<const double> y) {
                     phis_at(y, py);
                     for (std::size_t j = 0; j < N; ++j) sy[j] = shifted[j] + py[j];
                     const double diff = F.outer(sy) - c0;
                     if (diff == 0.0) return 0.0;
                     dom.displacement(x, y, disp);
                     return xi->density(disp) * diff;
                   },
                   *hull, abs_tol * 0.1 / double(std::max<std::size_t>(1, config.size())), local)
                   .value;
    }
    return total;
  }
  throw Unsupported("generator_apply: no generator formula for kernel " + dyn.kernel.name());
}

double exact_cylinder_mean(const CylinderFunction& F, const Configuration& config,
                           const FreeDynamics& dyn, double t, double abs_tol) {
  const KernelSpec& k = dyn.kernel;
  const Domain& dom = config.domain();
  if (F.inner().empty()) return F.outer({});
  if (k.is_killed_brownian()) throw Unsupported("exact_cylinder_mean: killed Brownian motion");
  const TestFunction& phi = F.inner().front();
  if (F.kind() == CylinderFunction::Kind::Linear) {
    double mean = 0.0;
    if (!config.empty()) {
      const auto tphi = apply_semigroup_many(k, phi, t, config.coords(), dom, abs_tol);
      for (double v : tphi) mean += v;
    }
    if (k.is_death() && dyn.z > 0.0) {
      const auto inside = clip(phi.support(), dom.window());
      if (inside && !(*inside == phi.support()))
        throw Unsupported("exact_cylinder_mean: immigration needs the support inside the window");
      mean += dyn.z * (phi.integral(abs_tol) - semigroup_integral(k, phi, t, dom, abs_tol));
    }
    return mean;
  }
  if (F.kind() == CylinderFunction::Kind::Exponential) {
    const double kappa = F.kappa();
    if (!(kappa > 0.0)) throw Unsupported("exact_cylinder_mean: exponential F needs kappa > 0");
    const TestFunction psi = TestFunction::custom(
        [phi, kappa](std::span<const double> x) { return std::expm1(kappa * phi(x)); },
        phi.support(), std::expm1(kappa * phi.inf()), 0.0, "expm1(kappa phi)");
    if (k.conservative()) return analytic_laplace_markov(k, config, psi, t, abs_tol);
    return analytic_laplace_submarkov(k, config, psi, t, dyn.z, abs_tol);
  }
  throw Unsupported("exact_cylinder_mean: only linear and exponential cylinder functions");
}

bool FdCheck::within(double k) const {
  return std::abs(discrepancy) <= k * std_error + std::abs(exact_bias.value_or(0.0));
}

std::vector<FdCheck> generator_fd_checks(const CylinderFunction& F, const Configuration& config,
                                         const FreeDynamics& dyn, std::vector<double> hs,
                                         std::size_t n_replicas, const RngStream& rng,
                                         unsigned threads) {
  if (hs.empty() || n_replicas < 2) throw InvalidArgument("generator_fd_check: need steps and >= 2 replicas");
  std::vector<std::size_t> order(hs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return hs[a] < hs[b]; });
  std::vector<double> times;
  for (std::size_t i : order) {
    if (!(hs[i] > 0.0)) throw InvalidArgument("generator_fd_check: h must be > 0");
    times.push_back(hs[i]);
  }
  const Domain& dom = config.domain();
  const std::size_t d = dom.dim();
  const double f0 = F(config);
  EvolutionPlan plan;
  plan.times = times;
  plan.boundary = default_boundary(dom);
  plan = resolve_plan(dyn.kernel, std::move(plan), dom);
  const RateFunction* a = dyn.kernel.is_death() ? dyn.kernel.rate() : nullptr;
  if (!a && dyn.z != 0.0) throw InvalidArgument("generator_fd_check: z applies only to Glauber dynamics");

  std::vector<std::vector<double>> rates = parallel_map<std::vector<double>>(
      n_replicas, threads, [&](std::size_t r) {
        const RngStream s = rng.substream(r);
        const auto snaps = a ? glauber_snapshot_coords(config, *a, dyn.z, times, s)
                             : simulate_snapshot_coords(config, dyn.kernel, plan, s);
        std::vector<double> out(times.size());
        for (std::size_t k = 0; k < times.size(); ++k) out[k] = (F(snaps[k], d) - f0) / times[k];
        return out;
      });
  const double analytic = generator_apply(F, config, dyn);
  std::vector<FdCheck> out(hs.size());
  std::vector<double> col(n_replicas);
  for (std::size_t k = 0; k < times.size(); ++k) {
    for (std::size_t r = 0; r < n_replicas; ++r) col[r] = rates[r][k];
    const SampleStats st = sample_stats(col);
    FdCheck c;
    c.h = times[k];
    c.n_replicas = n_replicas;
    c.fd_estimate = st.mean;
    c.std_error = st.std_error;
    c.analytic = analytic;
    c.discrepancy = st.mean - analytic;
    try {
      c.exact_bias = (exact_cylinder_mean(F, config, dyn, times[k]) - f0) / times[k] - analytic;
    } catch (const Unsupported&) {
    }
    out[order[k]] = c;
  }
  return out;
}

FdCheck generator_fd_check(const CylinderFunction& F, const Configuration& config,
                           const FreeDynamics& dyn, double h, std::size_t n_replicas,
                           const RngStream& rng, unsigned threads) {
  return generator_fd_checks(F, config, dyn, {h}, n_replicas, rng, threads).front();
}

}  // namespace contdyn
