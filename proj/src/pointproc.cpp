#include "contdyn/pointproc.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <random>
#include <string>
#include <unordered_set>

#include "contdyn/error.hpp"

namespace contdyn {

DomainPtr make_domain(Domain d) {
  return std::make_shared<const Domain>(std::move(d));
}

namespace {

struct PointHash {
  std::size_t d;
  const double* base;
  std::size_t operator()(std::size_t i) const {
    std::uint64_t h = 0x9E3779B97F4A7C15ULL;
    for (std::size_t k = 0; k < d; ++k) {
      double c = base[i * d + k];
      if (c == 0.0) c = 0.0;  // fold -0.0 onto +0.0
      h ^= std::bit_cast<std::uint64_t>(c) + 0x9E3779B97F4A7C15ULL + (h << 6) +
           (h >> 2);
    }
    return static_cast<std::size_t>(h);
  }
};

struct PointEq {
  std::size_t d;
  const double* base;
  bool operator()(std::size_t i, std::size_t j) const {
    for (std::size_t k = 0; k < d; ++k)
      if (base[i * d + k] != base[j * d + k]) return false;
    return true;
  }
};

}  // namespace

bool all_distinct(std::span<const double> coords, std::size_t d) {
  const std::size_t n = coords.size() / d;
  if (n < 2) return true;
  std::unordered_set<std::size_t, PointHash, PointEq> seen(
      2 * n, PointHash{d, coords.data()}, PointEq{d, coords.data()});
  for (std::size_t i = 0; i < n; ++i)
    if (!seen.insert(i).second) return false;
  return true;
}

Configuration::Configuration(DomainPtr domain) : domain_(std::move(domain)) {
  if (!domain_) throw InvalidArgument("Configuration: null domain");
}

Configuration::Configuration(DomainPtr domain, std::vector<double> coords)
    : domain_(std::move(domain)), coords_(std::move(coords)) {
  if (!domain_) throw InvalidArgument("Configuration: null domain");
  const std::size_t d = domain_->dim();
  if (coords_.size() % d != 0)
    throw InvalidArgument("Configuration: coordinate count not a multiple of d");
  for (std::size_t i = 0; i < size(); ++i) {
    for (double c : point(i))
      if (!std::isfinite(c))
        throw InvalidArgument("Configuration: nonfinite coordinate");
    if (!domain_->contains(point(i)))
      throw InvalidArgument("Configuration: point " + std::to_string(i) +
                            " lies outside the domain");
  }
  if (!all_distinct(coords_, d))
    throw InvalidArgument("Configuration: points must be pairwise distinct");
}

Configuration Configuration::from_points(DomainPtr domain,
                                         const std::vector<Point>& points) {
  std::vector<double> flat;
  const std::size_t d = domain->dim();
  flat.reserve(points.size() * d);
  for (const auto& p : points) {
    if (p.size() != d) throw InvalidArgument("dimension mismatch");
    flat.insert(flat.end(), p.begin(), p.end());
  }
  return Configuration(std::move(domain), std::move(flat));
}

Configuration Configuration::merged(const Configuration& other) const {
  if (!(*other.domain_ == *domain_))
    throw InvalidArgument("merged: configurations live on different domains");
  std::vector<double> all = coords_;
  all.insert(all.end(), other.coords_.begin(), other.coords_.end());
  return Configuration(domain_, std::move(all));
}

GridIndex::GridIndex(const Configuration& config, double cell_side)
    : config_(&config), cell_(cell_side) {
  if (!(cell_side > 0.0)) throw InvalidArgument("GridIndex: cell side must be > 0");
  const Domain& dom = config.domain();
  const std::size_t d = dom.dim();
  origin_ = dom.window().lo;
  cells_per_axis_.resize(d);
  std::size_t total = 1;
  for (std::size_t k = 0; k < d; ++k) {
    const double extent = dom.window().hi[k] - dom.window().lo[k];
    long n = std::max(1L, static_cast<long>(std::floor(extent / cell_side)));
    // Keep the table no larger than a few cells per point.
    const double cap = std::max(
        1.0, std::pow(4.0 * static_cast<double>(config.size()) + 16.0,
                      1.0 / static_cast<double>(d)));
    n = std::min(n, static_cast<long>(cap));
    cells_per_axis_[k] = n;
    total *= static_cast<std::size_t>(n);
  }
  // Torus cells must tile [0, L) exactly for wrap-around lookups.
  if (dom.is_torus()) cell_ = dom.torus_side() / static_cast<double>(cells_per_axis_[0]);
  for (std::size_t k = 1; dom.is_torus() && k < d; ++k) cells_per_axis_[k] = cells_per_axis_[0];

  auto cell_of = [&](std::span<const double> x) {
    std::size_t id = 0;
    for (std::size_t k = 0; k < d; ++k) {
      long c = static_cast<long>(std::floor((x[k] - origin_[k]) / cell_));
      c = std::clamp(c, 0L, cells_per_axis_[k] - 1);
      id = id * static_cast<std::size_t>(cells_per_axis_[k]) +
           static_cast<std::size_t>(c);
    }
    return id;
  };
  total = 1;
  for (long n : cells_per_axis_) total *= static_cast<std::size_t>(n);
  cell_start_.assign(total + 1, 0);
  std::vector<std::size_t> ids(config.size());
  for (std::size_t i = 0; i < config.size(); ++i) {
    ids[i] = cell_of(config.point(i));
    ++cell_start_[ids[i] + 1];
  }
  for (std::size_t c = 0; c < total; ++c) cell_start_[c + 1] += cell_start_[c];
  order_.resize(config.size());
  std::vector<std::size_t> fill(cell_start_.begin(), cell_start_.end() - 1);
  for (std::size_t i = 0; i < config.size(); ++i) order_[fill[ids[i]]++] = i;
}

template <class Visit>
void GridIndex::visit_ball(std::span<const double> center, double r,
                           Visit&& visit) const {
  const Domain& dom = config_->domain();
  const std::size_t d = dom.dim();
  if (center.size() != d) throw InvalidArgument("dimension mismatch");
  std::vector<long> lo(d), hi(d);
  for (std::size_t k = 0; k < d; ++k) {
    lo[k] = static_cast<long>(std::floor((center[k] - r - origin_[k]) / cell_));
    hi[k] = static_cast<long>(std::floor((center[k] + r - origin_[k]) / cell_));
    if (dom.is_torus()) {
      if (hi[k] - lo[k] + 1 >= cells_per_axis_[k]) {
        lo[k] = 0;
        hi[k] = cells_per_axis_[k] - 1;
      }
    } else {
      lo[k] = std::max(lo[k], 0L);
      hi[k] = std::min(hi[k], cells_per_axis_[k] - 1);
      if (lo[k] > hi[k]) return;
    }
  }
  std::vector<long> cur = lo;
  while (true) {
    std::size_t id = 0;
    for (std::size_t k = 0; k < d; ++k) {
      long c = cur[k];
      if (dom.is_torus()) c = ((c % cells_per_axis_[k]) + cells_per_axis_[k]) % cells_per_axis_[k];
      id = id * static_cast<std::size_t>(cells_per_axis_[k]) +
           static_cast<std::size_t>(c);
    }
    for (std::size_t p = cell_start_[id]; p < cell_start_[id + 1]; ++p) {
      const std::size_t i = order_[p];
      if (dom.distance(center, config_->point(i)) <= r) visit(i);
    }
    std::size_t k = d;
    while (k > 0) {
      --k;
      if (++cur[k] <= hi[k]) break;
      cur[k] = lo[k];
      if (k == 0) return;
    }
    if (d == 0) return;
  }
}

std::size_t GridIndex::count_in_ball(std::span<const double> center,
                                     double r) const {
  if (!(r >= 0.0)) throw InvalidArgument("radius must be >= 0");
  std::size_t n = 0;
  visit_ball(center, r, [&](std::size_t) { ++n; });
  return n;
}

std::vector<std::size_t> GridIndex::indices_in_ball(std::span<const double> center,
                                                    double r) const {
  std::vector<std::size_t> out;
  visit_ball(center, r, [&](std::size_t i) { out.push_back(i); });
  std::sort(out.begin(), out.end());
  return out;
}

std::size_t count_in_ball(const Configuration& config,
                          std::span<const double> center, double r) {
  if (!(r >= 0.0)) throw InvalidArgument("radius must be >= 0");
  std::size_t n = 0;
  for (std::size_t i = 0; i < config.size(); ++i)
    if (config.domain().distance(center, config.point(i)) <= r) ++n;
  return n;
}

namespace {

void draw_uniform(const Box& box, RngStream& rng, double* out) {
  for (std::size_t k = 0; k < box.dim(); ++k)
    out[k] = box.lo[k] + (box.hi[k] - box.lo[k]) * rng.uniform();
}

// Draws one accepted point (thinning) into `out`.
void draw_thinned(const Box& box, const Intensity& f, RngStream& rng, double* out) {
  const std::size_t d = box.dim();
  while (true) {
    draw_uniform(box, rng, out);
    if (f.is_constant() || rng.uniform() * f.sup() <= f({out, d})) return;
  }
}

}  // namespace

std::vector<double> sample_poisson_points(const Box& box,
                                          const Intensity& intensity,
                                          RngStream& rng) {
  const std::size_t d = box.dim();
  const double mass = intensity.sup() * box.volume();
  if (!std::isfinite(mass))
    throw InvalidArgument("sample_poisson: nonfinite intensity integral");
  std::vector<double> pts;
  if (mass <= 0.0) return pts;
  std::poisson_distribution<long> count(mass);
  // Proposals at rate sup, thinned to the target intensity: the accepted
  // count is Poisson(integral) and locations are i.i.d. proportional to f.
  const long n_prop = count(rng);
  std::vector<double> x(d);
  for (long j = 0; j < n_prop; ++j) {
    draw_uniform(box, rng, x.data());
    if (!intensity.is_constant() && rng.uniform() * intensity.sup() > intensity(x))
      continue;
    pts.insert(pts.end(), x.begin(), x.end());
  }
  // Redraw exact coincidences (probability zero in exact arithmetic).
  while (!all_distinct(pts, d)) {
    std::unordered_set<std::size_t, PointHash, PointEq> seen(
        2 * pts.size(), PointHash{d, pts.data()}, PointEq{d, pts.data()});
    for (std::size_t i = 0; i < pts.size() / d; ++i) {
      if (!seen.insert(i).second) {
        draw_thinned(box, intensity, rng, pts.data() + i * d);
        break;
      }
    }
  }
  return pts;
}

Configuration sample_poisson(const DomainPtr& domain, const Intensity& intensity,
                             RngStream& rng) {
  Box box = domain->window();
  std::vector<double> pts = sample_poisson_points(box, intensity, rng);
  if (domain->is_torus()) {
    for (std::size_t i = 0; i < pts.size() / domain->dim(); ++i)
      domain->wrap({pts.data() + i * domain->dim(), domain->dim()});
  }
  return Configuration(domain, std::move(pts));
}

std::vector<SpaceTimePoint> sample_poisson_space_time(const Box& box,
                                                      const RateFunction& rate,
                                                      double z, double horizon,
                                                      RngStream& rng) {
  if (!(horizon >= 0.0)) throw InvalidArgument("horizon must be >= 0");
  if (!(z >= 0.0)) throw InvalidArgument("z must be >= 0");
  std::vector<SpaceTimePoint> out;
  if (horizon == 0.0 || z == 0.0 || rate.is_zero()) return out;
  const std::vector<double> pts =
      sample_poisson_points(box, rate.scaled(z * horizon), rng);
  const std::size_t d = box.dim();
  const std::size_t n = pts.size() / d;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    SpaceTimePoint p;
    p.x.assign(pts.begin() + static_cast<long>(i * d),
               pts.begin() + static_cast<long>((i + 1) * d));
    p.t = horizon * rng.uniform();
    out.push_back(std::move(p));
  }
  std::sort(out.begin(), out.end(),
            [](const SpaceTimePoint& a, const SpaceTimePoint& b) { return a.t < b.t; });
  return out;
}

ThetaReport theta_check(const Configuration& config, double alpha, int r_max) {
  if (!(alpha >= 1.0)) throw InvalidArgument("theta_check: alpha must be >= 1");
  if (r_max < 1) throw InvalidArgument("theta_check: r_max must be >= 1");
  const std::size_t d = config.dim();
  const std::vector<double> origin(d, 0.0);
  std::vector<double> dist(config.size());
  for (std::size_t i = 0; i < config.size(); ++i)
    dist[i] = config.domain().distance(origin, config.point(i));
  std::sort(dist.begin(), dist.end());

  ThetaReport rep;
  rep.alpha = alpha;
  rep.K_min = 1;  // K ranges over N, so the vacuous bound reports 1
  for (int r = 1; r <= r_max; ++r) {
    const auto c = static_cast<std::size_t>(
        std::upper_bound(dist.begin(), dist.end(), static_cast<double>(r)) -
        dist.begin());
    rep.radii_checked.push_back(r);
    rep.counts.push_back(c);
    const double cap = std::pow(ball_volume(d, r), alpha);
    // Tolerance guards ratios that are integers in exact arithmetic.
    const double k = std::ceil(static_cast<double>(c) / cap - 1e-9);
    rep.K_min = std::max<std::uint64_t>(rep.K_min, static_cast<std::uint64_t>(std::max(k, 0.0)));
  }
  rep.member = true;
  return rep;
}

}  // namespace contdyn
