#include "contdyn/kernels.hpp"

#include <algorithm>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/zeta.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "contdyn/error.hpp"
#include "contdyn/numerics.hpp"

namespace contdyn {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

inline double bump_shape(double s) {
  if (s >= 1.0) return 0.0;
  return std::exp(1.0 - 1.0 / (1.0 - s));
}

// int_lo^1 b(u^2) u^(d-1) du
double bump_radial(std::size_t d, double lo) {
  if (lo >= 1.0) return 0.0;
  const double dd = static_cast<double>(d);
  return integrate_1d([dd](double u) { return bump_shape(u * u) * std::pow(u, dd - 1.0); },
                      std::max(lo, 0.0), 1.0, 1e-14)
      .value;
}

double exp_sample(RngStream& rng, double rate) { return -std::log(rng.uniform()) / rate; }

void brownian_step(std::span<double> x, double dt, RngStream& rng) {
  std::normal_distribution<double> n01;
  const double s = std::sqrt(dt);
  for (double& c : x) c += s * n01(rng);
}

void wrap_in_place(const Domain& domain, std::span<double> x) {
  if (domain.is_torus()) domain.wrap(x);
}

void check_dims(const Domain& domain, std::span<const double> x) {
  if (x.size() != domain.dim())
    throw InvalidArgument("point dimension does not match the domain");
}

}  // namespace

// ---------------------------------------------------------------- profile

JumpProfile JumpProfile::gaussian(std::size_t d, double mass, double sigma) {
  if (d == 0) throw InvalidArgument("jump profile: dimension must be >= 1");
  if (!(mass > 0.0) || !std::isfinite(mass))
    throw InvalidArgument("jump profile: mass must be finite and > 0");
  if (!(sigma > 0.0) || !std::isfinite(sigma))
    throw InvalidArgument("jump profile: sigma must be finite and > 0");
  JumpProfile p;
  p.shape_ = Shape::Gaussian;
  p.dim_ = d;
  p.mass_ = mass;
  p.scale_ = sigma;
  p.norm_ = std::pow(2.0 * std::numbers::pi * sigma * sigma, 0.5 * static_cast<double>(d));
  return p;
}

JumpProfile JumpProfile::bump(std::size_t d, double mass, double radius) {
  if (d == 0) throw InvalidArgument("jump profile: dimension must be >= 1");
  if (!(mass > 0.0) || !std::isfinite(mass))
    throw InvalidArgument("jump profile: mass must be finite and > 0");
  if (!(radius > 0.0) || !std::isfinite(radius))
    throw InvalidArgument("jump profile: radius must be finite and > 0");
  JumpProfile p;
  p.shape_ = Shape::Bump;
  p.dim_ = d;
  p.mass_ = mass;
  p.scale_ = radius;
  p.norm_ = unit_sphere_area(d) * std::pow(radius, static_cast<double>(d)) * bump_radial(d, 0.0);
  return p;
}

double JumpProfile::jump_density(std::span<const double> y) const {
  double s = 0.0;
  for (double c : y) s += c * c;
  if (shape_ == Shape::Gaussian)
    return std::exp(-0.5 * s / (scale_ * scale_)) / norm_;
  return bump_shape(s / (scale_ * scale_)) / norm_;
}

double JumpProfile::density(std::span<const double> y) const {
  return mass_ * jump_density(y);
}

double JumpProfile::jump_tail(double s) const {
  if (s <= 0.0) return 1.0;
  if (shape_ == Shape::Gaussian)
    return gamma_q(0.5 * static_cast<double>(dim_), 0.5 * s * s / (scale_ * scale_));
  if (s >= scale_) return 0.0;
  return bump_radial(dim_, s / scale_) / bump_radial(dim_, 0.0);
}

void JumpProfile::sample_jump(RngStream& rng, std::span<double> out) const {
  if (shape_ == Shape::Gaussian) {
    std::normal_distribution<double> n01;
    for (double& c : out) c = scale_ * n01(rng);
    return;
  }
  // Rejection from the enclosing cube; the shape is bounded by 1.
  for (;;) {
    double s = 0.0;
    for (double& c : out) {
      c = scale_ * (2.0 * rng.uniform() - 1.0);
      s += c * c;
    }
    if (rng.uniform() < bump_shape(s / (scale_ * scale_))) return;
  }
}

JumpProfile JumpProfile::scaled(double eps) const {
  if (!(eps > 0.0) || !std::isfinite(eps))
    throw InvalidArgument("scale factor must be finite and > 0");
  return shape_ == Shape::Gaussian ? gaussian(dim_, mass_, scale_ / eps)
                                   : bump(dim_, mass_, scale_ / eps);
}

std::string JumpProfile::describe() const {
  std::ostringstream os;
  os << (shape_ == Shape::Gaussian ? "gaussian" : "bump") << "(d=" << dim_
     << ", mass=" << mass_ << (shape_ == Shape::Gaussian ? ", sigma=" : ", radius=")
     << scale_ << ")";
  return os.str();
}

// ----------------------------------------------------------------- kernel

KernelSpec KernelSpec::death(RateFunction a) {
  if (!std::isfinite(a.sup())) throw InvalidArgument("death rate must be bounded");
  return KernelSpec(Death{std::move(a)});
}

KernelSpec KernelSpec::kawasaki(JumpProfile profile) {
  return KernelSpec(Kawasaki{std::move(profile)});
}

KernelSpec KernelSpec::killed_brownian(RateFunction a, double h_kill) {
  if (!std::isfinite(a.sup())) throw InvalidArgument("killing rate must be bounded");
  if (h_kill < 0.0) throw InvalidArgument("h_kill must be >= 0");
  return KernelSpec(KilledBrownian{std::move(a), h_kill});
}

const RateFunction* KernelSpec::rate() const {
  if (auto* d = std::get_if<Death>(&v_)) return &d->rate;
  if (auto* k = std::get_if<KilledBrownian>(&v_)) return &k->rate;
  return nullptr;
}

const JumpProfile* KernelSpec::profile() const {
  if (auto* k = std::get_if<Kawasaki>(&v_)) return &k->profile;
  return nullptr;
}

std::string KernelSpec::name() const {
  if (is_brownian()) return "brownian";
  if (is_death()) return "death";
  if (is_kawasaki()) return "kawasaki";
  return "killed_brownian";
}

// ------------------------------------------------------------ propagation

std::optional<double> advance(const KernelSpec& kernel, const Domain& domain,
                              std::span<double> x, double dt, RngStream& rng,
                              unsigned* jumps) {
  if (dt < 0.0) throw InvalidArgument("propagate: t must be >= 0");
  if (dt == 0.0) return std::nullopt;
  return std::visit(
      [&](const auto& k) -> std::optional<double> {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, Brownian>) {
          brownian_step(x, dt, rng);
          wrap_in_place(domain, x);
          return std::nullopt;
        } else if constexpr (std::is_same_v<K, Death>) {
          const double a = k.rate(x);
          if (a <= 0.0) return std::nullopt;
          const double tau = exp_sample(rng, a);
          if (tau <= dt) return tau;
          return std::nullopt;
        } else if constexpr (std::is_same_v<K, Kawasaki>) {
          const double mean = k.profile.mass() * dt;
          std::poisson_distribution<unsigned> pois(mean);
          const unsigned n = pois(rng);
          if (n > 0) {
            double buf[8];
            std::vector<double> big;
            std::span<double> y;
            if (x.size() <= 8) {
              y = std::span<double>(buf, x.size());
            } else {
              big.resize(x.size());
              y = big;
            }
            for (unsigned j = 0; j < n; ++j) {
              k.profile.sample_jump(rng, y);
              for (std::size_t i = 0; i < x.size(); ++i) x[i] += y[i];
            }
            wrap_in_place(domain, x);
          }
          if (jumps) *jumps += n;
          return std::nullopt;
        } else {
          const double amax = k.rate.sup();
          if (amax <= 0.0) {
            brownian_step(x, dt, rng);
            wrap_in_place(domain, x);
            return std::nullopt;
          }
          if (k.rate.is_constant()) {
            const double tau = exp_sample(rng, amax);
            if (tau <= dt) return tau;
            brownian_step(x, dt, rng);
            wrap_in_place(domain, x);
            return std::nullopt;
          }
          // Thinning of a rate-amax Poisson clock along the exact path.
          double s = 0.0;
          for (;;) {
            const double e = exp_sample(rng, amax);
            if (s + e >= dt) {
              brownian_step(x, dt - s, rng);
              wrap_in_place(domain, x);
              return std::nullopt;
            }
            brownian_step(x, e, rng);
            wrap_in_place(domain, x);
            s += e;
            if (rng.uniform() * amax < k.rate(x)) return s;
          }
        }
      },
      kernel.variant());
}

Propagation propagate(const KernelSpec& kernel, const Domain& domain,
                      std::span<const double> x, double t, RngStream& rng) {
  check_dims(domain, x);
  if (t < 0.0) throw InvalidArgument("propagate: t must be >= 0");
  Point y(x.begin(), x.end());
  if (auto death = advance(kernel, domain, y, t, rng)) return Dead{*death};
  return Alive{std::move(y)};
}

// ------------------------------------------------------ gaussian smoothing

namespace {

// Breakpoints resolving a Gaussian peak of standard deviation sd centred at
// c (and its periodic images when L > 0) inside [lo, hi].
std::vector<double> peak_breakpoints(double c, double sd, double lo, double hi,
                                     double L) {
  std::vector<double> out;
  const double offsets[] = {-8.0, -4.0, -2.0, -1.0, 0.0, 1.0, 2.0, 4.0, 8.0};
  auto add = [&](double centre) {
    for (double o : offsets) {
      const double p = centre + o * sd;
      if (p > lo && p < hi) out.push_back(p);
    }
  };
  if (L > 0.0) {
    if (8.0 * sd >= 0.5 * L) return out;
    const double k0 = std::floor((lo - 8.0 * sd - c) / L);
    const double k1 = std::ceil((hi + 8.0 * sd - c) / L);
    for (double k = k0; k <= k1; k += 1.0) add(c + k * L);
  } else {
    add(c);
  }
  return out;
}

}  // namespace

double gaussian_smooth(const TestFunction& phi, double var,
                       std::span<const double> x, const Domain& domain,
                       double abs_tol) {
  check_dims(domain, x);
  if (var < 0.0) throw InvalidArgument("gaussian_smooth: variance must be >= 0");
  if (phi.support_empty()) return 0.0;
  if (var == 0.0) return phi(x);
  const std::size_t d = domain.dim();
  const bool torus = domain.is_torus();
  const double L = torus ? domain.torus_side() : 0.0;
  const double sd = std::sqrt(var);
  const Box& S = phi.support();

  if (phi.family() == TestFunction::Family::BoxIndicator) {
    double p = 1.0;
    for (std::size_t i = 0; i < d; ++i) {
      p *= torus ? wrapped_normal_interval(S.lo[i], S.hi[i], x[i], var, L)
                 : normal_interval(S.lo[i], S.hi[i], x[i], var);
      if (p == 0.0) return 0.0;
    }
    return -phi.depth() * p;
  }

  Box region = S;
  std::vector<std::vector<double>> bps(d);
  for (std::size_t i = 0; i < d; ++i) {
    if (!torus) {
      region.lo[i] = std::max(region.lo[i], x[i] - 12.0 * sd);
      region.hi[i] = std::min(region.hi[i], x[i] + 12.0 * sd);
      if (region.hi[i] <= region.lo[i]) return 0.0;
    }
    bps[i] = peak_breakpoints(x[i], sd, region.lo[i], region.hi[i], L);
    auto b = phi.breakpoints(i);
    bps[i].insert(bps[i].end(), b.begin(), b.end());
  }
  auto integrand = [&](std::span<const double> y) {
    double w = 1.0;
    for (std::size_t i = 0; i < d; ++i) {
      w *= torus ? wrapped_normal_density(y[i], x[i], var, L)
                 : std::exp(-0.5 * (y[i] - x[i]) * (y[i] - x[i]) / var) /
                       std::sqrt(2.0 * std::numbers::pi * var);
    }
    return w == 0.0 ? 0.0 : w * phi(y);
  };
  return integrate_box(integrand, region, abs_tol, bps).value;
}

// ------------------------------------------------------ kawasaki semigroup

namespace {

double kawasaki_gaussian(const JumpProfile& p, const TestFunction& phi, double t,
                         std::span<const double> x, const Domain& domain,
                         double tol) {
  const double mean = p.mass() * t;
  const unsigned N = poisson_truncation(mean, phi.sup_abs(), 0.5 * tol);
  const double per_term = 0.5 * tol / static_cast<double>(N + 1);
  double total = std::exp(-mean) * phi(x);
  for (unsigned n = 1; n <= N; ++n) {
    const double w = poisson_pmf(mean, n);
    if (w == 0.0) continue;
    const double var = static_cast<double>(n) * p.scale() * p.scale();
    total += w * gaussian_smooth(phi, var, x, domain, std::min(1e-2, per_term / w));
  }
  return total;
}

// d = 1 bump profile: exact first convolution by quadrature on a grid
// anchored at x, further convolutions by the trapezoid rule on that grid.
double kawasaki_bump_grid(const JumpProfile& p, const TestFunction& phi,
                          double mean, unsigned N, std::span<const double> x,
                          const Domain& domain, int H) {
  const double R = p.scale();
  const double h = R / H;
  const double x0 = x[0];
  auto eval_phi = [&](double y) {
    double c[1] = {y};
    if (domain.is_torus()) domain.wrap(std::span<double>(c, 1));
    return phi(std::span<const double>(c, 1));
  };
  double total = std::exp(-mean) * phi(x);
  if (N == 0) return total;
  // weights of the jump density on the grid, normalized to unit mass
  std::vector<double> w(2 * H + 1);
  double ws = 0.0;
  for (int j = -H; j <= H; ++j) {
    double u[1] = {j * h};
    w[j + H] = p.jump_density(std::span<const double>(u, 1));
    ws += w[j + H];
  }
  for (double& v : w) v /= ws;
  const double L = domain.is_torus() ? domain.torus_side() : 0.0;
  std::vector<double> bps;
  for (double b : phi.breakpoints(0)) {
    bps.push_back(b);
    if (L > 0.0) {
      bps.push_back(b - L);
      bps.push_back(b + L);
    }
  }
  // f1(x0 + i h) for |i| <= (N - 1) H
  const int span1 = static_cast<int>(N - 1) * H;
  std::vector<double> f(2 * span1 + 1);
  for (int i = -span1; i <= span1; ++i) {
    const double c = x0 + i * h;
    auto g = [&](double y) {
      double u[1] = {y - c};
      return p.jump_density(std::span<const double>(u, 1)) * eval_phi(y);
    };
    f[i + span1] = integrate_1d(g, c - R, c + R, 1e-13, bps).value;
  }
  total += poisson_pmf(mean, 1) * f[span1];
  int span = span1;
  for (unsigned n = 2; n <= N; ++n) {
    const int nspan = span - H;
    std::vector<double> g(2 * nspan + 1);
    for (int i = -nspan; i <= nspan; ++i) {
      double s = 0.0;
      for (int j = -H; j <= H; ++j) s += w[j + H] * f[i + j + span];
      g[i + nspan] = s;
    }
    f = std::move(g);
    span = nspan;
    total += poisson_pmf(mean, n) * f[span];
  }
  return total;
}

double kawasaki_bump(const JumpProfile& p, const TestFunction& phi, double t,
                     std::span<const double> x, const Domain& domain, double tol) {
  if (domain.dim() != 1)
    throw Unsupported("bump jump profile semigroup is implemented in d = 1 only");
  const double mean = p.mass() * t;
  const unsigned N = poisson_truncation(mean, phi.sup_abs(), 0.5 * tol);
  const double fine = kawasaki_bump_grid(p, phi, mean, N, x, domain, 256);
  const double coarse = kawasaki_bump_grid(p, phi, mean, N, x, domain, 128);
  const double err = std::abs(fine - coarse);
  if (err > 0.5 * tol)
    throw NumericalError("kawasaki semigroup (bump profile): grid error " +
                             std::to_string(err) + " above tolerance",
                         err);
  return fine;
}

// ----------------------------------------------------- Feynman-Kac grid

// Solution of v_t = (1/2) v'' - a v, v(0) = f on a uniform 1-D grid, by
// Strang splitting with an exactly integrated first step.
struct FkGrid {
  double x0 = 0.0;
  double dx = 1.0;
  std::vector<double> v;

  double at(double x) const {
    const double s = (x - x0) / dx;
    const long n = static_cast<long>(v.size());
    long i = static_cast<long>(std::floor(s));
    i = std::clamp(i, 1L, n - 3);
    const double u = s - static_cast<double>(i);
    const double p0 = v[i - 1], p1 = v[i], p2 = v[i + 1], p3 = v[i + 2];
    // cubic Lagrange through i-1 .. i+2
    return p0 * (-u * (u - 1) * (u - 2) / 6) + p1 * ((u + 1) * (u - 1) * (u - 2) / 2) +
           p2 * (-(u + 1) * u * (u - 2) / 2) + p3 * ((u + 1) * u * (u - 1) / 6);
  }
  double integral() const {
    double s = 0.0;
    for (double c : v) s += c;
    return s * dx;
  }
};

FkGrid fk_solve(const RateFunction& a, const std::function<double(double)>& f,
                const std::vector<double>& f_breaks, double t, double lo,
                double hi, std::size_t steps) {
  const double tau = t / static_cast<double>(steps);
  double dx = std::sqrt(tau) / 4.0;
  // Place rate discontinuities midway between grid nodes, so that the
  // pointwise potential is exact cell by cell.
  std::vector<double> rb = a.breakpoints(0);
  std::sort(rb.begin(), rb.end());
  if (rb.size() >= 2 && rb.back() > rb.front()) {
    const double w = rb.back() - rb.front();
    dx = w / std::ceil(w / dx);
  }
  if (!rb.empty()) {
    const double anchor = rb.front() + 0.5 * dx;
    lo = anchor - std::ceil((anchor - lo) / dx) * dx;
  }
  const long M = static_cast<long>(std::ceil((hi - lo) / dx)) + 1;
  FkGrid g;
  g.x0 = lo;
  g.dx = dx;
  g.v.assign(M, 0.0);
  auto rate_at = [&](double y) {
    double c[1] = {y};
    return a(std::span<const double>(c, 1));
  };
  std::vector<double> half(M);
  for (long i = 0; i < M; ++i) half[i] = std::exp(-0.5 * tau * rate_at(lo + i * dx));

  std::vector<double> bps = f_breaks;
  for (double b : a.breakpoints(0)) bps.push_back(b);
  const double sd = std::sqrt(tau);
  for (long i = 0; i < M; ++i) {
    const double c = lo + i * dx;
    auto integrand = [&](double y) {
      const double z = (y - c) / sd;
      return std::exp(-0.5 * z * z) / (sd * std::sqrt(2.0 * std::numbers::pi)) *
             std::exp(-0.5 * tau * rate_at(y)) * f(y);
    };
    std::vector<double> local = bps;
    local.push_back(c);
    g.v[i] = half[i] * integrate_1d(integrand, c - 10.0 * sd, c + 10.0 * sd, 1e-11, local).value;
  }

  const int K = static_cast<int>(std::ceil(8.0 * sd / dx));
  std::vector<double> w(2 * K + 1);
  double ws = 0.0;
  for (int j = -K; j <= K; ++j) {
    const double z = j * dx / sd;
    w[j + K] = std::exp(-0.5 * z * z);
    ws += w[j + K];
  }
  for (double& c : w) c /= ws;

  std::vector<double> u(M + 2 * K), next(M);
  for (std::size_t s = 1; s < steps; ++s) {
    for (long i = 0; i < M; ++i) u[i + K] = half[i] * g.v[i];
    for (int j = 0; j < K; ++j) {
      u[j] = u[K];
      u[M + K + j] = u[M + K - 1];
    }
    for (long i = 0; i < M; ++i) {
      double acc = 0.0;
      const double* up = &u[i];
      for (int j = 0; j <= 2 * K; ++j) acc += w[j] * up[j];
      next[i] = half[i] * acc;
    }
    g.v.swap(next);
  }
  return g;
}

std::size_t fk_steps(const KilledBrownian& k, double t) {
  if (k.h_kill > 0.0) return std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(t / k.h_kill)));
  return 1000;
}

void require_fk_supported(const KilledBrownian& k, const Domain& domain) {
  if (k.rate.is_constant()) return;
  if (domain.dim() != 1 || domain.is_torus())
    throw Unsupported(
        "killed Brownian motion with a non-constant rate is supported on the "
        "full line only");
}

FkGrid killed_grid(const KilledBrownian& k, const TestFunction& phi, double t,
                   double lo, double hi) {
  auto f = [&](double y) {
    double c[1] = {y};
    return phi(std::span<const double>(c, 1));
  };
  return fk_solve(k.rate, f, phi.breakpoints(0), t, lo, hi, fk_steps(k, t));
}

}  // namespace

// ---------------------------------------------------------- semigroups

double apply_semigroup(const KernelSpec& kernel, const TestFunction& phi,
                       double t, std::span<const double> x,
                       const Domain& domain, double abs_tol) {
  check_dims(domain, x);
  if (t < 0.0) throw InvalidArgument("apply_semigroup: t must be >= 0");
  if (phi.dim() != domain.dim())
    throw InvalidArgument("apply_semigroup: test function dimension mismatch");
  if (t == 0.0 || phi.support_empty()) return phi(x);
  return std::visit(
      [&](const auto& k) -> double {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, Brownian>) {
          return gaussian_smooth(phi, t, x, domain, abs_tol);
        } else if constexpr (std::is_same_v<K, Death>) {
          return std::exp(-k.rate(x) * t) * phi(x);
        } else if constexpr (std::is_same_v<K, Kawasaki>) {
          if (k.profile.shape() == JumpProfile::Shape::Gaussian)
            return kawasaki_gaussian(k.profile, phi, t, x, domain, abs_tol);
          return kawasaki_bump(k.profile, phi, t, x, domain, abs_tol);
        } else {
          if (k.rate.is_constant())
            return std::exp(-k.rate.value() * t) * gaussian_smooth(phi, t, x, domain, abs_tol);
          require_fk_supported(k, domain);
          const double r = 12.0 * std::sqrt(t);
          return killed_grid(k, phi, t, x[0] - r, x[0] + r).at(x[0]);
        }
      },
      kernel.variant());
}

std::vector<double> apply_semigroup_many(const KernelSpec& kernel,
                                         const TestFunction& phi, double t,
                                         std::span<const double> coords,
                                         const Domain& domain, double abs_tol) {
  const std::size_t d = domain.dim();
  const std::size_t n = coords.size() / d;
  std::vector<double> out(n);
  if (const auto* k = std::get_if<KilledBrownian>(&kernel.variant());
      k && !k->rate.is_constant() && t > 0.0 && n > 0 && !phi.support_empty()) {
    require_fk_supported(*k, domain);
    const auto [mn, mx] = std::minmax_element(coords.begin(), coords.end());
    const double r = 12.0 * std::sqrt(t);
    const FkGrid g = killed_grid(*k, phi, t, *mn - r, *mx + r);
    for (std::size_t i = 0; i < n; ++i) out[i] = g.at(coords[i]);
    return out;
  }
  for (std::size_t i = 0; i < n; ++i)
    out[i] = apply_semigroup(kernel, phi, t, coords.subspan(i * d, d), domain, abs_tol);
  return out;
}

double semigroup_integral(const KernelSpec& kernel, const TestFunction& phi,
                          double t, const Domain& domain, double abs_tol) {
  if (phi.support_empty()) return 0.0;
  const double base = phi.integral(abs_tol);
  if (t == 0.0 || kernel.conservative()) return base;
  const RateFunction& a = *kernel.rate();
  if (a.is_constant()) return std::exp(-a.value() * t) * base;
  if (kernel.is_death()) {
    std::vector<std::vector<double>> bps(domain.dim());
    for (std::size_t i = 0; i < domain.dim(); ++i) {
      bps[i] = phi.breakpoints(i);
      auto b = a.breakpoints(i);
      bps[i].insert(bps[i].end(), b.begin(), b.end());
    }
    return integrate_box([&](std::span<const double> y) { return std::exp(-a(y) * t) * phi(y); },
                         phi.support(), abs_tol, bps)
        .value;
  }
  const auto& k = std::get<KilledBrownian>(kernel.variant());
  require_fk_supported(k, domain);
  const double r = 12.0 * std::sqrt(t);
  return killed_grid(k, phi, t, phi.support().lo[0] - r, phi.support().hi[0] + r).integral();
}

double survival_probability(const KernelSpec& kernel, std::span<const double> x,
                            double t, const Domain& domain) {
  check_dims(domain, x);
  if (t < 0.0) throw InvalidArgument("survival_probability: t must be >= 0");
  if (t == 0.0 || kernel.conservative()) return 1.0;
  const RateFunction& a = *kernel.rate();
  if (kernel.is_death()) return std::exp(-a(x) * t);
  if (a.is_constant()) return std::exp(-a.value() * t);
  const auto& k = std::get<KilledBrownian>(kernel.variant());
  require_fk_supported(k, domain);
  const double r = 12.0 * std::sqrt(t);
  FkGrid g = fk_solve(k.rate, [](double) { return 1.0; }, {}, t, x[0] - r, x[0] + r,
                      fk_steps(k, t));
  return std::clamp(g.at(x[0]), 0.0, 1.0);
}

RateFunction killing_profile(const KernelSpec& kernel) {
  if (const RateFunction* a = kernel.rate()) return *a;
  return RateFunction::constant(0.0);
}

// ------------------------------------------------------------ tail bounds

namespace {

// sum_k P(Z = k) k f(k), Z ~ Poisson(mean), plus the certified remainder
// mean * P(Z >= K) for the omitted terms (f <= 1).
double union_bound(double mean, const std::function<double(unsigned)>& f) {
  if (mean <= 0.0) return 0.0;
  double s = 0.0;
  double pk = std::exp(-mean);
  unsigned k = 0;
  for (;;) {
    ++k;
    pk *= mean / static_cast<double>(k);
    s += pk * static_cast<double>(k) * f(k);
    if (static_cast<double>(k) > mean) {
      const double rem = mean * poisson_tail_above(mean, k - 1);
      if (rem < 1e-18 || k > 100000) return s + rem;
    }
  }
}

}  // namespace

double tail_bound(const KernelSpec& kernel, double t, double r, std::size_t d) {
  if (t < 0.0 || r < 0.0) throw InvalidArgument("tail_bound: t and r must be >= 0");
  if (kernel.is_death() || t == 0.0) return 0.0;
  if (r == 0.0) return 1.0;
  if (const JumpProfile* p = kernel.profile()) {
    const double b = union_bound(p->mass() * t, [&](unsigned k) {
      return p->jump_tail(r / static_cast<double>(k));
    });
    return std::min(1.0, b);
  }
  return gamma_q(0.5 * static_cast<double>(d), 0.5 * r * r / t);
}

TailBoundReport tail_bounds(const KernelSpec& kernel, double t,
                            std::span<const double> radii, std::size_t d) {
  TailBoundReport rep;
  rep.t = t;
  rep.radii.assign(radii.begin(), radii.end());
  rep.method = kernel.is_kawasaki() ? "union-bound" : "analytic";
  for (double r : radii) rep.bounds.push_back(tail_bound(kernel, t, r, d));
  return rep;
}

double tail_radius(const KernelSpec& kernel, double t, double level, std::size_t d) {
  if (!(level > 0.0 && level < 1.0))
    throw InvalidArgument("tail_radius: level must lie in (0, 1)");
  if (kernel.is_death() || t == 0.0) return 0.0;
  if (!kernel.is_kawasaki())
    return std::sqrt(2.0 * t * boost::math::gamma_q_inv(0.5 * static_cast<double>(d), level));
  double hi = 1.0;
  while (tail_bound(kernel, t, hi, d) > level) hi *= 2.0;
  double lo = 0.0;
  for (int i = 0; i < 60; ++i) {
    const double mid = 0.5 * (lo + hi);
    (tail_bound(kernel, t, mid, d) > level ? lo : hi) = mid;
  }
  return hi;
}

// ------------------------------------------------------------ summability

namespace {

// int_N^inf Q(a, c s^p) ds in closed form (b = 1/p).
double gaussian_tail_integral(double a, double c, double p, double N) {
  const double b = 1.0 / p;
  const double u0 = c * std::pow(N, p);
  const double ga = std::tgamma(a);
  double upper = boost::math::tgamma(a + b, u0) / ga;
  double sub = u0 > 0.0 ? std::pow(u0, b) * gamma_q(a, u0) : 0.0;
  const double r = std::pow(c, -b) * (upper - sub);
  return std::max(r, 0.0);
}

double brownian_term(double a, double delta, double eps, double expo, std::size_t n) {
  const double r = delta * std::pow(static_cast<double>(n), expo);
  return gamma_q(a, 0.5 * r * r / eps);
}

// Remainder for Gaussian Kawasaki profiles: per jump count k the tail is a
// Gaussian tail with variance k^2 sigma^2.
double kawasaki_gaussian_remainder(const JumpProfile& pr, double a, double delta,
                                   double eps, double p, double N) {
  const double mean = pr.mass() * eps;
  const double sigma = pr.scale();
  const double b = 1.0 / p;
  double s = 0.0;
  double pk = std::exp(-mean);
  for (unsigned k = 1; k < 200000; ++k) {
    pk *= mean / static_cast<double>(k);
    const double kk = static_cast<double>(k);
    const double ck = delta * delta / (2.0 * kk * kk * sigma * sigma);
    const double term = pk * kk * gaussian_tail_integral(a, ck, p, N);
    s += term;
    if (kk > mean + 1.0) {
      // crude bound for all remaining k: the integral from 0, which grows
      // like k^(2b); stop once it is negligible
      const double full = pk * kk * std::pow(ck, -b) * std::tgamma(a + b) / std::tgamma(a);
      if (full < 1e-30 * std::max(s, 1e-300) || full < 1e-300) break;
    }
  }
  return s;
}

double kawasaki_bump_remainder(const JumpProfile& pr, double delta, double eps,
                               double am, double N) {
  const double mean = pr.mass() * eps;
  const double R = pr.scale();
  double s = 0.0;
  double pk = std::exp(-mean);
  for (unsigned k = 1; k < 200000; ++k) {
    pk *= mean / static_cast<double>(k);
    const double kk = static_cast<double>(k);
    const double count = std::pow(kk * R / delta, am) - N;
    if (count > 0.0) s += pk * kk * count;
    if (kk > mean + 1.0 && pk * kk * std::pow(kk * R / delta, am) < 1e-30) break;
  }
  return s;
}

}  // namespace

PowerLawCertificate kawasaki_power_law(const JumpProfile& profile, double alpha,
                                       double m, double epsilon, double delta) {
  PowerLawCertificate c;
  const double lambda = profile.mass();
  // sup over r of r^alpha rho-tail(r), by a grid scan refined around the max
  const double scale = profile.scale();
  const double rmax = profile.shape() == JumpProfile::Shape::Bump
                          ? scale
                          : scale * (10.0 + 4.0 * std::sqrt(alpha + static_cast<double>(profile.dim())));
  double best = 0.0, best_r = 0.0;
  const int grid = 400;
  for (int i = 1; i <= grid; ++i) {
    const double r = rmax * i / grid;
    const double v = std::pow(r, alpha) * profile.jump_tail(r);
    if (v > best) {
      best = v;
      best_r = r;
    }
  }
  double lo = std::max(0.0, best_r - rmax / grid), hi = std::min(rmax, best_r + rmax / grid);
  for (int i = 0; i < 100; ++i) {
    const double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
    if (std::pow(m1, alpha) * profile.jump_tail(m1) < std::pow(m2, alpha) * profile.jump_tail(m2))
      lo = m1;
    else
      hi = m2;
  }
  best = std::max(best, std::pow(0.5 * (lo + hi), alpha) * profile.jump_tail(0.5 * (lo + hi)));
  // small safety factor for the numerical maximisation
  c.c_alpha = lambda * best * (1.0 + 1e-6);
  c.converges = alpha > m;
  c.zeta = c.converges ? boost::math::zeta(alpha / m) : kInf;
  const double mean = lambda * epsilon;
  double pk = std::exp(-mean), mom = 0.0;
  for (unsigned k = 1; k < 100000; ++k) {
    pk *= mean / static_cast<double>(k);
    const double term = pk * std::pow(static_cast<double>(k), alpha + 1.0);
    mom += term;
    if (static_cast<double>(k) > mean + 1.0 && term < 1e-18 * mom) break;
  }
  c.moment = mom;
  c.bound = c.converges ? c.c_alpha / (lambda * std::pow(delta, alpha)) * c.zeta * mom : kInf;
  return c;
}

ConvergenceReport check_summability(const KernelSpec& kernel, std::size_t d,
                                    double alpha, double m, double epsilon,
                                    double delta, double target_tol,
                                    std::size_t n_max) {
  if (!(alpha >= 1.0) || !(m >= 1.0) || !(epsilon > 0.0) || !(delta > 0.0))
    throw InvalidArgument("check_summability: need alpha >= 1, m >= 1, epsilon > 0, delta > 0");
  if (!(target_tol > 0.0)) throw InvalidArgument("check_summability: target_tol must be > 0");
  ConvergenceReport rep;
  rep.alpha = alpha;
  rep.m = m;
  rep.epsilon = epsilon;
  rep.delta = delta;
  rep.target_tol = target_tol;

  if (kernel.is_death()) {
    rep.method = "exact-zero";
    rep.partial_sums.push_back({1, 0.0, 0.0});
    rep.n_terms = 1;
    rep.converges = true;
    return rep;
  }

  const double expo = 1.0 / (alpha * m);
  const double p = 2.0 / (alpha * m);
  const double a = 0.5 * static_cast<double>(d);
  const JumpProfile* prof = kernel.profile();
  std::function<double(std::size_t)> term;
  std::function<double(double)> remainder;
  if (!prof) {
    rep.method = "gaussian-tail";
    term = [&](std::size_t n) { return brownian_term(a, delta, epsilon, expo, n); };
    const double c = delta * delta / (2.0 * epsilon);
    remainder = [=](double N) { return gaussian_tail_integral(a, c, p, N); };
  } else {
    rep.method = "union-bound";
    term = [&](std::size_t n) {
      return tail_bound(kernel, epsilon, delta * std::pow(static_cast<double>(n), expo), d);
    };
    if (prof->shape() == JumpProfile::Shape::Gaussian)
      remainder = [&](double N) {
        return kawasaki_gaussian_remainder(*prof, a, delta, epsilon, p, N);
      };
    else
      remainder = [&](double N) {
        return kawasaki_bump_remainder(*prof, delta, epsilon, alpha * m, N);
      };
    rep.power_law = kawasaki_power_law(*prof, alpha, m, epsilon, delta);
  }

  double sum = 0.0;
  std::size_t next_check = 1;
  for (std::size_t n = 1; n <= n_max; ++n) {
    sum += term(n);
    if (n == next_check || n == n_max) {
      const double rem = remainder(static_cast<double>(n));
      rep.partial_sums.push_back({n, sum, rem});
      rep.n_terms = n;
      rep.sum = sum;
      rep.remainder_bound = rem;
      if (rem <= target_tol) {
        rep.converges = true;
        return rep;
      }
      next_check *= 2;
    }
  }
  rep.converges = false;
  return rep;
}

// ------------------------------------------------------------ exit events

ExitEstimate exit_probability(const KernelSpec& kernel, const Domain& domain,
                              std::span<const double> x, double r, double eps,
                              std::size_t n_paths, double path_step,
                              const RngStream& rng) {
  check_dims(domain, x);
  if (!(r > 0.0) || !(eps > 0.0)) throw InvalidArgument("exit_probability: need r > 0 and eps > 0");
  if (n_paths == 0) throw InvalidArgument("exit_probability: n_paths must be >= 1");
  const std::size_t d = domain.dim();
  ExitEstimate out;
  out.n_paths = n_paths;
  out.nelson_bound = std::min(1.0, 2.0 * tail_bound(kernel, eps, 0.5 * r, d));
  if (kernel.is_death()) return out;
  if (!kernel.is_kawasaki() && !(path_step > 0.0))
    throw InvalidArgument("exit_probability: path_step must be > 0");

  const double r2 = r * r;
  std::size_t exits = 0;
  std::vector<double> y(d), jump(d), pos(d), prev(d), inc(d);
  for (std::size_t i = 0; i < n_paths; ++i) {
    RngStream s = rng.substream(i);
    std::fill(y.begin(), y.end(), 0.0);
    bool exited = false;
    if (const JumpProfile* p = kernel.profile()) {
      double t = 0.0;
      for (;;) {
        t += exp_sample(s, p->mass());
        if (t > eps) break;
        p->sample_jump(s, jump);
        double q = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          y[j] += jump[j];
          q += y[j] * y[j];
        }
        if (q > r2) {
          exited = true;
          break;
        }
      }
    } else {
      // Displacements accumulate step by step (minimal image per step on the
      // torus); a path killed inside the ball never exits.
      std::copy(x.begin(), x.end(), pos.begin());
      double t = 0.0;
      while (t < eps) {
        const double dt = std::min(path_step, eps - t);
        prev = pos;
        if (advance(kernel, domain, pos, dt, s)) break;
        domain.displacement(prev, pos, inc);
        double q = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          y[j] += inc[j];
          q += y[j] * y[j];
        }
        t += dt;
        if (q > r2) {
          exited = true;
          break;
        }
      }
    }
    exits += exited ? 1 : 0;
  }
  const double nn = static_cast<double>(n_paths);
  out.estimate = static_cast<double>(exits) / nn;
  out.std_error = std::sqrt(out.estimate * (1.0 - out.estimate) / nn);
  return out;
}

}  // namespace contdyn
