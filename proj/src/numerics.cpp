#include "contdyn/numerics.hpp"

#include <algorithm>
#include <boost/math/distributions/poisson.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <numbers>
#include <string>

#include "contdyn/error.hpp"

namespace contdyn {

namespace {

// Single non-adaptive G7/K15 pass; the caller drives the bisection.
QuadResult gk_segment(const std::function<double(double)>& f, double a,
                      double b) {
  double err = 0.0;
  const double v = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
      f, a, b, 0, 0.0, &err);
  return {v, err};
}

}  // namespace

QuadResult integrate_1d(const std::function<double(double)>& f, double a,
                        double b, double abs_tol,
                        std::span<const double> breakpoints) {
  if (!(b > a)) return {0.0, 0.0};
  std::vector<double> cuts{a};
  for (double c : breakpoints)
    if (c > a && c < b) cuts.push_back(c);
  cuts.push_back(b);
  std::sort(cuts.begin(), cuts.end());
  QuadResult total;
  const double per_piece = abs_tol / static_cast<double>(cuts.size() - 1);
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    if (cuts[i + 1] <= cuts[i]) continue;
    // Adaptive bisection driven by an absolute budget per piece.
    std::vector<std::pair<double, double>> stack{{cuts[i], cuts[i + 1]}};
    int refinements = 0;
    while (!stack.empty()) {
      auto [lo, hi] = stack.back();
      stack.pop_back();
      const double width_share = (hi - lo) / (cuts[i + 1] - cuts[i]);
      QuadResult r = gk_segment(f, lo, hi);
      if (r.error <= per_piece * width_share || refinements > 4000 ||
          hi - lo < 1e-12 * (1.0 + std::abs(lo))) {
        total.value += r.value;
        total.error += r.error;
      } else {
        const double mid = 0.5 * (lo + hi);
        stack.emplace_back(lo, mid);
        stack.emplace_back(mid, hi);
        ++refinements;
      }
    }
  }
  if (!(total.error <= abs_tol) || !std::isfinite(total.value))
    throw NumericalError("integrate_1d: tolerance " + std::to_string(abs_tol) +
                             " not reached (estimate " +
                             std::to_string(total.error) + ")",
                         total.error);
  return total;
}

namespace {

QuadResult integrate_axis(
    const std::function<double(std::span<const double>)>& f, const Box& box,
    double tol, const std::vector<std::vector<double>>& bps, std::size_t axis,
    std::vector<double>& x) {
  const std::size_t d = box.dim();
  std::span<const double> cut;
  if (axis < bps.size()) cut = bps[axis];
  double inner_error = 0.0;
  const double width = box.hi[axis] - box.lo[axis];
  auto g = [&](double t) {
    x[axis] = t;
    if (axis + 1 == d) return f(x);
    // Inner tolerance scaled so that the outer integral stays within budget.
    QuadResult r = integrate_axis(f, box, 0.5 * tol / width, bps, axis + 1, x);
    inner_error = std::max(inner_error, r.error);
    return r.value;
  };
  QuadResult r = integrate_1d(g, box.lo[axis], box.hi[axis],
                              axis + 1 == d ? tol : 0.5 * tol, cut);
  r.error += inner_error * width;
  return r;
}

}  // namespace

QuadResult integrate_box(const std::function<double(std::span<const double>)>& f,
                         const Box& box, double abs_tol,
                         const std::vector<std::vector<double>>& breakpoints) {
  const std::size_t d = box.dim();
  if (d < 1 || d > 3)
    throw Unsupported("integrate_box: dimension must be 1..3, got " +
                      std::to_string(d));
  std::vector<double> x(d, 0.0);
  return integrate_axis(f, box, abs_tol, breakpoints, 0, x);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_interval(double a, double b, double mu, double var) {
  const double s = std::sqrt(2.0 * var);
  const double za = (a - mu) / s;
  const double zb = (b - mu) / s;
  // Evaluate in the tail where erfc keeps relative precision.
  if (za > 0.0) return 0.5 * (std::erfc(za) - std::erfc(zb));
  if (zb < 0.0) return 0.5 * (std::erfc(-zb) - std::erfc(-za));
  return 0.5 * (std::erf(zb) - std::erf(za));
}

double wrapped_normal_interval(double a, double b, double mu, double var,
                               double L) {
  const double sd = std::sqrt(var);
  // Bring mu near the arc, then sum enough images to cover 10 sd.
  const double center = 0.5 * (a + b);
  mu -= L * std::nearbyint((mu - center) / L);
  const int k_max = static_cast<int>(std::ceil((10.0 * sd + L) / L));
  double s = 0.0;
  for (int k = -k_max; k <= k_max; ++k)
    s += normal_interval(a + k * L, b + k * L, mu, var);
  return s;
}

double wrapped_normal_density(double y, double mu, double var, double L) {
  const double sd = std::sqrt(var);
  double dy = y - mu;
  dy -= L * std::nearbyint(dy / L);
  const int k_max = static_cast<int>(std::ceil((10.0 * sd + L) / L));
  const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi * var);
  double s = 0.0;
  for (int k = -k_max; k <= k_max; ++k) {
    const double u = dy + k * L;
    s += std::exp(-0.5 * u * u / var);
  }
  return norm * s;
}

double gamma_q(double a, double x) {
  if (x <= 0.0) return 1.0;
  if (!std::isfinite(x)) return 0.0;
  return boost::math::gamma_q(a, x);
}

double poisson_pmf(double mean, unsigned n) {
  if (mean <= 0.0) return n == 0 ? 1.0 : 0.0;
  return std::exp(static_cast<double>(n) * std::log(mean) - mean -
                  std::lgamma(static_cast<double>(n) + 1.0));
}

double poisson_tail_above(double mean, unsigned n) {
  if (mean <= 0.0) return 0.0;
  // P(N > n) = P(n + 1, mean) (regularized lower incomplete gamma).
  return boost::math::gamma_p(static_cast<double>(n) + 1.0, mean);
}

unsigned poisson_truncation(double mean, double scale, double tol) {
  if (mean <= 0.0 || scale <= 0.0) return 0;
  unsigned n = static_cast<unsigned>(mean);
  while (poisson_tail_above(mean, n) * scale > tol) {
    ++n;
    if (n > 100000)
      throw NumericalError("poisson_truncation: mean too large", tol);
  }
  return n;
}

double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t h = v.size() / 2;
  return pairwise_sum(v.first(h)) + pairwise_sum(v.subspan(h));
}

SampleStats sample_stats(std::span<const double> v) {
  SampleStats s;
  s.n = v.size();
  if (v.empty()) return s;
  s.mean = pairwise_sum(v) / static_cast<double>(v.size());
  if (v.size() < 2) return s;
  std::vector<double> sq(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double d = v[i] - s.mean;
    sq[i] = d * d;
  }
  const double var = pairwise_sum(sq) / static_cast<double>(v.size() - 1);
  s.stddev = std::sqrt(var);
  s.std_error = s.stddev / std::sqrt(static_cast<double>(v.size()));
  return s;
}

}  // namespace contdyn
