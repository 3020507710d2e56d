#pragma once

#include <functional>
#include <span>
#include <vector>

#include "contdyn/space.hpp"

namespace contdyn {

struct QuadResult {
  double value = 0.0;
  double error = 0.0;
};

// Adaptive Gauss-Kronrod (15-point) on [a, b], splitting at the given
// breakpoints (discontinuities of the integrand). Throws NumericalError if the
// error estimate exceeds `abs_tol` after the maximum refinement depth.
QuadResult integrate_1d(const std::function<double(double)>& f, double a,
                        double b, double abs_tol = 1e-10,
                        std::span<const double> breakpoints = {});

// Nested adaptive quadrature over a box in d <= 3 dimensions. `breakpoints`
// holds per-axis discontinuity coordinates (may be empty).
QuadResult integrate_box(const std::function<double(std::span<const double>)>& f,
                         const Box& box, double abs_tol = 1e-10,
                         const std::vector<std::vector<double>>& breakpoints = {});

// Standard normal CDF.
double normal_cdf(double x);
// P(a <= Y <= b) for Y ~ N(mu, var), var > 0.
double normal_interval(double a, double b, double mu, double var);
// Same, for Y wrapped onto the circle of circumference L: the mass that the
// wrapped normal puts on the arc [a, b] (with b - a <= L).
double wrapped_normal_interval(double a, double b, double mu, double var,
                               double L);
// Density of the wrapped normal on the circle.
double wrapped_normal_density(double y, double mu, double var, double L);

// Regularized upper incomplete gamma Q(a, x).
double gamma_q(double a, double x);
// Poisson(mean) pmf and upper tail P(N > n).
double poisson_pmf(double mean, unsigned n);
double poisson_tail_above(double mean, unsigned n);
// Smallest N with P(Poisson(mean) > N) * scale <= tol.
unsigned poisson_truncation(double mean, double scale, double tol);

// Sum with pairwise (cascade) summation in a fixed order.
double pairwise_sum(std::span<const double> v);

struct SampleStats {
  double mean = 0.0;
  double std_error = 0.0;
  double stddev = 0.0;
  std::size_t n = 0;
};

// Mean/stderr with a deterministic reduction order.
SampleStats sample_stats(std::span<const double> v);

}  // namespace contdyn
