#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "contdyn/dynamics.hpp"
#include "contdyn/numerics.hpp"
#include "contdyn/test_function.hpp"

namespace contdyn {

// <phi, gamma> = sum of phi over the points.
double pairing(const TestFunction& phi, const Configuration& config);
double pairing(const TestFunction& phi, std::span<const double> coords, std::size_t d);

// exp<log(1 + phi), gamma> = prod (1 + phi(x)), always in (0, 1] for phi in D.
double laplace_factor(const TestFunction& phi, std::span<const double> coords,
                      std::size_t d);

// Product over times of laplace_factor(phis[i], snapshots[i]).
double joint_laplace_factor(std::span<const TestFunction> phis,
                            const std::vector<std::vector<double>>& snapshots,
                            std::size_t d);

struct LaplaceEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t n_samples = 0;
  std::vector<double> times;
  std::vector<std::string> functions;
};

LaplaceEstimate laplace_estimate(std::span<const double> values,
                                 std::vector<double> times = {},
                                 std::span<const TestFunction> phis = {});

// samples[r][i] is replica r observed at time i.
LaplaceEstimate empirical_laplace(const std::vector<std::vector<Configuration>>& samples,
                                  std::span<const TestFunction> phis,
                                  std::vector<double> times = {});

// prod_x (1 + (T_t phi)(x)) for a conservative kernel.
double analytic_laplace_markov(const KernelSpec& kernel, const Configuration& config,
                               const TestFunction& phi, double t, double abs_tol = 1e-8);

// prod_x (1 + (T_t phi)(x)) * exp(z * int (phi - T_t phi) dx) for a killing kernel.
double analytic_laplace_submarkov(const KernelSpec& kernel, const Configuration& config,
                                  const TestFunction& phi, double t, double z,
                                  double abs_tol = 1e-8);

// Starting laws for the Glauber closed form.
struct PoissonStart {
  double z = 1.0;
};
// Parents Poisson(kappa); each parent carries one point, or two with
// probability p2, displaced by independent N(0, sigma^2) offsets.
struct ClusterStart {
  double kappa = 1.0;
  double p2 = 0.0;
  double sigma = 1.0;
};
using GlauberStart = std::variant<Configuration, PoissonStart, ClusterStart>;

// E prod_i exp<log(1 + phi_i), gamma_{t_i}> for Glauber dynamics with
// constant death rate a and activity z, started from `start`. Enumerates all
// nonempty index subsets, so at most 12 times.
double glauber_joint_laplace(const GlauberStart& start, double a, double z,
                             std::span<const double> times,
                             std::span<const TestFunction> phis, const Domain& domain,
                             double abs_tol = 1e-8);

// Generating functional E prod_x (1 + h(x)) of the cluster process for h
// given as sum_k weight_k * prod_{phi in group_k} phi. One dimension only.
double cluster_generating_functional(const ClusterStart& start,
                                     const std::vector<double>& weights,
                                     const std::vector<std::vector<const TestFunction*>>& groups,
                                     const Domain& domain, double abs_tol = 1e-8);

// Counts bins: the region split into per_axis[i] equal cells along axis i.
struct BinGrid {
  Box region;
  std::vector<std::size_t> per_axis;

  std::size_t size() const;
  double cell_volume() const;
  Box cell(std::size_t index) const;
  // Cell containing x, if x lies in the region.
  std::optional<std::size_t> locate(std::span<const double> x) const;
};

// k^(n) estimated on bin products (b_1 <= ... <= b_n): the mean number of
// ordered n-tuples of distinct points with x_j in b_j, over the product of cell
// volumes. Symmetric by construction.
struct CorrelationGrid {
  std::size_t order = 1;
  BinGrid bins;
  std::vector<std::vector<std::size_t>> tuples;
  std::vector<double> estimates;
  std::vector<double> std_errors;
  std::size_t n_samples = 0;

  // Estimate for an arbitrary bin tuple (sorted internally).
  std::size_t index_of(std::vector<std::size_t> tuple) const;
  double at(std::vector<std::size_t> tuple) const { return estimates[index_of(std::move(tuple))]; }
};

CorrelationGrid estimate_correlations(const std::vector<Configuration>& samples,
                                      std::size_t order, const BinGrid& bins);
CorrelationGrid estimate_correlations(const std::vector<std::vector<double>>& samples,
                                      std::size_t d, std::size_t order, const BinGrid& bins);

// Correlation and Ursell values on the subsets of n labeled points, indexed by
// bitmask. Entry 0 (empty set) is 1 for k and unused for u.
struct UrsellTable {
  std::size_t n = 0;
  std::vector<double> k;
  std::vector<double> u;

  static UrsellTable with_correlations(std::size_t n, std::vector<double> k);
  static UrsellTable with_ursell(std::size_t n, std::vector<double> u);
  // k(eta) = z^|eta|
  static UrsellTable poisson(std::size_t n, double z);
};

constexpr std::size_t kMaxUrsellPoints = 8;

UrsellTable ursell_from_correlations(UrsellTable table);
UrsellTable correlations_from_ursell(UrsellTable table);

// F(gamma) = g(<phi_1, gamma>, ..., <phi_N, gamma>).
class CylinderFunction {
public:
  using Outer = std::function<double(std::span<const double>)>;
  using OuterGradient = std::function<void(std::span<const double>, std::span<double>)>;
  using OuterHessian = std::function<void(std::span<const double>, std::span<double>)>;
  enum class Kind { Linear, Exponential, General };

  // g(s) = s
  static CylinderFunction linear(TestFunction phi);
  // g(s) = exp(kappa * s)
  static CylinderFunction exponential(TestFunction phi, double kappa);
  static CylinderFunction constant(double value);
  // Hessian is written row-major into an N x N buffer.
  static CylinderFunction general(std::vector<TestFunction> phis, Outer g,
                                  OuterGradient dg = {}, OuterHessian d2g = {},
                                  std::string label = "cylinder");

  double operator()(const Configuration& config) const;
  double operator()(std::span<const double> coords, std::size_t d) const;
  double outer(std::span<const double> s) const { return g_(s); }
  void outer_gradient(std::span<const double> s, std::span<double> out) const { dg_(s, out); }
  void outer_hessian(std::span<const double> s, std::span<double> out) const { d2g_(s, out); }
  void pairings(std::span<const double> coords, std::size_t d, std::span<double> out) const;

  Kind kind() const { return kind_; }
  double kappa() const { return kappa_; }
  const std::vector<TestFunction>& inner() const { return phis_; }
  bool has_derivatives() const { return bool(dg_) && bool(d2g_); }
  const std::string& label() const { return label_; }

private:
  Kind kind_ = Kind::General;
  double kappa_ = 0.0;
  std::vector<TestFunction> phis_;
  Outer g_;
  OuterGradient dg_;
  OuterHessian d2g_;
  std::string label_;
};

// (L F)(gamma) for Brownian (L^B), Glauber (Death kernel with activity z,
// L^G) or Kawasaki (L^K) dynamics.
double generator_apply(const CylinderFunction& F, const Configuration& config,
                       const FreeDynamics& dyn, double abs_tol = 1e-8);

// E F(gamma_t) from the closed forms, for linear and exponential F.
double exact_cylinder_mean(const CylinderFunction& F, const Configuration& config,
                           const FreeDynamics& dyn, double t, double abs_tol = 1e-9);

struct FdCheck {
  double h = 0.0;
  std::size_t n_replicas = 0;
  double fd_estimate = 0.0;
  double std_error = 0.0;
  double analytic = 0.0;
  double discrepancy = 0.0;
  // (E F(gamma_h) - F(gamma)) / h - L F when the closed form is available.
  std::optional<double> exact_bias;
  bool within(double k = 3.0) const;
};

// Finite-difference rate (F(gamma_h) - F(gamma)) / h over independent
// replicas; replica r draws from rng.substream(r).
FdCheck generator_fd_check(const CylinderFunction& F, const Configuration& config,
                           const FreeDynamics& dyn, double h, std::size_t n_replicas,
                           const RngStream& rng, unsigned threads = 1);

// Same replicas evaluated at several step sizes (sharing paths).
std::vector<FdCheck> generator_fd_checks(const CylinderFunction& F,
                                         const Configuration& config,
                                         const FreeDynamics& dyn,
                                         std::vector<double> hs, std::size_t n_replicas,
                                         const RngStream& rng, unsigned threads = 1);

}  // namespace contdyn
