#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "contdyn/observables.hpp"

namespace contdyn {

// xi_eps(x) = eps^d xi(eps x); the mass <xi> is unchanged.
struct ScaledProfile {
  JumpProfile base;
  double eps = 1.0;
  JumpProfile profile;

  double operator()(std::span<const double> x) const { return profile.density(x); }
  double mass() const { return profile.mass(); }
};

ScaledProfile scale_profile(const JumpProfile& xi, double eps);

// G_t = e^{-t<xi>} sum_{n>=1} t^n/n! xi^{*n}: the displacement law of the jump
// process minus its atom at the origin. Gaussian profiles use closed-form
// convolution powers; bump profiles (one dimension) a convolution grid.
class GtSeries {
public:
  double t() const { return t_; }
  const JumpProfile& profile() const { return xi_; }
  unsigned n_terms() const { return unsigned(weights_.size()); }
  // Poisson mass of the dropped terms, P(N > n_terms).
  double remainder() const { return remainder_; }
  // weights()[n-1] = e^{-t<xi>} (t<xi>)^n / n!
  const std::vector<double>& weights() const { return weights_; }
  double atom() const { return atom_; }

  double operator()(std::span<const double> x) const;
  // Sum of the retained weights.
  double truncated_mass() const;
  // <G_t> by quadrature of the evaluator.
  double total_mass(double abs_tol = 1e-10) const;
  // Mass of [lo, hi] (one dimension).
  double interval_mass(double lo, double hi) const;

private:
  friend GtSeries g_t_series(const JumpProfile&, double, double, unsigned);
  JumpProfile xi_ = JumpProfile::gaussian(1, 1.0, 1.0);
  double t_ = 0.0;
  double atom_ = 1.0;
  double remainder_ = 0.0;
  std::vector<double> weights_;
  double grid_lo_ = 0.0;
  double dx_ = 0.0;
  std::vector<double> grid_;
};

GtSeries g_t_series(const JumpProfile& xi, double t, double tol = 1e-10,
                    unsigned n_max = 2000);

class StartingMeasure {
public:
  enum class Family { Poisson, NeymanScott };

  static StartingMeasure poisson(double z);
  // Cluster process: parents Poisson(kappa), one point per parent plus a
  // second with probability p2, offsets N(0, sigma^2 I).
  static StartingMeasure neyman_scott(double kappa, double p2, double sigma);

  Family family() const { return family_; }
  std::string describe() const;
  double k1() const;
  // Second Ursell function; zero for Poisson.
  double u2(std::span<const double> x, std::span<const double> y) const;
  double u2_sup(std::size_t d) const;
  // sup k^(n), attained when all points coincide.
  double k_sup(std::size_t n, std::size_t d) const;
  // Ursell table at labeled points (flat coordinates), closed form.
  UrsellTable ursell_table(std::span<const double> coords, std::size_t d) const;

  Configuration sample(const DomainPtr& domain, RngStream& rng) const;
  GlauberStart glauber_start() const;

  double z() const { return z_; }
  double kappa() const { return kappa_; }
  double p2() const { return p2_; }
  double sigma() const { return sigma_; }

private:
  Family family_ = Family::Poisson;
  double z_ = 1.0;
  double kappa_ = 0.0;
  double p2_ = 0.0;
  double sigma_ = 1.0;
};

struct CorrelationBoundRow {
  std::size_t n = 0;
  double k_sup = 0.0;
  double bound = 0.0;
};

struct DecayProbe {
  double eps = 1.0;
  double u2 = 0.0;
};

struct MuConditionsReport {
  std::string measure;
  // (i) k^(n) <= (n!)^gamma C^n for n <= n_max
  double gamma = 0.0;
  double C = 0.0;
  std::vector<CorrelationBoundRow> bound_rows;
  bool bound_holds = false;
  // (ii)
  bool translation_invariant = true;
  // (iii) u^(2)(x/eps, y) at probe points: pointwise proxy for decay in measure
  std::vector<DecayProbe> probes;
  bool decay_holds = false;
  std::string decay_method;
  bool admissible = false;
  std::vector<std::string> reasons;
};

MuConditionsReport verify_mu_conditions(const StartingMeasure& measure, std::size_t n_max,
                                        const std::vector<double>& eps_probes,
                                        std::size_t d = 1, double tol = 1e-6);

struct ScalingExperiment {
  StartingMeasure measure = StartingMeasure::poisson(1.0);
  JumpProfile xi = JumpProfile::gaussian(1, 1.0, 1.0);
  DomainPtr domain;
  std::vector<double> times;
  std::vector<TestFunction> phis;
  std::vector<double> eps_schedule = {1.0, 0.5, 0.25, 0.1};
  std::size_t n_samples = 100000;
  // eps values at which the decay of u2 is probed before running.
  std::vector<double> decay_probes = {1.0, 0.5, 0.25, 0.1, 0.05, 0.01};
  // Replica r uses the same stream at every eps.
  bool common_random_numbers = true;
};

// The canonical two-time experiment on the torus of side 100.
ScalingExperiment canonical_scaling_experiment(const StartingMeasure& measure);

struct ScalingRow {
  double eps = 1.0;
  double estimate = 0.0;
  double std_error = 0.0;
  double distance = 0.0;
};

struct ScalingReport {
  std::string measure;
  std::vector<double> eps_schedule;
  std::vector<double> times;
  std::size_t n_samples = 0;
  double target = 0.0;
  std::vector<ScalingRow> rows;
  // Distances strictly decrease along the schedule (or all vanish).
  bool monotone = false;
  double final_distance = 0.0;
  double final_tolerance = 0.0;
  bool final_within = false;
  std::vector<std::string> notes;

  bool passed() const { return monotone && final_within; }
};

ScalingReport run_scaling_experiment(const ScalingExperiment& exp, const RngStream& rng,
                                     unsigned threads = 1);

}  // namespace contdyn
