#pragma once

#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "contdyn/field.hpp"
#include "contdyn/rng.hpp"
#include "contdyn/space.hpp"
#include "contdyn/test_function.hpp"

namespace contdyn {

// Symmetric jump intensity xi on R^d with total mass lambda = <xi>.
class JumpProfile {
public:
  enum class Shape { Gaussian, Bump };

  // lambda * N(0, sigma^2 I_d)
  static JumpProfile gaussian(std::size_t d, double mass, double sigma);
  // lambda * (normalized exp(1 - 1/(1 - |y|^2/R^2)) on the ball of radius R)
  static JumpProfile bump(std::size_t d, double mass, double radius);

  Shape shape() const { return shape_; }
  std::size_t dim() const { return dim_; }
  double mass() const { return mass_; }
  // sigma for Gaussian, radius for Bump
  double scale() const { return scale_; }

  // xi(y)
  double density(std::span<const double> y) const;
  // rho(y) = xi(y) / lambda
  double jump_density(std::span<const double> y) const;
  // rho-mass outside the ball of radius s
  double jump_tail(double s) const;
  // One displacement with density rho.
  void sample_jump(RngStream& rng, std::span<double> out) const;
  // xi_eps(y) = eps^d xi(eps y): same mass, scale divided by eps.
  JumpProfile scaled(double eps) const;

  std::string describe() const;

private:
  Shape shape_ = Shape::Gaussian;
  std::size_t dim_ = 1;
  double mass_ = 1.0;
  double scale_ = 1.0;
  double norm_ = 1.0;  // normalizing constant of the bump shape
};

struct Brownian {};
struct Death {
  RateFunction rate;
};
struct Kawasaki {
  JumpProfile profile;
};
struct KilledBrownian {
  RateFunction rate;
  // Time step of the Feynman-Kac grid; 0 selects t / 1000.
  double h_kill = 0.0;
};

class KernelSpec {
public:
  using Variant = std::variant<Brownian, Death, Kawasaki, KilledBrownian>;

  static KernelSpec brownian() { return KernelSpec(Brownian{}); }
  static KernelSpec death(RateFunction a);
  static KernelSpec kawasaki(JumpProfile profile);
  static KernelSpec killed_brownian(RateFunction a, double h_kill = 0.0);

  const Variant& variant() const { return v_; }
  bool is_brownian() const { return std::holds_alternative<Brownian>(v_); }
  bool is_death() const { return std::holds_alternative<Death>(v_); }
  bool is_kawasaki() const { return std::holds_alternative<Kawasaki>(v_); }
  bool is_killed_brownian() const { return std::holds_alternative<KilledBrownian>(v_); }
  bool conservative() const { return is_brownian() || is_kawasaki(); }
  bool moves() const { return !is_death(); }

  const RateFunction* rate() const;
  const JumpProfile* profile() const;
  std::string name() const;

private:
  explicit KernelSpec(Variant v) : v_(std::move(v)) {}
  Variant v_;
};

// Outcome of one-particle propagation.
struct Alive {
  Point x;
};
struct Dead {
  double death_time;
};
using Propagation = std::variant<Alive, Dead>;

Propagation propagate(const KernelSpec& kernel, const Domain& domain,
                      std::span<const double> x, double t, RngStream& rng);

// In-place version used by the simulators: moves x over a time step dt
// (wrapping on the torus) and returns the death offset in [0, dt] if the
// particle is killed. `jumps` accumulates jump counts when non-null.
std::optional<double> advance(const KernelSpec& kernel, const Domain& domain,
                              std::span<double> x, double dt, RngStream& rng,
                              unsigned* jumps = nullptr);

// (T_t phi)(x). Throws NumericalError if the tolerance cannot be met.
double apply_semigroup(const KernelSpec& kernel, const TestFunction& phi,
                       double t, std::span<const double> x,
                       const Domain& domain, double abs_tol = 1e-8);

// T_t phi at many points (flat coordinates). Shares one Feynman-Kac grid for
// killed Brownian motion.
std::vector<double> apply_semigroup_many(const KernelSpec& kernel,
                                         const TestFunction& phi, double t,
                                         std::span<const double> coords,
                                         const Domain& domain,
                                         double abs_tol = 1e-8);

// Integral of T_t phi over the domain.
double semigroup_integral(const KernelSpec& kernel, const TestFunction& phi,
                          double t, const Domain& domain, double abs_tol = 1e-8);

// Gaussian smoothing E[phi(x + sqrt(var) N)], wrapped on the torus.
double gaussian_smooth(const TestFunction& phi, double var,
                       std::span<const double> x, const Domain& domain,
                       double abs_tol = 1e-9);

double survival_probability(const KernelSpec& kernel, std::span<const double> x,
                            double t, const Domain& domain);

// g(x) = -d/dt p_t(x, X) at t = 0; identically zero for conservative kernels.
RateFunction killing_profile(const KernelSpec& kernel);

// Upper bound on sup_x p_t(x, B(x, r)^c) in dimension d.
double tail_bound(const KernelSpec& kernel, double t, double r, std::size_t d);

struct TailBoundReport {
  double t = 0.0;
  std::vector<double> radii;
  std::vector<double> bounds;
  std::string method;
};

TailBoundReport tail_bounds(const KernelSpec& kernel, double t,
                            std::span<const double> radii, std::size_t d);

// Smallest r with tail_bound(kernel, t, r) <= level (0 for kernels that do
// not move).
double tail_radius(const KernelSpec& kernel, double t, double level, std::size_t d);

struct SummabilityCheckpoint {
  std::size_t n = 0;
  double partial_sum = 0.0;
  double remainder_bound = 0.0;
};

// Power-law route for Kawasaki kernels: with C_alpha = sup_r r^alpha * lambda *
// rho-tail(r), the series is bounded by C_alpha / (lambda delta^alpha) *
// zeta(alpha/m) * E[Z^(alpha+1)], Z ~ Poisson(lambda eps), finite iff alpha > m.
struct PowerLawCertificate {
  double c_alpha = 0.0;
  double zeta = 0.0;
  double moment = 0.0;
  double bound = 0.0;
  bool converges = false;
};

struct ConvergenceReport {
  double alpha = 1.0;
  double m = 1.0;
  double epsilon = 0.0;
  double delta = 0.0;
  double target_tol = 0.0;
  std::vector<SummabilityCheckpoint> partial_sums;
  std::size_t n_terms = 0;
  double sum = 0.0;
  double remainder_bound = 0.0;
  bool converges = false;
  std::string method;
  std::optional<PowerLawCertificate> power_law;
};

// Sum over n of sup_{t <= eps} sup_x p_t(x, B(x, delta n^{1/(alpha m)})^c).
ConvergenceReport check_summability(const KernelSpec& kernel, std::size_t d,
                                    double alpha, double m, double epsilon,
                                    double delta, double target_tol = 1e-10,
                                    std::size_t n_max = std::size_t(1) << 22);

PowerLawCertificate kawasaki_power_law(const JumpProfile& profile, double alpha,
                                       double m, double epsilon, double delta);

struct ExitEstimate {
  double estimate = 0.0;
  double std_error = 0.0;
  double nelson_bound = 0.0;
  std::size_t n_paths = 0;
};

// P(path from x leaves B(x, r) by time eps), with the bound
// 2 sup_{t <= eps} tail_bound(t, r/2).
ExitEstimate exit_probability(const KernelSpec& kernel, const Domain& domain,
                              std::span<const double> x, double r, double eps,
                              std::size_t n_paths, double path_step,
                              const RngStream& rng);

}  // namespace contdyn
