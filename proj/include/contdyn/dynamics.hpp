#pragma once

#include <optional>
#include <string>
#include <vector>

#include "contdyn/kernels.hpp"
#include "contdyn/pointproc.hpp"

namespace contdyn {

enum class EvolutionMode { Conservative, SubMarkovWithImmigration };

// On a torus nothing leaves the domain. In full space the window is padded by
// a buffer of width Delta: particles found beyond window + Delta at a snapshot
// time are discarded, and the buffer ring may be seeded with a background
// Poisson population standing in for the configuration outside the window.
struct Boundary {
  enum class Kind { Buffer, TorusExact };
  Kind kind = Kind::TorusExact;
  // Buffer width; negative selects the width at which
  // tail_bound(kernel, t_max, width) = 1e-4. May be +infinity.
  double width = -1.0;
  std::optional<Intensity> background;

  static Boundary torus_exact() { return Boundary{}; }
  static Boundary buffer(double width = -1.0,
                         std::optional<Intensity> background = std::nullopt) {
    return Boundary{Kind::Buffer, width, std::move(background)};
  }
};

struct EvolutionPlan {
  // 0 <= t_1 < t_2 < ...; t_1 = 0 returns the initial configuration.
  std::vector<double> times;
  EvolutionMode mode = EvolutionMode::Conservative;
  double z = 0.0;
  Boundary boundary;

  void validate(const Domain& domain) const;
  double horizon() const { return times.empty() ? 0.0 : times.back(); }
};

// Boundary policy suited to the domain: exact on the torus, automatic buffer
// in full space.
Boundary default_boundary(const Domain& domain);

// Resolved buffer width for the plan (0 on the torus).
double buffer_width(const KernelSpec& kernel, const EvolutionPlan& plan,
                    const Domain& domain);

// Copy of the plan with the automatic buffer width resolved, so repeated runs
// skip the tail-radius search.
EvolutionPlan resolve_plan(const KernelSpec& kernel, EvolutionPlan plan,
                           const Domain& domain);

// Probability bound for one particle started outside window + width to
// reach the window by the horizon.
double buffer_leakage_bound(const KernelSpec& kernel, double horizon,
                            double width, std::size_t d);

enum class Origin { Initial, Buffer, Immigrant };

struct ParticleTrack {
  Origin origin = Origin::Initial;
  double birth_time = 0.0;
  std::optional<double> death_time;
  // Set when the particle left window + buffer and was dropped.
  std::optional<double> discard_time;
  // One entry per plan time; empty before birth and after death or discard.
  std::vector<std::optional<Point>> positions;
};

// Per-particle histories. Randomness: the stream `rng` may be at most one
// level deep; particle k of each population draws from a fixed child stream,
// so results do not depend on scheduling.
std::vector<ParticleTrack> simulate_tracks(const Configuration& config,
                                           const KernelSpec& kernel,
                                           const EvolutionPlan& plan,
                                           const RngStream& rng);

// Snapshot coordinates (flat, window-restricted) per plan time, without
// building validated configurations. Same randomness as simulate_tracks.
std::vector<std::vector<double>> simulate_snapshot_coords(
    const Configuration& config, const KernelSpec& kernel,
    const EvolutionPlan& plan, const RngStream& rng);

std::vector<Configuration> evolve_snapshot(const Configuration& config,
                                           const KernelSpec& kernel,
                                           const EvolutionPlan& plan,
                                           const RngStream& rng);

// Killing plus immigration from the space-time Poisson rain with intensity
// g(x) z dx dt, g the killing profile. For a conservative kernel this reduces
// to evolve_snapshot and a warning is appended to `warnings`.
std::vector<Configuration> evolve_with_immigration(
    const Configuration& config, const KernelSpec& kernel, double z,
    EvolutionPlan plan, const RngStream& rng,
    std::vector<std::string>* warnings = nullptr);

// Event-driven free Glauber dynamics: exponential lifetimes with rate a(x),
// immobile particles, births at rate a(x) z on the window (or torus).
std::vector<std::vector<double>> glauber_snapshot_coords(
    const Configuration& config, const RateFunction& a, double z,
    const std::vector<double>& times, const RngStream& rng);

std::vector<Configuration> glauber_evolve(const Configuration& config,
                                          const RateFunction& a, double z,
                                          const EvolutionPlan& plan,
                                          const RngStream& rng);

// One-particle kernel plus immigration activity (z = 0 for none).
struct FreeDynamics {
  KernelSpec kernel;
  double z = 0.0;

  static FreeDynamics glauber(RateFunction a, double z) {
    return FreeDynamics{KernelSpec::death(std::move(a)), z};
  }
  static FreeDynamics kawasaki(JumpProfile profile) {
    return FreeDynamics{KernelSpec::kawasaki(std::move(profile)), 0.0};
  }
};

enum class EventKind { Birth, Death, Jump };

struct Event {
  double time = 0.0;
  EventKind kind = EventKind::Birth;
  std::size_t particle = 0;
  Point from;  // Death, Jump
  Point to;    // Birth, Jump
};

struct EventStream {
  double horizon = 0.0;
  std::size_t n_initial = 0;
  std::vector<Event> events;
};

// Chronological events for pure-jump dynamics (death/birth or Kawasaki).
// Particles 0..n-1 are the initial points; births get fresh ids.
EventStream event_stream(const Configuration& config, const FreeDynamics& dyn,
                         double horizon, const RngStream& rng);

// Configuration at time t reconstructed from the events (restricted to the
// window in full space).
Configuration snapshot_from_events(const Configuration& initial,
                                   const EventStream& stream, double t);

}  // namespace contdyn
