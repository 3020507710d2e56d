#include "contdyn/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "contdyn/error.hpp"

namespace contdyn {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Child streams of the run stream, one per population.
enum Stream : std::uint64_t {
  kInitial = 0,
  kBufferSample = 1,
  kBufferParticles = 2,
  kImmigrantSample = 3,
  kImmigrants = 4,
};

void check_stream_depth(const RngStream& rng) {
  if (rng.depth() > 1)
    throw InvalidArgument("dynamics: the run stream may be at most one level deep");
}

void validate_times(const std::vector<double>& times) {
  if (times.empty()) throw InvalidArgument("evolution plan: times must be nonempty");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!std::isfinite(times[i]) || times[i] < 0.0)
      throw InvalidArgument("evolution plan: times must be finite and >= 0");
    if (i > 0 && !(times[i] > times[i - 1]))
      throw InvalidArgument("evolution plan: times must be strictly increasing");
  }
}

std::optional<Box> intersect(const Box& a, const Box& b) {
  Box out = a;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    out.lo[i] = std::max(a.lo[i], b.lo[i]);
    out.hi[i] = std::min(a.hi[i], b.hi[i]);
    if (!(out.hi[i] > out.lo[i])) return std::nullopt;
  }
  return out;
}

// Region hosting births with rate g: the torus, or window + buffer in full
// space, cut down to the support box of g when it has one.
std::optional<Box> birth_region(const Domain& dom, const RateFunction& g,
                                double width) {
  if (dom.is_torus()) {
    if (g.box()) return intersect(dom.window(), *g.box());
    return dom.window();
  }
  if (std::isinf(width)) {
    if (!g.box())
      throw InvalidArgument(
          "immigration with an unbounded buffer needs a killing rate of bounded support");
    return g.box();
  }
  const Box outer = dom.window().expanded(width);
  if (g.box()) return intersect(outer, *g.box());
  return outer;
}

struct SnapshotSink {
  explicit SnapshotSink(std::size_t n_times) : coords(n_times) {}
  void begin_track(std::size_t, Origin, double) {}
  void record(std::size_t, std::size_t k, std::span<const double> x, bool in_window) {
    if (in_window) coords[k].insert(coords[k].end(), x.begin(), x.end());
  }
  void death(std::size_t, double) {}
  void discard(std::size_t, double) {}
  std::vector<std::vector<double>> coords;
};

struct TrackSink {
  explicit TrackSink(std::size_t n_times) : n(n_times) {}
  void begin_track(std::size_t id, Origin origin, double birth) {
    if (tracks.size() <= id) tracks.resize(id + 1);
    tracks[id].origin = origin;
    tracks[id].birth_time = birth;
    tracks[id].positions.assign(n, std::nullopt);
  }
  void record(std::size_t id, std::size_t k, std::span<const double> x, bool) {
    tracks[id].positions[k] = Point(x.begin(), x.end());
  }
  void death(std::size_t id, double t) { tracks[id].death_time = t; }
  void discard(std::size_t id, double t) { tracks[id].discard_time = t; }
  std::size_t n;
  std::vector<ParticleTrack> tracks;
};

template <class Sink>
void run_engine(const Configuration& config, const KernelSpec& kernel,
                const EvolutionPlan& plan, const RngStream& rng, Sink& sink) {
  const Domain& dom = config.domain();
  plan.validate(dom);
  check_stream_depth(rng);
  const std::size_t d = dom.dim();
  const auto& T = plan.times;
  const bool torus = dom.is_torus();
  const double width = buffer_width(kernel, plan, dom);
  const Box& window = dom.window();
  const bool bounded_outer = !torus && std::isfinite(width);
  const Box outer = bounded_outer ? window.expanded(width) : window;

  std::vector<double> x(d);
  auto evolve_one = [&](std::size_t id, Origin origin, std::span<const double> x0,
                        double birth, RngStream s) {
    sink.begin_track(id, origin, birth);
    std::copy(x0.begin(), x0.end(), x.begin());
    double t = birth;
    for (std::size_t k = 0; k < T.size(); ++k) {
      if (T[k] < birth) continue;
      if (auto death = advance(kernel, dom, x, T[k] - t, s)) {
        sink.death(id, t + *death);
        return;
      }
      t = T[k];
      if (bounded_outer && !outer.contains(x)) {
        sink.discard(id, t);
        return;
      }
      sink.record(id, k, x, torus || window.contains(x));
    }
  };

  std::size_t id = 0;
  const RngStream initial = rng.substream(kInitial);
  for (std::size_t i = 0; i < config.size(); ++i, ++id)
    evolve_one(id, Origin::Initial, config.point(i), 0.0, initial.substream(i));

  if (!torus && plan.boundary.background && width > 0.0) {
    if (std::isinf(width))
      throw InvalidArgument("buffer seeding needs a finite buffer width");
    RngStream bs = rng.substream(kBufferSample);
    const std::vector<double> pts = sample_poisson_points(outer, *plan.boundary.background, bs);
    const RngStream bp = rng.substream(kBufferParticles);
    std::size_t j = 0;
    for (std::size_t i = 0; i < pts.size() / d; ++i) {
      std::span<const double> p(pts.data() + i * d, d);
      if (window.contains(p)) continue;
      evolve_one(id++, Origin::Buffer, p, 0.0, bp.substream(j++));
    }
  }

  if (plan.mode == EvolutionMode::SubMarkovWithImmigration) {
    const RateFunction g = killing_profile(kernel);
    if (!g.is_zero()) {
      if (auto region = birth_region(dom, g, width)) {
        RngStream is = rng.substream(kImmigrantSample);
        const auto births = sample_poisson_space_time(*region, g, plan.z, plan.horizon(), is);
        const RngStream ip = rng.substream(kImmigrants);
        for (std::size_t j = 0; j < births.size(); ++j)
          evolve_one(id++, Origin::Immigrant, births[j].x, births[j].t, ip.substream(j));
      }
    }
  }
}

std::vector<Configuration> to_configurations(const DomainPtr& dom,
                                             std::vector<std::vector<double>> coords) {
  std::vector<Configuration> out;
  out.reserve(coords.size());
  for (auto& c : coords) out.emplace_back(dom, std::move(c));
  return out;
}

}  // namespace

void EvolutionPlan::validate(const Domain& domain) const {
  validate_times(times);
  if (mode == EvolutionMode::SubMarkovWithImmigration && !(z > 0.0 && std::isfinite(z)))
    throw InvalidArgument("evolution plan: immigration needs a finite z > 0");
  if (mode == EvolutionMode::Conservative && z != 0.0)
    throw InvalidArgument("evolution plan: z is only meaningful with immigration");
  if (domain.is_torus() && boundary.kind != Boundary::Kind::TorusExact)
    throw InvalidArgument("evolution plan: torus domains use the exact boundary");
  if (!domain.is_torus() && boundary.kind != Boundary::Kind::Buffer)
    throw InvalidArgument("evolution plan: full-space domains need a buffer boundary");
}

Boundary default_boundary(const Domain& domain) {
  return domain.is_torus() ? Boundary::torus_exact() : Boundary::buffer();
}

double buffer_width(const KernelSpec& kernel, const EvolutionPlan& plan,
                    const Domain& domain) {
  if (domain.is_torus()) return 0.0;
  if (plan.boundary.width >= 0.0) return plan.boundary.width;
  if (!kernel.moves() || plan.horizon() == 0.0) return 0.0;
  return tail_radius(kernel, plan.horizon(), 1e-4, domain.dim());
}

EvolutionPlan resolve_plan(const KernelSpec& kernel, EvolutionPlan plan,
                           const Domain& domain) {
  if (!domain.is_torus() && plan.boundary.kind == Boundary::Kind::Buffer &&
      plan.boundary.width < 0.0 && !plan.times.empty())
    plan.boundary.width = buffer_width(kernel, plan, domain);
  return plan;
}

double buffer_leakage_bound(const KernelSpec& kernel, double horizon,
                            double width, std::size_t d) {
  if (std::isinf(width)) return 0.0;
  return tail_bound(kernel, horizon, width, d);
}

std::vector<ParticleTrack> simulate_tracks(const Configuration& config,
                                           const KernelSpec& kernel,
                                           const EvolutionPlan& plan,
                                           const RngStream& rng) {
  TrackSink sink(plan.times.size());
  run_engine(config, kernel, plan, rng, sink);
  return std::move(sink.tracks);
}

std::vector<std::vector<double>> simulate_snapshot_coords(
    const Configuration& config, const KernelSpec& kernel,
    const EvolutionPlan& plan, const RngStream& rng) {
  SnapshotSink sink(plan.times.size());
  run_engine(config, kernel, plan, rng, sink);
  return std::move(sink.coords);
}

std::vector<Configuration> evolve_snapshot(const Configuration& config,
                                           const KernelSpec& kernel,
                                           const EvolutionPlan& plan,
                                           const RngStream& rng) {
  if (plan.mode != EvolutionMode::Conservative)
    throw InvalidArgument("evolve_snapshot: immigration plans go through evolve_with_immigration");
  return to_configurations(config.domain_ptr(),
                           simulate_snapshot_coords(config, kernel, plan, rng));
}

std::vector<Configuration> evolve_with_immigration(
    const Configuration& config, const KernelSpec& kernel, double z,
    EvolutionPlan plan, const RngStream& rng, std::vector<std::string>* warnings) {
  if (!(z > 0.0) || !std::isfinite(z))
    throw InvalidArgument("evolve_with_immigration: z must be finite and > 0");
  if (killing_profile(kernel).is_zero()) {
    if (warnings)
      warnings->push_back("kernel '" + kernel.name() +
                          "' has zero killing profile; immigration rate vanishes");
    plan.mode = EvolutionMode::Conservative;
    plan.z = 0.0;
    return evolve_snapshot(config, kernel, plan, rng);
  }
  plan.mode = EvolutionMode::SubMarkovWithImmigration;
  plan.z = z;
  return to_configurations(config.domain_ptr(),
                           simulate_snapshot_coords(config, kernel, plan, rng));
}

std::vector<std::vector<double>> glauber_snapshot_coords(
    const Configuration& config, const RateFunction& a, double z,
    const std::vector<double>& times, const RngStream& rng) {
  validate_times(times);
  check_stream_depth(rng);
  if (!(z >= 0.0) || !std::isfinite(z)) throw InvalidArgument("glauber: z must be finite and >= 0");
  if (!std::isfinite(a.sup())) throw InvalidArgument("glauber: death rate must be bounded");
  const Domain& dom = config.domain();
  const std::size_t d = dom.dim();
  std::vector<std::vector<double>> out(times.size());
  auto place = [&](std::span<const double> x, double birth, double death) {
    for (std::size_t k = 0; k < times.size(); ++k)
      if (times[k] >= birth && death > times[k]) out[k].insert(out[k].end(), x.begin(), x.end());
  };
  auto lifetime = [&](std::span<const double> x, RngStream s) {
    const double rate = a(x);
    return rate > 0.0 ? -std::log(s.uniform()) / rate : kInf;
  };
  const RngStream initial = rng.substream(kInitial);
  for (std::size_t i = 0; i < config.size(); ++i)
    place(config.point(i), 0.0, lifetime(config.point(i), initial.substream(i)));
  if (z > 0.0 && !a.is_zero()) {
    std::optional<Box> region = dom.window();
    if (a.box()) region = intersect(dom.window(), *a.box());
    if (region) {
      RngStream is = rng.substream(kImmigrantSample);
      const auto births = sample_poisson_space_time(*region, a, z, times.back(), is);
      const RngStream ip = rng.substream(kImmigrants);
      for (std::size_t j = 0; j < births.size(); ++j)
        place(births[j].x, births[j].t, births[j].t + lifetime(births[j].x, ip.substream(j)));
    }
  }
  (void)d;
  return out;
}

std::vector<Configuration> glauber_evolve(const Configuration& config,
                                          const RateFunction& a, double z,
                                          const EvolutionPlan& plan,
                                          const RngStream& rng) {
  if (!(z > 0.0)) {
    if (z != 0.0) throw InvalidArgument("glauber_evolve: z must be >= 0");
  }
  return to_configurations(config.domain_ptr(),
                           glauber_snapshot_coords(config, a, z, plan.times, rng));
}

EventStream event_stream(const Configuration& config, const FreeDynamics& dyn,
                         double horizon, const RngStream& rng) {
  if (!(horizon > 0.0) || !std::isfinite(horizon))
    throw InvalidArgument("event_stream: horizon must be finite and > 0");
  check_stream_depth(rng);
  const Domain& dom = config.domain();
  const std::size_t d = dom.dim();
  EventStream es;
  es.horizon = horizon;
  es.n_initial = config.size();
  const RngStream initial = rng.substream(kInitial);

  if (const auto* death = std::get_if<Death>(&dyn.kernel.variant())) {
    const RateFunction& a = death->rate;
    auto lifetime = [&](std::span<const double> x, RngStream s) {
      const double rate = a(x);
      return rate > 0.0 ? -std::log(s.uniform()) / rate : kInf;
    };
    for (std::size_t i = 0; i < config.size(); ++i) {
      const double tau = lifetime(config.point(i), initial.substream(i));
      if (tau <= horizon) {
        Event e;
        e.time = tau;
        e.kind = EventKind::Death;
        e.particle = i;
        e.from.assign(config.point(i).begin(), config.point(i).end());
        es.events.push_back(std::move(e));
      }
    }
    if (dyn.z > 0.0 && !a.is_zero()) {
      std::optional<Box> region = dom.window();
      if (a.box()) region = intersect(dom.window(), *a.box());
      if (region) {
        RngStream is = rng.substream(kImmigrantSample);
        const auto births = sample_poisson_space_time(*region, a, dyn.z, horizon, is);
        const RngStream ip = rng.substream(kImmigrants);
        for (std::size_t j = 0; j < births.size(); ++j) {
          const std::size_t pid = config.size() + j;
          Event b;
          b.time = births[j].t;
          b.kind = EventKind::Birth;
          b.particle = pid;
          b.to = births[j].x;
          es.events.push_back(b);
          const double tau = births[j].t + lifetime(births[j].x, ip.substream(j));
          if (tau <= horizon) {
            Event e;
            e.time = tau;
            e.kind = EventKind::Death;
            e.particle = pid;
            e.from = births[j].x;
            es.events.push_back(std::move(e));
          }
        }
      }
    }
  } else if (const JumpProfile* p = dyn.kernel.profile()) {
    if (dyn.z != 0.0) throw InvalidArgument("event_stream: Kawasaki dynamics has no immigration");
    std::vector<double> jump(d);
    for (std::size_t i = 0; i < config.size(); ++i) {
      RngStream s = initial.substream(i);
      Point x(config.point(i).begin(), config.point(i).end());
      double t = 0.0;
      for (;;) {
        t += -std::log(s.uniform()) / p->mass();
        if (t > horizon) break;
        p->sample_jump(s, jump);
        Event e;
        e.time = t;
        e.kind = EventKind::Jump;
        e.particle = i;
        e.from = x;
        for (std::size_t k = 0; k < d; ++k) x[k] += jump[k];
        if (dom.is_torus()) dom.wrap(x);
        e.to = x;
        es.events.push_back(std::move(e));
      }
    }
  } else {
    throw Unsupported("event_stream: continuous-path kernels have no event representation");
  }
  std::stable_sort(es.events.begin(), es.events.end(),
                   [](const Event& a, const Event& b) { return a.time < b.time; });
  return es;
}

Configuration snapshot_from_events(const Configuration& initial,
                                   const EventStream& stream, double t) {
  const Domain& dom = initial.domain();
  std::unordered_map<std::size_t, Point> alive;
  for (std::size_t i = 0; i < initial.size(); ++i)
    alive.emplace(i, Point(initial.point(i).begin(), initial.point(i).end()));
  for (const Event& e : stream.events) {
    if (e.time > t) break;
    switch (e.kind) {
      case EventKind::Birth:
        alive[e.particle] = e.to;
        break;
      case EventKind::Death:
        alive.erase(e.particle);
        break;
      case EventKind::Jump:
        alive[e.particle] = e.to;
        break;
    }
  }
  std::vector<std::size_t> ids;
  ids.reserve(alive.size());
  for (const auto& [id, x] : alive) ids.push_back(id);
  std::sort(ids.begin(), ids.end());
  std::vector<double> coords;
  for (std::size_t id : ids) {
    const Point& x = alive[id];
    if (dom.is_torus() || dom.window().contains(x)) coords.insert(coords.end(), x.begin(), x.end());
  }
  return Configuration(initial.domain_ptr(), std::move(coords));
}

}  // namespace contdyn
