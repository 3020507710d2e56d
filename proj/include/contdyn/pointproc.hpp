#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "contdyn/field.hpp"
#include "contdyn/rng.hpp"
#include "contdyn/space.hpp"

namespace contdyn {

using DomainPtr = std::shared_ptr<const Domain>;

DomainPtr make_domain(Domain d);

// Finite simple configuration: pairwise distinct points inside the domain
// (the window in FullSpace mode, [0, L)^d on the torus). Coordinates are
// stored flat, point i occupying [i*d, (i+1)*d).
class Configuration {
public:
  explicit Configuration(DomainPtr domain);
  // Validates distinctness and containment; throws InvalidArgument otherwise.
  Configuration(DomainPtr domain, std::vector<double> coords);
  static Configuration from_points(DomainPtr domain,
                                   const std::vector<Point>& points);

  std::size_t size() const { return coords_.size() / dim(); }
  bool empty() const { return coords_.empty(); }
  std::size_t dim() const { return domain_->dim(); }
  std::span<const double> point(std::size_t i) const {
    return {coords_.data() + i * dim(), dim()};
  }
  const std::vector<double>& coords() const { return coords_; }
  const Domain& domain() const { return *domain_; }
  const DomainPtr& domain_ptr() const { return domain_; }

  // Union with a configuration on the same domain (must stay simple).
  Configuration merged(const Configuration& other) const;

  friend bool operator==(const Configuration& a, const Configuration& b) {
    return *a.domain_ == *b.domain_ && a.coords_ == b.coords_;
  }

private:
  DomainPtr domain_;
  std::vector<double> coords_;
};

// True iff no two points (given flat, dimension d) coincide exactly.
bool all_distinct(std::span<const double> coords, std::size_t d);

// Uniform-grid spatial index over a configuration. Cell side is the typical
// query radius; ball queries visit only the overlapping cells.
class GridIndex {
public:
  GridIndex(const Configuration& config, double cell_side);

  std::size_t count_in_ball(std::span<const double> center, double r) const;
  std::vector<std::size_t> indices_in_ball(std::span<const double> center,
                                           double r) const;

private:
  template <class Visit>
  void visit_ball(std::span<const double> center, double r, Visit&& v) const;

  const Configuration* config_;
  double cell_;
  std::vector<double> origin_;
  std::vector<long> cells_per_axis_;
  std::vector<std::size_t> cell_start_;
  std::vector<std::size_t> order_;
};

std::size_t count_in_ball(const Configuration& config,
                          std::span<const double> center, double r);

// Poisson points in `box` with the given intensity (thinning against its
// sup). Exact duplicates are redrawn. Returned flat.
std::vector<double> sample_poisson_points(const Box& box,
                                          const Intensity& intensity,
                                          RngStream& rng);

// Poisson configuration on the domain window (or torus).
Configuration sample_poisson(const DomainPtr& domain, const Intensity& intensity,
                             RngStream& rng);

struct SpaceTimePoint {
  Point x;
  double t = 0.0;
};

// Poisson process on box x [0, horizon] with intensity rate(x) * z dx dt,
// sorted by time. Spatial components pairwise distinct.
std::vector<SpaceTimePoint> sample_poisson_space_time(const Box& box,
                                                      const RateFunction& rate,
                                                      double z, double horizon,
                                                      RngStream& rng);

// Window-truncated certificate for membership in Theta_alpha: ball counts
// |gamma_{B(r)}| for r = 1..r_max around the origin, and the smallest K in N
// with count(r) <= K vol(B(r))^alpha over those radii. A finite configuration
// always has such a K, so `member` is true; growth at infinity cannot be
// certified from a window.
struct ThetaReport {
  double alpha = 1.0;
  std::vector<int> radii_checked;
  std::vector<std::size_t> counts;
  std::uint64_t K_min = 1;
  bool member = true;
  bool window_truncated = true;
};

ThetaReport theta_check(const Configuration& config, double alpha, int r_max);

}  // namespace contdyn
