#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace contdyn {

using Point = std::vector<double>;

// Axis-aligned box [lo, hi] in R^d.
struct Box {
  std::vector<double> lo;
  std::vector<double> hi;

  std::size_t dim() const { return lo.size(); }
  double volume() const;
  bool contains(std::span<const double> x) const;
  // Box grown by `margin` on every side.
  Box expanded(double margin) const;

  friend bool operator==(const Box&, const Box&) = default;
};

enum class DomainMode { FullSpace, Torus };

// Simulation domain. In FullSpace mode `window` is the observed region of
// R^d; in Torus mode the domain is [0, L)^d and `window` equals it.
class Domain {
public:
  static Domain full_space(Box window);
  static Domain torus(std::size_t dimension, double side);

  std::size_t dim() const { return dim_; }
  DomainMode mode() const { return mode_; }
  bool is_torus() const { return mode_ == DomainMode::Torus; }
  double torus_side() const { return side_; }
  const Box& window() const { return window_; }

  // Euclidean distance, or minimal-image distance on the torus.
  double distance(std::span<const double> x, std::span<const double> y) const;
  // Displacement y - x (minimal image on the torus).
  void displacement(std::span<const double> x, std::span<const double> y,
                    std::span<double> out) const;
  // Maps coordinates into [0, L) on the torus; identity in FullSpace.
  void wrap(std::span<double> x) const;
  bool contains(std::span<const double> x) const;

  friend bool operator==(const Domain&, const Domain&) = default;

private:
  Domain() = default;
  std::size_t dim_ = 0;
  DomainMode mode_ = DomainMode::FullSpace;
  double side_ = 0.0;
  Box window_;
};

// Volume-doubling data: vol(B(beta r)) <= C beta^m vol(B(r)).
struct DoublingData {
  int m = 1;
  double C = 1.0;
  // Largest radius for which the bound is certified (+inf in R^d; L/2 on a
  // torus, beyond which balls wrap onto themselves).
  double valid_radius = 0.0;
};

double ball_volume(std::size_t d, double r);
double distance(const Domain& domain, std::span<const double> x,
                std::span<const double> y);
DoublingData doubling_constants(const Domain& domain);

// Surface area of the unit sphere S^{d-1}.
double unit_sphere_area(std::size_t d);

}  // namespace contdyn
