#include "contdyn/space.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "contdyn/error.hpp"

namespace contdyn {

double Box::volume() const {
  double v = 1.0;
  for (std::size_t i = 0; i < lo.size(); ++i) v *= hi[i] - lo[i];
  return v;
}

bool Box::contains(std::span<const double> x) const {
  for (std::size_t i = 0; i < lo.size(); ++i)
    if (x[i] < lo[i] || x[i] > hi[i]) return false;
  return true;
}

Box Box::expanded(double margin) const {
  Box b = *this;
  for (std::size_t i = 0; i < lo.size(); ++i) {
    b.lo[i] -= margin;
    b.hi[i] += margin;
  }
  return b;
}

Domain Domain::full_space(Box window) {
  if (window.lo.empty() || window.lo.size() != window.hi.size())
    throw InvalidArgument("window must have matching, nonempty lo/hi");
  for (std::size_t i = 0; i < window.lo.size(); ++i) {
    if (!std::isfinite(window.lo[i]) || !std::isfinite(window.hi[i]) ||
        !(window.hi[i] > window.lo[i]))
      throw InvalidArgument("window must have positive finite extent in axis " +
                            std::to_string(i));
  }
  Domain d;
  d.dim_ = window.lo.size();
  d.mode_ = DomainMode::FullSpace;
  d.window_ = std::move(window);
  return d;
}

Domain Domain::torus(std::size_t dimension, double side) {
  if (dimension < 1) throw InvalidArgument("dimension must be >= 1");
  if (!(side > 0.0) || !std::isfinite(side))
    throw InvalidArgument("torus side must be positive and finite");
  Domain d;
  d.dim_ = dimension;
  d.mode_ = DomainMode::Torus;
  d.side_ = side;
  d.window_ = Box{std::vector<double>(dimension, 0.0),
                  std::vector<double>(dimension, side)};
  return d;
}

void Domain::displacement(std::span<const double> x, std::span<const double> y,
                          std::span<double> out) const {
  if (x.size() != dim_ || y.size() != dim_ || out.size() != dim_)
    throw InvalidArgument("dimension mismatch");
  for (std::size_t i = 0; i < dim_; ++i) {
    double dx = y[i] - x[i];
    if (mode_ == DomainMode::Torus) dx -= side_ * std::nearbyint(dx / side_);
    out[i] = dx;
  }
}

double Domain::distance(std::span<const double> x,
                        std::span<const double> y) const {
  if (x.size() != dim_ || y.size() != dim_)
    throw InvalidArgument("dimension mismatch: expected " +
                          std::to_string(dim_));
  double s = 0.0;
  for (std::size_t i = 0; i < dim_; ++i) {
    double dx = y[i] - x[i];
    if (mode_ == DomainMode::Torus) dx -= side_ * std::nearbyint(dx / side_);
    s += dx * dx;
  }
  return std::sqrt(s);
}

void Domain::wrap(std::span<double> x) const {
  if (mode_ != DomainMode::Torus) return;
  for (auto& c : x) {
    c -= side_ * std::floor(c / side_);
    // floor can leave c == side_ for tiny negative inputs
    if (c >= side_) c -= side_;
    if (c < 0.0) c = 0.0;
  }
}

bool Domain::contains(std::span<const double> x) const {
  if (x.size() != dim_) return false;
  if (mode_ == DomainMode::Torus) {
    for (double c : x)
      if (!(c >= 0.0 && c < side_)) return false;
    return true;
  }
  return window_.contains(x);
}

double unit_sphere_area(std::size_t d) {
  const double h = 0.5 * static_cast<double>(d);
  return 2.0 * std::pow(std::numbers::pi, h) / std::tgamma(h);
}

double ball_volume(std::size_t d, double r) {
  if (d < 1) throw InvalidArgument("dimension must be >= 1");
  if (!(r >= 0.0)) throw InvalidArgument("radius must be >= 0");
  const double h = 0.5 * static_cast<double>(d);
  return std::pow(std::numbers::pi, h) * std::pow(r, static_cast<double>(d)) /
         std::tgamma(h + 1.0);
}

double distance(const Domain& domain, std::span<const double> x,
                std::span<const double> y) {
  return domain.distance(x, y);
}

DoublingData doubling_constants(const Domain& domain) {
  DoublingData dd;
  dd.m = static_cast<int>(domain.dim());
  dd.C = 1.0;
  dd.valid_radius = domain.is_torus() ? 0.5 * domain.torus_side()
                                      : std::numeric_limits<double>::infinity();
  return dd;
}

}  // namespace contdyn
