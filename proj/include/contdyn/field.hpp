#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "contdyn/space.hpp"

namespace contdyn {

// Bounded nonnegative function on the domain: Poisson intensities, death
// rates a(x), killing profiles g(x).
class BoundedFunction {
public:
  enum class Kind { Constant, BoxIndicator, Custom };

  static BoundedFunction constant(double value);
  // value * 1_box(x)
  static BoundedFunction box_indicator(double value, Box box);
  // Arbitrary function; `sup` must bound it from above.
  static BoundedFunction custom(std::function<double(std::span<const double>)> f,
                                double sup, std::string label = "custom");

  double operator()(std::span<const double> x) const;
  double sup() const { return sup_; }
  Kind kind() const { return kind_; }
  bool is_constant() const { return kind_ == Kind::Constant; }
  bool is_zero() const { return sup_ == 0.0; }
  double value() const { return value_; }
  const std::optional<Box>& box() const { return box_; }
  const std::string& label() const { return label_; }

  // Integral over `region` (exact for Constant/BoxIndicator).
  double integral(const Box& region, double abs_tol = 1e-10) const;
  // Discontinuity coordinates along `axis` (box edges for an indicator).
  std::vector<double> breakpoints(std::size_t axis) const;

  BoundedFunction scaled(double factor) const;

private:
  Kind kind_ = Kind::Constant;
  double value_ = 0.0;
  double sup_ = 0.0;
  std::optional<Box> box_;
  std::function<double(std::span<const double>)> f_;
  std::string label_;
};

using Intensity = BoundedFunction;
using RateFunction = BoundedFunction;

}  // namespace contdyn
