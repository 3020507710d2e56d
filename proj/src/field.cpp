#include "contdyn/field.hpp"

#include <algorithm>
#include <cmath>

#include "contdyn/error.hpp"
#include "contdyn/numerics.hpp"

namespace contdyn {

BoundedFunction BoundedFunction::constant(double value) {
  if (!(value >= 0.0) || !std::isfinite(value))
    throw InvalidArgument("constant field must be finite and >= 0");
  BoundedFunction b;
  b.kind_ = Kind::Constant;
  b.value_ = value;
  b.sup_ = value;
  b.label_ = "constant";
  return b;
}

BoundedFunction BoundedFunction::box_indicator(double value, Box box) {
  if (!(value >= 0.0) || !std::isfinite(value))
    throw InvalidArgument("indicator value must be finite and >= 0");
  BoundedFunction b;
  b.kind_ = Kind::BoxIndicator;
  b.value_ = value;
  b.sup_ = value;
  b.box_ = std::move(box);
  b.label_ = "box_indicator";
  return b;
}

BoundedFunction BoundedFunction::custom(
    std::function<double(std::span<const double>)> f, double sup,
    std::string label) {
  if (!(sup >= 0.0) || !std::isfinite(sup))
    throw InvalidArgument("custom field needs a finite sup bound");
  BoundedFunction b;
  b.kind_ = Kind::Custom;
  b.sup_ = sup;
  b.f_ = std::move(f);
  b.label_ = std::move(label);
  return b;
}

double BoundedFunction::operator()(std::span<const double> x) const {
  switch (kind_) {
    case Kind::Constant:
      return value_;
    case Kind::BoxIndicator:
      return box_->contains(x) ? value_ : 0.0;
    case Kind::Custom:
      return f_(x);
  }
  return 0.0;
}

double BoundedFunction::integral(const Box& region, double abs_tol) const {
  switch (kind_) {
    case Kind::Constant:
      return value_ * region.volume();
    case Kind::BoxIndicator: {
      double v = value_;
      for (std::size_t i = 0; i < region.dim(); ++i) {
        const double lo = std::max(region.lo[i], box_->lo[i]);
        const double hi = std::min(region.hi[i], box_->hi[i]);
        if (hi <= lo) return 0.0;
        v *= hi - lo;
      }
      return v;
    }
    case Kind::Custom:
      return integrate_box([this](std::span<const double> x) { return f_(x); },
                           region, abs_tol)
          .value;
  }
  return 0.0;
}

std::vector<double> BoundedFunction::breakpoints(std::size_t axis) const {
  if (kind_ != Kind::BoxIndicator) return {};
  return {box_->lo[axis], box_->hi[axis]};
}

BoundedFunction BoundedFunction::scaled(double factor) const {
  if (!(factor >= 0.0)) throw InvalidArgument("scale factor must be >= 0");
  BoundedFunction b = *this;
  b.value_ *= factor;
  b.sup_ *= factor;
  if (kind_ == Kind::Custom) {
    auto f = f_;
    b.f_ = [f, factor](std::span<const double> x) { return factor * f(x); };
  }
  return b;
}

}  // namespace contdyn
