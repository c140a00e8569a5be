#pragma once

#include <limits>

#include "dp/common.hpp"

namespace dp {

// Feasible set for the optimizers: all of R^p, or an origin-centered
// Euclidean ball of the given radius.
struct ConstraintSet {
  enum class Kind { Unconstrained, Ball };

  Kind kind = Kind::Unconstrained;
  double radius = 0.0;

  static ConstraintSet unconstrained() { return {}; }

  static ConstraintSet ball(double radius) {
    if (!(radius > 0.0)) throw InvalidParams("ball radius must be positive");
    return {Kind::Ball, radius};
  }

  bool is_ball() const { return kind == Kind::Ball; }

  // Diameter of the set; +inf when unconstrained.
  double diameter() const {
    return is_ball() ? 2.0 * radius : std::numeric_limits<double>::infinity();
  }

  bool contains(double norm, double tol = 0.0) const {
    return !is_ball() || norm <= radius + tol;
  }
};

}  // namespace dp
