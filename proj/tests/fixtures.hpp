#pragma once

#include "invpricing/solver.hpp"

namespace fixtures {

using namespace invpricing;

// linear demand A=10 on [2, 6], h = z^2, sigma = K = k = 1
inline ModelParams linear_default() {
  return {DemandModel::linear(10.0, 2.0, 6.0), CostModel::quadratic(1.0, 1.0), 1.0, 1.0, 1.0};
}

// mu = 2 / (p + 1) on [1, 5], h = z^2, sigma = K = 1, k = 0.5
inline ModelParams hyperbolic() {
  return {DemandModel::hyperbolic(1.0, 2.0, 1.0, 5.0), CostModel::quadratic(1.0, 1.0), 1.0, 1.0, 0.5};
}

// Linear demand whose price passes lower -> interior -> upper -> interior -> lower
// inside the band: k < 2 p_min - A and w*(z*) > 2 p_max - A.
inline ModelParams linear_five_segment() {
  return {DemandModel::linear(8.5, 5.0, 5.5), CostModel::quadratic(1.0, 1.0), 1.0, 8.0, 1.0};
}

inline const WSolution& solved_default() {
  static const WSolution s = solve_optimal(linear_default());
  return s;
}

inline const WSolution& solved_hyperbolic() {
  static const WSolution s = solve_optimal(hyperbolic());
  return s;
}

}  // namespace fixtures
