#pragma once

#include <functional>

#include "invpricing/solver.hpp"

namespace invpricing::detail {

/// Called after every grid node; returning true ends the integration there.
using StopRule = std::function<bool(double z, double w, double dw)>;

WFragment integrate_backward(const ModelParams& params, double gamma, long i_hi, long i_lo,
                             const SolverOptions& opts, const StopRule& stop);

long node_at_or_above(double z, double step);
long node_at_or_below(double z, double step);

}  // namespace invpricing::detail
