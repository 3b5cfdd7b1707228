#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "invpricing/cost.hpp"
#include "invpricing/demand.hpp"

namespace invpricing {

/// Everything that defines one inventory/pricing instance.
struct ModelParams {
  DemandModel demand;
  CostModel cost;
  double sigma;  ///< demand volatility, > 0
  double K;      ///< fixed ordering cost, > 0
  double k;      ///< unit ordering cost, > 0

  /// Throws ModelInvalid naming the violated field.
  void validate() const;
  /// Non-fatal observations, e.g. k >= p_max.
  std::vector<std::string> warnings() const;

  /// w'(z) = (2 / sigma^2) (gamma + h(z) - pi(w)).
  double slope(double z, double w, double gamma) const {
    return 2.0 / (sigma * sigma) * (gamma + cost.holding(z) - demand.pi(w));
  }
};

struct SolverOptions {
  double grid_step = 1e-3;       ///< spacing of the output grid; z = 0 is always a node
  double ode_atol = 1e-10;
  double ode_rtol = 1e-10;
  double min_step = 1e-12;
  double blowup_limit = 1e9;
  double level_tol = 1e-12;      ///< root tolerance for s, S and z*
  double gamma_rel_tol = 1e-12;  ///< bracket width for the profit-rate root
  std::optional<double> z_max;   ///< explicit right truncation; derived from h otherwise
  double z_max_certify_tol = 1e-8;
  int max_z_max_doublings = 4;
  double left_stop_margin = 0.1;
  double residual_tol = 1e-8;
};

/**
 * Marginal value w sampled on the uniform grid z_i = i * step, ascending.
 * dw holds the ODE right-hand side at each node, so values between nodes use
 * cubic Hermite interpolation.
 */
struct WFragment {
  double step = 0.0;
  long first_index = 0;
  double gamma = 0.0;
  std::vector<double> w;
  std::vector<double> dw;

  std::size_t size() const noexcept { return w.size(); }
  double z(std::size_t i) const noexcept { return static_cast<double>(first_index + static_cast<long>(i)) * step; }
  double z_front() const noexcept { return z(0); }
  double z_back() const noexcept { return z(size() - 1); }

  /// Index of the cell [z(i), z(i+1)] containing z, clamped to the range.
  std::size_t cell(double z) const noexcept;
  double value(double z) const noexcept;
  double slope(double z) const noexcept;
  /// Exact integral of the Hermite interpolant over [a, b].
  double integral(double a, double b) const;
};

struct BandLevels {
  double s;
  double S;
  double z_star;
};

struct SolveDiagnostics {
  double gamma_bracket_lo = 0.0;
  double gamma_bracket_hi = 0.0;
  double area_at_lo = 0.0;
  double area_at_hi = 0.0;
  int area_evaluations = 0;
  bool area_monotone = true;
  std::vector<double> z_max_history;
  std::vector<double> gamma_history;
  std::size_t residual_nodes_skipped = 0;
};

/// Solution of the free-boundary problem.
struct WSolution {
  WFragment fragment;
  double gamma = 0.0;
  double s = 0.0;
  double S = 0.0;
  double z_star = 0.0;
  double residual_max = 0.0;
  double z_max_used = 0.0;
  double unit_cost = 0.0;
  SolveDiagnostics diagnostics;
};

struct GivenBandResult {
  double gamma = 0.0;
  WFragment fragment;
  double z_max_used = 0.0;
  SolveDiagnostics diagnostics;
};

/// Unique w with pi(w) = h(z_max) + gamma.
double asymptotic_init(const ModelParams& params, double gamma, double z_max);

/**
 * Integrates w backward from (z_max, asymptotic_init) down to z_stop with an
 * adaptive Dormand-Prince 5(4) pair that lands on every grid node.
 * Throws BlowUp or StepUnderflow.
 */
WFragment integrate_w(const ModelParams& params, double gamma, double z_max, double z_stop,
                      const SolverOptions& opts = {});

/// z* = argmax w and the two crossings w = k around it. Throws NoBand if max w <= k.
BandLevels find_reorder_levels(const WFragment& fragment, double k, double tol = 1e-12);

/// Integral of (w - k) over [s, S]; throws OutOfRange outside the fragment.
double band_area(const WFragment& fragment, double s, double S, double k);

/**
 * Pointwise residual (sigma^2/2) w' + pi(w) - h(z) - gamma with w' from
 * fourth-order finite differences of the grid values. Stencils never straddle
 * z = 0 or a change of price regime; nodes with no clean stencil get NaN.
 */
std::vector<double> ode_residuals(const ModelParams& params, const WFragment& fragment);
/// Fourth-order finite-difference slope of w at every node, NaN where no clean stencil exists.
std::vector<double> finite_difference_slopes(const ModelParams& params, const WFragment& fragment);

WSolution solve_optimal(const ModelParams& params, const SolverOptions& opts = {});

/// Profit rate of the best pricing strategy under a fixed (s, S) ordering rule.
GivenBandResult solve_given_band(const ModelParams& params, double s, double S, const SolverOptions& opts = {});

struct PriceSegment {
  double z_begin;
  double z_end;
  PriceRegime regime;
};

struct PriceProfile {
  std::vector<double> z;
  std::vector<double> w;
  std::vector<double> price;
  std::vector<PriceSegment> segments;
  std::vector<double> breakpoints;
};

struct ProfileGrid {
  double z_lo;
  double z_hi;
  double step;
};

/// p*(z) = p_pi(w*(z)) on [s, z_max] with its regime segments.
PriceProfile price_profile(const ModelParams& params, const WSolution& solution,
                           std::optional<ProfileGrid> grid = std::nullopt);

}  // namespace invpricing
