#pragma once

#include <cstddef>
#include <vector>

#include "invpricing/solver.hpp"

namespace invpricing {

/// Grid and action set of the discretized decision process.
struct ChainSpec {
  double z_lo = -8.0;
  double z_hi = 20.0;
  double delta = 0.05;
  std::vector<double> price_grid;     ///< empty: `price_points` equally spaced prices
  int price_points = 81;
  std::vector<double> order_targets;  ///< empty: every grid point is a target

  /// Throws SpecInvalid.
  void validate(const DemandModel& demand) const;
};

/**
 * Locally consistent chain on z_i = z_lo + i delta. For drift b = -mu(p):
 * up = (sigma^2/2 + delta max(b,0)) / (sigma^2 + delta |b|), down likewise,
 * sojourn dt = delta^2 / (sigma^2 + delta |b|). Moves off either end reflect.
 * Arrays are indexed [state * prices + price].
 */
struct MarkovChain {
  std::vector<double> z;
  std::vector<double> prices;
  std::vector<double> up;
  std::vector<double> down;
  std::vector<double> dt;
  std::vector<double> reward;  ///< (p mu(p) - h(z)) dt per sojourn
  std::vector<char> is_target;
  double K = 0.0;
  double k = 0.0;
  double delta = 0.0;

  std::size_t states() const noexcept { return z.size(); }
  std::size_t price_count() const noexcept { return prices.size(); }
};

MarkovChain build_chain(const ModelParams& params, const ChainSpec& spec);

struct OracleOptions {
  double tol = 1e-7;            ///< span stopping threshold in profit-rate units
  long max_iterations = 4000000;
  double uniformization = 0.95;  ///< tau = this * min dt
};

struct OracleSolution {
  double gamma = 0.0;
  double gamma_lo = 0.0;  ///< span bounds at the last sweep
  double gamma_hi = 0.0;
  long iterations = 0;
  std::vector<double> z;
  std::vector<char> order;
  std::vector<std::size_t> target;  ///< order-up-to state, equal to the state itself when not ordering
  std::vector<double> price;
  std::vector<double> relative_value;
  double s_hat = 0.0;         ///< highest ordering state
  double S_hat = 0.0;         ///< its order-up-to level
  bool common_target = true;  ///< every ordering state targets S_hat
  bool order_downset = true;  ///< every state below s_hat orders
  double z_price_max = 0.0;   ///< highest-price state, ties to the larger marginal value
  double boundary_mass = 0.0; ///< stationary probability of a reflected move per step
  std::vector<double> span_history;
};

/// Relative value iteration on the uniformized chain. Throws NoConvergence.
OracleSolution solve_average_reward(const MarkovChain& chain, const OracleOptions& opts = {});

struct ComparisonReport {
  double delta = 0.0;
  double gamma_abs = 0.0;
  double gamma_rel = 0.0;
  double s_abs = 0.0;
  double S_abs = 0.0;
  double z_star_abs = 0.0;
  double price_sup = 0.0;  ///< sup |p*(z) - oracle price| on shared states
  double boundary_mass = 0.0;

  bool gamma_ok = false;   ///< relative error <= 2%
  bool levels_ok = false;  ///< both levels within 2 delta
  bool z_star_ok = false;  ///< within 3 delta and <= 0
  bool boundary_ok = false;  ///< boundary mass < 0.1%
  bool ok() const noexcept { return gamma_ok && levels_ok && z_star_ok && boundary_ok; }
};

ComparisonReport compare(const ModelParams& params, const WSolution& solution, const OracleSolution& oracle,
                         double delta);

}  // namespace invpricing
