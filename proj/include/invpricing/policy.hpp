#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "invpricing/errors.hpp"
#include "invpricing/solver.hpp"

namespace invpricing {

struct Action {
  double order;  ///< quantity ordered now, >= 0
  double price;  ///< price charged at the post-order level
};

/**
 * (s, S, p) policy. Prices come either from a tabulated marginal value w(z),
 * interpolated linearly and mapped through best_price, or from a constant.
 * Immutable; copies share the clamp counter.
 */
class Policy {
public:
  /// Table taken from the solution grid on [s*, z_max].
  static Policy from_solution(const ModelParams& params, const WSolution& solution);
  /// Same prices as `from_solution` but a different ordering band.
  Policy with_band(double s, double S) const;
  /// Table from explicit (z, w) samples, z strictly increasing.
  static Policy from_table(const DemandModel& demand, double s, double S, std::vector<double> z,
                           std::vector<double> w);
  static Policy constant_price(const DemandModel& demand, double s, double S, double price);

  double s() const noexcept { return s_; }
  double S() const noexcept { return S_; }
  double z_cap() const noexcept { return z_.empty() ? 0.0 : z_.back(); }
  bool is_constant() const noexcept { return constant_.has_value(); }

  /// Order up to S at or below s, then price at the resulting level.
  Action apply(double z) const;
  /// Table price at level z; levels below the table use its first entry.
  double price_at(double z) const;

  /// Number of price queries above z_cap so far.
  std::size_t clamp_count() const noexcept { return clamped_->load(std::memory_order_relaxed); }

private:
  Policy(const DemandModel& demand, double s, double S);

  DemandModel demand_;
  double s_;
  double S_;
  std::vector<double> z_;
  std::vector<double> w_;
  bool uniform_ = false;  // z_[1..] evenly spaced, enables O(1) lookup
  double step_ = 0.0;
  std::optional<double> constant_;
  std::shared_ptr<std::atomic<std::size_t>> clamped_;
};

/// V*(z) = int_{s*}^z w*(y) dy above s*, k (z - s*) below.
class ValueFunction {
public:
  const WFragment& fragment() const noexcept { return fragment_; }
  double s() const noexcept { return s_; }
  double S() const noexcept { return S_; }
  double unit_cost() const noexcept { return k_; }
  double z_max() const noexcept { return grid_.back(); }

  /// s*, then every solution node above s* up to z_max.
  const std::vector<double>& grid() const noexcept { return grid_; }
  const std::vector<double>& values() const noexcept { return values_; }

  double value(double z) const;
  /// V*'(z); k below s*. Throws OutOfRange above z_max.
  double derivative(double z) const;

  friend ValueFunction build_value_function(const WSolution& solution);

private:
  WFragment fragment_;
  double s_ = 0.0;
  double S_ = 0.0;
  double k_ = 0.0;
  std::vector<double> grid_;
  std::vector<double> values_;
};

ValueFunction build_value_function(const WSolution& solution);

struct VerificationOptions {
  double generator_tol = 1e-6;
  double slope_tol = 1e-8;
  double pair_tol = 1e-8;
  int price_points = 201;
  double below_band_span = 5.0;  ///< generator checked on [s* - span, s*]
  int pair_checks = 100;
  std::uint64_t seed = 20240601;
};

struct VerificationReport {
  // (a) generator sup over the (z, p) grid
  double generator_max = 0.0;
  double generator_arg_z = 0.0;
  double generator_arg_p = 0.0;
  double below_band_max = 0.0;      ///< max of pi(k) - h(z) - gamma below s*, should be < 0
  double band_interior_max_abs = 0.0;  ///< max |sup_p generator| on (s*, S*)
  std::size_t generator_nodes = 0;
  std::size_t generator_nodes_skipped = 0;
  // (b)
  double slope_excess_max = 0.0;
  double slope_excess_arg_z = 0.0;
  // (c)
  double growth_exponent_fit = 0.0;
  double growth_exponent_limit = 0.0;
  // (d)
  int pair_checks = 0;
  int pair_failures = 0;
  double pair_worst_margin = 0.0;  ///< max of V(z1) - V(z2) - K - k (z1 - z2)
  double pair_worst_z1 = 0.0;
  double pair_worst_z2 = 0.0;

  bool generator_ok = false;
  bool slope_ok = false;
  bool growth_ok = false;
  bool pairs_ok = false;
  bool passed() const noexcept { return generator_ok && slope_ok && growth_ok && pairs_ok; }
  std::string summary() const;
};

class VerificationFailed : public Error {
public:
  VerificationFailed(const std::string& what, VerificationReport report)
      : Error(what), report_(std::move(report)) {}
  const VerificationReport& report() const noexcept { return report_; }

private:
  VerificationReport report_;
};

/// Computes every check without throwing.
VerificationReport check_upper_bound(const ModelParams& params, const ValueFunction& vf, double gamma,
                                     const VerificationOptions& opts = {});
/// check_upper_bound, throwing VerificationFailed naming the first failing check.
VerificationReport verify_upper_bound(const ModelParams& params, const ValueFunction& vf, double gamma,
                                      const VerificationOptions& opts = {});

/// CSV `z,w,V,price` on the value-function grid, 12 significant digits.
void write_curves(std::ostream& out, const ModelParams& params, const ValueFunction& vf);

struct CurveTable {
  std::vector<double> z;
  std::vector<double> w;
  std::vector<double> V;
  std::vector<double> price;
};
/// Parses the format written by write_curves. Throws ConfigInvalid.
CurveTable read_curves(std::istream& in);

}  // namespace invpricing
