#pragma once

#include <functional>
#include <string>
#include <variant>

namespace invpricing {

/// mu(p) = lambda1 / (p + lambda0)
struct HyperbolicDemand {
  double lambda0;
  double lambda1;
};

/// mu(p) = A - p, requires A > p_max.
struct LinearDemand {
  double A;
};

/// Arbitrary strictly decreasing rate supplied as a pair of callables.
struct CustomDemand {
  std::function<double(double)> rate;
  std::function<double(double)> rate_derivative;
};

/// Which part of the price interval a price sits in.
enum class PriceRegime { Lower, Interior, Upper };

const char* to_string(PriceRegime regime);

/**
 * Demand rate on a closed price interval together with the pricing kernel
 *
 *   Pi(p, w) = mu(p) (p - w),  p_pi(w) = smallest argmax_p Pi(p, w),
 *   pi(w) = Pi(p_pi(w), w).
 *
 * The rate must be positive and strictly decreasing on [p_min, p_max]; the
 * constructor checks this on a 1001-point grid and throws ModelInvalid.
 * Immutable after construction.
 */
class DemandModel {
public:
  using Family = std::variant<HyperbolicDemand, LinearDemand, CustomDemand>;

  DemandModel(double p_min, double p_max, Family family);

  static DemandModel hyperbolic(double lambda0, double lambda1, double p_min, double p_max);
  static DemandModel linear(double A, double p_min, double p_max);

  double p_min() const noexcept { return p_min_; }
  double p_max() const noexcept { return p_max_; }
  const Family& family() const noexcept { return family_; }

  /// mu(p); throws PriceOutOfBounds outside [p_min, p_max].
  double rate(double p) const;
  double rate_derivative(double p) const;

  /// Pi(p, w); throws PriceOutOfBounds outside [p_min, p_max].
  double payoff(double p, double w) const;

  double best_price(double w) const;
  double pi(double w) const;
  /// pi'(w) = -mu(p_pi(w)).
  double pi_derivative(double w) const;

  /// kappa = max over the price interval of p mu(p).
  double max_revenue_rate() const;

  PriceRegime regime(double p) const noexcept;

  std::string describe() const;

  // Unchecked evaluation for hot loops; p must already lie in the interval.
  double rate_unchecked(double p) const;

private:
  void validate() const;
  double custom_argmax(const std::function<double(double)>& objective) const;

  double p_min_;
  double p_max_;
  Family family_;
};

}  // namespace invpricing
