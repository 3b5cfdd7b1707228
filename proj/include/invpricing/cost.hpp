#pragma once

#include <functional>
#include <string>
#include <variant>

namespace invpricing {

/// h(z) = c_plus z^2 for z >= 0 and c_minus z^2 for z < 0.
struct AsymmetricQuadraticCost {
  double c_plus;
  double c_minus;
};

/// h(z) = c_plus z^a_plus for z >= 0 and c_minus |z|^a_minus for z < 0.
struct PowerCost {
  double c_plus;
  double c_minus;
  double a_plus;
  double a_minus;
};

struct CustomCost {
  std::function<double(double)> h;
  std::function<double(double)> h_derivative;
  int growth_exponent;
};

/// Constants of the lower bound h(z) >= d1 |z| + d2.
struct LinearBound {
  double d1;
  double d2;
};

/**
 * Holding/shortage cost rate. Construction checks h(0) = 0, h >= 0, the sign
 * of h', strict convexity and the declared polynomial growth exponent on a
 * 2001-point grid over [-50, 50] plus the probes +-1e4, and throws
 * ModelInvalid on the first violation.
 */
class CostModel {
public:
  using Family = std::variant<AsymmetricQuadraticCost, PowerCost, CustomCost>;

  explicit CostModel(Family family);

  static CostModel quadratic(double c_plus, double c_minus);
  static CostModel power(double c_plus, double c_minus, double a_plus, double a_minus);

  const Family& family() const noexcept { return family_; }
  int growth_exponent() const noexcept { return growth_exponent_; }

  double holding(double z) const;
  /// h'(z) for z != 0; throws UndefinedAtZero at the origin.
  double holding_derivative(double z) const;

  LinearBound lower_linear_bound() const;

  std::string describe() const;

private:
  void validate() const;
  double derivative_unchecked(double z) const;

  Family family_;
  int growth_exponent_ = 1;
};

}  // namespace invpricing
