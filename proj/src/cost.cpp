#include "invpricing/cost.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include <boost/math/tools/minima.hpp>

#include "invpricing/errors.hpp"

namespace invpricing {

namespace {

constexpr int kGridPoints = 2001;
constexpr double kGridHalfWidth = 50.0;
constexpr double kProbe = 1e4;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::vector<double> validation_grid() {
  std::vector<double> z(kGridPoints);
  for (int i = 0; i < kGridPoints; ++i)
    z[i] = -kGridHalfWidth + 2.0 * kGridHalfWidth * i / (kGridPoints - 1);
  z[kGridPoints / 2] = 0.0;
  return z;
}

[[noreturn]] void fail(const std::string& what, double z) {
  std::ostringstream os;
  os << "cost: " << what << " at z = " << z;
  throw ModelInvalid(os.str());
}

}  // namespace

CostModel::CostModel(Family family) : family_(std::move(family)) {
  growth_exponent_ = std::visit(Overloaded{
                                    [](const AsymmetricQuadraticCost&) { return 2; },
                                    [](const PowerCost& c) {
                                      return static_cast<int>(std::ceil(std::max(c.a_plus, c.a_minus)));
                                    },
                                    [](const CustomCost& c) { return c.growth_exponent; },
                                },
                                family_);
  validate();
}

CostModel CostModel::quadratic(double c_plus, double c_minus) {
  return CostModel(AsymmetricQuadraticCost{c_plus, c_minus});
}

CostModel CostModel::power(double c_plus, double c_minus, double a_plus, double a_minus) {
  return CostModel(PowerCost{c_plus, c_minus, a_plus, a_minus});
}

double CostModel::holding(double z) const {
  return std::visit(Overloaded{
                        [z](const AsymmetricQuadraticCost& c) { return (z >= 0.0 ? c.c_plus : c.c_minus) * z * z; },
                        [z](const PowerCost& c) {
                          return z >= 0.0 ? c.c_plus * std::pow(z, c.a_plus)
                                          : c.c_minus * std::pow(-z, c.a_minus);
                        },
                        [z](const CustomCost& c) { return c.h(z); },
                    },
                    family_);
}

double CostModel::derivative_unchecked(double z) const {
  return std::visit(Overloaded{
                        [z](const AsymmetricQuadraticCost& c) { return 2.0 * (z >= 0.0 ? c.c_plus : c.c_minus) * z; },
                        [z](const PowerCost& c) {
                          return z >= 0.0 ? c.c_plus * c.a_plus * std::pow(z, c.a_plus - 1.0)
                                          : -c.c_minus * c.a_minus * std::pow(-z, c.a_minus - 1.0);
                        },
                        [z](const CustomCost& c) { return c.h_derivative(z); },
                    },
                    family_);
}

double CostModel::holding_derivative(double z) const {
  if (z == 0.0) throw UndefinedAtZero("cost: h'(0) is undefined");
  return derivative_unchecked(z);
}

void CostModel::validate() const {
  std::visit(Overloaded{
                 [](const AsymmetricQuadraticCost& c) {
                   if (!(c.c_plus > 0.0) || !(c.c_minus > 0.0))
                     throw ModelInvalid("cost: quadratic family needs c_plus > 0 and c_minus > 0");
                 },
                 [](const PowerCost& c) {
                   if (!(c.c_plus > 0.0) || !(c.c_minus > 0.0))
                     throw ModelInvalid("cost: power family needs c_plus > 0 and c_minus > 0");
                   if (!(c.a_plus > 1.0) || !(c.a_minus > 1.0))
                     throw ModelInvalid("cost: power family needs exponents > 1 (strict convexity)");
                 },
                 [](const CustomCost& c) {
                   if (!c.h || !c.h_derivative) throw ModelInvalid("cost: custom family needs h and h'");
                   if (c.growth_exponent < 1) throw ModelInvalid("cost: growth exponent must be >= 1");
                 },
             },
             family_);

  if (holding(0.0) != 0.0) fail("h(0) must be 0", 0.0);

  const auto grid = validation_grid();
  std::vector<double> h(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double z = grid[i];
    h[i] = holding(z);
    if (!(h[i] >= 0.0)) fail("h must be nonnegative", z);
    if (z == 0.0) continue;
    const double dh = derivative_unchecked(z);
    if (z < 0.0 && !(dh < 0.0)) fail("h' must be negative for z < 0", z);
    if (z > 0.0 && !(dh > 0.0)) fail("h' must be positive for z > 0", z);
    if (std::abs(z) > 1e-3) {
      const double step = 1e-6 * std::max(1.0, std::abs(z));
      const double fd = (holding(z + step) - holding(z - step)) / (2.0 * step);
      if (std::abs(fd - dh) > 1e-6 * std::max(std::abs(dh), 1.0))
        fail("h' disagrees with finite differences", z);
    }
  }
  for (double z : {-kProbe, kProbe}) {
    const double dh = derivative_unchecked(z);
    if (z < 0.0 ? !(dh < 0.0) : !(dh > 0.0)) fail("h' has the wrong sign", z);
  }

  // Strict convexity: the midpoint of every consecutive triple lies strictly
  // below the chord.
  for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
    if (!(h[i] < 0.5 * (h[i - 1] + h[i + 1]))) fail("h must be strictly convex", grid[i]);
  }

  // Polynomial bound witness: the ratio h(z) / |z|^n at the far probes may not
  // exceed the largest ratio seen on the grid by more than a factor of 10.
  const double n = growth_exponent_;
  double ratio = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (std::abs(grid[i]) >= 1.0) ratio = std::max(ratio, h[i] / std::pow(std::abs(grid[i]), n));
  for (double z : {-kProbe, kProbe}) {
    const double probe_ratio = holding(z) / std::pow(std::abs(z), n);
    if (!(probe_ratio <= 10.0 * ratio + 1e-12)) fail("h grows faster than the declared exponent", z);
  }
}

LinearBound CostModel::lower_linear_bound() const {
  // Convexity and h(0) = 0 put h above the chords through the origin and
  // +-1, so the smaller of h(-1), h(1) is a valid slope for |z| >= 1.
  // h - d1 |z| is convex on each half-line, vanishes at 0 and is >= 0 at +-1,
  // so its minimum sits in [-1, 1].
  const double d1 = std::min(holding(-1.0), holding(1.0));
  const auto gap = [&](double z) { return holding(z) - d1 * std::abs(z); };
  const auto right = boost::math::tools::brent_find_minima(gap, 0.0, 1.0, 52);
  const auto left = boost::math::tools::brent_find_minima(gap, -1.0, 0.0, 52);
  const double d2 = std::min({0.0, right.second, left.second});
  return {d1, d2};
}

std::string CostModel::describe() const {
  std::ostringstream os;
  std::visit(Overloaded{
                 [&](const AsymmetricQuadraticCost& c) {
                   os << "quadratic(c_plus=" << c.c_plus << ", c_minus=" << c.c_minus << ")";
                 },
                 [&](const PowerCost& c) {
                   os << "power(c_plus=" << c.c_plus << ", c_minus=" << c.c_minus << ", a_plus=" << c.a_plus
                      << ", a_minus=" << c.a_minus << ")";
                 },
                 [&](const CustomCost& c) { os << "custom(n=" << c.growth_exponent << ")"; },
             },
             family_);
  return os.str();
}

}  // namespace invpricing
