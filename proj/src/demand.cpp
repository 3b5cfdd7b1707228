#include "invpricing/demand.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <vector>

#include <boost/math/tools/minima.hpp>

#include "invpricing/errors.hpp"

namespace invpricing {

namespace {

constexpr int kValidationPoints = 1001;
// Coarse scan used to seed local refinement for custom families.
constexpr int kCustomScanPoints = 65;
constexpr double kTieTolerance = 1e-9;

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

}  // namespace

const char* to_string(PriceRegime regime) {
  switch (regime) {
    case PriceRegime::Lower: return "lower";
    case PriceRegime::Interior: return "interior";
    case PriceRegime::Upper: return "upper";
  }
  return "unknown";
}

DemandModel::DemandModel(double p_min, double p_max, Family family)
    : p_min_(p_min), p_max_(p_max), family_(std::move(family)) {
  validate();
}

DemandModel DemandModel::hyperbolic(double lambda0, double lambda1, double p_min, double p_max) {
  return DemandModel(p_min, p_max, HyperbolicDemand{lambda0, lambda1});
}

DemandModel DemandModel::linear(double A, double p_min, double p_max) {
  return DemandModel(p_min, p_max, LinearDemand{A});
}

void DemandModel::validate() const {
  if (!std::isfinite(p_min_) || !std::isfinite(p_max_) || p_min_ < 0.0)
    throw ModelInvalid("demand: p_min must be finite and >= 0");
  if (!(p_max_ > p_min_)) throw ModelInvalid("demand: p_max must exceed p_min");

  std::visit(Overloaded{
                 [](const HyperbolicDemand& d) {
                   if (!(d.lambda0 > 0.0) || !(d.lambda1 > 0.0))
                     throw ModelInvalid("demand: hyperbolic family needs lambda0 > 0 and lambda1 > 0");
                 },
                 [this](const LinearDemand& d) {
                   if (!(d.A > p_max_)) throw ModelInvalid("demand: linear family needs A > p_max");
                 },
                 [](const CustomDemand& d) {
                   if (!d.rate || !d.rate_derivative)
                     throw ModelInvalid("demand: custom family needs rate and rate_derivative");
                 },
             },
             family_);

  const double span = p_max_ - p_min_;
  for (int i = 0; i < kValidationPoints; ++i) {
    const double p = p_min_ + span * i / (kValidationPoints - 1);
    const double mu = rate_unchecked(p);
    if (!(mu > 0.0)) {
      std::ostringstream os;
      os << "demand: rate must be positive, mu(" << p << ") = " << mu;
      throw ModelInvalid(os.str());
    }
    const double dmu = rate_derivative(p);
    if (!(dmu < 0.0)) {
      std::ostringstream os;
      os << "demand: rate must be strictly decreasing, mu'(" << p << ") = " << dmu;
      throw ModelInvalid(os.str());
    }
    // Second-order finite difference, one-sided at the interval ends.
    const double step = 1e-5 * std::max(1.0, std::abs(p)) * std::min(1.0, span);
    double fd;
    if (i == 0) {
      fd = (-3.0 * rate_unchecked(p) + 4.0 * rate_unchecked(p + step) - rate_unchecked(p + 2 * step)) /
           (2.0 * step);
    } else if (i == kValidationPoints - 1) {
      fd = (3.0 * rate_unchecked(p) - 4.0 * rate_unchecked(p - step) + rate_unchecked(p - 2 * step)) /
           (2.0 * step);
    } else {
      fd = (rate_unchecked(p + step) - rate_unchecked(p - step)) / (2.0 * step);
    }
    if (std::abs(fd - dmu) > 1e-6 * std::max(std::abs(dmu), 1e-12)) {
      std::ostringstream os;
      os << "demand: rate_derivative disagrees with finite differences at p = " << p << " (" << dmu
         << " vs " << fd << ")";
      throw ModelInvalid(os.str());
    }
  }
}

double DemandModel::rate_unchecked(double p) const {
  return std::visit(Overloaded{
                        [p](const HyperbolicDemand& d) { return d.lambda1 / (p + d.lambda0); },
                        [p](const LinearDemand& d) { return d.A - p; },
                        [p](const CustomDemand& d) { return d.rate(p); },
                    },
                    family_);
}

double DemandModel::rate(double p) const {
  if (!(p >= p_min_ && p <= p_max_)) {
    std::ostringstream os;
    os << "price " << p << " outside [" << p_min_ << ", " << p_max_ << "]";
    throw PriceOutOfBounds(os.str());
  }
  const double mu = rate_unchecked(p);
  if (!(mu > 0.0)) throw ModelInvalid("demand rate is not positive");
  return mu;
}

double DemandModel::rate_derivative(double p) const {
  return std::visit(Overloaded{
                        [p](const HyperbolicDemand& d) {
                          const double q = p + d.lambda0;
                          return -d.lambda1 / (q * q);
                        },
                        [](const LinearDemand&) { return -1.0; },
                        [p](const CustomDemand& d) { return d.rate_derivative(p); },
                    },
                    family_);
}

double DemandModel::payoff(double p, double w) const { return rate(p) * (p - w); }

// Smallest maximizer of a function on [p_min, p_max]. A coarse scan locates
// every local maximum, each is refined by Brent's method, and the smallest
// candidate within kTieTolerance of the best value wins.
double DemandModel::custom_argmax(const std::function<double(double)>& objective) const {
  const double span = p_max_ - p_min_;
  std::vector<double> grid(kCustomScanPoints), value(kCustomScanPoints);
  for (int i = 0; i < kCustomScanPoints; ++i) {
    grid[i] = i == kCustomScanPoints - 1 ? p_max_ : p_min_ + span * i / (kCustomScanPoints - 1);
    value[i] = objective(grid[i]);
  }

  struct Candidate {
    double p;
    double v;
  };
  std::vector<Candidate> candidates;
  const auto refine = [&](double a, double b) {
    std::uintmax_t iters = 200;
    const auto r = boost::math::tools::brent_find_minima([&](double p) { return -objective(p); }, a, b,
                                                         34, iters);
    candidates.push_back({r.first, -r.second});
  };
  for (int i = 0; i < kCustomScanPoints; ++i) {
    const bool left_ok = i == 0 || value[i] >= value[i - 1];
    const bool right_ok = i == kCustomScanPoints - 1 || value[i] > value[i + 1];
    if (!(left_ok && right_ok)) continue;
    candidates.push_back({grid[i], value[i]});
    if (i > 0) refine(grid[i - 1], grid[i]);
    if (i < kCustomScanPoints - 1) refine(grid[i], grid[i + 1]);
  }

  double best = -INFINITY;
  for (const auto& c : candidates) best = std::max(best, c.v);
  double chosen = p_max_;
  for (const auto& c : candidates)
    if (c.v >= best - kTieTolerance) chosen = std::min(chosen, c.p);
  return std::clamp(chosen, p_min_, p_max_);
}

double DemandModel::best_price(double w) const {
  return std::visit(Overloaded{
                        [&](const HyperbolicDemand& d) {
                          // Pi is monotone in p with the sign of w + lambda0; at the tie every
                          // price is optimal and the smallest one is taken.
                          return w + d.lambda0 > 0.0 ? p_max_ : p_min_;
                        },
                        [&](const LinearDemand& d) { return std::clamp(0.5 * (d.A + w), p_min_, p_max_); },
                        [&](const CustomDemand& d) {
                          return custom_argmax([&](double p) { return d.rate(p) * (p - w); });
                        },
                    },
                    family_);
}

double DemandModel::pi(double w) const {
  const double p = best_price(w);
  return rate_unchecked(p) * (p - w);
}

double DemandModel::pi_derivative(double w) const { return -rate_unchecked(best_price(w)); }

double DemandModel::max_revenue_rate() const {
  return std::visit(Overloaded{
                        [&](const HyperbolicDemand& d) {
                          // p lambda1 / (p + lambda0) is increasing in p.
                          return p_max_ * d.lambda1 / (p_max_ + d.lambda0);
                        },
                        [&](const LinearDemand& d) {
                          const double p = std::clamp(0.5 * d.A, p_min_, p_max_);
                          return p * (d.A - p);
                        },
                        [&](const CustomDemand& d) {
                          const double p = custom_argmax([&](double q) { return q * d.rate(q); });
                          return p * d.rate(p);
                        },
                    },
                    family_);
}

PriceRegime DemandModel::regime(double p) const noexcept {
  if (p <= p_min_) return PriceRegime::Lower;
  if (p >= p_max_) return PriceRegime::Upper;
  return PriceRegime::Interior;
}

std::string DemandModel::describe() const {
  std::ostringstream os;
  std::visit(Overloaded{
                 [&](const HyperbolicDemand& d) {
                   os << "hyperbolic(lambda0=" << d.lambda0 << ", lambda1=" << d.lambda1 << ")";
                 },
                 [&](const LinearDemand& d) { os << "linear(A=" << d.A << ")"; },
                 [&](const CustomDemand&) { os << "custom"; },
             },
             family_);
  os << " on [" << p_min_ << ", " << p_max_ << "]";
  return os.str();
}

}  // namespace invpricing
