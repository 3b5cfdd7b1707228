#include "invpricing/policy.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

namespace invpricing {

namespace {

bool evenly_spaced(const std::vector<double>& z, std::size_t from, double& step) {
  if (z.size() < from + 2) return false;
  step = z[from + 1] - z[from];
  for (std::size_t i = from + 1; i + 1 < z.size(); ++i)
    if (std::abs(z[i + 1] - z[i] - step) > 1e-9 * step) return false;
  return step > 0.0;
}

}  // namespace

Policy::Policy(const DemandModel& demand, double s, double S)
    : demand_(demand), s_(s), S_(S), clamped_(std::make_shared<std::atomic<std::size_t>>(0)) {
  if (!std::isfinite(s) || !std::isfinite(S) || !(s < S)) throw OutOfRange("policy: need finite s < S");
}

Policy Policy::from_solution(const ModelParams& params, const WSolution& solution) {
  const WFragment& f = solution.fragment;
  std::vector<double> z{solution.s}, w{f.value(solution.s)};
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (f.z(i) <= solution.s) continue;
    z.push_back(f.z(i));
    w.push_back(f.w[i]);
  }
  return from_table(params.demand, solution.s, solution.S, std::move(z), std::move(w));
}

Policy Policy::with_band(double s, double S) const {
  Policy p(demand_, s, S);
  p.z_ = z_;
  p.w_ = w_;
  p.uniform_ = uniform_;
  p.step_ = step_;
  p.constant_ = constant_;
  return p;
}

Policy Policy::from_table(const DemandModel& demand, double s, double S, std::vector<double> z,
                          std::vector<double> w) {
  if (z.size() != w.size() || z.size() < 2) throw OutOfRange("policy: table needs >= 2 matching (z, w) rows");
  for (std::size_t i = 1; i < z.size(); ++i)
    if (!(z[i] > z[i - 1])) throw OutOfRange("policy: table z must be strictly increasing");
  for (double v : w)
    if (!std::isfinite(v)) throw OutOfRange("policy: table w must be finite");
  Policy p(demand, s, S);
  p.z_ = std::move(z);
  p.w_ = std::move(w);
  p.uniform_ = evenly_spaced(p.z_, 1, p.step_);
  return p;
}

Policy Policy::constant_price(const DemandModel& demand, double s, double S, double price) {
  if (!(price >= demand.p_min() && price <= demand.p_max()))
    throw PriceOutOfBounds("policy: constant price outside [p_min, p_max]");
  Policy p(demand, s, S);
  p.constant_ = price;
  return p;
}

double Policy::price_at(double z) const {
  if (constant_) return *constant_;
  if (z >= z_.back()) {
    if (z > z_.back()) clamped_->fetch_add(1, std::memory_order_relaxed);
    return demand_.best_price(w_.back());
  }
  if (z <= z_.front()) return demand_.best_price(w_.front());

  std::size_t i;
  if (uniform_ && z >= z_[1]) {
    i = 1 + static_cast<std::size_t>((z - z_[1]) / step_);
    i = std::min(i, z_.size() - 2);
    // Floating error in the division can land one cell off.
    if (z < z_[i]) --i;
    else if (z >= z_[i + 1]) ++i;
  } else {
    i = static_cast<std::size_t>(std::upper_bound(z_.begin(), z_.end(), z) - z_.begin()) - 1;
  }
  const double t = (z - z_[i]) / (z_[i + 1] - z_[i]);
  return demand_.best_price(w_[i] + t * (w_[i + 1] - w_[i]));
}

Action Policy::apply(double z) const {
  const double order = z <= s_ ? S_ - z : 0.0;
  return {order, price_at(order > 0.0 ? S_ : z)};
}

ValueFunction build_value_function(const WSolution& solution) {
  ValueFunction vf;
  vf.fragment_ = solution.fragment;
  vf.s_ = solution.s;
  vf.S_ = solution.S;
  vf.k_ = solution.unit_cost;
  const WFragment& f = vf.fragment_;
  vf.grid_.push_back(solution.s);
  vf.values_.push_back(0.0);
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double z = f.z(i);
    if (z <= solution.s) continue;
    vf.values_.push_back(vf.values_.back() + f.integral(vf.grid_.back(), z));
    vf.grid_.push_back(z);
  }
  return vf;
}

double ValueFunction::value(double z) const {
  if (z <= s_) return k_ * (z - s_);
  if (z > grid_.back()) throw OutOfRange("value function: z above z_max");
  const auto i = static_cast<std::size_t>(std::upper_bound(grid_.begin(), grid_.end(), z) - grid_.begin()) - 1;
  return values_[i] + fragment_.integral(grid_[i], z);
}

double ValueFunction::derivative(double z) const {
  if (z < s_) return k_;
  if (z > grid_.back()) throw OutOfRange("value function: z above z_max");
  return fragment_.value(z);
}

std::string VerificationReport::summary() const {
  std::ostringstream os;
  os.precision(6);
  os << "generator: max " << generator_max << " at (z=" << generator_arg_z << ", p=" << generator_arg_p
     << "), below band " << below_band_max << ", band |sup| " << band_interior_max_abs << ", " << generator_nodes
     << " nodes (" << generator_nodes_skipped << " skipped) " << (generator_ok ? "ok" : "FAIL") << '\n';
  os << "slope outside band: max V'-k " << slope_excess_max << " at z=" << slope_excess_arg_z << ' '
     << (slope_ok ? "ok" : "FAIL") << '\n';
  os << "growth: fitted exponent " << growth_exponent_fit << " (limit " << growth_exponent_limit << ") "
     << (growth_ok ? "ok" : "FAIL") << '\n';
  os << "pairs: " << pair_checks - pair_failures << '/' << pair_checks << " worst margin " << pair_worst_margin
     << " at (" << pair_worst_z1 << ", " << pair_worst_z2 << ") " << (pairs_ok ? "ok" : "FAIL") << '\n';
  return os.str();
}

VerificationReport check_upper_bound(const ModelParams& params, const ValueFunction& vf, double gamma,
                                     const VerificationOptions& opts) {
  VerificationReport rep;
  const DemandModel& demand = params.demand;
  const WFragment& f = vf.fragment();
  const double s = vf.s(), S = vf.S(), k = vf.unit_cost();
  const double half_var = 0.5 * params.sigma * params.sigma;

  std::vector<double> prices(static_cast<std::size_t>(opts.price_points));
  for (int j = 0; j < opts.price_points; ++j)
    prices[j] = demand.p_min() + (demand.p_max() - demand.p_min()) * j / (opts.price_points - 1);

  rep.generator_max = -std::numeric_limits<double>::infinity();
  rep.below_band_max = -std::numeric_limits<double>::infinity();
  // sup over the price grid plus the kernel's own maximizer
  const auto sup_generator = [&](double z, double w, double second) {
    double best = -std::numeric_limits<double>::infinity(), best_p = 0.0;
    const double base = half_var * second - params.cost.holding(z) - gamma;
    const auto consider = [&](double p) {
      const double g = base + demand.payoff(p, w);
      if (g > best) best = g, best_p = p;
    };
    for (double p : prices) consider(p);
    consider(demand.best_price(w));
    ++rep.generator_nodes;
    if (best > rep.generator_max) {
      rep.generator_max = best;
      rep.generator_arg_z = z;
      rep.generator_arg_p = best_p;
    }
    return best;
  };

  // Below s*: V' = k and V'' = 0.
  const auto n_below = static_cast<long>(std::floor(opts.below_band_span / f.step));
  for (long j = n_below; j >= 1; --j) {
    const double z = s - static_cast<double>(j) * f.step;
    rep.below_band_max = std::max(rep.below_band_max, sup_generator(z, k, 0.0));
  }

  const std::vector<double> d2 = finite_difference_slopes(params, f);
  for (std::size_t i = 0; i < f.size(); ++i) {
    const double z = f.z(i);
    if (z <= s) continue;
    if (std::isnan(d2[i])) {
      ++rep.generator_nodes_skipped;
      continue;
    }
    const double g = sup_generator(z, f.w[i], d2[i]);
    if (z < S) rep.band_interior_max_abs = std::max(rep.band_interior_max_abs, std::abs(g));
  }
  rep.generator_ok = rep.generator_max <= opts.generator_tol;

  // (b) below s* the excess is exactly zero
  rep.slope_excess_max = 0.0;
  rep.slope_excess_arg_z = s - opts.below_band_span;
  const auto slope_point = [&](double z, double w) {
    if (w - k > rep.slope_excess_max) rep.slope_excess_max = w - k, rep.slope_excess_arg_z = z;
  };
  slope_point(s, vf.derivative(s));
  slope_point(S, vf.derivative(S));
  for (std::size_t i = 0; i < f.size(); ++i)
    if (f.z(i) >= S) slope_point(f.z(i), f.w[i]);
  rep.slope_ok = rep.slope_excess_max <= opts.slope_tol;

  // (c) least-squares slope of log|w| against log z on [z_max/2, z_max]
  {
    const double z_hi = vf.z_max(), z_lo = 0.5 * z_hi;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < f.size(); ++i) {
      const double z = f.z(i);
      if (z < z_lo || z > z_hi || z <= 0.0 || f.w[i] == 0.0) continue;
      const double x = std::log(z), y = std::log(std::abs(f.w[i]));
      sx += x, sy += y, sxx += x * x, sxy += x * y;
      ++n;
    }
    const double denom = static_cast<double>(n) * sxx - sx * sx;
    rep.growth_exponent_fit = n >= 2 && denom > 0.0 ? (static_cast<double>(n) * sxy - sx * sy) / denom
                                                    : std::numeric_limits<double>::quiet_NaN();
    rep.growth_exponent_limit = params.cost.growth_exponent() + 1.0;
    rep.growth_ok = rep.growth_exponent_fit <= rep.growth_exponent_limit;
  }

  // (d) direct spot checks of V(z1) - V(z2) <= K + k (z1 - z2) for z1 >= z2
  {
    std::mt19937_64 rng(opts.seed);
    std::uniform_real_distribution<double> pick(s - opts.below_band_span, vf.z_max());
    rep.pair_worst_margin = -std::numeric_limits<double>::infinity();
    const auto check_pair = [&](double z1, double z2) {
      const double margin = vf.value(z1) - vf.value(z2) - params.K - k * (z1 - z2);
      ++rep.pair_checks;
      if (margin > opts.pair_tol) ++rep.pair_failures;
      if (margin > rep.pair_worst_margin) rep.pair_worst_margin = margin, rep.pair_worst_z1 = z1, rep.pair_worst_z2 = z2;
    };
    for (int j = 0; j < opts.pair_checks; ++j) {
      const double a = pick(rng), b = pick(rng);
      check_pair(std::max(a, b), std::min(a, b));
    }
    rep.pairs_ok = rep.pair_failures == 0;
  }
  return rep;
}

VerificationReport verify_upper_bound(const ModelParams& params, const ValueFunction& vf, double gamma,
                                      const VerificationOptions& opts) {
  VerificationReport rep = check_upper_bound(params, vf, gamma, opts);
  std::ostringstream os;
  os.precision(12);
  if (!rep.generator_ok)
    os << "generator condition fails: " << rep.generator_max << " at z = " << rep.generator_arg_z
       << ", p = " << rep.generator_arg_p;
  else if (!rep.slope_ok)
    os << "V' exceeds k outside the band by " << rep.slope_excess_max << " at z = " << rep.slope_excess_arg_z;
  else if (!rep.growth_ok)
    os << "V' grows with exponent " << rep.growth_exponent_fit << " > " << rep.growth_exponent_limit;
  else if (!rep.pairs_ok)
    os << rep.pair_failures << " ordering-cost pair checks fail, worst at z1 = " << rep.pair_worst_z1
       << ", z2 = " << rep.pair_worst_z2;
  else
    return rep;
  throw VerificationFailed(os.str(), std::move(rep));
}

void write_curves(std::ostream& out, const ModelParams& params, const ValueFunction& vf) {
  const auto old_precision = out.precision(12);
  out << "z,w,V,price\n";
  const auto& grid = vf.grid();
  const auto& values = vf.values();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double w = vf.derivative(grid[i]);
    out << grid[i] << ',' << w << ',' << values[i] << ',' << params.demand.best_price(w) << '\n';
  }
  out.precision(old_precision);
}

CurveTable read_curves(std::istream& in) {
  CurveTable t;
  std::string line;
  if (!std::getline(in, line) || line != "z,w,V,price") throw ConfigInvalid("curves: expected header z,w,V,price");
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::istringstream ls(line);
    double v[4];
    char sep;
    for (int c = 0; c < 4; ++c) {
      if (!(ls >> v[c]) || (c < 3 && !(ls >> sep && sep == ',')))
        throw ConfigInvalid("curves: malformed row " + std::to_string(row));
    }
    t.z.push_back(v[0]);
    t.w.push_back(v[1]);
    t.V.push_back(v[2]);
    t.price.push_back(v[3]);
  }
  if (t.z.size() < 2) throw ConfigInvalid("curves: fewer than two rows");
  return t;
}

}  // namespace invpricing
