#include "invpricing/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "invpricing/errors.hpp"

namespace invpricing {

void ChainSpec::validate(const DemandModel& demand) const {
  if (!(delta > 0.0) || !std::isfinite(delta)) throw SpecInvalid("chain: delta must be > 0");
  if (!std::isfinite(z_lo) || !std::isfinite(z_hi) || !(z_lo < z_hi)) throw SpecInvalid("chain: need z_lo < z_hi");
  if ((z_hi - z_lo) / delta > 1e7) throw SpecInvalid("chain: too many states");
  if ((z_hi - z_lo) / delta < 4.0) throw SpecInvalid("chain: fewer than 5 states");
  if (price_grid.empty() && price_points < 2) throw SpecInvalid("chain: need at least 2 prices");
  for (double p : price_grid)
    if (!(p >= demand.p_min() && p <= demand.p_max())) throw SpecInvalid("chain: price outside [p_min, p_max]");
  for (double q : order_targets)
    if (!(q >= z_lo && q <= z_hi)) throw SpecInvalid("chain: order target outside [z_lo, z_hi]");
}

MarkovChain build_chain(const ModelParams& params, const ChainSpec& spec) {
  params.validate();
  spec.validate(params.demand);
  MarkovChain c;
  c.K = params.K;
  c.k = params.k;
  c.delta = spec.delta;

  const auto n = static_cast<std::size_t>(std::llround((spec.z_hi - spec.z_lo) / spec.delta)) + 1;
  c.z.resize(n);
  for (std::size_t i = 0; i < n; ++i) c.z[i] = spec.z_lo + spec.delta * static_cast<double>(i);

  c.prices = spec.price_grid;
  if (c.prices.empty()) {
    const double lo = params.demand.p_min(), hi = params.demand.p_max();
    for (int j = 0; j < spec.price_points; ++j) c.prices.push_back(lo + (hi - lo) * j / (spec.price_points - 1));
  }

  c.is_target.assign(n, spec.order_targets.empty() ? 1 : 0);
  for (double q : spec.order_targets)
    c.is_target[static_cast<std::size_t>(std::llround((q - spec.z_lo) / spec.delta))] = 1;

  const std::size_t m = c.prices.size();
  const double var = params.sigma * params.sigma, d = spec.delta;
  c.up.resize(n * m);
  c.down.resize(n * m);
  c.dt.resize(n * m);
  c.reward.resize(n * m);
  for (std::size_t j = 0; j < m; ++j) {
    const double p = c.prices[j];
    const double mu = params.demand.rate(p);
    const double b = -mu;
    const double denom = var + d * std::abs(b);
    const double up = (0.5 * var + d * std::max(b, 0.0)) / denom;
    const double down = (0.5 * var + d * std::max(-b, 0.0)) / denom;
    if (!(up >= 0.0 && down >= 0.0 && std::abs(up + down - 1.0) < 1e-12))
      throw SpecInvalid("chain: transition probabilities do not sum to 1");
    const double dt = d * d / denom;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t ij = i * m + j;
      c.up[ij] = up;
      c.down[ij] = down;
      c.dt[ij] = dt;
      c.reward[ij] = (p * mu - params.cost.holding(c.z[i])) * dt;
    }
  }
  return c;
}

OracleSolution solve_average_reward(const MarkovChain& c, const OracleOptions& opts) {
  const std::size_t n = c.states(), m = c.price_count();
  if (n < 2 || m < 1) throw SpecInvalid("chain: empty");

  // Uniformize: every state moves with rate 1/dt, so a step of length tau
  // keeps probability 1 - tau/dt of staying put.
  const double tau = opts.uniformization * *std::min_element(c.dt.begin(), c.dt.end());
  std::vector<double> a_up(n * m), a_dn(n * m), rw(n * m);
  for (std::size_t ij = 0; ij < n * m; ++ij) {
    a_up[ij] = tau * c.up[ij] / c.dt[ij];
    a_dn[ij] = tau * c.down[ij] / c.dt[ij];
    rw[ij] = tau * c.reward[ij] / c.dt[ij];
  }

  std::vector<double> h(n, 0.0), D(n), Th(n), suffix(n);
  std::vector<std::size_t> best_j(n), suffix_arg(n);
  OracleSolution out;
  const std::size_t ref = n / 2;
  const double stop = opts.tol * tau;
  double span = std::numeric_limits<double>::infinity(), dmin = 0.0, dmax = 0.0;
  long it = 0;

  const auto sweep = [&] {
    for (std::size_t i = 0; i < n; ++i) {
      const double hu = (i + 1 < n ? h[i + 1] : h[i]) - h[i];
      const double hd = (i > 0 ? h[i - 1] : h[i]) - h[i];
      const std::size_t base = i * m;
      double best = -std::numeric_limits<double>::infinity();
      std::size_t arg = 0;
      for (std::size_t j = 0; j < m; ++j) {
        const double v = rw[base + j] + a_up[base + j] * hu + a_dn[base + j] * hd;
        if (v > best) best = v, arg = j;
      }
      D[i] = h[i] + best;
      best_j[i] = arg;
    }
    // suffix[i] = max over targets q > i of D(q) - k z_q
    double run = -std::numeric_limits<double>::infinity();
    std::size_t run_arg = n;
    for (std::size_t i = n; i-- > 0;) {
      suffix[i] = run;
      suffix_arg[i] = run_arg;
      if (c.is_target[i] && D[i] - c.k * c.z[i] > run) run = D[i] - c.k * c.z[i], run_arg = i;
    }
    for (std::size_t i = 0; i < n; ++i) Th[i] = std::max(D[i], suffix[i] - c.K + c.k * c.z[i]);
  };

  for (; it < opts.max_iterations; ++it) {
    sweep();
    dmin = std::numeric_limits<double>::infinity();
    dmax = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      const double diff = Th[i] - h[i];
      dmin = std::min(dmin, diff);
      dmax = std::max(dmax, diff);
    }
    span = dmax - dmin;
    if (it % 1000 == 0) out.span_history.push_back(span / tau);
    const double shift = Th[ref];
    for (std::size_t i = 0; i < n; ++i) h[i] = Th[i] - shift;
    if (span < stop) break;
  }
  if (!(span < stop)) {
    std::ostringstream os;
    os << "relative value iteration: span " << span / tau << " after " << it << " sweeps; history";
    const std::size_t from = out.span_history.size() > 5 ? out.span_history.size() - 5 : 0;
    for (std::size_t q = from; q < out.span_history.size(); ++q) os << ' ' << out.span_history[q];
    throw NoConvergence(os.str());
  }
  out.iterations = it + 1;
  out.gamma = 0.5 * (dmin + dmax) / tau;
  out.gamma_lo = dmin / tau;
  out.gamma_hi = dmax / tau;
  out.span_history.push_back(span / tau);

  // Policy from one more sweep on the converged values.
  sweep();
  out.z = c.z;
  out.relative_value = h;
  out.order.assign(n, 0);
  out.target.resize(n);
  out.price.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const bool order = suffix_arg[i] < n && suffix[i] - c.K + c.k * c.z[i] > D[i];
    out.order[i] = order;
    out.target[i] = order ? suffix_arg[i] : i;
  }
  for (std::size_t i = 0; i < n; ++i) out.price[i] = c.prices[best_j[out.target[i]]];

  std::size_t s_idx = n;
  for (std::size_t i = 0; i < n; ++i)
    if (out.order[i]) s_idx = i;
  if (s_idx == n) {
    out.s_hat = out.S_hat = std::numeric_limits<double>::quiet_NaN();
    out.common_target = false;
    out.order_downset = false;
  } else {
    out.s_hat = c.z[s_idx];
    out.S_hat = c.z[out.target[s_idx]];
    for (std::size_t i = 0; i <= s_idx; ++i) {
      if (!out.order[i]) out.order_downset = false;
      else if (out.target[i] != out.target[s_idx]) out.common_target = false;
    }
  }

  // Highest price among states that do not order; ties go to the larger
  // discrete marginal value.
  {
    double best_p = -std::numeric_limits<double>::infinity(), best_w = 0.0;
    std::size_t arg = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (out.order[i]) continue;
      const std::size_t a = i > 0 ? i - 1 : i, b = i + 1 < n ? i + 1 : i;
      const double w = (h[b] - h[a]) / (c.z[b] - c.z[a]);
      if (out.price[i] > best_p || (out.price[i] == best_p && w > best_w)) best_p = out.price[i], best_w = w, arg = i;
    }
    out.z_price_max = c.z[arg];
  }

  // Stationary law of the controlled chain by power iteration; ordering
  // states hand their mass straight to the target.
  {
    std::vector<double> pi(n, 0.0), next(n);
    std::size_t live = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (!out.order[i]) ++live;
    for (std::size_t i = 0; i < n; ++i)
      if (!out.order[i]) pi[i] = 1.0 / static_cast<double>(live);
    const auto land = [&](std::size_t i) { return out.target[i]; };
    double reflected = 0.0;
    for (long t = 0; t < opts.max_iterations; ++t) {
      std::fill(next.begin(), next.end(), 0.0);
      reflected = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (pi[i] == 0.0) continue;
        const std::size_t ij = i * m + best_j[i];
        const double pu = a_up[ij], pd = a_dn[ij];
        next[i] += pi[i] * (1.0 - pu - pd);
        if (i + 1 < n) next[land(i + 1)] += pi[i] * pu;
        else next[i] += pi[i] * pu, reflected += pi[i] * pu;
        if (i > 0) next[land(i - 1)] += pi[i] * pd;
        else next[i] += pi[i] * pd, reflected += pi[i] * pd;
      }
      double change = 0.0;
      for (std::size_t i = 0; i < n; ++i) change += std::abs(next[i] - pi[i]);
      pi.swap(next);
      if (change < 1e-13) break;
    }
    // per unit of moving probability, so the figure does not depend on tau
    double moving = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t ij = i * m + best_j[i];
      moving += pi[i] * (a_up[ij] + a_dn[ij]);
    }
    out.boundary_mass = moving > 0.0 ? reflected / moving : 0.0;
  }
  return out;
}

ComparisonReport compare(const ModelParams& params, const WSolution& solution, const OracleSolution& oracle,
                         double delta) {
  ComparisonReport r;
  r.delta = delta;
  r.gamma_abs = std::abs(solution.gamma - oracle.gamma);
  r.gamma_rel = r.gamma_abs / std::abs(solution.gamma);
  r.s_abs = std::abs(solution.s - oracle.s_hat);
  r.S_abs = std::abs(solution.S - oracle.S_hat);
  r.z_star_abs = std::abs(solution.z_star - oracle.z_price_max);
  r.boundary_mass = oracle.boundary_mass;
  const WFragment& f = solution.fragment;
  for (std::size_t i = 0; i < oracle.z.size(); ++i) {
    const double z = oracle.z[i];
    if (oracle.order[i] || z < solution.s || z > f.z_back()) continue;
    r.price_sup = std::max(r.price_sup, std::abs(params.demand.best_price(f.value(z)) - oracle.price[i]));
  }
  r.gamma_ok = r.gamma_rel <= 0.02;
  r.levels_ok = r.s_abs <= 2.0 * delta && r.S_abs <= 2.0 * delta;
  r.z_star_ok = r.z_star_abs <= 3.0 * delta && oracle.z_price_max <= 0.0;
  r.boundary_ok = r.boundary_mass < 1e-3;
  return r;
}

}  // namespace invpricing
