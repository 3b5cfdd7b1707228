#include "invpricing/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <ostream>
#include <random>
#include <thread>

#include "invpricing/errors.hpp"

namespace invpricing {

void SimConfig::validate() const {
  if (!std::isfinite(x0)) throw ConfigInvalid("sim: x0 must be finite");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigInvalid("sim: dt must be > 0");
  if (!(T > 0.0) || !std::isfinite(T)) throw ConfigInvalid("sim: T must be > 0");
  if (!(burn_in >= 0.0) || !(burn_in < T)) throw ConfigInvalid("sim: need 0 <= burn_in < T");
  if (replications < 1) throw ConfigInvalid("sim: replications must be >= 1");
  if (T / dt > 1e12) throw ConfigInvalid("sim: T / dt too large");
  if (trajectory_stride == 0) throw ConfigInvalid("sim: trajectory_stride must be >= 1");
}

namespace {

ReplicationResult run_replication(const ModelParams& params, const Policy& policy, const SimConfig& cfg, int rep) {
  std::seed_seq seq{static_cast<std::uint32_t>(cfg.seed), static_cast<std::uint32_t>(cfg.seed >> 32),
                    static_cast<std::uint32_t>(rep)};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal(0.0, 1.0);

  const auto steps = static_cast<long long>(std::llround(cfg.T / cfg.dt));
  const auto burn = static_cast<long long>(std::llround(cfg.burn_in / cfg.dt));
  const double dt = cfg.dt, sqrt_dt = std::sqrt(cfg.dt), sigma = params.sigma;
  std::ostream* traj = rep == 0 ? cfg.trajectory : nullptr;
  if (traj) {
    traj->precision(12);
    *traj << "t,Z,price,cum_revenue,cum_holding,cum_ordering\n";
  }

  double z = cfg.x0;
  double revenue = 0.0, holding = 0.0, ordering = 0.0, orders = 0.0;
  double cum_rev = 0.0, cum_hold = 0.0, cum_ord = 0.0;
  double min_level = std::numeric_limits<double>::infinity();
  for (long long j = 0; j < steps; ++j) {
    const bool accrue = j >= burn;
    min_level = std::min(min_level, z);
    const Action act = policy.apply(z);
    double order_cost = 0.0;
    if (act.order > 0.0) {
      order_cost = params.K + params.k * act.order;
      z = policy.S();
    }
    const double mu = params.demand.rate_unchecked(act.price);
    const double dB = sqrt_dt * normal(rng);
    double rev = act.price * mu * dt;
    if (cfg.revenue_noise) rev += act.price * sigma * dB;
    const double hold = params.cost.holding(z) * dt;
    if (accrue) {
      revenue += rev;
      holding += hold;
      ordering += order_cost;
      if (act.order > 0.0) orders += 1.0;
    }
    if (traj) {
      cum_rev += rev, cum_hold += hold, cum_ord += order_cost;
      if (j % static_cast<long long>(cfg.trajectory_stride) == 0)
        *traj << static_cast<double>(j) * dt << ',' << z << ',' << act.price << ',' << cum_rev << ',' << cum_hold
              << ',' << cum_ord << '\n';
    }
    z -= mu * dt + sigma * dB;
  }

  const double span = static_cast<double>(steps - burn) * dt;
  ReplicationResult r;
  r.revenue_rate = revenue / span;
  r.holding_rate = holding / span;
  r.ordering_rate = ordering / span;
  r.order_count_rate = orders / span;
  r.min_level = min_level;
  return r;
}

}  // namespace

SimResult simulate(const ModelParams& params, const Policy& policy, const SimConfig& cfg) {
  params.validate();
  cfg.validate();
  const std::size_t n = static_cast<std::size_t>(cfg.replications);
  const std::size_t clamps_before = policy.clamp_count();
  SimResult out;
  out.replications.resize(n);

  unsigned workers = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, n));
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  const auto work = [&] {
    for (std::size_t r; (r = next.fetch_add(1)) < n;) {
      if (failed.load()) return;
      try {
        out.replications[r] = run_replication(params, policy, cfg, static_cast<int>(r));
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
        return;
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < workers; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);

  // Merge in replication order so the sums are independent of scheduling.
  out.min_level_observed = std::numeric_limits<double>::infinity();
  for (const auto& r : out.replications) {
    out.revenue_rate += r.revenue_rate;
    out.holding_rate += r.holding_rate;
    out.ordering_rate += r.ordering_rate;
    out.order_count_rate += r.order_count_rate;
    out.min_level_observed = std::min(out.min_level_observed, r.min_level);
  }
  const double nr = static_cast<double>(n);
  out.revenue_rate /= nr;
  out.holding_rate /= nr;
  out.ordering_rate /= nr;
  out.order_count_rate /= nr;
  out.avg_profit = out.revenue_rate - out.holding_rate - out.ordering_rate;
  if (n >= 2) {
    double ss = 0.0;
    for (const auto& r : out.replications) ss += (r.profit() - out.avg_profit) * (r.profit() - out.avg_profit);
    out.stderr_ = std::sqrt(ss / (nr - 1.0) / nr);
  }
  out.price_clamps = policy.clamp_count() - clamps_before;
  return out;
}

ProfitEstimate estimate_profit(const ModelParams& params, const Policy& policy, const SimConfig& cfg) {
  if (cfg.replications < 2) throw ConfigInvalid("estimate_profit: needs replications >= 2");
  ProfitEstimate e;
  e.detail = simulate(params, policy, cfg);
  e.mean = e.detail.avg_profit;
  e.stderr_ = e.detail.stderr_;
  e.ci95_lo = e.mean - 1.96 * e.stderr_;
  e.ci95_hi = e.mean + 1.96 * e.stderr_;
  return e;
}

}  // namespace invpricing
