#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "invpricing/policy.hpp"
#include "invpricing/solver.hpp"

namespace invpricing {

struct SimConfig {
  double x0 = 0.0;          ///< initial level Z(0-)
  double T = 5000.0;        ///< horizon
  double dt = 1e-3;
  double burn_in = 500.0;   ///< time discarded before accruing
  std::uint64_t seed = 1;
  int replications = 32;
  bool revenue_noise = false;  ///< also accrue the zero-mean p sigma dB term
  unsigned threads = 0;        ///< 0 picks hardware_concurrency

  /// Replication 0 is written here as CSV when set.
  std::ostream* trajectory = nullptr;
  std::size_t trajectory_stride = 1;

  /// Throws ConfigInvalid.
  void validate() const;
};

struct ReplicationResult {
  double revenue_rate = 0.0;
  double holding_rate = 0.0;
  double ordering_rate = 0.0;
  double order_count_rate = 0.0;
  double min_level = 0.0;
  double profit() const noexcept { return revenue_rate - holding_rate - ordering_rate; }
};

struct SimResult {
  double avg_profit = 0.0;
  double stderr_ = 0.0;  ///< standard error of avg_profit across replications
  double revenue_rate = 0.0;
  double holding_rate = 0.0;
  double ordering_rate = 0.0;
  double order_count_rate = 0.0;
  double min_level_observed = 0.0;
  std::size_t price_clamps = 0;
  std::vector<ReplicationResult> replications;
};

struct ProfitEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
  double ci95_lo = 0.0;
  double ci95_hi = 0.0;
  SimResult detail;
};

/**
 * Euler-Maruyama run of the controlled level under `policy`. Each step first
 * orders up to S when Z <= s, then accrues revenue p mu(p) dt and holding
 * h(Z) dt and moves Z by -mu(p) dt - sigma dB. Replication r draws from its
 * own engine seeded by (seed, r), so results do not depend on thread count.
 */
SimResult simulate(const ModelParams& params, const Policy& policy, const SimConfig& cfg);

/// Mean, standard error and mean +- 1.96 stderr. Needs replications >= 2.
ProfitEstimate estimate_profit(const ModelParams& params, const Policy& policy, const SimConfig& cfg);

}  // namespace invpricing
