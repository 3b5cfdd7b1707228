#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <sstream>

#include <boost/math/tools/toms748_solve.hpp>

#include "invpricing/errors.hpp"
#include "invpricing/solver.hpp"
#include "shooting.hpp"

namespace invpricing {

void ModelParams::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ModelInvalid("sigma must be > 0");
  if (!(K > 0.0) || !std::isfinite(K)) throw ModelInvalid("K must be > 0");
  if (!(k > 0.0) || !std::isfinite(k)) throw ModelInvalid("k must be > 0");
}

std::vector<std::string> ModelParams::warnings() const {
  std::vector<std::string> out;
  if (k >= demand.p_max()) out.emplace_back("unit cost k >= p_max: ordering is never profitable at the margin");
  return out;
}

double asymptotic_init(const ModelParams& params, double gamma, double z_max) {
  const double target = params.cost.holding(z_max) + gamma;
  const auto excess = [&](double w) { return params.demand.pi(w) - target; };
  constexpr double kLimit = 1e9;

  // pi is a decreasing bijection, so expand outward until the sign flips.
  double lo = -1.0, hi = 1.0;
  while (excess(lo) < 0.0) {
    lo = 2.0 * lo - 1.0;
    if (lo < -kLimit) throw RootBracketFailure("asymptotic_init: bracket exceeded |w| = 1e9");
  }
  while (excess(hi) > 0.0) {
    hi = 2.0 * hi + 1.0;
    if (hi > kLimit) throw RootBracketFailure("asymptotic_init: bracket exceeded |w| = 1e9");
  }
  const double f_lo = excess(lo), f_hi = excess(hi);
  if (f_lo == 0.0) return lo;
  if (f_hi == 0.0) return hi;
  std::uintmax_t iters = 300;
  const auto r = boost::math::tools::toms748_solve(
      excess, lo, hi, f_lo, f_hi,
      [](double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)); }, iters);
  return 0.5 * (r.first + r.second);
}

namespace {

constexpr double kGammaLimit = 1e9;
constexpr int kScanPoints = 64;

double auto_z_max(const ModelParams& params) {
  const double target = 100.0 * (std::abs(params.demand.max_revenue_rate()) + 1.0);
  double z = 1.0;
  while (params.cost.holding(z) < target) {
    z += 1.0;
    if (z > 1e6) throw NoSolution("cannot choose z_max: h stays below the truncation target");
  }
  return z;
}

// Root of excess(gamma) = area(gamma) - K. The area decreases in gamma, so the
// bracket is [lo, kappa] with lo pushed down until the area exceeds K. If the
// probes ever contradict that ordering, a sign scan picks the bracket instead.
double solve_profit_rate(const std::function<double(double)>& excess, double kappa, double lo_guess,
                         std::optional<double> near, const SolverOptions& opts, SolveDiagnostics& diag) {
  struct Probe {
    double gamma, f;
  };
  std::vector<Probe> probes;
  const auto eval = [&](double g) {
    const double f = excess(g);
    ++diag.area_evaluations;
    probes.push_back({g, f});
    return f;
  };

  double hi = kappa;
  double f_hi = eval(hi);
  if (!(f_hi < 0.0)) {
    std::ostringstream os;
    os << "band area still >= K at gamma = kappa = " << kappa;
    throw NoSolution(os.str());
  }
  double lo = lo_guess, f_lo = 0.0;
  bool bracketed = false;
  if (near) {
    // A previous solve at a shorter truncation is usually within a hair.
    const double width = 1e-3 * std::max(1.0, std::abs(*near));
    const double a = *near - width, b = std::min(*near + width, kappa);
    const double fa = eval(a);
    const double fb = b < kappa ? eval(b) : f_hi;
    if (fa > 0.0 && fb < 0.0) {
      lo = a, f_lo = fa, hi = b, f_hi = fb;
      bracketed = true;
    }
  }
  if (!bracketed) {
    lo = std::min(lo_guess, kappa - 1.0);
    f_lo = eval(lo);
    while (!(f_lo > 0.0)) {
      lo = 2.0 * lo - 1.0;
      if (lo < -kGammaLimit) {
        std::ostringstream os;
        os << "no root of band area = K: bracket [" << lo << ", " << kappa << "], area - K = " << f_lo
           << " / " << f_hi;
        throw NoSolution(os.str());
      }
      f_lo = eval(lo);
    }
  }

  auto sorted = probes;
  std::sort(sorted.begin(), sorted.end(), [](const Probe& a, const Probe& b) { return a.gamma < b.gamma; });
  for (std::size_t i = 1; i < sorted.size(); ++i)
    if (sorted[i].f > sorted[i - 1].f) diag.area_monotone = false;
  if (!diag.area_monotone) {
    // First sign change on a uniform scan of the bracket.
    double a = lo, fa = f_lo;
    for (int j = 1; j <= kScanPoints; ++j) {
      const double b = lo + (hi - lo) * j / kScanPoints;
      const double fb = j == kScanPoints ? f_hi : eval(b);
      if (fa > 0.0 && fb <= 0.0) {
        lo = a, f_lo = fa, hi = b, f_hi = fb;
        break;
      }
      a = b, fa = fb;
    }
  }

  diag.gamma_bracket_lo = lo;
  diag.gamma_bracket_hi = hi;
  diag.area_at_lo = f_lo;
  diag.area_at_hi = f_hi;
  if (f_hi == 0.0) return hi;
  std::uintmax_t iters = 200;
  const double tol = opts.gamma_rel_tol;
  const auto r = boost::math::tools::toms748_solve(
      [&](double g) { return eval(g); }, lo, hi, f_lo, f_hi,
      [tol](double a, double b) { return std::abs(a - b) <= tol * std::max(1.0, std::abs(a)); }, iters);
  return 0.5 * (r.first + r.second);
}

// Runs `solve_at(z_max, near)` for z_max, 2 z_max, ... until successive
// profit rates agree to the certification tolerance.
template <class SolveAt>
std::pair<double, double> certified_gamma(double z_max0, const SolverOptions& opts, SolveDiagnostics& diag,
                                          SolveAt&& solve_at) {
  std::optional<double> previous;
  double z_max = z_max0;
  for (int d = 0; d <= opts.max_z_max_doublings; ++d, z_max *= 2.0) {
    double gamma;
    try {
      gamma = solve_at(z_max, previous);
    } catch (const OutOfRange&) {
      // the band does not fit below this truncation yet
      previous.reset();
      continue;
    }
    diag.z_max_history.push_back(z_max);
    diag.gamma_history.push_back(gamma);
    if (previous && std::abs(gamma - *previous) < opts.z_max_certify_tol) return {gamma, z_max};
    previous = gamma;
  }
  std::ostringstream os;
  os << "profit rate not certified against the truncation level after " << opts.max_z_max_doublings
     << " doublings (last z_max = " << z_max / 2.0 << ")";
  throw NoSolution(os.str());
}

double initial_z_max(const ModelParams& params, const SolverOptions& opts) {
  const double z = opts.z_max ? *opts.z_max : auto_z_max(params);
  if (!(z > 0.0)) throw ModelInvalid("z_max must be > 0");
  return z;
}

// Area evaluation for the free-boundary problem: integrate until w has
// peaked and fallen below k - margin, then measure the band.
struct OptimalArea {
  const ModelParams& params;
  const SolverOptions& opts;
  long i_hi;
  long i_floor;

  WFragment fragment(double gamma) const {
    const double k = params.k, margin = opts.left_stop_margin;
    return detail::integrate_backward(params, gamma, i_hi, i_floor, opts,
                                      [k, margin](double, double w, double dw) { return dw > 0.0 && w < k - margin; });
  }

  double excess(double gamma) const {
    const WFragment f = fragment(gamma);
    try {
      const BandLevels lv = find_reorder_levels(f, params.k, opts.level_tol);
      return band_area(f, lv.s, lv.S, params.k) - params.K;
    } catch (const NoBand&) {
      return -params.K;
    }
  }
};

}  // namespace

WSolution solve_optimal(const ModelParams& params, const SolverOptions& opts) {
  params.validate();
  WSolution sol;
  sol.unit_cost = params.k;
  const double kappa = params.demand.max_revenue_rate();
  const double lo_guess = -(params.cost.holding(0.0) + params.K) - 1.0;

  const auto make_area = [&](double z_max) {
    const long i_hi = detail::node_at_or_above(z_max, opts.grid_step);
    const long i_floor = detail::node_at_or_below(-4.0 * z_max, opts.grid_step);
    return OptimalArea{params, opts, i_hi, i_floor};
  };

  const auto [gamma, z_max] =
      certified_gamma(initial_z_max(params, opts), opts, sol.diagnostics, [&](double zm, std::optional<double> near) {
        const OptimalArea area = make_area(zm);
        return solve_profit_rate([&](double g) { return area.excess(g); }, kappa, lo_guess, near, opts,
                                 sol.diagnostics);
      });

  const OptimalArea area = make_area(z_max);
  sol.fragment = area.fragment(gamma);
  const BandLevels lv = find_reorder_levels(sol.fragment, params.k, opts.level_tol);
  sol.gamma = gamma;
  sol.s = lv.s;
  sol.S = lv.S;
  sol.z_star = lv.z_star;
  sol.z_max_used = sol.fragment.z_back();

  const auto residuals = ode_residuals(params, sol.fragment);
  for (double r : residuals) {
    if (std::isnan(r)) ++sol.diagnostics.residual_nodes_skipped;
    else sol.residual_max = std::max(sol.residual_max, std::abs(r));
  }
  return sol;
}

GivenBandResult solve_given_band(const ModelParams& params, double s, double S, const SolverOptions& opts) {
  params.validate();
  if (!(s < S)) throw OutOfRange("solve_given_band: need s < S");
  GivenBandResult out;
  const double kappa = params.demand.max_revenue_rate();
  const double lo_guess = -(params.cost.holding(0.0) + params.K) - 1.0;
  const double z_max0 = std::max(initial_z_max(params, opts), S + 1.0);

  const auto fragment_at = [&](double gamma, double z_max) {
    const long i_hi = detail::node_at_or_above(z_max, opts.grid_step);
    const long i_lo = detail::node_at_or_below(s, opts.grid_step);
    return detail::integrate_backward(params, gamma, i_hi, i_lo, opts, {});
  };

  const auto [gamma, z_max] =
      certified_gamma(z_max0, opts, out.diagnostics, [&](double zm, std::optional<double> near) {
        return solve_profit_rate(
            [&](double g) { return band_area(fragment_at(g, zm), s, S, params.k) - params.K; }, kappa, lo_guess,
            near, opts, out.diagnostics);
      });

  out.gamma = gamma;
  out.fragment = fragment_at(gamma, z_max);
  out.z_max_used = out.fragment.z_back();
  return out;
}

PriceProfile price_profile(const ModelParams& params, const WSolution& solution, std::optional<ProfileGrid> grid) {
  const WFragment& f = solution.fragment;
  PriceProfile out;
  if (grid) {
    if (!(grid->step > 0.0) || !(grid->z_hi > grid->z_lo)) throw OutOfRange("price_profile: invalid grid");
    const auto n = static_cast<std::size_t>(std::floor((grid->z_hi - grid->z_lo) / grid->step + 1e-9));
    for (std::size_t i = 0; i <= n; ++i) out.z.push_back(grid->z_lo + grid->step * static_cast<double>(i));
  } else {
    out.z.push_back(solution.s);
    for (std::size_t i = 0; i < f.size(); ++i)
      if (f.z(i) > solution.s) out.z.push_back(f.z(i));
  }
  const auto regime_at = [&](double z) { return params.demand.regime(params.demand.best_price(f.value(z))); };

  out.w.reserve(out.z.size());
  out.price.reserve(out.z.size());
  std::vector<PriceRegime> regimes;
  for (double z : out.z) {
    const double w = f.value(z);
    const double p = params.demand.best_price(w);
    out.w.push_back(w);
    out.price.push_back(p);
    regimes.push_back(params.demand.regime(p));
  }
  if (out.z.empty()) return out;

  double seg_begin = out.z.front();
  for (std::size_t i = 1; i < out.z.size(); ++i) {
    if (regimes[i] == regimes[i - 1]) continue;
    // Bisect the regime switch between the two table points.
    double a = out.z[i - 1], b = out.z[i];
    const PriceRegime left = regimes[i - 1];
    for (int it = 0; it < 200 && b - a > 1e-13 * std::max(1.0, std::abs(a)); ++it) {
      const double m = 0.5 * (a + b);
      (regime_at(m) == left ? a : b) = m;
    }
    const double z_p = 0.5 * (a + b);
    out.segments.push_back({seg_begin, z_p, left});
    out.breakpoints.push_back(z_p);
    seg_begin = z_p;
  }
  out.segments.push_back({seg_begin, out.z.back(), regimes.back()});
  return out;
}

}  // namespace invpricing
