// Backward shooting for the marginal value w and the fragment utilities
// built on it: interpolation, level finding, band area and residuals.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <sstream>

#include <boost/math/tools/toms748_solve.hpp>

#include "invpricing/errors.hpp"
#include "invpricing/solver.hpp"
#include "shooting.hpp"

namespace invpricing {

namespace {

struct HermiteCell {
  double z0, step, w0, w1, m0, m1;

  double value(double z) const noexcept {
    const double t = (z - z0) / step;
    const double t2 = t * t, t3 = t2 * t;
    return (2 * t3 - 3 * t2 + 1) * w0 + (t3 - 2 * t2 + t) * step * m0 + (-2 * t3 + 3 * t2) * w1 +
           (t3 - t2) * step * m1;
  }
  double slope(double z) const noexcept {
    const double t = (z - z0) / step;
    const double t2 = t * t;
    return (6 * t2 - 6 * t) * w0 / step + (3 * t2 - 4 * t + 1) * m0 + (-6 * t2 + 6 * t) * w1 / step +
           (3 * t2 - 2 * t) * m1;
  }
};

HermiteCell make_cell(const WFragment& f, std::size_t i) {
  return {f.z(i), f.step, f.w[i], f.w[i + 1], f.dw[i], f.dw[i + 1]};
}

// Fritsch-Carlson limited slopes so the cubic is monotone whenever the data are.
HermiteCell monotone_cell(const WFragment& f, std::size_t i) {
  HermiteCell c = make_cell(f, i);
  const double secant = (c.w1 - c.w0) / c.step;
  if (secant == 0.0) {
    c.m0 = c.m1 = 0.0;
    return c;
  }
  if (c.m0 * secant < 0.0) c.m0 = 0.0;
  if (c.m1 * secant < 0.0) c.m1 = 0.0;
  const double a = c.m0 / secant, b = c.m1 / secant;
  const double r = a * a + b * b;
  if (r > 9.0) {
    const double tau = 3.0 / std::sqrt(r);
    c.m0 = tau * a * secant;
    c.m1 = tau * b * secant;
  }
  return c;
}

template <class F>
double bracketed_root(F&& fn, double a, double b, double tol) {
  double fa = fn(a), fb = fn(b);
  if (fa == 0.0) return a;
  if (fb == 0.0) return b;
  if ((fa > 0.0) == (fb > 0.0)) throw RootBracketFailure("root is not bracketed");
  std::uintmax_t iters = 200;
  const auto r = boost::math::tools::toms748_solve(
      fn, a, b, fa, fb, [tol](double x, double y) { return std::abs(x - y) <= tol; }, iters);
  return 0.5 * (r.first + r.second);
}

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

}  // namespace

std::size_t WFragment::cell(double zq) const noexcept {
  if (size() < 2) return 0;
  const double t = std::floor(zq / step) - static_cast<double>(first_index);
  const double hi = static_cast<double>(size() - 2);
  return static_cast<std::size_t>(std::clamp(t, 0.0, hi));
}

double WFragment::value(double zq) const noexcept { return make_cell(*this, cell(zq)).value(zq); }

double WFragment::slope(double zq) const noexcept { return make_cell(*this, cell(zq)).slope(zq); }

double WFragment::integral(double a, double b) const {
  if (a == b) return 0.0;
  if (a > b) return -integral(b, a);
  const auto simpson = [](const HermiteCell& c, double x0, double x1) {
    return (x1 - x0) / 6.0 * (c.value(x0) + 4.0 * c.value(0.5 * (x0 + x1)) + c.value(x1));
  };
  std::size_t i = cell(a);
  const std::size_t last = cell(b);
  double total = 0.0;
  for (; i <= last; ++i) {
    const HermiteCell c = make_cell(*this, i);
    const double lo = std::max(a, c.z0);
    const double hi = std::min(b, c.z0 + step);
    if (hi <= lo) continue;
    if (lo == c.z0 && hi == c.z0 + step) {
      // Simpson with the Hermite midpoint, written out for full cells.
      total += step * (0.5 * (c.w0 + c.w1) + step * (c.m0 - c.m1) / 12.0);
    } else {
      total += simpson(c, lo, hi);
    }
  }
  return total;
}

namespace detail {

WFragment integrate_backward(const ModelParams& params, double gamma, long i_hi, long i_lo,
                             const SolverOptions& opts, const StopRule& stop) {
  const double step = opts.grid_step;
  const auto rhs = [&](double z, double w) { return params.slope(z, w, gamma); };

  std::vector<double> w_rev, dw_rev;
  w_rev.reserve(static_cast<std::size_t>(i_hi - i_lo + 1));
  dw_rev.reserve(w_rev.capacity());

  // Start a run-up zone beyond z_max so the transient from the leading-order
  // asymptotic start has decayed by a factor e^-28 when the grid begins. The
  // decay rate is at least 2 mu(p) / sigma^2 at the asymptotic price.
  const double z_max = static_cast<double>(i_hi) * step;
  const double w_far = asymptotic_init(params, gamma, z_max);
  const double decay = 2.0 * params.demand.rate_unchecked(params.demand.best_price(w_far)) /
                       (params.sigma * params.sigma);
  const long runup = static_cast<long>(std::ceil(28.0 / decay / step));

  double z = static_cast<double>(i_hi + runup) * step;
  double w = asymptotic_init(params, gamma, z);
  double f = rhs(z, w);
  if (runup == 0) {
    w_rev.push_back(w);
    dw_rev.push_back(f);
  }

  double h_suggest = step;
  for (long i = i_hi + runup - 1; i >= i_lo; --i) {
    const double z_target = static_cast<double>(i) * step;
    while (z > z_target) {
      const double remaining = z - z_target;
      const bool last = h_suggest >= remaining * (1.0 - 1e-12);
      // Never leave a sliver shorter than half a step before the node.
      const double h = -(last ? remaining : std::min(h_suggest, 0.5 * remaining));
      if (std::abs(h) < opts.min_step) {
        std::ostringstream os;
        os << "integrate_w: step underflow at z = " << z;
        throw StepUnderflow(os.str());
      }
      const double k1 = f;
      const double k2 = rhs(z + c2 * h, w + h * a21 * k1);
      const double k3 = rhs(z + c3 * h, w + h * (a31 * k1 + a32 * k2));
      const double k4 = rhs(z + c4 * h, w + h * (a41 * k1 + a42 * k2 + a43 * k3));
      const double k5 = rhs(z + c5 * h, w + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
      const double z_new = last ? z_target : z + h;
      const double k6 = rhs(z_new, w + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
      const double w_new = w + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      const double k7 = rhs(z_new, w_new);
      const double err = std::abs(h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7));
      const double scale = opts.ode_atol + opts.ode_rtol * std::max(std::abs(w), std::abs(w_new));
      const double ratio = err / scale;
      if (!std::isfinite(w_new) || !std::isfinite(ratio) || ratio > 1.0) {
        const double shrink = std::isfinite(ratio) ? std::clamp(0.9 * std::pow(ratio, -0.2), 0.1, 0.5) : 0.1;
        h_suggest = std::abs(h) * shrink;
        continue;
      }
      z = z_new;
      w = w_new;
      f = k7;
      const double grow = ratio > 0.0 ? std::clamp(0.9 * std::pow(ratio, -0.2), 0.2, 5.0) : 5.0;
      h_suggest = std::min(step, std::abs(h) * grow);
      if (std::abs(w) > opts.blowup_limit) {
        std::ostringstream os;
        os << "integrate_w: |w| exceeded " << opts.blowup_limit << " at z = " << z;
        throw BlowUp(os.str(), z);
      }
    }
    if (i > i_hi) continue;
    w_rev.push_back(w);
    dw_rev.push_back(f);
    if (stop && stop(z, w, f)) break;
  }

  WFragment out;
  out.step = step;
  out.gamma = gamma;
  out.first_index = i_hi - static_cast<long>(w_rev.size()) + 1;
  out.w.assign(w_rev.rbegin(), w_rev.rend());
  out.dw.assign(dw_rev.rbegin(), dw_rev.rend());
  return out;
}

long node_at_or_above(double z, double step) { return static_cast<long>(std::ceil(z / step - 1e-9)); }
long node_at_or_below(double z, double step) { return static_cast<long>(std::floor(z / step + 1e-9)); }

}  // namespace detail

WFragment integrate_w(const ModelParams& params, double gamma, double z_max, double z_stop,
                      const SolverOptions& opts) {
  if (!(z_stop < z_max)) throw OutOfRange("integrate_w: z_stop must be below z_max");
  const long i_hi = detail::node_at_or_above(z_max, opts.grid_step);
  const long i_lo = detail::node_at_or_below(z_stop, opts.grid_step);
  return detail::integrate_backward(params, gamma, i_hi, i_lo, opts, {});
}

BandLevels find_reorder_levels(const WFragment& fragment, double k, double tol) {
  const auto& w = fragment.w;
  const std::size_t n = w.size();
  if (n < 3) throw OutOfRange("find_reorder_levels: fragment too short");
  const std::size_t imax = static_cast<std::size_t>(std::max_element(w.begin(), w.end()) - w.begin());
  if (!(w[imax] > k)) {
    std::ostringstream os;
    os << "no band: max w = " << w[imax] << " <= k = " << k;
    throw NoBand(os.str());
  }
  if (imax == 0 || imax == n - 1) throw OutOfRange("find_reorder_levels: maximum of w at the fragment edge");

  // z*: root of the interpolated slope next to the maximal node.
  const auto& dw = fragment.dw;
  double z_star = fragment.z(imax);
  std::size_t c = n;
  if (dw[imax - 1] > 0.0 && dw[imax] <= 0.0) c = imax - 1;
  else if (dw[imax] >= 0.0 && dw[imax + 1] < 0.0) c = imax;
  if (c < n) {
    const HermiteCell cell = make_cell(fragment, c);
    z_star = bracketed_root([&](double z) { return cell.slope(z); }, cell.z0, cell.z0 + cell.step, tol);
  }

  std::size_t right = imax + 1;
  while (right < n && w[right] > k) ++right;
  if (right == n) throw OutOfRange("find_reorder_levels: w does not return to k on the right");
  std::size_t left = imax;
  while (left > 0 && w[left - 1] > k) --left;
  if (left == 0) throw OutOfRange("find_reorder_levels: w does not drop to k on the left");

  const HermiteCell cr = monotone_cell(fragment, right - 1);
  const double S = bracketed_root([&](double z) { return cr.value(z) - k; }, cr.z0, cr.z0 + cr.step, tol);
  const HermiteCell cl = monotone_cell(fragment, left - 1);
  const double s = bracketed_root([&](double z) { return cl.value(z) - k; }, cl.z0, cl.z0 + cl.step, tol);
  return {s, S, z_star};
}

double band_area(const WFragment& fragment, double s, double S, double k) {
  if (fragment.size() < 2) throw OutOfRange("band_area: empty fragment");
  const double slack = 1e-9 * fragment.step;
  if (s > S) throw OutOfRange("band_area: s must not exceed S");
  if (s < fragment.z_front() - slack || S > fragment.z_back() + slack) {
    std::ostringstream os;
    os << "band_area: [" << s << ", " << S << "] outside fragment [" << fragment.z_front() << ", "
       << fragment.z_back() << "]";
    throw OutOfRange(os.str());
  }
  if (s == S) return 0.0;
  return fragment.integral(s, S) - k * (S - s);
}

std::vector<double> finite_difference_slopes(const ModelParams& params, const WFragment& fragment) {
  const std::size_t n = fragment.size();
  const double step = fragment.step;
  const auto& w = fragment.w;
  std::vector<int> regime(n), side(n);
  for (std::size_t i = 0; i < n; ++i) {
    regime[i] = static_cast<int>(params.demand.regime(params.demand.best_price(w[i])));
    const double z = fragment.z(i);
    side[i] = z < 0.0 ? -1 : (z > 0.0 ? 1 : 0);
  }
  const auto clean = [&](long lo, long hi) {
    if (lo < 0 || hi >= static_cast<long>(n)) return false;
    bool neg = false, pos = false;
    for (long j = lo; j <= hi; ++j) {
      if (regime[j] != regime[lo]) return false;
      neg = neg || side[j] < 0;
      pos = pos || side[j] > 0;
    }
    return !(neg && pos);
  };

  std::vector<double> out(n, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t ui = 0; ui < n; ++ui) {
    const long i = static_cast<long>(ui);
    if (clean(i - 2, i + 2)) {
      out[ui] = (w[i - 2] - 8.0 * w[i - 1] + 8.0 * w[i + 1] - w[i + 2]) / (12.0 * step);
    } else if (clean(i, i + 4)) {
      out[ui] = (-25.0 * w[i] + 48.0 * w[i + 1] - 36.0 * w[i + 2] + 16.0 * w[i + 3] - 3.0 * w[i + 4]) /
                (12.0 * step);
    } else if (clean(i - 4, i)) {
      out[ui] = (25.0 * w[i] - 48.0 * w[i - 1] + 36.0 * w[i - 2] - 16.0 * w[i - 3] + 3.0 * w[i - 4]) /
                (12.0 * step);
    }
  }
  return out;
}

std::vector<double> ode_residuals(const ModelParams& params, const WFragment& fragment) {
  auto out = finite_difference_slopes(params, fragment);
  const double half_var = 0.5 * params.sigma * params.sigma;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (std::isnan(out[i])) continue;
    out[i] = half_var * out[i] + params.demand.pi(fragment.w[i]) - params.cost.holding(fragment.z(i)) -
             fragment.gamma;
  }
  return out;
}

}  // namespace invpricing
