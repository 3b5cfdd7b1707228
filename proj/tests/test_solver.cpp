#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include <boost/numeric/odeint.hpp>

#include "fixtures.hpp"
#include "invpricing/errors.hpp"

using namespace invpricing;

namespace {

// Sampled w from a closed form, with the exact slope as dw.
template <class W, class DW>
WFragment sampled(double z0, double z1, double step, W w, DW dw) {
  WFragment f;
  f.step = step;
  f.first_index = static_cast<long>(std::llround(z0 / step));
  const long last = static_cast<long>(std::llround(z1 / step));
  for (long i = f.first_index; i <= last; ++i) {
    f.w.push_back(w(i * step));
    f.dw.push_back(dw(i * step));
  }
  return f;
}

// Independent backward integration with odeint's dense dopri5, started at
// z_top from the asymptotic value, sampled every `step` down to z_bottom.
struct OdeintCurve {
  std::vector<double> z, w;

  double at(double zq) const {
    // z is descending
    std::size_t i = 0;
    while (i + 1 < z.size() && z[i + 1] > zq) ++i;
    const double t = (zq - z[i]) / (z[i + 1] - z[i]);
    return w[i] + t * (w[i + 1] - w[i]);
  }
};

OdeintCurve odeint_curve(const ModelParams& p, double gamma, double z_top, double z_bottom, double step) {
  namespace odeint = boost::numeric::odeint;
  using State = std::vector<double>;
  State x{asymptotic_init(p, gamma, z_top)};
  OdeintCurve out;
  auto rhs = [&](const State& s, State& d, double z) { d[0] = p.slope(z, s[0], gamma); };
  auto obs = [&](const State& s, double z) {
    out.z.push_back(z);
    out.w.push_back(s[0]);
  };
  const auto n = static_cast<long>(std::llround((z_top - z_bottom) / step));
  std::vector<double> times;
  for (long i = 0; i <= n; ++i) times.push_back(z_top - i * step);
  odeint::integrate_times(odeint::make_dense_output(1e-11, 1e-11, odeint::runge_kutta_dopri5<State>()), rhs, x,
                          times.begin(), times.end(), -step, obs);
  return out;
}

// Band area from a sampled curve by the trapezoid rule with linear crossings.
double trapezoid_area(const OdeintCurve& c, double k) {
  double area = 0.0;
  for (std::size_t i = 0; i + 1 < c.z.size(); ++i) {
    const double a = c.w[i] - k, b = c.w[i + 1] - k, h = c.z[i] - c.z[i + 1];
    if (a >= 0 && b >= 0) area += 0.5 * (a + b) * h;
    else if (a > 0 || b > 0) {
      const double pos = std::max(a, b);
      area += 0.5 * pos * h * pos / (std::abs(a) + std::abs(b));
    }
  }
  return area;
}

}  // namespace

TEST_CASE("asymptotic init solves pi(w) = h(z_max) + gamma") {
  const auto p = fixtures::linear_default();
  for (double g : {-5.0, 0.0, 18.0}) {
    for (double zm : {5.0, 20.0, 60.0}) {
      const double w = asymptotic_init(p, g, zm);
      CHECK(p.demand.pi(w) == doctest::Approx(zm * zm + g).epsilon(1e-12));
    }
  }
}

TEST_CASE("levels and area on a known curve") {
  // w = 2 - z^2 with k = 1: s = -1, S = 1, z* = 0, area = 4/3
  const auto f = sampled(-3.0, 3.0, 0.01, [](double z) { return 2 - z * z; }, [](double z) { return -2 * z; });
  const BandLevels lv = find_reorder_levels(f, 1.0);
  CHECK(lv.s == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(lv.S == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(lv.z_star) < 1e-12);
  CHECK(band_area(f, lv.s, lv.S, 1.0) == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
  CHECK_THROWS_AS(find_reorder_levels(f, 2.5), NoBand);
  CHECK_THROWS_AS(band_area(f, -4.0, 0.0, 1.0), OutOfRange);
}

TEST_CASE("Hermite integral is exact for cubics") {
  const auto f = sampled(-2.0, 3.0, 0.25, [](double z) { return z * z * z - z; },
                         [](double z) { return 3 * z * z - 1; });
  // int_{-1.1}^{2.3} (z^3 - z) dz
  const auto F = [](double z) { return z * z * z * z / 4 - z * z / 2; };
  CHECK(f.integral(-1.1, 2.3) == doctest::Approx(F(2.3) - F(-1.1)).epsilon(1e-13));
  CHECK(f.value(0.4) == doctest::Approx(0.064 - 0.4).epsilon(1e-13));
}

TEST_CASE("finite-difference slopes are exact for quartics") {
  const auto p = fixtures::linear_default();
  const auto f = sampled(0.5, 1.5, 0.01, [](double z) { return 0.1 * z * z * z * z; },
                         [](double z) { return 0.4 * z * z * z; });
  const auto d = finite_difference_slopes(p, f);
  for (std::size_t i = 0; i < f.size(); ++i) CHECK(d[i] == doctest::Approx(0.4 * std::pow(f.z(i), 3)).epsilon(1e-9));
}

TEST_CASE("finite-difference stencils do not straddle z = 0") {
  const auto p = fixtures::linear_default();
  // |z| z has a kink in w' at 0; one-sided stencils keep the slopes exact
  const auto f = sampled(-0.5, 0.5, 0.01, [](double z) { return 0.1 * z * std::abs(z); },
                         [](double z) { return 0.2 * std::abs(z); });
  const auto d = finite_difference_slopes(p, f);
  for (std::size_t i = 0; i < f.size(); ++i) CHECK(d[i] == doctest::Approx(0.2 * std::abs(f.z(i))).scale(1));
}

TEST_CASE("integrator agrees with an independent dopri5 run") {
  const auto p = fixtures::linear_default();
  const double gamma = 18.0;
  const WFragment f = integrate_w(p, gamma, 20.0, -2.5);
  const OdeintCurve c = odeint_curve(p, gamma, 20.0, -2.5, 1e-3);
  for (double z = -2.4; z <= 10.0; z += 0.173) CHECK(f.value(z) == doctest::Approx(c.at(z)).epsilon(1e-7).scale(1));
}

TEST_CASE("integration is insensitive to tolerance and truncation") {
  const auto p = fixtures::linear_default();
  const double gamma = 18.0;
  SolverOptions tight;
  tight.ode_atol = tight.ode_rtol = 5e-11;
  const double w0 = integrate_w(p, gamma, 20.0, -2.0).value(0.0);
  CHECK(std::abs(integrate_w(p, gamma, 20.0, -2.0, tight).value(0.0) - w0) < 1e-8);
  CHECK(std::abs(integrate_w(p, gamma, 40.0, -2.0).value(0.0) - w0) < 1e-6);
  CHECK_THROWS_AS(integrate_w(p, gamma, 20.0, 25.0), OutOfRange);
}

TEST_CASE("w decreases pointwise in gamma and the band area follows") {
  const auto p = fixtures::linear_default();
  std::vector<double> prev_w;
  double prev_area = INFINITY;
  for (double g : {12.0, 14.0, 17.0, 18.0, 18.5, 19.5, 21.0}) {
    const WFragment f = integrate_w(p, g, 20.0, -6.0);
    if (!prev_w.empty())
      for (std::size_t i = 0; i < f.size(); i += 97) CHECK(f.w[i] < prev_w[i]);
    prev_w = f.w;
    double area = 0.0;
    try {
      const BandLevels lv = find_reorder_levels(f, p.k);
      area = band_area(f, lv.s, lv.S, p.k);
    } catch (const NoBand&) {
    }
    CHECK(area <= prev_area);
    prev_area = area;
  }
}

TEST_CASE("profit rate matches an independent bisection") {
  const auto p = fixtures::linear_default();
  const WSolution& sol = fixtures::solved_default();
  // bisection on gamma with odeint curves and trapezoid areas
  double lo = 15.0, hi = 20.0;
  for (int it = 0; it < 40; ++it) {
    const double mid = 0.5 * (lo + hi);
    (trapezoid_area(odeint_curve(p, mid, 15.0, -3.0, 2e-4), p.k) > p.K ? lo : hi) = mid;
  }
  CHECK(sol.gamma == doctest::Approx(0.5 * (lo + hi)).epsilon(1e-6));
}

TEST_CASE("optimal solution satisfies the free-boundary conditions") {
  for (const auto& [p, sol] : {std::pair{fixtures::linear_default(), fixtures::solved_default()},
                               std::pair{fixtures::hyperbolic(), fixtures::solved_hyperbolic()}}) {
    const WFragment& f = sol.fragment;
    CHECK(std::abs(f.value(sol.s) - p.k) < 1e-6);
    CHECK(std::abs(f.value(sol.S) - p.k) < 1e-6);
    CHECK(std::abs(band_area(f, sol.s, sol.S, p.k) - p.K) < 1e-6 * p.K);
    CHECK(sol.residual_max < 1e-8);
    CHECK(sol.z_star <= 0.0);
    CHECK(sol.s < sol.z_star);
    CHECK(sol.z_star < sol.S);
    CHECK(sol.gamma < p.demand.max_revenue_rate());
    CHECK(sol.diagnostics.area_monotone);

    // unimodal on [s, z_max]: one sign change of the first differences
    int changes = 0, last = 0;
    for (std::size_t i = 1; i < f.size(); ++i) {
      if (f.z(i - 1) < sol.s) continue;
      const double d = f.w[i] - f.w[i - 1];
      const int sg = d > 0 ? 1 : (d < 0 ? -1 : 0);
      if (sg != 0 && last != 0 && sg != last) ++changes;
      if (sg != 0) last = sg;
    }
    CHECK(changes == 1);
    // w* tends to -infinity
    CHECK(f.w.back() < -100.0);
  }
}

TEST_CASE("truncation level is certified") {
  const auto p = fixtures::linear_default();
  const WSolution& sol = fixtures::solved_default();
  REQUIRE(sol.diagnostics.z_max_history.size() >= 2);
  SolverOptions o;
  o.z_max = 2.0 * sol.z_max_used;
  CHECK(std::abs(solve_optimal(p, o).gamma - sol.gamma) < 1e-8);
  // a spec-scale truncation gives the same answer
  o.z_max = 20.0;
  CHECK(std::abs(solve_optimal(p, o).gamma - sol.gamma) < 1e-8);
  // too short for the band: doubled until it fits
  o.z_max = 1.0;
  const WSolution short_start = solve_optimal(p, o);
  CHECK(short_start.z_max_used >= 4.0);
  CHECK(std::abs(short_start.gamma - sol.gamma) < 1e-8);
}

TEST_CASE("given band at the optimum reproduces gamma; other bands do worse") {
  const auto p = fixtures::linear_default();
  const WSolution& sol = fixtures::solved_default();
  CHECK(solve_given_band(p, sol.s, sol.S).gamma == doctest::Approx(sol.gamma).epsilon(1e-9));
  for (double ds : {-0.3, 0.2})
    for (double dS : {-0.25, 0.4}) CHECK(solve_given_band(p, sol.s + ds, sol.S + dS).gamma < sol.gamma);
  CHECK_THROWS_AS(solve_given_band(p, 1.0, 0.5), OutOfRange);
}

TEST_CASE("price profile shape") {
  SUBCASE("linear default: nondecreasing then nonincreasing") {
    const auto p = fixtures::linear_default();
    const WSolution& sol = fixtures::solved_default();
    const PriceProfile pr = price_profile(p, sol);
    for (std::size_t i = 1; i < pr.z.size(); ++i) {
      if (pr.z[i] <= sol.z_star) CHECK(pr.price[i] >= pr.price[i - 1] - 1e-12);
      if (pr.z[i - 1] >= sol.z_star) CHECK(pr.price[i] <= pr.price[i - 1] + 1e-12);
    }
  }
  SUBCASE("hyperbolic: one switch from p_max to p_min above S*") {
    const auto p = fixtures::hyperbolic();
    const WSolution& sol = fixtures::solved_hyperbolic();
    const PriceProfile pr = price_profile(p, sol);
    REQUIRE(pr.breakpoints.size() == 1);
    CHECK(pr.breakpoints[0] > sol.S);
    CHECK(sol.fragment.value(pr.breakpoints[0]) == doctest::Approx(-1.0).epsilon(1e-9));
    CHECK(pr.segments.front().regime == PriceRegime::Upper);
    CHECK(pr.segments.back().regime == PriceRegime::Lower);
  }
  SUBCASE("linear five-segment case") {
    const auto p = fixtures::linear_five_segment();
    const WSolution sol = solve_optimal(p);
    const double lo_edge = 2 * 5.0 - 8.5, hi_edge = 2 * 5.5 - 8.5;
    REQUIRE(p.k < lo_edge);
    REQUIRE(sol.fragment.value(sol.z_star) > hi_edge);
    const PriceProfile pr = price_profile(p, sol);
    REQUIRE(pr.breakpoints.size() == 4);
    const auto& b = pr.breakpoints;
    CHECK(sol.s < b[0]);
    CHECK(b[0] < b[1]);
    CHECK(b[1] < sol.z_star);
    CHECK(sol.z_star < b[2]);
    CHECK(b[2] < b[3]);
    CHECK(b[3] < sol.S);
    // w*(z_p1) = w*(z_p4) = 2 p_min - A, w*(z_p2) = w*(z_p3) = 2 p_max - A
    CHECK(sol.fragment.value(b[0]) == doctest::Approx(lo_edge).epsilon(1e-8));
    CHECK(sol.fragment.value(b[3]) == doctest::Approx(lo_edge).epsilon(1e-8));
    CHECK(sol.fragment.value(b[1]) == doctest::Approx(hi_edge).epsilon(1e-8));
    CHECK(sol.fragment.value(b[2]) == doctest::Approx(hi_edge).epsilon(1e-8));
  }
}

TEST_CASE("invalid inputs and uncertifiable truncation") {
  auto p = fixtures::linear_default();
  p.sigma = 0.0;
  CHECK_THROWS_AS(solve_optimal(p), ModelInvalid);
  p = fixtures::linear_default();
  p.K = -1.0;
  CHECK_THROWS_AS(solve_optimal(p), ModelInvalid);

  SolverOptions o;
  o.z_max = 10.0;
  o.max_z_max_doublings = 1;
  o.z_max_certify_tol = 0.0;
  CHECK_THROWS_AS(solve_optimal(fixtures::linear_default(), o), NoSolution);
}

TEST_CASE("unit cost at or above p_max is flagged") {
  auto p = fixtures::linear_default();
  p.k = 6.0;
  CHECK(p.warnings().size() == 1);
  CHECK(fixtures::linear_default().warnings().empty());
}
