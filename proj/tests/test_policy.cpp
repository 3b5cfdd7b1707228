#include <doctest.h>

#include <cmath>
#include <sstream>

#include "fixtures.hpp"
#include "invpricing/errors.hpp"
#include "invpricing/policy.hpp"

using namespace invpricing;

TEST_CASE("apply orders up to S at or below s") {
  const auto p = fixtures::linear_default();
  const WSolution& sol = fixtures::solved_default();
  const Policy pol = Policy::from_solution(p, sol);
  const double s = sol.s, S = sol.S;

  Action a = pol.apply(s - 2.0);
  CHECK(a.order == doctest::Approx(S - s + 2.0));
  CHECK(a.price == doctest::Approx(p.demand.best_price(sol.fragment.value(S))).epsilon(1e-6));
  a = pol.apply(s);
  CHECK(a.order == doctest::Approx(S - s));
  a = pol.apply(S + 1.0);
  CHECK(a.order == 0.0);
  CHECK(a.price == doctest::Approx(p.demand.best_price(sol.fragment.value(S + 1.0))).epsilon(1e-6));

  // idempotent above s
  for (double z : {s + 1e-9, 0.0, S, 5.0}) {
    CHECK(pol.apply(z).order == 0.0);
    CHECK(pol.apply(z + pol.apply(z).order).order == 0.0);
  }
}

TEST_CASE("table prices interpolate w, not p") {
  const auto d = DemandModel::hyperbolic(1.0, 2.0, 1.0, 5.0);
  // w crosses -lambda0 = -1 inside the cell [0, 1]
  const Policy pol = Policy::from_table(d, -1.0, 0.5, {0.0, 1.0, 2.0}, {0.0, -2.0, -4.0});
  CHECK(pol.price_at(0.49) == 5.0);
  CHECK(pol.price_at(0.51) == 1.0);
  // interpolating prices directly would give 3 here
  CHECK(pol.price_at(0.5) == 1.0);
}

TEST_CASE("prices above z_cap clamp and are counted") {
  const auto p = fixtures::linear_default();
  const Policy pol = Policy::from_solution(p, fixtures::solved_default());
  const std::size_t before = pol.clamp_count();
  CHECK(pol.price_at(pol.z_cap() + 10.0) == pol.price_at(pol.z_cap()));
  CHECK(pol.clamp_count() == before + 1);
  CHECK(pol.price_at(pol.z_cap() + 10.0) == p.demand.p_min());
}

TEST_CASE("price table is nondecreasing then nonincreasing around z*") {
  for (const auto& [p, sol] : {std::pair{fixtures::linear_default(), fixtures::solved_default()},
                               std::pair{fixtures::hyperbolic(), fixtures::solved_hyperbolic()}}) {
    const Policy pol = Policy::from_solution(p, sol);
    double prev = pol.price_at(sol.s);
    for (double z = sol.s + 0.01; z < 30.0; z += 0.01) {
      const double cur = pol.price_at(z);
      if (z <= sol.z_star) CHECK(cur >= prev - 1e-12);
      else if (z - 0.01 >= sol.z_star) CHECK(cur <= prev + 1e-12);
      prev = cur;
    }
  }
}

TEST_CASE("policy construction errors") {
  const auto d = DemandModel::linear(10.0, 2.0, 6.0);
  CHECK_THROWS_AS(Policy::constant_price(d, 1.0, 0.0, 4.0), OutOfRange);
  CHECK_THROWS_AS(Policy::constant_price(d, -1.0, 1.0, 7.0), PriceOutOfBounds);
  CHECK_THROWS_AS(Policy::from_table(d, -1.0, 1.0, {0.0, 0.0}, {1.0, 2.0}), OutOfRange);
  const Policy c = Policy::constant_price(d, -1.0, 3.0, 5.0);
  CHECK(c.apply(-1.5).order == doctest::Approx(4.5));
  CHECK(c.apply(-1.5).price == 5.0);
  CHECK(c.with_band(-2.0, 2.0).apply(-1.5).order == 0.0);
}

TEST_CASE("value function") {
  const auto p = fixtures::linear_default();
  const WSolution& sol = fixtures::solved_default();
  const ValueFunction vf = build_value_function(sol);
  CHECK(vf.value(sol.s) == 0.0);
  CHECK(vf.value(sol.S) - vf.value(sol.s) - p.k * (sol.S - sol.s) == doctest::Approx(p.K).epsilon(1e-6));
  // linear with slope k below s*
  CHECK(vf.value(sol.s - 3.0) == doctest::Approx(-3.0 * p.k));
  CHECK(vf.derivative(sol.s - 0.5) == p.k);
  // C1 at s*
  CHECK(vf.derivative(sol.s) == doctest::Approx(p.k).epsilon(1e-9));

  // trapezoid integration of w on a fine grid
  double trap = 0.0;
  const double h = 1e-4;
  for (double z = sol.s; z + h <= 2.0 + 1e-12; z += h) trap += 0.5 * h * (vf.derivative(z) + vf.derivative(z + h));
  CHECK(vf.value(sol.s + std::round((2.0 - sol.s) / h) * h) == doctest::Approx(trap).epsilon(1e-7));

  // V' by central differences of V
  for (double z : {-1.0, -0.1, 0.7, 3.3, 12.0}) {
    const double e = 1e-5;
    CHECK((vf.value(z + e) - vf.value(z - e)) / (2 * e) == doctest::Approx(vf.derivative(z)).epsilon(1e-7));
  }
  CHECK_THROWS_AS(vf.value(vf.z_max() + 1.0), OutOfRange);
}

TEST_CASE("upper-bound conditions hold on the solved fixtures") {
  for (const auto& [p, sol] : {std::pair{fixtures::linear_default(), fixtures::solved_default()},
                               std::pair{fixtures::hyperbolic(), fixtures::solved_hyperbolic()}}) {
    const ValueFunction vf = build_value_function(sol);
    VerificationReport r;
    REQUIRE_NOTHROW(r = verify_upper_bound(p, vf, sol.gamma));
    CHECK(r.passed());
    CHECK(r.generator_max <= 1e-6);
    CHECK(r.band_interior_max_abs <= 1e-6);
    CHECK(r.slope_excess_max <= 1e-8);
    CHECK(r.growth_exponent_fit <= 3.0);
    CHECK(r.pair_checks == 100);
    CHECK(r.pair_failures == 0);
    // below s* the generator reduces to pi(k) - h(z) - gamma, largest next to s*
    const double z_near = sol.s - sol.fragment.step;
    CHECK(r.below_band_max ==
          doctest::Approx(p.demand.pi(p.k) - p.cost.holding(z_near) - sol.gamma).epsilon(1e-9));
    CHECK(r.below_band_max < 0.0);
  }
}

TEST_CASE("a wrong profit rate fails verification") {
  const auto p = fixtures::linear_default();
  const WSolution& sol = fixtures::solved_default();
  const ValueFunction vf = build_value_function(sol);
  try {
    verify_upper_bound(p, vf, sol.gamma - 0.01);
    FAIL("expected VerificationFailed");
  } catch (const VerificationFailed& e) {
    CHECK_FALSE(e.report().generator_ok);
    CHECK(e.report().generator_max == doctest::Approx(0.01).epsilon(1e-3));
  }
}

TEST_CASE("curves round-trip through CSV") {
  const auto p = fixtures::hyperbolic();
  const WSolution& sol = fixtures::solved_hyperbolic();
  const ValueFunction vf = build_value_function(sol);
  std::stringstream ss;
  write_curves(ss, p, vf);
  const std::string text = ss.str();
  CHECK(text.rfind("z,w,V,price\n", 0) == 0);
  const CurveTable t = read_curves(ss);
  REQUIRE(t.z.size() == vf.grid().size());
  for (std::size_t i = 0; i < t.z.size(); i += 501) {
    CHECK(t.z[i] == doctest::Approx(vf.grid()[i]).epsilon(1e-11));
    CHECK(t.V[i] == doctest::Approx(vf.values()[i]).epsilon(1e-11).scale(1));
  }
  std::istringstream bad("z,w,V\n1,2,3\n");
  CHECK_THROWS_AS(read_curves(bad), ConfigInvalid);
  std::istringstream garbled("z,w,V,price\n1,2,x,4\n");
  CHECK_THROWS_AS(read_curves(garbled), ConfigInvalid);
}
