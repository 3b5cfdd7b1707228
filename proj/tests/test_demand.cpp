#include <doctest.h>

#include <cmath>
#include <random>

#include "invpricing/demand.hpp"
#include "invpricing/errors.hpp"

using namespace invpricing;

namespace {

// Brute force argmax of mu(p)(p - w) on a fine price grid, first maximum wins.
struct GridMax {
  double p;
  double value;
};

GridMax grid_argmax(const DemandModel& d, double w, int n = 200001) {
  GridMax best{d.p_min(), -INFINITY};
  for (int i = 0; i < n; ++i) {
    const double p = d.p_min() + (d.p_max() - d.p_min()) * i / (n - 1);
    const double v = d.rate(p) * (p - w);
    if (v > best.value) best = {p, v};
  }
  return best;
}

}  // namespace

TEST_CASE("linear demand kernel matches brute force") {
  const auto d = DemandModel::linear(10.0, 2.0, 6.0);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> pick(-20.0, 20.0);
  for (int t = 0; t < 50; ++t) {
    const double w = pick(rng);
    const GridMax g = grid_argmax(d, w);
    CHECK(std::abs(d.best_price(w) - g.p) < 1e-4);
    CHECK(d.pi(w) >= g.value - 1e-12);
    CHECK(d.pi(w) - g.value < 1e-6);
  }
}

TEST_CASE("hyperbolic demand kernel matches brute force") {
  const auto d = DemandModel::hyperbolic(1.0, 2.0, 1.0, 5.0);
  for (double w : {-30.0, -3.0, -1.5, -0.999, 0.0, 0.5, 4.0, 25.0}) {
    const GridMax g = grid_argmax(d, w);
    CHECK(std::abs(d.best_price(w) - g.p) < 1e-4);
    CHECK(std::abs(d.pi(w) - g.value) < 1e-9);
  }
}

TEST_CASE("linear price follows the three-case formula") {
  // p = p_max above 2 p_max - A, (A + w)/2 in between, p_min below 2 p_min - A
  const double A = 10, lo = 2, hi = 6;
  const auto d = DemandModel::linear(A, lo, hi);
  CHECK(d.best_price(2 * hi - A) == hi);
  CHECK(d.best_price(2 * hi - A + 0.3) == hi);
  CHECK(d.best_price(0.0) == doctest::Approx(5.0));
  CHECK(d.best_price(-3.0) == doctest::Approx(3.5));
  CHECK(d.best_price(2 * lo - A) == lo);
  CHECK(d.best_price(2 * lo - A - 4.0) == lo);
  // Pi(p, w) = -p^2 + (A + w) p - A w
  for (double p : {2.0, 3.3, 6.0})
    for (double w : {-4.0, 1.0})
      CHECK(d.payoff(p, w) == doctest::Approx(-p * p + (A + w) * p - A * w));
}

TEST_CASE("hyperbolic price jumps at w = -lambda0") {
  const auto d = DemandModel::hyperbolic(1.0, 2.0, 1.0, 5.0);
  CHECK(d.best_price(-0.999999) == 5.0);
  CHECK(d.best_price(-1.000001) == 1.0);
  // Pi is flat in p at the tie; the smallest maximizer is returned.
  CHECK(d.best_price(-1.0) == 1.0);
  // Pi(p, w) = lambda1 - lambda1 (w + lambda0) / (p + lambda0)
  for (double p : {1.0, 2.5, 5.0})
    CHECK(d.payoff(p, 3.0) == doctest::Approx(2.0 - 2.0 * 4.0 / (p + 1.0)));
}

TEST_CASE("pi' equals -mu(p_pi) by central differences") {
  for (const auto& d : {DemandModel::linear(10.0, 2.0, 6.0), DemandModel::hyperbolic(1.0, 2.0, 1.0, 5.0)}) {
    for (double w = -40.0; w <= 40.0; w += 0.37) {
      const double h = 1e-6;
      const double fd = (d.pi(w + h) - d.pi(w - h)) / (2 * h);
      CHECK(std::abs(fd - d.pi_derivative(w)) < 1e-5);
      CHECK(d.pi_derivative(w) == doctest::Approx(-d.rate(d.best_price(w))));
    }
  }
}

TEST_CASE("kappa is the largest revenue rate") {
  for (const auto& d : {DemandModel::linear(10.0, 2.0, 6.0), DemandModel::linear(20.0, 2.0, 6.0),
                        DemandModel::hyperbolic(1.0, 2.0, 1.0, 5.0)}) {
    CHECK(d.max_revenue_rate() == doctest::Approx(grid_argmax(d, 0.0).value).epsilon(1e-9));
    CHECK(d.max_revenue_rate() == doctest::Approx(d.pi(0.0)));
  }
}

TEST_CASE("custom family argmax agrees with brute force") {
  DemandModel d(0.5, 4.0, CustomDemand{[](double p) { return std::exp(-p); }, [](double p) { return -std::exp(-p); }});
  for (double w : {-5.0, -0.2, 0.0, 1.3, 2.9}) {
    const GridMax g = grid_argmax(d, w);
    CHECK(std::abs(d.best_price(w) - g.p) < 1e-4);
    CHECK(d.pi(w) >= g.value - 1e-10);
  }
  // interior maximizer of e^{-p}(p - w) is p = 1 + w
  CHECK(d.best_price(1.3) == doctest::Approx(2.3).epsilon(1e-7));
}

TEST_CASE("regimes") {
  const auto d = DemandModel::linear(10.0, 2.0, 6.0);
  CHECK(d.regime(2.0) == PriceRegime::Lower);
  CHECK(d.regime(6.0) == PriceRegime::Upper);
  CHECK(d.regime(4.0) == PriceRegime::Interior);
  CHECK(std::string(to_string(PriceRegime::Interior)) == "interior");
}

TEST_CASE("invalid demand models") {
  CHECK_THROWS_AS(DemandModel::linear(6.0, 2.0, 6.0), ModelInvalid);
  CHECK_THROWS_AS(DemandModel::linear(10.0, 6.0, 2.0), ModelInvalid);
  CHECK_THROWS_AS(DemandModel::linear(10.0, -1.0, 6.0), ModelInvalid);
  CHECK_THROWS_AS(DemandModel::hyperbolic(0.0, 2.0, 1.0, 5.0), ModelInvalid);
  CHECK_THROWS_AS(DemandModel::hyperbolic(1.0, -2.0, 1.0, 5.0), ModelInvalid);
  // increasing rate
  CHECK_THROWS_AS(DemandModel(1.0, 2.0, CustomDemand{[](double p) { return p; }, [](double) { return 1.0; }}),
                  ModelInvalid);
  // derivative inconsistent with the rate
  CHECK_THROWS_AS(DemandModel(1.0, 2.0, CustomDemand{[](double p) { return 5 - p; }, [](double) { return -2.0; }}),
                  ModelInvalid);
}

TEST_CASE("rate outside the price interval") {
  const auto d = DemandModel::linear(10.0, 2.0, 6.0);
  CHECK_THROWS_AS(d.rate(1.99), PriceOutOfBounds);
  CHECK_THROWS_AS(d.payoff(6.5, 0.0), PriceOutOfBounds);
  CHECK(d.rate(2.0) == 8.0);
}
