#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mlslab/orlicz.hpp"
#include "support/oracles.hpp"

using namespace mlslab;
using namespace mlslab::orlicz;

TEST_CASE("power conjugates") {
  const auto star = conjugate(YoungFunction::power(3.0));
  REQUIRE(star.is_power());
  CHECK(star.as_power()->p == doctest::Approx(1.5));
  for (double y : {0.1, 0.7, 2.0, 5.0})
    CHECK(star(y) == doctest::Approx(std::pow(y, 1.5) / 1.5).epsilon(1e-12));

  const auto half = YoungFunction::power(2.0);
  const auto self = conjugate(half);
  for (double y : {0.3, 1.0, 4.0}) CHECK(self(y) == doctest::Approx(0.5 * y * y));

  // Scaled power against a brute-force supremum.
  const auto scaled = YoungFunction::power(2.5, 3.0);
  const auto sstar = conjugate(scaled);
  for (double y : {0.5, 2.0, 6.0})
    CHECK(sstar(y) == doctest::Approx(oracle::brute_legendre(
                                          [](double x) { return 3.0 * std::pow(x, 2.5); }, y, 5.0))
                          .epsilon(1e-6));
}

TEST_CASE("tabulated x^2 on [0,10] conjugates to y^2/4") {
  std::vector<double> x(10000), f(10000);
  for (int i = 0; i < 10000; ++i) {
    x[i] = 10.0 * i / 9999.0;
    f[i] = x[i] * x[i];
  }
  const double h = x[1] - x[0];
  const auto star = conjugate(YoungFunction::tabulated(x, f));
  double worst = 0.0;
  for (int k = 0; k <= 200; ++k) {
    const double y = 19.0 * k / 200.0;
    worst = std::max(worst, std::abs(star(y) - 0.25 * y * y));
  }
  MESSAGE("max abs error " << worst << " with spacing " << h);
  CHECK(worst <= h * h);

  const auto back = conjugate(star);
  for (int i = 0; i < 10000; i += 37) CHECK(std::abs(back(x[i]) - f[i]) <= 10.0 * h);
}

TEST_CASE("non-convex tables are rejected with the offending node") {
  std::vector<double> x{0.0, 1.0, 2.0, 3.0, 4.0};
  std::vector<double> f{0.0, 1.0, 4.0, 5.0, 9.0};
  try {
    (void)YoungFunction::tabulated(x, f);
    FAIL("expected ConvexityError");
  } catch (const ConvexityError& e) {
    CHECK(e.index() == 2);
  }
  // Implicit origin does not shift the caller's indexing.
  try {
    (void)YoungFunction::tabulated({1.0, 2.0, 3.0}, {1.0, 4.0, 5.0});
    FAIL("expected ConvexityError");
  } catch (const ConvexityError& e) {
    CHECK(e.index() == 1);
  }
}

TEST_CASE("discrete legendre pointer walk") {
  std::vector<double> x{0.0, 1.0, 2.0, 3.0};
  std::vector<double> f{0.0, 0.5, 2.0, 4.5};
  std::vector<double> y{0.0, 0.5, 1.0, 2.0, 3.0};
  const auto out = discrete_legendre(x, f, y);
  for (std::size_t j = 0; j < y.size(); ++j) {
    double best = -1e300;
    for (std::size_t i = 0; i < x.size(); ++i) best = std::max(best, x[i] * y[j] - f[i]);
    CHECK(out[j] == doctest::Approx(best));
  }
}

TEST_CASE("modification") {
  const auto h2 = modification(YoungFunction::power(2.0));
  for (double v : {0.3, 1.0, 3.0}) CHECK(h2(v) == doctest::Approx(v * v));
  const auto h4 = modification(YoungFunction::power(4.0));
  CHECK(h4(2.0) == doctest::Approx(16.0));
  CHECK(h4(0.5) == doctest::Approx(0.25));
  CHECK(h4(1.0) == 1.0);
  CHECK(h4(-2.0) == doctest::Approx(16.0));

  // Linear near zero: not flat at the origin.
  std::vector<double> x{0.0, 1.0, 2.0, 3.0};
  std::vector<double> f{0.0, 1.0, 3.0, 6.0};
  try {
    (void)modification(YoungFunction::tabulated(x, f));
    FAIL("expected NicenessError");
  } catch (const NicenessError& e) {
    CHECK(e.clause() == NicenessClause::FlatAtZero);
  }
}

TEST_CASE("H conjugate matches brute force") {
  for (double p : {2.0, 2.5, 4.0}) {
    const HFunction h(YoungFunction::power(p));
    for (double y : {0.5, 2.0, 3.0, 6.0}) {
      const double ref = oracle::brute_legendre([p](double x) { return oracle::h_power(p, x); },
                                                y, 10.0);
      CHECK(h.conjugate_value(y) == doctest::Approx(ref).epsilon(1e-6));
    }
  }
  // Sub-quadratic base: numeric path through the convex hull.
  const HFunction h15(YoungFunction::power(1.5));
  for (double y : {0.5, 1.0, 1.9}) {
    const double ref = oracle::brute_legendre([](double x) { return oracle::h_power(1.5, x); }, y, 10.0);
    CHECK(h15.conjugate_value(y) == doctest::Approx(ref).epsilon(1e-5));
  }
}

TEST_CASE("omega and its envelope") {
  const auto h2 = modification(YoungFunction::power(2.0));
  for (double v : {0.1, 1.0, 7.0}) CHECK(omega(h2, v) == doctest::Approx(v * v));
  const auto h4 = modification(YoungFunction::power(4.0));
  CHECK(omega(h4, 1.0) == 1.0);
  CHECK(omega(h4, 2.0) == doctest::Approx(16.0));
  CHECK(omega(h4, 2.0) ==
        doctest::Approx(oracle::brute_omega([](double t) { return oracle::h_power(4.0, t); }, 2.0)));

  const GrowthEnvelope env(h4);
  CHECK(env.finite());
  CHECK(env.omega(0.0) == 0.0);
  CHECK(env.omega(1.0) == doctest::Approx(1.0));
  for (double v : {0.01, 0.4, 1.7, 3.0, 50.0})
    CHECK(env.omega(v) == doctest::Approx(std::max(v * v, std::pow(v, 4.0))).epsilon(1e-9));
  for (double y : {0.5, 2.0, 3.5, 4.0, 10.0, 40.0}) {
    const double ref = oracle::brute_legendre(
        [](double x) { return std::max(x * x, std::pow(x, 4.0)); }, y, 5.0, 400001);
    CHECK(env.omega_star(y) == doctest::Approx(ref).epsilon(1e-6));
  }
  CHECK(env.omega_star(0.0) == 0.0);

  const GrowthEnvelope quad(h2);
  for (double y : {0.1, 1.0, 3.0}) CHECK(quad.omega_star(y) == doctest::Approx(0.25 * y * y).epsilon(1e-9));

  // Convexity (midpoint) and submultiplicativity on samples.
  Rng rng(7);
  for (int k = 0; k < 2000; ++k) {
    const double a = std::pow(10.0, -2.0 + 4.0 * uniform01(rng));
    const double b = std::pow(10.0, -2.0 + 4.0 * uniform01(rng));
    CHECK(env.omega(a * b) <= env.omega(a) * env.omega(b) * (1.0 + 1e-9));
    CHECK(env.omega(0.5 * (a + b)) <= 0.5 * (env.omega(a) + env.omega(b)) * (1.0 + 1e-9));
    CHECK(env.omega(a) >= h4(a) * (1.0 - 1e-12));
  }
}

TEST_CASE("H2 check") {
  const auto r4 = check_h2(modification(YoungFunction::power(4.0)));
  CHECK(r4.ok);
  REQUIRE(r4.t_witness);
  CHECK(*r4.t_witness == doctest::Approx(4.0));
  const auto r25 = check_h2(modification(YoungFunction::power(2.5)));
  CHECK(r25.ok);
  CHECK(*r25.t_witness == doctest::Approx(2.5));
  // For H(x) = x^2 every t > 2 makes H/x^t decrease, so the check passes.
  const auto r2 = check_h2(modification(YoungFunction::power(2.0)));
  CHECK(r2.ok);
  CHECK(*r2.t_witness == doctest::Approx(2.0 + 1.0 / 128.0));
  // p < 2 breaks the quadratic-ratio clause.
  const auto r15 = check_h2(HFunction(YoungFunction::power(1.5)));
  CHECK_FALSE(r15.ok);
  REQUIRE(r15.first_violation_x);
  CHECK(*r15.first_violation_x > 1.0);
}

TEST_CASE("Herbst integral") {
  const GrowthEnvelope quad(modification(YoungFunction::power(2.0)));
  CHECK(herbst_integral(quad, 2.0) == doctest::Approx(1.0).epsilon(1e-10));
  const GrowthEnvelope env(modification(YoungFunction::power(4.0)));
  const double v = herbst_integral(env, 1.0);
  CHECK(v <= env.omega(0.5) * (1.0 + 1e-6));
  const double lam = 6.0;
  const double ref = lam * oracle::simpson(
                               [](double u) {
                                 const double w = u / 2.0;
                                 return u == 0.0 ? 0.25 : std::max(w * w, std::pow(w, 4.0)) / (u * u);
                               },
                               0.0, lam);
  CHECK(herbst_integral(env, lam) == doctest::Approx(ref).epsilon(1e-6));
  CHECK(herbst_integral(env, 1e-8) < 1e-15);
}

TEST_CASE("Young lemmas") {
  const auto r2 = check_young_lemmas(YoungFunction::power(2.0), 2.0, 2000);
  CHECK(r2.young_max_violation <= 1e-12);
  CHECK(r2.growth_premise);
  CHECK(r2.scaling_max_violation <= 1e-12);
  const auto r3 = check_young_lemmas(YoungFunction::power(3.0), 3.0, 2000);
  CHECK(r3.conjugate_exponent == doctest::Approx(1.5));
  CHECK(r3.growth_premise);
  CHECK(r3.duality_max_violation <= 1e-9);

  const auto phi = YoungFunction::power(3.0);
  const auto star = conjugate(phi);
  const double y = phi.derivative(1.0);
  CHECK(std::abs(1.0 * y - phi(1.0) - star(y)) <= 1e-9);
}

TEST_CASE("json round trip") {
  const auto p = YoungFunction::from_json(YoungFunction::power(3.0).to_json());
  CHECK(p(2.0) == doctest::Approx(8.0 / 3.0));
  const auto t = YoungFunction::from_json(
      nlohmann::json{{"kind", "tabulated"}, {"grid", {1.0, 2.0}}, {"values", {1.0, 4.0}}});
  CHECK(t(1.5) == doctest::Approx(2.5));
  CHECK_THROWS_AS(YoungFunction::from_json(nlohmann::json{{"kind", "power"}, {"p", 2}, {"q", 1}}),
                  ConfigError);
}
