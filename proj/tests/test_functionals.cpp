#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mlslab/functionals.hpp"
#include "support/oracles.hpp"

using namespace mlslab;
using namespace mlslab::func;

namespace {

OneSiteMeasure gaussian(double sigma = 1.0, double half_width = 8.0, int points = 513) {
  return OneSiteMeasure::from_potential({half_width, points},
                                        [sigma](double x) { return 0.5 * x * x / (sigma * sigma); });
}

spec::SpinModel gaussian_model(double J, double J0) {
  spec::SpinModel m;
  m.d = 1;
  m.phase.kind = spec::PhaseKind::Gaussian;
  m.potential.kind = spec::PotentialKind::SquaredDifference;
  m.J = J;
  m.J0 = J0;
  m.box_radius = 2;
  m.grid = {10.0, 801};
  return m;
}

}  // namespace

TEST_CASE("entropy against closed forms") {
  const auto m = gaussian(1.0, 12.0, 2001);
  // Ent(e^{theta x}) under N(0,1) is theta^2/2 e^{theta^2/2}.
  for (double th : {0.5, 1.0, 2.0}) {
    const double ref = 0.5 * th * th * std::exp(0.5 * th * th);
    CHECK(entropy(m, [th](double x) { return std::exp(th * x); }) == doctest::Approx(ref).epsilon(1e-6));
  }
  const double tiny = entropy(m, [](double x) { return 1.0 + 1e-9 * x; });
  CHECK(tiny >= 0.0);
  CHECK(tiny < 1e-15);
  CHECK(entropy(m, [](double) { return 3.0; }) < 1e-20);
  CHECK_THROWS_AS(entropy(m, [](double x) { return x; }), Error);

  std::vector<double> s{1.0, 2.0, 3.0, 2.0};
  const double mean = 2.0;
  double ref = 0.0;
  for (double v : s) ref += v * std::log(v / mean);
  CHECK(entropy_samples(s) == doctest::Approx(ref / 4.0));
}

TEST_CASE("grid derivative") {
  std::vector<double> v;
  for (int i = 0; i < 11; ++i) v.push_back(0.1 * i * 0.1 * i);
  const auto d = grid_derivative(v, 0.1);
  for (int i = 1; i < 10; ++i) CHECK(d[i] == doctest::Approx(0.2 * i));
}

TEST_CASE("mls ratio scale invariance and constants") {
  const auto m = gaussian();
  const orlicz::HFunction h(orlicz::YoungFunction::power(2.0));
  auto f = [](double x) { return std::exp(0.3 * std::tanh(x)); };
  const auto r1 = mls_ratio(m, h, f);
  const auto r2 = mls_ratio(m, h, [&](double x) { return 7.0 * f(x); });
  REQUIRE(r1);
  REQUIRE(r2);
  CHECK(*r1 == doctest::Approx(*r2).epsilon(1e-10));
  CHECK_FALSE(mls_ratio(m, h, [](double) { return 2.0; }));
}

TEST_CASE("gaussian constants") {
  const auto m = gaussian();
  const TestFunctionFamily fam;
  const auto sg = best_ratio(m, ConstantKind::SG2, nullptr, fam);
  CHECK(sg.estimate == doctest::Approx(1.0).epsilon(2e-3));
  CHECK(sg.probe_id == "x");
  std::size_t skipped = 0;
  const auto ls = best_ratio(m, ConstantKind::LS2, nullptr, fam, &skipped);
  CHECK(ls.estimate >= 1.9);
  CHECK(ls.estimate <= 2.01);
  // exp(theta x^2 / 2) with theta >= 1 is not square integrable.
  CHECK(skipped > 0);
}

TEST_CASE("spectral gap") {
  const auto g = spectral_gap_eigen(gaussian(1.0, 10.0, 2001));
  CHECK(g.gap == doctest::Approx(1.0).epsilon(2e-3));
  CHECK(g.converged);
  const auto w = spectral_gap_eigen(gaussian(2.0, 16.0, 2001));
  CHECK(w.gap == doctest::Approx(0.25).epsilon(2e-3));

  // Double well: two resolutions agree.
  auto dw = [](double x) { return 0.25 * x * x * x * x - x * x; };
  const auto a = spectral_gap_eigen(OneSiteMeasure::from_potential({6.0, 1201}, dw));
  const auto b = spectral_gap_eigen(OneSiteMeasure::from_potential({6.0, 2401}, dw));
  CHECK(a.gap == doctest::Approx(b.gap).epsilon(5e-3));
  CHECK(a.gap < 1.0);
  CHECK(a.gap > 0.0);

  // SG2 probe bound never exceeds the true inverse gap.
  const TestFunctionFamily fam;
  const auto dwm = OneSiteMeasure::from_potential({6.0, 1201}, dw);
  CHECK(best_ratio(dwm, ConstantKind::SG2, nullptr, fam).estimate <= 1.0 / a.gap * (1.0 + 1e-3));
}

TEST_CASE("mls implies sg") {
  CHECK(check_mls_implies_sg(2.0, 1.0).holds);
  CHECK(check_mls_implies_sg(2.0, 1.0).margin == doctest::Approx(0.02));
  CHECK_FALSE(check_mls_implies_sg(1.5, 1.0).holds);
}

TEST_CASE("estimate constant over boundary values") {
  const auto model = gaussian_model(0.5, 1.0);
  const std::vector<double> grid{-1.0, 0.0, 1.0};
  const TestFunctionFamily fam;
  const auto est = estimate_constant(model, lattice::origin(1), grid, ConstantKind::SG2, nullptr, fam);
  REQUIRE(est.curve.size() == 3);
  // Conditional law is N(., 1/(1 + 4J)) for every omega.
  const double var = 1.0 / (1.0 + 4.0 * model.J);
  for (const auto& pt : est.curve) CHECK(pt.estimate == doctest::Approx(var).epsilon(3e-3));
  CHECK(est.lower_bound == est.uniform_sup);
}

TEST_CASE("tensorisation on a product of gaussians") {
  const auto a = gaussian(1.0, 8.0, 161);
  const auto b = gaussian(1.5, 14.0, 221);
  const orlicz::HFunction h(orlicz::YoungFunction::power(2.0));
  const TestFunctionFamily fam({{"x", [](double x) { return x; }},
                                {"tanh1", [](double x) { return std::tanh(x); }}},
                               {-1.0, -0.5, 0.5, 1.0});
  const auto rep = tensorisation_check(a, b, h, fam);
  CHECK(rep.product_sup > 0.0);
  CHECK(rep.product_sup <= rep.component_max * 1.05);
  CHECK_FALSE(rep.product_argmax.empty());
}

TEST_CASE("U vanishes with epsilon and converges with the grid") {
  auto model = gaussian_model(0.3, 1.0);
  const spec::Boundary bd(0.5);
  const auto site = lattice::origin(1);
  const auto small = compute_U(model, site, bd, 1e-8, 2.0, 1.0);
  CHECK(std::abs(small.value) < 1e-6);
  const auto u1 = compute_U(model, site, bd, 0.01, 2.0, 1.0);
  CHECK(u1.epsilon == 0.01);
  CHECK(u1.value > 0.0);

  // Independent quadrature of c_hat log E exp(eps Utilde).
  const double J = model.J, eps = 0.01, c = 2.0, w = 0.5;
  auto logdens = [&](double x) { return -(0.5 * x * x + 2.0 * J * (x - w) * (x - w)); };
  auto ut = [&](double x) { return 2.0 * (2.0 * c * 4.0 * (x - w) * (x - w) + (x - w) * (x - w)); };
  const double z = oracle::simpson([&](double x) { return std::exp(logdens(x)); }, -10, 10, 4000);
  const double zt = oracle::simpson([&](double x) { return std::exp(logdens(x) + eps * ut(x)); }, -10, 10, 4000);
  CHECK(u1.value == doctest::Approx(std::log(zt / z)).epsilon(1e-6));

  model.grid = {10.0, 1601};
  CHECK(compute_U(model, site, bd, 0.01, 2.0, 1.0).value == doctest::Approx(u1.value).epsilon(1e-8));

  // Large epsilon is halved until the integrand is contained.
  const auto big = compute_U(model, site, bd, 10.0, 2.0, 1.0);
  CHECK(big.epsilon < 10.0);
  CHECK_THROWS_AS(compute_U(model, site, bd, 10.0, 2.0, 1.0, false), TailContainmentError);
}

TEST_CASE("perturbed log-sobolev and H4 estimate") {
  const auto model = gaussian_model(0.2, 1.0);
  const std::vector<double> grid{-1.0, 0.0, 1.0};
  const TestFunctionFamily fam;
  const auto rep = perturbed_ls_check(model, lattice::origin(1), grid, 0.05, 2.0, 1.0, fam);
  REQUIRE(rep.curve.size() == 3);
  CHECK(rep.R_hat >= 0.0);
  for (const auto& row : rep.curve) CHECK(row[2] <= rep.R_hat);

  const lattice::Box box(1, 2);
  const auto h4 = check_h4(model, box, spec::Boundary(0.0), 0.05, 2.0, 1.0, 2000, 11,
                           std::vector<double>{0.0, 1.0});
  CHECK(h4.mu_U2.mean > 0.0);
  CHECK(h4.K_check >= h4.mu_U2.mean);
  REQUIRE(h4.U_values.size() == 2);

  auto bilinear = model;
  bilinear.potential.kind = spec::PotentialKind::Bilinear;
  CHECK_THROWS(check_h4(bilinear, box, spec::Boundary(0.0), 0.05, 2.0, 1.0, 100, 1));
}
