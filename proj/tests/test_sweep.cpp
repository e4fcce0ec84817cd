#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <map>

#include "mlslab/sweep.hpp"
#include "support/oracles.hpp"

using namespace mlslab;
using namespace mlslab::sweep;

namespace {

spec::SpinModel gaussian_chain(double J, double boundary = 2.0) {
  spec::SpinModel m;
  m.d = 1;
  m.phase.kind = spec::PhaseKind::Gaussian;
  m.potential.kind = spec::PotentialKind::Bilinear;
  m.J = J;
  m.J0 = J;
  m.box_radius = 3;
  m.boundary_value = boundary;
  return m;
}

std::size_t at(const lattice::Box& box, int x) {
  return static_cast<std::size_t>(box.index_of(lattice::Site{{x}}));
}

// B^{k,0} x_0 at the constant configuration c for phi = x^2/2, V = xy on
// {-L..L}: linear functions stay linear and E[x_j | nbrs] = -J sum nbrs.
std::vector<double> linear_sweep_oracle(double J, int L, double c, int steps) {
  std::map<int, double> coef{{0, 1.0}};
  double constant = 0.0;
  std::vector<double> out;
  for (int k = 0; k < steps; ++k) {
    std::map<int, double> next;
    for (auto [x, a] : coef) {
      const bool in_shell = std::abs(x) <= k && ((std::abs(x) - k) % 2 == 0);
      if (!in_shell) {
        next[x] += a;
        continue;
      }
      for (int y : {x - 1, x + 1}) {
        if (std::abs(y) > L) constant += -J * a * c;
        else next[y] += -J * a;
      }
    }
    coef = next;
    double v = constant;
    for (auto [x, a] : coef) v += a * c;
    out.push_back(v);
  }
  return out;
}

}  // namespace

TEST_CASE("constants are fixed points") {
  const auto model = gaussian_chain(0.1);
  const lattice::Box box(1, 3);
  const auto grid = default_sweep_grid(model);
  const auto one = GriddedFunction::constant(box, grid, spec::Boundary(2.0), 1.0);
  const auto res = apply_B(one, 6, 0, model);
  for (const auto& st : res.trace.steps) CHECK(st.value == 1.0);
}

TEST_CASE("single shell integration") {
  const lattice::Box box(1, 3);
  auto model = gaussian_chain(0.0);
  const auto grid = default_sweep_grid(model);
  const spec::Boundary bd(0.0);
  auto f = GriddedFunction::tabulate(box, {at(box, 0)}, grid, bd,
                                     [&](std::span<const double> x) { return std::tanh(x[at(box, 0)] + 0.3); });
  const auto g0 = conditional_expectation_shell(f, box.shell(0), model);
  // No interaction: no new dependence.
  CHECK(g0.support().empty());
  const double ref = oracle::simpson(
      [](double x) { return std::tanh(x + 0.3) * std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }, -8.0, 8.0,
      4000);
  CHECK(g0.values()[0] == doctest::Approx(ref).epsilon(1e-8));

  model.J = 0.1;
  auto x0 = GriddedFunction::tabulate(box, {at(box, 0)}, grid, bd,
                                      [&](std::span<const double> x) { return x[at(box, 0)]; });
  const auto g = conditional_expectation_shell(x0, box.shell(0), model);
  REQUIRE(g.support().size() == 2);
  std::vector<double> cfg(box.size(), 0.0);
  for (double a : {-2.0, 0.5, 3.0})
    for (double b : {-1.0, 1.5}) {
      cfg[at(box, -1)] = a;
      cfg[at(box, 1)] = b;
      CHECK(g.evaluate(cfg) == doctest::Approx(-0.1 * (a + b)).epsilon(1e-9));
    }
}

TEST_CASE("sweep matches the linear oracle and the exact Gaussian mean") {
  const lattice::Box box(1, 3);
  const auto model = gaussian_chain(0.05);
  const auto grid = default_sweep_grid(model);
  const spec::Boundary bd(2.0);
  auto x0 = GriddedFunction::tabulate(box, {box.origin_index()}, grid, bd,
                                      [&](std::span<const double> x) { return x[box.origin_index()]; });
  const auto res = apply_B(x0, 11, 0, model);
  const auto ref = linear_sweep_oracle(0.05, 3, 2.0, 12);
  for (std::size_t k = 0; k < res.trace.steps.size(); ++k)
    CHECK(res.trace.steps[k].value == doctest::Approx(ref[k]).epsilon(1e-9).scale(1e-12));
  // Support growth stays within the box and never exceeds four sites here.
  for (const auto& st : res.trace.steps) CHECK(st.support_size <= 4);

  const auto exact = spec::gaussian_moments(model, box, bd);
  CHECK(std::abs(res.trace.steps.back().value - exact.mean(static_cast<long>(box.origin_index()))) < 1e-9);

  const auto diag = convergence_diagnostic(res.trace, {exact.mean(static_cast<long>(box.origin_index())), 1e-3});
  CHECK_FALSE(diag.below_floor);
  CHECK(diag.strictly_decreasing);
  CHECK(diag.rate < 0.5);
  CHECK(diag.limit_ok);

  const auto res2 = apply_B(x0, 11, 0, gaussian_chain(0.1));
  const auto diag2 = convergence_diagnostic(res2.trace, {0.0, 1.0});
  const double ratio = diag2.rate / diag.rate;
  MESSAGE("rate(0.05) = " << diag.rate << ", rate(0.1) = " << diag2.rate);
  CHECK(ratio >= 2.0);
  CHECK(ratio <= 8.0);
}

TEST_CASE("no interaction: increments vanish") {
  const lattice::Box box(1, 3);
  const auto model = gaussian_chain(0.0);
  const auto grid = default_sweep_grid(model);
  auto x0 = GriddedFunction::tabulate(box, {box.origin_index()}, grid, spec::Boundary(2.0),
                                      [&](std::span<const double> x) { return x[box.origin_index()]; });
  const auto res = apply_B(x0, 7, 0, model);
  for (std::size_t k = 1; k < res.trace.steps.size(); ++k) CHECK(res.trace.steps[k].increment == 0.0);
  const auto diag = convergence_diagnostic(res.trace, {0.0, 1e-3});
  CHECK(diag.below_floor);
  CHECK(diag.limit_ok);
}

TEST_CASE("averaging stays between min and max") {
  const lattice::Box box(1, 3);
  const auto model = gaussian_chain(0.2);
  const auto grid = default_sweep_grid(model);
  auto f = GriddedFunction::tabulate(box, {at(box, -1), at(box, 1)}, grid, spec::Boundary(1.0),
                                     [&](std::span<const double> x) {
                                       return std::sin(x[at(box, -1)]) * std::tanh(x[at(box, 1)]);
                                     });
  const auto [lo, hi] = std::minmax_element(f.values().begin(), f.values().end());
  auto g = conditional_expectation_shell(f, box.shell(1), model);
  for (double v : g.values()) {
    CHECK(v >= *lo - 1e-12);
    CHECK(v <= *hi + 1e-12);
  }
}

TEST_CASE("errors") {
  const lattice::Box box(1, 3);
  const auto model = gaussian_chain(0.1);
  const auto grid = default_sweep_grid(model);
  auto f = GriddedFunction::tabulate(box, {at(box, 2)}, grid, spec::Boundary(0.0),
                                     [&](std::span<const double> x) { return x[at(box, 2)]; });
  CHECK_THROWS_AS(apply_B(f, 4, 0, model), Error);
  CHECK_THROWS_AS(conditional_expectation_shell(f, {at(box, 1), at(box, 2)}, model), Error);
  CHECK_THROWS_AS(GriddedFunction::tabulate(box, {0, 1, 2, 3, 4}, grid, spec::Boundary(0.0),
                                            [](std::span<const double>) { return 0.0; }),
                  BudgetError);
  std::vector<double> far(box.size(), 0.0);
  far[at(box, 2)] = 9.0;
  CHECK_THROWS_AS(f.evaluate(far), Error);
}

TEST_CASE("binary container round trip") {
  const lattice::Box box(1, 3);
  const auto model = gaussian_chain(0.1);
  spec::Boundary bd(1.5);
  bd.set(lattice::Site{{4}}, -0.5);
  auto f = GriddedFunction::tabulate(box, {at(box, -1), at(box, 1)}, default_sweep_grid(model), bd,
                                     [&](std::span<const double> x) { return x[at(box, -1)] - 2 * x[at(box, 1)]; });
  const auto path = (std::filesystem::temp_directory_path() / "mlslab_grid_test.bin").string();
  f.write_binary(path);
  const auto g = GriddedFunction::read_binary(path, box);
  CHECK(g.support() == f.support());
  CHECK(g.values() == f.values());
  CHECK(g.boundary().value(lattice::Site{{4}}) == -0.5);
  CHECK(g.boundary().fill() == 1.5);
  std::filesystem::remove(path);
}

TEST_CASE("gradient sweeping-out") {
  const lattice::Box box(1, 3);
  const std::vector<std::size_t> support{at(box, -1), at(box, 1)};
  auto f = [&](std::span<const double> x) { return std::tanh(x[at(box, -1)]) + std::tanh(x[at(box, 1)]); };
  auto model = gaussian_chain(0.0, 0.0);
  const auto free = check_gradient_sweep(model, box, f, support, 1, 20, 3, 2.0, 1.0);
  CHECK(free.eta_min == 0.0);

  std::vector<double> eta;
  for (double J : {0.025, 0.05, 0.1}) {
    model.J = J;
    model.J0 = J;
    const auto rep = check_gradient_sweep(model, box, f, support, 1, 30, 5, 2.0, 1.0);
    eta.push_back(rep.eta_min);
    CHECK(rep.eta_min < 1.0);
    CHECK(rep.eta_proof == doctest::Approx(2.0 * 2.0 * 2.0 * 1.0 * J * J));
  }
  for (std::size_t k = 1; k < eta.size(); ++k) {
    const double r = eta[k] / eta[k - 1];
    CHECK(r >= 2.0);
    CHECK(r <= 8.0);
  }
}

TEST_CASE("entropy decay") {
  const lattice::Box box(1, 3);
  const orlicz::HFunction h(orlicz::YoungFunction::power(2.0));
  const std::vector<double> lambdas{0.0, 0.5, 1.0};
  auto make = [&](const spec::SpinModel& model) {
    return GriddedFunction::tabulate(box, {box.origin_index()}, default_sweep_grid(model),
                                     spec::Boundary(model.boundary_value),
                                     [&](std::span<const double> x) { return std::tanh(x[box.origin_index()]); });
  };
  const auto free_model = gaussian_chain(0.0, 0.0);
  const auto rep0 = check_entropy_decay(free_model, make(free_model), 0, 3, lambdas, h, 2.0, 2000, 9);
  // sech^2 peaks at 1; central differences on the coarse grid see less.
  CHECK(rep0.a <= 1.0);
  CHECK(rep0.a >= 0.8);
  for (const auto& row : rep0.rows) CHECK(std::abs(row.term.mean) <= 3.0 * row.term.stderr_ + 1e-15);

  const auto model = gaussian_chain(0.05, 0.0);
  const auto rep = check_entropy_decay(model, make(model), 0, 3, lambdas, h, 2.0, 2000, 9);
  for (const auto& row : rep.rows)
    if (row.lambda == 0.0) CHECK(row.term.mean == 0.0);
  for (const auto& fit : rep.fits) {
    if (fit.lambda == 0.0) continue;
    CHECK(fit.nonincreasing);
    CHECK(fit.C2 < 1.0);
    CHECK(fit.C2 > 0.0);
  }
}
