#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "mlslab/specification.hpp"
#include "support/oracles.hpp"

using namespace mlslab;
using namespace mlslab::spec;
using lattice::Site;

namespace {

SpinModel gaussian(double J, int radius = 3) {
  SpinModel m;
  m.J = J;
  m.J0 = std::abs(J);
  m.box_radius = radius;
  return m;
}

}  // namespace

TEST_CASE("hamiltonian") {
  auto m = gaussian(0.0);
  const lattice::LatticeRegion r0({Site{{0}}});
  std::vector<double> x{2.0};
  CHECK(hamiltonian(m, r0, x, Boundary(0.0)) == doctest::Approx(2.0));
  m = gaussian(0.1);
  x = {1.0};
  CHECK(hamiltonian(m, r0, x, Boundary(1.0)) == doctest::Approx(0.7));
  // Interior edge counted from both ends: region {0,1}, zero boundary.
  const lattice::LatticeRegion r01({Site{{0}}, Site{{1}}});
  std::vector<double> y{1.0, 2.0};
  CHECK(hamiltonian(m, r01, y, Boundary(0.0)) == doctest::Approx(0.5 + 2.0 + 2 * 0.1 * 2.0));
  m.potential.kind = PotentialKind::SquaredDifference;
  std::vector<double> zeros{0.0, 0.0};
  CHECK(hamiltonian(m, r01, zeros, Boundary(0.0)) == 0.0);
  std::vector<double> short_vals{1.0};
  CHECK_THROWS(hamiltonian(m, r01, short_vals, Boundary(0.0)));
}

TEST_CASE("one-site measures") {
  const auto g = one_site_measure(gaussian(0.0), Site{{0}}, Boundary(0.0));
  CHECK(std::abs(g.mean()) < 1e-8);
  CHECK(std::abs(g.variance() - 1.0) < 1e-4);
  CHECK(g.expect([](double) { return 1.0; }) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(one_site_expect(g, [](double x) { return x * x; }) - 1.0) < 1e-4);

  const auto t = one_site_measure(gaussian(0.1), Site{{0}}, Boundary(1.0));
  CHECK(t.mean() == doctest::Approx(-0.2).epsilon(1e-8));
  CHECK(t.variance() == doctest::Approx(1.0).epsilon(1e-4));

  // Tail containment.
  SpinModel narrow = gaussian(0.0);
  narrow.grid = UniformGrid{3.0, 129};
  CHECK_THROWS_AS(one_site_measure(narrow, Site{{0}}, Boundary(0.0)), TailContainmentError);

  // cdf and quantile are inverse to each other.
  for (double u : {0.01, 0.3, 0.5, 0.9})
    CHECK(g.cdf(g.quantile(u)) == doctest::Approx(u).epsilon(1e-10));
}

TEST_CASE("phases") {
  Phase p{PhaseKind::Perturbed, 4.0, 0.5};
  for (double x : {-2.0, -0.3, 0.7, 3.1}) {
    const double h = 1e-6;
    CHECK(p.derivative(x) == doctest::Approx((p(x + h) - p(x - h)) / (2 * h)).epsilon(1e-6));
  }
  Phase q{PhaseKind::Power, 3.0, 0.0};
  CHECK(q(-2.0) == doctest::Approx(8.0 / 3.0));
  CHECK(Potential{PotentialKind::SquaredDifference}.mixed_bound() == 2.0);
}

TEST_CASE("sampler marginal at J=0 matches the quadrature CDF") {
  const auto m = gaussian(0.0, 1);
  const lattice::Box box(1, 1);
  const auto s = sample_block_gibbs(m, box, Boundary(0.0), 100000, 11, 10);
  const auto ref = one_site_measure(m, Site{{0}}, Boundary(0.0));
  std::vector<double> v;
  for (std::size_t r = 0; r < s.rows(); ++r) v.push_back(s.row(r)[box.origin_index()]);
  std::sort(v.begin(), v.end());
  double ks = 0.0;
  const double n = static_cast<double>(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double c = ref.cdf(v[i]);
    ks = std::max({ks, std::abs(c - i / n), std::abs(c - (i + 1) / n)});
  }
  MESSAGE("KS statistic " << ks);
  CHECK(ks < 0.005);
}

TEST_CASE("determinism") {
  const auto m = gaussian(0.05);
  const lattice::Box box(1, 3);
  const auto a = sample_block_gibbs(m, box, Boundary(1.0), 200, 5);
  const auto b = sample_block_gibbs(m, box, Boundary(1.0), 200, 5);
  CHECK(a.data == b.data);
  const std::string path = "test_specification_samples.bin";
  write_samples_binary(path, a);
  CHECK(read_samples_binary(path).data == a.data);
  std::remove(path.c_str());
}

TEST_CASE("Gaussian end-to-end against the exact precision solve") {
  const auto m = gaussian(0.05);
  const lattice::Box box(1, 3);
  const Boundary bd(1.0);
  const auto exact = gaussian_moments(m, box, bd);
  const auto s = sample_block_gibbs(m, box, bd, 40000, 3);
  const std::size_t o = box.origin_index();
  // Neighbour covariance is negative for J > 0 with V = xy.
  CHECK(exact.covariance(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(o + 1)) < 0.0);
  for (std::size_t i = 0; i < box.size(); ++i) {
    std::vector<double> xi, xx;
    for (std::size_t r = 0; r < s.rows(); ++r) {
      xi.push_back(s.row(r)[i]);
      if (i + 1 < box.size()) xx.push_back(s.row(r)[i] * s.row(r)[i + 1]);
    }
    const auto e = batch_means(xi);
    const auto ii = static_cast<Eigen::Index>(i);
    CHECK(std::abs(e.mean - exact.mean(ii)) < 3.5 * e.stderr_ + 1e-3);
    if (i + 1 < box.size()) {
      const auto c = batch_means(xx);
      const double ref = exact.covariance(ii, ii + 1) + exact.mean(ii) * exact.mean(ii + 1);
      CHECK(std::abs(c.mean - ref) < 3.5 * c.stderr_ + 1e-3);
    }
  }
  // Chain started from exact draws stays stationary.
  const auto draws = sample_exact_gaussian(m, box, bd, 20000, 9);
  BlockGibbsSampler sampler(m, box, bd, 17);
  std::vector<double> before, after;
  for (std::size_t r = 0; r < draws.rows(); r += 2) {
    sampler.set_state(draws.row(r));
    before.push_back(draws.row(r)[o] * draws.row(r)[o]);
    sampler.sweep();
    after.push_back(sampler.state()[o] * sampler.state()[o]);
  }
  const auto eb = batch_means(before);
  const auto ea = batch_means(after);
  CHECK(std::abs(ea.mean - eb.mean) < 3.0 * std::hypot(ea.stderr_, eb.stderr_));
}

TEST_CASE("estimate_mu") {
  const auto m0 = gaussian(0.0);
  const lattice::Box box(1, 2);
  const auto one = estimate_mu(m0, box, Boundary(0.0), [](std::span<const double>) { return 1.0; },
                               2000, 1);
  CHECK(one.mean == 1.0);
  const std::size_t o = box.origin_index();
  const auto sq = estimate_mu(m0, box, Boundary(0.0),
                              [o](std::span<const double> x) { return x[o] * x[o]; }, 20000, 2);
  CHECK(std::abs(sq.mean - 1.0) < 3.0 * sq.stderr_);
  const auto lin = estimate_mu(gaussian(0.05), box, Boundary(0.0),
                               [o](std::span<const double> x) { return x[o]; }, 20000, 3);
  CHECK(std::abs(lin.mean) < 3.0 * lin.stderr_);

  // Region {i}: sampling agrees with quadrature for a handful of functions.
  const lattice::Box single(1, 0);
  const auto m = gaussian(0.05);
  const auto q = one_site_measure(m, Site{{0}}, Boundary(0.7));
  const auto s = sample_block_gibbs(m, single, Boundary(0.7), 40000, 8, 0);
  for (int k = 0; k < 20; ++k) {
    const double a = -1.0 + 0.1 * k;
    auto g = [a](double x) { return std::tanh(x - a) + 0.1 * x * x; };
    std::vector<double> v;
    for (std::size_t r = 0; r < s.rows(); ++r) v.push_back(g(s.row(r)[0]));
    const auto e = batch_means(v);
    CHECK(std::abs(e.mean - q.expect(g)) < 3.5 * e.stderr_ + 1e-4);
  }
}

TEST_CASE("model json") {
  const nlohmann::json j = {{"d", 1},
                            {"phase", {{"kind", "perturbed"}, {"p", 4.0}, {"delta", 0.5}}},
                            {"potential", {{"kind", "sqdiff"}}},
                            {"J", 0.02},
                            {"J0", 0.02},
                            {"box_radius", 2}};
  const auto m = SpinModel::from_json(j);
  CHECK(m.grid.half_width == 4.0);
  CHECK(SpinModel::from_json(m.to_json()).to_json() == m.to_json());
  auto bad = j;
  bad["typo"] = 1;
  CHECK_THROWS_AS(SpinModel::from_json(bad), ConfigError);
  bad = j;
  bad["J"] = 0.5;
  CHECK_THROWS_AS(SpinModel::from_json(bad), ConfigError);
  auto neg = m;
  neg.J = -0.01;
  CHECK_THROWS_AS(neg.require_ferromagnetic_nonnegative(), ConfigError);
}
