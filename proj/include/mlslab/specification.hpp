#pragma once

// Local specification of a real-valued spin system on Z^d:
//
//   H(x) = sum_i phi(x_i) + sum_{i, j ~ i} J V(x_i, z_j)
//
// one-site conditional measures by 1-D quadrature, and a block Gibbs
// sampler for the finite-volume measure on a box.

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "mlslab/common.hpp"
#include "mlslab/lattice.hpp"

namespace mlslab::spec {

enum class PhaseKind { Gaussian, Power, Perturbed };
enum class PotentialKind { Bilinear, SquaredDifference };

std::string to_string(PhaseKind k);
std::string to_string(PotentialKind k);

/// Single-site phase. Gaussian: x^2/2. Power: |x|^p/p.
/// Perturbed: |x|^p + |x|^{p-1-delta} cos x.
struct Phase {
  PhaseKind kind = PhaseKind::Gaussian;
  double p = 2.0;
  double delta = 0.5;

  double operator()(double x) const;
  double derivative(double x) const;
  void validate() const;
};

/// Pair potential V(x, y) = xy or (x - y)^2.
struct Potential {
  PotentialKind kind = PotentialKind::Bilinear;

  double operator()(double x, double y) const;
  double dx(double x, double y) const;
  /// sup |d^2 V / dx dy|.
  double mixed_bound() const;
  bool nonnegative() const { return kind == PotentialKind::SquaredDifference; }
};

struct SpinModel {
  int d = 1;
  Phase phase;
  Potential potential;
  double J = 0.0;
  double J0 = 0.0;
  int box_radius = 3;
  UniformGrid grid;
  double boundary_value = 0.0;

  void validate() const;
  /// Additionally requires J >= 0 and V >= 0.
  void require_ferromagnetic_nonnegative() const;

  nlohmann::json to_json() const;
  /// Strict: unknown keys are rejected. Missing grid falls back to the
  /// phase-dependent default.
  static SpinModel from_json(const nlohmann::json& j);
  static UniformGrid default_grid(const Phase& phase);
};

/// Spin configuration outside the integrated region.
class Boundary {
 public:
  Boundary() = default;
  explicit Boundary(double fill) : fill_(fill) {}

  double value(const lattice::Site& s) const;
  double fill() const { return fill_; }
  void set(const lattice::Site& s, double v) { overrides_[s] = v; }
  const std::map<lattice::Site, double>& overrides() const { return overrides_; }

 private:
  double fill_ = 0.0;
  std::map<lattice::Site, double> overrides_;
};

/// Normalised density exp(-U) on a uniform grid, trapezoid quadrature.
class OneSiteMeasure {
 public:
  /// Throws TailContainmentError when the endpoint density is not below
  /// 1e-12 of the maximum (unless `check_tails` is false).
  OneSiteMeasure(const UniformGrid& grid, std::span<const double> potential,
                 bool check_tails = true);
  static OneSiteMeasure from_potential(const UniformGrid& grid,
                                       const std::function<double(double)>& u,
                                       bool check_tails = true);

  const UniformGrid& grid() const { return grid_; }
  const std::vector<double>& nodes() const { return x_; }
  const std::vector<double>& density() const { return rho_; }
  /// Trapezoid weight times density at each node; sums to 1.
  const std::vector<double>& weights() const { return w_; }
  double log_partition() const { return log_z_; }

  double expect(const std::function<double(double)>& g) const;
  double expect_values(std::span<const double> g) const;
  double mean() const;
  double variance() const;
  /// Piecewise-linear CDF through the cumulative trapezoid table.
  double cdf(double x) const;
  /// Inverse of cdf() for u in (0, 1).
  double quantile(double u) const;

 private:
  UniformGrid grid_;
  std::vector<double> x_, rho_, w_, cum_;
  double log_z_ = 0.0;
};

/// Conditional measure at site i given the boundary on its neighbours.
OneSiteMeasure one_site_measure(const SpinModel& model, const lattice::Site& i,
                                const Boundary& boundary);
double one_site_expect(const OneSiteMeasure& m, const std::function<double(double)>& g);

/// Hamiltonian on `region` with interior spins listed in region order.
/// Interior edges are counted from both endpoints, as in the double sum.
double hamiltonian(const SpinModel& model, const lattice::LatticeRegion& region,
                   std::span<const double> interior, const Boundary& boundary);

/// Rows of box configurations (box index order).
struct SampleSet {
  std::size_t width = 0;
  std::vector<double> data;

  std::size_t rows() const { return width ? data.size() / width : 0; }
  std::span<const double> row(std::size_t r) const {
    return {data.data() + r * width, width};
  }
  void append(std::span<const double> row);
};

/// Alternating-parity block Gibbs sampler on a box. The finite-volume
/// measure is exp(-sum phi - sum_{edges} J V - sum_{boundary edges} J V):
/// each edge once, which is the measure whose one-site conditionals are
/// one_site_measure().
class BlockGibbsSampler {
 public:
  BlockGibbsSampler(const SpinModel& model, const lattice::Box& box,
                    const Boundary& boundary, std::uint64_t seed);

  void set_state(std::span<const double> state);
  const std::vector<double>& state() const { return state_; }
  /// Redraws every site of parity `cls`.
  void half_sweep(int cls);
  void sweep() {
    half_sweep(0);
    half_sweep(1);
  }

 private:
  const SpinModel& model_;
  const lattice::Box& box_;
  std::vector<double> state_;
  std::vector<double> outside_;  // boundary value per (site, neighbour slot)
  std::vector<double> phi_;
  std::vector<double> u_, cum_;
  Rng rng_;
};

SampleSet sample_block_gibbs(const SpinModel& model, const lattice::Box& box,
                             const Boundary& boundary, int sweeps, std::uint64_t seed,
                             int burn_in = 200, int thin = 1);

using ConfigFunction = std::function<double(std::span<const double>)>;

MeanEstimate estimate_mu(const SpinModel& model, const lattice::Box& box,
                         const Boundary& boundary, const ConfigFunction& f, int samples,
                         std::uint64_t seed, int burn_in = 200);

/// Exact mean and covariance of the finite-volume measure for the Gaussian
/// phase with bilinear potential (single-counted edges).
struct GaussianMoments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};
GaussianMoments gaussian_moments(const SpinModel& model, const lattice::Box& box,
                                 const Boundary& boundary);
/// Exact draws from that Gaussian.
SampleSet sample_exact_gaussian(const SpinModel& model, const lattice::Box& box,
                                const Boundary& boundary, int count, std::uint64_t seed);

void write_samples_csv(const std::string& path, const lattice::Box& box, const SampleSet& s);
void write_samples_binary(const std::string& path, const SampleSet& s);
SampleSet read_samples_binary(const std::string& path);

}  // namespace mlslab::spec
