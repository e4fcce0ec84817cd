#pragma once

// Functions of finitely many spins stored as value tensors on a product grid,
// shell conditional expectations on them, and the composed operator
// B^{n,s} = E^{Lambda_n} ... E^{Lambda_s}.

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "mlslab/common.hpp"
#include "mlslab/lattice.hpp"
#include "mlslab/orlicz.hpp"
#include "mlslab/specification.hpp"

namespace mlslab::sweep {

/// Largest tensor (grid points) a GriddedFunction may hold.
constexpr std::size_t kDefaultBudget = 2'000'000;

/// 33 nodes over the model's spin range, so four-site tensors fit the budget.
UniformGrid default_sweep_grid(const spec::SpinModel& model);

/// f(x_S) for a sorted support S of box sites, all sites sharing one grid.
/// Values are row-major with the last support site fastest.
class GriddedFunction {
 public:
  GriddedFunction(const lattice::Box& box, std::vector<std::size_t> support, UniformGrid grid,
                  spec::Boundary boundary, std::vector<double> values,
                  std::size_t budget = kDefaultBudget);

  static GriddedFunction constant(const lattice::Box& box, UniformGrid grid,
                                  spec::Boundary boundary, double value);
  /// Tabulates f over the support; every other box site sits at its
  /// boundary value.
  static GriddedFunction tabulate(const lattice::Box& box, std::vector<std::size_t> support,
                                  UniformGrid grid, spec::Boundary boundary,
                                  const spec::ConfigFunction& f,
                                  std::size_t budget = kDefaultBudget);

  const lattice::Box& box() const { return *box_; }
  /// Box indices, ascending.
  const std::vector<std::size_t>& support() const { return support_; }
  lattice::LatticeRegion region() const;
  const UniformGrid& grid() const { return grid_; }
  const spec::Boundary& boundary() const { return boundary_; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }
  std::size_t budget() const { return budget_; }

  /// Multilinear interpolation at a full box configuration. Throws when a
  /// support coordinate lies outside the grid.
  double evaluate(std::span<const double> config) const;
  /// Value with every site at its boundary value.
  double at_reference() const;
  /// The box configuration used by at_reference().
  std::vector<double> reference_config() const;

  void write_binary(const std::string& path) const;
  static GriddedFunction read_binary(const std::string& path, const lattice::Box& box);

 private:
  const lattice::Box* box_;
  std::vector<std::size_t> support_;
  UniformGrid grid_;
  spec::Boundary boundary_;
  std::vector<double> values_;
  std::size_t budget_;
};

/// Integrates out the shell sites present in the support, one 1-D quadrature
/// per slice. Throws if the shell has adjacent sites or the result exceeds
/// the budget.
GriddedFunction conditional_expectation_shell(const GriddedFunction& f,
                                              const std::vector<std::size_t>& shell,
                                              const spec::SpinModel& model);

struct TraceStep {
  int k = 0;
  std::size_t support_size = 0;
  /// B^{k,s} f at the reference configuration.
  double value = 0.0;
  /// |B^{k,s} f - B^{k-1,s} f| at the reference configuration (k = s
  /// compares against f itself).
  double increment = 0.0;
};

struct SweepTrace {
  int s = 0;
  int n = 0;
  double initial_value = 0.0;
  std::vector<TraceStep> steps;
};

struct SweepResult {
  SweepTrace trace;
  GriddedFunction result;
};

/// Requires support(f) inside Lambda_{s-1} u Lambda_s and n >= s.
SweepResult apply_B(const GriddedFunction& f, int n, int s, const spec::SpinModel& model);

constexpr double kDeviationFloor = 1e-14;

struct ConvergenceDiagnostic {
  /// Contraction per full sweep (two consecutive shells), from a least-squares
  /// fit of log increments over the tail half of the steps above the floor.
  double rate = 0.0;
  bool below_floor = false;
  bool strictly_decreasing = true;  // increments after the second step
  double final_deviation = 0.0;     // |limit - mu estimate|
  bool limit_ok = false;
};

/// Requires at least 6 steps.
ConvergenceDiagnostic convergence_diagnostic(const SweepTrace& trace, const MeanEstimate& mu);

void write_trace_csv(std::ostream& out, const SweepTrace& trace);

// ---------------------------------------------------------------------------
// Gradient sweeping-out
// ---------------------------------------------------------------------------

struct GradientSample {
  std::size_t sample = 0;
  std::size_t site = 0;  // box index of i
  double lhs = 0.0;      // |d_i E f|^2
  double own = 0.0;      // E |d_i f|^2
  double neighbours = 0.0;  // E |grad over neighbours of i in Lambda_k of f|^2
};

struct GradientSweepReport {
  double eta_min = 0.0;
  /// 2 c 2d c_hat M^2 J^2 for comparison.
  double eta_proof = 0.0;
  std::vector<GradientSample> detail;
};

/// At sampled configurations, the smallest eta with
/// |d_i E^{Lambda_k} f|^2 <= 2 E|d_i f|^2 + eta E|grad_{~i n Lambda_k} f|^2
/// for every i in Lambda_{k+1} next to the support of f.
GradientSweepReport check_gradient_sweep(const spec::SpinModel& model, const lattice::Box& box,
                                         const spec::ConfigFunction& f,
                                         const std::vector<std::size_t>& support, int k,
                                         int boundary_samples, std::uint64_t seed, double c,
                                         double c_hat);

// ---------------------------------------------------------------------------
// Entropy decay along the sweep
// ---------------------------------------------------------------------------

struct EntropyDecayRow {
  double lambda = 0.0;
  int k = 0;
  MeanEstimate term;
  /// a c omega_H(lambda / 2)
  double level = 0.0;
};

struct EntropyDecayFit {
  double lambda = 0.0;
  double C1 = 0.0;
  double C2 = 0.0;
  bool nonincreasing = true;
};

struct EntropyDecayReport {
  double a = 0.0;
  std::vector<EntropyDecayRow> rows;
  std::vector<EntropyDecayFit> fits;
};

/// Per k and lambda, mu(Ent_{E^{Lambda_{k+1}}}(e^{lambda h}) / E^{Lambda_{k+1}} e^{lambda h})
/// with h = B^{k,s} F, the outer average by block Gibbs samples and the inner
/// one by quadrature. `a` defaults to the measured max of sum_i H(d_i F).
EntropyDecayReport check_entropy_decay(const spec::SpinModel& model, const GriddedFunction& F,
                                       int s, int k_max, std::span<const double> lambdas,
                                       const orlicz::HFunction& h, double c, int samples,
                                       std::uint64_t seed, std::optional<double> a = {});

/// max over grid nodes of sum_i H(d_i F), derivatives by central differences.
double gradient_bound(const GriddedFunction& F, const orlicz::HFunction& h);

}  // namespace mlslab::sweep
