#pragma once

// Entropy, variance and probe-based lower estimates of the spectral-gap,
// log-Sobolev and modified log-Sobolev constants of one-site measures, plus
// the perturbation quantities U_{i,omega} used when the single-site measures
// only satisfy a log-Sobolev inequality.

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mlslab/common.hpp"
#include "mlslab/lattice.hpp"
#include "mlslab/orlicz.hpp"
#include "mlslab/specification.hpp"

namespace mlslab::func {

using spec::OneSiteMeasure;

/// Central differences with one-sided ends.
std::vector<double> grid_derivative(std::span<const double> values, double h);

/// mu(f log(f / mu f)) by quadrature, written as sum w m phi(f/m) with
/// phi(u) = u log u - u + 1 so that every term is nonnegative.
double entropy(const OneSiteMeasure& m, std::span<const double> f);
double entropy(const OneSiteMeasure& m, const std::function<double(double)>& f);
/// Same functional for an equally weighted sample.
double entropy_samples(std::span<const double> f);
double variance(const OneSiteMeasure& m, std::span<const double> f);

/// Ent(f^2) / sum_i mu(H(f'/f) f^2), with f' by finite differences.
/// Empty when the denominator vanishes (f constant).
std::optional<double> mls_ratio(const OneSiteMeasure& m, const orlicz::HFunction& h,
                                std::span<const double> f);
std::optional<double> mls_ratio(const OneSiteMeasure& m, const orlicz::HFunction& h,
                                const std::function<double(double)>& f);

struct Generator {
  std::string name;
  std::function<double(double)> g;
};

struct Probe {
  std::string id;
  std::function<double(double)> f;
};

/// Probes f = exp(theta g / 2) over generators g and a symmetric theta grid,
/// optionally followed by the plain generators themselves.
class TestFunctionFamily {
 public:
  TestFunctionFamily();
  TestFunctionFamily(std::vector<Generator> generators, std::vector<double> thetas);

  const std::vector<Generator>& generators() const { return gens_; }
  const std::vector<double>& thetas() const { return thetas_; }
  std::vector<Probe> tilts() const;
  std::vector<Probe> plain() const;

 private:
  std::vector<Generator> gens_;
  std::vector<double> thetas_;
};

enum class ConstantKind { SG2, LS2, MLS };
std::string to_string(ConstantKind k);

struct ConstantPoint {
  double omega = 0.0;
  double estimate = 0.0;
  std::string probe_id;
};

/// Lower bounds (probe-limited) on a functional-inequality constant.
struct ConstantEstimate {
  ConstantKind kind = ConstantKind::LS2;
  /// Max over probes and boundary values.
  double lower_bound = 0.0;
  std::string argmax_probe;
  double argmax_omega = 0.0;
  std::vector<ConstantPoint> curve;
  double uniform_sup = 0.0;
  std::size_t skipped_probes = 0;
};

/// Best ratio over the family on one measure. Probes whose f^2-weighted
/// density is not contained in the grid are skipped.
ConstantPoint best_ratio(const OneSiteMeasure& m, ConstantKind kind,
                         const orlicz::HFunction* h, const TestFunctionFamily& family,
                         std::size_t* skipped = nullptr);

ConstantEstimate estimate_constant(const spec::SpinModel& model, const lattice::Site& site,
                                   std::span<const double> boundary_grid, ConstantKind kind,
                                   const orlicz::HFunction* h,
                                   const TestFunctionFamily& family);

struct GapResult {
  double gap = 0.0;
  double coarse_gap = 0.0;
  bool converged = true;
};

/// Smallest nonzero eigenvalue of the discretised generator f'' - U' f'
/// (Neumann ends). Compared against the grid with every other node; a
/// difference above 1% clears `converged`.
GapResult spectral_gap_eigen(const OneSiteMeasure& m);

struct SgFromLs {
  bool holds = false;
  double margin = 0.0;  // c/2 + slack - c0
};
SgFromLs check_mls_implies_sg(double c_ls, double c0, double slack = 0.02);

struct TensorisationReport {
  double component_max = 0.0;
  double product_sup = 0.0;
  std::string product_argmax;
};

/// MLS(H) lower bounds for a and b separately and for a (x) b by 2-D
/// quadrature over single-factor, product and rotated probes.
TensorisationReport tensorisation_check(const OneSiteMeasure& a, const OneSiteMeasure& b,
                                        const orlicz::HFunction& h,
                                        const TestFunctionFamily& family);

// ---------------------------------------------------------------------------
// Perturbation quantities
// ---------------------------------------------------------------------------

struct UValue {
  double value = 0.0;
  double epsilon = 0.0;  // after any halving
};

/// U = c_hat log E^{i,omega} exp(eps * Utilde) with
/// Utilde = 2c sum_j |d_x V(x, w_j)|^2 + (1/J0) sum_j V(x, w_j).
/// With auto_halve, eps is halved until the integrand is tail-contained;
/// otherwise TailContainmentError is thrown.
UValue compute_U(const spec::SpinModel& model, const lattice::Site& site,
                 const spec::Boundary& boundary, double epsilon, double c, double c_hat,
                 bool auto_halve = true);

struct PerturbationReport {
  double epsilon = 0.0;
  std::vector<std::pair<double, double>> U_values;  // (omega, U)
  MeanEstimate mu_U2;
  double K_check = 0.0;
  double R_hat = 0.0;
};

/// MC estimate of mu(U^2) at the origin with omega taken from the running
/// configuration. K_check = mean + 3 stderr.
PerturbationReport check_h4(const spec::SpinModel& model, const lattice::Box& box,
                            const spec::Boundary& boundary, double epsilon, double c,
                            double c_hat, int samples, std::uint64_t seed,
                            std::span<const double> omega_grid = {});

struct PerturbedLsReport {
  double epsilon = 0.0;
  double R_hat = 0.0;
  /// Per boundary value: (omega, U, required R at that omega).
  std::vector<std::array<double, 3>> curve;
};

/// Smallest R >= 0 with Ent(f^2) <= (R + J0 U) E|f'|^2 over all probes and
/// boundary values.
PerturbedLsReport perturbed_ls_check(const spec::SpinModel& model, const lattice::Site& site,
                                     std::span<const double> boundary_grid, double epsilon,
                                     double c, double c_hat, const TestFunctionFamily& family);

}  // namespace mlslab::func
