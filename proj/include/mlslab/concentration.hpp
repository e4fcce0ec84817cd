#pragma once

// Empirical tails of Gibbs samples against the exponential envelopes built
// from omega*_H, and Monte Carlo lower bounds on enlargement probabilities.

#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include "mlslab/common.hpp"
#include "mlslab/lattice.hpp"
#include "mlslab/orlicz.hpp"
#include "mlslab/specification.hpp"

namespace mlslab::conc {

/// C1 = D + 2d eta and C2 = 2d eta.
struct SweepConstants {
  double C1 = 0.0;
  double C2 = 0.0;
};
SweepConstants proof_constants(int d, double eta, double D = 2.0);

class Envelope {
 public:
  /// t* = t / (t - 1) with t the growth witness of H. Throws if H fails
  /// the growth check.
  Envelope(const orlicz::HFunction& h, double a, double c, double C1, double C2);

  double a() const { return a_; }
  double c() const { return c_; }
  double C1() const { return C1_; }
  double C2() const { return C2_; }
  double t() const { return t_; }
  double t_star() const { return t_star_; }
  /// 1 / (2^{2 t*} C1^{t* - 1})
  double C_ddot() const { return c_ddot_; }
  const orlicz::GrowthEnvelope& growth() const { return *env_; }

  /// (1 / (2^{t*} C2^{t*-1}))^k >= k + 1 for k = 1..64.
  bool k_condition() const { return k_ok_; }
  /// Smallest r with a c C_ddot omega*(2r / (ac)) >= 8 ln 2.
  double r_min() const { return r_min_; }
  /// (omega(2) C_ddot omega*(2 / (omega(2) c)))^{-1} * factor ln 2, factor 16
  /// by default.
  double R(double factor = 16.0) const;
  /// (omega(2) C_ddot / 2) omega*(1 / (omega(2) c)).
  double K_hat() const;

 private:
  double a_, c_, C1_, C2_;
  double t_ = 0.0, t_star_ = 0.0, c_ddot_ = 0.0, r_min_ = 0.0;
  bool k_ok_ = false;
  std::shared_ptr<const orlicz::GrowthEnvelope> env_;
};

struct EnvelopeValue {
  double value = 1.0;
  bool valid = false;
};

/// exp(-(a c C_ddot / 2) omega*(2r / (ac))).
EnvelopeValue envelope_value(const Envelope& env, double r);

/// exp(-K omega*(2r / K)).
double herbst_tail(const orlicz::GrowthEnvelope& env, double K, double r);
/// 2 exp(-(q - 1)^p r^p / C^{p-1}).
double bz_tail(double q, double p, double C, double r);

// ---------------------------------------------------------------------------
// Tails
// ---------------------------------------------------------------------------

struct TailPoint {
  double r = 0.0;
  std::size_t exceed = 0;
  double empirical = 0.0;
  double ci_low = 0.0;    // two-sided 99%
  double ci_high = 1.0;   // two-sided 99%
  double upper_ci = 1.0;  // one-sided 99%
  double envelope = 1.0;
  bool valid = false;
  bool dominated = true;
};

struct TailReport {
  double mu_hat = 0.0;
  std::size_t n_mean = 0;
  std::size_t n_tail = 0;
  std::vector<TailPoint> points;
};

/// F - mu_hat F with mu_hat from the first half of the rows and the
/// exceedances from the second.
TailReport empirical_tail(const spec::SampleSet& samples, const spec::ConfigFunction& F,
                          std::span<const double> r_grid);
/// Draws `samples` block Gibbs configurations first (at least 10^4).
TailReport empirical_tail(const spec::SpinModel& model, const lattice::Box& box,
                          const spec::Boundary& boundary, const spec::ConfigFunction& F,
                          std::span<const double> r_grid, int samples, std::uint64_t seed);

struct DominanceVerdict {
  bool pass = true;
  std::size_t valid_points = 0;
  std::vector<double> violations;  // r values
  /// Envelope above 0.5 at every valid r.
  bool vacuous = false;
};

/// Fills the envelope columns of `tail` and checks upper_ci <= envelope at
/// every valid r.
DominanceVerdict dominance_check(TailReport& tail, const Envelope& env);

void write_tail_csv(std::ostream& out, const TailReport& tail);

// ---------------------------------------------------------------------------
// Enlargements
// ---------------------------------------------------------------------------

/// Even cost functions used to measure displacements coordinatewise.
class Gauge {
 public:
  static Gauge quadratic(double coeff);
  static Gauge power(double p, double coeff = 1.0);
  /// H* through a lookup table on [0, ymax] (closed form when H is x^2).
  static Gauge h_star(const orlicz::HFunction& h, double ymax = 64.0);
  /// Legendre conjugate of phi, tabulated the same way.
  static Gauge conjugate_of(const orlicz::YoungFunction& phi, double ymax = 64.0);

  double operator()(double y) const;
  std::string describe() const { return name_; }

 private:
  enum class Kind { Quadratic, Power, Table } kind_ = Kind::Quadratic;
  double p_ = 2.0, coeff_ = 1.0;
  double ymax_ = 0.0, step_ = 0.0, tail_slope_ = 0.0;
  std::vector<double> table_;
  std::string name_;
};

/// A = {F <= level} with F depending only on the sites in N (box indices);
/// the level defaults to the first-half quantile at 1/2 + 1.5/sqrt(rows/2). An infinite level makes A
/// the whole space.
struct EnlargementSpec {
  std::vector<std::size_t> N;
  spec::ConfigFunction F;
  Gauge gauge = Gauge::quadratic(0.25);
  std::optional<double> level;
  std::size_t witnesses = 20000;
};

struct EnlargementPoint {
  double r = 0.0;
  double complement = 0.0;
  double upper_ci = 1.0;
  double bound = 1.0;
  bool ok = true;
};

struct EnlargementCurve {
  double level = 0.0;
  double mu_A = 0.0;
  std::size_t witnesses = 0;
  std::size_t tested = 0;
  double K_hat = 0.0;
  std::vector<EnlargementPoint> points;
  bool pass = true;
};

/// Minimum gauge distance from each test row to the witness set (rows of the
/// first half inside A), which over-estimates the true distance, so the
/// reported complement is an upper estimate. Compares the one-sided 99% upper
/// bound of 1 - mu(A + {sum gauge <= r}) with exp(-K_hat r).
EnlargementCurve enlargement_probability(const spec::SampleSet& samples,
                                         const EnlargementSpec& spec,
                                         std::span<const double> r_grid, double K_hat);
EnlargementCurve enlargement_probability(const spec::SpinModel& model, const lattice::Box& box,
                                         const spec::Boundary& boundary,
                                         const EnlargementSpec& spec,
                                         std::span<const double> r_grid, double K_hat,
                                         int samples, std::uint64_t seed);

struct TalagrandPoint {
  double r = 0.0;
  double scale = 0.0;  // 1 / omega_{Phi*}^{-1}(1 / r)
  double mu_lower = 0.0;
  double bound = 0.0;  // 1 - exp(-C r)
  bool ok = true;
};

struct TalagrandCurve {
  double level = 0.0;
  std::vector<TalagrandPoint> points;
  bool pass = true;
};

/// Lower bound on mu(A + sqrt(r) B_2 + s B_{Phi*}) from threshold splits of
/// x - z into a small block tested against sqrt(r) B_2 and a large block
/// tested against s B_{Phi*}.
TalagrandCurve talagrand_check(const spec::SampleSet& samples, const EnlargementSpec& spec,
                               const orlicz::YoungFunction& phi, std::span<const double> r_grid,
                               double C);

/// sup_t F(tx) / F(t) over a log grid for a Young function, and its inverse.
double young_omega(const orlicz::YoungFunction& f, double x);
double young_omega_inverse(const orlicz::YoungFunction& f, double y);

}  // namespace mlslab::conc
