#pragma once

// Young-function calculus: conjugates, the quadratic-near-zero modification
// H of a nice Young function, the growth envelope
//
//     omega_H(x) = sup_{t>0} H(tx) / H(t)
//
// and its Legendre conjugate, plus the grid checks used to validate the
// growth hypotheses on H.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "mlslab/common.hpp"

namespace mlslab::orlicz {

/// Which part of the niceness definition failed.
enum class NicenessClause { Superlinear, PositiveAwayFromZero, FlatAtZero };

std::string to_string(NicenessClause clause);

class NicenessError : public Error {
 public:
  NicenessError(NicenessClause clause, const std::string& what)
      : Error(what), clause_(clause) {}
  NicenessClause clause() const noexcept { return clause_; }

 private:
  NicenessClause clause_;
};

struct NicenessReport {
  bool nice = true;
  std::optional<NicenessClause> failed;
};

/// Even convex function with Phi(0) = 0, evaluated on |x|.
///
/// Two representations: `coeff * |x|^p`, or a piecewise-linear table over
/// increasing nonnegative nodes (a node at 0 with value 0 is implied when the
/// table starts to the right of the origin). Tables extrapolate linearly with
/// the final slope.
class YoungFunction {
 public:
  struct Power {
    double p = 2.0;
    double coeff = 0.5;
  };
  struct Table {
    std::vector<double> x;
    std::vector<double> fx;
  };

  /// |x|^p / p.
  static YoungFunction power(double p);
  static YoungFunction power(double p, double coeff);
  /// Throws ConvexityError naming the first non-convex node (caller's indexing).
  static YoungFunction tabulated(std::vector<double> x, std::vector<double> fx);

  double operator()(double x) const;
  /// Right derivative on [0, inf), extended oddly.
  double derivative(double x) const;

  bool is_power() const { return std::holds_alternative<Power>(rep_); }
  const Power* as_power() const { return std::get_if<Power>(&rep_); }
  const Table* as_table() const { return std::get_if<Table>(&rep_); }

  NicenessReport niceness() const;

  nlohmann::json to_json() const;
  static YoungFunction from_json(const nlohmann::json& j);

 private:
  explicit YoungFunction(Power p) : rep_(p) {}
  explicit YoungFunction(Table t) : rep_(std::move(t)) {}

  std::variant<Power, Table> rep_;
};

/// Phi*(y) = sup_{x >= 0} { x|y| - Phi(x) }. Power inputs map to power
/// outputs; tables map to the exact conjugate of their piecewise-linear
/// interpolant.
YoungFunction conjugate(const YoungFunction& phi);

/// max_i { x_i y_j - f_i } for every y_j, by a monotone pointer walk.
/// Requires convex data (ConvexityError otherwise) and sorted y.
std::vector<double> discrete_legendre(std::span<const double> x,
                                      std::span<const double> fx,
                                      std::span<const double> y);

/// Index of the first node where the slope decreases, if any.
std::optional<std::size_t> first_convexity_violation(std::span<const double> x,
                                                     std::span<const double> fx);

/// H(x) = x^2 on |x| <= 1 and Phi(|x|)/Phi(1) beyond.
class HFunction {
 public:
  explicit HFunction(YoungFunction base);

  double operator()(double x) const;
  const YoungFunction& base() const { return base_; }
  /// H*(y), analytic for power bases with p >= 2, otherwise from the
  /// conjugate of the lower convex hull of H tabulated on a log grid.
  double conjugate_value(double y) const;
  /// True when H(x) = x^2 for all x.
  bool is_quadratic() const;

 private:
  YoungFunction base_;
  double base_at_one_;
  std::optional<YoungFunction> star_table_;
};

/// Requires a nice Phi; throws NicenessError naming the failed clause.
HFunction modification(const YoungFunction& phi);

/// Direct evaluation of omega_H(x) as a supremum over a log-spaced t grid on
/// [1e-6, 1e6] augmented with t = 1 and t = 1/x. Returns +inf when a ratio
/// is not finite.
double omega(const HFunction& h, double x, const LogGrid& tgrid = {});

/// omega_H tabulated on a log grid (log-log interpolation between nodes,
/// power-law extrapolation at the ends) together with its conjugate.
class GrowthEnvelope {
 public:
  explicit GrowthEnvelope(HFunction h, LogGrid grid = {});

  double omega(double x) const;
  double omega_star(double y) const;
  const HFunction& source() const { return h_; }
  bool finite() const { return finite_; }
  std::span<const double> nodes() const { return x_; }
  std::span<const double> values() const { return w_; }

 private:
  double interpolate(double x) const;

  HFunction h_;
  std::vector<double> x_;
  std::vector<double> w_;
  std::vector<double> slopes_;  // including the leading segment from 0
  bool finite_ = true;
  bool convex_ = true;
};

struct H2Report {
  bool ok = false;
  bool quadratic_ratio_nondecreasing = false;
  /// Smallest t on the search grid (step 1/128 over (2, 8]) for which
  /// H(x)/x^t is nonincreasing on the grid.
  std::optional<double> t_witness;
  /// First grid point where H(x)/x^2 decreases, if it does.
  std::optional<double> first_violation_x;
};

H2Report check_h2(const HFunction& h, const LogGrid& grid = {});

/// lambda * int_0^lambda omega_H(u/2) / u^2 du by adaptive Gauss-Kronrod.
/// Throws Error when the integrand blows up at 0.
double herbst_integral(const GrowthEnvelope& env, double lambda);

struct YoungLemmaReport {
  /// max over samples of (xy - Phi(x) - Phi*(y)) / max(1, xy), floored at 0.
  double young_max_violation = 0.0;
  /// Whether Phi/x^a is nondecreasing on the check grid.
  bool growth_premise = false;
  /// Largest relative increase of Phi*/y^{a*} on the grid (0 if premise fails).
  double duality_max_violation = 0.0;
  /// max over samples of (Phi(tx) - t^a Phi(x)) / Phi(x), t in (0, 1].
  double scaling_max_violation = 0.0;
  double conjugate_exponent = 0.0;
};

YoungLemmaReport check_young_lemmas(const YoungFunction& phi, double a,
                                    int sample_count, std::uint64_t seed = 1);

}  // namespace mlslab::orlicz
