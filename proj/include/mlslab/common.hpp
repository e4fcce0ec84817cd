#pragma once

// Shared building blocks: error types, grids, deterministic RNG helpers,
// locale-free number formatting and a couple of small statistics routines.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mlslab {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tabulated input is not convex; `index` is the first node whose
/// incoming slope exceeds its outgoing slope.
class ConvexityError : public Error {
 public:
  ConvexityError(std::size_t index, const std::string& what)
      : Error(what), index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

/// A density or integrand carries non-negligible mass at the edge of its
/// quadrature grid.
class TailContainmentError : public Error {
 public:
  using Error::Error;
};

/// A gridded tensor would exceed the configured point budget.
class BudgetError : public Error {
 public:
  BudgetError(std::size_t requested, std::size_t budget, const std::string& what)
      : Error(what), requested_(requested), budget_(budget) {}
  std::size_t requested() const noexcept { return requested_; }
  std::size_t budget() const noexcept { return budget_; }

 private:
  std::size_t requested_;
  std::size_t budget_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Grids
// ---------------------------------------------------------------------------

/// Uniform grid on [-half_width, half_width] with `points` nodes.
struct UniformGrid {
  double half_width = 8.0;
  int points = 513;

  double spacing() const { return 2.0 * half_width / (points - 1); }
  double node(int i) const { return -half_width + i * spacing(); }
  std::vector<double> nodes() const;
  /// Trapezoid weights (spacing included).
  std::vector<double> trapezoid_weights() const;
  void validate() const;
};

/// Log-spaced grid on [lo, hi]. The default has an odd point count so that
/// x = 1 is a node.
struct LogGrid {
  double lo = 1e-6;
  double hi = 1e6;
  int points = 4097;

  std::vector<double> nodes() const;
  double ratio() const;
};

// ---------------------------------------------------------------------------
// Randomness
// ---------------------------------------------------------------------------

using Rng = std::mt19937_64;

/// Uniform on the open interval (0, 1), built from the raw 64-bit stream so
/// the sequence does not depend on the standard library's distributions.
double uniform01(Rng& rng);
/// Standard normal via Box-Muller on uniform01.
double standard_normal(Rng& rng);

// ---------------------------------------------------------------------------
// Formatting
// ---------------------------------------------------------------------------

/// Shortest round-trip decimal representation, '.' decimal separator.
std::string format_double(double x);

// ---------------------------------------------------------------------------
// Statistics
// ---------------------------------------------------------------------------

struct MeanEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
};

/// Batch-means estimate of the mean of a correlated series.
MeanEstimate batch_means(std::span<const double> series, int batches = 50);

/// Two-sided Clopper-Pearson interval for k successes in n trials.
struct BinomialInterval {
  double lower = 0.0;
  double upper = 1.0;
};
BinomialInterval clopper_pearson(std::size_t k, std::size_t n, double confidence);
/// One-sided upper Clopper-Pearson bound.
double clopper_pearson_upper(std::size_t k, std::size_t n, double confidence);

/// Least-squares slope and intercept of y against x.
struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
};
LineFit fit_line(std::span<const double> x, std::span<const double> y);

// ---------------------------------------------------------------------------
// Parallelism
// ---------------------------------------------------------------------------

/// Global worker count used by parallel_for; 1 means run inline.
void set_worker_count(int workers);
int worker_count();

/// Runs body(begin, end) over disjoint contiguous chunks of [0, n). Bodies
/// must only write to state owned by their chunk.
void parallel_for(std::size_t n,
                  const std::function<void(std::size_t, std::size_t)>& body);

}  // namespace mlslab
