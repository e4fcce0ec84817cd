#include "mlslab/common.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <numbers>
#include <exception>
#include <thread>

#include <boost/math/special_functions/beta.hpp>

namespace mlslab {

std::vector<double> UniformGrid::nodes() const {
  std::vector<double> out(static_cast<std::size_t>(points));
  for (int i = 0; i < points; ++i) out[i] = node(i);
  return out;
}

std::vector<double> UniformGrid::trapezoid_weights() const {
  std::vector<double> w(static_cast<std::size_t>(points), spacing());
  w.front() *= 0.5;
  w.back() *= 0.5;
  return w;
}

void UniformGrid::validate() const {
  if (!(half_width > 0.0) || points < 3)
    throw ConfigError("spin grid needs half_width > 0 and at least 3 points");
}

std::vector<double> LogGrid::nodes() const {
  std::vector<double> out(static_cast<std::size_t>(points));
  const double a = std::log10(lo);
  const double b = std::log10(hi);
  for (int i = 0; i < points; ++i)
    out[i] = std::pow(10.0, a + (b - a) * i / (points - 1));
  return out;
}

double LogGrid::ratio() const {
  return std::pow(hi / lo, 1.0 / (points - 1));
}

double uniform01(Rng& rng) {
  return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

double standard_normal(Rng& rng) {
  const double u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (x == 0.0) return "0";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

MeanEstimate batch_means(std::span<const double> series, int batches) {
  MeanEstimate est;
  const std::size_t n = series.size();
  if (n == 0) return est;
  double sum = 0.0;
  for (double v : series) sum += v;
  est.mean = sum / static_cast<double>(n);
  const std::size_t b = std::min<std::size_t>(static_cast<std::size_t>(batches), n);
  if (b < 2) return est;
  const std::size_t len = n / b;
  std::vector<double> means(b, 0.0);
  for (std::size_t k = 0; k < b; ++k) {
    double s = 0.0;
    for (std::size_t i = k * len; i < (k + 1) * len; ++i) s += series[i];
    means[k] = s / static_cast<double>(len);
  }
  double m = 0.0;
  for (double v : means) m += v;
  m /= static_cast<double>(b);
  double var = 0.0;
  for (double v : means) var += (v - m) * (v - m);
  var /= static_cast<double>(b - 1);
  est.stderr_ = std::sqrt(var / static_cast<double>(b));
  return est;
}

BinomialInterval clopper_pearson(std::size_t k, std::size_t n, double confidence) {
  BinomialInterval ci;
  if (n == 0) return ci;
  const double alpha = 1.0 - confidence;
  const double kk = static_cast<double>(k);
  const double nn = static_cast<double>(n);
  ci.lower = k == 0 ? 0.0 : boost::math::ibeta_inv(kk, nn - kk + 1.0, alpha / 2.0);
  ci.upper = k == n ? 1.0 : boost::math::ibeta_inv(kk + 1.0, nn - kk, 1.0 - alpha / 2.0);
  return ci;
}

double clopper_pearson_upper(std::size_t k, std::size_t n, double confidence) {
  if (n == 0 || k >= n) return 1.0;
  const double kk = static_cast<double>(k);
  const double nn = static_cast<double>(n);
  return boost::math::ibeta_inv(kk + 1.0, nn - kk, confidence);
}

LineFit fit_line(std::span<const double> x, std::span<const double> y) {
  LineFit fit;
  const std::size_t n = std::min(x.size(), y.size());
  if (n == 0) return fit;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  fit.slope = sxx > 0.0 ? sxy / sxx : 0.0;
  fit.intercept = my - fit.slope * mx;
  return fit;
}

namespace {
std::atomic<int> g_workers{1};
}

void set_worker_count(int workers) { g_workers = std::max(1, workers); }
int worker_count() { return g_workers; }

void parallel_for(std::size_t n,
                  const std::function<void(std::size_t, std::size_t)>& body) {
  const std::size_t workers =
      std::min<std::size_t>(static_cast<std::size_t>(worker_count()), n);
  if (workers <= 1) {
    if (n > 0) body(0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::vector<std::exception_ptr> errors(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&body, &errors, w, begin, end] {
      try {
        body(begin, end);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace mlslab
