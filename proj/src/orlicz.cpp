#include "mlslab/orlicz.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/minima.hpp>

namespace mlslab::orlicz {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kSlopeTol = 1e-9;

bool slope_drops(double before, double after) {
  const double scale = std::max({std::abs(before), std::abs(after), 1e-300});
  return after < before - kSlopeTol * scale;
}

double table_eval(const YoungFunction::Table& t, double x) {
  const double ax = std::abs(x);
  const auto& xs = t.x;
  const auto& fs = t.fx;
  const std::size_t n = xs.size();
  if (ax >= xs[n - 1]) {
    const double s = (fs[n - 1] - fs[n - 2]) / (xs[n - 1] - xs[n - 2]);
    return fs[n - 1] + s * (ax - xs[n - 1]);
  }
  const auto it = std::upper_bound(xs.begin(), xs.end(), ax);
  const std::size_t i = static_cast<std::size_t>(it - xs.begin()) - 1;
  const double w = (ax - xs[i]) / (xs[i + 1] - xs[i]);
  return fs[i] + w * (fs[i + 1] - fs[i]);
}

double table_slope(const YoungFunction::Table& t, double ax) {
  const auto& xs = t.x;
  const std::size_t n = xs.size();
  std::size_t i = n - 2;
  if (ax < xs[n - 1]) {
    const auto it = std::upper_bound(xs.begin(), xs.end(), ax);
    i = static_cast<std::size_t>(it - xs.begin()) - 1;
  }
  return (t.fx[i + 1] - t.fx[i]) / (xs[i + 1] - xs[i]);
}

// Exact conjugate of the piecewise-linear interpolant through (x, f),
// assuming x[0] = 0, f[0] = 0 and convexity. Breakpoints of the conjugate are
// the slopes of the input.
YoungFunction::Table legendre_table(const std::vector<double>& x,
                                    const std::vector<double>& f) {
  YoungFunction::Table out;
  out.x.push_back(0.0);
  out.fx.push_back(0.0);
  const std::size_t n = x.size();
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double s = (f[i + 1] - f[i]) / (x[i + 1] - x[i]);
    if (!(s > out.x.back())) continue;
    out.x.push_back(s);
    out.fx.push_back(std::max(0.0, x[i] * s - f[i]));
  }
  // Past the last slope the conjugate grows with slope x.back().
  const double last = out.x.back();
  const double step = std::max(1.0, last);
  out.x.push_back(last + step);
  out.fx.push_back(out.fx.back() + x[n - 1] * step);
  return out;
}

// Lower convex hull of points sorted by x (Andrew's monotone chain).
void lower_hull(std::vector<double>& x, std::vector<double>& f) {
  std::vector<double> hx, hf;
  for (std::size_t i = 0; i < x.size(); ++i) {
    while (hx.size() >= 2) {
      const std::size_t k = hx.size();
      const double cross = (hx[k - 1] - hx[k - 2]) * (f[i] - hf[k - 2]) -
                           (hf[k - 1] - hf[k - 2]) * (x[i] - hx[k - 2]);
      if (cross <= 0.0) {
        hx.pop_back();
        hf.pop_back();
      } else {
        break;
      }
    }
    hx.push_back(x[i]);
    hf.push_back(f[i]);
  }
  x = std::move(hx);
  f = std::move(hf);
}

}  // namespace

std::string to_string(NicenessClause clause) {
  switch (clause) {
    case NicenessClause::Superlinear:
      return "Phi(x)/x -> infinity";
    case NicenessClause::PositiveAwayFromZero:
      return "Phi(x) = 0 only at x = 0";
    case NicenessClause::FlatAtZero:
      return "Phi'(0) = 0";
  }
  return "unknown";
}

// ---------------------------------------------------------------------------
// YoungFunction
// ---------------------------------------------------------------------------

YoungFunction YoungFunction::power(double p) { return power(p, 1.0 / p); }

YoungFunction YoungFunction::power(double p, double coeff) {
  if (!(p > 1.0) || !std::isfinite(p))
    throw Error("power Young function needs exponent p > 1");
  if (!(coeff > 0.0) || !std::isfinite(coeff))
    throw Error("power Young function needs a positive coefficient");
  return YoungFunction(Power{p, coeff});
}

std::optional<std::size_t> first_convexity_violation(std::span<const double> x,
                                                     std::span<const double> fx) {
  if (x.size() < 3) return std::nullopt;
  double prev = (fx[1] - fx[0]) / (x[1] - x[0]);
  for (std::size_t i = 1; i + 1 < x.size(); ++i) {
    const double next = (fx[i + 1] - fx[i]) / (x[i + 1] - x[i]);
    if (slope_drops(prev, next)) return i;
    prev = next;
  }
  return std::nullopt;
}

YoungFunction YoungFunction::tabulated(std::vector<double> x, std::vector<double> fx) {
  if (x.size() != fx.size() || x.size() < 2)
    throw Error("tabulated Young function needs matching grids of size >= 2");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(fx[i]))
      throw Error("tabulated Young function has non-finite entries");
    if (fx[i] < 0.0) throw Error("tabulated Young function has negative values");
    if (i > 0 && !(x[i] > x[i - 1]))
      throw Error("tabulated grid must be strictly increasing");
  }
  if (x[0] < 0.0) throw Error("tabulated grid must be nonnegative");
  std::size_t offset = 0;
  if (x[0] > 0.0) {
    x.insert(x.begin(), 0.0);
    fx.insert(fx.begin(), 0.0);
    offset = 1;
  } else if (fx[0] != 0.0) {
    throw Error("tabulated Young function must vanish at 0");
  }
  if (auto bad = first_convexity_violation(x, fx)) {
    const std::size_t idx = *bad >= offset ? *bad - offset : 0;
    throw ConvexityError(idx, "tabulated function is not convex at node " +
                                  std::to_string(idx));
  }
  return YoungFunction(Table{std::move(x), std::move(fx)});
}

double YoungFunction::operator()(double x) const {
  if (const auto* p = as_power()) return p->coeff * std::pow(std::abs(x), p->p);
  return table_eval(*as_table(), x);
}

double YoungFunction::derivative(double x) const {
  const double ax = std::abs(x);
  const double sign = x < 0.0 ? -1.0 : 1.0;
  if (const auto* p = as_power()) return sign * p->coeff * p->p * std::pow(ax, p->p - 1.0);
  return sign * table_slope(*as_table(), ax);
}

NicenessReport YoungFunction::niceness() const {
  NicenessReport rep;
  const auto* t = as_table();
  if (!t) return rep;
  const auto& xs = t->x;
  const auto& fs = t->fx;
  const std::size_t n = xs.size();
  for (std::size_t i = 1; i < n; ++i) {
    if (!(fs[i] > 0.0)) {
      rep.nice = false;
      rep.failed = NicenessClause::PositiveAwayFromZero;
      return rep;
    }
  }
  double max_slope = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i)
    max_slope = std::max(max_slope, (fs[i + 1] - fs[i]) / (xs[i + 1] - xs[i]));
  const double first_slope = (fs[1] - fs[0]) / (xs[1] - xs[0]);
  if (first_slope > 1e-3 * max_slope) {
    rep.nice = false;
    rep.failed = NicenessClause::FlatAtZero;
    return rep;
  }
  double prev = fs[1] / xs[1];
  const double first = prev;
  for (std::size_t i = 2; i < n; ++i) {
    const double r = fs[i] / xs[i];
    if (!(r > prev)) {
      rep.nice = false;
      rep.failed = NicenessClause::Superlinear;
      return rep;
    }
    prev = r;
  }
  if (n < 3 || prev < 10.0 * first) {
    rep.nice = false;
    rep.failed = NicenessClause::Superlinear;
  }
  return rep;
}

nlohmann::json YoungFunction::to_json() const {
  if (const auto* p = as_power())
    return {{"kind", "power"}, {"p", p->p}, {"coeff", p->coeff}};
  const auto* t = as_table();
  return {{"kind", "tabulated"}, {"grid", t->x}, {"values", t->fx}};
}

YoungFunction YoungFunction::from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("kind"))
    throw ConfigError("Young function record needs a 'kind'");
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "power") {
    for (const auto& [k, v] : j.items())
      if (k != "kind" && k != "p" && k != "coeff")
        throw ConfigError("unknown key in power Young function: " + k);
    const double p = j.at("p").get<double>();
    if (j.contains("coeff")) return power(p, j.at("coeff").get<double>());
    return power(p);
  }
  if (kind == "tabulated") {
    for (const auto& [k, v] : j.items())
      if (k != "kind" && k != "grid" && k != "values")
        throw ConfigError("unknown key in tabulated Young function: " + k);
    return tabulated(j.at("grid").get<std::vector<double>>(),
                     j.at("values").get<std::vector<double>>());
  }
  throw ConfigError("unknown Young function kind: " + kind);
}

YoungFunction conjugate(const YoungFunction& phi) {
  if (const auto* p = phi.as_power()) {
    const double q = p->p / (p->p - 1.0);
    return YoungFunction::power(q, std::pow(p->coeff * p->p, 1.0 - q) / q);
  }
  const auto* t = phi.as_table();
  auto table = legendre_table(t->x, t->fx);
  return YoungFunction::tabulated(std::move(table.x), std::move(table.fx));
}

std::vector<double> discrete_legendre(std::span<const double> x,
                                      std::span<const double> fx,
                                      std::span<const double> y) {
  if (x.size() != fx.size() || x.empty())
    throw Error("discrete_legendre needs matching nonempty inputs");
  if (auto bad = first_convexity_violation(x, fx))
    throw ConvexityError(*bad, "discrete_legendre input is not convex at node " +
                                   std::to_string(*bad));
  std::vector<double> out(y.size());
  std::size_t i = 0;
  for (std::size_t j = 0; j < y.size(); ++j) {
    if (j > 0 && y[j] < y[j - 1]) throw Error("discrete_legendre needs sorted y");
    while (i + 1 < x.size() && x[i + 1] * y[j] - fx[i + 1] >= x[i] * y[j] - fx[i]) ++i;
    out[j] = x[i] * y[j] - fx[i];
  }
  return out;
}

// ---------------------------------------------------------------------------
// HFunction
// ---------------------------------------------------------------------------

HFunction::HFunction(YoungFunction base) : base_(std::move(base)) {
  base_at_one_ = base_(1.0);
  if (!(base_at_one_ > 0.0))
    throw NicenessError(NicenessClause::PositiveAwayFromZero,
                        "modification needs Phi(1) > 0");
  const auto* p = base_.as_power();
  if (p && p->p >= 2.0) return;
  std::vector<double> xs{0.0};
  for (double v : LogGrid{}.nodes()) xs.push_back(v);
  std::vector<double> fs(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) fs[i] = (*this)(xs[i]);
  lower_hull(xs, fs);
  auto table = legendre_table(xs, fs);
  star_table_ = YoungFunction::tabulated(std::move(table.x), std::move(table.fx));
}

double HFunction::operator()(double x) const {
  const double ax = std::abs(x);
  if (ax <= 1.0) return ax * ax;
  return base_(ax) / base_at_one_;
}

double HFunction::conjugate_value(double y) const {
  const double ay = std::abs(y);
  if (star_table_) return (*star_table_)(ay);
  const double p = base_.as_power()->p;
  if (ay <= 2.0) return 0.25 * ay * ay;
  if (ay <= p) return ay - 1.0;
  const double xs = std::pow(ay / p, 1.0 / (p - 1.0));
  return xs * ay - std::pow(xs, p);
}

bool HFunction::is_quadratic() const {
  const auto* p = base_.as_power();
  return p && p->p == 2.0;
}

HFunction modification(const YoungFunction& phi) {
  const auto rep = phi.niceness();
  if (!rep.nice)
    throw NicenessError(*rep.failed, "Young function is not nice: " + to_string(*rep.failed));
  return HFunction(phi);
}

// ---------------------------------------------------------------------------
// omega
// ---------------------------------------------------------------------------

double omega(const HFunction& h, double x, const LogGrid& tgrid) {
  if (x < 0.0) throw Error("omega needs x >= 0");
  if (x == 0.0) return 0.0;
  auto ts = tgrid.nodes();
  ts.push_back(1.0);
  ts.push_back(1.0 / x);
  double best = 0.0;
  for (double t : ts) {
    const double r = h(t * x) / h(t);
    if (!std::isfinite(r)) return kInf;
    best = std::max(best, r);
  }
  return best;
}

GrowthEnvelope::GrowthEnvelope(HFunction h, LogGrid grid) : h_(std::move(h)) {
  x_ = grid.nodes();
  const std::size_t n = x_.size();
  std::vector<double> hx(n);
  for (std::size_t j = 0; j < n; ++j) hx[j] = h_(x_[j]);
  w_.assign(n, 0.0);

  // On a grid symmetric about 1 the product of two nodes is again a node
  // whenever it stays in range, so the table of H can be reused.
  const bool symmetric = grid.points % 2 == 1 &&
                         std::abs(std::log(grid.lo) + std::log(grid.hi)) < 1e-9;
  const std::ptrdiff_t mid = static_cast<std::ptrdiff_t>(n / 2);
  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      double best = 0.0;
      bool finite = true;
      auto take = [&](double num, double den) {
        const double r = num / den;
        if (!std::isfinite(r)) finite = false;
        else best = std::max(best, r);
      };
      for (std::size_t j = 0; j < n && finite; ++j) {
        const std::ptrdiff_t k = static_cast<std::ptrdiff_t>(i + j) - mid;
        if (symmetric && k >= 0 && k < static_cast<std::ptrdiff_t>(n))
          take(hx[static_cast<std::size_t>(k)], hx[j]);
        else
          take(h_(x_[i] * x_[j]), hx[j]);
      }
      if (finite) {
        take(h_(x_[i]), h_(1.0));
        take(h_(1.0), h_(1.0 / x_[i]));
      }
      w_[i] = finite ? best : kInf;
    }
  });

  for (double w : w_)
    if (!std::isfinite(w) || !(w > 0.0)) finite_ = false;

  slopes_.resize(n);
  slopes_[0] = w_[0] / x_[0];
  for (std::size_t i = 1; i < n; ++i)
    slopes_[i] = (w_[i] - w_[i - 1]) / (x_[i] - x_[i - 1]);
  for (std::size_t i = 1; i < n && convex_; ++i)
    if (slope_drops(slopes_[i - 1], slopes_[i])) convex_ = false;
}

double GrowthEnvelope::interpolate(double x) const {
  if (x <= 0.0) return 0.0;
  if (!finite_) return kInf;
  const std::size_t n = x_.size();
  std::size_t i;
  if (x <= x_[0]) {
    i = 0;
  } else if (x >= x_[n - 1]) {
    i = n - 2;
  } else {
    const auto it = std::upper_bound(x_.begin(), x_.end(), x);
    i = static_cast<std::size_t>(it - x_.begin()) - 1;
    if (x == x_[i]) return w_[i];
  }
  const double la = std::log(x_[i]);
  const double lb = std::log(x_[i + 1]);
  const double wa = std::log(w_[i]);
  const double wb = std::log(w_[i + 1]);
  const double e = (wb - wa) / (lb - la);
  return std::exp(wa + e * (std::log(x) - la));
}

double GrowthEnvelope::omega(double x) const {
  if (x < 0.0) throw Error("omega needs x >= 0");
  return interpolate(x);
}

double GrowthEnvelope::omega_star(double y) const {
  if (y < 0.0) throw Error("omega_star needs y >= 0");
  if (y == 0.0) return 0.0;
  if (!finite_) return kInf;
  const std::size_t n = x_.size();

  // Points P_0 = origin, P_m = (x_{m-1}, w_{m-1}); slopes_[m] joins P_m, P_{m+1}.
  std::size_t m = 0;
  if (convex_) {
    m = static_cast<std::size_t>(std::lower_bound(slopes_.begin(), slopes_.end(), y) -
                                 slopes_.begin());
  } else {
    double best = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double v = x_[i] * y - w_[i];
      if (v > best) {
        best = v;
        m = i + 1;
      }
    }
  }
  if (m == n) {
    // Maximiser lies in the power-law extrapolation past the last node.
    const double e = std::log(w_[n - 1] / w_[n - 2]) / std::log(x_[n - 1] / x_[n - 2]);
    if (!(e > 1.0)) return kInf;
    const double a = w_[n - 1] / std::pow(x_[n - 1], e);
    const double xs = std::pow(y / (a * e), 1.0 / (e - 1.0));
    if (xs >= x_[n - 1]) return (e - 1.0) * a * std::pow(xs, e);
    m = n - 1;
  }
  auto point_x = [&](std::size_t k) { return k == 0 ? 0.0 : x_[k - 1]; };
  const double node_value = m == 0 ? 0.0 : point_x(m) * y - w_[m - 1];
  const double lo = m == 0 ? 0.0 : point_x(m - 1);
  const double hi = point_x(std::min(m + 1, n));
  if (!(hi > lo)) return std::max(0.0, node_value);
  auto neg = [&](double x) { return -(x * y - interpolate(x)); };
  const auto res = boost::math::tools::brent_find_minima(neg, lo, hi, 52);
  return std::max({0.0, node_value, -res.second});
}

// ---------------------------------------------------------------------------
// Checks
// ---------------------------------------------------------------------------

H2Report check_h2(const HFunction& h, const LogGrid& grid) {
  constexpr double tol = 1e-10;
  H2Report rep;
  const auto xs = grid.nodes();
  const std::size_t n = xs.size();
  std::vector<double> lx(n), lh(n);
  for (std::size_t i = 0; i < n; ++i) {
    lx[i] = std::log(xs[i]);
    lh[i] = std::log(h(xs[i]));
  }
  rep.quadratic_ratio_nondecreasing = true;
  for (std::size_t i = 1; i < n; ++i) {
    if (lh[i] - 2.0 * lx[i] < lh[i - 1] - 2.0 * lx[i - 1] - tol) {
      rep.quadratic_ratio_nondecreasing = false;
      rep.first_violation_x = xs[i];
      break;
    }
  }
  std::optional<double> last_violation;
  for (int k = 1; k <= 6 * 128; ++k) {
    const double t = 2.0 + k / 128.0;
    bool pass = true;
    for (std::size_t i = 1; i < n; ++i) {
      if (lh[i] - t * lx[i] > lh[i - 1] - t * lx[i - 1] + tol) {
        pass = false;
        last_violation = xs[i];
        break;
      }
    }
    if (pass) {
      rep.t_witness = t;
      break;
    }
  }
  rep.ok = rep.quadratic_ratio_nondecreasing && rep.t_witness.has_value();
  if (!rep.ok && !rep.first_violation_x) rep.first_violation_x = last_violation;
  return rep;
}

double herbst_integral(const GrowthEnvelope& env, double lambda) {
  if (!(lambda > 0.0)) return 0.0;
  auto g = [&](double u) { return u > 0.0 ? env.omega(0.5 * u) / (u * u) : 0.0; };
  const double near = g(lambda * 1e-6);
  const double far = g(lambda * 1e-3);
  if (!std::isfinite(near) || near > 2.0 * far)
    throw Error("Herbst integrand diverges at 0; H2 fails");
  using boost::math::quadrature::gauss_kronrod;
  double total = 0.0;
  const double kink = 2.0;
  if (lambda > kink) {
    total += gauss_kronrod<double, 31>::integrate(g, 0.0, kink, 15, 1e-13);
    total += gauss_kronrod<double, 31>::integrate(g, kink, lambda, 15, 1e-13);
  } else {
    total = gauss_kronrod<double, 31>::integrate(g, 0.0, lambda, 15, 1e-13);
  }
  return lambda * total;
}

YoungLemmaReport check_young_lemmas(const YoungFunction& phi, double a,
                                    int sample_count, std::uint64_t seed) {
  if (!(a > 1.0)) throw Error("check_young_lemmas needs a > 1");
  YoungLemmaReport rep;
  rep.conjugate_exponent = a / (a - 1.0);
  const YoungFunction star = conjugate(phi);
  Rng rng(seed);

  std::vector<double> xgrid, ygrid;
  double xmax = 1e3, ymax = 1e3;
  if (const auto* t = phi.as_table()) {
    xgrid.assign(t->x.begin() + 1, t->x.end());
    ygrid.assign(star.as_table()->x.begin() + 1, star.as_table()->x.end() - 1);
    xmax = t->x.back();
    ymax = ygrid.empty() ? 1.0 : ygrid.back();
  } else {
    xgrid = LogGrid{1e-3, 1e3, 1025}.nodes();
    ygrid = xgrid;
  }
  const bool power = phi.is_power();
  auto draw = [&](double top) {
    const double u = uniform01(rng);
    return power ? std::pow(10.0, -3.0 + 6.0 * u) : top * u;
  };

  for (int s = 0; s < sample_count; ++s) {
    const double x = draw(xmax);
    const double y = draw(ymax);
    const double lhs = x * y;
    const double rhs = phi(x) + star(y);
    const double scale = std::max(lhs, rhs);
    if (scale > 0.0) rep.young_max_violation = std::max(rep.young_max_violation, (lhs - rhs) / scale);
  }

  rep.growth_premise = true;
  for (std::size_t i = 1; i < xgrid.size(); ++i) {
    const double prev = std::log(phi(xgrid[i - 1])) - a * std::log(xgrid[i - 1]);
    const double next = std::log(phi(xgrid[i])) - a * std::log(xgrid[i]);
    if (next < prev - 1e-10) {
      rep.growth_premise = false;
      break;
    }
  }
  if (!rep.growth_premise) return rep;

  const double as = rep.conjugate_exponent;
  for (std::size_t i = 1; i < ygrid.size(); ++i) {
    const double r0 = star(ygrid[i - 1]) / std::pow(ygrid[i - 1], as);
    const double r1 = star(ygrid[i]) / std::pow(ygrid[i], as);
    if (r0 > 0.0) rep.duality_max_violation = std::max(rep.duality_max_violation, (r1 - r0) / r0);
  }
  for (int s = 0; s < sample_count; ++s) {
    const double x = draw(xmax);
    const double t = uniform01(rng);
    const double base = phi(x);
    if (base > 0.0)
      rep.scaling_max_violation =
          std::max(rep.scaling_max_violation, (phi(t * x) - std::pow(t, a) * base) / base);
  }
  return rep;
}

}  // namespace mlslab::orlicz
