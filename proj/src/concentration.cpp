#include "mlslab/concentration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace mlslab::conc {

namespace {

constexpr double kConfidence = 0.99;
constexpr int kMaxK = 64;

// Smallest x >= 0 with g(x) >= target for nondecreasing g.
double solve_increasing(const std::function<double(double)>& g, double target) {
  if (g(0.0) >= target) return 0.0;
  double hi = 1.0;
  for (int i = 0; i < 200 && g(hi) < target; ++i) hi *= 2.0;
  if (g(hi) < target) return std::numeric_limits<double>::infinity();
  double lo = 0.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (g(mid) >= target) hi = mid;
    else lo = mid;
    if (hi - lo <= 1e-13 * hi) break;
  }
  return hi;
}

}  // namespace

SweepConstants proof_constants(int d, double eta, double D) {
  return {D + 2.0 * d * eta, 2.0 * d * eta};
}

Envelope::Envelope(const orlicz::HFunction& h, double a, double c, double C1, double C2)
    : a_(a), c_(c), C1_(C1), C2_(C2) {
  if (!(a > 0.0) || !(c > 0.0) || !(C1 > 0.0) || C2 < 0.0)
    throw Error("envelope needs a, c, C1 > 0 and C2 >= 0");
  const auto h2 = orlicz::check_h2(h);
  if (!h2.ok || !h2.t_witness) throw Error("H fails the growth check; no exponent t");
  t_ = *h2.t_witness;
  t_star_ = t_ / (t_ - 1.0);
  c_ddot_ = 1.0 / (std::pow(2.0, 2.0 * t_star_) * std::pow(C1_, t_star_ - 1.0));
  env_ = std::make_shared<const orlicz::GrowthEnvelope>(h);

  k_ok_ = true;
  if (C2_ > 0.0) {
    const double log_q = -t_star_ * std::log(2.0) - (t_star_ - 1.0) * std::log(C2_);
    for (int k = 1; k <= kMaxK; ++k)
      if (k * log_q < std::log(k + 1.0)) k_ok_ = false;
  }
  const double ac = a_ * c_;
  r_min_ = solve_increasing(
      [&](double r) { return ac * c_ddot_ * env_->omega_star(2.0 * r / ac); },
      8.0 * std::numbers::ln2);
}

double Envelope::R(double factor) const {
  const double w2 = env_->omega(2.0);
  return factor * std::numbers::ln2 / (w2 * c_ddot_ * env_->omega_star(2.0 / (w2 * c_)));
}

double Envelope::K_hat() const {
  const double w2 = env_->omega(2.0);
  return 0.5 * w2 * c_ddot_ * env_->omega_star(1.0 / (w2 * c_));
}

EnvelopeValue envelope_value(const Envelope& env, double r) {
  const double ac = env.a() * env.c();
  const double expo = ac * env.C_ddot() * env.growth().omega_star(2.0 * r / ac);
  EnvelopeValue v;
  v.value = std::exp(-0.5 * expo);
  v.valid = env.k_condition() && expo >= 8.0 * std::numbers::ln2 * (1.0 - 1e-12);
  return v;
}

double herbst_tail(const orlicz::GrowthEnvelope& env, double K, double r) {
  if (!(K > 0.0)) throw Error("herbst_tail needs K > 0");
  return std::exp(-K * env.omega_star(2.0 * r / K));
}

double bz_tail(double q, double p, double C, double r) {
  return 2.0 * std::exp(-std::pow(q - 1.0, p) * std::pow(r, p) / std::pow(C, p - 1.0));
}

// ---------------------------------------------------------------------------
// Tails
// ---------------------------------------------------------------------------

TailReport empirical_tail(const spec::SampleSet& samples, const spec::ConfigFunction& F,
                          std::span<const double> r_grid) {
  const std::size_t rows = samples.rows();
  if (rows < 4) throw Error("empirical_tail needs samples");
  std::vector<double> values(rows);
  parallel_for(rows, [&](std::size_t b, std::size_t e) {
    for (std::size_t r = b; r < e; ++r) values[r] = F(samples.row(r));
  });
  TailReport rep;
  rep.n_mean = rows / 2;
  rep.n_tail = rows - rep.n_mean;
  double s = 0.0;
  for (std::size_t r = 0; r < rep.n_mean; ++r) s += values[r];
  rep.mu_hat = s / static_cast<double>(rep.n_mean);
  std::vector<double> dev(values.begin() + static_cast<long>(rep.n_mean), values.end());
  for (double& v : dev) v -= rep.mu_hat;
  std::sort(dev.begin(), dev.end());
  for (double r : r_grid) {
    TailPoint p;
    p.r = r;
    p.exceed = static_cast<std::size_t>(dev.end() - std::lower_bound(dev.begin(), dev.end(), r));
    p.empirical = static_cast<double>(p.exceed) / static_cast<double>(rep.n_tail);
    const auto ci = clopper_pearson(p.exceed, rep.n_tail, kConfidence);
    p.ci_low = ci.lower;
    p.ci_high = ci.upper;
    p.upper_ci = clopper_pearson_upper(p.exceed, rep.n_tail, kConfidence);
    rep.points.push_back(p);
  }
  return rep;
}

TailReport empirical_tail(const spec::SpinModel& model, const lattice::Box& box,
                          const spec::Boundary& boundary, const spec::ConfigFunction& F,
                          std::span<const double> r_grid, int samples, std::uint64_t seed) {
  if (samples < 10000) throw Error("empirical_tail needs at least 10^4 samples");
  const auto set = spec::sample_block_gibbs(model, box, boundary, samples, seed);
  return empirical_tail(set, F, r_grid);
}

DominanceVerdict dominance_check(TailReport& tail, const Envelope& env) {
  DominanceVerdict v;
  bool any_small = false;
  for (auto& p : tail.points) {
    const auto e = envelope_value(env, p.r);
    p.envelope = e.value;
    p.valid = e.valid;
    p.dominated = true;
    if (!e.valid) continue;
    ++v.valid_points;
    if (e.value < 0.5) any_small = true;
    if (p.upper_ci > e.value) {
      p.dominated = false;
      v.pass = false;
      v.violations.push_back(p.r);
    }
  }
  v.vacuous = v.valid_points > 0 && !any_small;
  return v;
}

void write_tail_csv(std::ostream& out, const TailReport& tail) {
  out << "r,empirical,upper_ci,envelope,valid,verdict\n";
  for (const auto& p : tail.points) {
    const char* verdict = !p.valid ? "n/a" : (p.dominated ? "PASS" : "FAIL");
    out << format_double(p.r) << ',' << format_double(p.empirical) << ','
        << format_double(p.upper_ci) << ',' << format_double(p.envelope) << ','
        << (p.valid ? 1 : 0) << ',' << verdict << '\n';
  }
}

// ---------------------------------------------------------------------------
// Gauges
// ---------------------------------------------------------------------------

Gauge Gauge::quadratic(double coeff) {
  Gauge g;
  g.kind_ = Kind::Quadratic;
  g.coeff_ = coeff;
  g.name_ = format_double(coeff) + "*y^2";
  return g;
}

Gauge Gauge::power(double p, double coeff) {
  if (!(p > 0.0)) throw Error("gauge exponent must be positive");
  Gauge g;
  g.kind_ = Kind::Power;
  g.p_ = p;
  g.coeff_ = coeff;
  g.name_ = format_double(coeff) + "*|y|^" + format_double(p);
  return g;
}

namespace {
void fill_table(const std::function<double(double)>& f, double ymax, std::vector<double>& table,
                double& step, double& slope) {
  const int n = 8193;
  step = ymax / (n - 1);
  table.resize(n);
  for (int i = 0; i < n; ++i) table[static_cast<std::size_t>(i)] = f(step * i);
  slope = (table[n - 1] - table[n - 2]) / step;
}
}  // namespace

Gauge Gauge::h_star(const orlicz::HFunction& h, double ymax) {
  if (h.is_quadratic()) {
    auto g = quadratic(0.25);
    g.name_ = "H*(y)=y^2/4";
    return g;
  }
  Gauge g;
  g.kind_ = Kind::Table;
  g.ymax_ = ymax;
  fill_table([&](double y) { return h.conjugate_value(y); }, ymax, g.table_, g.step_, g.tail_slope_);
  g.name_ = "H*";
  return g;
}

Gauge Gauge::conjugate_of(const orlicz::YoungFunction& phi, double ymax) {
  const auto star = orlicz::conjugate(phi);
  if (const auto* pw = star.as_power()) {
    auto g = power(pw->p, pw->coeff);
    g.name_ = "Phi*";
    return g;
  }
  Gauge g;
  g.kind_ = Kind::Table;
  g.ymax_ = ymax;
  fill_table([&](double y) { return star(y); }, ymax, g.table_, g.step_, g.tail_slope_);
  g.name_ = "Phi*";
  return g;
}

double Gauge::operator()(double y) const {
  const double a = std::abs(y);
  switch (kind_) {
    case Kind::Quadratic: return coeff_ * a * a;
    case Kind::Power: return coeff_ * std::pow(a, p_);
    case Kind::Table: {
      if (a >= ymax_) return table_.back() + tail_slope_ * (a - ymax_);
      const double u = a / step_;
      const std::size_t i = std::min(static_cast<std::size_t>(u), table_.size() - 2);
      const double fr = u - static_cast<double>(i);
      return table_[i] + fr * (table_[i + 1] - table_[i]);
    }
  }
  return 0.0;
}

// ---------------------------------------------------------------------------
// Enlargements
// ---------------------------------------------------------------------------

namespace {

struct Split {
  double level = 0.0;
  std::vector<std::vector<double>> witnesses;  // restricted to N
  std::vector<std::vector<double>> tests;
  std::vector<bool> test_in_A;
  double mu_A = 0.0;
};

Split split_samples(const spec::SampleSet& samples, const EnlargementSpec& es) {
  const std::size_t rows = samples.rows();
  if (rows < 4) throw Error("enlargement needs samples");
  if (es.N.empty()) throw Error("enlargement needs a nonempty site set N");
  const std::size_t half = rows / 2;
  std::vector<double> fv(rows);
  parallel_for(rows, [&](std::size_t b, std::size_t e) {
    for (std::size_t r = b; r < e; ++r) fv[r] = es.F(samples.row(r));
  });
  Split sp;
  if (es.level) {
    sp.level = *es.level;
  } else {
    // First-half quantile three binomial standard errors above 1/2, so that
    // mu(A) >= 1/2 survives the noise of the second half.
    std::vector<double> first(fv.begin(), fv.begin() + static_cast<long>(half));
    const double q = std::min(0.5 + 1.5 / std::sqrt(static_cast<double>(half)), 0.75);
    const auto at = static_cast<std::size_t>(q * static_cast<double>(first.size() - 1));
    std::nth_element(first.begin(), first.begin() + static_cast<long>(at), first.end());
    sp.level = first[at];
  }
  auto restrict_row = [&](std::size_t r) {
    std::vector<double> v;
    for (std::size_t i : es.N) v.push_back(samples.row(r)[i]);
    return v;
  };
  for (std::size_t r = 0; r < half && sp.witnesses.size() < es.witnesses; ++r)
    if (fv[r] <= sp.level) sp.witnesses.push_back(restrict_row(r));
  if (sp.witnesses.empty()) throw Error("witness set for A is empty");
  std::size_t inside = 0;
  for (std::size_t r = half; r < rows; ++r) {
    sp.tests.push_back(restrict_row(r));
    const bool in = fv[r] <= sp.level;
    sp.test_in_A.push_back(in);
    if (in) ++inside;
  }
  const double n = static_cast<double>(sp.tests.size());
  sp.mu_A = static_cast<double>(inside) / n;
  const double se = std::sqrt(std::max(sp.mu_A * (1.0 - sp.mu_A), 1e-12) / n);
  if (sp.mu_A < 0.5 - 2.0 * se)
    throw Error("empirical measure of A is below 1/2 (" + format_double(sp.mu_A) + ")");
  return sp;
}

}  // namespace

EnlargementCurve enlargement_probability(const spec::SampleSet& samples,
                                         const EnlargementSpec& es,
                                         std::span<const double> r_grid, double K_hat) {
  const auto sp = split_samples(samples, es);
  EnlargementCurve curve;
  curve.level = sp.level;
  curve.mu_A = sp.mu_A;
  curve.witnesses = sp.witnesses.size();
  curve.tested = sp.tests.size();
  curve.K_hat = K_hat;

  const std::size_t m = es.N.size();
  std::vector<double> dist(sp.tests.size());
  parallel_for(sp.tests.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t t = b; t < e; ++t) {
      if (sp.test_in_A[t]) {
        dist[t] = 0.0;
        continue;
      }
      const auto& x = sp.tests[t];
      double best = std::numeric_limits<double>::infinity();
      for (const auto& z : sp.witnesses) {
        double s = 0.0;
        for (std::size_t i = 0; i < m && s < best; ++i) s += es.gauge(x[i] - z[i]);
        best = std::min(best, s);
      }
      dist[t] = best;
    }
  });
  std::sort(dist.begin(), dist.end());
  const std::size_t n = dist.size();
  for (double r : r_grid) {
    EnlargementPoint p;
    p.r = r;
    const std::size_t out = static_cast<std::size_t>(dist.end() - std::upper_bound(dist.begin(), dist.end(), r));
    p.complement = static_cast<double>(out) / static_cast<double>(n);
    p.upper_ci = clopper_pearson_upper(out, n, kConfidence);
    p.bound = std::exp(-K_hat * r);
    p.ok = p.upper_ci <= p.bound;
    curve.pass = curve.pass && p.ok;
    curve.points.push_back(p);
  }
  return curve;
}

EnlargementCurve enlargement_probability(const spec::SpinModel& model, const lattice::Box& box,
                                         const spec::Boundary& boundary,
                                         const EnlargementSpec& es,
                                         std::span<const double> r_grid, double K_hat,
                                         int samples, std::uint64_t seed) {
  const auto set = spec::sample_block_gibbs(model, box, boundary, samples, seed);
  return enlargement_probability(set, es, r_grid, K_hat);
}

double young_omega(const orlicz::YoungFunction& f, double x) {
  if (x <= 0.0) return 0.0;
  const LogGrid grid;
  double best = 0.0;
  for (double t : grid.nodes()) {
    const double den = f(t);
    if (den <= 0.0) continue;
    best = std::max(best, f(t * x) / den);
  }
  return best;
}

double young_omega_inverse(const orlicz::YoungFunction& f, double y) {
  return solve_increasing([&](double x) { return young_omega(f, x); }, y);
}

TalagrandCurve talagrand_check(const spec::SampleSet& samples, const EnlargementSpec& es,
                               const orlicz::YoungFunction& phi, std::span<const double> r_grid,
                               double C) {
  const auto sp = split_samples(samples, es);
  const auto star = orlicz::conjugate(phi);
  TalagrandCurve curve;
  curve.level = sp.level;
  std::vector<double> rs(r_grid.begin(), r_grid.end());
  std::sort(rs.begin(), rs.end());
  std::vector<double> scale(rs.size());
  for (std::size_t j = 0; j < rs.size(); ++j)
    scale[j] = rs[j] > 0.0 ? 1.0 / young_omega_inverse(star, 1.0 / rs[j]) : 0.0;

  const std::size_t m = es.N.size();
  // Whether x - z splits into a block in sqrt(r) B_2 and one in s B_{Phi*}.
  auto member = [&](const std::vector<double>& x, const std::vector<double>& z, std::size_t j) {
    std::vector<double> d(m);
    for (std::size_t i = 0; i < m; ++i) d[i] = std::abs(x[i] - z[i]);
    std::sort(d.begin(), d.end());
    // Small coordinates 0..cut-1 go to the Euclidean ball.
    std::vector<double> big(m + 1, 0.0);
    if (scale[j] > 0.0)
      for (std::size_t i = m; i-- > 0;) big[i] = big[i + 1] + star(d[i] / scale[j]);
    double small = 0.0;
    for (std::size_t cut = 0; cut <= m; ++cut) {
      if (cut > 0) small += d[cut - 1] * d[cut - 1];
      if (small > rs[j]) break;
      const bool rest_ok = cut == m || (scale[j] > 0.0 && big[cut] <= 1.0);
      if (rest_ok) return true;
    }
    return false;
  };
  // Index of the smallest r at which each test row is covered.
  std::vector<std::size_t> first(sp.tests.size(), rs.size());
  parallel_for(sp.tests.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t t = b; t < e; ++t) {
      if (sp.test_in_A[t]) {
        first[t] = 0;
        continue;
      }
      std::size_t lo = 0, hi = rs.size();
      while (lo < hi) {
        const std::size_t mid = (lo + hi) / 2;
        bool hit = false;
        for (const auto& z : sp.witnesses)
          if (member(sp.tests[t], z, mid)) {
            hit = true;
            break;
          }
        if (hit) hi = mid;
        else lo = mid + 1;
      }
      first[t] = lo;
    }
  });
  const double n = static_cast<double>(sp.tests.size());
  for (std::size_t j = 0; j < rs.size(); ++j) {
    TalagrandPoint p;
    p.r = rs[j];
    p.scale = scale[j];
    std::size_t covered = 0;
    for (std::size_t f : first)
      if (f <= j) ++covered;
    p.mu_lower = static_cast<double>(covered) / n;
    p.bound = 1.0 - std::exp(-C * rs[j]);
    p.ok = p.mu_lower >= p.bound;
    curve.pass = curve.pass && p.ok;
    curve.points.push_back(p);
  }
  return curve;
}

}  // namespace mlslab::conc
