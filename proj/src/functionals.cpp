#include "mlslab/functionals.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>

namespace mlslab::func {

namespace {

constexpr double kTailRatio = 1e-12;
// Probes are only skipped when rho f^2 is visibly cut off at the grid edge.
constexpr double kProbeTailRatio = 1e-9;

// u log u - u + 1, with a series near u = 1 to avoid cancellation.
double phi_ent(double u) {
  const double d = u - 1.0;
  if (std::abs(d) < 1e-4) return d * d * (0.5 - d / 6.0 + d * d / 12.0);
  if (u <= 0.0) return 1.0;
  return u * std::log(u) - u + 1.0;
}

// Whether rho * f^2 is negligible at both ends of the grid.
bool tail_contained(const OneSiteMeasure& m, std::span<const double> f) {
  const auto& rho = m.density();
  double top = 0.0;
  for (std::size_t i = 0; i < rho.size(); ++i) {
    const double q = rho[i] * f[i] * f[i];
    if (!std::isfinite(q)) return false;
    top = std::max(top, q);
  }
  const std::size_t n = rho.size();
  return rho[0] * f[0] * f[0] < kProbeTailRatio * top &&
         rho[n - 1] * f[n - 1] * f[n - 1] < kProbeTailRatio * top;
}

std::vector<double> sample_on(const OneSiteMeasure& m, const std::function<double(double)>& f) {
  const auto& xs = m.nodes();
  std::vector<double> out(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) out[i] = f(xs[i]);
  return out;
}

double log_sum_exp(std::span<const double> a, std::span<const double> w) {
  double top = -std::numeric_limits<double>::infinity();
  for (double v : a) top = std::max(top, v);
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += w[i] * std::exp(a[i] - top);
  return top + std::log(s);
}

std::string theta_label(double t) { return format_double(t); }

}  // namespace

std::vector<double> grid_derivative(std::span<const double> v, double h) {
  const std::size_t n = v.size();
  std::vector<double> d(n, 0.0);
  if (n < 2) return d;
  d[0] = (v[1] - v[0]) / h;
  d[n - 1] = (v[n - 1] - v[n - 2]) / h;
  for (std::size_t i = 1; i + 1 < n; ++i) d[i] = (v[i + 1] - v[i - 1]) / (2.0 * h);
  return d;
}

double entropy(const OneSiteMeasure& m, std::span<const double> f) {
  const auto& w = m.weights();
  double mean = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (!(f[i] > 0.0)) throw Error("entropy needs a strictly positive function");
    mean += w[i] * f[i];
  }
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += w[i] * phi_ent(f[i] / mean);
  return mean * s;
}

double entropy(const OneSiteMeasure& m, const std::function<double(double)>& f) {
  const auto v = sample_on(m, f);
  return entropy(m, v);
}

double entropy_samples(std::span<const double> f) {
  if (f.empty()) return 0.0;
  double mean = 0.0;
  for (double v : f) {
    if (!(v > 0.0)) throw Error("entropy needs a strictly positive function");
    mean += v;
  }
  mean /= static_cast<double>(f.size());
  double s = 0.0;
  for (double v : f) s += phi_ent(v / mean);
  return mean * s / static_cast<double>(f.size());
}

double variance(const OneSiteMeasure& m, std::span<const double> f) {
  const double mean = m.expect_values(f);
  const auto& w = m.weights();
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += w[i] * (f[i] - mean) * (f[i] - mean);
  return s;
}

std::optional<double> mls_ratio(const OneSiteMeasure& m, const orlicz::HFunction& h,
                                std::span<const double> f) {
  const auto df = grid_derivative(f, m.grid().spacing());
  std::vector<double> f2(f.size());
  const auto& w = m.weights();
  double denom = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    f2[i] = f[i] * f[i];
    denom += w[i] * h(df[i] / f[i]) * f2[i];
  }
  if (!(denom > 0.0)) return std::nullopt;
  return entropy(m, f2) / denom;
}

std::optional<double> mls_ratio(const OneSiteMeasure& m, const orlicz::HFunction& h,
                                const std::function<double(double)>& f) {
  const auto v = sample_on(m, f);
  return mls_ratio(m, h, v);
}

// ---------------------------------------------------------------------------
// Probe families
// ---------------------------------------------------------------------------

TestFunctionFamily::TestFunctionFamily() {
  gens_ = {{"x", [](double x) { return x; }},
           {"x2", [](double x) { return x * x; }},
           {"tanh0.5", [](double x) { return std::tanh(0.5 * x); }},
           {"tanh1", [](double x) { return std::tanh(x); }},
           {"tanh2", [](double x) { return std::tanh(2.0 * x); }}};
  for (int k = 0; k < 33; ++k) thetas_.push_back(-3.0 + 6.0 * k / 32.0);
}

TestFunctionFamily::TestFunctionFamily(std::vector<Generator> generators,
                                       std::vector<double> thetas)
    : gens_(std::move(generators)), thetas_(std::move(thetas)) {
  if (gens_.empty() || thetas_.empty()) throw Error("probe family must not be empty");
}

std::vector<Probe> TestFunctionFamily::tilts() const {
  std::vector<Probe> out;
  for (const auto& g : gens_) {
    for (double t : thetas_) {
      auto fn = g.g;
      out.push_back({"exp(" + theta_label(t) + "*" + g.name + "/2)",
                     [fn, t](double x) { return std::exp(0.5 * t * fn(x)); }});
    }
  }
  return out;
}

std::vector<Probe> TestFunctionFamily::plain() const {
  std::vector<Probe> out;
  for (const auto& g : gens_) out.push_back({g.name, g.g});
  return out;
}

std::string to_string(ConstantKind k) {
  switch (k) {
    case ConstantKind::SG2: return "SG2";
    case ConstantKind::LS2: return "LS2";
    case ConstantKind::MLS: return "MLS";
  }
  return "unknown";
}

ConstantPoint best_ratio(const OneSiteMeasure& m, ConstantKind kind,
                         const orlicz::HFunction* h, const TestFunctionFamily& family,
                         std::size_t* skipped) {
  const orlicz::HFunction quad(orlicz::YoungFunction::power(2.0));
  const orlicz::HFunction& hh = (kind == ConstantKind::MLS && h) ? *h : quad;
  auto probes = family.tilts();
  if (kind == ConstantKind::SG2)
    for (auto& p : family.plain()) probes.push_back(std::move(p));
  ConstantPoint best;
  best.estimate = 0.0;
  const double step = m.grid().spacing();
  for (const auto& probe : probes) {
    const auto f = sample_on(m, probe.f);
    if (!tail_contained(m, f)) {
      if (skipped) ++*skipped;
      continue;
    }
    std::optional<double> r;
    if (kind == ConstantKind::SG2) {
      const auto df = grid_derivative(f, step);
      std::vector<double> d2(df.size());
      for (std::size_t i = 0; i < df.size(); ++i) d2[i] = df[i] * df[i];
      const double dir = m.expect_values(d2);
      if (dir > 0.0) r = variance(m, f) / dir;
    } else {
      r = mls_ratio(m, hh, f);
    }
    if (r && *r > best.estimate) {
      best.estimate = *r;
      best.probe_id = probe.id;
    }
  }
  return best;
}

ConstantEstimate estimate_constant(const spec::SpinModel& model, const lattice::Site& site,
                                   std::span<const double> boundary_grid, ConstantKind kind,
                                   const orlicz::HFunction* h,
                                   const TestFunctionFamily& family) {
  if (boundary_grid.empty()) throw Error("estimate_constant needs boundary values");
  ConstantEstimate est;
  est.kind = kind;
  est.curve.resize(boundary_grid.size());
  std::vector<std::size_t> skipped(boundary_grid.size(), 0);
  parallel_for(boundary_grid.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      const auto m = spec::one_site_measure(model, site, spec::Boundary(boundary_grid[k]));
      auto pt = best_ratio(m, kind, h, family, &skipped[k]);
      pt.omega = boundary_grid[k];
      est.curve[k] = pt;
    }
  });
  for (std::size_t k = 0; k < est.curve.size(); ++k) {
    est.skipped_probes += skipped[k];
    if (k == 0 || est.curve[k].estimate > est.uniform_sup) {
      est.uniform_sup = est.curve[k].estimate;
      est.argmax_probe = est.curve[k].probe_id;
      est.argmax_omega = est.curve[k].omega;
    }
  }
  est.lower_bound = est.uniform_sup;
  return est;
}

// ---------------------------------------------------------------------------
// Spectral gap
// ---------------------------------------------------------------------------

namespace {

double gap_of(std::span<const double> rho, double h) {
  const std::size_t n = rho.size();
  Eigen::VectorXd diag(static_cast<Eigen::Index>(n));
  Eigen::VectorXd sub = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(n - 1), -1.0 / (h * h));
  for (std::size_t i = 0; i < n; ++i) {
    if (!(rho[i] > 0.0)) throw Error("spectral gap needs a strictly positive density");
    double d = 0.0;
    if (i > 0) d += std::sqrt(rho[i - 1] / rho[i]);
    if (i + 1 < n) d += std::sqrt(rho[i + 1] / rho[i]);
    diag(static_cast<Eigen::Index>(i)) = d / (h * h);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver;
  solver.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw Error("tridiagonal eigensolver failed");
  return solver.eigenvalues()(1);
}

}  // namespace

GapResult spectral_gap_eigen(const OneSiteMeasure& m) {
  const auto& rho = m.density();
  const double h = m.grid().spacing();
  GapResult res;
  res.gap = gap_of(rho, h);
  std::vector<double> coarse;
  for (std::size_t i = 0; i < rho.size(); i += 2) coarse.push_back(rho[i]);
  res.coarse_gap = gap_of(coarse, 2.0 * h);
  res.converged = std::abs(res.gap - res.coarse_gap) <= 0.01 * std::abs(res.gap);
  return res;
}

SgFromLs check_mls_implies_sg(double c_ls, double c0, double slack) {
  SgFromLs r;
  r.margin = 0.5 * c_ls + slack - c0;
  r.holds = r.margin >= 0.0;
  return r;
}

// ---------------------------------------------------------------------------
// Tensorisation
// ---------------------------------------------------------------------------

TensorisationReport tensorisation_check(const OneSiteMeasure& a, const OneSiteMeasure& b,
                                        const orlicz::HFunction& h,
                                        const TestFunctionFamily& family) {
  TensorisationReport rep;
  rep.component_max = std::max(best_ratio(a, ConstantKind::MLS, &h, family).estimate,
                               best_ratio(b, ConstantKind::MLS, &h, family).estimate);

  const std::size_t na = a.nodes().size();
  const std::size_t nb = b.nodes().size();
  const double ha = a.grid().spacing();
  const double hb = b.grid().spacing();
  const auto& wa = a.weights();
  const auto& wb = b.weights();
  const auto& ra = a.density();
  const auto& rb = b.density();

  // Probe on the product grid: values F and partial log-derivatives.
  auto evaluate = [&](const std::vector<double>& F, const std::string& id) {
    double top = 0.0, edge = 0.0;
    for (std::size_t i = 0; i < na; ++i) {
      for (std::size_t j = 0; j < nb; ++j) {
        const double q = ra[i] * rb[j] * F[i * nb + j] * F[i * nb + j];
        if (!std::isfinite(q)) return;
        top = std::max(top, q);
        if (i == 0 || j == 0 || i + 1 == na || j + 1 == nb) edge = std::max(edge, q);
      }
    }
    if (!(edge < kProbeTailRatio * top)) return;
    double mean = 0.0;
    for (std::size_t i = 0; i < na; ++i)
      for (std::size_t j = 0; j < nb; ++j) mean += wa[i] * wb[j] * F[i * nb + j] * F[i * nb + j];
    double ent = 0.0, denom = 0.0;
    std::vector<double> row(nb), col(na);
    for (std::size_t i = 0; i < na; ++i) {
      for (std::size_t j = 0; j < nb; ++j) row[j] = F[i * nb + j];
      const auto dy = grid_derivative(row, hb);
      for (std::size_t j = 0; j < nb; ++j) {
        const double f = row[j];
        const double f2 = f * f;
        ent += wa[i] * wb[j] * phi_ent(f2 / mean);
        denom += wa[i] * wb[j] * h(dy[j] / f) * f2;
      }
    }
    for (std::size_t j = 0; j < nb; ++j) {
      for (std::size_t i = 0; i < na; ++i) col[i] = F[i * nb + j];
      const auto dx = grid_derivative(col, ha);
      for (std::size_t i = 0; i < na; ++i) denom += wa[i] * wb[j] * h(dx[i] / col[i]) * col[i] * col[i];
    }
    if (!(denom > 0.0)) return;
    const double r = mean * ent / denom;
    if (r > rep.product_sup) {
      rep.product_sup = r;
      rep.product_argmax = id;
    }
  };

  const auto tilts = family.tilts();
  std::vector<double> F(na * nb);
  std::vector<std::vector<double>> fa, fb;
  for (const auto& p : tilts) {
    fa.push_back(sample_on(a, p.f));
    fb.push_back(sample_on(b, p.f));
  }
  // Single-factor probes.
  for (std::size_t k = 0; k < tilts.size(); ++k) {
    for (std::size_t i = 0; i < na; ++i)
      for (std::size_t j = 0; j < nb; ++j) F[i * nb + j] = fa[k][i];
    evaluate(F, tilts[k].id + "(x)");
    for (std::size_t i = 0; i < na; ++i)
      for (std::size_t j = 0; j < nb; ++j) F[i * nb + j] = fb[k][j];
    evaluate(F, tilts[k].id + "(y)");
  }
  // Product probes on every fourth tilt.
  const std::size_t nt = family.thetas().size();
  for (std::size_t k = 0; k < tilts.size(); ++k) {
    if ((k % nt) % 4 != 0) continue;
    for (std::size_t l = 0; l < tilts.size(); ++l) {
      if ((l % nt) % 4 != 0) continue;
      for (std::size_t i = 0; i < na; ++i)
        for (std::size_t j = 0; j < nb; ++j) F[i * nb + j] = fa[k][i] * fb[l][j];
      evaluate(F, tilts[k].id + "(x)*" + tilts[l].id + "(y)");
    }
  }
  // Rotated probes g((x + y) / sqrt 2).
  const double s = 1.0 / std::sqrt(2.0);
  for (const auto& p : tilts) {
    for (std::size_t i = 0; i < na; ++i)
      for (std::size_t j = 0; j < nb; ++j)
        F[i * nb + j] = p.f(s * (a.nodes()[i] + b.nodes()[j]));
    evaluate(F, p.id + "((x+y)/sqrt2)");
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Perturbation quantities
// ---------------------------------------------------------------------------

namespace {

// Returns U, or NaN if the tilted integrand is not tail-contained.
double u_at(const spec::SpinModel& model, std::span<const double> omegas, double eps,
            double c, double c_hat) {
  const auto xs = model.grid.nodes();
  const auto tw = model.grid.trapezoid_weights();
  const std::size_t n = xs.size();
  std::vector<double> base(n), tilted(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = xs[i];
    double u = model.phase(x);
    double ut = 0.0;
    for (double w : omegas) {
      const double v = model.potential(x, w);
      const double g = model.potential.dx(x, w);
      u += model.J * v;
      ut += 2.0 * c * g * g + v / model.J0;
    }
    base[i] = -u;
    tilted[i] = -u + eps * ut;
  }
  const double lim = std::log(kTailRatio);
  const double btop = *std::max_element(base.begin(), base.end());
  if (base.front() - btop >= lim || base.back() - btop >= lim)
    throw TailContainmentError(
        "one-site density is not negligible at the grid edge; increase Lx");
  const double ttop = *std::max_element(tilted.begin(), tilted.end());
  if (tilted.front() - ttop >= lim || tilted.back() - ttop >= lim)
    return std::numeric_limits<double>::quiet_NaN();
  return c_hat * (log_sum_exp(tilted, tw) - log_sum_exp(base, tw));
}

std::vector<double> neighbour_values(const lattice::Site& site, const spec::Boundary& bd) {
  std::vector<double> out;
  for (const auto& j : lattice::neighbors(site)) out.push_back(bd.value(j));
  return out;
}

constexpr int kMaxHalvings = 40;

}  // namespace

UValue compute_U(const spec::SpinModel& model, const lattice::Site& site,
                 const spec::Boundary& boundary, double epsilon, double c, double c_hat,
                 bool auto_halve) {
  if (!(model.J0 > 0.0)) throw Error("compute_U needs J0 > 0");
  if (!(epsilon > 0.0)) throw Error("compute_U needs epsilon > 0");
  const auto omegas = neighbour_values(site, boundary);
  double eps = epsilon;
  for (int k = 0; k <= kMaxHalvings; ++k) {
    const double u = u_at(model, omegas, eps, c, c_hat);
    if (!std::isnan(u)) return {u, eps};
    if (!auto_halve) break;
    eps *= 0.5;
  }
  throw TailContainmentError("exponential moment of Utilde is not contained in the grid; "
                             "use a smaller epsilon");
}

PerturbationReport check_h4(const spec::SpinModel& model, const lattice::Box& box,
                            const spec::Boundary& boundary, double epsilon, double c,
                            double c_hat, int samples, std::uint64_t seed,
                            std::span<const double> omega_grid) {
  model.require_ferromagnetic_nonnegative();
  const auto set = spec::sample_block_gibbs(model, box, boundary, samples, seed);
  const std::size_t o = box.origin_index();
  const auto& nbr = box.neighbor_indices(o);
  const auto nb_sites = lattice::neighbors(box.site(o));
  std::vector<std::vector<double>> omegas(set.rows());
  for (std::size_t r = 0; r < set.rows(); ++r) {
    for (std::size_t s = 0; s < nbr.size(); ++s)
      omegas[r].push_back(nbr[s] >= 0 ? set.row(r)[static_cast<std::size_t>(nbr[s])]
                                      : boundary.value(nb_sites[s]));
  }
  PerturbationReport rep;
  double eps = epsilon;
  std::vector<double> u2(set.rows());
  for (int k = 0; k <= kMaxHalvings; ++k) {
    bool ok = true;
    for (std::size_t r = 0; r < set.rows() && ok; ++r) {
      const double u = u_at(model, omegas[r], eps, c, c_hat);
      if (std::isnan(u)) ok = false;
      else u2[r] = u * u;
    }
    if (ok) break;
    if (k == kMaxHalvings) throw TailContainmentError("no epsilon keeps U finite on the samples");
    eps *= 0.5;
  }
  rep.epsilon = eps;
  rep.mu_U2 = batch_means(u2);
  rep.K_check = rep.mu_U2.mean + 3.0 * rep.mu_U2.stderr_;
  for (double w : omega_grid) {
    const std::vector<double> om(nbr.size(), w);
    const double u = u_at(model, om, eps, c, c_hat);
    rep.U_values.emplace_back(w, u);
  }
  return rep;
}

PerturbedLsReport perturbed_ls_check(const spec::SpinModel& model, const lattice::Site& site,
                                     std::span<const double> boundary_grid, double epsilon,
                                     double c, double c_hat, const TestFunctionFamily& family) {
  PerturbedLsReport rep;
  double eps = epsilon;
  for (double w : boundary_grid)
    eps = std::min(eps, compute_U(model, site, spec::Boundary(w), eps, c, c_hat).epsilon);
  rep.epsilon = eps;
  rep.curve.resize(boundary_grid.size());
  const auto probes = family.tilts();
  parallel_for(boundary_grid.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      const spec::Boundary bd(boundary_grid[k]);
      const auto m = spec::one_site_measure(model, site, bd);
      const double u = compute_U(model, site, bd, eps, c, c_hat, false).value;
      const double h = m.grid().spacing();
      double need = 0.0;
      for (const auto& p : probes) {
        const auto f = sample_on(m, p.f);
        if (!tail_contained(m, f)) continue;
        const auto df = grid_derivative(f, h);
        std::vector<double> f2(f.size()), d2(f.size());
        for (std::size_t i = 0; i < f.size(); ++i) {
          f2[i] = f[i] * f[i];
          d2[i] = df[i] * df[i];
        }
        const double dir = m.expect_values(d2);
        if (!(dir > 0.0)) continue;
        need = std::max(need, entropy(m, f2) / dir - model.J0 * u);
      }
      rep.curve[k] = {boundary_grid[k], u, need};
    }
  });
  for (const auto& row : rep.curve) rep.R_hat = std::max(rep.R_hat, row[2]);
  return rep;
}

}  // namespace mlslab::func
