#include "mlslab/scenarios.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "mlslab/concentration.hpp"
#include "mlslab/functionals.hpp"
#include "mlslab/sweep.hpp"

namespace mlslab {

using nlohmann::json;

std::string verdict_line(const std::string& scenario, const Verdict& v) {
  std::string line = "VERDICT " + scenario + " criterion=" + std::to_string(v.criterion) + " " +
                     v.name + " " + (v.pass ? "PASS" : "FAIL");
  if (!v.detail.empty()) line += " " + v.detail;
  return line;
}

RunContext::RunContext(std::filesystem::path out_dir) : out_(std::move(out_dir)) {
  std::filesystem::create_directories(out_);
}

void RunContext::write_csv(const std::string& name, const std::string& content) {
  std::ofstream f(out_ / name, std::ios::binary | std::ios::trunc);
  if (!f) throw Error("cannot write " + (out_ / name).string());
  f << content;
  files_.push_back(name);
}

void RunContext::verdict(int criterion, const std::string& name, bool pass,
                         const std::string& detail) {
  verdicts_.push_back({criterion, name, pass, detail});
}

namespace {

using F = std::function<double(std::span<const double>)>;

std::string fd(double x) { return format_double(x); }

std::vector<double> linspace(double a, double b, int n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = n == 1 ? a : a + (b - a) * i / (n - 1);
  return v;
}

std::vector<double> logspace(double a, double b, int n) {
  auto v = linspace(std::log(a), std::log(b), n);
  for (double& x : v) x = std::exp(x);
  return v;
}

std::vector<std::size_t> all_sites(const lattice::Box& box) {
  std::vector<std::size_t> v(box.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = i;
  return v;
}

/// sum_{i in N} x_i / sqrt(|N|)
F normalised_sum(std::vector<std::size_t> N) {
  const double s = 1.0 / std::sqrt(static_cast<double>(N.size()));
  return [N = std::move(N), s](std::span<const double> x) {
    double t = 0.0;
    for (std::size_t i : N) t += x[i];
    return s * t;
  };
}

/// sum of tanh over the first shell, the test function of the gradient sweep.
struct ShellTanh {
  std::vector<std::size_t> support;
  F f;
};
ShellTanh shell_tanh(const lattice::Box& box) {
  ShellTanh s;
  s.support = box.shell(1);
  s.f = [sup = s.support](std::span<const double> x) {
    double t = 0.0;
    for (std::size_t i : sup) t += std::tanh(x[i]);
    return t;
  };
  return s;
}

double measured_eta(const spec::SpinModel& model, int samples, std::uint64_t seed, double c,
                    double c_hat) {
  if (model.J == 0.0) return 0.0;
  const lattice::Box box(model.d, model.box_radius);
  const auto st = shell_tanh(box);
  return sweep::check_gradient_sweep(model, box, st.f, st.support, 1, samples, seed, c, c_hat).eta_min;
}

std::string tail_csv(const conc::TailReport& t) {
  std::ostringstream os;
  conc::write_tail_csv(os, t);
  return os.str();
}

std::string enlargement_csv(const conc::EnlargementCurve& c) {
  std::ostringstream os;
  os << "r,complement,upper_ci,bound,ok\n";
  for (const auto& p : c.points)
    os << fd(p.r) << ',' << fd(p.complement) << ',' << fd(p.upper_ci) << ',' << fd(p.bound) << ','
       << (p.ok ? 1 : 0) << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------

void run_orlicz_suite(const ExperimentConfig& cfg, RunContext& ctx) {
  const double y_lo = cfg.knob("y_min"), y_hi = cfg.knob("y_max");
  const int table_points = cfg.knob_int("table_points");
  const auto ys = linspace(y_lo, y_hi, cfg.knob_int("y_points"));

  std::ostringstream conj, bic, young;
  conj << "p,max_rel_error\n";
  bic << "p,spacing,max_abs_error\n";
  young << "p,max_violation\n";
  bool conj_ok = true, bic_ok = true, young_ok = true;
  double worst_conj = 0.0;
  for (double p : cfg.knob_list("p_values")) {
    const double q = p / (p - 1.0);
    // Geometric nodes keep the relative error of the piecewise-linear
    // conjugate uniform in y.
    const double x_hi = 2.0 * std::pow(y_hi, 1.0 / (p - 1.0));
    const double x_lo = 0.01 * std::pow(y_lo, 1.0 / (p - 1.0));
    std::vector<double> x = logspace(x_lo, x_hi, table_points), f;
    for (double v : x) f.push_back(std::pow(v, p) / p);
    const auto star = orlicz::conjugate(orlicz::YoungFunction::tabulated(x, f));
    double err = 0.0;
    for (double y : ys) {
      const double exact = std::pow(y, q) / q;
      err = std::max(err, std::abs(star(y) - exact) / exact);
    }
    worst_conj = std::max(worst_conj, err);
    conj_ok = conj_ok && err <= 1e-4;
    conj << fd(p) << ',' << fd(err) << '\n';

    // Biconjugate of a uniform table.
    const auto u = linspace(0.0, cfg.knob("bic_xmax"), cfg.knob_int("bic_points"));
    std::vector<double> fu;
    for (double v : u) fu.push_back(std::pow(v, p) / p);
    const auto phi = orlicz::YoungFunction::tabulated(u, fu);
    const auto back = orlicz::conjugate(orlicz::conjugate(phi));
    const double h = u[1] - u[0];
    double berr = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) berr = std::max(berr, std::abs(back(u[i]) - fu[i]));
    bic_ok = bic_ok && berr <= 10.0 * h;
    bic << fd(p) << ',' << fd(h) << ',' << fd(berr) << '\n';

    const auto rep = orlicz::check_young_lemmas(orlicz::YoungFunction::power(p), p,
                                                cfg.knob_int("young_pairs"), cfg.sampler.seed);
    young_ok = young_ok && rep.young_max_violation <= 1e-12;
    young << fd(p) << ',' << fd(rep.young_max_violation) << '\n';
  }
  ctx.write_csv("conjugate_errors.csv", conj.str());
  ctx.write_csv("biconjugate.csv", bic.str());
  ctx.write_csv("young_slack.csv", young.str());

  std::ostringstream herbst;
  herbst << "phi_p,lambda,integral,bound\n";
  bool herbst_ok = true;
  const auto lambdas = logspace(cfg.knob("lambda_min"), cfg.knob("lambda_max"), cfg.knob_int("lambda_points"));
  for (double p : cfg.knob_list("herbst_p")) {
    const orlicz::GrowthEnvelope env(orlicz::modification(orlicz::YoungFunction::power(p)));
    for (double lam : lambdas) {
      const double lhs = orlicz::herbst_integral(env, lam);
      const double rhs = env.omega(lam / 2.0);
      herbst_ok = herbst_ok && lhs <= rhs * (1.0 + 1e-8);
      herbst << fd(p) << ',' << fd(lam) << ',' << fd(lhs) << ',' << fd(rhs) << '\n';
    }
  }
  ctx.write_csv("herbst.csv", herbst.str());

  ctx.verdict(1, "conjugate-closed-form", conj_ok, "max_rel_error=" + fd(worst_conj));
  ctx.verdict(1, "biconjugate", bic_ok, "");
  ctx.verdict(1, "young-slack", young_ok, "");
  ctx.verdict(1, "herbst-bound", herbst_ok, "lambdas=" + std::to_string(lambdas.size()));
}

void run_one_site_constants(const ExperimentConfig& cfg, RunContext& ctx) {
  const auto& model = cfg.model;
  const auto site = lattice::origin(model.d);
  const auto m = spec::one_site_measure(model, site, spec::Boundary(model.boundary_value));
  const func::TestFunctionFamily family;
  const auto gap = func::spectral_gap_eigen(m);
  const auto sg = func::best_ratio(m, func::ConstantKind::SG2, nullptr, family);
  const auto ls = func::best_ratio(m, func::ConstantKind::LS2, nullptr, family);
  const auto margin = func::check_mls_implies_sg(ls.estimate, sg.estimate);

  std::ostringstream summary;
  summary << "quantity,value,probe_id\n"
          << "gap," << fd(gap.gap) << ",\n"
          << "inverse_gap," << fd(1.0 / gap.gap) << ",\n"
          << "sg2," << fd(sg.estimate) << ',' << sg.probe_id << '\n'
          << "ls2," << fd(ls.estimate) << ',' << ls.probe_id << '\n';
  ctx.write_csv("constants.csv", summary.str());

  const auto grid = cfg.knob_list("boundary_grid");
  std::ostringstream curve;
  curve << "omega,estimate,probe_id\n";
  const auto est = func::estimate_constant(model, site, grid, func::ConstantKind::LS2, nullptr, family);
  for (const auto& p : est.curve) curve << fd(p.omega) << ',' << fd(p.estimate) << ',' << p.probe_id << '\n';
  ctx.write_csv("ls2_boundary_curve.csv", curve.str());

  const bool gaussian = model.phase.kind == spec::PhaseKind::Gaussian && model.J == 0.0;
  if (gaussian) {
    ctx.verdict(2, "spectral-gap", std::abs(gap.gap - 1.0) <= 0.002, "gap=" + fd(gap.gap));
    ctx.verdict(2, "ls2-range", ls.estimate >= 1.90 && ls.estimate <= 2.01, "ls2=" + fd(ls.estimate));
  }
  ctx.verdict(2, "sg-from-ls", margin.holds, "c0=" + fd(sg.estimate) + " margin=" + fd(margin.margin));
}

void run_tensorisation(const ExperimentConfig& cfg, RunContext& ctx) {
  const auto& model = cfg.model;
  if (model.J != 0.0) throw ConfigError("tensorisation compares a product measure; set model.J = 0");
  const auto a = spec::one_site_measure(model, lattice::origin(model.d), spec::Boundary(model.boundary_value));
  const auto h = orlicz::modification(cfg.phi);
  const func::TestFunctionFamily family;
  const auto rep = func::tensorisation_check(a, a, h, family);
  std::ostringstream os;
  os << "component_max,product_sup,product_argmax\n"
     << fd(rep.component_max) << ',' << fd(rep.product_sup) << ',' << rep.product_argmax << '\n';
  ctx.write_csv("tensorisation.csv", os.str());
  const bool lower = rep.product_sup >= rep.component_max - 1e-6;
  const bool upper = rep.product_sup <= 1.05 * rep.component_max;
  ctx.verdict(3, "product-sup", lower && upper,
              "single=" + fd(rep.component_max) + " product=" + fd(rep.product_sup));
}

void run_sweep_convergence(const ExperimentConfig& cfg, RunContext& ctx) {
  const lattice::Box box(cfg.model.d, cfg.model.box_radius);
  const int steps = cfg.knob_int("steps");
  const bool exact_available = cfg.model.phase.kind == spec::PhaseKind::Gaussian &&
                               cfg.model.potential.kind == spec::PotentialKind::Bilinear;
  struct Limit {
    double value, stderr_;
  };
  std::vector<Limit> limits;
  std::ostringstream summary;
  summary << "omega,limit,exact,mc_mean,mc_stderr,rate,below_floor\n";
  bool ok = true;
  const std::size_t o = box.origin_index();
  const F x0 = [o](std::span<const double> x) { return x[o]; };
  std::uint64_t seed = cfg.sampler.seed;
  for (double omega : cfg.knob_list("boundaries")) {
    auto model = cfg.model;
    model.boundary_value = omega;
    const spec::Boundary bd(omega);
    const auto f = sweep::GriddedFunction::tabulate(box, {o}, sweep::default_sweep_grid(model), bd, x0);
    const auto res = sweep::apply_B(f, steps, 0, model);
    const auto mc = spec::estimate_mu(model, box, bd, x0, cfg.sampler.samples, seed++, cfg.sampler.burn_in);
    const auto diag = sweep::convergence_diagnostic(res.trace, mc);
    const double limit = res.trace.steps.back().value;
    double exact = std::numeric_limits<double>::quiet_NaN();
    if (exact_available) exact = spec::gaussian_moments(model, box, bd).mean(static_cast<long>(o));

    std::ostringstream trace;
    sweep::write_trace_csv(trace, res.trace);
    ctx.write_csv("trace_omega_" + fd(omega) + ".csv", trace.str());
    summary << fd(omega) << ',' << fd(limit) << ',' << fd(exact) << ',' << fd(mc.mean) << ','
            << fd(mc.stderr_) << ',' << fd(diag.rate) << ',' << (diag.below_floor ? 1 : 0) << '\n';

    std::string detail = "omega=" + fd(omega);
    bool this_ok;
    if (model.J == 0.0) {
      this_ok = diag.below_floor && diag.limit_ok;
      detail += " rate=below-floor";
    } else {
      this_ok = !diag.below_floor && diag.strictly_decreasing && diag.rate < 0.5 && diag.limit_ok;
      if (exact_available) this_ok = this_ok && std::abs(limit - exact) <= 3.0 * mc.stderr_;
      detail += " rate=" + fd(diag.rate) + " limit=" + fd(limit);
    }
    ctx.verdict(4, "sweep-limit", this_ok, detail);
    ok = ok && this_ok;
    limits.push_back({limit, mc.stderr_});
  }
  ctx.write_csv("sweep_summary.csv", summary.str());
  for (std::size_t i = 1; i < limits.size(); ++i) {
    const double se = std::hypot(limits[0].stderr_, limits[i].stderr_);
    const double diff = std::abs(limits[i].value - limits[0].value);
    ctx.verdict(4, "boundary-uniqueness", diff <= 3.0 * se, "diff=" + fd(diff) + " stderr=" + fd(se));
  }
}

void run_gradient_sweep(const ExperimentConfig& cfg, RunContext& ctx) {
  const lattice::Box box(cfg.model.d, cfg.model.box_radius);
  const auto st = shell_tanh(box);
  const double c = cfg.knob("c"), c_hat = cfg.knob("c_hat");
  const double ref = cfg.knob("reference_J0");
  std::ostringstream os;
  os << "J0,eta_min,eta_proof\n";
  std::vector<std::pair<double, double>> eta;
  for (double J0 : cfg.knob_list("J0_values")) {
    auto model = cfg.model;
    model.J = J0;
    model.J0 = J0;
    const auto rep = sweep::check_gradient_sweep(model, box, st.f, st.support, cfg.knob_int("k"),
                                                 cfg.sampler.samples, cfg.sampler.seed, c, c_hat);
    eta.emplace_back(J0, rep.eta_min);
    os << fd(J0) << ',' << fd(rep.eta_min) << ',' << fd(rep.eta_proof) << '\n';
    if (J0 == ref) ctx.verdict(5, "eta-below-one", rep.eta_min < 1.0, "J0=" + fd(J0) + " eta=" + fd(rep.eta_min));
  }
  ctx.write_csv("gradient_sweep.csv", os.str());
  for (std::size_t i = 1; i < eta.size(); ++i) {
    const double law = std::pow(eta[i].first / eta[i - 1].first, 2.0);
    const double ratio = eta[i].second / eta[i - 1].second;
    const double rel = ratio / law;
    ctx.verdict(5, "square-law", rel >= 0.5 && rel <= 2.0,
                "J0=" + fd(eta[i - 1].first) + "->" + fd(eta[i].first) + " ratio=" + fd(ratio) +
                    " law=" + fd(law));
  }
}

void run_entropy_decay(const ExperimentConfig& cfg, RunContext& ctx) {
  const lattice::Box box(cfg.model.d, cfg.model.box_radius);
  const auto h = orlicz::modification(cfg.phi);
  const auto lambdas = cfg.knob_list("lambdas");
  const std::size_t o = box.origin_index();
  std::ostringstream rows, fits;
  rows << "J,lambda,k,term,stderr,level\n";
  fits << "J,lambda,C1,C2,nonincreasing\n";
  for (double J : {0.0, cfg.model.J}) {
    auto model = cfg.model;
    model.J = J;
    model.J0 = std::max(model.J0, std::abs(J));
    const auto F = sweep::GriddedFunction::tabulate(
        box, {o}, sweep::default_sweep_grid(model), spec::Boundary(model.boundary_value),
        [o](std::span<const double> x) { return std::tanh(x[o]); });
    const auto rep = sweep::check_entropy_decay(model, F, 0, cfg.knob_int("k_max"), lambdas, h,
                                                cfg.knob("c"), cfg.sampler.samples, cfg.sampler.seed);
    for (const auto& r : rep.rows)
      rows << fd(J) << ',' << fd(r.lambda) << ',' << r.k << ',' << fd(r.term.mean) << ','
           << fd(r.term.stderr_) << ',' << fd(r.level) << '\n';
    for (const auto& f : rep.fits)
      fits << fd(J) << ',' << fd(f.lambda) << ',' << fd(f.C1) << ',' << fd(f.C2) << ','
           << (f.nonincreasing ? 1 : 0) << '\n';
    if (J == 0.0) {
      bool zero = true;
      for (const auto& r : rep.rows) zero = zero && std::abs(r.term.mean) <= 3.0 * r.term.stderr_ + 1e-15;
      ctx.verdict(6, "no-interaction-zero", zero, "");
      if (cfg.model.J == 0.0) break;
    } else {
      for (const auto& f : rep.fits) {
        if (f.lambda == 0.0) continue;
        ctx.verdict(6, "decay", f.nonincreasing && f.C2 < 1.0,
                    "lambda=" + fd(f.lambda) + " C2=" + fd(f.C2));
      }
    }
  }
  ctx.write_csv("entropy_terms.csv", rows.str());
  ctx.write_csv("entropy_fits.csv", fits.str());
}

struct EnvelopeSetup {
  orlicz::HFunction h;
  conc::Envelope env;
  double eta;
};

EnvelopeSetup envelope_for(const ExperimentConfig& cfg, double a, double c, double eta) {
  auto h = orlicz::modification(cfg.phi);
  const auto k = conc::proof_constants(cfg.model.d, eta, cfg.knob("D"));
  conc::Envelope env(h, a, c, k.C1, k.C2);
  return {std::move(h), std::move(env), eta};
}

std::vector<double> range_grid(double lo, const ExperimentConfig& cfg) {
  return linspace(lo, lo + cfg.knob("r_span"), cfg.knob_int("r_points"));
}

void run_tail_product(const ExperimentConfig& cfg, RunContext& ctx) {
  const auto& model = cfg.model;
  if (cfg.sampler.samples < 10000) throw ConfigError("tail estimates need sampler.samples >= 10000");
  const lattice::Box box(model.d, model.box_radius);
  const auto F = normalised_sum(all_sites(box));
  const auto setup = envelope_for(cfg, cfg.knob("a"), cfg.knob("c"), cfg.knob("eta"));
  const double R = setup.env.r_min();
  const double check_r = cfg.knob("check_r");
  auto rs = range_grid(R, cfg);
  rs.insert(rs.begin(), check_r);
  const auto samples = spec::sample_block_gibbs(model, box, spec::Boundary(model.boundary_value),
                                                cfg.sampler.samples, cfg.sampler.seed, cfg.sampler.burn_in);
  auto tail = conc::empirical_tail(samples, F, rs);
  const auto v = conc::dominance_check(tail, setup.env);
  ctx.write_csv("tail.csv", tail_csv(tail));
  ctx.note("R", R);
  ctx.note("mu_hat", tail.mu_hat);

  if (model.phase.kind == spec::PhaseKind::Gaussian && model.J == 0.0) {
    const double oracle = 0.5 * std::erfc(check_r / std::sqrt(2.0));
    const auto& p = tail.points.front();
    ctx.verdict(7, "normal-oracle", p.ci_low <= oracle && oracle <= p.ci_high,
                "r=" + fd(check_r) + " empirical=" + fd(p.empirical) + " oracle=" + fd(oracle));
  }
  ctx.verdict(7, "dominance", v.pass && v.valid_points > 0,
              "R=" + fd(R) + " valid=" + std::to_string(v.valid_points) +
                  " violations=" + std::to_string(v.violations.size()));
  ctx.verdict(7, "non-vacuous", !v.vacuous, "");
}

void run_tail_gibbs(const ExperimentConfig& cfg, RunContext& ctx) {
  const auto& model = cfg.model;
  if (cfg.sampler.samples < 10000) throw ConfigError("tail estimates need sampler.samples >= 10000");
  const lattice::Box box(model.d, model.box_radius);
  const auto N = all_sites(box);
  const auto F = normalised_sum(N);
  const double eta = measured_eta(model, cfg.knob_int("gradient_samples"), cfg.sampler.seed,
                                  cfg.knob("c"), cfg.knob("c_hat"));
  const auto setup = envelope_for(cfg, cfg.knob("a"), cfg.knob("c"), eta);
  const double R = setup.env.r_min();
  const auto rs = range_grid(R, cfg);
  const spec::Boundary bd(model.boundary_value);
  const auto samples = spec::sample_block_gibbs(model, box, bd, cfg.sampler.samples, cfg.sampler.seed,
                                                cfg.sampler.burn_in);
  auto tail = conc::empirical_tail(samples, F, rs);
  const auto v = conc::dominance_check(tail, setup.env);
  ctx.write_csv("tail.csv", tail_csv(tail));

  conc::EnlargementSpec es;
  es.N = N;
  es.F = F;
  es.gauge = conc::Gauge::h_star(setup.h);
  es.witnesses = static_cast<std::size_t>(cfg.knob_int("witnesses"));
  const double K_hat = setup.env.K_hat();
  const auto curve = conc::enlargement_probability(samples, es, rs, K_hat);
  ctx.write_csv("enlargement.csv", enlargement_csv(curve));
  ctx.note("eta", eta);
  ctx.note("C1", setup.env.C1());
  ctx.note("C2", setup.env.C2());
  ctx.note("R", R);
  ctx.note("K_hat", K_hat);

  ctx.verdict(8, "dominance", v.pass && v.valid_points > 0,
              "eta=" + fd(eta) + " R=" + fd(R) + " valid=" + std::to_string(v.valid_points));
  ctx.verdict(8, "enlargement", curve.pass, "K_hat=" + fd(K_hat) + " mu_A=" + fd(curve.mu_A));
}

void run_enlargement(const ExperimentConfig& cfg, RunContext& ctx) {
  const auto& model = cfg.model;
  const lattice::Box box(model.d, model.box_radius);
  const auto N = all_sites(box);
  const auto setup = envelope_for(cfg, cfg.knob("a"), cfg.knob("c"), cfg.knob("eta"));
  conc::EnlargementSpec es;
  es.N = N;
  es.F = normalised_sum(N);
  es.gauge = conc::Gauge::h_star(setup.h);
  es.witnesses = static_cast<std::size_t>(cfg.knob_int("witnesses"));
  const auto samples = spec::sample_block_gibbs(model, box, spec::Boundary(model.boundary_value),
                                                cfg.sampler.samples, cfg.sampler.seed, cfg.sampler.burn_in);
  const double R = setup.env.r_min();
  const auto curve = conc::enlargement_probability(samples, es, range_grid(R, cfg), setup.env.K_hat());
  ctx.write_csv("enlargement.csv", enlargement_csv(curve));
  ctx.verdict(8, "enlargement", curve.pass, "K_hat=" + fd(setup.env.K_hat()) + " R=" + fd(R));
}

void run_talagrand(const ExperimentConfig& cfg, RunContext& ctx) {
  const auto& model = cfg.model;
  const lattice::Box box(model.d, model.box_radius);
  const auto N = all_sites(box);
  const auto setup = envelope_for(cfg, cfg.knob("a"), cfg.knob("c"), cfg.knob("eta"));
  conc::EnlargementSpec es;
  es.N = N;
  es.F = normalised_sum(N);
  es.witnesses = static_cast<std::size_t>(cfg.knob_int("witnesses"));
  const auto samples = spec::sample_block_gibbs(model, box, spec::Boundary(model.boundary_value),
                                                cfg.sampler.samples, cfg.sampler.seed, cfg.sampler.burn_in);
  const double C = setup.env.K_hat();
  const auto curve = conc::talagrand_check(samples, es, cfg.phi, cfg.knob_list("r_grid"), C);
  std::ostringstream os;
  os << "r,scale,mu_lower,bound,ok\n";
  for (const auto& p : curve.points)
    os << fd(p.r) << ',' << fd(p.scale) << ',' << fd(p.mu_lower) << ',' << fd(p.bound) << ','
       << (p.ok ? 1 : 0) << '\n';
  ctx.write_csv("talagrand.csv", os.str());
  ctx.verdict(9, "talagrand", curve.pass, "C=" + fd(C));
}

void run_perturbation(const ExperimentConfig& cfg, RunContext& ctx) {
  const auto& model = cfg.model;
  model.require_ferromagnetic_nonnegative();
  const auto site = lattice::origin(model.d);
  const double eps = cfg.knob("epsilon"), c = cfg.knob("c"), c_hat = cfg.knob("c_hat");
  const auto omegas = cfg.knob_list("boundary_grid");
  const func::TestFunctionFamily family;

  // R_hat on the configured grid and on one with twice the resolution.
  auto fine = model;
  fine.grid.points = 2 * model.grid.points - 1;
  const auto ls1 = func::perturbed_ls_check(model, site, omegas, eps, c, c_hat, family);
  const auto ls2 = func::perturbed_ls_check(fine, site, omegas, eps, c, c_hat, family);
  std::ostringstream ls;
  ls << "grid_points,omega,U,required_R\n";
  for (const auto* rep : {&ls1, &ls2}) {
    const int pts = rep == &ls1 ? model.grid.points : fine.grid.points;
    for (const auto& row : rep->curve)
      ls << pts << ',' << fd(row[0]) << ',' << fd(row[1]) << ',' << fd(row[2]) << '\n';
  }
  ctx.write_csv("perturbed_ls.csv", ls.str());
  const double spread = std::abs(ls1.R_hat - ls2.R_hat) / std::max(ls1.R_hat, ls2.R_hat);
  ctx.verdict(9, "R-hat-stable",
              std::isfinite(ls1.R_hat) && std::isfinite(ls2.R_hat) && spread <= 0.1,
              "R_hat=" + fd(ls1.R_hat) + "," + fd(ls2.R_hat) + " epsilon=" + fd(ls1.epsilon));

  const lattice::Box box(model.d, model.box_radius);
  const spec::Boundary bd(model.boundary_value);
  const auto h4 = func::check_h4(model, box, bd, eps, c, c_hat, cfg.sampler.samples, cfg.sampler.seed, omegas);
  std::ostringstream u;
  u << "omega,U\n";
  for (const auto& [w, val] : h4.U_values) u << fd(w) << ',' << fd(val) << '\n';
  ctx.write_csv("U_values.csv", u.str());
  ctx.verdict(9, "mu-U2-finite", std::isfinite(h4.mu_U2.mean) && std::isfinite(h4.K_check),
              "mu_U2=" + fd(h4.mu_U2.mean) + " K_check=" + fd(h4.K_check));

  // Envelope for H built from x^4, effective constant R_hat + J0 K_check.
  const auto N = all_sites(box);
  const double eta = measured_eta(model, cfg.knob_int("gradient_samples"), cfg.sampler.seed, c, c_hat);
  const auto h = orlicz::modification(orlicz::YoungFunction::power(4.0));
  const auto k = conc::proof_constants(model.d, eta, cfg.knob("D"));
  const double c_eff = std::max(ls1.R_hat, ls2.R_hat) + model.J0 * h4.K_check;
  const conc::Envelope env(h, static_cast<double>(N.size()), c_eff, k.C1, k.C2);
  const double floor_r = static_cast<double>(N.size()) / conc::young_omega(orlicz::YoungFunction::power(4.0), 2.0);
  const double R = std::max(env.r_min(), floor_r);

  conc::EnlargementSpec es;
  es.N = N;
  es.F = normalised_sum(N);
  es.gauge = conc::Gauge::power(4.0 / 3.0);
  es.witnesses = static_cast<std::size_t>(cfg.knob_int("witnesses"));
  const auto samples = spec::sample_block_gibbs(model, box, bd, cfg.sampler.samples, cfg.sampler.seed + 1,
                                                cfg.sampler.burn_in);
  const auto curve = conc::enlargement_probability(samples, es, range_grid(R, cfg), env.K_hat());
  ctx.write_csv("enlargement.csv", enlargement_csv(curve));
  ctx.note("eta", eta);
  ctx.note("c_eff", c_eff);
  ctx.note("R", R);
  ctx.note("K_hat", env.K_hat());
  ctx.verdict(9, "enlargement-4/3", curve.pass, "K_hat=" + fd(env.K_hat()) + " R=" + fd(R));
}

// ---------------------------------------------------------------------------

json gaussian_model(double J, int radius, double Lx = 8.0, int n = 513) {
  return {{"d", 1},
          {"phase", {{"kind", "gaussian"}}},
          {"potential", {{"kind", "bilinear"}}},
          {"J", J},
          {"J0", J},
          {"box_radius", radius},
          {"grid", {{"Lx", Lx}, {"n", n}}},
          {"boundary", {{"kind", "const"}, {"value", 0.0}}}};
}

json envelope_knobs(json extra) {
  json k = {{"a", 1.0}, {"c", 2.0}, {"D", 2.0}, {"r_span", 3.0}, {"r_points", 13}};
  k.update(extra);
  return k;
}

std::vector<ScenarioInfo> build_registry() {
  std::vector<ScenarioInfo> r;
  {
    ScenarioDefaults d;
    d.model = gaussian_model(0.0, 1);
    d.knobs = {{"p_values", {1.5, 2.0, 3.0, 4.0}},
               {"y_min", 0.1},
               {"y_max", 10.0},
               {"y_points", 200},
               {"table_points", 20000},
               {"bic_xmax", 4.0},
               {"bic_points", 4001},
               {"young_pairs", 10000},
               {"herbst_p", {2.0, 4.0, 2.5}},
               {"lambda_min", 0.01},
               {"lambda_max", 20.0},
               {"lambda_points", 32}};
    r.push_back({"orlicz-suite", "Legendre duality, Young slack and the Herbst bound", {1}, d, run_orlicz_suite});
  }
  {
    ScenarioDefaults d;
    d.model = gaussian_model(0.0, 1, 8.0, 2001);
    d.knobs = {{"boundary_grid", {-2.0, -1.0, 0.0, 1.0, 2.0}}};
    r.push_back({"one-site-constants", "Spectral gap, SG2/LS2 probe bounds and the SG margin", {2}, d,
                 run_one_site_constants});
  }
  {
    ScenarioDefaults d;
    d.model = gaussian_model(0.0, 1, 8.0, 161);
    r.push_back({"tensorisation", "MLS(H) of a two-site product against its factors", {3}, d, run_tensorisation});
  }
  {
    ScenarioDefaults d;
    d.model = gaussian_model(0.05, 3);
    d.samples = 20000;
    d.knobs = {{"boundaries", {2.0, -2.0}}, {"steps", 11}};
    r.push_back({"sweep-convergence", "B^{n,0} x_0 traces, geometric rate and limit checks", {4}, d,
                 run_sweep_convergence});
  }
  {
    ScenarioDefaults d;
    d.model = gaussian_model(0.05, 3);
    d.samples = 100;
    d.knobs = {{"J0_values", {0.025, 0.05, 0.1}}, {"reference_J0", 0.05}, {"k", 1}, {"c", 2.0}, {"c_hat", 1.0}};
    r.push_back({"gradient-sweep", "Smallest eta in the gradient sweeping-out inequality", {5}, d,
                 run_gradient_sweep});
  }
  {
    ScenarioDefaults d;
    d.model = gaussian_model(0.05, 3);
    d.samples = 2000;
    d.knobs = {{"lambdas", {0.0, 0.5, 1.0}}, {"k_max", 3}, {"c", 2.0}};
    r.push_back({"entropy-decay", "Per-shell entropy terms along the sweep", {6}, d, run_entropy_decay});
  }
  {
    ScenarioDefaults d;
    d.model = gaussian_model(0.0, 2);
    d.samples = 40000;
    d.knobs = envelope_knobs({{"eta", 0.0}, {"check_r", 2.0}});
    r.push_back({"tail-product", "Product Gaussian tail against the envelope", {7}, d, run_tail_product});
  }
  {
    ScenarioDefaults d;
    d.model = gaussian_model(0.05, 3);
    d.samples = 20000;
    d.knobs = envelope_knobs({{"c_hat", 1.0}, {"gradient_samples", 100}, {"witnesses", 20000}});
    r.push_back({"tail-gibbs", "Gibbs tail dominance and H*-enlargement", {8}, d, run_tail_gibbs});
  }
  {
    ScenarioDefaults d;
    d.model = gaussian_model(0.05, 3);
    d.samples = 20000;
    d.knobs = envelope_knobs({{"eta", 0.01}, {"witnesses", 20000}});
    r.push_back({"enlargement", "H*-gauge enlargement complement against exp(-K_hat r)", {8}, d, run_enlargement});
  }
  {
    ScenarioDefaults d;
    d.model = gaussian_model(0.05, 2);
    d.orlicz = {{"kind", "power"}, {"p", 4.0}};
    d.samples = 4000;
    d.knobs = envelope_knobs({{"eta", 0.01}, {"witnesses", 1000}, {"r_grid", {0.5, 1.0, 2.0, 4.0, 8.0}}});
    r.push_back({"talagrand", "Lower bounds on mu(A + sqrt(r) B_2 + s B_Phi*)", {9}, d, run_talagrand});
  }
  {
    ScenarioDefaults d;
    d.model = {{"d", 1},
               {"phase", {{"kind", "perturbed"}, {"p", 4.0}, {"delta", 0.5}}},
               {"potential", {{"kind", "sqdiff"}}},
               {"J", 0.02},
               {"J0", 0.02},
               {"box_radius", 2},
               {"boundary", {{"kind", "const"}, {"value", 0.0}}}};
    d.orlicz = {{"kind", "power"}, {"p", 4.0}};
    d.samples = 20000;
    d.knobs = envelope_knobs({{"epsilon", 0.05},
                              {"c", 2.0},
                              {"c_hat", 1.0},
                              {"boundary_grid", {-2.0, -1.0, 0.0, 1.0, 2.0}},
                              {"gradient_samples", 100},
                              {"witnesses", 20000}});
    d.knobs.erase("a");
    r.push_back({"perturbation-s3", "Perturbed phase: R_hat, mu(U^2) and |x|^{4/3} enlargement", {9}, d,
                 run_perturbation});
  }
  return r;
}

}  // namespace

const std::vector<ScenarioInfo>& scenario_registry() {
  static const std::vector<ScenarioInfo> registry = build_registry();
  return registry;
}

const ScenarioInfo& find_scenario(const std::string& name) {
  for (const auto& s : scenario_registry())
    if (s.name == name) return s;
  std::string names;
  for (const auto& s : scenario_registry()) names += (names.empty() ? "" : ", ") + s.name;
  throw ConfigError("unknown scenario '" + name + "'; valid names: " + names);
}

ExperimentConfig load_experiment(const json& doc) {
  return resolve_config(doc, find_scenario(scenario_name(doc)).defaults);
}

RunResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir) {
  const auto& info = find_scenario(cfg.scenario);
  RunContext ctx(out_dir);
  const auto t0 = std::chrono::steady_clock::now();
  info.run(cfg, ctx);
  RunResult res;
  res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  res.verdicts = ctx.verdicts();
  res.all_pass = !res.verdicts.empty();
  for (const auto& v : res.verdicts) res.all_pass = res.all_pass && v.pass;

  json verdicts = json::array();
  std::string lines;
  for (const auto& v : res.verdicts) {
    verdicts.push_back({{"criterion", v.criterion}, {"name", v.name}, {"pass", v.pass}, {"detail", v.detail}});
    lines += verdict_line(cfg.scenario, v) + "\n";
  }
  json notes = json::object();
  for (const auto& [k, v] : ctx.notes()) notes[k] = v;
  const json manifest = {{"tool", "mlslab"},
                         {"version", kVersion},
                         {"scenario", cfg.scenario},
                         {"config", cfg.resolved},
                         {"input_hash", content_hash(cfg.resolved.dump())},
                         {"workers", worker_count()},
                         {"wall_time_seconds", res.wall_seconds},
                         {"files", ctx.files()},
                         {"notes", notes},
                         {"verdicts", verdicts},
                         {"all_pass", res.all_pass}};
  std::ofstream(out_dir / "manifest.json", std::ios::binary | std::ios::trunc) << manifest.dump(2) << '\n';
  std::ofstream(out_dir / "verdicts.txt", std::ios::binary | std::ios::trunc) << lines;
  return res;
}

}  // namespace mlslab
