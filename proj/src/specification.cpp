#include "mlslab/specification.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace mlslab::spec {

namespace {

void reject_unknown(const nlohmann::json& j, std::initializer_list<const char*> keys,
                    const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [k, v] : j.items()) {
    bool known = false;
    for (const char* key : keys) known = known || k == key;
    if (!known) throw ConfigError("unknown key '" + k + "' in " + where);
  }
}

double abs_pow(double x, double e) { return std::pow(std::abs(x), e); }

}  // namespace

std::string to_string(PhaseKind k) {
  switch (k) {
    case PhaseKind::Gaussian: return "gaussian";
    case PhaseKind::Power: return "power";
    case PhaseKind::Perturbed: return "perturbed";
  }
  return "unknown";
}

std::string to_string(PotentialKind k) {
  return k == PotentialKind::Bilinear ? "bilinear" : "sqdiff";
}

// ---------------------------------------------------------------------------
// Phase / Potential
// ---------------------------------------------------------------------------

double Phase::operator()(double x) const {
  switch (kind) {
    case PhaseKind::Gaussian: return 0.5 * x * x;
    case PhaseKind::Power: return abs_pow(x, p) / p;
    case PhaseKind::Perturbed: return abs_pow(x, p) + abs_pow(x, p - 1.0 - delta) * std::cos(x);
  }
  return 0.0;
}

double Phase::derivative(double x) const {
  const double s = x < 0.0 ? -1.0 : (x > 0.0 ? 1.0 : 0.0);
  const double ax = std::abs(x);
  switch (kind) {
    case PhaseKind::Gaussian: return x;
    case PhaseKind::Power: return s * std::pow(ax, p - 1.0);
    case PhaseKind::Perturbed: {
      const double e = p - 1.0 - delta;
      const double lead = p * std::pow(ax, p - 1.0);
      const double pert = ax > 0.0 ? e * std::pow(ax, e - 1.0) * std::cos(x) : 0.0;
      return s * (lead + pert) - std::pow(ax, e) * std::sin(x);
    }
  }
  return 0.0;
}

void Phase::validate() const {
  if (kind == PhaseKind::Power && !(p > 1.0)) throw ConfigError("power phase needs p > 1");
  if (kind == PhaseKind::Perturbed) {
    if (!(p > 2.0)) throw ConfigError("perturbed phase needs p > 2");
    if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("perturbed phase needs delta in (0, 1)");
  }
}

double Potential::operator()(double x, double y) const {
  if (kind == PotentialKind::Bilinear) return x * y;
  return (x - y) * (x - y);
}

double Potential::dx(double x, double y) const {
  if (kind == PotentialKind::Bilinear) return y;
  return 2.0 * (x - y);
}

double Potential::mixed_bound() const { return kind == PotentialKind::Bilinear ? 1.0 : 2.0; }

// ---------------------------------------------------------------------------
// SpinModel
// ---------------------------------------------------------------------------

void SpinModel::validate() const {
  if (d < 1) throw ConfigError("model dimension must be >= 1");
  if (box_radius < 0) throw ConfigError("box_radius must be >= 0");
  if (!(J0 >= 0.0)) throw ConfigError("J0 must be >= 0");
  if (std::abs(J) > J0 + 1e-15) throw ConfigError("|J| must not exceed J0");
  phase.validate();
  grid.validate();
}

void SpinModel::require_ferromagnetic_nonnegative() const {
  if (J < 0.0) throw ConfigError("this experiment needs J >= 0");
  if (!potential.nonnegative()) throw ConfigError("this experiment needs V >= 0 (sqdiff)");
}

UniformGrid SpinModel::default_grid(const Phase& phase) {
  if (phase.kind != PhaseKind::Gaussian && phase.p >= 4.0) return UniformGrid{4.0, 513};
  return UniformGrid{8.0, 513};
}

nlohmann::json SpinModel::to_json() const {
  nlohmann::json ph{{"kind", to_string(phase.kind)}};
  if (phase.kind != PhaseKind::Gaussian) ph["p"] = phase.p;
  if (phase.kind == PhaseKind::Perturbed) ph["delta"] = phase.delta;
  return {{"d", d},
          {"phase", ph},
          {"potential", {{"kind", to_string(potential.kind)}}},
          {"J", J},
          {"J0", J0},
          {"box_radius", box_radius},
          {"grid", {{"Lx", grid.half_width}, {"n", grid.points}}},
          {"boundary", {{"kind", "const"}, {"value", boundary_value}}}};
}

SpinModel SpinModel::from_json(const nlohmann::json& j) {
  reject_unknown(j, {"d", "phase", "potential", "J", "J0", "box_radius", "grid", "boundary"},
                 "model");
  SpinModel m;
  m.d = j.value("d", 1);
  if (j.contains("phase")) {
    const auto& ph = j.at("phase");
    reject_unknown(ph, {"kind", "p", "delta"}, "model.phase");
    const std::string kind = ph.at("kind").get<std::string>();
    if (kind == "gaussian") m.phase.kind = PhaseKind::Gaussian;
    else if (kind == "power") m.phase.kind = PhaseKind::Power;
    else if (kind == "perturbed") m.phase.kind = PhaseKind::Perturbed;
    else throw ConfigError("unknown phase kind: " + kind);
    m.phase.p = ph.value("p", m.phase.kind == PhaseKind::Gaussian ? 2.0 : 4.0);
    m.phase.delta = ph.value("delta", 0.5);
  }
  if (j.contains("potential")) {
    const auto& pot = j.at("potential");
    reject_unknown(pot, {"kind"}, "model.potential");
    const std::string kind = pot.at("kind").get<std::string>();
    if (kind == "bilinear") m.potential.kind = PotentialKind::Bilinear;
    else if (kind == "sqdiff") m.potential.kind = PotentialKind::SquaredDifference;
    else throw ConfigError("unknown potential kind: " + kind);
  }
  m.J = j.value("J", 0.0);
  m.J0 = j.value("J0", std::abs(m.J));
  m.box_radius = j.value("box_radius", 3);
  m.grid = default_grid(m.phase);
  if (j.contains("grid")) {
    const auto& g = j.at("grid");
    reject_unknown(g, {"Lx", "n"}, "model.grid");
    m.grid.half_width = g.value("Lx", m.grid.half_width);
    m.grid.points = g.value("n", m.grid.points);
  }
  if (j.contains("boundary")) {
    const auto& b = j.at("boundary");
    reject_unknown(b, {"kind", "value"}, "model.boundary");
    if (b.value("kind", std::string("const")) != "const")
      throw ConfigError("only constant boundaries are supported");
    m.boundary_value = b.value("value", 0.0);
  }
  m.validate();
  return m;
}

double Boundary::value(const lattice::Site& s) const {
  auto it = overrides_.find(s);
  return it == overrides_.end() ? fill_ : it->second;
}

// ---------------------------------------------------------------------------
// OneSiteMeasure
// ---------------------------------------------------------------------------

OneSiteMeasure::OneSiteMeasure(const UniformGrid& grid, std::span<const double> potential,
                               bool check_tails)
    : grid_(grid) {
  grid_.validate();
  const std::size_t n = static_cast<std::size_t>(grid_.points);
  if (potential.size() != n) throw Error("potential does not match the grid");
  x_ = grid_.nodes();
  double umin = potential[0];
  for (double u : potential) {
    if (std::isnan(u)) throw Error("potential is NaN on the grid");
    umin = std::min(umin, u);
  }
  if (!std::isfinite(umin)) throw Error("potential is not finite on the grid");
  rho_.resize(n);
  double rmax = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    rho_[i] = std::exp(-(potential[i] - umin));
    rmax = std::max(rmax, rho_[i]);
  }
  if (check_tails && (rho_.front() >= 1e-12 * rmax || rho_.back() >= 1e-12 * rmax))
    throw TailContainmentError(
        "density is not negligible at the grid edge; increase the spin grid half-width Lx");
  const auto tw = grid_.trapezoid_weights();
  double z = 0.0;
  for (std::size_t i = 0; i < n; ++i) z += tw[i] * rho_[i];
  log_z_ = std::log(z) - umin;
  w_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    rho_[i] /= z;
    w_[i] = tw[i] * rho_[i];
  }
  cum_.assign(n, 0.0);
  const double h = grid_.spacing();
  for (std::size_t i = 1; i < n; ++i) cum_[i] = cum_[i - 1] + 0.5 * h * (rho_[i - 1] + rho_[i]);
  const double total = cum_.back();
  for (double& c : cum_) c /= total;
}

OneSiteMeasure OneSiteMeasure::from_potential(const UniformGrid& grid,
                                              const std::function<double(double)>& u,
                                              bool check_tails) {
  const auto xs = grid.nodes();
  std::vector<double> pot(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) pot[i] = u(xs[i]);
  return OneSiteMeasure(grid, pot, check_tails);
}

double OneSiteMeasure::expect(const std::function<double(double)>& g) const {
  double s = 0.0;
  for (std::size_t i = 0; i < x_.size(); ++i) s += w_[i] * g(x_[i]);
  return s;
}

double OneSiteMeasure::expect_values(std::span<const double> g) const {
  double s = 0.0;
  for (std::size_t i = 0; i < x_.size(); ++i) s += w_[i] * g[i];
  return s;
}

double OneSiteMeasure::mean() const {
  return expect([](double x) { return x; });
}

double OneSiteMeasure::variance() const {
  const double m = mean();
  return expect([m](double x) { return (x - m) * (x - m); });
}

double OneSiteMeasure::cdf(double x) const {
  if (x <= x_.front()) return 0.0;
  if (x >= x_.back()) return 1.0;
  const double h = grid_.spacing();
  const std::size_t i = std::min(static_cast<std::size_t>((x - x_.front()) / h), x_.size() - 2);
  const double t = (x - x_[i]) / h;
  return cum_[i] + t * (cum_[i + 1] - cum_[i]);
}

double OneSiteMeasure::quantile(double u) const {
  const auto it = std::upper_bound(cum_.begin(), cum_.end(), u);
  if (it == cum_.begin()) return x_.front();
  if (it == cum_.end()) return x_.back();
  const std::size_t i = static_cast<std::size_t>(it - cum_.begin()) - 1;
  const double span = cum_[i + 1] - cum_[i];
  const double t = span > 0.0 ? (u - cum_[i]) / span : 0.0;
  return x_[i] + t * grid_.spacing();
}

OneSiteMeasure one_site_measure(const SpinModel& model, const lattice::Site& i,
                                const Boundary& boundary) {
  const auto nb = lattice::neighbors(i);
  std::vector<double> z;
  for (const auto& j : nb) z.push_back(boundary.value(j));
  return OneSiteMeasure::from_potential(model.grid, [&](double x) {
    double u = model.phase(x);
    for (double zj : z) u += model.J * model.potential(x, zj);
    return u;
  });
}

double one_site_expect(const OneSiteMeasure& m, const std::function<double(double)>& g) {
  return m.expect(g);
}

double hamiltonian(const SpinModel& model, const lattice::LatticeRegion& region,
                   std::span<const double> interior, const Boundary& boundary) {
  if (interior.size() != region.size())
    throw Error("hamiltonian: every site of the region needs a spin value");
  double h = 0.0;
  for (std::size_t a = 0; a < region.size(); ++a) {
    const double xi = interior[a];
    h += model.phase(xi);
    for (const auto& j : lattice::neighbors(region[a])) {
      const auto it = std::lower_bound(region.begin(), region.end(), j);
      const double zj = (it != region.end() && *it == j)
                            ? interior[static_cast<std::size_t>(it - region.begin())]
                            : boundary.value(j);
      h += model.J * model.potential(xi, zj);
    }
  }
  return h;
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

void SampleSet::append(std::span<const double> r) {
  if (width == 0) width = r.size();
  if (r.size() != width) throw Error("sample row has the wrong width");
  data.insert(data.end(), r.begin(), r.end());
}

BlockGibbsSampler::BlockGibbsSampler(const SpinModel& model, const lattice::Box& box,
                                     const Boundary& boundary, std::uint64_t seed)
    : model_(model), box_(box), state_(box.size(), 0.0), rng_(seed) {
  model_.validate();
  const std::size_t slots = 2 * static_cast<std::size_t>(box.dim());
  outside_.assign(box.size() * slots, 0.0);
  for (std::size_t i = 0; i < box.size(); ++i) {
    const auto nb = lattice::neighbors(box.site(i));
    for (std::size_t s = 0; s < slots; ++s)
      if (box.neighbor_indices(i)[s] < 0) outside_[i * slots + s] = boundary.value(nb[s]);
  }
  const auto xs = model.grid.nodes();
  phi_.resize(xs.size());
  for (std::size_t g = 0; g < xs.size(); ++g) phi_[g] = model.phase(xs[g]);
  u_.resize(xs.size());
  cum_.resize(xs.size());
}

void BlockGibbsSampler::set_state(std::span<const double> state) {
  if (state.size() != state_.size()) throw Error("sampler state has the wrong size");
  state_.assign(state.begin(), state.end());
}

void BlockGibbsSampler::half_sweep(int cls) {
  const std::size_t slots = 2 * static_cast<std::size_t>(box_.dim());
  const UniformGrid& grid = model_.grid;
  const std::size_t n = phi_.size();
  const double h = grid.spacing();
  const double J = model_.J;
  const bool bilinear = model_.potential.kind == PotentialKind::Bilinear;
  for (std::size_t i : box_.parity(cls)) {
    double sum = 0.0;
    const auto& nbr = box_.neighbor_indices(i);
    for (std::size_t s = 0; s < slots; ++s)
      sum += nbr[s] >= 0 ? state_[static_cast<std::size_t>(nbr[s])] : outside_[i * slots + s];
    // Both potentials reduce to a quadratic in x given the neighbour sum.
    const double a = bilinear ? 0.0 : J * static_cast<double>(slots);
    const double b = bilinear ? J * sum : -2.0 * J * sum;
    double umin = std::numeric_limits<double>::infinity();
    for (std::size_t g = 0; g < n; ++g) {
      const double x = grid.node(static_cast<int>(g));
      u_[g] = phi_[g] + a * x * x + b * x;
      umin = std::min(umin, u_[g]);
    }
    if (u_.front() - umin < 27.6 || u_.back() - umin < 27.6)
      throw TailContainmentError(
          "conditional density is not negligible at the grid edge; increase Lx");
    double prev = std::exp(-(u_[0] - umin));
    cum_[0] = 0.0;
    for (std::size_t g = 1; g < n; ++g) {
      const double cur = std::exp(-(u_[g] - umin));
      cum_[g] = cum_[g - 1] + 0.5 * h * (prev + cur);
      prev = cur;
    }
    const double target = uniform01(rng_) * cum_[n - 1];
    const auto it = std::upper_bound(cum_.begin(), cum_.end(), target);
    const std::size_t k = std::min(static_cast<std::size_t>(it - cum_.begin()), n - 1) - 1;
    const double span = cum_[k + 1] - cum_[k];
    const double t = span > 0.0 ? (target - cum_[k]) / span : 0.0;
    state_[i] = grid.node(static_cast<int>(k)) + t * h;
  }
}

SampleSet sample_block_gibbs(const SpinModel& model, const lattice::Box& box,
                             const Boundary& boundary, int sweeps, std::uint64_t seed,
                             int burn_in, int thin) {
  if (sweeps < 1) throw Error("sample_block_gibbs needs sweeps >= 1");
  BlockGibbsSampler sampler(model, box, boundary, seed);
  for (int s = 0; s < burn_in; ++s) sampler.sweep();
  SampleSet out;
  out.width = box.size();
  out.data.reserve(static_cast<std::size_t>(sweeps) * box.size());
  for (int s = 0; s < sweeps; ++s) {
    for (int t = 0; t < std::max(1, thin); ++t) sampler.sweep();
    out.append(sampler.state());
  }
  return out;
}

MeanEstimate estimate_mu(const SpinModel& model, const lattice::Box& box,
                         const Boundary& boundary, const ConfigFunction& f, int samples,
                         std::uint64_t seed, int burn_in) {
  const auto set = sample_block_gibbs(model, box, boundary, samples, seed, burn_in);
  std::vector<double> values(set.rows());
  for (std::size_t r = 0; r < set.rows(); ++r) values[r] = f(set.row(r));
  return batch_means(values);
}

GaussianMoments gaussian_moments(const SpinModel& model, const lattice::Box& box,
                                 const Boundary& boundary) {
  if (model.phase.kind != PhaseKind::Gaussian || model.potential.kind != PotentialKind::Bilinear)
    throw Error("exact moments need the Gaussian phase with bilinear potential");
  const std::size_t n = box.size();
  Eigen::MatrixXd q = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n),
                                                static_cast<Eigen::Index>(n));
  Eigen::VectorXd b = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto nb = lattice::neighbors(box.site(i));
    const auto& idx = box.neighbor_indices(i);
    for (std::size_t s = 0; s < idx.size(); ++s) {
      if (idx[s] >= 0) q(static_cast<Eigen::Index>(i), idx[s]) += model.J;
      else b(static_cast<Eigen::Index>(i)) += model.J * boundary.value(nb[s]);
    }
  }
  Eigen::LLT<Eigen::MatrixXd> llt(q);
  if (llt.info() != Eigen::Success) throw Error("precision matrix is not positive definite");
  GaussianMoments out;
  out.covariance = llt.solve(Eigen::MatrixXd::Identity(q.rows(), q.cols()));
  out.mean = -llt.solve(b);
  return out;
}

SampleSet sample_exact_gaussian(const SpinModel& model, const lattice::Box& box,
                                const Boundary& boundary, int count, std::uint64_t seed) {
  const auto mom = gaussian_moments(model, box, boundary);
  const Eigen::MatrixXd l = mom.covariance.llt().matrixL();
  Rng rng(seed);
  SampleSet out;
  out.width = box.size();
  Eigen::VectorXd z(static_cast<Eigen::Index>(box.size()));
  for (int c = 0; c < count; ++c) {
    for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = standard_normal(rng);
    const Eigen::VectorXd x = mom.mean + l * z;
    out.append(std::span<const double>(x.data(), static_cast<std::size_t>(x.size())));
  }
  return out;
}

void write_samples_csv(const std::string& path, const lattice::Box& box, const SampleSet& s) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path);
  for (std::size_t i = 0; i < box.size(); ++i) {
    if (i) out << ',';
    out << "x" << lattice::to_string(box.site(i));
  }
  out << '\n';
  for (std::size_t r = 0; r < s.rows(); ++r) {
    const auto row = s.row(r);
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << format_double(row[i]);
    }
    out << '\n';
  }
}

void write_samples_binary(const std::string& path, const SampleSet& s) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path);
  const std::uint64_t header[2] = {s.width, s.rows()};
  out.write("MLSS", 4);
  out.write(reinterpret_cast<const char*>(header), sizeof(header));
  out.write(reinterpret_cast<const char*>(s.data.data()),
            static_cast<std::streamsize>(s.data.size() * sizeof(double)));
}

SampleSet read_samples_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  char magic[4];
  std::uint64_t header[2];
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(header), sizeof(header));
  if (!in || std::memcmp(magic, "MLSS", 4) != 0) throw Error("not a sample file: " + path);
  SampleSet s;
  s.width = header[0];
  s.data.resize(header[0] * header[1]);
  in.read(reinterpret_cast<char*>(s.data.data()),
          static_cast<std::streamsize>(s.data.size() * sizeof(double)));
  if (!in) throw Error("truncated sample file: " + path);
  return s;
}

}  // namespace mlslab::spec
