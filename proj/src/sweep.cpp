#include "mlslab/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

namespace mlslab::sweep {

namespace {

std::size_t checked_size(std::size_t n, std::size_t m, std::size_t budget) {
  std::size_t size = 1;
  for (std::size_t a = 0; a < m; ++a) {
    if (size > budget / n + 1)
      throw BudgetError(std::numeric_limits<std::size_t>::max(), budget,
                        "gridded function would exceed the budget of " + std::to_string(budget));
    size *= n;
  }
  if (size > budget)
    throw BudgetError(size, budget, "gridded function needs " + std::to_string(size) +
                      " grid points, above the budget of " + std::to_string(budget) +
                      "; use a smaller box or a coarser grid");
  return size;
}

// Normalised trapezoid weights of the conditional law at box site t with the
// neighbour spins given by `z` (one entry per neighbours() slot).
void conditional_weights(const spec::SpinModel& model, const std::vector<double>& nodes,
                         const std::vector<double>& tw, std::span<const double> z,
                         std::vector<double>& w) {
  const std::size_t n = nodes.size();
  w.resize(n);
  double emin = std::numeric_limits<double>::infinity();
  for (std::size_t q = 0; q < n; ++q) {
    double e = model.phase(nodes[q]);
    for (double zj : z) e += model.J * model.potential(nodes[q], zj);
    w[q] = e;
    emin = std::min(emin, e);
  }
  double total = 0.0;
  for (std::size_t q = 0; q < n; ++q) {
    w[q] = tw[q] * std::exp(emin - w[q]);
    total += w[q];
  }
  for (double& v : w) v /= total;
}

std::vector<double> box_reference(const lattice::Box& box, const spec::Boundary& bd) {
  std::vector<double> cfg(box.size());
  for (std::size_t i = 0; i < box.size(); ++i) cfg[i] = bd.value(box.site(i));
  return cfg;
}

// Integrates out a single support site t.
GriddedFunction integrate_site(const GriddedFunction& f, std::size_t t,
                               const spec::SpinModel& model) {
  const auto& box = f.box();
  const auto& S = f.support();
  const auto& grid = f.grid();
  const auto nodes = grid.nodes();
  const auto tw = grid.trapezoid_weights();
  const std::size_t n = nodes.size();

  const auto nb_sites = lattice::neighbors(box.site(t));
  const auto& nb_idx = box.neighbor_indices(t);
  std::vector<std::size_t> inside;
  std::vector<double> fixed_z;  // boundary spins of outside neighbours
  for (std::size_t l = 0; l < nb_idx.size(); ++l) {
    if (nb_idx[l] >= 0) inside.push_back(static_cast<std::size_t>(nb_idx[l]));
    else fixed_z.push_back(f.boundary().value(nb_sites[l]));
  }

  std::vector<std::size_t> out_support;
  for (std::size_t a : S)
    if (a != t) out_support.push_back(a);
  // Without interaction the weights ignore the neighbours.
  if (model.J != 0.0)
    for (std::size_t a : inside) out_support.push_back(a);
  std::sort(out_support.begin(), out_support.end());
  out_support.erase(std::unique(out_support.begin(), out_support.end()), out_support.end());
  const std::size_t m_out = out_support.size();
  const std::size_t out_size = checked_size(n, m_out, f.budget());

  // Input strides, row-major.
  std::vector<std::size_t> in_stride(S.size());
  {
    std::size_t st = 1;
    for (std::size_t a = S.size(); a-- > 0;) {
      in_stride[a] = st;
      st *= n;
    }
  }
  const std::size_t t_pos = static_cast<std::size_t>(std::find(S.begin(), S.end(), t) - S.begin());
  const std::size_t t_stride = in_stride[t_pos];

  std::vector<std::size_t> stride_from_out(m_out, 0);
  std::vector<long> slot(m_out, -1);
  for (std::size_t a = 0; a < m_out; ++a) {
    auto it = std::find(S.begin(), S.end(), out_support[a]);
    if (it != S.end()) stride_from_out[a] = in_stride[static_cast<std::size_t>(it - S.begin())];
    auto jt = std::find(inside.begin(), inside.end(), out_support[a]);
    if (jt != inside.end()) slot[a] = jt - inside.begin();
  }

  // Weight table keyed by the grid indices of the in-box neighbours when it
  // is small enough, otherwise weights are rebuilt per output point.
  if (model.J == 0.0) inside.clear();
  const std::size_t m_in = inside.size();
  std::size_t keys = 1;
  bool cached = true;
  for (std::size_t l = 0; l < m_in; ++l) {
    keys *= n;
    if (keys * n > 4'000'000) {
      cached = false;
      break;
    }
  }
  std::vector<double> table;
  if (cached) {
    table.resize(keys * n);
    parallel_for(keys, [&](std::size_t begin, std::size_t end) {
      std::vector<double> z(fixed_z), w;
      z.resize(fixed_z.size() + m_in);
      for (std::size_t key = begin; key < end; ++key) {
        std::size_t rem = key;
        for (std::size_t l = m_in; l-- > 0;) {
          z[fixed_z.size() + l] = nodes[rem % n];
          rem /= n;
        }
        conditional_weights(model, nodes, tw, z, w);
        std::copy(w.begin(), w.end(), table.begin() + static_cast<long>(key * n));
      }
    });
  }

  std::vector<double> out(out_size);
  const auto& in = f.values();
  parallel_for(out_size, [&](std::size_t begin, std::size_t end) {
    std::vector<std::size_t> idx(m_out);
    std::vector<std::size_t> nbr_idx(m_in);
    std::vector<double> z(fixed_z), w;
    z.resize(fixed_z.size() + m_in);
    for (std::size_t o = begin; o < end; ++o) {
      std::size_t rem = o;
      std::size_t base = 0;
      for (std::size_t a = m_out; a-- > 0;) {
        idx[a] = rem % n;
        rem /= n;
        base += idx[a] * stride_from_out[a];
        if (slot[a] >= 0) nbr_idx[static_cast<std::size_t>(slot[a])] = idx[a];
      }
      const double* wp;
      if (cached) {
        std::size_t key = 0;
        for (std::size_t l = 0; l < m_in; ++l) key = key * n + nbr_idx[l];
        wp = table.data() + key * n;
      } else {
        for (std::size_t l = 0; l < m_in; ++l) z[fixed_z.size() + l] = nodes[nbr_idx[l]];
        conditional_weights(model, nodes, tw, z, w);
        wp = w.data();
      }
      double acc = 0.0;
      for (std::size_t q = 0; q < n; ++q) acc += wp[q] * in[base + q * t_stride];
      out[o] = acc;
    }
  });
  return GriddedFunction(box, std::move(out_support), grid, f.boundary(), std::move(out),
                         f.budget());
}

}  // namespace

UniformGrid default_sweep_grid(const spec::SpinModel& model) {
  return {model.grid.half_width, 33};
}

// ---------------------------------------------------------------------------
// GriddedFunction
// ---------------------------------------------------------------------------

GriddedFunction::GriddedFunction(const lattice::Box& box, std::vector<std::size_t> support,
                                 UniformGrid grid, spec::Boundary boundary,
                                 std::vector<double> values, std::size_t budget)
    : box_(&box),
      support_(std::move(support)),
      grid_(grid),
      boundary_(std::move(boundary)),
      values_(std::move(values)),
      budget_(budget) {
  grid_.validate();
  if (!std::is_sorted(support_.begin(), support_.end()) ||
      std::adjacent_find(support_.begin(), support_.end()) != support_.end())
    throw Error("support must be sorted without repeats");
  for (std::size_t a : support_)
    if (a >= box.size()) throw Error("support site outside the box");
  const std::size_t size =
      checked_size(static_cast<std::size_t>(grid_.points), support_.size(), budget_);
  if (values_.size() != size) throw Error("value tensor does not match the support and grid");
}

GriddedFunction GriddedFunction::constant(const lattice::Box& box, UniformGrid grid,
                                          spec::Boundary boundary, double value) {
  return GriddedFunction(box, {}, grid, std::move(boundary), {value});
}

GriddedFunction GriddedFunction::tabulate(const lattice::Box& box, std::vector<std::size_t> support,
                                          UniformGrid grid, spec::Boundary boundary,
                                          const spec::ConfigFunction& f, std::size_t budget) {
  std::sort(support.begin(), support.end());
  const std::size_t n = static_cast<std::size_t>(grid.points);
  const std::size_t size = checked_size(n, support.size(), budget);
  const auto nodes = grid.nodes();
  const auto ref = box_reference(box, boundary);
  std::vector<double> values(size);
  parallel_for(size, [&](std::size_t begin, std::size_t end) {
    auto cfg = ref;
    for (std::size_t o = begin; o < end; ++o) {
      std::size_t rem = o;
      for (std::size_t a = support.size(); a-- > 0;) {
        cfg[support[a]] = nodes[rem % n];
        rem /= n;
      }
      values[o] = f(cfg);
    }
  });
  return GriddedFunction(box, std::move(support), grid, std::move(boundary), std::move(values),
                         budget);
}

lattice::LatticeRegion GriddedFunction::region() const {
  std::vector<lattice::Site> sites;
  for (std::size_t a : support_) sites.push_back(box_->site(a));
  return lattice::LatticeRegion(std::move(sites));
}

double GriddedFunction::evaluate(std::span<const double> config) const {
  const std::size_t m = support_.size();
  if (m == 0) return values_[0];
  const std::size_t n = static_cast<std::size_t>(grid_.points);
  const double h = grid_.spacing();
  std::vector<std::size_t> lo(m);
  std::vector<double> frac(m);
  for (std::size_t a = 0; a < m; ++a) {
    const double x = config[support_[a]];
    const double u = (x + grid_.half_width) / h;
    if (!(u >= -1e-9 && u <= static_cast<double>(n - 1) + 1e-9))
      throw Error("evaluation outside the spin grid at site " +
                  lattice::to_string(box_->site(support_[a])));
    std::size_t i = static_cast<std::size_t>(std::clamp(std::floor(u), 0.0, static_cast<double>(n - 2)));
    lo[a] = i;
    frac[a] = std::clamp(u - static_cast<double>(i), 0.0, 1.0);
  }
  double acc = 0.0;
  for (std::size_t corner = 0; corner < (std::size_t{1} << m); ++corner) {
    double w = 1.0;
    std::size_t off = 0;
    for (std::size_t a = 0; a < m; ++a) {
      const bool up = (corner >> (m - 1 - a)) & 1;
      w *= up ? frac[a] : 1.0 - frac[a];
      off = off * n + lo[a] + (up ? 1 : 0);
    }
    if (w != 0.0) acc += w * values_[off];
  }
  return acc;
}

std::vector<double> GriddedFunction::reference_config() const {
  return box_reference(*box_, boundary_);
}

double GriddedFunction::at_reference() const { return evaluate(reference_config()); }

namespace {
constexpr char kMagic[4] = {'G', 'L', 'G', 'F'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ofstream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
T get(std::ifstream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw Error("truncated gridded-function file");
  return v;
}
}  // namespace

// Layout: magic, version, d, site count, site coordinates (int32), then per
// site the grid (half width, points), the boundary fill and its overrides,
// the value count and the float64 payload.
void GriddedFunction::write_binary(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path);
  out.write(kMagic, 4);
  put(out, kVersion);
  put(out, static_cast<std::uint32_t>(box_->dim()));
  put(out, static_cast<std::uint32_t>(support_.size()));
  for (std::size_t a : support_)
    for (int c : box_->site(a).coords) put(out, static_cast<std::int32_t>(c));
  for (std::size_t a = 0; a < support_.size(); ++a) {
    put(out, grid_.half_width);
    put(out, static_cast<std::uint32_t>(grid_.points));
  }
  put(out, boundary_.fill());
  put(out, static_cast<std::uint32_t>(boundary_.overrides().size()));
  for (const auto& [site, v] : boundary_.overrides()) {
    for (int c : site.coords) put(out, static_cast<std::int32_t>(c));
    put(out, v);
  }
  put(out, static_cast<std::uint64_t>(values_.size()));
  out.write(reinterpret_cast<const char*>(values_.data()),
            static_cast<std::streamsize>(values_.size() * sizeof(double)));
  if (!out) throw Error("write failed for " + path);
}

GriddedFunction GriddedFunction::read_binary(const std::string& path, const lattice::Box& box) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) throw Error(path + " is not a gridded function");
  if (get<std::uint32_t>(in) != kVersion) throw Error("unsupported gridded-function version");
  const int d = static_cast<int>(get<std::uint32_t>(in));
  if (d != box.dim()) throw Error("gridded function dimension does not match the box");
  const std::size_t m = get<std::uint32_t>(in);
  auto read_site = [&] {
    lattice::Site s;
    for (int c = 0; c < d; ++c) s.coords.push_back(get<std::int32_t>(in));
    return s;
  };
  std::vector<std::size_t> support;
  for (std::size_t a = 0; a < m; ++a) {
    const long idx = box.index_of(read_site());
    if (idx < 0) throw Error("gridded function support lies outside the box");
    support.push_back(static_cast<std::size_t>(idx));
  }
  UniformGrid grid;
  for (std::size_t a = 0; a < m; ++a) {
    const double hw = get<double>(in);
    const int pts = static_cast<int>(get<std::uint32_t>(in));
    if (a > 0 && (hw != grid.half_width || pts != grid.points))
      throw Error("mixed per-site grids are not supported");
    grid = {hw, pts};
  }
  spec::Boundary bd(get<double>(in));
  const std::size_t nover = get<std::uint32_t>(in);
  for (std::size_t k = 0; k < nover; ++k) {
    auto s = read_site();
    bd.set(s, get<double>(in));
  }
  const std::size_t count = get<std::uint64_t>(in);
  std::vector<double> values(count);
  in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(count * sizeof(double)));
  if (!in) throw Error("truncated gridded-function file");
  return GriddedFunction(box, std::move(support), grid, std::move(bd), std::move(values));
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

GriddedFunction conditional_expectation_shell(const GriddedFunction& f,
                                              const std::vector<std::size_t>& shell,
                                              const spec::SpinModel& model) {
  const auto& box = f.box();
  for (std::size_t a : shell)
    for (long j : box.neighbor_indices(a))
      if (j >= 0 && std::binary_search(shell.begin(), shell.end(), static_cast<std::size_t>(j)))
        throw Error("shell contains adjacent sites " + lattice::to_string(box.site(a)) + " and " +
                    lattice::to_string(box.site(static_cast<std::size_t>(j))));
  GriddedFunction cur = f;
  for (std::size_t t : shell)
    if (std::binary_search(cur.support().begin(), cur.support().end(), t))
      cur = integrate_site(cur, t, model);
  return cur;
}

SweepResult apply_B(const GriddedFunction& f, int n, int s, const spec::SpinModel& model) {
  if (s < 0 || n < s) throw Error("apply_B needs 0 <= s <= n");
  const auto& box = f.box();
  std::vector<std::size_t> allowed = box.shell(s);
  if (s >= 1) {
    const auto& prev = box.shell(s - 1);
    allowed.insert(allowed.end(), prev.begin(), prev.end());
  }
  for (std::size_t a : f.support())
    if (std::find(allowed.begin(), allowed.end(), a) == allowed.end())
      throw Error("support of f must lie in Lambda_{s-1} u Lambda_s; site " +
                  lattice::to_string(box.site(a)) + " does not");

  SweepResult res{{}, f};
  res.trace.s = s;
  res.trace.n = n;
  res.trace.initial_value = f.at_reference();
  double prev = res.trace.initial_value;
  for (int k = s; k <= n; ++k) {
    res.result = conditional_expectation_shell(res.result, box.shell(k), model);
    TraceStep step;
    step.k = k;
    step.support_size = res.result.support().size();
    step.value = res.result.at_reference();
    step.increment = std::abs(step.value - prev);
    prev = step.value;
    res.trace.steps.push_back(step);
  }
  return res;
}

ConvergenceDiagnostic convergence_diagnostic(const SweepTrace& trace, const MeanEstimate& mu) {
  if (trace.steps.size() < 6) throw Error("convergence diagnostic needs at least 6 steps");
  ConvergenceDiagnostic d;
  std::vector<double> ks, logs;
  for (const auto& st : trace.steps) {
    if (!std::isfinite(st.increment)) throw Error("non-finite sweep increment");
    if (st.increment < kDeviationFloor) break;
    ks.push_back(st.k);
    logs.push_back(std::log(st.increment));
  }
  for (std::size_t i = 3; i < ks.size(); ++i)
    if (!(logs[i] < logs[i - 1])) d.strictly_decreasing = false;
  if (ks.size() < 3) {
    d.below_floor = true;
  } else {
    const std::size_t half = ks.size() / 2;
    const std::size_t from = std::min(half, ks.size() - 3);
    const auto fit = fit_line(std::span(ks).subspan(from), std::span(logs).subspan(from));
    d.rate = std::exp(2.0 * fit.slope);
  }
  d.final_deviation = std::abs(trace.steps.back().value - mu.mean);
  d.limit_ok = d.final_deviation < 3.0 * mu.stderr_ ||
               (d.below_floor && d.final_deviation < kDeviationFloor);
  return d;
}

void write_trace_csv(std::ostream& out, const SweepTrace& trace) {
  out << "k,deviation,support_size,value\n";
  for (const auto& st : trace.steps)
    out << st.k << ',' << format_double(st.increment) << ',' << st.support_size << ','
        << format_double(st.value) << '\n';
}

// ---------------------------------------------------------------------------
// Gradient sweeping-out
// ---------------------------------------------------------------------------

namespace {

// Product quadrature of g over the sites in `sites` (pairwise non-adjacent),
// each under its conditional law given the rest of `cfg`. `cfg` is restored
// on return.
class ShellQuadrature {
 public:
  ShellQuadrature(const spec::SpinModel& model, const lattice::Box& box,
                  const spec::Boundary& bd, UniformGrid grid)
      : model_(model), box_(box), bd_(bd), nodes_(grid.nodes()), tw_(grid.trapezoid_weights()) {}

  double expect(std::vector<double>& cfg, const std::vector<std::size_t>& sites,
                const std::function<double(std::vector<double>&)>& g) {
    weights_.assign(sites.size(), {});
    for (std::size_t a = 0; a < sites.size(); ++a) {
      std::vector<double> z;
      const auto nb = lattice::neighbors(box_.site(sites[a]));
      const auto& idx = box_.neighbor_indices(sites[a]);
      for (std::size_t l = 0; l < idx.size(); ++l)
        z.push_back(idx[l] >= 0 ? cfg[static_cast<std::size_t>(idx[l])] : bd_.value(nb[l]));
      conditional_weights(model_, nodes_, tw_, z, weights_[a]);
    }
    std::vector<double> saved;
    for (std::size_t a : sites) saved.push_back(cfg[a]);
    const double v = recurse(cfg, sites, 0, 1.0, g);
    for (std::size_t a = 0; a < sites.size(); ++a) cfg[sites[a]] = saved[a];
    return v;
  }

 private:
  double recurse(std::vector<double>& cfg, const std::vector<std::size_t>& sites, std::size_t a,
                 double w, const std::function<double(std::vector<double>&)>& g) {
    if (a == sites.size()) return w * g(cfg);
    double acc = 0.0;
    for (std::size_t q = 0; q < nodes_.size(); ++q) {
      const double wq = weights_[a][q];
      if (wq < 1e-300) continue;
      cfg[sites[a]] = nodes_[q];
      acc += recurse(cfg, sites, a + 1, w * wq, g);
    }
    return acc;
  }

  const spec::SpinModel& model_;
  const lattice::Box& box_;
  const spec::Boundary& bd_;
  std::vector<double> nodes_, tw_;
  std::vector<std::vector<double>> weights_;
};

double central(const spec::ConfigFunction& f, std::vector<double>& cfg, std::size_t i, double h) {
  const double x = cfg[i];
  cfg[i] = x + h;
  const double up = f(cfg);
  cfg[i] = x - h;
  const double dn = f(cfg);
  cfg[i] = x;
  return (up - dn) / (2.0 * h);
}

}  // namespace

GradientSweepReport check_gradient_sweep(const spec::SpinModel& model, const lattice::Box& box,
                                         const spec::ConfigFunction& f,
                                         const std::vector<std::size_t>& support, int k,
                                         int boundary_samples, std::uint64_t seed, double c,
                                         double c_hat) {
  if (k < 1) throw Error("check_gradient_sweep needs k >= 1");
  if (boundary_samples < 1) throw Error("check_gradient_sweep needs at least one sample");
  const spec::Boundary bd(model.boundary_value);
  const auto samples = spec::sample_block_gibbs(model, box, bd, boundary_samples, seed, 200, 5);
  const auto& lam_k = box.shell(k);
  const auto& lam_k1 = box.shell(k + 1);
  std::vector<std::size_t> integrate;
  for (std::size_t a : lam_k)
    if (std::binary_search(support.begin(), support.end(), a)) integrate.push_back(a);
  const double h = model.grid.spacing();

  GradientSweepReport rep;
  rep.eta_proof = 2.0 * c * 2.0 * model.d * c_hat * std::pow(model.potential.mixed_bound(), 2) *
                  model.J * model.J;

  struct Target {
    std::size_t i;
    std::vector<std::size_t> near;  // neighbours of i in Lambda_k
  };
  std::vector<Target> targets;
  for (std::size_t i : lam_k1) {
    Target t{i, {}};
    for (long j : box.neighbor_indices(i))
      if (j >= 0 && std::binary_search(lam_k.begin(), lam_k.end(), static_cast<std::size_t>(j)))
        t.near.push_back(static_cast<std::size_t>(j));
    bool touches = std::binary_search(support.begin(), support.end(), i);
    for (std::size_t j : t.near) touches = touches || std::binary_search(support.begin(), support.end(), j);
    if (touches) targets.push_back(std::move(t));
  }

  const UniformGrid qgrid{model.grid.half_width, 129};
  const std::size_t rows = samples.rows();
  std::vector<std::vector<GradientSample>> per(rows);
  parallel_for(rows, [&](std::size_t begin, std::size_t end) {
    ShellQuadrature quad(model, box, bd, qgrid);
    for (std::size_t r = begin; r < end; ++r) {
      std::vector<double> cfg(samples.row(r).begin(), samples.row(r).end());
      for (const auto& t : targets) {
        GradientSample gs;
        gs.sample = r;
        gs.site = t.i;
        const double xi = cfg[t.i];
        auto plain = [&](std::vector<double>& x) { return f(x); };
        cfg[t.i] = xi + h;
        const double up = quad.expect(cfg, integrate, plain);
        cfg[t.i] = xi - h;
        const double dn = quad.expect(cfg, integrate, plain);
        cfg[t.i] = xi;
        const double grad = (up - dn) / (2.0 * h);
        gs.lhs = grad * grad;
        gs.own = quad.expect(cfg, integrate, [&](std::vector<double>& x) {
          const double g = central(f, x, t.i, h);
          return g * g;
        });
        gs.neighbours = quad.expect(cfg, integrate, [&](std::vector<double>& x) {
          double s = 0.0;
          for (std::size_t j : t.near) {
            const double g = central(f, x, j, h);
            s += g * g;
          }
          return s;
        });
        per[r].push_back(gs);
      }
    }
  });
  for (auto& v : per)
    for (auto& gs : v) {
      if (gs.neighbours > 0.0)
        rep.eta_min = std::max(rep.eta_min, (gs.lhs - 2.0 * gs.own) / gs.neighbours);
      rep.detail.push_back(gs);
    }
  return rep;
}

// ---------------------------------------------------------------------------
// Entropy decay
// ---------------------------------------------------------------------------

double gradient_bound(const GriddedFunction& F, const orlicz::HFunction& h) {
  const std::size_t m = F.support().size();
  if (m == 0) return 0.0;
  const std::size_t n = static_cast<std::size_t>(F.grid().points);
  const double step = F.grid().spacing();
  const auto& v = F.values();
  std::vector<std::size_t> stride(m);
  std::size_t st = 1;
  for (std::size_t a = m; a-- > 0;) {
    stride[a] = st;
    st *= n;
  }
  double best = 0.0;
  for (std::size_t o = 0; o < v.size(); ++o) {
    double s = 0.0;
    for (std::size_t a = 0; a < m; ++a) {
      const std::size_t i = (o / stride[a]) % n;
      double d;
      if (i == 0) d = (v[o + stride[a]] - v[o]) / step;
      else if (i + 1 == n) d = (v[o] - v[o - stride[a]]) / step;
      else d = (v[o + stride[a]] - v[o - stride[a]]) / (2.0 * step);
      s += h(d);
    }
    best = std::max(best, s);
  }
  return best;
}

EntropyDecayReport check_entropy_decay(const spec::SpinModel& model, const GriddedFunction& F,
                                       int s, int k_max, std::span<const double> lambdas,
                                       const orlicz::HFunction& h, double c, int samples,
                                       std::uint64_t seed, std::optional<double> a) {
  if (k_max < s) throw Error("check_entropy_decay needs k_max >= s");
  EntropyDecayReport rep;
  const double measured = gradient_bound(F, h);
  if (a && *a < measured * (1.0 - 1e-12))
    throw Error("sum_i H(grad_i F) exceeds the supplied a on the grid");
  rep.a = a ? *a : measured;

  const auto& box = F.box();
  const auto chain = spec::sample_block_gibbs(model, box, F.boundary(), samples, seed);

  // B^{k,s} F for every k, shared across lambda.
  std::vector<GriddedFunction> hk;
  {
    auto run = apply_B(F, s, s, model);
    hk.push_back(run.result);
    for (int k = s + 1; k <= k_max; ++k)
      hk.push_back(conditional_expectation_shell(hk.back(), box.shell(k), model));
  }

  for (double lam : lambdas) {
    const double level = rep.a * c * orlicz::omega(h, 0.5 * lam);
    EntropyDecayFit fit;
    fit.lambda = lam;
    std::vector<double> ks, logs;
    double prev = std::numeric_limits<double>::infinity();
    for (int k = s; k <= k_max; ++k) {
      const auto& cur = hk[static_cast<std::size_t>(k - s)];
      double mean = 0.0;
      for (double v : cur.values()) mean += v;
      mean /= static_cast<double>(cur.values().size());
      auto g = cur, gl = cur;
      for (std::size_t o = 0; o < cur.values().size(); ++o) {
        const double y = lam * (cur.values()[o] - mean);
        g.values()[o] = std::exp(y);
        gl.values()[o] = y * std::exp(y);
      }
      const auto& next = box.shell(k + 1);
      const auto G1 = conditional_expectation_shell(g, next, model);
      const auto G2 = conditional_expectation_shell(gl, next, model);
      auto R = G1;
      if (lam == 0.0) std::fill(R.values().begin(), R.values().end(), 0.0);
      else for (std::size_t o = 0; o < R.values().size(); ++o) {
        const double g1 = G1.values()[o];
        R.values()[o] = std::max(0.0, (G2.values()[o] - g1 * std::log(g1)) / g1);
      }
      std::vector<double> series(chain.rows());
      for (std::size_t r = 0; r < chain.rows(); ++r) series[r] = R.evaluate(chain.row(r));
      EntropyDecayRow row;
      row.lambda = lam;
      row.k = k;
      row.term = batch_means(series);
      row.level = level;
      rep.rows.push_back(row);
      if (row.term.mean > prev * (1.0 + 1e-12) + 1e-300) fit.nonincreasing = false;
      prev = row.term.mean;
      if (row.term.mean > 0.0) {
        ks.push_back(k - s);
        logs.push_back(std::log(row.term.mean));
      }
    }
    if (ks.size() >= 2) {
      const auto lf = fit_line(ks, logs);
      fit.C2 = std::exp(lf.slope);
    }
    // Smallest C1 with term_k <= level C1 C2^{k-s} for all k.
    for (const auto& row : rep.rows) {
      if (row.lambda != lam || level <= 0.0) continue;
      const double scale = level * std::pow(fit.C2, row.k - s);
      if (scale > 0.0) fit.C1 = std::max(fit.C1, row.term.mean / scale);
    }
    rep.fits.push_back(fit);
  }
  return rep;
}

}  // namespace mlslab::sweep
