#include "mlslab/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "mlslab/common.hpp"

namespace mlslab::lattice {

int Site::l1() const {
  int s = 0;
  for (int c : coords) s += std::abs(c);
  return s;
}

Site origin(int d) {
  if (d < 1) throw Error("lattice dimension must be >= 1");
  return Site{std::vector<int>(static_cast<std::size_t>(d), 0)};
}

std::string to_string(const Site& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.coords.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s.coords[i]);
  }
  return out + ")";
}

int distance(const Site& a, const Site& b) {
  if (a.dim() != b.dim()) throw Error("sites of different dimension");
  int s = 0;
  for (std::size_t i = 0; i < a.coords.size(); ++i) s += std::abs(a.coords[i] - b.coords[i]);
  return s;
}

LatticeRegion::LatticeRegion(std::vector<Site> sites) : sites_(std::move(sites)) {
  std::sort(sites_.begin(), sites_.end());
  sites_.erase(std::unique(sites_.begin(), sites_.end()), sites_.end());
  for (const auto& s : sites_)
    if (s.dim() != sites_.front().dim()) throw Error("region mixes dimensions");
}

bool LatticeRegion::contains(const Site& s) const {
  return std::binary_search(sites_.begin(), sites_.end(), s);
}

LatticeRegion LatticeRegion::unite(const LatticeRegion& other) const {
  std::vector<Site> out;
  std::set_union(begin(), end(), other.begin(), other.end(), std::back_inserter(out));
  return LatticeRegion(std::move(out));
}

LatticeRegion LatticeRegion::intersect(const LatticeRegion& other) const {
  std::vector<Site> out;
  std::set_intersection(begin(), end(), other.begin(), other.end(), std::back_inserter(out));
  return LatticeRegion(std::move(out));
}

LatticeRegion LatticeRegion::minus(const LatticeRegion& other) const {
  std::vector<Site> out;
  std::set_difference(begin(), end(), other.begin(), other.end(), std::back_inserter(out));
  return LatticeRegion(std::move(out));
}

nlohmann::json LatticeRegion::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : sites_) arr.push_back(s.coords);
  return arr;
}

LatticeRegion LatticeRegion::from_json(const nlohmann::json& j) {
  std::vector<Site> sites;
  for (const auto& e : j) sites.push_back(Site{e.get<std::vector<int>>()});
  return LatticeRegion(std::move(sites));
}

LatticeRegion neighbors(const Site& i) {
  std::vector<Site> out;
  for (std::size_t a = 0; a < i.coords.size(); ++a) {
    for (int step : {-1, 1}) {
      Site j = i;
      j.coords[a] += step;
      out.push_back(std::move(j));
    }
  }
  return LatticeRegion(std::move(out));
}

LatticeRegion outer_boundary(const LatticeRegion& region) {
  std::vector<Site> out;
  for (const auto& i : region)
    for (const auto& j : neighbors(i))
      if (!region.contains(j)) out.push_back(j);
  return LatticeRegion(std::move(out));
}

bool pairwise_separated(const LatticeRegion& region) {
  for (const auto& i : region)
    for (const auto& j : neighbors(i))
      if (region.contains(j)) return false;
  return true;
}

double shell_cardinality(int d, int k) {
  // count[m] = number of sites of Z^dim with L1 norm exactly m.
  std::vector<double> count(static_cast<std::size_t>(k) + 1, 0.0);
  count[0] = 1.0;
  for (int dim = 1; dim <= d; ++dim) {
    std::vector<double> next(count.size(), 0.0);
    for (int m = 0; m <= k; ++m)
      for (int c = 0; c <= m; ++c) next[m] += count[m - c] * (c == 0 ? 1.0 : 2.0);
    count = std::move(next);
  }
  double total = 0.0;
  for (int m = k % 2; m <= k; m += 2) total += count[m];
  return total;
}

Shell shell(int k, const LatticeRegion& box) {
  if (k < 0) throw Error("shell index must be >= 0");
  if (box.empty()) throw Error("shell needs a nonempty box");
  const int d = box[0].dim();
  LatticeRegion current(std::vector<Site>{origin(d)});
  for (int step = 1; step <= k; ++step) current = outer_boundary(current);
  if (!pairwise_separated(current)) throw Error("shell members are adjacent");
  if (static_cast<double>(current.size()) > std::pow(2.0 * d, k))
    throw Error("shell exceeds the (2d)^k cardinality bound");
  return Shell{k, current.intersect(box)};
}

std::pair<LatticeRegion, LatticeRegion> parity_classes(const LatticeRegion& box) {
  if (box.empty() || !box.contains(origin(box[0].dim())))
    throw Error("parity classes need a box containing the origin");
  std::vector<Site> even, odd;
  for (const auto& s : box) (s.l1() % 2 == 0 ? even : odd).push_back(s);
  return {LatticeRegion(std::move(even)), LatticeRegion(std::move(odd))};
}

Box::Box(int d, int radius) : d_(d), radius_(radius) {
  if (d < 1) throw Error("lattice dimension must be >= 1");
  if (radius < 0) throw Error("box radius must be >= 0");
  const int side = 2 * radius + 1;
  std::size_t total = 1;
  for (int a = 0; a < d; ++a) total *= static_cast<std::size_t>(side);
  sites_.reserve(total);
  for (std::size_t idx = 0; idx < total; ++idx) {
    Site s{std::vector<int>(static_cast<std::size_t>(d))};
    std::size_t rest = idx;
    for (int a = d - 1; a >= 0; --a) {
      s.coords[a] = static_cast<int>(rest % side) - radius;
      rest /= side;
    }
    sites_.push_back(std::move(s));
  }
  region_ = LatticeRegion(sites_);
  nbr_.resize(total);
  for (std::size_t idx = 0; idx < total; ++idx) {
    for (const auto& j : neighbors(sites_[idx])) nbr_[idx].push_back(index_of(j));
    parity_[sites_[idx].l1() % 2].push_back(idx);
  }
  origin_ = static_cast<std::size_t>(index_of(origin(d)));
}

long Box::index_of(const Site& s) const {
  if (s.dim() != d_) return -1;
  const long side = 2 * radius_ + 1;
  long idx = 0;
  for (int c : s.coords) {
    if (c < -radius_ || c > radius_) return -1;
    idx = idx * side + (c + radius_);
  }
  return idx;
}

const std::vector<std::size_t>& Box::shell(int k) const {
  if (k < 0) throw Error("shell index must be >= 0");
  // Past the corner every site of matching parity is inside Lambda_k.
  if (k >= d_ * radius_) return parity_[k & 1];
  std::lock_guard<std::mutex> lock(memo_mutex_);
  auto it = memo_.find(k);
  if (it != memo_.end()) return it->second;
  std::vector<std::size_t> out;
  for (std::size_t idx = 0; idx < sites_.size(); ++idx) {
    const int m = sites_[idx].l1();
    if (m <= k && (k - m) % 2 == 0) out.push_back(idx);
  }
  return memo_.emplace(k, std::move(out)).first->second;
}

}  // namespace mlslab::lattice
