#pragma once

// Nearest-neighbour geometry of Z^d: sites, regions, outer boundaries,
// the shells Lambda_k = ~Lambda_{k-1} grown from the origin, and the finite
// L-infinity boxes the numerics run on.

#include <compare>
#include <cstddef>
#include <map>
#include <mutex>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace mlslab::lattice {

struct Site {
  std::vector<int> coords;

  int dim() const { return static_cast<int>(coords.size()); }
  int l1() const;
  auto operator<=>(const Site&) const = default;
  bool operator==(const Site&) const = default;
};

Site origin(int d);
std::string to_string(const Site& s);
/// Lattice (L1) distance.
int distance(const Site& a, const Site& b);

/// Sorted, duplicate-free set of sites of one dimension.
class LatticeRegion {
 public:
  LatticeRegion() = default;
  explicit LatticeRegion(std::vector<Site> sites);

  std::size_t size() const { return sites_.size(); }
  bool empty() const { return sites_.empty(); }
  bool contains(const Site& s) const;
  const std::vector<Site>& sites() const { return sites_; }
  auto begin() const { return sites_.begin(); }
  auto end() const { return sites_.end(); }
  const Site& operator[](std::size_t i) const { return sites_[i]; }

  LatticeRegion unite(const LatticeRegion& other) const;
  LatticeRegion intersect(const LatticeRegion& other) const;
  LatticeRegion minus(const LatticeRegion& other) const;
  bool operator==(const LatticeRegion&) const = default;

  nlohmann::json to_json() const;
  static LatticeRegion from_json(const nlohmann::json& j);

 private:
  std::vector<Site> sites_;
};

/// The 2d sites at distance 1.
LatticeRegion neighbors(const Site& i);
/// Sites outside `region` adjacent to some site of it.
LatticeRegion outer_boundary(const LatticeRegion& region);
/// True when no two members are neighbours.
bool pairwise_separated(const LatticeRegion& region);

/// Number of sites of Z^d in Lambda_k before truncation.
double shell_cardinality(int d, int k);

struct Shell {
  int k = 0;
  LatticeRegion region;
};

/// Lambda_k by literal iteration of the outer boundary from {0}, then
/// intersected with `box`. Throws Error if the separation or cardinality
/// invariants fail.
Shell shell(int k, const LatticeRegion& box);

/// (Gamma_0, Gamma_1): even and odd L1-parity sites of the box.
std::pair<LatticeRegion, LatticeRegion> parity_classes(const LatticeRegion& box);

/// Centered L-infinity box of radius L with sites in lexicographic order,
/// precomputed neighbour tables and memoized shells (by index).
class Box {
 public:
  Box(int d, int radius);

  int dim() const { return d_; }
  int radius() const { return radius_; }
  std::size_t size() const { return sites_.size(); }
  const Site& site(std::size_t idx) const { return sites_[idx]; }
  const LatticeRegion& region() const { return region_; }
  /// -1 when the site lies outside the box.
  long index_of(const Site& s) const;
  std::size_t origin_index() const { return origin_; }
  /// Neighbour indices in the order of `neighbors()`; -1 for sites outside.
  const std::vector<long>& neighbor_indices(std::size_t idx) const { return nbr_[idx]; }
  /// Sorted indices of the box sites in Lambda_k.
  const std::vector<std::size_t>& shell(int k) const;
  const std::vector<std::size_t>& parity(int cls) const { return parity_[cls & 1]; }

 private:
  int d_;
  int radius_;
  std::vector<Site> sites_;
  LatticeRegion region_;
  std::vector<std::vector<long>> nbr_;
  std::size_t origin_ = 0;
  std::vector<std::size_t> parity_[2];
  mutable std::mutex memo_mutex_;
  mutable std::map<int, std::vector<std::size_t>> memo_;
};

}  // namespace mlslab::lattice
