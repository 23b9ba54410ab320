#pragma once

// Lattice geometry on Z^2: sites, finite regions, boundary conditions and
// finite-window configurations with an explicit exterior policy.

#include <algorithm>
#include <compare>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <variant>
#include <vector>

namespace kcmlab {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A lattice point (x, y); y is the "height".
struct Site {
  std::int64_t x = 0;
  std::int64_t y = 0;

  friend constexpr auto operator<=>(const Site&, const Site&) = default;
  friend constexpr Site operator+(Site a, Site b) { return {a.x + b.x, a.y + b.y}; }
  friend constexpr Site operator-(Site a, Site b) { return {a.x - b.x, a.y - b.y}; }
};

inline constexpr Site kOrigin{0, 0};
inline constexpr Site kE1{1, 0};
inline constexpr Site kE2{0, 1};

inline std::string to_string(Site s) {
  return "(" + std::to_string(s.x) + "," + std::to_string(s.y) + ")";
}

/// Sorted, duplicate-free list of sites (lexicographic on (x, y)).
using SiteSet = std::vector<Site>;

inline SiteSet make_site_set(std::vector<Site> sites) {
  std::sort(sites.begin(), sites.end());
  sites.erase(std::unique(sites.begin(), sites.end()), sites.end());
  return sites;
}

inline bool contains(const SiteSet& set, Site s) {
  return std::binary_search(set.begin(), set.end(), s);
}

inline bool is_subset(const SiteSet& small, const SiteSet& big) {
  return std::includes(big.begin(), big.end(), small.begin(), small.end());
}

inline SiteSet set_union(const SiteSet& a, const SiteSet& b) {
  SiteSet out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

inline SiteSet set_intersection(const SiteSet& a, const SiteSet& b) {
  SiteSet out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

inline SiteSet set_difference(const SiteSet& a, const SiteSet& b) {
  SiteSet out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

/// Finite nonempty set of sites with a dense index (sites sorted by (x, y),
/// so vertical columns are contiguous).
class Region {
 public:
  static constexpr std::int64_t npos = -1;

  explicit Region(std::vector<Site> sites) : sites_(make_site_set(std::move(sites))) {
    if (sites_.empty()) throw Error("region must be nonempty");
    build_index();
  }

  /// Rectangle [x0, x0+width) x [y0, y0+height).
  static Region rectangle(std::int64_t x0, std::int64_t y0, std::int64_t width,
                          std::int64_t height) {
    if (width <= 0 || height <= 0) throw Error("rectangle must have positive size");
    std::vector<Site> s;
    s.reserve(static_cast<std::size_t>(width * height));
    for (std::int64_t x = x0; x < x0 + width; ++x)
      for (std::int64_t y = y0; y < y0 + height; ++y) s.push_back({x, y});
    return Region(std::move(s));
  }

  /// Square [-r, r]^2.
  static Region square(std::int64_t radius) {
    return rectangle(-radius, -radius, 2 * radius + 1, 2 * radius + 1);
  }

  /// Union of vertical intervals: each entry is (x, y_lo, y_hi) inclusive.
  static Region columns(std::span<const std::tuple<std::int64_t, std::int64_t, std::int64_t>> cols) {
    std::vector<Site> s;
    for (auto [x, lo, hi] : cols)
      for (std::int64_t y = lo; y <= hi; ++y) s.push_back({x, y});
    return Region(std::move(s));
  }

  std::size_t size() const { return sites_.size(); }
  const SiteSet& sites() const { return sites_; }
  Site site(std::size_t i) const { return sites_[i]; }

  /// Dense index of s, or npos.
  std::int64_t index_of(Site s) const {
    if (s.x < xmin_ || s.x > xmax_ || s.y < ymin_ || s.y > ymax_) return npos;
    auto cell = static_cast<std::size_t>((s.x - xmin_) * height_ + (s.y - ymin_));
    return lookup_[cell];
  }
  bool contains(Site s) const { return index_of(s) != npos; }

  std::int64_t xmin() const { return xmin_; }
  std::int64_t xmax() const { return xmax_; }
  std::int64_t ymin() const { return ymin_; }
  std::int64_t ymax() const { return ymax_; }

  friend bool operator==(const Region& a, const Region& b) { return a.sites_ == b.sites_; }

 private:
  void build_index() {
    xmin_ = xmax_ = sites_.front().x;
    ymin_ = ymax_ = sites_.front().y;
    for (auto s : sites_) {
      xmin_ = std::min(xmin_, s.x);
      xmax_ = std::max(xmax_, s.x);
      ymin_ = std::min(ymin_, s.y);
      ymax_ = std::max(ymax_, s.y);
    }
    height_ = ymax_ - ymin_ + 1;
    const auto width = xmax_ - xmin_ + 1;
    constexpr std::int64_t kMaxCells = std::int64_t{1} << 28;
    if (width > kMaxCells / height_) throw Error("region bounding box too large to index");
    lookup_.assign(static_cast<std::size_t>(width * height_), npos);
    for (std::size_t i = 0; i < sites_.size(); ++i) {
      auto s = sites_[i];
      lookup_[static_cast<std::size_t>((s.x - xmin_) * height_ + (s.y - ymin_))] =
          static_cast<std::int64_t>(i);
    }
  }

  SiteSet sites_;
  std::int64_t xmin_ = 0, xmax_ = 0, ymin_ = 0, ymax_ = 0, height_ = 1;
  std::vector<std::int64_t> lookup_;
};

struct Boundaries {
  SiteSet parallel;       // {y not in R : y + e1 in R}
  SiteSet perpendicular;  // {y not in R : y + e2 or y - e2 in R}
  SiteSet all() const { return set_union(parallel, perpendicular); }
};

inline Boundaries boundaries(const Region& region) {
  std::vector<Site> par, perp;
  for (auto s : region.sites()) {
    if (!region.contains(s - kE1)) par.push_back(s - kE1);
    if (!region.contains(s + kE2)) perp.push_back(s + kE2);
    if (!region.contains(s - kE2)) perp.push_back(s - kE2);
  }
  return {make_site_set(std::move(par)), make_site_set(std::move(perp))};
}

/// Fixed 0/1 assignment on the boundary of a region. Sites lying in both
/// boundary views carry the perpendicular value.
class BoundaryCondition {
 public:
  /// tau == value on all of the boundary.
  static BoundaryCondition uniform(const Region& region, std::uint8_t value) {
    return split(region, value, value);
  }

  /// tau_par == par on the parallel view, tau_perp == perp on the perpendicular view.
  static BoundaryCondition split(const Region& region, std::uint8_t par, std::uint8_t perp) {
    return from_boundaries(boundaries(region), [&](Site s, bool in_perp) {
      (void)s;
      return in_perp ? perp : par;
    });
  }

  /// Explicit assignment; its support must be exactly the boundary of region.
  static BoundaryCondition from_assignment(const Region& region,
                                           std::vector<std::pair<Site, std::uint8_t>> values) {
    std::sort(values.begin(), values.end());
    auto b = boundaries(region);
    auto all = b.all();
    if (values.size() != all.size()) throw Error("boundary assignment support differs from region boundary");
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (values[i].first != all[i]) throw Error("boundary assignment support differs from region boundary");
      if (values[i].second > 1) throw Error("boundary values must be 0 or 1");
    }
    BoundaryCondition bc;
    bc.parallel_ = std::move(b.parallel);
    bc.perpendicular_ = std::move(b.perpendicular);
    bc.values_ = std::move(values);
    return bc;
  }

  std::optional<std::uint8_t> value_at(Site s) const {
    auto it = std::lower_bound(values_.begin(), values_.end(), s,
                               [](const auto& e, Site v) { return e.first < v; });
    if (it == values_.end() || it->first != s) return std::nullopt;
    return it->second;
  }

  const std::vector<std::pair<Site, std::uint8_t>>& assignment() const { return values_; }
  const SiteSet& parallel_sites() const { return parallel_; }
  const SiteSet& perpendicular_sites() const { return perpendicular_; }
  SiteSet support() const {
    SiteSet out;
    for (auto& [s, v] : values_) out.push_back(s);
    return out;
  }
  SiteSet zeros() const {
    SiteSet out;
    for (auto& [s, v] : values_)
      if (v == 0) out.push_back(s);
    return out;
  }
  /// True when the support equals the boundary of region.
  bool matches(const Region& region) const { return support() == boundaries(region).all(); }

  /// Copy with the listed sites set to value (sites must lie in the support).
  BoundaryCondition with_values(const SiteSet& sites, std::uint8_t value) const {
    BoundaryCondition out = *this;
    for (auto s : sites) {
      auto it = std::lower_bound(out.values_.begin(), out.values_.end(), s,
                                 [](const auto& e, Site v) { return e.first < v; });
      if (it == out.values_.end() || it->first != s) throw Error("site " + to_string(s) + " not on boundary");
      it->second = value;
    }
    return out;
  }

  friend bool operator==(const BoundaryCondition&, const BoundaryCondition&) = default;

 private:
  template <class F>
  static BoundaryCondition from_boundaries(Boundaries b, F value_of) {
    BoundaryCondition bc;
    for (auto s : b.all()) bc.values_.emplace_back(s, value_of(s, contains(b.perpendicular, s)));
    bc.parallel_ = std::move(b.parallel);
    bc.perpendicular_ = std::move(b.perpendicular);
    return bc;
  }

  SiteSet parallel_, perpendicular_;
  std::vector<std::pair<Site, std::uint8_t>> values_;
};

struct AllHealthy {
  friend bool operator==(AllHealthy, AllHealthy) { return true; }
};
struct AllInfected {
  friend bool operator==(AllInfected, AllInfected) { return true; }
};

/// What sites outside a finite window hold: all occupied, all empty, or a
/// boundary condition on the window's boundary and occupied beyond it.
using Exterior = std::variant<AllHealthy, AllInfected, BoundaryCondition>;

/// Value (1 = occupied/healthy, 0 = empty/infected) of an exterior site.
inline std::uint8_t exterior_value(const Exterior& ext, Site s) {
  if (std::holds_alternative<AllHealthy>(ext)) return 1;
  if (std::holds_alternative<AllInfected>(ext)) return 0;
  return std::get<BoundaryCondition>(ext).value_at(s).value_or(1);
}

/// 0/1 field on a region (1 = occupied, 0 = empty) plus exterior policy.
struct Configuration {
  Region region;
  std::vector<std::uint8_t> bits;
  Exterior exterior = AllHealthy{};

  Configuration(Region r, std::vector<std::uint8_t> b, Exterior ext = AllHealthy{})
      : region(std::move(r)), bits(std::move(b)), exterior(std::move(ext)) {
    if (bits.size() != region.size()) throw Error("configuration bits do not match region size");
    for (auto v : bits)
      if (v > 1) throw Error("configuration values must be 0 or 1");
    if (auto* bc = std::get_if<BoundaryCondition>(&exterior); bc && !bc->matches(region))
      throw Error("boundary condition does not match region");
  }

  static Configuration filled(Region r, std::uint8_t value, Exterior ext = AllHealthy{}) {
    auto n = r.size();
    return Configuration(std::move(r), std::vector<std::uint8_t>(n, value), std::move(ext));
  }

  std::uint8_t value_at(Site s) const {
    auto i = region.index_of(s);
    if (i != Region::npos) return bits[static_cast<std::size_t>(i)];
    return exterior_value(exterior, s);
  }

  /// Y(omega): the empty sites of the window.
  SiteSet empty_sites() const {
    SiteSet out;
    for (std::size_t i = 0; i < bits.size(); ++i)
      if (bits[i] == 0) out.push_back(region.site(i));
    return out;
  }

  Configuration flipped(Site s) const {
    auto i = region.index_of(s);
    if (i == Region::npos) throw Error("flip outside region at " + to_string(s));
    Configuration out = *this;
    out.bits[static_cast<std::size_t>(i)] ^= 1;
    return out;
  }

  friend bool operator==(const Configuration&, const Configuration&) = default;
};

}  // namespace kcmlab
