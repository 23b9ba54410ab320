#pragma once

// Droplets of the Duarte model on the column domain V = C_1 u ... u C_N:
// geometry, the healing algorithm and its arrow profile Phi, the events B1
// and B2, block coarse-graining, and monitoring of KCM trajectories.
//
// State vectors live on Vbar = V u d_perp(V), the caps of each column holding
// tau_perp. tau_par is the left wall and stays healthy throughout.

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kcmlab/bootstrap.hpp"
#include "kcmlab/kcm.hpp"

namespace kcmlab {

struct DuarteScales {
  double q = 0.0;
  double epsilon = 0.0;
  std::uint64_t ell = 0;
  std::uint64_t N = 0;
  std::uint64_t n1 = 0, n2 = 0;
  std::uint64_t m = 0;  // block size 4 n1 n2
  std::uint64_t M = 0;  // block count N / m
  bool overflow = false;  // some quantity does not fit in 64 bits
  std::vector<std::string> warnings;

  bool valid() const { return ell > 0 && N > 0 && n1 > 0 && n2 > 0 && m > 0 && !overflow; }
};

namespace detail {

/// floor(x) forgiving relative rounding error 1e-9 (1/0.2^6 must give 15625).
inline std::optional<std::uint64_t> tolerant_floor(double x) {
  if (!(x > 0.0)) return 0;
  const double f = std::floor(x + 1e-9 * std::max(1.0, x));
  if (!std::isfinite(f) || f >= 18446744073709551616.0) return std::nullopt;
  return static_cast<std::uint64_t>(f);
}

inline void finish_blocks(DuarteScales& s) {
  const auto m = static_cast<unsigned __int128>(4) * s.n1 * s.n2;
  if (m > std::numeric_limits<std::uint64_t>::max()) {
    s.overflow = true;
    s.warnings.push_back("m = 4 n1 n2 exceeds 2^64");
    return;
  }
  s.m = static_cast<std::uint64_t>(m);
  s.M = s.m ? s.N / s.m : 0;
}

}  // namespace detail

/// ell = floor(log(1/q) / (eps q)), N = floor(exp(eps (log q)^2 / q)),
/// n1 = floor(eps (log q)^2 / (2q)), n2 = floor(q^-6), m = 4 n1 n2, M = N / m.
inline DuarteScales asymptotic_scales(double q, double epsilon) {
  if (!(q > 0.0 && q < 1.0)) throw Error("q must lie in (0, 1)");
  if (!(epsilon > 0.0 && epsilon < 1.0)) throw Error("epsilon must lie in (0, 1)");
  DuarteScales s;
  s.q = q;
  s.epsilon = epsilon;
  const double lq = std::log(q);
  auto take = [&](const char* name, double value, std::uint64_t& out) {
    if (auto v = detail::tolerant_floor(value)) {
      out = *v;
    } else {
      s.overflow = true;
      s.warnings.push_back(std::string(name) + " exceeds 2^64 and cannot be materialized");
    }
  };
  take("ell", -lq / (epsilon * q), s.ell);
  take("N", std::exp(epsilon * lq * lq / q), s.N);
  take("n1", epsilon * lq * lq / (2.0 * q), s.n1);
  take("n2", std::pow(q, -6.0), s.n2);
  if (!s.overflow) detail::finish_blocks(s);
  if (s.ell == 0) s.warnings.push_back("ell = 0: no droplet length");
  if (s.n1 == 0) s.warnings.push_back("n1 = 0");
  if (s.m > 0 && s.N % s.m != 0) s.warnings.push_back("m does not divide N");
  return s;
}

/// Free scales for desk-size runs.
inline DuarteScales toy_scales(std::uint64_t ell, std::uint64_t N, std::uint64_t n1, std::uint64_t n2) {
  DuarteScales s;
  s.ell = ell;
  s.N = N;
  s.n1 = n1;
  s.n2 = n2;
  detail::finish_blocks(s);
  return s;
}

inline constexpr std::size_t kMaxGeometrySites = std::size_t{1} << 22;

/// Columns C_i = {(i, j) : |j| < N^2 - (i-1)N} - N e1, i = 1..N. Column i
/// sits at x = i - N, so the last one passes through the origin.
class ColumnGeometry {
 public:
  explicit ColumnGeometry(std::int64_t N) : N_(N) {
    if (N < 1) throw Error("N must be >= 1");
    if (N > 1000) throw Error("N = " + std::to_string(N) + " exceeds the memory cap");
    const auto total = static_cast<std::size_t>(N * N * N + N * N + N);  // |Vbar|
    if (total > kMaxGeometrySites)
      throw Error("geometry with N = " + std::to_string(N) + " needs " + std::to_string(total) +
                  " sites, above the memory cap");
    std::vector<Site> v, vbar;
    for (std::int64_t i = 1; i <= N; ++i) {
      const auto x = column_x(i), h = half_height(i);
      for (std::int64_t y = -h + 1; y < h; ++y) v.push_back({x, y});
      vbar.push_back({x, -h});
      vbar.push_back({x, h});
    }
    vbar.insert(vbar.end(), v.begin(), v.end());
    v_ = Region(std::move(v));
    vbar_ = Region(std::move(vbar));
    column_.resize(vbar_.size());
    cap_.resize(vbar_.size());
    begin_.assign(static_cast<std::size_t>(N) + 2, 0);
    for (std::size_t a = 0; a < vbar_.size(); ++a) {
      auto s = vbar_.site(a);
      column_[a] = static_cast<int>(s.x + N);
      cap_[a] = std::abs(s.y) == half_height(s.x + N);
    }
    // Sites are sorted by (x, y), so each capped column is a contiguous block.
    for (std::size_t a = 0; a < vbar_.size(); ++a) begin_[static_cast<std::size_t>(column_[a]) + 1] = a + 1;
    v_to_vbar_.resize(v_.size());
    for (std::size_t a = 0; a < v_.size(); ++a) v_to_vbar_[a] = static_cast<std::size_t>(vbar_.index_of(v_.site(a)));
  }

  std::int64_t N() const { return N_; }
  std::int64_t column_x(std::int64_t i) const { return i - N_; }
  /// Column i holds the sites with |y| < half_height(i).
  std::int64_t half_height(std::int64_t i) const { return N_ * N_ - (i - 1) * N_; }
  std::int64_t column_size(std::int64_t i) const { return 2 * half_height(i) - 1; }

  const Region& v() const { return v_; }
  const Region& vbar() const { return vbar_; }
  /// Column (1-based) of a Vbar index.
  int column_of(std::size_t a) const { return column_[a]; }
  bool is_cap(std::size_t a) const { return cap_[a] != 0; }
  /// Vbar indices of the capped column i form [first, last).
  std::size_t first(int i) const { return begin_[static_cast<std::size_t>(i)]; }
  std::size_t last(int i) const { return begin_[static_cast<std::size_t>(i) + 1]; }
  std::size_t vbar_index(std::size_t v_index) const { return v_to_vbar_[v_index]; }

  SiteSet column(int i) const {
    SiteSet out;
    for (auto a = first(i); a < last(i); ++a)
      if (!is_cap(a)) out.push_back(vbar_.site(a));
    return out;
  }
  SiteSet capped_column(int i) const {
    return SiteSet(vbar_.sites().begin() + static_cast<std::ptrdiff_t>(first(i)),
                   vbar_.sites().begin() + static_cast<std::ptrdiff_t>(last(i)));
  }
  /// V_{i,j} = C_i u ... u C_j.
  Region sub_region(int i, int j) const {
    std::vector<std::tuple<std::int64_t, std::int64_t, std::int64_t>> cols;
    for (int k = i; k <= j; ++k) cols.emplace_back(column_x(k), -half_height(k) + 1, half_height(k) - 1);
    return Region::columns(cols);
  }

 private:
  std::int64_t N_;
  Region v_{std::vector<Site>{kOrigin}}, vbar_{std::vector<Site>{kOrigin}};
  std::vector<int> column_;
  std::vector<std::uint8_t> cap_;
  std::vector<std::size_t> begin_;
  std::vector<std::size_t> v_to_vbar_;
};

inline ColumnGeometry build_geometry(std::int64_t N) { return ColumnGeometry(N); }

struct Droplet {
  int k = 0;
  int xi = 0;
  int range() const { return k - xi; }
};

struct ArrowProfile {
  std::vector<std::uint8_t> up;   // up[k-1] != 0 iff Phi_k is an up arrow
  std::vector<Droplet> droplets;  // increasing k
  bool xi_search_consistent = true;  // binary search for xi agreed with the linear scan
  bool restriction_identity = true;  // psi^(j) = psi^(0) off the droplets, every j
  bool healing_only = true;
  std::vector<std::uint8_t> initial, final;  // psi^(0) and psi^(K) on Vbar

  int columns() const { return static_cast<int>(up.size()); }
  bool is_up(int k) const { return up[static_cast<std::size_t>(k - 1)] != 0; }
  int n_up() const { return static_cast<int>(std::count(up.begin(), up.end(), 1)); }
  std::string phi() const {
    std::string s;
    for (auto u : up) s += u ? 'U' : 'D';
    return s;
  }
  std::optional<Droplet> droplet(int k) const {
    for (auto& d : droplets)
      if (d.k == k) return d;
    return std::nullopt;
  }
  int range(int k) const {
    auto d = droplet(k);
    return d ? d->range() : 0;
  }
  int max_range() const {
    int r = 0;
    for (auto& d : droplets) r = std::max(r, d.range());
    return r;
  }
};

/// Runs the healing algorithm for one geometry and droplet length; reusable
/// across configurations.
class DropletAlgorithm {
 public:
  DropletAlgorithm(const ColumnGeometry& geometry, std::int64_t ell)
      : geo_(&geometry), ell_(ell), table_(duarte(), geometry.vbar(), AllHealthy{}) {
    if (ell < 1) throw Error("ell must be >= 1");
    active_.resize(geometry.vbar().size());
    for (std::size_t a = 0; a < active_.size(); ++a) active_[a] = !geometry.is_cap(a);
  }

  const ColumnGeometry& geometry() const { return *geo_; }
  std::int64_t ell() const { return ell_; }
  const ConstraintTable& table() const { return table_; }

  /// psi^(0) on Vbar from omega on V: tau_perp = 0 on the caps.
  std::vector<std::uint8_t> initial_state(std::span<const std::uint8_t> omega) const {
    if (omega.size() != geo_->v().size()) throw Error("configuration does not live on V");
    std::vector<std::uint8_t> psi(geo_->vbar().size(), 0);
    for (std::size_t a = 0; a < omega.size(); ++a) psi[geo_->vbar_index(a)] = omega[a];
    return psi;
  }

  /// Whether C_k holds a vertical run of at least ell infectable sites after
  /// deleting every empty of psi in the capped columns 1..xi-1.
  bool has_interval(const std::vector<std::uint8_t>& psi, int k, int xi = 1) const {
    auto scratch = psi;
    std::fill(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(geo_->first(xi)), 1);
    closure_in_place(table_, scratch, &active_);
    std::int64_t run = 0;
    for (auto a = geo_->first(k); a < geo_->last(k); ++a) {
      if (geo_->is_cap(a)) continue;
      run = scratch[a] == 0 ? run + 1 : 0;
      if (run >= ell_) return true;
    }
    return false;
  }

  /// Infected closure [Y(omega) n V]_V^tau of a state, on Vbar (caps keep tau).
  std::vector<std::uint8_t> closure(const std::vector<std::uint8_t>& psi) const {
    auto out = psi;
    closure_in_place(table_, out, &active_);
    return out;
  }

  /// Phi for the first max_columns columns (all when 0).
  ArrowProfile run(std::span<const std::uint8_t> omega, int max_columns = 0) const {
    const int K = max_columns > 0 ? std::min<int>(max_columns, static_cast<int>(geo_->N())) : static_cast<int>(geo_->N());
    ArrowProfile out;
    out.initial = initial_state(omega);
    auto psi = out.initial;
    std::vector<std::uint8_t> in_droplet(psi.size(), 0);
    out.up.assign(static_cast<std::size_t>(K), 0);
    for (int k = 1; k <= K; ++k) {
      if (!has_interval(psi, k)) continue;
      // The property holds at xi = 1 and only weakens as xi grows.
      int lo = 1, hi = k;
      while (lo < hi) {
        int mid = (lo + hi + 1) / 2;
        if (has_interval(psi, k, mid)) lo = mid;
        else hi = mid - 1;
      }
      int linear = 1;
      for (int xi = 2; xi <= k; ++xi)
        if (has_interval(psi, k, xi)) linear = xi;
      if (linear != lo) out.xi_search_consistent = false;
      const int xi = linear;
      auto before = psi;
      for (auto a = geo_->first(xi); a < geo_->last(k); ++a) {
        psi[a] = 1;
        in_droplet[a] = 1;
      }
      for (std::size_t a = 0; a < psi.size(); ++a) {
        if (psi[a] < before[a]) out.healing_only = false;
        if (!in_droplet[a] && psi[a] != out.initial[a]) out.restriction_identity = false;
      }
      // A droplet that heals nothing leaves psi unchanged: no arrow.
      if (psi == before) continue;
      out.up[static_cast<std::size_t>(k - 1)] = 1;
      out.droplets.push_back({k, xi});
    }
    out.final = std::move(psi);
    return out;
  }

  ArrowProfile run(const Configuration& omega, int max_columns = 0) const {
    if (omega.region.sites() != geo_->v().sites()) throw Error("configuration does not live on V");
    return run(std::span<const std::uint8_t>(omega.bits), max_columns);
  }

  /// x (a V index) is psi-unconstrained: some rule X + x is entirely infected.
  bool unconstrained(const std::vector<std::uint8_t>& psi, std::size_t v_index) const {
    return table_.satisfied(geo_->vbar_index(v_index), psi);
  }

 private:
  const ColumnGeometry* geo_;
  std::int64_t ell_;
  ConstraintTable table_;
  std::vector<std::uint8_t> active_;
};

inline ArrowProfile run_droplet_algorithm(const Configuration& omega, const ColumnGeometry& geometry,
                                          std::int64_t ell, int max_columns = 0) {
  return DropletAlgorithm(geometry, ell).run(omega, max_columns);
}

/// B1(n): at least n up arrows.
inline bool event_B1(const ArrowProfile& profile, std::int64_t n) { return profile.n_up() >= n; }

struct B2Witness {
  int i = 0, j = 0;
  std::vector<Site> path;
};

/// B2(n): some i < j with j - i >= n - 1, all of Phi_i..Phi_j down, and a
/// Duarte path from C_i to C_j inside [Y(omega) n V_ij] with tau_par = 1,
/// tau_perp = 0. Returns the first witness in (i, j) order.
inline std::optional<B2Witness> event_B2(const ColumnGeometry& geometry, std::span<const std::uint8_t> omega,
                                         const ArrowProfile& profile, std::int64_t n) {
  if (omega.size() != geometry.v().size()) throw Error("configuration does not live on V");
  const int K = profile.columns();
  const std::int64_t span = std::max<std::int64_t>(n - 1, 1);
  for (int i = 1; i <= K; ++i) {
    if (profile.is_up(i)) continue;
    int jmax = i;
    while (jmax < K && !profile.is_up(jmax + 1)) ++jmax;
    if (jmax - i < span) continue;
    // Infection never moves against e1, so one closure on V_{i,jmax}
    // restricts to the closure on every V_{i,j}.
    const auto region = geometry.sub_region(i, jmax);
    SiteSet empties;
    for (std::size_t a = 0; a < omega.size(); ++a) {
      auto s = geometry.v().site(a);
      if (omega[a] == 0 && region.contains(s)) empties.push_back(s);
    }
    const auto closed = closure_region(duarte(), region, BoundaryCondition::split(region, 1, 0), empties).closed;
    for (auto j = i + static_cast<int>(span); j <= jmax; ++j)
      if (auto path = duarte_path_exists(closed, geometry.column_x(i), geometry.column_x(j))) return B2Witness{i, j, *path};
  }
  return std::nullopt;
}

struct CoarseProfile {
  std::vector<std::uint8_t> eta;
  bool padded = false;  // the block size does not divide the column count
  int ones() const { return static_cast<int>(std::count(eta.begin(), eta.end(), 1)); }
  friend bool operator==(const CoarseProfile&, const CoarseProfile&) = default;
};

/// eta_b = 1 iff some column of block b (columns (b-1)m+1 .. bm) is up.
inline CoarseProfile eta_project(const ArrowProfile& profile, std::uint64_t m) {
  if (m < 1) throw Error("block size must be >= 1");
  const auto n = profile.up.size();
  CoarseProfile out;
  out.eta.assign((n + m - 1) / m, 0);
  out.padded = n % m != 0;
  for (std::size_t k = 0; k < n; ++k)
    if (profile.up[k]) out.eta[k / m] = 1;
  return out;
}

struct CoarsePathReport {
  bool starts_empty = false, ends_facilitated = false;  // property (1)
  bool within_budget = true;                            // property (2)
  bool east_legal = true;                               // property (3)
  std::size_t steps = 0;                                // after deduplication
  std::vector<std::string> violations;
  bool ok() const { return starts_empty && ends_facilitated && within_budget && east_legal; }
};

/// Checks a coarse path against: (1) starts all zero and ends with eta_M = 1;
/// (2) at most n1 ones throughout; (3) single East-legal flips.
inline CoarsePathReport validate_coarse_path(std::vector<std::vector<std::uint8_t>> path, std::uint64_t n1) {
  CoarsePathReport r;
  path.erase(std::unique(path.begin(), path.end()), path.end());
  if (path.empty() || path.front().empty()) {
    r.violations.push_back("empty path");
    r.within_budget = r.east_legal = false;
    return r;
  }
  const auto M = path.front().size();
  r.steps = path.size() - 1;
  r.starts_empty = std::count(path.front().begin(), path.front().end(), 1) == 0;
  if (!r.starts_empty) r.violations.push_back("(1) first profile is not all zero");
  r.ends_facilitated = path.back().size() == M && path.back().back() == 1;
  if (!r.ends_facilitated) r.violations.push_back("(1) last profile has eta_M = 0");
  for (std::size_t s = 0; s < path.size(); ++s) {
    if (path[s].size() != M) {
      r.east_legal = false;
      r.violations.push_back("profile " + std::to_string(s) + " has the wrong length");
      continue;
    }
    auto ones = static_cast<std::uint64_t>(std::count(path[s].begin(), path[s].end(), 1));
    if (ones > n1) {
      r.within_budget = false;
      r.violations.push_back("(2) profile " + std::to_string(s) + " has " + std::to_string(ones) + " ones");
    }
    if (s == 0 || path[s - 1].size() != M) continue;
    std::vector<std::size_t> diff;
    for (std::size_t i = 0; i < M; ++i)
      if (path[s][i] != path[s - 1][i]) diff.push_back(i);
    if (diff.size() != 1) {
      r.east_legal = false;
      r.violations.push_back("(3) step " + std::to_string(s) + " flips " + std::to_string(diff.size()) + " coordinates");
    } else if (diff[0] > 0 && path[s - 1][diff[0] - 1] != 1) {
      r.east_legal = false;
      r.violations.push_back("(3) step " + std::to_string(s) + " flips coordinate " + std::to_string(diff[0] + 1) +
                             " with its left neighbour at 0");
    }
  }
  return r;
}

struct MonitorReport {
  std::optional<double> b1_entry, b2_entry;  // first grid time inside B1(n1), B2(n2)
  int max_up = 0;
  int max_range = 0;
  std::size_t samples = 0;
  double resolution = 0.0;  // grid spacing
};

struct MonitorParams {
  double q = 0.5;
  std::int64_t ell = 1;
  std::int64_t n1 = 1, n2 = 1;
  double t_max = 0.0;
  double interval = 1.0;
  std::uint64_t seed = 0, trial = 0;
};

/// Duarte KCM on V (tau_par = 1, tau_perp = 0 frozen) from a stationary start,
/// with Phi and B2 evaluated at times 0, dt, 2dt, ... <= t_max. Event times are
/// known only up to the grid spacing.
inline MonitorReport monitor_trajectory(const ColumnGeometry& geometry, const MonitorParams& p) {
  if (!(p.interval > 0.0)) throw Error("sample interval must be positive");
  MonitorReport r;
  r.resolution = p.interval;
  if (!(p.t_max > 0.0)) return r;
  const DropletAlgorithm algo(geometry, p.ell);
  const auto& v = geometry.v();
  const KcmModel model(duarte(), v, Exterior{BoundaryCondition::split(v, 1, 0)});
  KcmChain chain(model, p.q, p.seed, p.trial);
  for (std::size_t step = 0;; ++step) {
    const double t = static_cast<double>(step) * p.interval;
    if (t > p.t_max) break;
    chain.run_until(t);
    const auto profile = algo.run(chain.state());
    ++r.samples;
    r.max_up = std::max(r.max_up, profile.n_up());
    r.max_range = std::max(r.max_range, profile.max_range());
    if (!r.b1_entry && event_B1(profile, p.n1)) r.b1_entry = t;
    if (!r.b2_entry && event_B2(geometry, chain.state(), profile, p.n2)) r.b2_entry = t;
  }
  return r;
}

/// Omega ~ mu on V (empty w.p. q).
inline std::vector<std::uint8_t> sample_omega(const ColumnGeometry& geometry, double q, RandomStream& rng) {
  return sample_bits(geometry.v().size(), q, rng);
}

inline nlohmann::json droplet_json(const ArrowProfile& profile, std::int64_t b1_n, std::int64_t b2_n,
                                   const std::optional<B2Witness>& witness) {
  nlohmann::json drops = nlohmann::json::array();
  for (auto& d : profile.droplets) drops.push_back({{"k", d.k}, {"xi", d.xi}, {"range", d.range()}});
  nlohmann::json w = nullptr;
  if (witness) {
    nlohmann::json path = nlohmann::json::array();
    for (auto s : witness->path) path.push_back({s.x, s.y});
    w = {{"i", witness->i}, {"j", witness->j}, {"path", path}};
  }
  return {{"phi", profile.phi()},
          {"droplets", drops},
          {"b1", {{"n", b1_n}, {"hit", event_B1(profile, b1_n)}}},
          {"b2", {{"n", b2_n}, {"hit", witness.has_value()}, {"witness", w}}}};
}

}  // namespace kcmlab
