#pragma once

// U-bootstrap percolation: synchronous steps, closures in finite volume with a
// boundary condition and on Z^2, infectability, Duarte paths and the median
// infection time of the origin.

#include <algorithm>
#include <deque>
#include <limits>
#include <optional>
#include <vector>

#include "kcmlab/constraints.hpp"
#include "kcmlab/parallel.hpp"
#include "kcmlab/rng.hpp"

namespace kcmlab {

struct ClosureResult {
  SiteSet closed;
  std::size_t rounds = 0;
  bool touched_cap = false;
};

/// One synchronous bootstrap step inside `region`, evaluated straight from
/// coordinates: adds every region site x with X + x inside Y or the exterior's
/// infected sites for some rule X.
inline SiteSet synchronous_step(const UpdateFamily& family, const Region& region, const Exterior& exterior,
                                const SiteSet& infected) {
  std::vector<std::uint8_t> bits(region.size(), 1);
  for (auto s : infected) {
    auto i = region.index_of(s);
    if (i == Region::npos) throw Error("infected site " + to_string(s) + " outside region");
    bits[static_cast<std::size_t>(i)] = 0;
  }
  const Configuration cfg(region, std::move(bits), exterior);
  SiteSet out = infected;
  for (std::size_t i = 0; i < region.size(); ++i)
    if (cfg.bits[i] == 1 && constraint_satisfied(cfg, family, region.site(i))) out.push_back(region.site(i));
  return make_site_set(std::move(out));
}

inline SiteSet synchronous_step(const UpdateFamily& family, const Region& region, const BoundaryCondition& tau,
                                const SiteSet& infected) {
  if (!tau.matches(region)) throw Error("boundary condition does not match region");
  return synchronous_step(family, region, Exterior{tau}, infected);
}

struct InPlaceClosure {
  std::size_t rounds = 0;
  std::optional<std::size_t> target_round;  // round at which the target got infected
};

/// Work-queue closure on a compiled table; `healthy` (1 = healthy) is updated
/// in place. Sites with active[i] == 0 keep their value. Rounds follow the
/// synchronous schedule exactly: a round's infections are decided on the
/// previous round's state and applied together. With a target, stops as soon
/// as the target is infected.
inline InPlaceClosure closure_in_place(const ConstraintTable& table, std::vector<std::uint8_t>& healthy,
                                       const std::vector<std::uint8_t>* active = nullptr,
                                       std::optional<std::size_t> target = std::nullopt) {
  const auto n = table.size();
  InPlaceClosure res;
  if (target && healthy[*target] == 0) {
    res.target_round = 0;
    return res;
  }
  auto may_change = [&](std::size_t i) { return healthy[i] == 1 && (!active || (*active)[i] != 0); };

  std::vector<std::uint32_t> candidates, fresh;
  std::vector<std::uint32_t> stamp(n, 0);
  for (std::size_t i = 0; i < n; ++i)
    if (may_change(i)) candidates.push_back(static_cast<std::uint32_t>(i));

  std::uint32_t round = 0;
  while (!candidates.empty()) {
    ++round;
    fresh.clear();
    for (auto i : candidates)
      if (may_change(i) && table.satisfied(i, healthy)) fresh.push_back(i);
    if (fresh.empty()) break;
    for (auto i : fresh) healthy[i] = 0;
    res.rounds = round;
    if (target && healthy[*target] == 0) {
      res.target_round = round;
      return res;
    }
    candidates.clear();
    for (auto j : fresh)
      for (auto i : table.dependents(j))
        if (stamp[i] != round && may_change(i)) {
          stamp[i] = round;
          candidates.push_back(i);
        }
  }
  return res;
}

namespace detail {

inline std::vector<std::uint8_t> healthy_mask(const Region& region, const SiteSet& infected) {
  std::vector<std::uint8_t> healthy(region.size(), 1);
  for (auto s : infected) {
    auto i = region.index_of(s);
    if (i == Region::npos) throw Error("infected site " + to_string(s) + " outside region");
    healthy[static_cast<std::size_t>(i)] = 0;
  }
  return healthy;
}

inline SiteSet infected_sites(const Region& region, const std::vector<std::uint8_t>& healthy) {
  SiteSet out;
  for (std::size_t i = 0; i < healthy.size(); ++i)
    if (healthy[i] == 0) out.push_back(region.site(i));
  return out;
}

}  // namespace detail

/// Closure of Y inside `region` with the given exterior ([Y]_region^tau when
/// the exterior is a boundary condition).
inline ClosureResult closure_region(const UpdateFamily& family, const Region& region, const Exterior& exterior,
                                    const SiteSet& infected) {
  const ConstraintTable table(family, region, exterior);
  auto healthy = detail::healthy_mask(region, infected);
  auto res = closure_in_place(table, healthy);
  return {detail::infected_sites(region, healthy), res.rounds, false};
}

inline ClosureResult closure_region(const UpdateFamily& family, const Region& region, const BoundaryCondition& tau,
                                    const SiteSet& infected) {
  if (!tau.matches(region)) throw Error("boundary condition does not match region");
  return closure_region(family, region, Exterior{tau}, infected);
}

/// Approximates the closure of a finite Y on Z^2 inside the square [-r, r]^2,
/// growing r up to `cap`. touched_cap reports that the closure came within
/// rule range of the window edge at the cap (the result is then a lower bound).
inline ClosureResult closure_free(const UpdateFamily& family, const SiteSet& infected, std::int64_t cap) {
  if (infected.empty()) return {};
  std::int64_t radius_y = 0;
  for (auto s : infected) radius_y = std::max({radius_y, s.x < 0 ? -s.x : s.x, s.y < 0 ? -s.y : s.y});
  if (cap < radius_y) throw Error("cap smaller than the bounding radius of the seed");
  const auto reach = std::max<std::int64_t>(family.range(), 1);
  std::int64_t radius = std::min(cap, std::max<std::int64_t>(radius_y + 2 * reach + 2, 8));
  for (;;) {
    const auto window = Region::square(radius);
    auto res = closure_region(family, window, Exterior{AllHealthy{}}, infected);
    bool touched = false;
    for (auto s : res.closed)
      if (std::max(s.x < 0 ? -s.x : s.x, s.y < 0 ? -s.y : s.y) > radius - reach) {
        touched = true;
        break;
      }
    if (!touched) return res;
    if (radius == cap) {
      res.touched_cap = true;
      return res;
    }
    radius = std::min(cap, 2 * radius);
  }
}

/// True iff every site of I is infected in the closure of the configuration's
/// empty set under tau; boundary sites of I count as infected iff tau is 0 there.
inline bool is_infectable(const UpdateFamily& family, const SiteSet& interval, const Configuration& config,
                          const BoundaryCondition& tau) {
  const auto& region = config.region;
  if (!tau.matches(region)) throw Error("boundary condition does not match region");
  for (auto s : interval)
    if (!region.contains(s) && !tau.value_at(s)) throw Error("site " + to_string(s) + " outside region and boundary");
  const auto closed = closure_region(family, region, tau, config.empty_sites()).closed;
  for (auto s : interval) {
    if (region.contains(s)) {
      if (!contains(closed, s)) return false;
    } else if (*tau.value_at(s) != 0) {
      return false;
    }
  }
  return true;
}

/// Breadth-first search for a Duarte path (steps +e1, +e2, -e2) inside `closed`
/// from any site with x == from_x to any site with x == to_x. Returns a
/// shortest witness, sources and neighbours visited in a fixed order.
inline std::optional<std::vector<Site>> duarte_path_exists(const SiteSet& closed, std::int64_t from_x,
                                                           std::int64_t to_x) {
  if (from_x > to_x || closed.empty()) return std::nullopt;
  std::vector<std::int64_t> parent(closed.size(), -2);
  std::deque<std::size_t> queue;
  auto idx = [&](Site s) -> std::int64_t {
    auto it = std::lower_bound(closed.begin(), closed.end(), s);
    return (it != closed.end() && *it == s) ? it - closed.begin() : -1;
  };
  auto first = std::lower_bound(closed.begin(), closed.end(), Site{from_x, std::numeric_limits<std::int64_t>::min()});
  for (auto it = first; it != closed.end() && it->x == from_x; ++it) {
    auto i = static_cast<std::size_t>(it - closed.begin());
    parent[i] = -1;
    queue.push_back(i);
  }
  const Site steps[3] = {kE1, kE2, Site{0, -1}};
  while (!queue.empty()) {
    auto i = queue.front();
    queue.pop_front();
    if (closed[i].x == to_x) {
      std::vector<Site> path;
      for (std::int64_t k = static_cast<std::int64_t>(i); k >= 0; k = parent[static_cast<std::size_t>(k)])
        path.push_back(closed[static_cast<std::size_t>(k)]);
      std::reverse(path.begin(), path.end());
      return path;
    }
    for (auto d : steps) {
      auto nb = closed[i] + d;
      if (nb.x > to_x) continue;
      auto j = idx(nb);
      if (j >= 0 && parent[static_cast<std::size_t>(j)] == -2) {
        parent[static_cast<std::size_t>(j)] = static_cast<std::int64_t>(i);
        queue.push_back(static_cast<std::size_t>(j));
      }
    }
  }
  return std::nullopt;
}

/// Infection time of the origin in one trial; nullopt = censored (the box
/// reached a fixed point without infecting the origin).
using InfectionTime = std::optional<std::uint64_t>;

struct BootstrapTimeSummary {
  std::vector<InfectionTime> samples;  // in trial order
  InfectionTime median, lower_quartile, upper_quartile;
  std::size_t censored = 0;
};

namespace detail {

/// Order statistic at floor(p * (n - 1)) with censored values sorted last.
inline InfectionTime censored_quantile(std::vector<InfectionTime> v, double p) {
  std::sort(v.begin(), v.end(), [](const InfectionTime& a, const InfectionTime& b) {
    if (!a) return false;
    if (!b) return true;
    return *a < *b;
  });
  return v[static_cast<std::size_t>(p * static_cast<double>(v.size() - 1))];
}

}  // namespace detail

/// Median over trials of the first bootstrap infection time of the origin,
/// initial infection Bernoulli(q) on [-box, box]^2, healthy exterior.
inline BootstrapTimeSummary median_bootstrap_time(const UpdateFamily& family, double q, std::int64_t box,
                                                  std::size_t trials, std::uint64_t seed, std::uint64_t stream = 0) {
  if (!(q > 0.0 && q < 1.0)) throw Error("q must lie in (0, 1)");
  if (trials < 1 || box < 1) throw Error("need trials >= 1 and box >= 1");
  const auto region = Region::square(box);
  const ConstraintTable table(family, region, AllHealthy{});
  const auto origin = static_cast<std::size_t>(region.index_of(kOrigin));
  BootstrapTimeSummary out;
  out.samples.resize(trials);
  parallel_for(trials, [&](std::size_t t) {
    RandomStream rng(seed, stream, t);
    auto healthy = sample_bits(region.size(), q, rng);
    auto res = closure_in_place(table, healthy, nullptr, origin);
    out.samples[t] = res.target_round ? InfectionTime(*res.target_round) : std::nullopt;
  });
  for (auto& s : out.samples)
    if (!s) ++out.censored;
  out.median = detail::censored_quantile(out.samples, 0.5);
  out.lower_quartile = detail::censored_quantile(out.samples, 0.25);
  out.upper_quartile = detail::censored_quantile(out.samples, 0.75);
  return out;
}

}  // namespace kcmlab
