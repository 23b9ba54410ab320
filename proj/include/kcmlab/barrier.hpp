#pragma once

// Exhaustive searches over legal paths with a cap on simultaneous empties:
// the East energy barrier and reachability of {origin empty} inside Lambda_n.

#include <algorithm>
#include <array>
#include <bit>
#include <deque>
#include <unordered_set>

#include "kcmlab/constraints.hpp"

namespace kcmlab {

inline constexpr std::size_t kDefaultSearchBudget = std::size_t{1} << 24;

struct BarrierResult {
  int barrier = 0;               // minimal cap on simultaneous empties
  std::size_t states_visited = 0;  // at the final cap
};

/// East chain on sites 1..ell with site 0 frozen empty: the least k such that
/// a legal path from all-occupied to {site ell empty} keeps at most k empties.
inline BarrierResult east_barrier(int ell, std::size_t budget = kDefaultSearchBudget) {
  if (ell < 1 || ell > 62) throw Error("ell must lie in [1, 62]");
  using Mask = std::uint64_t;  // bit i-1 set iff site i is empty
  const Mask target = Mask{1} << (ell - 1);
  for (int cap = 1; cap <= ell; ++cap) {
    std::unordered_set<Mask> seen{0};
    std::deque<Mask> queue{0};
    while (!queue.empty()) {
      Mask s = queue.front();
      queue.pop_front();
      for (int i = 1; i <= ell; ++i) {
        // Site i is unconstrained iff site i-1 is empty (site 0 always is).
        if (i > 1 && !((s >> (i - 2)) & 1u)) continue;
        Mask t = s ^ (Mask{1} << (i - 1));
        if (std::popcount(t) > cap || seen.count(t)) continue;
        if (t & target) return {cap, seen.size() + 1};
        seen.insert(t);
        if (seen.size() > budget) throw Error("east_barrier: search budget exhausted");
        queue.push_back(t);
      }
    }
  }
  throw Error("east_barrier: target unreachable");
}

struct ReachabilityResult {
  bool origin_infectable = false;
  std::size_t reachable_states = 0;
  std::int64_t side = 0;  // side of Lambda_n
};

/// Side kappa n 2^n + 1 of Lambda_n.
inline std::int64_t lambda_side(int n, int kappa) {
  if (n < 1 || kappa < 1) throw Error("need n >= 1 and kappa >= 1");
  if (n > 20) throw Error("n too large");
  return static_cast<std::int64_t>(kappa) * n * (std::int64_t{1} << n) + 1;
}

/// Lambda_n: square of side kappa n 2^n + 1 centred at the origin.
inline Region lambda_n(int n, int kappa) { return Region::square((lambda_side(n, kappa) - 1) / 2); }

namespace detail {

/// Sorted list of at most 4 empty-site indices packed 16 bits each, stored +1
/// so that 0 marks an unused slot.
struct EmptySet {
  std::array<std::uint16_t, 4> idx{};
  int size = 0;

  std::uint64_t key() const {
    std::uint64_t k = 0;
    for (int i = 0; i < size; ++i) k |= static_cast<std::uint64_t>(idx[static_cast<std::size_t>(i)] + 1u) << (16 * i);
    return k;
  }
  bool has(std::uint16_t i) const { return std::find(idx.begin(), idx.begin() + size, i) != idx.begin() + size; }
  EmptySet toggled(std::uint16_t i) const {
    EmptySet out = *this;
    auto end = out.idx.begin() + out.size;
    auto it = std::find(out.idx.begin(), end, i);
    if (it != end) {
      std::copy(it + 1, end, it);
      --out.size;
    } else {
      out.idx[static_cast<std::size_t>(out.size++)] = i;
      std::sort(out.idx.begin(), out.idx.begin() + out.size);
    }
    return out;
  }
};

}  // namespace detail

/// Breadth-first search over legal flips inside Lambda_n (AllInfected
/// exterior) from all-occupied, never exceeding n - 1 empties. Reports
/// whether some reachable state has the origin empty.
inline ReachabilityResult an_reachability(const UpdateFamily& family, int n, int kappa,
                                          std::size_t budget = kDefaultSearchBudget) {
  if (n > 5) throw Error("an_reachability supports n <= 5");
  const auto region = lambda_n(n, kappa);
  if (region.size() > 65535) throw Error("Lambda_n too large to index");
  const ConstraintTable table(family, region, AllInfected{});
  const auto origin = static_cast<std::uint16_t>(region.index_of(kOrigin));
  const int cap = n - 1;

  ReachabilityResult res;
  res.side = lambda_side(n, kappa);
  std::unordered_set<std::uint64_t> seen;
  std::deque<detail::EmptySet> queue;
  detail::EmptySet start;
  seen.insert(start.key());
  queue.push_back(start);
  std::vector<std::uint8_t> values(region.size(), 1);
  while (!queue.empty()) {
    auto s = queue.front();
    queue.pop_front();
    if (s.has(origin)) res.origin_infectable = true;
    for (int k = 0; k < s.size; ++k) values[s.idx[static_cast<std::size_t>(k)]] = 0;
    for (std::size_t i = 0; i < region.size(); ++i) {
      const auto ii = static_cast<std::uint16_t>(i);
      const bool empty = values[i] == 0;
      if (!empty && s.size >= cap) continue;
      if (!table.satisfied(i, values)) continue;
      auto t = s.toggled(ii);
      if (seen.insert(t.key()).second) {
        if (seen.size() > budget) throw Error("an_reachability: search budget exhausted");
        queue.push_back(t);
      }
    }
    for (int k = 0; k < s.size; ++k) values[s.idx[static_cast<std::size_t>(k)]] = 1;
  }
  res.reachable_states = seen.size();
  return res;
}

}  // namespace kcmlab
