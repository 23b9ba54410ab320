#pragma once

// Stable directions of an update family and the supercritical / rooted
// classification. Directions are primitive integer vectors; every angular
// comparison is an exact sign test on 128-bit cross and dot products.

#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "kcmlab/family.hpp"

namespace kcmlab {

struct Direction {
  std::int64_t x = 0;
  std::int64_t y = 0;
  friend constexpr bool operator==(Direction, Direction) = default;
};

inline std::string to_string(Direction d) {
  return "(" + std::to_string(d.x) + "," + std::to_string(d.y) + ")";
}

namespace geom {

using i128 = __int128;

inline Direction primitive(std::int64_t x, std::int64_t y) {
  if (x == 0 && y == 0) throw Error("zero vector has no direction");
  auto g = std::gcd(x < 0 ? -x : x, y < 0 ? -y : y);
  return {x / g, y / g};
}

inline i128 cross(Direction a, Direction b) { return i128(a.x) * b.y - i128(a.y) * b.x; }
inline i128 dot(Direction a, Direction b) { return i128(a.x) * b.x + i128(a.y) * b.y; }
inline i128 dot(Site s, Direction u) { return i128(s.x) * u.x + i128(s.y) * u.y; }

/// 0 for angles in [0, pi), 1 for [pi, 2pi).
inline int half(Direction d) { return (d.y < 0 || (d.y == 0 && d.x < 0)) ? 1 : 0; }

/// Strict angular order starting at angle 0 (direction (1,0)).
inline bool angle_less(Direction a, Direction b) {
  int ha = half(a), hb = half(b);
  if (ha != hb) return ha < hb;
  return cross(a, b) > 0;
}

inline Direction negate(Direction d) { return {-d.x, -d.y}; }

/// True if the counter-clockwise sweep from a to b is at least pi
/// (a == b counts as a full turn).
inline bool ccw_sweep_at_least_pi(Direction a, Direction b) {
  if (a == b) return true;
  auto c = cross(a, b);
  return c < 0 || (c == 0 && dot(a, b) < 0);
}

/// d rotated into the frame where a points along angle 0 (scaled by |a|).
struct Rel {
  i128 x, y;
};
inline Rel relative(Direction a, Direction d) { return {dot(a, d), cross(a, d)}; }

inline bool rel_angle_less(Rel p, Rel q) {
  auto hp = (p.y < 0 || (p.y == 0 && p.x < 0)) ? 1 : 0;
  auto hq = (q.y < 0 || (q.y == 0 && q.x < 0)) ? 1 : 0;
  if (hp != hq) return hp < hq;
  return p.x * q.y - p.y * q.x > 0;
}

/// True if d lies on the closed counter-clockwise arc from a to b.
inline bool on_ccw_arc(Direction a, Direction b, Direction d) {
  if (a == b) return d == a;
  return !rel_angle_less(relative(a, b), relative(a, d));
}

}  // namespace geom

/// u is stable iff every rule X has some x in X with <x, u> >= 0.
inline bool is_stable_direction(const UpdateFamily& family, Direction u) {
  for (auto& rule : family.rules()) {
    bool blocked = false;
    for (auto s : rule)
      if (geom::dot(s, u) >= 0) {
        blocked = true;
        break;
      }
    if (!blocked) return false;
  }
  return true;
}

enum class Classification { SupercriticalRooted, SupercriticalUnrooted, NotSupercritical };

inline std::string to_string(Classification c) {
  switch (c) {
    case Classification::SupercriticalRooted: return "SupercriticalRooted";
    case Classification::SupercriticalUnrooted: return "SupercriticalUnrooted";
    case Classification::NotSupercritical: return "NotSupercritical";
  }
  return "?";
}

/// Closed counter-clockwise arc from `from` to `to`; from == to is a single point.
struct Arc {
  Direction from;
  Direction to;
  bool is_point() const { return from == to; }
  friend bool operator==(const Arc&, const Arc&) = default;
};

struct StableDirectionReport {
  std::vector<Arc> arcs;  // disjoint, sorted by angle of `from`
  bool full_circle = false;
  Classification classification = Classification::NotSupercritical;
  std::vector<std::string> notes;

  bool empty() const { return !full_circle && arcs.empty(); }

  bool contains(Direction u) const {
    if (full_circle) return true;
    u = geom::primitive(u.x, u.y);
    for (auto& a : arcs)
      if (geom::on_ccw_arc(a.from, a.to, u)) return true;
    return false;
  }
};

namespace detail {

inline Classification classify_arcs(const std::vector<Arc>& arcs, bool full) {
  if (full) return Classification::NotSupercritical;
  if (arcs.empty()) return Classification::SupercriticalUnrooted;
  bool supercritical = false;
  for (std::size_t i = 0; i < arcs.size(); ++i) {
    const auto& next = arcs[(i + 1) % arcs.size()];
    // Gap between the end of this arc and the start of the next one is an
    // open arc; an open semicircle fits inside iff its sweep is >= pi.
    if (arcs.size() == 1) {
      if (arcs[0].is_point() || geom::ccw_sweep_at_least_pi(arcs[0].to, arcs[0].from)) supercritical = true;
    } else if (geom::ccw_sweep_at_least_pi(arcs[i].to, next.from)) {
      supercritical = true;
    }
  }
  if (!supercritical) return Classification::NotSupercritical;
  for (auto& a : arcs)
    if (!a.is_point()) return Classification::SupercriticalRooted;
  for (std::size_t i = 0; i < arcs.size(); ++i)
    for (std::size_t j = i + 1; j < arcs.size(); ++j)
      if (arcs[i].from != arcs[j].from && arcs[i].from != geom::negate(arcs[j].from))
        return Classification::SupercriticalRooted;
  return Classification::SupercriticalUnrooted;
}

}  // namespace detail

/// Exact stable set. Stability is constant on the open gaps between
/// consecutive perpendiculars of rule sites, so it suffices to test every
/// perpendicular and one interior direction per gap.
inline StableDirectionReport stable_directions(const UpdateFamily& family) {
  std::vector<Direction> cand;
  for (auto& rule : family.rules())
    for (auto s : rule) {
      auto p = geom::primitive(-s.y, s.x);
      cand.push_back(p);
      cand.push_back(geom::negate(p));
    }
  std::sort(cand.begin(), cand.end(), geom::angle_less);
  cand.erase(std::unique(cand.begin(), cand.end()), cand.end());

  // Alternating sequence: point 0, gap 0 (point 0 -> point 1), point 1, ...
  // Candidates come in antipodal pairs, so each gap sweeps at most pi.
  struct Element {
    Direction start, end;
    bool stable;
    bool point;
  };
  std::vector<Element> elems;
  const auto n = cand.size();
  for (std::size_t i = 0; i < n; ++i) {
    auto a = cand[i], b = cand[(i + 1) % n];
    elems.push_back({a, a, is_stable_direction(family, a), true});
    Direction mid = geom::cross(a, b) == 0 ? Direction{-a.y, a.x} : Direction{a.x + b.x, a.y + b.y};
    mid = geom::primitive(mid.x, mid.y);
    elems.push_back({a, b, is_stable_direction(family, mid), false});
  }

  StableDirectionReport rep;
  std::size_t first_unstable = elems.size();
  for (std::size_t i = 0; i < elems.size(); ++i)
    if (!elems[i].stable) {
      first_unstable = i;
      break;
    }
  if (first_unstable == elems.size()) {
    rep.full_circle = true;
  } else {
    const auto m = elems.size();
    for (std::size_t k = 1; k <= m; ++k) {
      auto i = (first_unstable + k) % m;
      if (!elems[i].stable) continue;
      // Start of a maximal stable run.
      auto j = i;
      while (elems[(j + 1) % m].stable) j = (j + 1) % m;
      Arc arc{elems[i].start, elems[j].point ? elems[j].start : elems[j].end};
      rep.arcs.push_back(arc);
      if (arc.is_point()) {
        // An isolated stable direction sits between two unstable arcs.
        rep.notes.push_back("isolated stable direction " + to_string(arc.from) +
                            " (boundary-tangent: destabilized arcs touch here)");
      }
      auto run = (j + m - i) % m + 1;
      k += run - 1;
    }
    std::sort(rep.arcs.begin(), rep.arcs.end(),
              [](const Arc& a, const Arc& b) { return geom::angle_less(a.from, b.from); });
  }
  rep.classification = detail::classify_arcs(rep.arcs, rep.full_circle);
  return rep;
}

inline Classification classify_family(const UpdateFamily& family) {
  return stable_directions(family).classification;
}

}  // namespace kcmlab
