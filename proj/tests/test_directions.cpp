#include <gtest/gtest.h>

#include <numeric>

#include "kcmlab/directions.hpp"
#include "test_support.hpp"

using namespace kcmlab;

namespace {

std::vector<Direction> primitive_grid(std::int64_t r) {
  std::vector<Direction> out;
  for (std::int64_t a = -r; a <= r; ++a)
    for (std::int64_t b = -r; b <= r; ++b)
      if ((a || b) && std::gcd(a < 0 ? -a : a, b < 0 ? -b : b) == 1) out.push_back({a, b});
  return out;
}

const UpdateFamily kTwoStable("two-stable", {{{-1, 0}}, {{0, -1}}, {{1, 0}, {0, 1}}});

}  // namespace

TEST(StableDirections, SingleLeftRuleIsClosedLeftHalf) {
  auto rep = stable_directions(east1d());
  ASSERT_EQ(rep.arcs.size(), 1u);
  EXPECT_EQ(rep.arcs[0].from, (Direction{0, 1}));
  EXPECT_EQ(rep.arcs[0].to, (Direction{0, -1}));
  for (auto u : primitive_grid(20)) EXPECT_EQ(rep.contains(u), u.x <= 0) << to_string(u);
}

TEST(StableDirections, TwoStableDirectionsExactly) {
  auto rep = stable_directions(kTwoStable);
  ASSERT_EQ(rep.arcs.size(), 2u);
  EXPECT_TRUE(rep.arcs[0].is_point());
  EXPECT_TRUE(rep.arcs[1].is_point());
  EXPECT_EQ(rep.arcs[0].from, (Direction{-1, 0}));
  EXPECT_EQ(rep.arcs[1].from, (Direction{0, -1}));
  EXPECT_EQ(rep.classification, Classification::SupercriticalRooted);
}

TEST(StableDirections, DuarteBlocksEastGrowth) {
  auto rep = stable_directions(duarte());
  EXPECT_TRUE(rep.contains({1, 0}));
  EXPECT_TRUE(rep.contains({-1, 0}));
  EXPECT_TRUE(rep.contains({-3, 7}));
  EXPECT_FALSE(rep.contains({1, 1}));
  EXPECT_FALSE(rep.contains({1, -1}));
  EXPECT_FALSE(rep.notes.empty());
  for (auto u : primitive_grid(30)) EXPECT_EQ(rep.contains(u), is_stable_direction(duarte(), u)) << to_string(u);
}

TEST(StableDirections, ArcsAgreeWithSignTestOnRandomFamilies) {
  gen::Rng rng(2024);
  const auto grid = primitive_grid(50);
  for (int t = 0; t < 200; ++t) {
    auto family = gen::random_family(rng, 2, 3, 3);
    auto rep = stable_directions(family);
    for (std::size_t i = 0; i < rep.arcs.size(); ++i) {
      auto a = rep.arcs[i];
      auto pf = geom::primitive(a.from.x, a.from.y), pt = geom::primitive(a.to.x, a.to.y);
      EXPECT_EQ(pf, a.from);
      EXPECT_EQ(pt, a.to);
      if (i + 1 < rep.arcs.size()) {
        EXPECT_TRUE(geom::angle_less(a.from, rep.arcs[i + 1].from));
      }
    }
    for (auto u : grid)
      ASSERT_EQ(rep.contains(u), is_stable_direction(family, u)) << serialize_family(family) << " " << to_string(u);
  }
}

TEST(StableDirections, ArcsPairwiseDisjoint) {
  gen::Rng rng(77);
  const auto grid = primitive_grid(25);
  for (int t = 0; t < 100; ++t) {
    auto rep = stable_directions(gen::random_family(rng, 1 + rng.below(3), 3, 2));
    for (auto u : grid) {
      int hits = 0;
      for (auto& a : rep.arcs) hits += geom::on_ccw_arc(a.from, a.to, u) ? 1 : 0;
      ASSERT_LE(hits, 1);
    }
  }
}

TEST(Classification, KnownFamilies) {
  EXPECT_EQ(classify_family(east2d()), Classification::SupercriticalRooted);
  EXPECT_EQ(classify_family(kTwoStable), Classification::SupercriticalRooted);
  EXPECT_EQ(classify_family(duarte()), Classification::NotSupercritical);
  // East1d: stable set is a closed half circle; the open right half avoids it.
  EXPECT_EQ(classify_family(east1d()), Classification::SupercriticalRooted);
  // Nearest-neighbour 2-neighbour family: four isolated stable directions.
  UpdateFamily two_nn("2nn", {{{1, 0}, {0, 1}}, {{1, 0}, {0, -1}}, {{1, 0}, {-1, 0}}, {{0, 1}, {0, -1}},
                              {{0, 1}, {-1, 0}}, {{0, -1}, {-1, 0}}});
  EXPECT_EQ(classify_family(two_nn), Classification::NotSupercritical);
  // Left and right single-site rules: the stable set is {+e2, -e2}.
  UpdateFamily axis("axis", {{{1, 0}}, {{-1, 0}}});
  auto rep = stable_directions(axis);
  ASSERT_EQ(rep.arcs.size(), 2u);
  EXPECT_EQ(rep.arcs[0].from, (Direction{0, 1}));
  EXPECT_EQ(rep.classification, Classification::SupercriticalUnrooted);
  // A rule pointing both ways along an axis leaves every direction stable.
  EXPECT_EQ(classify_family(UpdateFamily("both", {{{1, 0}, {-1, 0}}})), Classification::NotSupercritical);
}

TEST(Classification, InvariantUnderReorderingAndDuplicates) {
  gen::Rng rng(31);
  for (int t = 0; t < 200; ++t) {
    auto f = gen::random_family(rng, 1 + rng.below(3), 3, 2);
    auto rules = f.rules();
    std::shuffle(rules.begin(), rules.end(), rng.engine());
    for (auto& r : rules) std::shuffle(r.begin(), r.end(), rng.engine());
    rules.push_back(rules.front());
    UpdateFamily g("shuffled", rules);
    EXPECT_EQ(classify_family(f), classify_family(g));
    EXPECT_EQ(stable_directions(f).arcs, stable_directions(g).arcs);
  }
}

TEST(Classification, MatchesBruteForceSemicircleSearch) {
  // Supercritical iff some open semicircle {s : cross(a, s) > 0} misses every
  // stable grid direction.
  gen::Rng rng(55);
  const auto grid = primitive_grid(12);
  for (int t = 0; t < 100; ++t) {
    auto f = gen::random_family(rng, 1 + rng.below(3), 2, 1);
    std::vector<Direction> stable;
    for (auto u : grid)
      if (is_stable_direction(f, u)) stable.push_back(u);
    bool super = stable.empty();
    for (auto a : grid) {
      bool clear = true;
      for (auto s : stable)
        if (geom::cross(a, s) > 0) {
          clear = false;
          break;
        }
      if (clear) {
        super = true;
        break;
      }
    }
    bool rooted = false;
    for (auto u : stable)
      for (auto v : stable)
        if (u != v && u != geom::negate(v)) rooted = true;
    auto c = classify_family(f);
    if (!super) {
      EXPECT_EQ(c, Classification::NotSupercritical) << serialize_family(f);
    } else {
      EXPECT_EQ(c, rooted ? Classification::SupercriticalRooted : Classification::SupercriticalUnrooted)
          << serialize_family(f);
    }
  }
}
