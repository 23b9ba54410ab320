#include <gtest/gtest.h>

#include <cmath>

#include "kcmlab/bootstrap.hpp"
#include "bootstrap_checks.hpp"

using namespace kcmlab;

TEST(SynchronousStep, DuarteExamples) {
  auto region = Region::square(3);
  auto tau1 = BoundaryCondition::uniform(region, 1);
  EXPECT_TRUE(synchronous_step(duarte(), region, tau1, {}).empty());
  auto step = synchronous_step(duarte(), region, tau1, {{-1, 0}, {0, 1}});
  EXPECT_TRUE(contains(step, kOrigin));
  EXPECT_EQ(synchronous_step(duarte(), region, tau1, region.sites()), region.sites());
  EXPECT_THROW(synchronous_step(duarte(), region, tau1, {{9, 9}}), Error);
  EXPECT_THROW(synchronous_step(duarte(), region, BoundaryCondition::uniform(Region::square(2), 1), {}), Error);
}

TEST(SynchronousStep, ZeroBoundaryActsAsInfection) {
  auto region = Region::rectangle(0, 0, 1, 3);
  auto tau0 = BoundaryCondition::uniform(region, 0);
  // Each site of a single column has its W neighbour on the parallel boundary.
  // Only the two end sites see an infected cap as well.
  auto step = synchronous_step(duarte(), region, tau0, {});
  EXPECT_EQ(step, (SiteSet{{0, 0}, {0, 2}}));
  EXPECT_EQ(closure_region(duarte(), region, tau0, {}).closed, region.sites());
}

TEST(ClosureRegion, SingleSiteStaysAlone) {
  auto region = Region::square(5);
  auto r = closure_region(duarte(), region, BoundaryCondition::uniform(region, 1), {{1, 1}});
  EXPECT_EQ(r.closed, (SiteSet{{1, 1}}));
  EXPECT_EQ(r.rounds, 0u);
}

TEST(ClosureRegion, PropagationExamples) {
  auto region = Region::rectangle(0, 0, 12, 12);
  auto tau = BoundaryCondition::uniform(region, 1);
  SiteSet seed;
  for (std::int64_t y = 2; y <= 7; ++y) seed.push_back({3, y});
  seed.push_back({4, 5});
  auto r = closure_region(duarte(), region, tau, make_site_set(seed));
  for (std::int64_t y = 2; y <= 7; ++y) EXPECT_TRUE(contains(r.closed, Site{4, y}));

  SiteSet corner;
  for (std::int64_t x = 1; x <= 6; ++x) corner.push_back({x, 1});
  for (std::int64_t y = 1; y <= 5; ++y) corner.push_back({1, y});
  auto c = closure_region(duarte(), region, tau, make_site_set(corner));
  for (std::int64_t x = 1; x <= 6; ++x)
    for (std::int64_t y = 1; y <= 5; ++y) EXPECT_TRUE(contains(c.closed, Site{x, y}));
}

TEST(ClosureRegion, MatchesSynchronousOracle) {
  auto res = checks::closure_oracle(1, 150, 16);
  EXPECT_TRUE(res.ok()) << res.first_failure;
}

TEST(ClosureRegion, IdempotentAndMonotoneInSeed) {
  gen::Rng rng(3);
  for (int t = 0; t < 200; ++t) {
    auto family = checks::oracle_family(rng);
    auto region = gen::random_region(rng, 10);
    auto ext = gen::random_exterior(rng, region);
    auto y = gen::random_subset(rng, region, 0.2);
    auto bigger = set_union(y, gen::random_subset(rng, region, 0.1));
    auto c = closure_region(family, region, ext, y).closed;
    ASSERT_TRUE(is_subset(y, c));
    auto again = closure_region(family, region, ext, c);
    ASSERT_EQ(again.closed, c);
    ASSERT_EQ(again.rounds, 0u);
    ASSERT_TRUE(is_subset(c, closure_region(family, region, ext, bigger).closed));
  }
}

TEST(ClosureFree, EmptySeed) {
  auto r = closure_free(duarte(), {}, 10);
  EXPECT_TRUE(r.closed.empty());
  EXPECT_FALSE(r.touched_cap);
}

TEST(ClosureFree, LeftwardChainHitsCap) {
  UpdateFamily right("right", {{{1, 0}}});
  auto r = closure_free(right, {{0, 0}}, 10);
  SiteSet expected;
  for (std::int64_t x = -10; x <= 0; ++x) expected.push_back({x, 0});
  EXPECT_EQ(r.closed, expected);
  EXPECT_TRUE(r.touched_cap);
  EXPECT_THROW(closure_free(right, {{20, 0}}, 10), Error);
}

TEST(ClosureFree, DuarteFiniteAndMatchesLargeWindow) {
  gen::Rng rng(8);
  for (int t = 0; t < 60; ++t) {
    auto seed = gen::random_subset(rng, Region::rectangle(-8, -8, 16, 16), 0.05 + 0.3 * rng.uniform());
    auto r = closure_free(duarte(), seed, 64);
    ASSERT_FALSE(r.touched_cap);
    auto window = Region::square(32);
    auto oracle = checks::iterate_steps(duarte(), window, AllHealthy{}, seed);
    ASSERT_EQ(r.closed, oracle.closed);
  }
}

TEST(Infectable, Examples) {
  auto region = Region::rectangle(0, -4, 4, 9);
  auto tau1 = BoundaryCondition::uniform(region, 1);
  auto full = Configuration::filled(region, 1);
  EXPECT_FALSE(is_infectable(duarte(), {{1, 1}}, full, tau1));
  EXPECT_TRUE(is_infectable(duarte(), {{1, 1}}, full.flipped({1, 1}), tau1));
  EXPECT_TRUE(is_infectable(duarte(), {}, full, tau1));

  // Column 1 fully empty, one empty site in column 2.
  auto cfg = full;
  for (std::int64_t y = -4; y <= 4; ++y) cfg = cfg.flipped({1, y});
  cfg = cfg.flipped({2, 0});
  SiteSet interval;
  for (std::int64_t y = -2; y <= 2; ++y) interval.push_back({2, y});
  EXPECT_TRUE(is_infectable(duarte(), interval, cfg, tau1));
  SiteSet column3;
  for (std::int64_t y = -2; y <= 2; ++y) column3.push_back({3, y});
  EXPECT_FALSE(is_infectable(duarte(), column3, cfg, tau1));

  // Boundary sites count iff tau is zero there.
  auto tau0 = BoundaryCondition::uniform(region, 0);
  EXPECT_TRUE(is_infectable(duarte(), {{1, 5}}, full, tau0));
  EXPECT_FALSE(is_infectable(duarte(), {{1, 5}}, full, tau1));
  EXPECT_THROW(is_infectable(duarte(), {{1, 7}}, full, tau1), Error);
}

TEST(DuartePath, Examples) {
  SiteSet row;
  for (std::int64_t x = 2; x <= 6; ++x) row.push_back({x, 0});
  auto w = duarte_path_exists(row, 2, 6);
  ASSERT_TRUE(w.has_value());
  EXPECT_EQ(*w, std::vector<Site>(row.begin(), row.end()));

  SiteSet blobs{{0, 0}, {0, 1}, {1, 0}, {4, 0}, {5, 0}};
  EXPECT_FALSE(duarte_path_exists(make_site_set(blobs), 0, 5).has_value());

  SiteSet stair{{0, 0}, {1, 0}, {1, 1}, {1, 2}, {2, 2}, {2, 1}, {2, 0}, {2, -1}, {3, -1}};
  stair = make_site_set(stair);
  auto p = duarte_path_exists(stair, 0, 3);
  ASSERT_TRUE(p.has_value());
  EXPECT_EQ(p->front(), (Site{0, 0}));
  EXPECT_EQ(p->back().x, 3);
  for (std::size_t i = 1; i < p->size(); ++i) {
    auto d = (*p)[i] - (*p)[i - 1];
    EXPECT_TRUE(d == kE1 || d == kE2 || d == (Site{0, -1}));
  }
  // Shortest: 0,0 -> 1,0 -> 2,0 -> 2,-1 -> 3,-1.
  EXPECT_EQ(p->size(), 5u);
  auto closure = closure_free(duarte(), stair, 64).closed;
  for (std::int64_t x = 0; x <= 3; ++x) EXPECT_TRUE(contains(closure, Site{x, 0}));
}

TEST(PropertyChecks, Screening) {
  auto r = checks::screening(4, 60);
  EXPECT_TRUE(r.ok()) << r.first_failure;
}

TEST(PropertyChecks, Monotonicity) {
  auto a = checks::monotonicity_a(5, 100);
  auto b = checks::monotonicity_b(6, 100);
  auto c = checks::monotonicity_c(7, 100);
  EXPECT_TRUE(a.ok()) << a.first_failure;
  EXPECT_TRUE(b.ok()) << b.first_failure;
  EXPECT_TRUE(c.ok()) << c.first_failure;
}

TEST(PropertyChecks, Propagation) {
  auto r = checks::propagation(9, 60);
  EXPECT_EQ(r.instances, 60u);
  EXPECT_TRUE(r.ok()) << r.first_failure;
}

TEST(MedianTime, FullInfectionIsZero) {
  auto s = median_bootstrap_time(duarte(), 1.0 - 1e-15, 3, 5, 1);
  ASSERT_TRUE(s.median.has_value());
  EXPECT_EQ(*s.median, 0u);
  EXPECT_THROW(median_bootstrap_time(duarte(), 1.0, 3, 5, 1), Error);
  EXPECT_THROW(median_bootstrap_time(duarte(), 0.0, 3, 5, 1), Error);
  EXPECT_THROW(median_bootstrap_time(duarte(), 0.5, 0, 5, 1), Error);
}

TEST(MedianTime, East1dIsGeometric) {
  // The origin is infected at step k when the nearest empty site to its left
  // (itself included) sits at distance k: P(T <= k) = 1 - (1-q)^(k+1).
  for (double q : {0.1, 0.2, 0.3}) {
    auto s = median_bootstrap_time(east1d(), q, 64, 2001, 17);
    ASSERT_TRUE(s.median.has_value());
    double predicted = std::ceil(-std::log(2.0) / std::log(1.0 - q));
    EXPECT_LE(std::abs(static_cast<double>(*s.median) - predicted), 1.0) << q;
    EXPECT_EQ(s.censored, 0u);
  }
}

TEST(MedianTime, DeterministicAndCensoredLast) {
  auto a = median_bootstrap_time(duarte(), 0.2, 8, 40, 99);
  auto b = median_bootstrap_time(duarte(), 0.2, 8, 40, 99);
  EXPECT_EQ(a.samples, b.samples);
  std::size_t censored = 0;
  for (auto& s : a.samples) censored += s ? 0 : 1;
  EXPECT_EQ(censored, a.censored);
  // Tiny box and small q: most trials stall.
  auto stall = median_bootstrap_time(duarte(), 0.02, 2, 30, 5);
  EXPECT_GT(stall.censored, 15u);
  EXPECT_FALSE(stall.median.has_value());
}
