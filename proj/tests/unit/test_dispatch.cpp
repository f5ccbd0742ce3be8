// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"
#include "ramp/error.hpp"

namespace ramp {
namespace {

TEST(SplitKGate, Examples) {
  RegionVariables v;
  v.kappa = Rational::of(56, 1);
  EXPECT_TRUE(split_k_gate(v, 0.15));
  EXPECT_FALSE(split_k_gate(v, 0.5));
  EXPECT_FALSE(split_k_gate(v, 0.2));
  v.kappa = Rational::of(16, 1);
  EXPECT_FALSE(split_k_gate(v, 0.1));
}

class DispatchTest : public ::testing::Test {
 protected:
  MoeGeometry geom = test::model("OLMoE");
  HardwareModel hw;
  ConfigPool pool = enumerate_configs(geom, hw, classify_regime(region_variables(geom), hw));

  /// Random but plausible per-config coefficients.
  std::vector<CostCoefficients> random_family(std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<CostCoefficients> k;
    for (std::size_t i = 0; i < pool.size(); ++i)
      k.push_back({20 + 10 * u(rng), 5 + 20 * u(rng), 0.01 + 0.1 * u(rng), 3 * u(rng), u(rng) < 0.5,
                   Variant::P4});
    return k;
  }
};

TEST_F(DispatchTest, CacheReusesWithinStep) {
  const DispatchTable table(geom, pool, test::store_of(random_family(1)), hw);
  StepCache cache;
  const auto h = sample_histogram(geom.E, 32, geom.top_k, 0.5, 3).histogram;
  const auto first = select_config(table, h, cache, 7);
  const auto before = table.evaluations();
  EXPECT_GT(before, 0);
  const auto second = select_config(table, h, cache, 7);
  EXPECT_EQ(table.evaluations(), before);
  EXPECT_EQ(first.config_id, second.config_id);
  select_config(table, h, cache, 8);
  EXPECT_GT(table.evaluations(), before);
  EXPECT_EQ(cache.size(), 1u);
}

TEST_F(DispatchTest, SingleConfigTableAlwaysPicksIt) {
  const ConfigPool one{pool[0]};
  const DispatchTable table(geom, one, test::store_of({{1, 2, 3, 0, false, Variant::P4}}), hw);
  for (double beta : {0.3, 1.0}) {
    const auto h = sample_histogram(geom.E, 64, geom.top_k, beta, 4).histogram;
    EXPECT_EQ(table.evaluate(h).config_id, 0);
  }
}

TEST_F(DispatchTest, EmptyHistogramPicksLowestStartup) {
  auto k = random_family(2);
  k[123].a = 1.0;
  const DispatchTable table(geom, pool, test::store_of(k), hw);
  const auto s = table.evaluate(ExpertHistogram::from_counts(std::vector<std::int64_t>(geom.E, 0)));
  EXPECT_EQ(s.config_id, 123);
  EXPECT_EQ(s.grid, 0);
  EXPECT_DOUBLE_EQ(s.omega, 0.0);
}

TEST_F(DispatchTest, TableValidatesStore) {
  auto store = test::store_of(random_family(3));
  store.entries.pop_back();
  EXPECT_THROW(DispatchTable(geom, pool, store, hw), Error);
  store.excluded.push_back(static_cast<std::int64_t>(pool.size()) - 1);
  EXPECT_NO_THROW(DispatchTable(geom, pool, store, hw));
  auto wrong_sm = test::store_of(random_family(3));
  wrong_sm.sm_count = 100;
  EXPECT_THROW(DispatchTable(geom, pool, wrong_sm, hw), Error);
}

TEST_F(DispatchTest, ExcludedConfigsAreNeverSelected) {
  auto k = random_family(4);
  k[5].a = -100;  // would win everywhere
  auto store = test::store_of(k);
  store.entries.erase(store.entries.begin() + 5);
  store.excluded = {5};
  const DispatchTable table(geom, pool, store, hw);
  EXPECT_NE(table.evaluate(ExpertHistogram::uniform(geom.E, 64)).config_id, 5);
}

TEST_F(DispatchTest, FamilyOracleGivesZeroRegret) {
  const auto k = random_family(5);
  const DispatchTable table(geom, pool, test::store_of(k), hw);
  const test::FamilyOracle oracle(geom, k, hw);
  EvalOptions eo;
  eo.points = profiling_plan({8, 64, 1024}, {0.3, 1.0});
  const auto rep = evaluate_regret(table, oracle, eo);
  EXPECT_EQ(rep.summary.n, 3u * 3u);  // uniform points are drawn once
  EXPECT_NEAR(rep.summary.mean, 0.0, 1e-12);
  EXPECT_NEAR(rep.summary.max, 0.0, 1e-12);
}

TEST_F(DispatchTest, UniformHistogramAgreesWithStaticBest) {
  const auto k = random_family(6);
  const DispatchTable table(geom, pool, test::store_of(k), hw);
  const test::FamilyOracle oracle(geom, k, hw);
  for (std::int64_t S : {8, 128}) {
    const auto h = ExpertHistogram::uniform(geom.E, S * geom.top_k);
    EXPECT_EQ(table.evaluate(h).config_id, static_best(pool, geom, oracle, {S}));
  }
}

TEST_F(DispatchTest, StaticBestPicksDominantConfig) {
  auto k = random_family(7);
  k[42] = {0.5, 0, 0, 0, false, Variant::P4};
  const test::FamilyOracle oracle(geom, k, hw);
  EXPECT_EQ(static_best(pool, geom, oracle, {8, 64, 512}), 42);
}

TEST_F(DispatchTest, StaticBestOnSimulatorFavoursLargeTilesAtScale) {
  const SimulatorOracle oracle(geom, {}, hw);
  const auto id = static_best(pool, geom, oracle, kDefaultTestS);
  EXPECT_EQ(id, 510);
  EXPECT_EQ(pool[static_cast<std::size_t>(id)].bm, 64);
  // A single decode-sized point prefers a small token block.
  EXPECT_LE(pool[static_cast<std::size_t>(static_best(pool, geom, oracle, {8}))].bm, 16);
}

TEST_F(DispatchTest, SingleConfigSpeedupIsOne) {
  const ConfigPool one{pool[0]};
  const DispatchTable table(geom, one, test::store_of({{1, 2, 3, 0, false, Variant::P4}}), hw);
  const SimulatorOracle oracle(geom, {}, hw);
  EvalOptions eo;
  eo.points = profiling_plan({8, 64}, {0.5, 1.0});
  const auto rep = speedup_ra_vs_static(table, oracle, eo);
  ASSERT_FALSE(rep.records.empty());
  for (const auto& r : rep.records) EXPECT_DOUBLE_EQ(r.ratio, 1.0);
}

TEST(Aggregate, MeanSeMax) {
  const auto a = aggregate({0.0, 0.1, 0.2});
  EXPECT_NEAR(a.mean, 0.1, 1e-12);
  EXPECT_NEAR(a.se, 0.1 / std::sqrt(3.0), 1e-12);
  EXPECT_NEAR(a.max, 0.2, 1e-12);
  EXPECT_EQ(a.n, 3u);
  EXPECT_EQ(aggregate({}).n, 0u);
}

TEST(Reachability, SkipsUnreachablePoints) {
  const auto geom = test::model("DSv3-EP8");
  const auto rp = split_reachable(profiling_plan({1, 64}, {0.6, 1.0}), geom);
  EXPECT_EQ(rp.skipped, (std::vector<PlanPoint>{{1, 0.6}}));
  EXPECT_EQ(rp.reachable.size(), 3u);
}

TEST(SplitK, GateKeepsSplitConfigsOutAtLargeGrids) {
  const auto geom = test::model("DSv3-EP8");
  const HardwareModel hw;
  const auto pool = enumerate_configs(geom, hw, classify_regime(region_variables(geom), hw));
  std::vector<CostCoefficients> k(pool.size(), {30, 10, 0.1, 0, false, Variant::P4});
  for (const auto& c : pool)
    if (c.split_k > 1) k[static_cast<std::size_t>(c.id)].a = 1;  // split-K predicted fastest
  const DispatchTable table(geom, pool, test::store_of(k), hw);
  const auto small = table.evaluate(ExpertHistogram::uniform(geom.E, 1 * geom.top_k));
  EXPECT_GT(pool[static_cast<std::size_t>(small.config_id)].split_k, 1);
  const auto large = table.evaluate(ExpertHistogram::uniform(geom.E, 1024 * geom.top_k));
  EXPECT_EQ(pool[static_cast<std::size_t>(large.config_id)].split_k, 1);
}

}  // namespace
}  // namespace ramp
