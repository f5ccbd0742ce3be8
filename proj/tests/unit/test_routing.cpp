// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "helpers.hpp"
#include "ramp/error.hpp"

namespace ramp {
namespace {

ExpertHistogram H(std::vector<std::int64_t> c) { return ExpertHistogram::from_counts(std::move(c)); }

TEST(Balancedness, Examples) {
  EXPECT_DOUBLE_EQ(balancedness(H({4, 4, 4, 4})), 1.0);
  EXPECT_DOUBLE_EQ(balancedness(H({0, 9, 0})), 0.0);
  // Independent high-precision value of H([3/4, 1/4]) / ln 2.
  EXPECT_NEAR(balancedness(H({3, 1})), 0.811278124459132864, 1e-12);
  EXPECT_DOUBLE_EQ(balancedness(H({5})), 1.0);
  EXPECT_THROW(balancedness(H({0, 0})), DomainError);
}

TEST(Balancedness, ScaleAndPermutationInvariant) {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 50; ++t) {
    std::vector<std::int64_t> c(1 + rng() % 40);
    for (auto& x : c) x = static_cast<std::int64_t>(rng() % 20);
    c[0] += 1;
    const double b = balancedness(H(c));
    EXPECT_GE(b, 0.0);
    EXPECT_LE(b, 1.0 + 1e-12);
    auto scaled = c;
    for (auto& x : scaled) x *= 7;
    EXPECT_NEAR(balancedness(H(scaled)), b, 1e-12);
    auto perm = c;
    std::shuffle(perm.begin(), perm.end(), rng);
    EXPECT_NEAR(balancedness(H(perm)), b, 1e-12);
  }
}

TEST(Histogram, RejectsNegativeAndEmpty) {
  EXPECT_THROW(H({1, -1}), ValidationError);
  EXPECT_THROW(H({}), ValidationError);
}

TEST(Histogram, UniformIsRoundRobin) {
  const auto h = ExpertHistogram::uniform(4, 10);
  EXPECT_EQ(h.counts, (std::vector<std::int64_t>{3, 3, 2, 2}));
  EXPECT_EQ(h.total(), 10);
  EXPECT_EQ(h.active_experts(), 4);
}

TEST(Sampler, UniformBypass) {
  const auto s = sample_histogram(64, 128, 8, 1.0, 123);
  for (auto c : s.histogram.counts) EXPECT_EQ(c, 16);
  EXPECT_DOUBLE_EQ(s.beta_achieved, 1.0);
}

TEST(Sampler, MeanBalancednessNearTarget) {
  double sum = 0;
  for (std::uint64_t r = 0; r < 100; ++r) sum += sample_histogram(64, 128, 8, 0.5, derive_seed(99, {r})).beta_achieved;
  const double mean = sum / 100;
  EXPECT_GE(mean, 0.47);
  EXPECT_LE(mean, 0.53);
}

TEST(Sampler, SingleAssignmentHasZeroBalancedness) {
  const auto s = sample_histogram(64, 1, 1, 0.0, 5);
  EXPECT_EQ(s.histogram.total(), 1);
  EXPECT_EQ(s.histogram.active_experts(), 1);
  EXPECT_DOUBLE_EQ(s.beta_achieved, 0.0);
}

TEST(Sampler, ConservesTotalAndIsDeterministic) {
  for (double beta : {0.2, 0.6, 0.9}) {
    const auto a = sample_histogram(32, 48, 4, beta, 77);
    const auto b = sample_histogram(32, 48, 4, beta, 77);
    EXPECT_EQ(a.histogram.counts, b.histogram.counts);
    EXPECT_EQ(a.histogram.total(), 48 * 4);
    EXPECT_EQ(a.histogram.experts(), 32);
    EXPECT_DOUBLE_EQ(a.beta_achieved, balancedness(a.histogram));
  }
}

TEST(Sampler, UnreachableTargetIsDomainError) {
  // Eight assignments over 32 experts cannot average 0.6 balancedness.
  EXPECT_THROW(sample_histogram(32, 1, 8, 0.6, 1), DomainError);
}

TEST(Sampler, RejectsOutOfRangeTarget) {
  EXPECT_THROW(sample_histogram(8, 8, 2, 1.5, 1), Error);
  EXPECT_THROW(sample_histogram(8, 8, 2, -0.1, 1), Error);
}

TEST(Grid, Examples) {
  const MoeGeometry g{"x", 4, 2048, 128, 1};
  TileConfig c;
  c.bm = 4;
  c.ttn = 256;
  EXPECT_EQ(grid_size(c, H({10, 0, 5, 1}), g), 48);
  c.split_k = 4;
  EXPECT_EQ(grid_size(c, H({10, 0, 5, 1}), g), 192);

  const MoeGeometry g16{"y", 16, 2048, 128, 1};
  TileConfig d;
  d.bm = 16;
  EXPECT_EQ(grid_size(d, ExpertHistogram::uniform(16, 16), g16), 16 * n_tiles(d, g16));
}

TEST(Grid, BoundsAndMonotoneInBm) {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 200; ++t) {
    std::vector<std::int64_t> c(1 + rng() % 64);
    for (auto& x : c) x = static_cast<std::int64_t>(rng() % 50);
    const auto h = H(c);
    std::int64_t prev = -1;
    for (std::int64_t bm = 104; bm >= 2; bm -= 2) {
      const auto m = m_tiles(h, bm);
      EXPECT_GE(m, (h.total() + bm - 1) / bm);
      EXPECT_LE(m, (h.total() + bm - 1) / bm + h.active_experts());
      EXPECT_GE(m, prev);  // smaller tiles never need fewer of them
      prev = m;
    }
  }
}

TEST(WaveUtilization, Examples) {
  const HardwareModel hw;
  EXPECT_DOUBLE_EQ(wave_utilization(132, hw), 1.0);
  EXPECT_DOUBLE_EQ(wave_utilization(0, hw), 0.0);
  EXPECT_NEAR(wave_utilization(48, hw), 0.363636363636, 1e-9);
}

TEST(RoutingCsv, RoundTripAndErrors) {
  const auto s = sample_histogram(8, 16, 2, 0.7, 3);
  const std::string text = routing_csv_header(8) + "\n" + to_csv_line(s) + "\n";
  EXPECT_EQ(parse_histogram_csv(text, 8).counts, s.histogram.counts);
  EXPECT_EQ(parse_histogram_csv("1,2,3\n", 3).counts, (std::vector<std::int64_t>{1, 2, 3}));
  EXPECT_THROW(parse_histogram_csv("1,2\n", 3), ValidationError);
  EXPECT_THROW(parse_histogram_csv("1,x,3\n", 3), ParseError);
  EXPECT_THROW(parse_histogram_csv("c_0,c_1\n", 2), ParseError);
}

TEST(Seeds, DeriveIsOrderSensitive) {
  EXPECT_NE(derive_seed(42, {1, 2}), derive_seed(42, {2, 1}));
  EXPECT_EQ(derive_seed(42, {1, 2}), derive_seed(42, {1, 2}));
  EXPECT_EQ(beta_key(0.5), 500000u);
}

}  // namespace
}  // namespace ramp
