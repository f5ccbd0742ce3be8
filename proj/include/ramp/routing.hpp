// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ramp/catalog.hpp"
#include "ramp/config.hpp"
#include "ramp/hardware.hpp"

namespace ramp {

/// Token-expert assignment counts for one forward step.
struct ExpertHistogram {
  std::vector<std::int64_t> counts;

  /// Throws ValidationError on an empty vector or a negative count.
  static ExpertHistogram from_counts(std::vector<std::int64_t> counts);
  /// Round-robin split of `total` assignments over E experts.
  static ExpertHistogram uniform(std::int64_t E, std::int64_t total);

  [[nodiscard]] std::int64_t experts() const {
    return static_cast<std::int64_t>(counts.size());
  }
  [[nodiscard]] std::int64_t total() const;
  [[nodiscard]] std::int64_t active_experts() const;
};

struct RoutingSample {
  ExpertHistogram histogram;
  double beta_target = 1.0;
  double beta_achieved = 1.0;
  std::uint64_t seed = 0;
};

/// H(p) / ln E in [0, 1]; 1 for E = 1. Throws DomainError when total = 0.
double balancedness(const ExpertHistogram& hist);

/// Dirichlet concentration whose expected realized balancedness matches a
/// target, for a given expert count and assignment total.
struct Calibration {
  double alpha = 1.0;
  double expected_beta = 0.0;
};

inline constexpr double kBetaTolerance = 0.03;

/// Memoized per (E, total, beta). Throws DomainError when the target cannot
/// be met within kBetaTolerance.
Calibration calibrate_concentration(std::int64_t E, std::int64_t total,
                                    double beta_target);

/// Draws S * top_k assignments at a target balancedness. beta_target = 1
/// returns the exact uniform histogram without drawing.
RoutingSample sample_histogram(std::int64_t E, std::int64_t S,
                               std::int64_t top_k, double beta_target,
                               std::uint64_t seed);

/// sum_e ceil(c_e / bm)
std::int64_t m_tiles(const ExpertHistogram& hist, std::int64_t bm);

/// m_tiles * n_tiles * split_k
std::int64_t grid_size(const TileConfig& c, const ExpertHistogram& hist,
                       const MoeGeometry& geom);

/// g / sm_count, not rounded to whole waves.
double wave_utilization(std::int64_t g, const HardwareModel& hw);

/// `seed,beta_target,beta_achieved,c_0,...,c_{E-1}`
std::string routing_csv_header(std::int64_t E);
std::string to_csv_line(const RoutingSample& s);

/// Reads one histogram with E counts. Accepts either a bare count row or a
/// sampler row (three leading fields); lines starting with a letter are
/// headers. Throws ParseError or ValidationError with the line number.
ExpertHistogram parse_histogram_csv(std::string_view text, std::int64_t E);

}  // namespace ramp
