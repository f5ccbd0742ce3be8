// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ramp/hardware.hpp"

namespace ramp {

/// P2: a + k*g.  P3: a + b*g/SM + c*g.  P4: P3 plus d*ln(g+1) when the
/// median profiling grid is sub-wave.
enum class Variant { P2, P3, P4 };

std::string_view to_string(Variant v);
/// Accepts "p2"/"P2" etc. Throws ValidationError otherwise.
Variant parse_variant(std::string_view s);

struct CostCoefficients {
  double a = 0.0;
  double b = 0.0;
  double c = 0.0;
  double d = 0.0;
  bool uses_log = false;
  Variant variant = Variant::P4;
};

struct ProfilingSample {
  std::int64_t config_id = 0;
  std::int64_t S = 0;
  double beta_target = 1.0;
  std::int64_t seed = 0;
  std::int64_t grid = 0;
  double time_us = 0.0;
};

struct FitReport {
  CostCoefficients coefficients;
  double r_squared = 0.0;
  std::size_t n_samples = 0;
  double median_grid = 0.0;
  /// A design column lay in the span of the others and was dropped.
  bool condition_flag = false;
};

/// a + b*g/SM + c*g + d*ln(g+1); d contributes only when uses_log.
double predict(const CostCoefficients& k, std::int64_t g, const HardwareModel& hw);

/// Least squares over the variant's design. Columns that are linear
/// combinations of the others are removed rightmost first and their
/// coefficients left at zero. Throws DomainError on no samples or fewer
/// than two distinct grids.
FitReport fit(std::span<const ProfilingSample> samples, const HardwareModel& hw,
              Variant variant);

/// 1 - SS_res/SS_tot; for constant data 1 if exact else -infinity.
double r_squared(const CostCoefficients& k, std::span<const ProfilingSample> samples,
                 const HardwareModel& hw);

struct PlanPoint {
  std::int64_t S = 0;
  double beta = 1.0;
  friend bool operator==(const PlanPoint&, const PlanPoint&) = default;
};

inline const std::vector<std::int64_t> kDefaultPlanS = {8, 32, 64, 128, 512};
inline const std::vector<double> kDefaultPlanBeta = {0.3, 0.5, 0.6, 0.7, 1.0};
inline constexpr int kDefaultSeedsPerPoint = 3;

/// Cartesian product, S-major.
std::vector<PlanPoint> profiling_plan(const std::vector<std::int64_t>& S = kDefaultPlanS,
                                      const std::vector<double>& beta = kDefaultPlanBeta);

struct CoefficientEntry {
  std::int64_t config_id = 0;
  CostCoefficients coefficients;
  double r_squared = 0.0;
};

struct CoefficientStore {
  std::string model;
  std::int64_t sm_count = 132;
  std::vector<CoefficientEntry> entries;
  /// Configs left out because their samples could not support a fit.
  std::vector<std::int64_t> excluded;
};

std::string store_to_json(const CoefficientStore& store);
CoefficientStore parse_store(std::string_view text);

}  // namespace ramp

namespace ramp {

struct FitSummary {
  CoefficientStore store;
  std::vector<FitReport> reports;  // parallel to store.entries
  /// Excluded config ids with the reason each could not be fitted.
  std::vector<std::pair<std::int64_t, std::string>> failures;

  [[nodiscard]] double median_r_squared() const;
  [[nodiscard]] double min_r_squared() const;
  [[nodiscard]] std::size_t log_term_count() const;
};

/// Fits every config id in [0, pool_size). Configs whose samples cannot
/// support a fit are recorded in store.excluded rather than dropped.
FitSummary fit_all(std::span<const ProfilingSample> samples, std::int64_t pool_size,
                   const HardwareModel& hw, Variant variant, const std::string& model);

}  // namespace ramp
