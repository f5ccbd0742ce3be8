// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

namespace ramp {

/// Reference tile used for the geometry-level region variables. Per-config
/// work uses the config's own tile, but rho/lambda/kappa are always quoted
/// against this one.
inline constexpr std::int64_t kTtnRef = 256;
inline constexpr std::int64_t kTileKRef = 128;

/// Hopper-class constraint and timing constants. Defaults describe an H200.
struct HardwareModel {
  std::int64_t sm_count = 132;
  std::int64_t smem_capacity = 227 * 1024;
  std::int64_t l2_effective = 45LL * 1024 * 1024;  // 0.75 x 60 MB
  std::int64_t elem_size = 1;                      // FP8
  double rho_c_empirical = 200.0;
  double rho_c_analytic = 186.0;
  double startup_us = 24.0;
  double wgmma_ns_per_tile = 130.0;
  double splitk_launch_overhead_us = 12.5;

  /// Throws ValidationError naming the first violated field.
  void validate() const;

  /// L2 capacity measured in reference weight tiles (1440 for the defaults).
  [[nodiscard]] double group_m_threshold() const {
    return static_cast<double>(l2_effective) /
           static_cast<double>(kTtnRef * kTileKRef * elem_size);
  }

  /// Startup cost over per-tile WGMMA time: the crossover density predicted
  /// from first principles (~185 for the defaults).
  [[nodiscard]] double derived_rho_c() const {
    return startup_us * 1000.0 / wgmma_ns_per_tile;
  }
};

/// Reads a partial JSON object on top of `base`; unknown keys are rejected.
HardwareModel hardware_from_json(const nlohmann::json& j,
                                 HardwareModel base = {});
nlohmann::json hardware_to_json(const HardwareModel& hw);
HardwareModel load_hardware(const std::string& path);

}  // namespace ramp
