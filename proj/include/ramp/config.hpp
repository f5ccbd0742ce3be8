// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "ramp/catalog.hpp"
#include "ramp/hardware.hpp"

namespace ramp {

/// One fused-MoE kernel configuration; the unit of dispatch.
struct TileConfig {
  std::int64_t id = 0;
  std::int64_t bm = 16;
  std::int64_t bn = 128;
  std::int64_t wn = 2;
  std::int64_t stg = 3;
  std::int64_t ttn = 256;
  bool group_m = false;
  std::int64_t split_k = 1;

  /// Field-range invariants only; smem and geometry checks live in is_valid.
  [[nodiscard]] bool fields_valid() const;
  /// "bm16_ttn256_bn128x2_s3[_gm][_sk4]"
  [[nodiscard]] std::string label() const;

  friend bool operator==(const TileConfig&, const TileConfig&) = default;
};

using ConfigPool = std::vector<TileConfig>;

/// Pipeline buffer estimate: stg * (bm + ttn) * tile_k * elem bytes.
std::int64_t smem_usage(const TileConfig& c, const HardwareModel& hw);

bool is_valid(const TileConfig& c, const HardwareModel& hw,
              const MoeGeometry& geom);

/// Deterministic pool, ids dense in sort order. Throws DomainError if empty.
ConfigPool enumerate_configs(const MoeGeometry& geom, const HardwareModel& hw,
                             const RegimeReport& regime);

/// ceil(N / ttn)
std::int64_t n_tiles(const TileConfig& c, const MoeGeometry& geom);

std::string pool_to_json(const ConfigPool& pool);
/// Ids must be dense 0..n-1 in file order.
ConfigPool parse_pool(std::string_view text);

}  // namespace ramp
