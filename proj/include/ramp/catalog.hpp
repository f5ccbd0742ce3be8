// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ramp/hardware.hpp"

namespace ramp {

/// Exact non-negative fraction; kept reduced.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  static Rational of(std::int64_t n, std::int64_t d);
  [[nodiscard]] double value() const {
    return static_cast<double>(num) / static_cast<double>(den);
  }
  [[nodiscard]] bool is_integer() const { return den == 1; }
  friend bool operator==(const Rational&, const Rational&) = default;
};

/// Shape of one MoE feed-forward layer.
struct MoeGeometry {
  std::string name;
  std::int64_t E = 1;
  std::int64_t N = 1;
  std::int64_t K = 1;
  std::int64_t top_k = 1;

  /// Throws ValidationError naming the violated invariant.
  void validate() const;
  /// True when N and K are whole multiples of the reference tile.
  [[nodiscard]] bool tile_aligned() const {
    return N % kTtnRef == 0 && K % kTileKRef == 0;
  }
};

struct RegionVariables {
  Rational rho;            // N*K / (ttn_ref * tile_k_ref)
  std::int64_t lambda = 0; // ceil(N / ttn_ref)
  Rational kappa;          // K / tile_k_ref
  bool misaligned = false; // K or N not a multiple of the reference tile

  [[nodiscard]] Rational lambda_kappa() const {
    return Rational::of(lambda * kappa.num, kappa.den);
  }
};

enum class Regime { A, B };

struct RegimeReport {
  Regime regime = Regime::A;
  bool group_m_required = false;
  bool split_k_eligible = false;
  bool ttn512_preferred_when_multiwave = false;
  /// Split-K eligible and the smallest possible grid (one M-tile at
  /// ttn=512) sits under the 0.2-wave gate, so split-K can actually fire.
  bool split_k_reachable = false;

  /// "Tile only", "Tile + GROUP_M", "Tile + split-K", ...
  [[nodiscard]] std::string predicted_modes() const;
};

std::string_view to_string(Regime r);

RegionVariables region_variables(const MoeGeometry& geom);
RegimeReport classify_regime(const RegionVariables& vars,
                             const HardwareModel& hw = {});

/// Parses the descriptor format: a JSON array of
/// {"name", "E", "N", "K", "top_k"} objects.
std::vector<MoeGeometry> parse_catalog(std::string_view text);
std::vector<MoeGeometry> load_catalog(const std::string& path);
std::string catalog_to_json(const std::vector<MoeGeometry>& models);

/// The eight production architectures shipped with the library.
const std::vector<MoeGeometry>& default_catalog();

/// Case-insensitive lookup.
std::optional<MoeGeometry> find_model(const std::vector<MoeGeometry>& models,
                                      std::string_view name);

/// Reference classification row used by `classify --check`.
struct ExpectedRegion {
  std::string_view name;
  std::int64_t rho;
  std::int64_t lambda;
  std::int64_t kappa;
  Regime regime;
  std::string_view modes;
};

const std::vector<ExpectedRegion>& expected_regions();

}  // namespace ramp

namespace ramp {

/// One line per disagreement between the models' computed classification
/// and the reference rows; models absent from either side are reported too.
std::vector<std::string> check_expected_regions(const std::vector<MoeGeometry>& models,
                                                const HardwareModel& hw = {});

}  // namespace ramp
