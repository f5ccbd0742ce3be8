// SPDX-License-Identifier: Apache-2.0
#include "ramp/config.hpp"

#include <algorithm>
#include <array>
#include <tuple>
#include <utility>

#include <json.hpp>

#include "ramp/error.hpp"

namespace ramp {

namespace {

struct Factorization {
  std::int64_t bn;
  std::int64_t wn;
};

constexpr std::array<std::pair<std::int64_t, std::array<Factorization, 2>>, 2>
    kTileShapes = {{{256, {{{64, 4}, {128, 2}}}}, {512, {{{128, 4}, {256, 2}}}}}};

constexpr std::int64_t kBmMin = 2;
constexpr std::int64_t kBmMax = 104;
constexpr std::int64_t kStgMax = 5;
constexpr std::int64_t kSplitK = 4;

}  // namespace

bool TileConfig::fields_valid() const {
  if (ttn != 256 && ttn != 512) return false;
  if (bn * wn != ttn || bn < 1 || wn < 1) return false;
  if (stg < 1 || stg > kStgMax) return false;
  if (bm < kBmMin || bm > kBmMax || bm % 2 != 0) return false;
  return split_k == 1 || split_k == kSplitK;
}

std::string TileConfig::label() const {
  std::string s = "bm" + std::to_string(bm) + "_ttn" + std::to_string(ttn) +
                  "_bn" + std::to_string(bn) + "x" + std::to_string(wn) +
                  "_s" + std::to_string(stg);
  if (group_m) s += "_gm";
  if (split_k > 1) s += "_sk" + std::to_string(split_k);
  return s;
}

std::int64_t smem_usage(const TileConfig& c, const HardwareModel& hw) {
  return c.stg * (c.bm + c.ttn) * kTileKRef * hw.elem_size;
}

bool is_valid(const TileConfig& c, const HardwareModel& hw,
              const MoeGeometry& geom) {
  if (!c.fields_valid()) return false;
  if (smem_usage(c, hw) > hw.smem_capacity) return false;
  if (c.split_k > 1 && !classify_regime(region_variables(geom), hw).split_k_eligible)
    return false;
  return true;
}

ConfigPool enumerate_configs(const MoeGeometry& geom, const HardwareModel& hw,
                             const RegimeReport& regime) {
  ConfigPool pool;
  for (std::int64_t bm = kBmMin; bm <= kBmMax; bm += 2) {
    for (const auto& [ttn, shapes] : kTileShapes) {
      for (const auto& f : shapes) {
        for (std::int64_t stg = 1; stg <= kStgMax; ++stg) {
          TileConfig base{0, bm, f.bn, f.wn, stg, ttn, false, 1};
          if (!is_valid(base, hw, geom)) continue;
          for (bool gm : {false, true}) {
            if (gm && !regime.group_m_required) continue;
            TileConfig c = base;
            c.group_m = gm;
            pool.push_back(c);
            if (regime.split_k_eligible) {
              c.split_k = kSplitK;
              if (is_valid(c, hw, geom)) pool.push_back(c);
            }
          }
        }
      }
    }
  }
  if (pool.empty())
    throw DomainError("no valid tile configuration for model '" + geom.name +
                      "' under this hardware model (smem_capacity=" +
                      std::to_string(hw.smem_capacity) + ")");
  auto key = [](const TileConfig& c) {
    return std::tie(c.bm, c.ttn, c.stg, c.group_m, c.split_k, c.bn);
  };
  std::sort(pool.begin(), pool.end(),
            [&](const TileConfig& x, const TileConfig& y) { return key(x) < key(y); });
  for (std::size_t i = 0; i < pool.size(); ++i)
    pool[i].id = static_cast<std::int64_t>(i);
  return pool;
}

std::int64_t n_tiles(const TileConfig& c, const MoeGeometry& geom) {
  return (geom.N + c.ttn - 1) / c.ttn;
}

std::string pool_to_json(const ConfigPool& pool) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& c : pool)
    j.push_back({{"id", c.id}, {"bm", c.bm}, {"bn", c.bn}, {"wn", c.wn},
                 {"stg", c.stg}, {"ttn", c.ttn}, {"group_m", c.group_m},
                 {"split_k", c.split_k}});
  return j.dump(1) + "\n";
}

ConfigPool parse_pool(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("pool: ") + e.what());
  }
  if (!j.is_array()) throw ParseError("pool: top level must be a JSON array");
  ConfigPool pool;
  pool.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& e = j[i];
    TileConfig c;
    try {
      c.id = e.at("id").get<std::int64_t>();
      c.bm = e.at("bm").get<std::int64_t>();
      c.bn = e.at("bn").get<std::int64_t>();
      c.wn = e.at("wn").get<std::int64_t>();
      c.stg = e.at("stg").get<std::int64_t>();
      c.ttn = e.at("ttn").get<std::int64_t>();
      c.group_m = e.at("group_m").get<bool>();
      c.split_k = e.at("split_k").get<std::int64_t>();
    } catch (const nlohmann::json::exception& ex) {
      throw ParseError("pool entry " + std::to_string(i) + ": " + ex.what());
    }
    if (c.id != static_cast<std::int64_t>(i))
      throw ValidationError("pool entry " + std::to_string(i) +
                            ": ids must be dense and ordered, got " +
                            std::to_string(c.id));
    if (!c.fields_valid())
      throw ValidationError("pool entry " + std::to_string(i) +
                            ": field ranges violated (" + c.label() + ")");
    pool.push_back(c);
  }
  return pool;
}

}  // namespace ramp
