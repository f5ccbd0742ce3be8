// SPDX-License-Identifier: Apache-2.0
#include "ramp/catalog.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "ramp/error.hpp"

namespace ramp {

Rational Rational::of(std::int64_t n, std::int64_t d) {
  if (d <= 0) throw ValidationError("rational with non-positive denominator");
  const std::int64_t g = std::gcd(n, d);
  return {n / g, d / g};
}

void MoeGeometry::validate() const {
  auto fail = [this](const std::string& what) {
    throw ValidationError("model '" + name + "': " + what);
  };
  if (name.empty()) throw ValidationError("model with empty name");
  if (E < 1) fail("E >= 1 violated (E=" + std::to_string(E) + ")");
  if (N < 1) fail("N >= 1 violated (N=" + std::to_string(N) + ")");
  if (K < 1) fail("K >= 1 violated (K=" + std::to_string(K) + ")");
  if (top_k < 1 || top_k > E)
    fail("1 <= top_k <= E violated (top_k=" + std::to_string(top_k) + ")");
}

std::string RegimeReport::predicted_modes() const {
  std::string out = "Tile";
  if (!group_m_required && !split_k_reachable) return out + " only";
  if (group_m_required) out += " + GROUP_M";
  if (split_k_reachable) out += " + split-K";
  return out;
}

std::string_view to_string(Regime r) { return r == Regime::A ? "A" : "B"; }

RegionVariables region_variables(const MoeGeometry& geom) {
  RegionVariables v;
  v.rho = Rational::of(geom.N * geom.K, kTtnRef * kTileKRef);
  v.lambda = (geom.N + kTtnRef - 1) / kTtnRef;
  v.kappa = Rational::of(geom.K, kTileKRef);
  v.misaligned = !geom.tile_aligned();
  return v;
}

RegimeReport classify_regime(const RegionVariables& vars,
                             const HardwareModel& hw) {
  RegimeReport r;
  r.regime = vars.rho.value() >= hw.rho_c_empirical ? Regime::B : Regime::A;
  // lambda*kappa > L2_eff / (ttn_ref * tile_k_ref * elem), compared exactly.
  const Rational lk = vars.lambda_kappa();
  const std::int64_t tile_bytes = kTtnRef * kTileKRef * hw.elem_size;
  r.group_m_required = lk.num * tile_bytes > hw.l2_effective * lk.den;
  r.split_k_eligible = vars.kappa.num >= 48 * vars.kappa.den;
  r.ttn512_preferred_when_multiwave = r.regime == Regime::B;
  // Fewest CTAs any config can launch: one M-tile at ttn = 2 * ttn_ref.
  const std::int64_t min_grid = (vars.lambda + 1) / 2;
  r.split_k_reachable =
      r.split_k_eligible &&
      static_cast<double>(min_grid) < 0.2 * static_cast<double>(hw.sm_count);
  return r;
}

namespace {

std::size_t line_of(std::string_view text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(
                 std::count(text.begin(), text.begin() + byte, '\n'));
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return out;
}

}  // namespace

std::vector<MoeGeometry> parse_catalog(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("catalog: parse error at line " +
                     std::to_string(line_of(text, e.byte)) + ": " + e.what());
  }
  if (!j.is_array()) throw ParseError("catalog: top level must be a JSON array");
  std::vector<MoeGeometry> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& e = j[i];
    MoeGeometry g;
    try {
      g.name = e.at("name").get<std::string>();
      g.E = e.at("E").get<std::int64_t>();
      g.N = e.at("N").get<std::int64_t>();
      g.K = e.at("K").get<std::int64_t>();
      g.top_k = e.at("top_k").get<std::int64_t>();
    } catch (const nlohmann::json::exception& ex) {
      throw ParseError("catalog entry " + std::to_string(i) + ": " + ex.what());
    }
    g.validate();
    if (find_model(out, g.name))
      throw ValidationError("catalog: duplicate model name '" + g.name + "'");
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<MoeGeometry> load_catalog(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open catalog '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_catalog(ss.str());
}

std::string catalog_to_json(const std::vector<MoeGeometry>& models) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& m : models)
    j.push_back({{"name", m.name}, {"E", m.E}, {"N", m.N}, {"K", m.K},
                 {"top_k", m.top_k}});
  return j.dump(2) + "\n";
}

const std::vector<MoeGeometry>& default_catalog() {
  // (E, N, K) per architecture; top_k from the public model cards.
  static const std::vector<MoeGeometry> models = {
      {"OLMoE", 64, 2048, 2048, 8},      {"Qwen3", 128, 1536, 2048, 8},
      {"DSv3-EP8", 32, 512, 7168, 8},    {"Mixtral", 8, 32768, 6144, 2},
      {"DSv3-TP8", 256, 512, 7168, 8},   {"Phi-3.5-MoE", 16, 12800, 4096, 2},
      {"Jamba-1.5", 16, 16384, 4096, 2}, {"DBRX", 16, 21504, 6144, 4},
  };
  return models;
}

std::optional<MoeGeometry> find_model(const std::vector<MoeGeometry>& models,
                                      std::string_view name) {
  const std::string key = lower(name);
  for (const auto& m : models)
    if (lower(m.name) == key) return m;
  return std::nullopt;
}

const std::vector<ExpectedRegion>& expected_regions() {
  static const std::vector<ExpectedRegion> rows = {
      {"OLMoE", 128, 8, 16, Regime::A, "Tile only"},
      {"Qwen3", 96, 6, 16, Regime::A, "Tile only"},
      {"DSv3-EP8", 112, 2, 56, Regime::A, "Tile + split-K"},
      {"Mixtral", 6144, 128, 48, Regime::B, "Tile + GROUP_M"},
      {"DSv3-TP8", 112, 2, 56, Regime::A, "Tile + split-K"},
      {"Phi-3.5-MoE", 1600, 50, 32, Regime::B, "Tile + GROUP_M"},
      {"Jamba-1.5", 2048, 64, 32, Regime::B, "Tile + GROUP_M"},
      {"DBRX", 4032, 84, 48, Regime::B, "Tile + GROUP_M"},
  };
  return rows;
}

}  // namespace ramp

namespace ramp {

std::vector<std::string> check_expected_regions(const std::vector<MoeGeometry>& models,
                                                const HardwareModel& hw) {
  std::vector<std::string> out;
  for (const auto& row : expected_regions()) {
    const auto m = find_model(models, row.name);
    if (!m) {
      out.push_back(std::string(row.name) + ": missing from catalog");
      continue;
    }
    const RegionVariables v = region_variables(*m);
    const RegimeReport r = classify_regime(v, hw);
    auto mismatch = [&](const char* what, const std::string& got, const std::string& want) {
      out.push_back(std::string(row.name) + ": " + what + " is " + got + ", expected " + want);
    };
    auto rat = [](const Rational& q) {
      return q.is_integer() ? std::to_string(q.num)
                            : std::to_string(q.num) + "/" + std::to_string(q.den);
    };
    if (!(v.rho == Rational{row.rho, 1})) mismatch("rho", rat(v.rho), std::to_string(row.rho));
    if (v.lambda != row.lambda)
      mismatch("lambda", std::to_string(v.lambda), std::to_string(row.lambda));
    if (!(v.kappa == Rational{row.kappa, 1}))
      mismatch("kappa", rat(v.kappa), std::to_string(row.kappa));
    if (r.regime != row.regime)
      mismatch("regime", std::string(to_string(r.regime)), std::string(to_string(row.regime)));
    if (r.predicted_modes() != row.modes)
      mismatch("modes", r.predicted_modes(), std::string(row.modes));
  }
  for (const auto& m : models) {
    const bool known = std::any_of(expected_regions().begin(), expected_regions().end(),
                                   [&](const ExpectedRegion& e) { return lower(e.name) == lower(m.name); });
    if (!known) out.push_back(m.name + ": no reference row to compare against");
  }
  return out;
}

}  // namespace ramp
