// SPDX-License-Identifier: Apache-2.0
#include "ramp/hardware.hpp"

#include <fstream>
#include <sstream>

#include "ramp/error.hpp"

namespace ramp {

void HardwareModel::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw ValidationError(std::string("hardware model: ") + what);
  };
  require(sm_count > 0, "sm_count must be > 0");
  require(smem_capacity > 0, "smem_capacity must be > 0");
  require(l2_effective > 0, "l2_effective must be > 0");
  require(l2_effective <= 60LL * 1024 * 1024, "l2_effective must be <= 60 MB");
  require(elem_size > 0, "elem_size must be > 0");
  require(rho_c_empirical > 0, "rho_c_empirical must be > 0");
  require(rho_c_analytic > 0, "rho_c_analytic must be > 0");
  require(startup_us > 0, "startup_us must be > 0");
  require(wgmma_ns_per_tile > 0, "wgmma_ns_per_tile must be > 0");
  require(splitk_launch_overhead_us > 0,
          "splitk_launch_overhead_us must be > 0");
}

HardwareModel hardware_from_json(const nlohmann::json& j, HardwareModel hw) {
  if (!j.is_object()) throw ParseError("hardware model: expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "sm_count") hw.sm_count = value.get<std::int64_t>();
      else if (key == "smem_capacity") hw.smem_capacity = value.get<std::int64_t>();
      else if (key == "l2_effective") hw.l2_effective = value.get<std::int64_t>();
      else if (key == "elem_size") hw.elem_size = value.get<std::int64_t>();
      else if (key == "rho_c_empirical") hw.rho_c_empirical = value.get<double>();
      else if (key == "rho_c_analytic") hw.rho_c_analytic = value.get<double>();
      else if (key == "startup_us") hw.startup_us = value.get<double>();
      else if (key == "wgmma_ns_per_tile") hw.wgmma_ns_per_tile = value.get<double>();
      else if (key == "splitk_launch_overhead_us")
        hw.splitk_launch_overhead_us = value.get<double>();
      else throw ParseError("hardware model: unknown field '" + key + "'");
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("hardware model: field '" + key + "': " + e.what());
    }
  }
  hw.validate();
  return hw;
}

nlohmann::json hardware_to_json(const HardwareModel& hw) {
  return {{"sm_count", hw.sm_count},
          {"smem_capacity", hw.smem_capacity},
          {"l2_effective", hw.l2_effective},
          {"elem_size", hw.elem_size},
          {"rho_c_empirical", hw.rho_c_empirical},
          {"rho_c_analytic", hw.rho_c_analytic},
          {"startup_us", hw.startup_us},
          {"wgmma_ns_per_tile", hw.wgmma_ns_per_tile},
          {"splitk_launch_overhead_us", hw.splitk_launch_overhead_us}};
}

HardwareModel load_hardware(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open hardware file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("hardware file '" + path + "': " + e.what());
  }
  return hardware_from_json(j);
}

}  // namespace ramp
