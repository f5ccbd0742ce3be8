// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <string>

#include "ramp/dispatch.hpp"

namespace ramp::test {

inline MoeGeometry model(const std::string& name) { return *find_model(default_catalog(), name); }

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("ramp_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  [[nodiscard]] const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// Times drawn exactly from the cost-model family: every config i follows
/// its own (a, b, c, d), so a fitted table should reproduce it.
class FamilyOracle final : public TimingOracle {
 public:
  FamilyOracle(MoeGeometry geom, std::vector<CostCoefficients> k, HardwareModel hw = {})
      : geom_(std::move(geom)), k_(std::move(k)), hw_(hw) {}
  double time_us(const TileConfig& c, const ExpertHistogram& hist, const OracleQuery&) const override {
    return predict(k_.at(static_cast<std::size_t>(c.id)), grid_size(c, hist, geom_), hw_);
  }
  [[nodiscard]] std::string_view provenance() const override { return "family"; }

 private:
  MoeGeometry geom_;
  std::vector<CostCoefficients> k_;
  HardwareModel hw_;
};

inline CoefficientStore store_of(const std::vector<CostCoefficients>& k) {
  CoefficientStore s;
  for (std::size_t i = 0; i < k.size(); ++i)
    s.entries.push_back({static_cast<std::int64_t>(i), k[i], 1.0});
  return s;
}

}  // namespace ramp::test
