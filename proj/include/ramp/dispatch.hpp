// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ramp/catalog.hpp"
#include "ramp/config.hpp"
#include "ramp/cost_model.hpp"
#include "ramp/hardware.hpp"
#include "ramp/routing.hpp"
#include "ramp/timing_oracle.hpp"

namespace ramp {

inline constexpr double kSplitKOmegaGate = 0.2;

/// kappa >= 48 and omega < 0.2.
bool split_k_gate(const RegionVariables& vars, double omega);

struct Selection {
  std::int64_t config_id = -1;
  double predicted_us = 0.0;
  std::int64_t grid = 0;
  double omega = 0.0;
};

/// Fitted coefficients for one model's pool. Configs named in the store's
/// `excluded` list carry no coefficients and are never selected.
class DispatchTable {
 public:
  DispatchTable(MoeGeometry geom, ConfigPool pool, const CoefficientStore& store,
                HardwareModel hw = {});

  /// Argmin of predicted time; ties go to the lowest id. Split-K configs are
  /// skipped unless the gate passes at their non-split twin's grid.
  [[nodiscard]] Selection evaluate(const ExpertHistogram& hist) const;

  [[nodiscard]] const MoeGeometry& geometry() const { return geom_; }
  [[nodiscard]] const ConfigPool& pool() const { return pool_; }
  [[nodiscard]] const HardwareModel& hardware() const { return hw_; }
  [[nodiscard]] const std::optional<CostCoefficients>& coefficients(std::int64_t id) const {
    return coeffs_.at(static_cast<std::size_t>(id));
  }
  /// Number of predict() calls made so far.
  [[nodiscard]] std::int64_t evaluations() const { return evaluations_.load(); }
  void reset_evaluations() { evaluations_ = 0; }

 private:
  MoeGeometry geom_;
  RegionVariables vars_;
  ConfigPool pool_;
  std::vector<std::optional<CostCoefficients>> coeffs_;
  HardwareModel hw_;
  mutable std::atomic<std::int64_t> evaluations_{0};
};

/// Selections for the current step keyed on total assignment count.
class StepCache {
 public:
  [[nodiscard]] std::optional<Selection> lookup(std::int64_t step, std::int64_t M);
  void store(std::int64_t step, std::int64_t M, const Selection& s);
  [[nodiscard]] std::size_t size() const { return by_m_.size(); }

 private:
  void advance(std::int64_t step);
  std::int64_t step_ = -1;
  std::unordered_map<std::int64_t, Selection> by_m_;
};

Selection select_config(const DispatchTable& table, const ExpertHistogram& hist,
                        StepCache& cache, std::int64_t step_id);

/// Config with the lowest geomean oracle time over uniform routing at each S.
std::int64_t static_best(const ConfigPool& pool, const MoeGeometry& geom,
                         const TimingOracle& oracle, const std::vector<std::int64_t>& S_grid);

inline const std::vector<std::int64_t> kDefaultTestS = {8, 16, 32, 64, 128, 1024};
inline const std::vector<double> kDefaultTestBeta = {0.2, 0.5, 0.8, 1.0};

struct EvalOptions {
  std::vector<PlanPoint> points = profiling_plan(kDefaultTestS, kDefaultTestBeta);
  /// Routing draws per point; uniform points are drawn once.
  int seeds = 2;
  std::uint64_t master_seed = kDefaultMasterSeed;
};

/// Points whose balancedness the sampler can reach for this geometry, and
/// the ones it cannot.
struct ReachablePoints {
  std::vector<PlanPoint> reachable;
  std::vector<PlanPoint> skipped;
};
ReachablePoints split_reachable(const std::vector<PlanPoint>& points, const MoeGeometry& geom);

std::uint64_t eval_routing_seed(std::uint64_t master, std::int64_t S, double beta,
                                std::int64_t r);
/// One noise stream per evaluation point, shared by every config there.
std::uint64_t eval_noise_seed(std::uint64_t master, std::int64_t S, double beta,
                              std::int64_t r);

struct RegretRecord {
  std::int64_t S = 0;
  double beta = 0.0;
  std::int64_t seed = 0;
  std::int64_t selected_id = 0;
  std::int64_t best_id = 0;
  double selected_us = 0.0;
  double best_us = 0.0;
  double regret = 0.0;
};

struct Aggregate {
  double mean = 0.0;
  double se = 0.0;
  double max = 0.0;
  std::size_t n = 0;
};

Aggregate aggregate(const std::vector<double>& xs);

struct RegretReport {
  std::vector<RegretRecord> records;
  Aggregate summary;

  [[nodiscard]] std::string to_csv() const;
  [[nodiscard]] std::string to_json() const;
};

/// Sampler errors propagate; filter with split_reachable first if needed.
RegretReport evaluate_regret(const DispatchTable& table, const TimingOracle& oracle,
                             const EvalOptions& opts);

struct SpeedupRecord {
  std::int64_t S = 0;
  double beta = 0.0;
  std::int64_t seed = 0;
  std::int64_t static_id = 0;
  std::int64_t ra_id = 0;
  double static_us = 0.0;
  double ra_us = 0.0;
  double ratio = 1.0;
};

struct BetaGroup {
  double beta = 0.0;
  double geomean = 1.0;
  double max = 1.0;
  double min = 1.0;
  std::size_t n = 0;
};

struct SpeedupReport {
  std::vector<SpeedupRecord> records;
  std::vector<BetaGroup> by_beta;

  [[nodiscard]] std::string to_csv() const;
  [[nodiscard]] std::string to_json() const;
};

/// Static is tuned per batch size (best uniform-routing config at that S)
/// and then held fixed across balancedness levels.
SpeedupReport speedup_ra_vs_static(const DispatchTable& table, const TimingOracle& oracle,
                                   const EvalOptions& opts);

}  // namespace ramp
