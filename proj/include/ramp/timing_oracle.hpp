// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "ramp/catalog.hpp"
#include "ramp/config.hpp"
#include "ramp/cost_model.hpp"
#include "ramp/hardware.hpp"
#include "ramp/routing.hpp"
#include "ramp/seed.hpp"

namespace ramp {

/// Knobs of the wave-quantization simulator. Times in microseconds.
struct OracleParams {
  double startup_base_us = 14.0;
  double startup_per_stage_us = 2.0;
  double wgmma_ns_per_tile = 130.0;
  /// Fraction of the per-tile WGMMA time spent on the throughput path.
  double tile_efficiency = 0.3;
  /// A CTA with bm rows costs (bm + bm_overhead_rows) / bm_rows_per_tile
  /// M-tiles of work.
  double bm_overhead_rows = 32.0;
  double bm_rows_per_tile = 16.0;
  /// Pipeline latency per K-tile, divided across stages.
  double latency_per_ktile_us = 1.7;
  double cta_fill_us = 2.0;
  double hbm_bw_bytes_per_us = 4.8e6;
  /// Gate, up and down projections each stream the weight tile once.
  double weight_passes = 3.0;
  double l2_thrash_multiplier = 2.0;
  double groupm_overhead_frac = 0.02;
  double splitk_overhead_us = 12.5;
  double splitk_partial_bytes = 4.0;
  double subwave_exponent = 0.3;
  double noise_cv = 0.01;

  /// Throws ValidationError naming the first violated field.
  void validate() const;
};

OracleParams oracle_params_from_json(const nlohmann::json& j, OracleParams base = {});
nlohmann::json oracle_params_to_json(const OracleParams& p);

/// Noise-free building blocks of the simulated time for one config.
struct SimTerms {
  double startup_us = 0.0;
  double throughput_us = 0.0;  // per full wave, scales sub-linearly below one
  double latency_us = 0.0;     // per wave, paid in full by any non-empty wave
  double traffic_us = 0.0;     // per CTA
  double fixed_us = 0.0;       // split-K reduction launch
  double scale = 1.0;          // GROUP_M bookkeeping when it does not pay off

  [[nodiscard]] double wave_cost() const { return throughput_us + latency_us; }
};

SimTerms simulation_terms(const TileConfig& c, const MoeGeometry& geom,
                          const OracleParams& p, const HardwareModel& hw);

/// Time at a given grid. Without a noise seed (or with noise_cv = 0) the
/// result is the deterministic mean. Rounded to whole nanoseconds, >= 1 ns.
double simulate_time_at_grid(const TileConfig& c, std::int64_t g,
                             const MoeGeometry& geom, const OracleParams& p,
                             const HardwareModel& hw,
                             std::optional<std::uint64_t> noise_seed);

double simulate_time(const TileConfig& c, const ExpertHistogram& hist,
                     const MoeGeometry& geom, const OracleParams& p,
                     const HardwareModel& hw,
                     std::optional<std::uint64_t> noise_seed);

/// Identifies one measurement: a routing draw (S, beta, seed index) plus the
/// noise stream to use for it.
struct OracleQuery {
  std::int64_t S = 0;
  double beta = 1.0;
  std::int64_t seed = 0;
  std::optional<std::uint64_t> noise_seed;
};

class TimingOracle {
 public:
  virtual ~TimingOracle() = default;
  virtual double time_us(const TileConfig& c, const ExpertHistogram& hist,
                         const OracleQuery& q) const = 0;
  [[nodiscard]] virtual std::string_view provenance() const = 0;
};

class SimulatorOracle final : public TimingOracle {
 public:
  SimulatorOracle(MoeGeometry geom, OracleParams params, HardwareModel hw);
  double time_us(const TileConfig& c, const ExpertHistogram& hist,
                 const OracleQuery& q) const override;
  [[nodiscard]] std::string_view provenance() const override { return "simulator"; }
  [[nodiscard]] const OracleParams& params() const { return params_; }

 private:
  MoeGeometry geom_;
  OracleParams params_;
  HardwareModel hw_;
};

struct TimingTrace {
  std::string model;
  std::vector<ProfilingSample> samples;
  std::string provenance = "simulator";  // or "external"
};

/// Answers queries from recorded samples keyed by (config_id, S, beta, seed);
/// the histogram is ignored. Throws DomainError for unrecorded keys.
class TraceOracle final : public TimingOracle {
 public:
  explicit TraceOracle(const TimingTrace& trace);
  double time_us(const TileConfig& c, const ExpertHistogram& hist,
                 const OracleQuery& q) const override;
  [[nodiscard]] std::string_view provenance() const override { return "external"; }

 private:
  std::map<std::tuple<std::int64_t, std::int64_t, std::uint64_t, std::int64_t>, double>
      times_;
};

struct ProfileOptions {
  std::vector<PlanPoint> plan = profiling_plan();
  int seeds_per_point = kDefaultSeedsPerPoint;
  std::uint64_t master_seed = kDefaultMasterSeed;
  /// 0 picks std::thread::hardware_concurrency().
  unsigned threads = 0;
};

/// Routing draw used for plan point (S, beta), repetition r.
std::uint64_t routing_seed(std::uint64_t master, std::int64_t S, double beta,
                           std::int64_t r);
/// Noise stream for one profiling task.
std::uint64_t profiling_noise_seed(std::uint64_t master, std::int64_t config_id,
                                   std::int64_t S, double beta, std::int64_t r);

/// Every config x plan point x seed, config-major. Sampler errors propagate.
TimingTrace profile(const ConfigPool& pool, const MoeGeometry& geom,
                    const ProfileOptions& opts, const TimingOracle& oracle,
                    const HardwareModel& hw);

/// Same samples as profile(), streamed to an append-only CSV. An existing
/// file is verified row by row against the expected sequence and extended;
/// a torn final line is discarded first. Returns the number of rows added.
std::size_t profile_to_file(const ConfigPool& pool, const MoeGeometry& geom,
                            const ProfileOptions& opts, const TimingOracle& oracle,
                            const HardwareModel& hw, const std::string& path);

inline constexpr std::string_view kTraceHeader =
    "config_id,S,beta_target,seed,grid,time_us";

std::string trace_row(const ProfilingSample& s);
std::string trace_to_csv(const TimingTrace& trace);

/// Strict reader: exact header, six fields, positive times, unique keys and,
/// when a pool is given, known config ids. Errors carry the row number.
TimingTrace parse_trace(std::string_view text, const ConfigPool* pool = nullptr);
TimingTrace load_trace(const std::string& path, const ConfigPool* pool = nullptr);

}  // namespace ramp
