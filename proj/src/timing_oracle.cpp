// SPDX-License-Identifier: Apache-2.0
#include "ramp/timing_oracle.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <mutex>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "ramp/error.hpp"
#include "ramp/seed.hpp"

namespace ramp {

namespace {

struct FieldRef {
  const char* name;
  double OracleParams::*member;
};

constexpr FieldRef kOracleFields[] = {
    {"startup_base_us", &OracleParams::startup_base_us},
    {"startup_per_stage_us", &OracleParams::startup_per_stage_us},
    {"wgmma_ns_per_tile", &OracleParams::wgmma_ns_per_tile},
    {"tile_efficiency", &OracleParams::tile_efficiency},
    {"bm_overhead_rows", &OracleParams::bm_overhead_rows},
    {"bm_rows_per_tile", &OracleParams::bm_rows_per_tile},
    {"latency_per_ktile_us", &OracleParams::latency_per_ktile_us},
    {"cta_fill_us", &OracleParams::cta_fill_us},
    {"hbm_bw_bytes_per_us", &OracleParams::hbm_bw_bytes_per_us},
    {"weight_passes", &OracleParams::weight_passes},
    {"l2_thrash_multiplier", &OracleParams::l2_thrash_multiplier},
    {"groupm_overhead_frac", &OracleParams::groupm_overhead_frac},
    {"splitk_overhead_us", &OracleParams::splitk_overhead_us},
    {"splitk_partial_bytes", &OracleParams::splitk_partial_bytes},
    {"subwave_exponent", &OracleParams::subwave_exponent},
    {"noise_cv", &OracleParams::noise_cv},
};

enum : std::uint64_t { kTagRouting = 1, kTagProfileNoise = 2 };

}  // namespace

void OracleParams::validate() const {
  for (const auto& f : kOracleFields) {
    const double v = this->*f.member;
    if (f.member == &OracleParams::noise_cv) {
      if (!(v >= 0.0 && v <= 0.05))
        throw ValidationError("oracle params: noise_cv must lie in [0, 0.05]");
    } else if (!(v > 0.0) || !std::isfinite(v)) {
      throw ValidationError(std::string("oracle params: ") + f.name + " must be > 0");
    }
  }
  if (subwave_exponent > 1.0)
    throw ValidationError("oracle params: subwave_exponent must lie in (0, 1]");
}

OracleParams oracle_params_from_json(const nlohmann::json& j, OracleParams p) {
  if (!j.is_object()) throw ParseError("oracle params: expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    const FieldRef* hit = nullptr;
    for (const auto& f : kOracleFields)
      if (key == f.name) hit = &f;
    if (hit == nullptr) throw ParseError("oracle params: unknown field '" + key + "'");
    if (!value.is_number())
      throw ParseError("oracle params: field '" + key + "' must be a number");
    p.*(hit->member) = value.get<double>();
  }
  p.validate();
  return p;
}

nlohmann::json oracle_params_to_json(const OracleParams& p) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& f : kOracleFields) j[f.name] = p.*f.member;
  return j;
}

SimTerms simulation_terms(const TileConfig& c, const MoeGeometry& geom,
                          const OracleParams& p, const HardwareModel& hw) {
  const double split = static_cast<double>(c.split_k);
  const double ttn = static_cast<double>(c.ttn);
  const double bm = static_cast<double>(c.bm);
  const double k_tiles = static_cast<double>(geom.K) / kTileKRef / split;
  const double tile_ops = k_tiles * (ttn / kTileKRef) *
                          ((bm + p.bm_overhead_rows) / p.bm_rows_per_tile);
  const bool thrash_geom =
      region_variables(geom).lambda_kappa().value() > hw.group_m_threshold();

  SimTerms t;
  t.startup_us = p.startup_base_us + p.startup_per_stage_us * static_cast<double>(c.stg);
  t.throughput_us = tile_ops * p.wgmma_ns_per_tile / 1000.0 * p.tile_efficiency;
  t.latency_us = k_tiles * p.latency_per_ktile_us / static_cast<double>(c.stg) + p.cta_fill_us;
  t.traffic_us = p.weight_passes * ttn * static_cast<double>(geom.K) / split *
                 static_cast<double>(hw.elem_size) / p.hbm_bw_bytes_per_us;
  if (thrash_geom && !c.group_m) t.traffic_us *= p.l2_thrash_multiplier;
  if (c.split_k > 1) {
    t.traffic_us += p.weight_passes * 2.0 * bm * ttn * p.splitk_partial_bytes /
                    p.hbm_bw_bytes_per_us;
    t.fixed_us = p.splitk_overhead_us;
  }
  if (c.group_m && !thrash_geom) t.scale = 1.0 + p.groupm_overhead_frac;
  return t;
}

double simulate_time_at_grid(const TileConfig& c, std::int64_t g,
                             const MoeGeometry& geom, const OracleParams& p,
                             const HardwareModel& hw,
                             std::optional<std::uint64_t> noise_seed) {
  const SimTerms t = simulation_terms(c, geom, p, hw);
  const double sm = static_cast<double>(hw.sm_count);
  const double gd = static_cast<double>(g);
  double time = t.startup_us;
  if (g > 0) {
    if (g < hw.sm_count)
      time += t.latency_us + t.throughput_us * std::pow(gd / sm, p.subwave_exponent);
    else
      time += std::ceil(gd / sm) * t.wave_cost();
    time += t.traffic_us * gd + t.fixed_us;
  }
  time *= t.scale;
  if (noise_seed && p.noise_cv > 0.0) {
    std::mt19937_64 rng(splitmix64(*noise_seed));
    std::normal_distribution<double> z(0.0, 1.0);
    time *= 1.0 + p.noise_cv * z(rng);
  }
  return std::max(std::round(time * 1000.0) / 1000.0, 0.001);
}

double simulate_time(const TileConfig& c, const ExpertHistogram& hist,
                     const MoeGeometry& geom, const OracleParams& p,
                     const HardwareModel& hw,
                     std::optional<std::uint64_t> noise_seed) {
  return simulate_time_at_grid(c, grid_size(c, hist, geom), geom, p, hw, noise_seed);
}

SimulatorOracle::SimulatorOracle(MoeGeometry geom, OracleParams params, HardwareModel hw)
    : geom_(std::move(geom)), params_(params), hw_(hw) {
  params_.validate();
}

double SimulatorOracle::time_us(const TileConfig& c, const ExpertHistogram& hist,
                                const OracleQuery& q) const {
  return simulate_time(c, hist, geom_, params_, hw_, q.noise_seed);
}

TraceOracle::TraceOracle(const TimingTrace& trace) {
  for (const auto& s : trace.samples)
    times_[{s.config_id, s.S, beta_key(s.beta_target), s.seed}] = s.time_us;
}

double TraceOracle::time_us(const TileConfig& c, const ExpertHistogram&,
                            const OracleQuery& q) const {
  const auto it = times_.find({c.id, q.S, beta_key(q.beta), q.seed});
  if (it == times_.end()) {
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "trace has no sample for config %lld at S=%lld beta=%g seed=%lld",
                  static_cast<long long>(c.id), static_cast<long long>(q.S), q.beta,
                  static_cast<long long>(q.seed));
    throw DomainError(buf);
  }
  return it->second;
}

std::uint64_t routing_seed(std::uint64_t master, std::int64_t S, double beta,
                           std::int64_t r) {
  return derive_seed(master, {kTagRouting, static_cast<std::uint64_t>(S),
                              beta_key(beta), static_cast<std::uint64_t>(r)});
}

std::uint64_t profiling_noise_seed(std::uint64_t master, std::int64_t config_id,
                                   std::int64_t S, double beta, std::int64_t r) {
  return derive_seed(master, {kTagProfileNoise, static_cast<std::uint64_t>(config_id),
                              static_cast<std::uint64_t>(S), beta_key(beta),
                              static_cast<std::uint64_t>(r)});
}

namespace {

struct Draw {
  PlanPoint point;
  std::int64_t r;
  ExpertHistogram hist;
};

std::vector<Draw> plan_draws(const MoeGeometry& geom, const ProfileOptions& opts) {
  if (opts.plan.empty()) throw ValidationError("profiling plan is empty");
  if (opts.seeds_per_point < 1) throw ValidationError("seeds per point must be >= 1");
  std::vector<Draw> draws;
  for (const auto& pt : opts.plan)
    for (std::int64_t r = 0; r < opts.seeds_per_point; ++r)
      draws.push_back({pt, r,
                       sample_histogram(geom.E, pt.S, geom.top_k, pt.beta,
                                        routing_seed(opts.master_seed, pt.S, pt.beta, r))
                           .histogram});
  return draws;
}

ProfilingSample measure(const TileConfig& c, const Draw& d, const MoeGeometry& geom,
                        const ProfileOptions& opts, const TimingOracle& oracle) {
  OracleQuery q{d.point.S, d.point.beta, d.r,
                profiling_noise_seed(opts.master_seed, c.id, d.point.S, d.point.beta, d.r)};
  return {c.id, d.point.S, d.point.beta, d.r, grid_size(c, d.hist, geom),
          oracle.time_us(c, d.hist, q)};
}

// Fills rows[i] for configs [first, pool.size()) in parallel; order is fixed
// by index, not by completion.
std::vector<std::vector<ProfilingSample>> measure_configs(
    const ConfigPool& pool, std::size_t first, const std::vector<Draw>& draws,
    const MoeGeometry& geom, const ProfileOptions& opts, const TimingOracle& oracle) {
  std::vector<std::vector<ProfilingSample>> rows(pool.size());
  std::atomic<std::size_t> next{first};
  std::exception_ptr failure;
  std::mutex fail_mu;
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < pool.size();) {
      try {
        auto& out = rows[i];
        out.reserve(draws.size());
        for (const auto& d : draws) out.push_back(measure(pool[i], d, geom, opts, oracle));
      } catch (...) {
        std::lock_guard<std::mutex> lock(fail_mu);
        if (!failure) failure = std::current_exception();
        next = pool.size();
      }
    }
  };
  unsigned n = opts.threads ? opts.threads : std::max(1u, std::thread::hardware_concurrency());
  n = std::min<unsigned>(n, static_cast<unsigned>(std::max<std::size_t>(1, pool.size() - first)));
  std::vector<std::thread> threads;
  for (unsigned t = 1; t < n; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
  return rows;
}

}  // namespace

TimingTrace profile(const ConfigPool& pool, const MoeGeometry& geom,
                    const ProfileOptions& opts, const TimingOracle& oracle,
                    const HardwareModel&) {
  const auto draws = plan_draws(geom, opts);
  TimingTrace trace{geom.name, {}, std::string(oracle.provenance())};
  trace.samples.reserve(pool.size() * draws.size());
  for (auto& rows : measure_configs(pool, 0, draws, geom, opts, oracle))
    trace.samples.insert(trace.samples.end(), rows.begin(), rows.end());
  return trace;
}

std::string trace_row(const ProfilingSample& s) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%lld,%lld,%.6g,%lld,%lld,%.3f",
                static_cast<long long>(s.config_id), static_cast<long long>(s.S),
                s.beta_target, static_cast<long long>(s.seed),
                static_cast<long long>(s.grid), s.time_us);
  return buf;
}

std::string trace_to_csv(const TimingTrace& trace) {
  std::string out(kTraceHeader);
  out += '\n';
  for (const auto& s : trace.samples) out += trace_row(s) + '\n';
  return out;
}

std::size_t profile_to_file(const ConfigPool& pool, const MoeGeometry& geom,
                            const ProfileOptions& opts, const TimingOracle& oracle,
                            const HardwareModel&, const std::string& path) {
  namespace fs = std::filesystem;
  const auto draws = plan_draws(geom, opts);

  std::vector<std::string> existing;
  if (fs::exists(path)) {
    std::string text;
    {
      std::ifstream in(path, std::ios::binary);
      std::stringstream ss;
      ss << in.rdbuf();
      text = ss.str();
    }
    const auto last_nl = text.rfind('\n');
    const std::size_t keep = last_nl == std::string::npos ? 0 : last_nl + 1;
    if (keep != text.size()) {
      fs::resize_file(path, keep);
      text.resize(keep);
    }
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) existing.push_back(line);
    if (!existing.empty() && existing.front() != kTraceHeader)
      throw ParseError("trace '" + path + "': unexpected header, refusing to resume");
  }

  std::ofstream out(path, std::ios::app | std::ios::binary);
  if (!out) throw ParseError("cannot open trace '" + path + "' for writing");
  if (existing.empty()) out << kTraceHeader << '\n';
  const std::size_t done = existing.empty() ? 0 : existing.size() - 1;
  const std::size_t per_config = draws.size();
  if (done > pool.size() * per_config)
    throw ValidationError("trace '" + path + "' has more rows than the plan produces");

  // Rows already on disk must be the prefix this plan would write; only the
  // key and grid are compared so an external oracle is never re-queried.
  for (std::size_t i = 0; i < done; ++i) {
    const auto& c = pool[i / per_config];
    const auto& d = draws[i % per_config];
    ProfilingSample key{c.id, d.point.S, d.point.beta, d.r, grid_size(c, d.hist, geom), 0.0};
    std::string expect = trace_row(key);
    expect.resize(expect.rfind(',') + 1);
    if (existing[i + 1].compare(0, expect.size(), expect) != 0)
      throw ValidationError("trace '" + path + "' row " + std::to_string(i + 1) +
                            " does not match the profiling plan; refusing to resume");
  }

  const std::size_t first_config = done / per_config;
  const std::size_t skip_in_first = done % per_config;
  const auto rows = measure_configs(pool, first_config, draws, geom, opts, oracle);
  std::size_t added = 0;
  for (std::size_t i = first_config; i < pool.size(); ++i) {
    for (std::size_t j = i == first_config ? skip_in_first : 0; j < rows[i].size(); ++j) {
      out << trace_row(rows[i][j]) << '\n';
      ++added;
    }
    out.flush();
  }
  if (!out) throw ParseError("write to trace '" + path + "' failed");
  return added;
}

namespace {

template <typename T>
T parse_number(const std::string& f, std::size_t row, const char* col) {
  char* end = nullptr;
  T v{};
  if constexpr (std::is_floating_point_v<T>) v = std::strtod(f.c_str(), &end);
  else v = static_cast<T>(std::strtoll(f.c_str(), &end, 10));
  if (f.empty() || *end != '\0')
    throw ParseError("trace row " + std::to_string(row) + ": column " + col +
                     " is not a number: '" + f + "'");
  return v;
}

}  // namespace

TimingTrace parse_trace(std::string_view text, const ConfigPool* pool) {
  TimingTrace trace;
  trace.provenance = "external";
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line)) throw ParseError("trace: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kTraceHeader)
    throw ParseError("trace: header must be '" + std::string(kTraceHeader) + "'");
  std::set<std::tuple<std::int64_t, std::int64_t, std::uint64_t, std::int64_t>> seen;
  for (std::size_t row = 1; std::getline(in, line); ++row) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string x; std::getline(ls, x, ',');) f.push_back(x);
    if (f.size() != 6)
      throw ParseError("trace row " + std::to_string(row) + ": expected 6 fields, got " +
                       std::to_string(f.size()));
    ProfilingSample s;
    s.config_id = parse_number<std::int64_t>(f[0], row, "config_id");
    s.S = parse_number<std::int64_t>(f[1], row, "S");
    s.beta_target = parse_number<double>(f[2], row, "beta_target");
    s.seed = parse_number<std::int64_t>(f[3], row, "seed");
    s.grid = parse_number<std::int64_t>(f[4], row, "grid");
    s.time_us = parse_number<double>(f[5], row, "time_us");
    const std::string at = "trace row " + std::to_string(row) + ": ";
    if (!(s.time_us > 0.0) || !std::isfinite(s.time_us))
      throw ValidationError(at + "time_us must be positive, got " + f[5]);
    if (s.grid < 0) throw ValidationError(at + "grid must be >= 0");
    if (s.S < 1) throw ValidationError(at + "S must be >= 1");
    if (!(s.beta_target >= 0.0 && s.beta_target <= 1.0))
      throw ValidationError(at + "beta_target must lie in [0, 1]");
    if (pool && (s.config_id < 0 || s.config_id >= static_cast<std::int64_t>(pool->size())))
      throw ValidationError(at + "unknown config_id " + std::to_string(s.config_id));
    if (!seen.insert({s.config_id, s.S, beta_key(s.beta_target), s.seed}).second)
      throw ValidationError(at + "duplicate sample for (config_id, S, beta, seed)");
    trace.samples.push_back(s);
  }
  return trace;
}

TimingTrace load_trace(const std::string& path, const ConfigPool* pool) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open trace '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_trace(ss.str(), pool);
}

}  // namespace ramp
