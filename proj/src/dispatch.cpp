// SPDX-License-Identifier: Apache-2.0
#include "ramp/dispatch.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <set>

#include <json.hpp>

#include "ramp/error.hpp"
#include "ramp/seed.hpp"

namespace ramp {

namespace {
enum : std::uint64_t { kTagEvalRouting = 11, kTagEvalNoise = 12 };
}  // namespace

bool split_k_gate(const RegionVariables& vars, double omega) {
  return vars.kappa.num >= 48 * vars.kappa.den && omega < kSplitKOmegaGate;
}

DispatchTable::DispatchTable(MoeGeometry geom, ConfigPool pool,
                             const CoefficientStore& store, HardwareModel hw)
    : geom_(std::move(geom)),
      vars_(region_variables(geom_)),
      pool_(std::move(pool)),
      coeffs_(pool_.size()),
      hw_(hw) {
  if (pool_.empty()) throw DomainError("dispatch table: empty pool");
  if (store.sm_count != hw_.sm_count)
    throw ValidationError("dispatch table: coefficients were fitted for " +
                          std::to_string(store.sm_count) + " SMs, hardware has " +
                          std::to_string(hw_.sm_count));
  auto check_id = [&](std::int64_t id) {
    if (id < 0 || id >= static_cast<std::int64_t>(pool_.size()))
      throw ValidationError("dispatch table: unknown config_id " + std::to_string(id));
  };
  std::vector<bool> excluded(pool_.size(), false);
  for (std::int64_t id : store.excluded) {
    check_id(id);
    excluded[static_cast<std::size_t>(id)] = true;
  }
  for (const auto& e : store.entries) {
    check_id(e.config_id);
    auto& slot = coeffs_[static_cast<std::size_t>(e.config_id)];
    if (slot || excluded[static_cast<std::size_t>(e.config_id)])
      throw ValidationError("dispatch table: config_id " + std::to_string(e.config_id) +
                            " listed more than once");
    slot = e.coefficients;
  }
  bool any = false;
  for (std::size_t i = 0; i < pool_.size(); ++i) {
    if (!coeffs_[i] && !excluded[i])
      throw ValidationError("dispatch table: no coefficients for config_id " +
                            std::to_string(i));
    any = any || coeffs_[i].has_value();
  }
  if (!any) throw DomainError("dispatch table: no config has coefficients");
}

Selection DispatchTable::evaluate(const ExpertHistogram& hist) const {
  Selection best;
  best.predicted_us = std::numeric_limits<double>::infinity();
  std::int64_t evals = 0;
  for (const auto& c : pool_) {
    const auto& k = coeffs_[static_cast<std::size_t>(c.id)];
    if (!k) continue;
    const std::int64_t g = grid_size(c, hist, geom_);
    if (c.split_k > 1 &&
        !split_k_gate(vars_, wave_utilization(g / c.split_k, hw_)))
      continue;
    const double t = predict(*k, g, hw_);
    ++evals;
    if (t < best.predicted_us) {
      best.config_id = c.id;
      best.predicted_us = t;
      best.grid = g;
    }
  }
  evaluations_ += evals;
  if (best.config_id < 0) throw DomainError("dispatch table: no eligible config");
  best.omega = wave_utilization(best.grid, hw_);
  return best;
}

void StepCache::advance(std::int64_t step) {
  if (step != step_) {
    by_m_.clear();
    step_ = step;
  }
}

std::optional<Selection> StepCache::lookup(std::int64_t step, std::int64_t M) {
  advance(step);
  const auto it = by_m_.find(M);
  if (it == by_m_.end()) return std::nullopt;
  return it->second;
}

void StepCache::store(std::int64_t step, std::int64_t M, const Selection& s) {
  advance(step);
  by_m_[M] = s;
}

Selection select_config(const DispatchTable& table, const ExpertHistogram& hist,
                        StepCache& cache, std::int64_t step_id) {
  const std::int64_t M = hist.total();
  if (auto hit = cache.lookup(step_id, M)) return *hit;
  const Selection s = table.evaluate(hist);
  cache.store(step_id, M, s);
  return s;
}

std::int64_t static_best(const ConfigPool& pool, const MoeGeometry& geom,
                         const TimingOracle& oracle, const std::vector<std::int64_t>& S_grid) {
  if (pool.empty()) throw DomainError("static_best: empty pool");
  if (S_grid.empty()) throw ValidationError("static_best: empty batch-size grid");
  std::vector<ExpertHistogram> hists;
  for (std::int64_t S : S_grid) hists.push_back(ExpertHistogram::uniform(geom.E, S * geom.top_k));
  std::int64_t best = -1;
  double best_score = std::numeric_limits<double>::infinity();
  for (const auto& c : pool) {
    double log_sum = 0.0;
    for (std::size_t i = 0; i < S_grid.size(); ++i)
      log_sum += std::log(oracle.time_us(c, hists[i], {S_grid[i], 1.0, 0, std::nullopt}));
    if (log_sum < best_score) {
      best_score = log_sum;
      best = c.id;
    }
  }
  return best;
}

ReachablePoints split_reachable(const std::vector<PlanPoint>& points,
                                const MoeGeometry& geom) {
  ReachablePoints out;
  for (const auto& p : points) {
    bool ok = true;
    if (p.beta < 1.0) {
      try {
        calibrate_concentration(geom.E, p.S * geom.top_k, p.beta);
      } catch (const DomainError&) {
        ok = false;
      }
    }
    (ok ? out.reachable : out.skipped).push_back(p);
  }
  return out;
}

std::uint64_t eval_routing_seed(std::uint64_t master, std::int64_t S, double beta,
                                std::int64_t r) {
  return derive_seed(master, {kTagEvalRouting, static_cast<std::uint64_t>(S),
                              beta_key(beta), static_cast<std::uint64_t>(r)});
}

std::uint64_t eval_noise_seed(std::uint64_t master, std::int64_t S, double beta,
                              std::int64_t r) {
  return derive_seed(master, {kTagEvalNoise, static_cast<std::uint64_t>(S),
                              beta_key(beta), static_cast<std::uint64_t>(r)});
}

Aggregate aggregate(const std::vector<double>& xs) {
  Aggregate a;
  a.n = xs.size();
  if (xs.empty()) return a;
  a.max = -std::numeric_limits<double>::infinity();
  for (double x : xs) {
    a.mean += x;
    a.max = std::max(a.max, x);
  }
  a.mean /= static_cast<double>(a.n);
  if (a.n > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - a.mean) * (x - a.mean);
    a.se = std::sqrt(ss / static_cast<double>(a.n - 1) / static_cast<double>(a.n));
  }
  return a;
}

namespace {

struct EvalDraw {
  PlanPoint point;
  std::int64_t r;
  ExpertHistogram hist;
  OracleQuery query;
};

std::vector<EvalDraw> eval_draws(const MoeGeometry& geom, const EvalOptions& opts) {
  if (opts.points.empty()) throw ValidationError("evaluation: no test points");
  if (opts.seeds < 1) throw ValidationError("evaluation: seeds must be >= 1");
  std::vector<EvalDraw> out;
  for (const auto& p : opts.points) {
    const int reps = p.beta >= 1.0 ? 1 : opts.seeds;
    for (std::int64_t r = 0; r < reps; ++r) {
      auto s = sample_histogram(geom.E, p.S, geom.top_k, p.beta,
                                eval_routing_seed(opts.master_seed, p.S, p.beta, r));
      out.push_back({p, r, std::move(s.histogram),
                     {p.S, p.beta, r, eval_noise_seed(opts.master_seed, p.S, p.beta, r)}});
    }
  }
  return out;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

nlohmann::json finite_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

}  // namespace

RegretReport evaluate_regret(const DispatchTable& table, const TimingOracle& oracle,
                             const EvalOptions& opts) {
  RegretReport rep;
  std::vector<double> regrets;
  for (const auto& d : eval_draws(table.geometry(), opts)) {
    StepCache cache;
    const Selection sel = select_config(table, d.hist, cache, 0);
    RegretRecord rec{d.point.S, d.point.beta, d.r, sel.config_id, -1, 0.0,
                     std::numeric_limits<double>::infinity(), 0.0};
    for (const auto& c : table.pool()) {
      const double t = oracle.time_us(c, d.hist, d.query);
      if (c.id == sel.config_id) rec.selected_us = t;
      if (t < rec.best_us) {
        rec.best_us = t;
        rec.best_id = c.id;
      }
    }
    rec.regret = rec.selected_us / rec.best_us - 1.0;
    regrets.push_back(rec.regret);
    rep.records.push_back(rec);
  }
  rep.summary = aggregate(regrets);
  return rep;
}

std::string RegretReport::to_csv() const {
  std::string out = "S,beta,seed,selected_id,best_id,selected_us,best_us,regret\n";
  for (const auto& r : records)
    out += std::to_string(r.S) + "," + fmt("%.6g", r.beta) + "," + std::to_string(r.seed) +
           "," + std::to_string(r.selected_id) + "," + std::to_string(r.best_id) + "," +
           fmt("%.3f", r.selected_us) + "," + fmt("%.3f", r.best_us) + "," +
           fmt("%.6f", r.regret) + "\n";
  return out;
}

std::string RegretReport::to_json() const {
  nlohmann::json j = {{"mean", summary.mean},
                      {"se", summary.se},
                      {"max", finite_or_null(summary.max)},
                      {"n", summary.n}};
  return j.dump(1) + "\n";
}

SpeedupReport speedup_ra_vs_static(const DispatchTable& table, const TimingOracle& oracle,
                                   const EvalOptions& opts) {
  SpeedupReport rep;
  std::map<std::int64_t, std::int64_t> static_for_s;
  std::map<std::uint64_t, std::vector<double>> logs;
  std::map<std::uint64_t, double> beta_of;
  for (const auto& d : eval_draws(table.geometry(), opts)) {
    auto [it, fresh] = static_for_s.try_emplace(d.point.S, 0);
    if (fresh)
      it->second = static_best(table.pool(), table.geometry(), oracle, {d.point.S});
    const auto& st = table.pool()[static_cast<std::size_t>(it->second)];
    StepCache cache;
    const Selection sel = select_config(table, d.hist, cache, 0);
    const auto& ra = table.pool()[static_cast<std::size_t>(sel.config_id)];
    SpeedupRecord rec{d.point.S, d.point.beta, d.r, st.id, ra.id,
                      oracle.time_us(st, d.hist, d.query),
                      oracle.time_us(ra, d.hist, d.query), 1.0};
    rec.ratio = rec.static_us / rec.ra_us;
    rep.records.push_back(rec);
    logs[beta_key(d.point.beta)].push_back(std::log(rec.ratio));
    beta_of[beta_key(d.point.beta)] = d.point.beta;
  }
  for (const auto& [key, ls] : logs) {
    BetaGroup g;
    g.beta = beta_of[key];
    g.n = ls.size();
    double s = 0.0;
    g.max = -std::numeric_limits<double>::infinity();
    g.min = std::numeric_limits<double>::infinity();
    for (double l : ls) {
      s += l;
      g.max = std::max(g.max, std::exp(l));
      g.min = std::min(g.min, std::exp(l));
    }
    g.geomean = std::exp(s / static_cast<double>(ls.size()));
    rep.by_beta.push_back(g);
  }
  return rep;
}

std::string SpeedupReport::to_csv() const {
  std::string out = "S,beta,seed,static_id,ra_id,static_us,ra_us,ratio\n";
  for (const auto& r : records)
    out += std::to_string(r.S) + "," + fmt("%.6g", r.beta) + "," + std::to_string(r.seed) +
           "," + std::to_string(r.static_id) + "," + std::to_string(r.ra_id) + "," +
           fmt("%.3f", r.static_us) + "," + fmt("%.3f", r.ra_us) + "," +
           fmt("%.6f", r.ratio) + "\n";
  return out;
}

std::string SpeedupReport::to_json() const {
  nlohmann::json groups = nlohmann::json::array();
  for (const auto& g : by_beta)
    groups.push_back({{"beta", g.beta}, {"geomean", g.geomean}, {"min", g.min},
                      {"max", g.max}, {"n", g.n}});
  return nlohmann::json{{"by_beta", groups}}.dump(1) + "\n";
}

}  // namespace ramp
