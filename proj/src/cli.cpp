// SPDX-License-Identifier: Apache-2.0
#include "ramp/cli.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ramp/dispatch.hpp"
#include "ramp/error.hpp"

namespace ramp::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Acceptance-style check failed; maps to exit code 3.
class CheckFailed : public Error {
 public:
  using Error::Error;
};

struct Options {
  std::string model;
  std::string workspace = "ramp-workspace";
  std::string hw_path;
  std::string catalog_path;
  std::string oracle;
  std::string variant = "p4";
  std::optional<std::uint64_t> seed;
  bool json_out = false;
  bool check = false;
  std::vector<std::int64_t> S;
  std::vector<double> beta;
  int seeds = 0;
  int seeds_per_point = kDefaultSeedsPerPoint;
  unsigned threads = 0;
  std::string histogram;
  std::string mode = "regret";
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + p.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Write-then-rename so a crash never leaves a half-written artifact.
void write_file(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  const fs::path tmp = p.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ParseError("cannot write '" + tmp.string() + "'");
    out << text;
    if (!out) throw ParseError("write to '" + tmp.string() + "' failed");
  }
  fs::rename(tmp, p);
}

json read_json(const fs::path& p) {
  const std::string text = read_file(p);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("'" + p.string() + "': " + e.what());
  }
}

class Workspace {
 public:
  Workspace(fs::path root, std::string model) : root_(std::move(root)), model_(std::move(model)) {}

  [[nodiscard]] fs::path dir() const { return root_ / model_; }
  [[nodiscard]] fs::path pool() const { return dir() / "pool.json"; }
  [[nodiscard]] fs::path hw() const { return dir() / "hw.json"; }
  [[nodiscard]] fs::path trace() const { return dir() / "trace.csv"; }
  [[nodiscard]] fs::path oracle() const { return dir() / "oracle.json"; }
  [[nodiscard]] fs::path coeffs() const { return dir() / "coeffs.json"; }
  [[nodiscard]] fs::path reports() const { return dir() / "reports"; }

  /// Fails fast naming the command that produces the missing artifact.
  void require(const fs::path& p, const char* producer) const {
    if (!fs::exists(p))
      throw ValidationError("missing " + p.string() + "; run `ramp " + producer + " --model " +
                            model_ + "` first");
  }

 private:
  fs::path root_;
  std::string model_;
};

/// Advisory exclusive lock on the workspace root for the command's lifetime.
class WorkspaceLock {
 public:
  explicit WorkspaceLock(const fs::path& root) {
    fs::create_directories(root);
    const std::string path = (root / ".lock").string();
    fd_ = ::open(path.c_str(), O_RDWR | O_CREAT, 0644);
    if (fd_ < 0) throw ValidationError("cannot open lock file " + path);
    if (::flock(fd_, LOCK_EX | LOCK_NB) != 0) {
      ::close(fd_);
      throw ValidationError("workspace " + root.string() +
                            " is in use by another ramp process");
    }
  }
  ~WorkspaceLock() {
    ::flock(fd_, LOCK_UN);
    ::close(fd_);
  }
  WorkspaceLock(const WorkspaceLock&) = delete;
  WorkspaceLock& operator=(const WorkspaceLock&) = delete;

 private:
  int fd_ = -1;
};

std::vector<MoeGeometry> catalog(const Options& o) {
  return o.catalog_path.empty() ? default_catalog() : load_catalog(o.catalog_path);
}

MoeGeometry resolve_model(const Options& o) {
  const auto models = catalog(o);
  if (o.model.empty()) throw ValidationError("--model is required");
  if (auto m = find_model(models, o.model)) return *m;
  std::string names;
  for (const auto& m : models) names += (names.empty() ? "" : ", ") + m.name;
  throw ValidationError("unknown model '" + o.model + "'; available: " + names);
}

HardwareModel resolve_hw(const Options& o, const Workspace* ws) {
  if (!o.hw_path.empty()) return hardware_from_json(read_json(o.hw_path));
  if (ws && fs::exists(ws->hw())) return hardware_from_json(read_json(ws->hw()));
  return HardwareModel{};
}

std::uint64_t master_seed(const Options& o) {
  return o.seed ? *o.seed : master_seed_from_env();
}

ConfigPool load_pool(const Workspace& ws) {
  ws.require(ws.pool(), "enumerate");
  return parse_pool(read_file(ws.pool()));
}

/// An oracle plus, for simulators, its parameters.
struct OracleHandle {
  std::unique_ptr<TimingOracle> oracle;
  std::optional<OracleParams> params;
  json record;
};

OracleHandle make_oracle(const std::string& spec, const MoeGeometry& geom, const HardwareModel& hw,
                         const ConfigPool& pool) {
  OracleHandle h;
  if (spec == "sim" || spec.rfind("sim:", 0) == 0) {
    OracleParams p;
    if (spec.size() > 4) p = oracle_params_from_json(read_json(spec.substr(4)));
    p.validate();
    h.oracle = std::make_unique<SimulatorOracle>(geom, p, hw);
    h.params = p;
    h.record = {{"kind", "sim"}, {"params", oracle_params_to_json(p)}};
  } else if (spec.rfind("trace:", 0) == 0) {
    const std::string path = spec.substr(6);
    h.oracle = std::make_unique<TraceOracle>(load_trace(path, &pool));
    h.record = {{"kind", "trace"}, {"source", path}};
  } else {
    throw ValidationError("bad --oracle '" + spec + "' (expected sim, sim:<params.json> or trace:<path>)");
  }
  return h;
}

/// Explicit --oracle, else whatever profiled this workspace, else the
/// default simulator.
OracleHandle resolve_oracle(const Options& o, const Workspace& ws, const MoeGeometry& geom,
                            const HardwareModel& hw, const ConfigPool& pool) {
  if (!o.oracle.empty()) return make_oracle(o.oracle, geom, hw, pool);
  if (fs::exists(ws.oracle())) {
    const json rec = read_json(ws.oracle());
    const std::string kind = rec.value("kind", "");
    if (kind == "sim") {
      OracleHandle h;
      h.params = oracle_params_from_json(rec.at("params"));
      h.oracle = std::make_unique<SimulatorOracle>(geom, *h.params, hw);
      h.record = rec;
      return h;
    }
    if (kind == "trace") return make_oracle("trace:" + ws.trace().string(), geom, hw, pool);
    throw ParseError(ws.oracle().string() + ": unknown oracle kind '" + kind + "'");
  }
  return make_oracle("sim", geom, hw, pool);
}

DispatchTable load_table(const Workspace& ws, const MoeGeometry& geom, const HardwareModel& hw,
                         const ConfigPool& pool) {
  ws.require(ws.coeffs(), "fit");
  return DispatchTable(geom, pool, parse_store(read_file(ws.coeffs())), hw);
}

std::vector<PlanPoint> points_or(const Options& o, const std::vector<std::int64_t>& S,
                                 const std::vector<double>& beta) {
  return profiling_plan(o.S.empty() ? S : o.S, o.beta.empty() ? beta : o.beta);
}

std::vector<PlanPoint> drop_unreachable(const std::vector<PlanPoint>& pts, const MoeGeometry& geom,
                                        std::ostream& err) {
  auto rp = split_reachable(pts, geom);
  for (const auto& p : rp.skipped)
    err << "skipping S=" << p.S << " beta=" << fmt("%g", p.beta) << ": balancedness unreachable with "
        << p.S * geom.top_k << " assignments over " << geom.E << " experts\n";
  if (rp.reachable.empty()) throw DomainError("no reachable evaluation points");
  return rp.reachable;
}

std::string config_json(const TileConfig& c) {
  return json{{"id", c.id},         {"bm", c.bm},     {"bn", c.bn},
              {"wn", c.wn},         {"stg", c.stg},   {"ttn", c.ttn},
              {"group_m", c.group_m}, {"split_k", c.split_k}}
      .dump();
}

// ---------------------------------------------------------------- commands

int cmd_classify(const Options& o, std::ostream& out) {
  const HardwareModel hw = resolve_hw(o, nullptr);
  const auto models = catalog(o);
  json rows = json::array();
  char line[256];
  if (!o.json_out) {
    std::snprintf(line, sizeof line, "%-12s %6s %5s %5s %7s %6s  %s\n", "model", "rho", "lambda",
                  "kappa", "lk", "region", "predicted modes");
    out << line;
  }
  for (const auto& m : models) {
    const auto v = region_variables(m);
    const auto r = classify_regime(v, hw);
    auto rat = [](const Rational& q) {
      return q.is_integer() ? std::to_string(q.num) : fmt("%.3f", q.value());
    };
    rows.push_back({{"name", m.name},
                    {"rho", v.rho.value()},
                    {"lambda", v.lambda},
                    {"kappa", v.kappa.value()},
                    {"lambda_kappa", v.lambda_kappa().value()},
                    {"misaligned", v.misaligned},
                    {"regime", std::string(to_string(r.regime))},
                    {"group_m_required", r.group_m_required},
                    {"split_k_eligible", r.split_k_eligible},
                    {"modes", r.predicted_modes()}});
    if (!o.json_out) {
      std::snprintf(line, sizeof line, "%-12s %6s %5lld %5s %7s %6s  %s%s\n", m.name.c_str(),
                    rat(v.rho).c_str(), static_cast<long long>(v.lambda), rat(v.kappa).c_str(),
                    rat(v.lambda_kappa()).c_str(), std::string(to_string(r.regime)).c_str(),
                    r.predicted_modes().c_str(), v.misaligned ? "  (not tile-aligned)" : "");
      out << line;
    }
  }
  std::vector<std::string> mismatches;
  if (o.check) mismatches = check_expected_regions(models, hw);
  if (o.json_out) {
    json j = {{"models", rows}};
    if (o.check) j["mismatches"] = mismatches;
    out << j.dump(1) << "\n";
  } else if (o.check) {
    for (const auto& m : mismatches) out << "MISMATCH " << m << "\n";
    out << "check: " << expected_regions().size() - std::min(mismatches.size(), expected_regions().size())
        << "/" << expected_regions().size() << " reference rows reproduced\n";
  }
  if (!mismatches.empty()) throw CheckFailed("classification differs from the reference table");
  return kOk;
}

int cmd_enumerate(const Options& o, std::ostream& out) {
  const MoeGeometry geom = resolve_model(o);
  Workspace ws(o.workspace, geom.name);
  WorkspaceLock lock(o.workspace);
  const HardwareModel hw = resolve_hw(o, nullptr);
  hw.validate();
  const auto vars = region_variables(geom);
  const auto regime = classify_regime(vars, hw);
  const auto pool = enumerate_configs(geom, hw, regime);
  write_file(ws.pool(), pool_to_json(pool));
  write_file(ws.hw(), hardware_to_json(hw).dump(1) + "\n");
  const auto gm = std::count_if(pool.begin(), pool.end(), [](const TileConfig& c) { return c.group_m; });
  const auto sk = std::count_if(pool.begin(), pool.end(), [](const TileConfig& c) { return c.split_k > 1; });
  if (o.json_out) {
    out << json{{"model", geom.name},
                {"regime", std::string(to_string(regime.regime))},
                {"group_m_required", regime.group_m_required},
                {"split_k_eligible", regime.split_k_eligible},
                {"modes", regime.predicted_modes()},
                {"pool_size", pool.size()},
                {"group_m_variants", gm},
                {"split_k_variants", sk},
                {"path", ws.pool().string()}}
               .dump(1)
        << "\n";
    return kOk;
  }
  out << geom.name << ": rho=" << fmt("%g", vars.rho.value()) << " lambda=" << vars.lambda
      << " kappa=" << fmt("%g", vars.kappa.value()) << " lambda*kappa=" << fmt("%g", vars.lambda_kappa().value())
      << "\n"
      << "regime " << to_string(regime.regime) << ", GROUP_M " << (regime.group_m_required ? "required" : "not required")
      << ", split-K " << (regime.split_k_eligible ? "eligible" : "not eligible") << " -> "
      << regime.predicted_modes() << "\n"
      << "pool: " << pool.size() << " configs (" << gm << " GROUP_M variants, " << sk
      << " split-K variants) -> " << ws.pool().string() << "\n";
  return kOk;
}

ProfileOptions profile_options(const Options& o) {
  ProfileOptions po;
  po.plan = points_or(o, kDefaultPlanS, kDefaultPlanBeta);
  po.seeds_per_point = o.seeds_per_point;
  po.master_seed = master_seed(o);
  po.threads = o.threads;
  return po;
}

int cmd_profile(const Options& o, std::ostream& out) {
  const MoeGeometry geom = resolve_model(o);
  Workspace ws(o.workspace, geom.name);
  WorkspaceLock lock(o.workspace);
  const HardwareModel hw = resolve_hw(o, &ws);
  const ConfigPool pool = load_pool(ws);
  const auto t0 = std::chrono::steady_clock::now();
  const std::string spec = o.oracle.empty() ? "sim" : o.oracle;
  OracleHandle h = make_oracle(spec, geom, hw, pool);
  std::size_t added = 0;
  std::size_t total = 0;
  if (spec.rfind("trace:", 0) == 0) {
    TimingTrace t = load_trace(spec.substr(6), &pool);
    t.model = geom.name;
    write_file(ws.trace(), trace_to_csv(t));
    added = total = t.samples.size();
  } else {
    if (fs::exists(ws.oracle()) && fs::exists(ws.trace()) && read_json(ws.oracle()) != h.record)
      throw ValidationError(ws.trace().string() +
                            " was produced by a different oracle; delete it to re-profile");
    added = profile_to_file(pool, geom, profile_options(o), *h.oracle, hw, ws.trace().string());
    total = load_trace(ws.trace().string(), &pool).samples.size();
  }
  write_file(ws.oracle(), h.record.dump(1) + "\n");
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (o.json_out) {
    out << json{{"samples", total}, {"added", added}, {"seconds", secs}, {"path", ws.trace().string()}}.dump(1)
        << "\n";
  } else {
    out << "trace: " << total << " samples (" << added << " new) in " << fmt("%.2f", secs) << " s -> "
        << ws.trace().string() << "\n";
  }
  return kOk;
}

int cmd_fit(const Options& o, std::ostream& out, std::ostream& err) {
  const MoeGeometry geom = resolve_model(o);
  Workspace ws(o.workspace, geom.name);
  WorkspaceLock lock(o.workspace);
  const HardwareModel hw = resolve_hw(o, &ws);
  const ConfigPool pool = load_pool(ws);
  ws.require(ws.trace(), "profile");
  const auto trace = load_trace(ws.trace().string(), &pool);
  const Variant variant = parse_variant(o.variant);
  const auto fs_ = fit_all(trace.samples, static_cast<std::int64_t>(pool.size()), hw, variant, geom.name);
  for (const auto& [id, why] : fs_.failures) err << "excluded config " << id << ": " << why << "\n";
  if (fs_.store.entries.empty()) throw DomainError("no config could be fitted");
  write_file(ws.coeffs(), store_to_json(fs_.store));
  const std::size_t flagged = static_cast<std::size_t>(std::count_if(
      fs_.reports.begin(), fs_.reports.end(), [](const FitReport& r) { return r.condition_flag; }));
  if (o.json_out) {
    out << json{{"variant", std::string(to_string(variant))},
                {"fitted", fs_.store.entries.size()},
                {"excluded", fs_.store.excluded},
                {"median_r_squared", fs_.median_r_squared()},
                {"min_r_squared", std::isfinite(fs_.min_r_squared()) ? json(fs_.min_r_squared()) : json()},
                {"uses_log", fs_.log_term_count()},
                {"column_dropped", flagged},
                {"path", ws.coeffs().string()}}
               .dump(1)
        << "\n";
  } else {
    out << to_string(variant) << " fit: " << fs_.store.entries.size() << " configs, R^2 median "
        << fmt("%.4f", fs_.median_r_squared()) << " min " << fmt("%.4f", fs_.min_r_squared()) << ", log term on "
        << fs_.log_term_count() << ", dependent column dropped on " << flagged << ", excluded "
        << fs_.store.excluded.size() << " -> " << ws.coeffs().string() << "\n";
  }
  return kOk;
}

int cmd_dispatch(const Options& o, std::ostream& out, std::istream& in) {
  const MoeGeometry geom = resolve_model(o);
  Workspace ws(o.workspace, geom.name);
  const HardwareModel hw = resolve_hw(o, &ws);
  const ConfigPool pool = load_pool(ws);
  const DispatchTable table = load_table(ws, geom, hw, pool);
  if (o.histogram.empty()) throw ValidationError("--histogram <csv> is required (use - for stdin)");
  std::string text;
  if (o.histogram == "-") {
    std::stringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  } else {
    text = read_file(o.histogram);
  }
  const auto hist = parse_histogram_csv(text, geom.E);
  StepCache cache;
  const Selection s = select_config(table, hist, cache, 0);
  const auto& c = pool[static_cast<std::size_t>(s.config_id)];
  if (o.json_out) {
    out << json{{"config", json::parse(config_json(c))},
                {"label", c.label()},
                {"predicted_us", s.predicted_us},
                {"grid", s.grid},
                {"omega", s.omega},
                {"tokens", hist.total()},
                {"evaluations", table.evaluations()}}
               .dump(1)
        << "\n";
  } else {
    out << "selected config " << c.id << " (" << c.label() << ")\n"
        << "  bm=" << c.bm << " bn=" << c.bn << " wn=" << c.wn << " stg=" << c.stg << " ttn=" << c.ttn
        << " group_m=" << (c.group_m ? 1 : 0) << " split_k=" << c.split_k << "\n"
        << "  predicted " << fmt("%.3f", s.predicted_us) << " us, grid " << s.grid << " CTAs, omega "
        << fmt("%.4f", s.omega) << "\n";
  }
  return kOk;
}

EvalOptions eval_options(const Options& o, const MoeGeometry& geom, std::ostream& err,
                         const std::vector<double>& default_beta = kDefaultTestBeta) {
  EvalOptions eo;
  eo.points = drop_unreachable(points_or(o, kDefaultTestS, default_beta), geom, err);
  eo.seeds = o.seeds > 0 ? o.seeds : 2;
  eo.master_seed = master_seed(o);
  return eo;
}

void print_aggregate(std::ostream& out, const std::string& what, const Aggregate& a) {
  out << what << ": mean " << fmt("%.2f", 100 * a.mean) << "% (se " << fmt("%.2f", 100 * a.se) << "), max "
      << fmt("%.2f", 100 * a.max) << "%, n=" << a.n << "\n";
}

int eval_regret(const Options& o, const Workspace& ws, const MoeGeometry& geom, const HardwareModel& hw,
                const ConfigPool& pool, std::ostream& out, std::ostream& err) {
  const auto table = load_table(ws, geom, hw, pool);
  const auto h = resolve_oracle(o, ws, geom, hw, pool);
  const auto rep = evaluate_regret(table, *h.oracle, eval_options(o, geom, err));
  write_file(ws.reports() / "regret.csv", rep.to_csv());
  write_file(ws.reports() / "regret.json", rep.to_json());
  if (o.json_out) out << rep.to_json();
  else print_aggregate(out, geom.name + " regret", rep.summary);
  return kOk;
}

int eval_speedup(const Options& o, const Workspace& ws, const MoeGeometry& geom, const HardwareModel& hw,
                 const ConfigPool& pool, std::ostream& out, std::ostream& err) {
  const auto table = load_table(ws, geom, hw, pool);
  const auto h = resolve_oracle(o, ws, geom, hw, pool);
  EvalOptions eo = eval_options(o, geom, err);
  if (o.seeds <= 0) eo.seeds = 3;
  const auto rep = speedup_ra_vs_static(table, *h.oracle, eo);
  write_file(ws.reports() / "speedup.csv", rep.to_csv());
  write_file(ws.reports() / "speedup.json", rep.to_json());
  if (o.json_out) {
    out << rep.to_json();
  } else {
    out << geom.name << " routing-aware vs static (static tuned per batch size at uniform routing)\n";
    for (const auto& g : rep.by_beta)
      out << "  beta=" << fmt("%.2f", g.beta) << ": geomean " << fmt("%.3f", g.geomean) << "x (min "
          << fmt("%.3f", g.min) << ", max " << fmt("%.3f", g.max) << ", n=" << g.n << ")\n";
  }
  return kOk;
}

int eval_ablation(const Options& o, const Workspace& ws, const MoeGeometry& geom, const HardwareModel& hw,
                  const ConfigPool& pool, std::ostream& out, std::ostream& err) {
  ws.require(ws.trace(), "profile");
  const auto trace = load_trace(ws.trace().string(), &pool);
  const auto h = resolve_oracle(o, ws, geom, hw, pool);
  const EvalOptions eo = eval_options(o, geom, err);
  std::string csv = "variant,mean,se,max,n,median_r_squared\n";
  json j = json::object();
  std::map<Variant, double> mean;
  for (Variant v : {Variant::P2, Variant::P3, Variant::P4}) {
    const auto fs_ = fit_all(trace.samples, static_cast<std::int64_t>(pool.size()), hw, v, geom.name);
    const auto rep = evaluate_regret(DispatchTable(geom, pool, fs_.store, hw), *h.oracle, eo);
    const auto& a = rep.summary;
    mean[v] = a.mean;
    const std::string name(to_string(v));
    csv += name + "," + fmt("%.6f", a.mean) + "," + fmt("%.6f", a.se) + "," + fmt("%.6f", a.max) + "," +
           std::to_string(a.n) + "," + fmt("%.6f", fs_.median_r_squared()) + "\n";
    j[name] = {{"mean", a.mean}, {"se", a.se}, {"max", a.max}, {"n", a.n},
               {"median_r_squared", fs_.median_r_squared()}};
    if (!o.json_out) print_aggregate(out, name, a);
  }
  const bool ordered = mean[Variant::P4] <= mean[Variant::P3] && mean[Variant::P3] <= mean[Variant::P2];
  j["ordered"] = ordered;
  write_file(ws.reports() / "ablation.csv", csv);
  write_file(ws.reports() / "ablation.json", j.dump(1) + "\n");
  if (o.json_out) out << j.dump(1) << "\n";
  else out << "ordering P4 <= P3 <= P2: " << (ordered ? "holds" : "violated") << "\n";
  if (o.check && !ordered) throw CheckFailed("ablation ordering violated");
  return kOk;
}

int eval_curves(const Options& o, const Workspace& ws, const MoeGeometry& geom, const HardwareModel& hw,
                const ConfigPool& pool, std::ostream& out, std::ostream&) {
  const auto h = resolve_oracle(o, ws, geom, hw, pool);
  if (!h.params) throw ValidationError("curves need a simulator oracle (staircase is swept over grid size)");
  const OracleParams& p = *h.params;
  const std::int64_t S = o.S.empty() ? 64 : o.S.front();
  const std::uint64_t master = master_seed(o);
  const int seeds = o.seeds > 0 ? o.seeds : 16;

  auto uniform_time = [&](const TileConfig& c, std::int64_t s) {
    return simulate_time(c, ExpertHistogram::uniform(geom.E, s * geom.top_k), geom, p, hw, std::nullopt);
  };
  const auto& ref = pool[static_cast<std::size_t>(static_best(pool, geom, *h.oracle, {S}))];

  // Wave utilization of the uniform-best config as routing skews.
  std::string omega = "beta,mean_omega,std_omega\n";
  const std::vector<double> betas =
      o.beta.empty() ? std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0} : o.beta;
  for (double b : betas) {
    std::vector<double> w;
    try {
      for (int r = 0; r < (b >= 1.0 ? 1 : seeds); ++r) {
        const auto hist = sample_histogram(geom.E, S, geom.top_k, b, eval_routing_seed(master, S, b, r)).histogram;
        w.push_back(wave_utilization(grid_size(ref, hist, geom), hw));
      }
    } catch (const DomainError&) {
      continue;
    }
    double m = 0, v = 0;
    for (double x : w) m += x;
    m /= static_cast<double>(w.size());
    for (double x : w) v += (x - m) * (x - m);
    const double sd = w.size() > 1 ? std::sqrt(v / static_cast<double>(w.size() - 1)) : 0.0;
    omega += fmt("%g", b) + "," + fmt("%.6f", m) + "," + fmt("%.6f", sd) + "\n";
  }

  // Staircase for the uniform-best config of a few token block sizes.
  std::string stair = "config_id,label,grid,time_us\n";
  for (std::int64_t bm : {16, 32, 64}) {
    std::optional<TileConfig> best;
    double bt = 0;
    for (const auto& c : pool) {
      if (c.bm != bm || c.split_k > 1) continue;
      const double t = uniform_time(c, S);
      if (!best || t < bt) { best = c; bt = t; }
    }
    if (!best) continue;
    for (std::int64_t g = 1; g <= 3 * hw.sm_count; ++g)
      stair += std::to_string(best->id) + "," + best->label() + "," + std::to_string(g) + "," +
               fmt("%.3f", simulate_time_at_grid(*best, g, geom, p, hw, std::nullopt)) + "\n";
  }

  // Fastest time per token block size as the batch grows.
  std::string cross = "S,bm,config_id,time_us\n";
  std::set<std::int64_t> bms;
  for (const auto& c : pool) bms.insert(c.bm);
  for (std::int64_t s = 1; s <= 1024; s *= 2)
    for (std::int64_t bm : bms) {
      double bt = 0;
      std::int64_t id = -1;
      for (const auto& c : pool) {
        if (c.bm != bm) continue;
        const double t = uniform_time(c, s);
        if (id < 0 || t < bt) { bt = t; id = c.id; }
      }
      cross += std::to_string(s) + "," + std::to_string(bm) + "," + std::to_string(id) + "," + fmt("%.3f", bt) + "\n";
    }

  write_file(ws.reports() / "omega_vs_beta.csv", omega);
  write_file(ws.reports() / "staircase.csv", stair);
  write_file(ws.reports() / "crossover.csv", cross);
  out << "curves -> " << (ws.reports() / "omega_vs_beta.csv").string() << ", "
      << (ws.reports() / "staircase.csv").string() << ", " << (ws.reports() / "crossover.csv").string() << "\n";
  return kOk;
}

int cmd_evaluate(const Options& o, std::ostream& out, std::ostream& err) {
  const MoeGeometry geom = resolve_model(o);
  Workspace ws(o.workspace, geom.name);
  WorkspaceLock lock(o.workspace);
  const HardwareModel hw = resolve_hw(o, &ws);
  const ConfigPool pool = load_pool(ws);
  if (o.mode == "regret") return eval_regret(o, ws, geom, hw, pool, out, err);
  if (o.mode == "speedup") return eval_speedup(o, ws, geom, hw, pool, out, err);
  if (o.mode == "ablation") return eval_ablation(o, ws, geom, hw, pool, out, err);
  if (o.mode == "curves") return eval_curves(o, ws, geom, hw, pool, out, err);
  throw ValidationError("unknown --mode '" + o.mode + "' (regret, speedup, ablation or curves)");
}

int cmd_sample_routing(const Options& o, std::ostream& out) {
  const MoeGeometry geom = resolve_model(o);
  if (o.S.size() != 1 || o.beta.size() != 1) throw ValidationError("sample-routing takes one --S and one --beta");
  const int seeds = o.seeds > 0 ? o.seeds : 1;
  const std::uint64_t master = master_seed(o);
  out << routing_csv_header(geom.E) << "\n";
  for (int r = 0; r < seeds; ++r) {
    const std::uint64_t seed = routing_seed(master, o.S.front(), o.beta.front(), r);
    out << to_csv_line(sample_histogram(geom.E, o.S.front(), geom.top_k, o.beta.front(), seed)) << "\n";
  }
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"ramp: routing-aware configuration dispatch for fused MoE kernels"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  auto common = [&](CLI::App* c, bool needs_model) {
    auto* m = c->add_option("--model", o.model, "model name from the catalog (case-insensitive)");
    if (needs_model) m->required();
    c->add_option("--catalog", o.catalog_path, "model descriptor JSON (default: bundled catalog)");
    c->add_option("--hw", o.hw_path, "hardware model overrides (JSON)");
    c->add_flag("--json", o.json_out, "machine-readable output");
  };
  auto with_workspace = [&](CLI::App* c) {
    c->add_option("--workspace", o.workspace, "workspace root")->capture_default_str();
  };
  auto with_seed = [&](CLI::App* c) {
    c->add_option("--seed", o.seed, "master seed (default: $RAMP_MASTER_SEED or 42)");
  };
  auto with_grid = [&](CLI::App* c) {
    c->add_option("--S", o.S, "batch sizes, comma separated")->delimiter(',');
    c->add_option("--beta", o.beta, "balancedness levels, comma separated")->delimiter(',');
  };

  auto* enumerate = app.add_subcommand("enumerate", "enumerate the valid configuration pool");
  common(enumerate, true);
  with_workspace(enumerate);

  auto* profile = app.add_subcommand("profile", "time every config over the profiling plan");
  common(profile, true);
  with_workspace(profile);
  with_seed(profile);
  with_grid(profile);
  profile->add_option("--oracle", o.oracle, "sim | sim:<params.json> | trace:<path>");
  profile->add_option("--seeds-per-point", o.seeds_per_point, "routing draws per plan point")
      ->check(CLI::PositiveNumber);
  profile->add_option("--threads", o.threads, "worker threads (0 = all cores)");

  auto* fitc = app.add_subcommand("fit", "fit cost-model coefficients from the trace");
  common(fitc, true);
  with_workspace(fitc);
  fitc->add_option("--variant", o.variant, "p2 | p3 | p4")->capture_default_str();

  auto* dispatch = app.add_subcommand("dispatch", "select a config for one routing histogram");
  common(dispatch, true);
  with_workspace(dispatch);
  dispatch->add_option("--histogram", o.histogram, "CSV whose first data row holds E counts (or a sample-routing row); - for stdin")
      ->required();

  auto* evaluate = app.add_subcommand("evaluate", "regret, speedup, ablation and curve reports");
  common(evaluate, true);
  with_workspace(evaluate);
  with_seed(evaluate);
  with_grid(evaluate);
  evaluate->add_option("--mode", o.mode, "regret | speedup | ablation | curves")->capture_default_str();
  evaluate->add_option("--oracle", o.oracle, "sim | sim:<params.json> | trace:<path> (default: as profiled)");
  evaluate->add_option("--seeds", o.seeds, "routing draws per test point")->check(CLI::PositiveNumber);
  evaluate->add_flag("--check", o.check, "exit 3 if the ablation ordering fails");

  auto* classify = app.add_subcommand("classify", "performance-region table for the catalog");
  common(classify, false);
  classify->add_flag("--check", o.check, "exit 3 unless the reference region table is reproduced");

  auto* sample = app.add_subcommand("sample-routing", "draw routing histograms at a target balancedness");
  common(sample, true);
  with_seed(sample);
  with_grid(sample);
  sample->add_option("--seeds", o.seeds, "number of histograms")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    app.exit(e, out, err);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    if (*enumerate) return cmd_enumerate(o, out);
    if (*profile) return cmd_profile(o, out);
    if (*fitc) return cmd_fit(o, out, err);
    if (*dispatch) return cmd_dispatch(o, out, std::cin);
    if (*evaluate) return cmd_evaluate(o, out, err);
    if (*classify) return cmd_classify(o, out);
    if (*sample) return cmd_sample_routing(o, out);
  } catch (const CheckFailed& e) {
    err << "check failed: " << e.what() << "\n";
    return kCheckFailed;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kUsage;
}

}  // namespace ramp::cli
