// SPDX-License-Identifier: Apache-2.0
#include "ramp/cost_model.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <set>

#include <Eigen/Dense>
#include <json.hpp>

#include "ramp/error.hpp"

namespace ramp {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::P2: return "p2";
    case Variant::P3: return "p3";
    case Variant::P4: return "p4";
  }
  return "p4";
}

Variant parse_variant(std::string_view s) {
  std::string t(s);
  std::transform(t.begin(), t.end(), t.begin(),
                 [](unsigned char ch) { return std::tolower(ch); });
  if (t == "p2") return Variant::P2;
  if (t == "p3") return Variant::P3;
  if (t == "p4") return Variant::P4;
  throw ValidationError("unknown cost-model variant '" + std::string(s) +
                        "' (expected p2, p3 or p4)");
}

double predict(const CostCoefficients& k, std::int64_t g, const HardwareModel& hw) {
  const double gd = static_cast<double>(g);
  double t = k.a + k.b * gd / static_cast<double>(hw.sm_count) + k.c * gd;
  if (k.uses_log) t += k.d * std::log1p(gd);
  return t;
}

namespace {

enum Column { kOne, kWave, kCta, kLog };

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double column_value(Column col, double g, double sm) {
  switch (col) {
    case kOne: return 1.0;
    case kWave: return g / sm;
    case kCta: return g;
    case kLog: return std::log1p(g);
  }
  return 0.0;
}

Eigen::MatrixXd design(const std::vector<Column>& cols, const std::vector<double>& g,
                       double sm) {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(g.size()),
                    static_cast<Eigen::Index>(cols.size()));
  for (std::size_t i = 0; i < g.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j)
      X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          column_value(cols[j], g[i], sm);
  return X;
}

// Unit-norm columns so rank and conditioning ignore units.
Eigen::VectorXd column_norms(const Eigen::MatrixXd& X) {
  Eigen::VectorXd n = X.colwise().norm().transpose();
  for (Eigen::Index j = 0; j < n.size(); ++j)
    if (n(j) == 0.0) n(j) = 1.0;
  return n;
}

constexpr double kRankTol = 1e-7;

Eigen::Index numerical_rank(const Eigen::MatrixXd& X) {
  const Eigen::MatrixXd Xs = X * column_norms(X).cwiseInverse().asDiagonal();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(Xs);
  const auto& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return 0;
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i)
    if (sv(i) > kRankTol * sv(0)) ++r;
  return r;
}

}  // namespace

FitReport fit(std::span<const ProfilingSample> samples, const HardwareModel& hw,
              Variant variant) {
  if (samples.empty()) throw DomainError("fit: no samples");
  std::vector<double> g;
  std::vector<double> t;
  std::set<std::int64_t> distinct;
  for (const auto& s : samples) {
    g.push_back(static_cast<double>(s.grid));
    t.push_back(s.time_us);
    distinct.insert(s.grid);
  }
  if (distinct.size() < 2)
    throw DomainError("fit: config " + std::to_string(samples.front().config_id) +
                      " has fewer than 2 distinct grid sizes");

  const double sm = static_cast<double>(hw.sm_count);
  FitReport rep;
  rep.n_samples = samples.size();
  rep.median_grid = median(g);

  std::vector<Column> cols;
  switch (variant) {
    case Variant::P2: cols = {kOne, kCta}; break;
    case Variant::P3: cols = {kOne, kWave, kCta}; break;
    case Variant::P4:
      cols = {kOne, kWave, kCta};
      if (rep.median_grid < sm) cols.push_back(kLog);
      break;
  }

  for (;;) {
    const Eigen::MatrixXd X = design(cols, g, sm);
    const Eigen::Index rank = numerical_rank(X);
    if (rank == static_cast<Eigen::Index>(cols.size())) break;
    bool dropped = false;
    for (std::size_t j = cols.size(); j-- > 1;) {
      std::vector<Column> rest = cols;
      rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(j));
      if (numerical_rank(design(rest, g, sm)) == rank) {
        cols = std::move(rest);
        dropped = true;
        break;
      }
    }
    if (!dropped) cols.resize(static_cast<std::size_t>(std::max<Eigen::Index>(rank, 1)));
    rep.condition_flag = true;
  }

  const Eigen::MatrixXd X = design(cols, g, sm);
  const Eigen::VectorXd norms = column_norms(X);
  const Eigen::MatrixXd Xs = X * norms.cwiseInverse().asDiagonal();
  const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(
      t.data(), static_cast<Eigen::Index>(t.size()));
  const Eigen::MatrixXd gram = Xs.transpose() * Xs;
  const Eigen::VectorXd beta = gram.ldlt().solve(Xs.transpose() * y).cwiseQuotient(norms);

  CostCoefficients& k = rep.coefficients;
  k.variant = variant;
  for (std::size_t j = 0; j < cols.size(); ++j) {
    const double v = beta(static_cast<Eigen::Index>(j));
    switch (cols[j]) {
      case kOne: k.a = v; break;
      case kWave: k.b = v; break;
      case kCta: k.c = v; break;
      case kLog: k.d = v; k.uses_log = true; break;
    }
  }
  rep.r_squared = r_squared(k, samples, hw);
  return rep;
}

double r_squared(const CostCoefficients& k, std::span<const ProfilingSample> samples,
                 const HardwareModel& hw) {
  if (samples.empty()) return 1.0;
  double mean = 0.0;
  for (const auto& s : samples) mean += s.time_us;
  mean /= static_cast<double>(samples.size());
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (const auto& s : samples) {
    const double r = s.time_us - predict(k, s.grid, hw);
    ss_res += r * r;
    ss_tot += (s.time_us - mean) * (s.time_us - mean);
  }
  if (ss_tot == 0.0)
    return ss_res == 0.0 ? 1.0 : -std::numeric_limits<double>::infinity();
  return 1.0 - ss_res / ss_tot;
}

std::vector<PlanPoint> profiling_plan(const std::vector<std::int64_t>& S,
                                      const std::vector<double>& beta) {
  std::vector<PlanPoint> out;
  for (std::int64_t s : S) {
    if (s < 1) throw ValidationError("plan batch size must be >= 1");
    for (double b : beta) {
      if (!(b >= 0.0 && b <= 1.0)) throw ValidationError("plan beta must lie in [0, 1]");
      out.push_back({s, b});
    }
  }
  return out;
}

std::string store_to_json(const CoefficientStore& store) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : store.entries) {
    const auto& k = e.coefficients;
    nlohmann::json r2 = std::isfinite(e.r_squared) ? nlohmann::json(e.r_squared)
                                                   : nlohmann::json(nullptr);
    entries.push_back({{"config_id", e.config_id}, {"a", k.a}, {"b", k.b},
                       {"c", k.c}, {"d", k.d}, {"uses_log", k.uses_log},
                       {"variant", std::string(to_string(k.variant))},
                       {"r_squared", r2}});
  }
  nlohmann::json j = {{"model", store.model},
                      {"sm_count", store.sm_count},
                      {"entries", entries}};
  if (!store.excluded.empty()) j["excluded"] = store.excluded;
  return j.dump(1) + "\n";
}

CoefficientStore parse_store(std::string_view text) {
  CoefficientStore store;
  try {
    const auto j = nlohmann::json::parse(text);
    store.model = j.at("model").get<std::string>();
    store.sm_count = j.at("sm_count").get<std::int64_t>();
    for (const auto& e : j.at("entries")) {
      CoefficientEntry ce;
      ce.config_id = e.at("config_id").get<std::int64_t>();
      auto& k = ce.coefficients;
      k.a = e.at("a").get<double>();
      k.b = e.at("b").get<double>();
      k.c = e.at("c").get<double>();
      k.d = e.at("d").get<double>();
      k.uses_log = e.at("uses_log").get<bool>();
      k.variant = parse_variant(e.at("variant").get<std::string>());
      const auto& r2 = e.at("r_squared");
      ce.r_squared = r2.is_null() ? -std::numeric_limits<double>::infinity()
                                  : r2.get<double>();
      if (k.uses_log && k.variant != Variant::P4)
        throw ValidationError("coefficient store: config " +
                              std::to_string(ce.config_id) +
                              " uses the log term but is not P4");
      store.entries.push_back(ce);
    }
    if (j.contains("excluded"))
      store.excluded = j.at("excluded").get<std::vector<std::int64_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("coefficient store: ") + e.what());
  }
  if (store.sm_count < 1) throw ValidationError("coefficient store: sm_count must be >= 1");
  return store;
}

}  // namespace ramp

namespace ramp {

double FitSummary::median_r_squared() const {
  std::vector<double> r;
  for (const auto& e : store.entries) r.push_back(e.r_squared);
  return r.empty() ? 0.0 : median(std::move(r));
}

double FitSummary::min_r_squared() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& e : store.entries) m = std::min(m, e.r_squared);
  return m;
}

std::size_t FitSummary::log_term_count() const {
  return static_cast<std::size_t>(std::count_if(
      store.entries.begin(), store.entries.end(),
      [](const CoefficientEntry& e) { return e.coefficients.uses_log; }));
}

FitSummary fit_all(std::span<const ProfilingSample> samples, std::int64_t pool_size,
                   const HardwareModel& hw, Variant variant, const std::string& model) {
  std::vector<std::vector<ProfilingSample>> by_config(static_cast<std::size_t>(pool_size));
  for (const auto& s : samples) {
    if (s.config_id < 0 || s.config_id >= pool_size)
      throw ValidationError("fit: sample for unknown config_id " + std::to_string(s.config_id));
    by_config[static_cast<std::size_t>(s.config_id)].push_back(s);
  }
  FitSummary out;
  out.store.model = model;
  out.store.sm_count = hw.sm_count;
  for (std::int64_t id = 0; id < pool_size; ++id) {
    const auto& rows = by_config[static_cast<std::size_t>(id)];
    try {
      if (rows.empty()) throw DomainError("no samples");
      FitReport rep = fit(rows, hw, variant);
      out.store.entries.push_back({id, rep.coefficients, rep.r_squared});
      out.reports.push_back(rep);
    } catch (const DomainError& e) {
      out.store.excluded.push_back(id);
      out.failures.emplace_back(id, e.what());
    }
  }
  return out;
}

}  // namespace ramp
