// SPDX-License-Identifier: Apache-2.0
#include "ramp/routing.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <tuple>

#include "ramp/error.hpp"
#include "ramp/seed.hpp"

namespace ramp {

std::uint64_t master_seed_from_env() {
  const char* v = std::getenv("RAMP_MASTER_SEED");
  if (v == nullptr || *v == '\0') return kDefaultMasterSeed;
  char* end = nullptr;
  const unsigned long long s = std::strtoull(v, &end, 10);
  if (*end != '\0' || *v == '-')
    throw ValidationError(std::string("RAMP_MASTER_SEED is not an unsigned integer: '") +
                          v + "'");
  return s;
}

ExpertHistogram ExpertHistogram::from_counts(std::vector<std::int64_t> counts) {
  if (counts.empty()) throw ValidationError("histogram needs at least one expert");
  for (std::size_t i = 0; i < counts.size(); ++i)
    if (counts[i] < 0)
      throw ValidationError("histogram count for expert " + std::to_string(i) +
                            " is negative");
  return ExpertHistogram{std::move(counts)};
}

ExpertHistogram ExpertHistogram::uniform(std::int64_t E, std::int64_t total) {
  if (E < 1) throw ValidationError("histogram needs at least one expert");
  std::vector<std::int64_t> c(static_cast<std::size_t>(E), total / E);
  for (std::int64_t i = 0; i < total % E; ++i) ++c[static_cast<std::size_t>(i)];
  return ExpertHistogram{std::move(c)};
}

std::int64_t ExpertHistogram::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::int64_t{0});
}

std::int64_t ExpertHistogram::active_experts() const {
  return std::count_if(counts.begin(), counts.end(),
                       [](std::int64_t c) { return c > 0; });
}

double balancedness(const ExpertHistogram& hist) {
  const std::int64_t total = hist.total();
  if (total <= 0) throw DomainError("balancedness undefined: no routed tokens");
  if (hist.experts() == 1) return 1.0;
  const double t = static_cast<double>(total);
  double h = 0.0;
  for (std::int64_t c : hist.counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) / t;
    h -= p * std::log(p);
  }
  const double beta = h / std::log(static_cast<double>(hist.experts()));
  return std::clamp(beta, 0.0, 1.0);
}

namespace {

constexpr double kLogAlphaMin = -13.815510557964274;  // ln 1e-6
constexpr double kLogAlphaMax = 13.815510557964274;   // ln 1e6
constexpr int kBisectionSteps = 24;
constexpr int kCalibrationDraws = 512;
constexpr std::uint64_t kCalibrationSeed = 0x5eedca1bULL;

// Symmetric Dirichlet drawn in log space so tiny alpha does not underflow:
// Gamma(alpha) = Gamma(alpha + 1) * U^(1/alpha).
std::vector<double> dirichlet(std::int64_t E, double alpha, std::mt19937_64& rng) {
  std::gamma_distribution<double> gamma(alpha + 1.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<double> lg(static_cast<std::size_t>(E));
  for (auto& x : lg) {
    double u = unif(rng);
    if (u <= 0.0) u = std::numeric_limits<double>::min();
    x = std::log(gamma(rng)) + std::log(u) / alpha;
  }
  const double mx = *std::max_element(lg.begin(), lg.end());
  double sum = 0.0;
  for (auto& x : lg) {
    x = std::exp(x - mx);
    sum += x;
  }
  for (auto& x : lg) x /= sum;
  return lg;
}

std::vector<std::int64_t> multinomial(std::int64_t n, const std::vector<double>& p,
                                      std::mt19937_64& rng) {
  std::vector<std::int64_t> out(p.size(), 0);
  double rest = 1.0;
  for (std::size_t i = 0; i + 1 < p.size() && n > 0; ++i) {
    const double q = rest > 0.0 ? std::clamp(p[i] / rest, 0.0, 1.0) : 1.0;
    std::binomial_distribution<std::int64_t> bin(n, q);
    out[i] = bin(rng);
    n -= out[i];
    rest -= p[i];
  }
  out.back() += n;
  return out;
}

ExpertHistogram draw(std::int64_t E, std::int64_t total, double alpha,
                     std::mt19937_64& rng) {
  return ExpertHistogram{multinomial(total, dirichlet(E, alpha, rng), rng)};
}

// Each draw owns its stream so that rejection steps inside one draw cannot
// shift the variates of the next; keeps the curve in alpha smooth.
double mean_beta(std::int64_t E, std::int64_t total, double log_alpha) {
  const double alpha = std::exp(log_alpha);
  double s = 0.0;
  for (int i = 0; i < kCalibrationDraws; ++i) {
    std::mt19937_64 rng(derive_seed(kCalibrationSeed, {static_cast<std::uint64_t>(i)}));
    s += balancedness(draw(E, total, alpha, rng));
  }
  return s / kCalibrationDraws;
}

}  // namespace

Calibration calibrate_concentration(std::int64_t E, std::int64_t total,
                                    double beta_target) {
  if (E < 1) throw ValidationError("expert count must be >= 1");
  if (total < 1) throw ValidationError("need at least one routed token");
  if (!(beta_target >= 0.0 && beta_target <= 1.0))
    throw ValidationError("beta_target must lie in [0, 1]");

  using Key = std::tuple<std::int64_t, std::int64_t, std::uint64_t>;
  static std::mutex mu;
  static std::map<Key, Calibration> memo;
  const Key key{E, total, beta_key(beta_target)};
  {
    std::lock_guard<std::mutex> lock(mu);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
  }

  double lo = kLogAlphaMin;
  double hi = kLogAlphaMax;
  for (int i = 0; i < kBisectionSteps; ++i) {
    const double mid = 0.5 * (lo + hi);
    (mean_beta(E, total, mid) < beta_target ? lo : hi) = mid;
  }
  const double log_alpha = 0.5 * (lo + hi);
  Calibration cal{std::exp(log_alpha), mean_beta(E, total, log_alpha)};
  if (std::abs(cal.expected_beta - beta_target) > kBetaTolerance) {
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "balancedness %.3f is unreachable for E=%lld with %lld "
                  "assignments (closest achievable mean %.3f)",
                  beta_target, static_cast<long long>(E),
                  static_cast<long long>(total), cal.expected_beta);
    throw DomainError(buf);
  }
  std::lock_guard<std::mutex> lock(mu);
  memo.emplace(key, cal);
  return cal;
}

RoutingSample sample_histogram(std::int64_t E, std::int64_t S, std::int64_t top_k,
                               double beta_target, std::uint64_t seed) {
  if (S < 1) throw ValidationError("S must be >= 1");
  if (top_k < 1 || top_k > E) throw ValidationError("top_k must lie in [1, E]");
  if (!(beta_target >= 0.0 && beta_target <= 1.0))
    throw ValidationError("beta_target must lie in [0, 1]");
  const std::int64_t total = S * top_k;
  RoutingSample out;
  out.beta_target = beta_target;
  out.seed = seed;
  if (beta_target >= 1.0) {
    out.histogram = ExpertHistogram::uniform(E, total);
  } else {
    const Calibration cal = calibrate_concentration(E, total, beta_target);
    std::mt19937_64 rng(splitmix64(seed));
    out.histogram = draw(E, total, cal.alpha, rng);
  }
  out.beta_achieved = balancedness(out.histogram);
  return out;
}

std::int64_t m_tiles(const ExpertHistogram& hist, std::int64_t bm) {
  std::int64_t m = 0;
  for (std::int64_t c : hist.counts) m += (c + bm - 1) / bm;
  return m;
}

std::int64_t grid_size(const TileConfig& c, const ExpertHistogram& hist,
                       const MoeGeometry& geom) {
  return m_tiles(hist, c.bm) * n_tiles(c, geom) * c.split_k;
}

double wave_utilization(std::int64_t g, const HardwareModel& hw) {
  return static_cast<double>(g) / static_cast<double>(hw.sm_count);
}

std::string routing_csv_header(std::int64_t E) {
  std::string h = "seed,beta_target,beta_achieved";
  for (std::int64_t i = 0; i < E; ++i) h += ",c_" + std::to_string(i);
  return h;
}

std::string to_csv_line(const RoutingSample& s) {
  char buf[96];
  std::snprintf(buf, sizeof buf, "%llu,%.6g,%.6f",
                static_cast<unsigned long long>(s.seed), s.beta_target,
                s.beta_achieved);
  std::string line = buf;
  for (std::int64_t c : s.histogram.counts) line += "," + std::to_string(c);
  return line;
}

ExpertHistogram parse_histogram_csv(std::string_view text, std::int64_t E) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    if (std::isalpha(static_cast<unsigned char>(line[first]))) continue;
    std::vector<std::string> fields;
    std::stringstream ls(line);
    for (std::string f; std::getline(ls, f, ',');) fields.push_back(f);
    const auto n = static_cast<std::int64_t>(fields.size());
    std::size_t skip = 0;
    if (n == E + 3) skip = 3;
    else if (n != E)
      throw ValidationError("histogram line " + std::to_string(lineno) + ": expected " +
                            std::to_string(E) + " counts, got " + std::to_string(n) +
                            " fields");
    std::vector<std::int64_t> counts;
    for (std::size_t i = skip; i < fields.size(); ++i) {
      const std::string& f = fields[i];
      char* end = nullptr;
      const long long v = std::strtoll(f.c_str(), &end, 10);
      if (f.empty() || *end != '\0')
        throw ParseError("histogram line " + std::to_string(lineno) + ", field " +
                         std::to_string(i + 1) + ": not an integer: '" + f + "'");
      counts.push_back(v);
    }
    return ExpertHistogram::from_counts(std::move(counts));
  }
  throw ParseError("histogram CSV contains no data row");
}

}  // namespace ramp
