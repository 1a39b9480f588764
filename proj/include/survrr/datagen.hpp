#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "survrr/csv.hpp"
#include "survrr/dataset.hpp"
#include "survrr/errors.hpp"
#include "survrr/rng.hpp"

namespace survrr {

struct ScenarioConfig {
  int scenario = 1;  // 1: Weibull PH with covariate-dependent censoring
                     // 2: lognormal AFT with uniform independent censoring
  int n = 100;
  double tau = 5.0;
  double sigma2 = 1.0;  // scenario 2 log-time variance
};

// Complete-data sample: covariates, both potential event times, and a single
// censoring time shared across arms.
struct GeneratedSample {
  std::vector<double> z1, z2;
  std::vector<int> d;
  std::vector<double> t0, t1;  // potential event times T(0), T(1)
  std::vector<double> c;

  int n() const { return static_cast<int>(z1.size()); }
  double potential_time(int unit, int arm) const { return arm == 1 ? t1[unit] : t0[unit]; }
};

// z1 ~ N(1,1); D | z1 ~ Bernoulli(0.4 + 0.2 * 1(z1 < 1)); z2 ~ N(0,1).
inline GeneratedSample gen_covariates(int n, RngStream& rng) {
  if (n < 1) throw DomainError("gen_covariates: n must be >= 1");
  GeneratedSample s;
  s.z1.resize(n);
  s.z2.resize(n);
  s.d.resize(n);
  for (int i = 0; i < n; ++i) {
    s.z1[i] = 1.0 + rng.normal();
    s.d[i] = rng.bernoulli(0.4 + 0.2 * (s.z1[i] < 1.0 ? 1.0 : 0.0)) ? 1 : 0;
    s.z2[i] = rng.normal();
  }
  return s;
}

namespace detail {

inline double scenario1_rate(int a, double z1, double z2, int d) {
  return 0.1 * std::exp(-0.5 * a + 0.5 * z1 - 0.5 * z2 + 0.5 * d + 0.5 * a * z1 - 0.5 * a * z2);
}

// Weibull with shape 1.5 parameterized so that S(t) = exp(-lambda t^1.5).
inline double weibull_draw(double lambda, RngStream& rng) {
  return std::pow(-std::log(rng.uniform()) / lambda, 1.0 / 1.5);
}

inline double scenario2_mu(int a, double z1, double z2, int d) {
  return -1.0 - 0.5 * a + z1 - z2 + d;
}

}  // namespace detail

// Scenario with proportional hazards and covariate-dependent censoring.
inline GeneratedSample gen_scenario1(const ScenarioConfig& cfg, RngStream& rng) {
  GeneratedSample s = gen_covariates(cfg.n, rng);
  s.t0.resize(cfg.n);
  s.t1.resize(cfg.n);
  s.c.resize(cfg.n);
  for (int i = 0; i < cfg.n; ++i) {
    s.t0[i] = detail::weibull_draw(detail::scenario1_rate(0, s.z1[i], s.z2[i], s.d[i]), rng);
    s.t1[i] = detail::weibull_draw(detail::scenario1_rate(1, s.z1[i], s.z2[i], s.d[i]), rng);
    s.c[i] = rng.exponential(0.05 * std::exp(0.2 * s.z1[i] + 0.2 * s.d[i]));
  }
  return s;
}

// Accelerated-failure-time scenario with completely independent censoring.
inline GeneratedSample gen_scenario2(const ScenarioConfig& cfg, RngStream& rng) {
  GeneratedSample s = gen_covariates(cfg.n, rng);
  s.t0.resize(cfg.n);
  s.t1.resize(cfg.n);
  s.c.resize(cfg.n);
  const double sigma = std::sqrt(cfg.sigma2);
  for (int i = 0; i < cfg.n; ++i) {
    s.t0[i] = std::exp(detail::scenario2_mu(0, s.z1[i], s.z2[i], s.d[i]) + sigma * rng.normal());
    s.t1[i] = std::exp(detail::scenario2_mu(1, s.z1[i], s.z2[i], s.d[i]) + sigma * rng.normal());
    s.c[i] = 20.0 * rng.uniform();
  }
  return s;
}

inline GeneratedSample gen_scenario(const ScenarioConfig& cfg, RngStream& rng) {
  if (cfg.scenario == 1) return gen_scenario1(cfg, rng);
  if (cfg.scenario == 2) return gen_scenario2(cfg, rng);
  throw ConfigError("unknown scenario " + std::to_string(cfg.scenario));
}

// Covariate-balanced super-population used by the covariance-geometry
// illustration: Z ~ N(0, I2), Weibull event times with linear predictor
// 1.5 z1 + 1.5 z2 (no treatment effect), censoring U(0, 15).
inline GeneratedSample gen_geometry_population(int n, RngStream& rng) {
  GeneratedSample s;
  s.z1.resize(n);
  s.z2.resize(n);
  s.d.assign(n, 0);
  s.t0.resize(n);
  s.t1.resize(n);
  s.c.resize(n);
  for (int i = 0; i < n; ++i) {
    s.z1[i] = rng.normal();
    s.z2[i] = rng.normal();
    const double eta = 1.5 * s.z1[i] + 1.5 * s.z2[i];
    const double lambda = std::exp(eta);  // scale exp(-eta/1.5): S(t) = exp(-e^eta t^1.5)
    const double t = std::pow(-std::log(rng.uniform()) / lambda, 1.0 / 1.5);
    s.t0[i] = t;
    s.t1[i] = t;
    s.c[i] = 15.0 * rng.uniform();
  }
  return s;
}

// Observed dataset under a realized assignment; covariates are (z1, z2, d),
// rerandomization covariates (z1, z2), stratum d.
inline Dataset observed_dataset(const GeneratedSample& s, const std::vector<int>& arms,
                                double tau) {
  if (static_cast<int>(arms.size()) != s.n()) {
    throw DomainError("observed_dataset: assignment length differs from sample size");
  }
  Dataset data;
  data.covariate_names = {"z1", "z2", "d"};
  data.rerand_cols = {0, 1};
  data.stratum_col = 2;
  data.tau = tau;
  data.observations.resize(s.n());
  for (int i = 0; i < s.n(); ++i) {
    Observation& o = data.observations[i];
    o.id = std::to_string(i + 1);
    o.arm = arms[i];
    const double t = s.potential_time(i, arms[i]);
    o.time = std::min(t, s.c[i]);
    o.event = t <= s.c[i] ? 1 : 0;
    o.covariates = {s.z1[i], s.z2[i], static_cast<double>(s.d[i])};
    o.stratum = s.d[i];
  }
  return data;
}

struct TruthValue {
  double survival = 0.0;
  double mc_se = 0.0;
};

// Monte Carlo approximation of S_{T,a}(t) over a simulated super-population,
// with its MC standard error.
inline std::vector<TruthValue> true_survival(int scenario, int arm, const std::vector<double>& times,
                                             long n_mc, RngStream& rng) {
  if (n_mc < 100000) throw DomainError("true_survival: n_mc must be >= 1e5");
  std::vector<long> exceed(times.size(), 0);
  constexpr int kBatch = 65536;
  ScenarioConfig cfg;
  cfg.scenario = scenario;
  cfg.n = kBatch;
  long done = 0;
  while (done < n_mc) {
    cfg.n = static_cast<int>(std::min<long>(kBatch, n_mc - done));
    const GeneratedSample s = gen_scenario(cfg, rng);
    for (int i = 0; i < cfg.n; ++i) {
      const double t = s.potential_time(i, arm);
      for (std::size_t k = 0; k < times.size(); ++k) {
        if (t > times[k]) ++exceed[k];
      }
    }
    done += cfg.n;
  }
  std::vector<TruthValue> out(times.size());
  for (std::size_t k = 0; k < times.size(); ++k) {
    const double p = static_cast<double>(exceed[k]) / static_cast<double>(n_mc);
    out[k].survival = p;
    out[k].mc_se = std::sqrt(p * (1.0 - p) / static_cast<double>(n_mc));
  }
  return out;
}

// Disk-cached truth oracle keyed by (scenario, arm, t, n_mc, seed). The cache
// only avoids recomputation; values are identical with or without it.
class TruthOracle {
 public:
  TruthOracle(long n_mc, std::uint64_t seed, std::string cache_path = "")
      : n_mc_(n_mc), seed_(seed), cache_path_(std::move(cache_path)) {
    load_cache();
  }

  std::vector<double> survival(int scenario, int arm, const std::vector<double>& times) {
    std::vector<double> missing;
    for (double t : times) {
      if (!cache_.count(key(scenario, arm, t))) missing.push_back(t);
    }
    if (!missing.empty()) {
      RngStream rng(seed_, 1000003ull * scenario + arm);
      const auto vals = true_survival(scenario, arm, missing, n_mc_, rng);
      for (std::size_t k = 0; k < missing.size(); ++k) {
        cache_[key(scenario, arm, missing[k])] = vals[k];
      }
      append_cache(scenario, arm, missing, vals);
    }
    std::vector<double> out;
    out.reserve(times.size());
    for (double t : times) out.push_back(cache_.at(key(scenario, arm, t)).survival);
    return out;
  }

 private:
  using Key = std::tuple<int, int, std::string>;

  Key key(int scenario, int arm, double t) const {
    return {scenario, arm, detail::format_double(t)};
  }

  void load_cache() {
    if (cache_path_.empty()) return;
    std::ifstream in(cache_path_);
    if (!in) return;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto f = detail::split_csv_line(line);
      if (f.size() != 7) continue;
      if (std::stol(f[5]) != n_mc_ || std::stoull(f[6]) != seed_) continue;
      TruthValue v;
      v.survival = std::stod(f[3]);
      v.mc_se = std::stod(f[4]);
      cache_[{std::stoi(f[0]), std::stoi(f[1]), f[2]}] = v;
    }
  }

  void append_cache(int scenario, int arm, const std::vector<double>& times,
                    const std::vector<TruthValue>& vals) {
    if (cache_path_.empty()) return;
    const bool fresh = !std::ifstream(cache_path_).good();
    std::ofstream out(cache_path_, std::ios::app);
    if (!out) return;  // cache is best-effort
    if (fresh) out << "scenario,arm,t,survival,mc_se,n_mc,seed\n";
    for (std::size_t k = 0; k < times.size(); ++k) {
      out << scenario << ',' << arm << ',' << detail::format_double(times[k]) << ','
          << detail::format_double(vals[k].survival) << ','
          << detail::format_double(vals[k].mc_se) << ',' << n_mc_ << ',' << seed_ << '\n';
    }
  }

  long n_mc_;
  std::uint64_t seed_;
  std::string cache_path_;
  std::map<Key, TruthValue> cache_;
};

}  // namespace survrr
