#pragma once

#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "survrr/coxph.hpp"
#include "survrr/datagen.hpp"
#include "survrr/designs.hpp"
#include "survrr/dml.hpp"
#include "survrr/errors.hpp"
#include "survrr/inference.hpp"
#include "survrr/survcurve.hpp"

namespace survrr {

struct SimulationConfig {
  int scenario = 1;
  int n = 100;
  int replicates = 1000;
  DesignType design = DesignType::kSimple;
  std::vector<Method> methods = {Method::kKm, Method::kIpcw, Method::kDml};
  std::vector<double> report_times = {1.0, 2.0, 3.0, 4.0};
  double band_lo = 1.0;
  double band_hi = 4.0;
  int band_points = 50;
  double alpha = 0.05;
  double c = 1.83;
  int k_folds = 5;
  std::string learner = "cox";
  std::uint64_t seed = 12345;
  int jobs = 1;
  int band_paths = 10000;
  double tau = 5.0;
  double pi1 = 0.5;
  int arm = 1;
  long truth_nmc = 1000000;
  std::uint64_t truth_seed = 777;
  std::string truth_cache;
};

struct MetricsRow {
  std::string method;
  std::string design;
  double time = 0.0;
  double bias = 0.0;
  double ese = 0.0;
  double ase = 0.0;
  double ecp = 0.0;
  double u_ecp = 0.0;
  int failures = 0;
};

inline std::string design_label(DesignType d) {
  switch (d) {
    case DesignType::kSimple: return "srs";
    case DesignType::kRerand: return "rem";
    case DesignType::kStratifiedRerand: return "srem";
  }
  return "srs";
}

namespace detail {

struct MethodOutcome {
  std::vector<double> est;     // at report times
  std::vector<double> se;      // design-appropriate, at report times
  std::vector<char> ci_hit;    // at report times
  char band_hit = 0;
};

struct ReplicateOutcome {
  std::vector<std::optional<MethodOutcome>> per_method;
};

struct SimGrids {
  TimeGrid grid;                 // union of report times and band grid
  std::vector<int> report_ix;
  std::vector<int> band_ix;
};

inline SimGrids make_grids(const SimulationConfig& cfg) {
  SimGrids g;
  const TimeGrid band = TimeGrid::equally_spaced(cfg.band_lo, cfg.band_hi, cfg.band_points);
  g.grid = TimeGrid::merge(cfg.report_times, band.points);
  auto index_of = [&](double t) {
    const auto it = std::lower_bound(g.grid.points.begin(), g.grid.points.end(), t);
    return static_cast<int>(it - g.grid.points.begin());
  };
  for (double t : cfg.report_times) g.report_ix.push_back(index_of(t));
  for (double t : band.points) g.band_ix.push_back(index_of(t));
  return g;
}

inline SurvivalCurve subset_curve(const SurvivalCurve& curve, const std::vector<int>& ix) {
  SurvivalCurve sub;
  sub.arm = curve.arm;
  sub.method = curve.method;
  sub.grid.points.reserve(ix.size());
  sub.values.reserve(ix.size());
  for (int i : ix) {
    sub.grid.points.push_back(curve.grid.points[i]);
    sub.values.push_back(curve.values[i]);
  }
  return sub;
}

inline ReplicateOutcome run_replicate(const SimulationConfig& cfg, const SimGrids& grids,
                                      const std::vector<double>& truth, int replicate) {
  ReplicateOutcome out;
  out.per_method.resize(cfg.methods.size());

  RngStream root(cfg.seed, static_cast<std::uint64_t>(replicate));
  RngStream rng_gen = root.substream(0);
  RngStream rng_assign = root.substream(1);
  RngStream rng_dml = root.substream(2);
  RngStream rng_band = root.substream(3);

  ScenarioConfig scfg;
  scfg.scenario = cfg.scenario;
  scfg.n = cfg.n;
  scfg.tau = cfg.tau;

  Dataset data;
  DesignMeta meta;
  try {
    const GeneratedSample sample = gen_scenario(scfg, rng_gen);
    std::vector<std::vector<double>> zrr(cfg.n);
    for (int i = 0; i < cfg.n; ++i) zrr[i] = {sample.z1[i], sample.z2[i]};

    Assignment assignment;
    switch (cfg.design) {
      case DesignType::kSimple:
        assignment = assign_simple(cfg.n, cfg.pi1, rng_assign);
        break;
      case DesignType::kRerand:
        assignment = rerandomize(zrr, cfg.pi1, cfg.c, rng_assign);
        break;
      case DesignType::kStratifiedRerand:
        assignment = stratified_rerandomize(zrr, sample.d, {}, cfg.pi1, cfg.c, rng_assign);
        break;
    }
    data = observed_dataset(sample, assignment.arms, cfg.tau);
    meta.design = cfg.design;
    meta.pi1 = cfg.pi1;
    meta.threshold_c = cfg.c;
    meta.rerand_cols = {0, 1};
    meta.stratum_col = 2;
  } catch (const std::exception&) {
    return out;  // all methods failed for this replicate
  }

  DesignMeta simple_meta = meta;
  simple_meta.design = DesignType::kSimple;

  for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
    const Method method = cfg.methods[mi];
    try {
      SurvivalCurve curve;
      InfluenceMatrix inf;
      switch (method) {
        case Method::kKm: {
          curve = km_estimate(data, cfg.arm, grids.grid);
          inf = km_influence(data, cfg.arm, grids.grid, curve, cfg.pi1);
          break;
        }
        case Method::kIpcw: {
          std::vector<double> time;
          std::vector<int> cens;
          std::vector<std::vector<double>> z;
          for (const auto& o : data.observations) {
            if (o.arm != cfg.arm) continue;
            time.push_back(o.time);
            cens.push_back(1 - o.event);
            z.push_back(o.covariates);
          }
          const CoxFit censor_fit = fit_cox(time, cens, z);
          curve = ipcw_km_estimate(data, cfg.arm, grids.grid, censor_fit);
          inf = ipcw_influence(data, cfg.arm, grids.grid, curve, censor_fit, cfg.pi1);
          break;
        }
        case Method::kDml: {
          RngStream r = rng_dml.substream(mi);
          const auto learner = make_learner(cfg.learner);
          DmlFit fit =
              dml_estimate(data, cfg.arm, grids.grid, cfg.k_folds, *learner, cfg.pi1, r);
          curve = std::move(fit.curve);
          inf = std::move(fit.influence);
          break;
        }
      }

      // Rerandomization correction applies to KM/IPCW; the DML covariance is
      // invariant under the design.
      const DesignMeta& method_meta = method == Method::kDml ? simple_meta : meta;
      const CovarianceReport rep = covariance_report(inf, data, method_meta);

      MethodOutcome mo;
      const Band ci =
          pointwise_ci(curve, rep.sigma2_corrected, cfg.n, cfg.alpha, CiScale::kLogit);
      for (std::size_t k = 0; k < grids.report_ix.size(); ++k) {
        const int ix = grids.report_ix[k];
        mo.est.push_back(curve.values[ix]);
        mo.se.push_back(std::sqrt(std::max(rep.sigma2_corrected[ix], 0.0) / cfg.n));
        const double tr = truth[ix];
        mo.ci_hit.push_back(ci.lower[ix] <= tr && tr <= ci.upper[ix] ? 1 : 0);
      }

      const SymMatrix band_cov = corrected_covariance_matrix(inf, grids.band_ix, rep);
      const SurvivalCurve band_curve = subset_curve(curve, grids.band_ix);
      const Band band = uniform_band(band_curve, band_cov, cfg.n, cfg.alpha, cfg.band_paths,
                                     rng_band.substream(mi));
      char hit = 1;
      for (std::size_t k = 0; k < grids.band_ix.size(); ++k) {
        const double tr = truth[grids.band_ix[k]];
        if (!(band.lower[k] <= tr && tr <= band.upper[k])) {
          hit = 0;
          break;
        }
      }
      mo.band_hit = hit;
      out.per_method[mi] = std::move(mo);
    } catch (const std::exception&) {
      // dropped and counted
    }
  }
  return out;
}

}  // namespace detail

// Monte Carlo reproduction of the pointwise and uniform operating
// characteristics: per replicate, generate, assign, estimate by every method,
// and record estimates, standard errors, and interval/band hits; aggregate to
// bias, empirical and average standard errors, and coverage. Failed
// replicates are dropped and counted.
inline std::vector<MetricsRow> run_simulation(const SimulationConfig& cfg) {
  if (cfg.replicates < 1) throw ConfigError("run_simulation: replicates must be >= 1");
  if (cfg.methods.empty()) throw ConfigError("run_simulation: no methods selected");
  for (double t : cfg.report_times) {
    if (!(t > 0.0 && t < cfg.tau)) {
      throw ConfigError("run_simulation: report times must lie in (0, tau)");
    }
  }
  const detail::SimGrids grids = detail::make_grids(cfg);

  TruthOracle oracle(cfg.truth_nmc, cfg.truth_seed, cfg.truth_cache);
  const std::vector<double> truth = oracle.survival(cfg.scenario, cfg.arm, grids.grid.points);

  std::vector<detail::ReplicateOutcome> slots(cfg.replicates);
  const int jobs = std::max(1, cfg.jobs);
  if (jobs == 1) {
    for (int r = 0; r < cfg.replicates; ++r) slots[r] = detail::run_replicate(cfg, grids, truth, r);
  } else {
    std::atomic<int> next{0};
    auto worker = [&]() {
      for (;;) {
        const int r = next.fetch_add(1);
        if (r >= cfg.replicates) return;
        slots[r] = detail::run_replicate(cfg, grids, truth, r);
      }
    };
    std::vector<std::thread> pool;
    for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  std::vector<MetricsRow> rows;
  for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
    std::vector<const detail::MethodOutcome*> ok;
    for (const auto& slot : slots) {
      if (slot.per_method.size() > mi && slot.per_method[mi]) ok.push_back(&*slot.per_method[mi]);
    }
    const int failures = cfg.replicates - static_cast<int>(ok.size());
    if (failures > 0.05 * cfg.replicates) {
      throw HarnessError("run_simulation: method " + method_name(cfg.methods[mi]) + " failed " +
                         std::to_string(failures) + "/" + std::to_string(cfg.replicates) +
                         " replicates; the configuration is likely degenerate");
    }
    double band_rate = 0.0;
    for (const auto* mo : ok) band_rate += mo->band_hit;
    if (!ok.empty()) band_rate /= static_cast<double>(ok.size());

    for (std::size_t k = 0; k < cfg.report_times.size(); ++k) {
      MetricsRow row;
      row.method = method_name(cfg.methods[mi]);
      row.design = design_label(cfg.design);
      row.time = cfg.report_times[k];
      row.failures = failures;
      const double tr = truth[grids.report_ix[k]];
      double mean_est = 0.0, mean_se = 0.0, hit = 0.0;
      for (const auto* mo : ok) {
        mean_est += mo->est[k];
        mean_se += mo->se[k];
        hit += mo->ci_hit[k];
      }
      const double m = static_cast<double>(ok.size());
      if (!ok.empty()) {
        mean_est /= m;
        mean_se /= m;
        hit /= m;
      }
      double ss = 0.0;
      for (const auto* mo : ok) ss += (mo->est[k] - mean_est) * (mo->est[k] - mean_est);
      row.bias = std::fabs(mean_est - tr);
      row.ese = ok.size() > 1 ? std::sqrt(ss / (m - 1.0)) : 0.0;
      row.ase = mean_se;
      row.ecp = hit;
      row.u_ecp = band_rate;
      rows.push_back(row);
    }
  }
  return rows;
}

inline void write_metrics_csv(const std::vector<MetricsRow>& rows, std::ostream& out) {
  out << "method,design,time,bias,ese,ase,ecp,u_ecp,failures\n";
  char buf[64];
  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return std::string(buf);
  };
  for (const auto& r : rows) {
    out << r.method << ',' << r.design << ',' << fmt(r.time) << ',' << fmt(r.bias) << ','
        << fmt(r.ese) << ',' << fmt(r.ase) << ',' << fmt(r.ecp) << ',' << fmt(r.u_ecp) << ','
        << r.failures << '\n';
  }
}

inline void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write file: " + path);
  write_metrics_csv(rows, out);
}

}  // namespace survrr
