#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "survrr/coxph.hpp"
#include "survrr/dataset.hpp"
#include "survrr/dml.hpp"
#include "survrr/errors.hpp"
#include "survrr/inference.hpp"
#include "survrr/survcurve.hpp"

namespace survrr {

struct AnalyzeOptions {
  std::vector<Method> methods = {Method::kKm, Method::kIpcw, Method::kDml};
  std::vector<double> times = {1.0, 2.0, 3.0, 4.0};
  double alpha = 0.05;
  int k_folds = 5;
  std::string learner = "cox";
  std::uint64_t seed = 1;
  int arm = 1;
  std::optional<double> pi1;  // default: observed arm fraction
};

struct DesignResult {
  std::string design;
  std::vector<double> se;
  std::vector<double> variance_reduction_pct;  // empty under simple randomization
};

struct MethodReport {
  std::string method;
  std::vector<double> estimates;
  std::vector<DesignResult> designs;
  std::string error;  // nonempty if the method failed; others continue
};

struct AnalysisReport {
  std::vector<double> times;
  double alpha = 0.05;
  int n = 0;
  double pi1 = 0.5;
  std::vector<MethodReport> methods;
};

// Observed-data analysis: point estimates with design-corrected standard
// errors under each hypothetical assignment design, and the relative variance
// reduction each design would have delivered against simple randomization.
inline AnalysisReport analyze_dataset(const Dataset& data,
                                      const std::vector<DesignMeta>& hypothetical_designs,
                                      const AnalyzeOptions& opts) {
  {
    DesignMeta check;
    check.design = DesignType::kSimple;
    const auto findings = validate(data, check);
    for (const auto& f : findings) {
      if (f.severity == Finding::Severity::kError) {
        throw EstimationError("analyze_dataset: " + f.message);
      }
    }
  }
  AnalysisReport report;
  report.times = opts.times;
  report.alpha = opts.alpha;
  report.n = data.n();
  const double pi1 =
      opts.pi1 ? *opts.pi1 : static_cast<double>(data.arm_count(opts.arm)) / data.n();
  report.pi1 = pi1;

  TimeGrid grid;
  grid.points = opts.times;
  std::sort(grid.points.begin(), grid.points.end());

  for (Method method : opts.methods) {
    MethodReport mr;
    mr.method = method_name(method);
    try {
      SurvivalCurve curve;
      InfluenceMatrix inf;
      switch (method) {
        case Method::kKm: {
          curve = km_estimate(data, opts.arm, grid);
          inf = km_influence(data, opts.arm, grid, curve, pi1);
          break;
        }
        case Method::kIpcw: {
          std::vector<double> time;
          std::vector<int> cens;
          std::vector<std::vector<double>> z;
          for (const auto& o : data.observations) {
            if (o.arm != opts.arm) continue;
            time.push_back(o.time);
            cens.push_back(1 - o.event);
            z.push_back(o.covariates);
          }
          const CoxFit censor_fit = fit_cox(time, cens, z);
          curve = ipcw_km_estimate(data, opts.arm, grid, censor_fit);
          inf = ipcw_influence(data, opts.arm, grid, curve, censor_fit, pi1);
          break;
        }
        case Method::kDml: {
          RngStream rng(opts.seed, 0);
          const auto learner = make_learner(opts.learner);
          DmlFit fit = dml_estimate(data, opts.arm, grid, opts.k_folds, *learner, pi1, rng);
          inf = std::move(fit.influence);
          curve = fit.monotone_curve();
          break;
        }
      }
      mr.estimates = curve.values;

      std::vector<double> sigma2(grid.size());
      for (int t = 0; t < grid.size(); ++t) {
        double acc = 0.0;
        for (int i = 0; i < inf.n; ++i) acc += inf.at(i, t) * inf.at(i, t);
        sigma2[t] = acc / inf.n;
      }
      DesignResult srs;
      srs.design = "srs";
      for (double v : sigma2) srs.se.push_back(std::sqrt(v / data.n()));
      mr.designs.push_back(srs);

      for (const auto& meta : hypothetical_designs) {
        DesignResult dr;
        dr.design = design_label(meta.design);
        if (method == Method::kDml) {
          // Orthogonality leaves the DML covariance unchanged under the design.
          dr.se = srs.se;
          dr.variance_reduction_pct.assign(grid.size(), 0.0);
        } else {
          DesignMeta m = meta;
          m.pi1 = pi1;
          const CovarianceReport rep = covariance_report(inf, data, m);
          for (int t = 0; t < grid.size(); ++t) {
            dr.se.push_back(std::sqrt(std::max(rep.sigma2_corrected[t], 0.0) / data.n()));
            const double unc = rep.sigma2_uncorrected[t];
            const double red =
                unc > 0.0 ? 100.0 * (unc - rep.sigma2_corrected[t]) / unc : 0.0;
            dr.variance_reduction_pct.push_back(red);
          }
        }
        mr.designs.push_back(dr);
      }
    } catch (const std::exception& e) {
      mr.error = e.what();
    }
    report.methods.push_back(std::move(mr));
  }
  return report;
}

}  // namespace survrr
