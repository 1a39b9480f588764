#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "survrr/coxph.hpp"
#include "survrr/dataset.hpp"
#include "survrr/errors.hpp"
#include "survrr/stepfn.hpp"

namespace survrr {

enum class Method { kKm, kIpcw, kDml };

inline std::string method_name(Method m) {
  switch (m) {
    case Method::kKm: return "km";
    case Method::kIpcw: return "ipcw";
    case Method::kDml: return "dml";
  }
  return "km";
}

inline Method method_from_name(const std::string& s) {
  if (s == "km") return Method::kKm;
  if (s == "ipcw") return Method::kIpcw;
  if (s == "dml") return Method::kDml;
  throw ConfigError("unknown method: " + s);
}

// Right-continuous survival step function evaluated on a grid.
struct SurvivalCurve {
  TimeGrid grid;
  std::vector<double> values;
  int arm = 1;
  Method method = Method::kKm;
};

// n x grid matrix of estimated influence-function values; rows of units not
// in the curve's arm are zero for KM/IPCW.
struct InfluenceMatrix {
  std::vector<double> values;  // row-major, n x grid
  TimeGrid grid;
  int n = 0;
  int arm = 1;
  Method method = Method::kKm;

  double at(int unit, int t) const {
    return values[static_cast<std::size_t>(unit) * grid.size() + t];
  }
  double& at(int unit, int t) {
    return values[static_cast<std::size_t>(unit) * grid.size() + t];
  }
};

// Minimum value the estimated censoring survival may take when used as an
// IPCW denominator; operationalizes the bounded-weights condition.
inline constexpr double kCensorFloor = 0.05;

namespace detail {

// Weighted product-limit pieces shared by the estimator and its influence
// function: distinct event times with dN, Y, hazard increments, and the
// cumulated survival at each event time.
struct ProductLimit {
  std::vector<double> times;
  std::vector<double> dn;
  std::vector<double> y;
  std::vector<double> dlambda;  // dN / Y
  std::vector<double> surv;     // prod (1 - dLambda) up to each time

  StepFn survival_fn() const {
    StepFn f;
    f.knots = times;
    f.values = surv;
    f.value_at0 = 1.0;
    return f;
  }
};

inline ProductLimit product_limit(const RiskTable& table, double grid_max) {
  ProductLimit pl;
  pl.times = table.event_times;
  pl.dn = table.dn;
  pl.y = table.y;
  pl.dlambda.resize(pl.times.size());
  pl.surv.resize(pl.times.size());
  double s = 1.0;
  for (std::size_t k = 0; k < pl.times.size(); ++k) {
    if (!(pl.y[k] > 0.0)) {
      if (pl.times[k] <= grid_max) {
        throw EstimationError("product-limit: zero at-risk mass at event time " +
                              std::to_string(pl.times[k]));
      }
      pl.dlambda[k] = 0.0;
      pl.surv[k] = s;
      continue;
    }
    pl.dlambda[k] = pl.dn[k] / pl.y[k];
    s *= 1.0 - pl.dlambda[k];
    pl.surv[k] = s;
  }
  return pl;
}

inline std::vector<double> evaluate_on_grid(const ProductLimit& pl, const TimeGrid& grid) {
  const StepFn f = pl.survival_fn();
  std::vector<double> out(grid.points.size());
  for (std::size_t k = 0; k < grid.points.size(); ++k) out[k] = f.eval(grid.points[k]);
  return out;
}

}  // namespace detail

// Kaplan-Meier product-limit estimator for one arm, evaluated on the grid by
// right-continuous step lookup.
inline SurvivalCurve km_estimate(const Dataset& data, int arm, const TimeGrid& grid) {
  const RiskTable table = risk_table(data, arm);
  const double gmax = grid.points.empty() ? 0.0 : grid.points.back();
  const detail::ProductLimit pl = detail::product_limit(table, gmax);
  SurvivalCurve curve;
  curve.grid = grid;
  curve.values = detail::evaluate_on_grid(pl, grid);
  curve.arm = arm;
  curve.method = Method::kKm;
  return curve;
}

namespace detail {

// Martingale-residual influence matrix shared by KM and IPCW-KM:
//   phi_i(t) = -S(t) [ w_i(X_i) 1(X_i <= t, D_i = 1) / h(X_i)
//                      - sum_{s <= t ^ X_i} w_i(s) dLambda(s) / h(s) ]
// with h(s) = pi_a * Y_w(s) / n_a. The default pi_a = n_a / n makes h the
// arm-specific at-risk proportion of the full sample.
inline InfluenceMatrix martingale_influence(const Dataset& data, int arm, const TimeGrid& grid,
                                            const ProductLimit& pl,
                                            const std::vector<double>& curve_values,
                                            const WeightFn& weights, Method method,
                                            std::optional<double> pi_a) {
  const int n = data.n();
  const int g = grid.size();
  const int m = static_cast<int>(pl.times.size());
  const int n_arm = data.arm_count(arm);
  const double pia = pi_a ? *pi_a : static_cast<double>(n_arm) / n;
  if (!(pia > 0.0 && pia <= 1.0)) throw EstimationError("influence: pi_a must be in (0,1]");

  // 1 / h at each event time
  std::vector<double> inv_h(m);
  for (int k = 0; k < m; ++k) {
    inv_h[k] = n_arm / (pia * pl.y[k]);
  }

  InfluenceMatrix inf;
  inf.grid = grid;
  inf.n = n;
  inf.arm = arm;
  inf.method = method;
  inf.values.assign(static_cast<std::size_t>(n) * g, 0.0);

  // Unweighted case: the compensator prefix sum is shared across units.
  std::vector<double> shared_prefix;
  if (!weights) {
    shared_prefix.resize(m);
    double acc = 0.0;
    for (int k = 0; k < m; ++k) {
      acc += pl.dlambda[k] * inv_h[k];
      shared_prefix[k] = acc;
    }
  }

  std::vector<double> unit_prefix;
  for (int i = 0; i < n; ++i) {
    const Observation& o = data.observations[i];
    if (o.arm != arm) continue;

    const double x = o.time;
    // index of the last event time <= x
    const int last = static_cast<int>(std::upper_bound(pl.times.begin(), pl.times.end(), x) -
                                      pl.times.begin()) - 1;
    const double* prefix = nullptr;
    if (weights) {
      unit_prefix.assign(m, 0.0);
      double acc = 0.0;
      for (int k = 0; k <= last; ++k) {
        acc += weights(i, pl.times[k]) * pl.dlambda[k] * inv_h[k];
        unit_prefix[k] = acc;
      }
      prefix = unit_prefix.data();
    } else {
      prefix = shared_prefix.data();
    }

    double event_term = 0.0;
    int event_ix = -1;
    if (o.event == 1) {
      const auto it = std::lower_bound(pl.times.begin(), pl.times.end(), x);
      event_ix = static_cast<int>(it - pl.times.begin());
      const double w = weights ? weights(i, x) : 1.0;
      event_term = w * inv_h[event_ix];
    }

    for (int t = 0; t < g; ++t) {
      const double tt = grid.points[t];
      const int upto = std::min(
          last, static_cast<int>(std::upper_bound(pl.times.begin(), pl.times.end(), tt) -
                                 pl.times.begin()) - 1);
      double integral = upto >= 0 ? prefix[upto] : 0.0;
      if (event_ix >= 0 && x <= tt) integral = event_term - integral;
      else integral = -integral;
      inf.at(i, t) = -curve_values[t] * integral;
    }
  }
  return inf;
}

}  // namespace detail

// Influence matrix of the KM estimator. pi_a overrides the arm-assignment
// probability used in the at-risk normalization; absent, the observed arm
// fraction is used.
inline InfluenceMatrix km_influence(const Dataset& data, int arm, const TimeGrid& grid,
                                    const SurvivalCurve& curve,
                                    std::optional<double> pi_a = {}) {
  const RiskTable table = risk_table(data, arm);
  const double gmax = grid.points.empty() ? 0.0 : grid.points.back();
  const detail::ProductLimit pl = detail::product_limit(table, gmax);
  return detail::martingale_influence(data, arm, grid, pl, curve.values, nullptr, Method::kKm,
                                      pi_a);
}

// Per-unit, per-time IPCW weight bound away from infinity by the censoring
// survival floor.
inline WeightFn ipcw_weights(const Dataset& data, const CoxFit& censor_fit) {
  return [&data, &censor_fit](int unit, double time) {
    const double sc = censor_fit.survival_left(time, data.observations[unit].covariates);
    return 1.0 / std::max(sc, kCensorFloor);
  };
}

// Weighted product-limit with w_i(s) = 1 / max(S_C(s- | Z_i), floor) for the
// arm's units. With a unit censoring survival this is exactly km_estimate.
inline SurvivalCurve ipcw_km_estimate(const Dataset& data, int arm, const TimeGrid& grid,
                                      const CoxFit& censor_fit) {
  const WeightFn w = ipcw_weights(data, censor_fit);
  const RiskTable table = risk_table(data, arm, w);
  const double gmax = grid.points.empty() ? 0.0 : grid.points.back();
  const detail::ProductLimit pl = detail::product_limit(table, gmax);
  SurvivalCurve curve;
  curve.grid = grid;
  curve.values = detail::evaluate_on_grid(pl, grid);
  curve.arm = arm;
  curve.method = Method::kIpcw;
  return curve;
}

// Influence matrix of the IPCW-KM estimator with the censoring weights
// treated as known.
inline InfluenceMatrix ipcw_influence(const Dataset& data, int arm, const TimeGrid& grid,
                                      const SurvivalCurve& curve, const CoxFit& censor_fit,
                                      std::optional<double> pi_a = {}) {
  const WeightFn w = ipcw_weights(data, censor_fit);
  const RiskTable table = risk_table(data, arm, w);
  const double gmax = grid.points.empty() ? 0.0 : grid.points.back();
  const detail::ProductLimit pl = detail::product_limit(table, gmax);
  return detail::martingale_influence(data, arm, grid, pl, curve.values, w, Method::kIpcw, pi_a);
}

}  // namespace survrr
