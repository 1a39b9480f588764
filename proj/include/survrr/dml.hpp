#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "survrr/coxph.hpp"
#include "survrr/dataset.hpp"
#include "survrr/errors.hpp"
#include "survrr/isotonic.hpp"
#include "survrr/rng.hpp"
#include "survrr/stepfn.hpp"
#include "survrr/survcurve.hpp"

namespace survrr {

struct FoldPartition {
  int k = 0;
  std::vector<int> membership;  // fold id per unit
};

// Uniformly random partition into K folds with ||I_k| - n/K| <= 1.
inline FoldPartition crossfit_partition(int n, int k, RngStream& rng) {
  if (k < 2 || k > n) throw ConfigError("crossfit_partition: need 2 <= K <= n");
  std::vector<int> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  rng.shuffle(perm);
  FoldPartition part;
  part.k = k;
  part.membership.resize(n);
  for (int i = 0; i < n; ++i) part.membership[perm[i]] = i % k;
  return part;
}

// Conditional nuisance functions specialized at one unit's covariates:
// S_T(. | z) and Lambda_T(. | z) share the same jump times; S_C(. | z) is a
// separate step function.
struct UnitNuisance {
  std::vector<double> jump_times;  // Lambda_T atoms, sorted
  std::vector<double> dlambda;     // hazard increments
  std::vector<double> surv_t;      // S_T value at each jump time
  StepFn surv_c;

  double surv_t_at(double t) const {
    const auto it = std::upper_bound(jump_times.begin(), jump_times.end(), t);
    if (it == jump_times.begin()) return 1.0;
    return surv_t[static_cast<std::size_t>(it - jump_times.begin()) - 1];
  }

  double surv_t_left(double t) const {
    const auto it = std::lower_bound(jump_times.begin(), jump_times.end(), t);
    if (it == jump_times.begin()) return 1.0;
    return surv_t[static_cast<std::size_t>(it - jump_times.begin()) - 1];
  }
};

// Uncentered efficient influence value phi*_{T,a}(t, O):
//   S_T(t|Z) [ 1 - 1(A=a)/pi_a { 1(X<=t, D=1) / (S_T(X-|Z) S_C(X-|Z))
//                                - int_0^{t^X} dLambda_T(s|Z) / (S_T(s-|Z) S_C(s-|Z)) } ]
// computed as a finite sum over the atoms of Lambda_T(.|Z); survival values
// in denominators are floored.
inline double eif_evaluate(const Observation& obs, int arm, double t, const UnitNuisance& nu,
                           double pi_a) {
  const double front = nu.surv_t_at(t);
  if (obs.arm != arm) return front;
  double bracket = 0.0;
  if (obs.time <= t && obs.event == 1) {
    const double st = std::max(nu.surv_t_left(obs.time), kCensorFloor);
    const double sc = std::max(nu.surv_c.eval_left(obs.time), kCensorFloor);
    bracket += 1.0 / (st * sc);
  }
  const double upto = std::min(t, obs.time);
  for (std::size_t k = 0; k < nu.jump_times.size() && nu.jump_times[k] <= upto; ++k) {
    const double st = std::max(k == 0 ? 1.0 : nu.surv_t[k - 1], kCensorFloor);
    const double sc = std::max(nu.surv_c.eval_left(nu.jump_times[k]), kCensorFloor);
    bracket -= nu.dlambda[k] / (st * sc);
  }
  return front * (1.0 - bracket / pi_a);
}

namespace detail {

// Grid-batch EIF evaluation using a prefix sum over the hazard atoms; agrees
// with eif_evaluate pointwise.
inline void eif_evaluate_grid(const Observation& obs, int arm, const TimeGrid& grid,
                              const UnitNuisance& nu, double pi_a, double* out) {
  const int g = grid.size();
  const int m = static_cast<int>(nu.jump_times.size());
  if (obs.arm != arm) {
    for (int t = 0; t < g; ++t) out[t] = nu.surv_t_at(grid.points[t]);
    return;
  }
  const int last = static_cast<int>(std::upper_bound(nu.jump_times.begin(), nu.jump_times.end(),
                                                     obs.time) - nu.jump_times.begin()) - 1;
  std::vector<double> prefix(static_cast<std::size_t>(last + 1));
  double acc = 0.0;
  for (int k = 0; k <= last; ++k) {
    const double st = std::max(k == 0 ? 1.0 : nu.surv_t[k - 1], kCensorFloor);
    const double sc = std::max(nu.surv_c.eval_left(nu.jump_times[k]), kCensorFloor);
    acc += nu.dlambda[k] / (st * sc);
    prefix[k] = acc;
  }
  double event_term = 0.0;
  if (obs.event == 1) {
    const double st = std::max(nu.surv_t_left(obs.time), kCensorFloor);
    const double sc = std::max(nu.surv_c.eval_left(obs.time), kCensorFloor);
    event_term = 1.0 / (st * sc);
  }
  for (int t = 0; t < g; ++t) {
    const double tt = grid.points[t];
    const int upto = std::min(
        last, static_cast<int>(std::upper_bound(nu.jump_times.begin(), nu.jump_times.end(), tt) -
                               nu.jump_times.begin()) - 1);
    double bracket = -(upto >= 0 ? prefix[upto] : 0.0);
    if (obs.event == 1 && obs.time <= tt) bracket += event_term;
    out[t] = nu.surv_t_at(tt) * (1.0 - bracket / pi_a);
  }
}

}  // namespace detail

// Per-fold, per-arm fitted conditional functions.
class NuisanceModel {
 public:
  virtual ~NuisanceModel() = default;
  virtual UnitNuisance at(const std::vector<double>& z) const = 0;
};

// Fits one arm's outcome and censoring models on a training subset.
class NuisanceLearner {
 public:
  virtual ~NuisanceLearner() = default;
  virtual std::unique_ptr<NuisanceModel> fit(const Dataset& data,
                                             const std::vector<int>& train_rows,
                                             int arm) const = 0;
  virtual std::string name() const = 0;
};

namespace detail {

// Proportional-hazards-shaped nuisances. With covariates, survival is
// exp(-Lambda); the covariate-free reduction uses the product-limit pairing
// so that S_T is exactly the training-set Kaplan-Meier.
class PhNuisanceModel : public NuisanceModel {
 public:
  PhNuisanceModel(CoxFit outcome, CoxFit censoring, bool product_limit_form)
      : outcome_(std::move(outcome)), censoring_(std::move(censoring)),
        product_limit_(product_limit_form) {}

  UnitNuisance at(const std::vector<double>& z) const override {
    UnitNuisance nu;
    const double rt = std::exp(outcome_.log_risk(z));
    nu.jump_times = outcome_.base_times;
    const int m = static_cast<int>(nu.jump_times.size());
    nu.dlambda.resize(m);
    nu.surv_t.resize(m);
    double prev_cum = 0.0;
    double pl = 1.0;
    for (int k = 0; k < m; ++k) {
      const double d = (outcome_.base_cum[k] - prev_cum) * rt;
      prev_cum = outcome_.base_cum[k];
      nu.dlambda[k] = d;
      if (product_limit_) {
        pl *= std::max(1.0 - d, 0.0);
        nu.surv_t[k] = pl;
      } else {
        nu.surv_t[k] = std::exp(-outcome_.base_cum[k] * rt);
      }
    }
    const double rc = std::exp(censoring_.log_risk(z));
    nu.surv_c.knots = censoring_.base_times;
    nu.surv_c.value_at0 = 1.0;
    nu.surv_c.values.resize(censoring_.base_times.size());
    double prev_c = 0.0;
    double pl_c = 1.0;
    for (std::size_t k = 0; k < censoring_.base_times.size(); ++k) {
      if (product_limit_) {
        pl_c *= std::max(1.0 - (censoring_.base_cum[k] - prev_c) * rc, 0.0);
        prev_c = censoring_.base_cum[k];
        nu.surv_c.values[k] = pl_c;
      } else {
        nu.surv_c.values[k] = std::exp(-censoring_.base_cum[k] * rc);
      }
    }
    return nu;
  }

 private:
  CoxFit outcome_;
  CoxFit censoring_;
  bool product_limit_;
};

}  // namespace detail

// Built-in learner: per-arm Cox proportional hazards for both the outcome and
// censoring conditional survival functions. With marginal = true the
// covariate sets are empty and the learner degenerates to the arm's
// Kaplan-Meier / Nelson-Aalen estimates.
class CoxNuisanceLearner : public NuisanceLearner {
 public:
  explicit CoxNuisanceLearner(bool marginal = false) : marginal_(marginal) {}

  std::unique_ptr<NuisanceModel> fit(const Dataset& data, const std::vector<int>& train_rows,
                                     int arm) const override {
    std::vector<double> time;
    std::vector<int> ev, cens;
    std::vector<std::vector<double>> z;
    for (int i : train_rows) {
      const Observation& o = data.observations[i];
      if (o.arm != arm) continue;
      time.push_back(o.time);
      ev.push_back(o.event);
      cens.push_back(1 - o.event);
      z.push_back(marginal_ ? std::vector<double>{} : o.covariates);
    }
    if (time.empty()) {
      throw EstimationError("nuisance fit: training set has no arm-" + std::to_string(arm) +
                            " units");
    }
    CoxFit fit_t = fit_cox(time, ev, z);
    CoxFit fit_c = fit_cox(time, cens, z);
    return std::make_unique<detail::PhNuisanceModel>(std::move(fit_t), std::move(fit_c),
                                                     marginal_);
  }

  std::string name() const override { return marginal_ ? "marginal" : "cox"; }

 private:
  bool marginal_;
};

inline std::unique_ptr<NuisanceLearner> make_learner(const std::string& name) {
  if (name == "cox") return std::make_unique<CoxNuisanceLearner>(false);
  if (name == "marginal") return std::make_unique<CoxNuisanceLearner>(true);
  throw ConfigError("unknown nuisance learner: " + name);
}

struct DmlFit {
  SurvivalCurve curve;      // raw cross-fitted estimate (need not be monotone)
  InfluenceMatrix influence;

  // Monotone, [0,1]-clipped curve for reporting; the variance pipeline uses
  // the raw estimate.
  SurvivalCurve monotone_curve() const {
    SurvivalCurve c = curve;
    c.values = pava_isotonic(c.values, Monotone::kNonincreasing);
    for (double& v : c.values) v = std::clamp(v, 0.0, 1.0);
    return c;
  }
};

// Cross-fitted EIF plug-in estimator. For each fold, nuisances are fitted on
// the complement and phi* evaluated on the fold; the estimate is the grand
// mean and the influence rows are the centered phi* values.
inline DmlFit dml_estimate(const Dataset& data, int arm, const TimeGrid& grid, int k_folds,
                           const NuisanceLearner& learner, double pi_a, RngStream& rng) {
  const int n = data.n();
  const int g = grid.size();
  if (!(pi_a > 0.0 && pi_a < 1.0)) throw ConfigError("dml_estimate: pi_a must be in (0,1)");
  const FoldPartition part = crossfit_partition(n, k_folds, rng);

  DmlFit out;
  out.influence.grid = grid;
  out.influence.n = n;
  out.influence.arm = arm;
  out.influence.method = Method::kDml;
  out.influence.values.assign(static_cast<std::size_t>(n) * g, 0.0);

  for (int k = 0; k < k_folds; ++k) {
    std::vector<int> train;
    train.reserve(n);
    bool train_has[2] = {false, false};
    for (int i = 0; i < n; ++i) {
      if (part.membership[i] != k) {
        train.push_back(i);
        train_has[data.observations[i].arm] = true;
      }
    }
    if (!train_has[0] || !train_has[1]) {
      throw EstimationError("dml_estimate: fold " + std::to_string(k) +
                            " has a single-arm training set");
    }
    const auto model = learner.fit(data, train, arm);
    for (int i = 0; i < n; ++i) {
      if (part.membership[i] != k) continue;
      const UnitNuisance nu = model->at(data.observations[i].covariates);
      detail::eif_evaluate_grid(data.observations[i], arm, grid, nu, pi_a,
                                &out.influence.values[static_cast<std::size_t>(i) * g]);
    }
  }

  out.curve.grid = grid;
  out.curve.arm = arm;
  out.curve.method = Method::kDml;
  out.curve.values.assign(g, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int t = 0; t < g; ++t) out.curve.values[t] += out.influence.at(i, t);
  }
  for (int t = 0; t < g; ++t) out.curve.values[t] /= n;
  for (int i = 0; i < n; ++i) {
    for (int t = 0; t < g; ++t) out.influence.at(i, t) -= out.curve.values[t];
  }
  return out;
}

}  // namespace survrr
