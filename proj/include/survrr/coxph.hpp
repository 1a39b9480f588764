#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "survrr/errors.hpp"
#include "survrr/linalg.hpp"

namespace survrr {

struct CoxOptions {
  int max_iter = 50;
  double score_tol = 1e-8;      // sup-norm of the score
  double loglik_tol = 1e-10;    // relative partial log-likelihood change
  double beta_cap = 50.0;       // monotone-likelihood guard
};

// Fitted proportional-hazards model: coefficients (on covariates centered at
// their sample means), Breslow baseline cumulative hazard, convergence info.
struct CoxFit {
  std::vector<double> beta;
  std::vector<double> center;
  std::vector<double> base_times;  // distinct event times
  std::vector<double> base_cum;    // cumulative baseline hazard at base_times
  int iterations = 0;
  double score_norm = 0.0;
  double loglik = 0.0;

  double log_risk(const std::vector<double>& z) const {
    double s = 0.0;
    for (std::size_t j = 0; j < beta.size(); ++j) s += beta[j] * (z[j] - center[j]);
    return s;
  }

  double cumhaz0(double t) const {
    const auto it = std::upper_bound(base_times.begin(), base_times.end(), t);
    if (it == base_times.begin()) return 0.0;
    return base_cum[static_cast<std::size_t>(it - base_times.begin()) - 1];
  }

  double cumhaz0_left(double t) const {
    const auto it = std::lower_bound(base_times.begin(), base_times.end(), t);
    if (it == base_times.begin()) return 0.0;
    return base_cum[static_cast<std::size_t>(it - base_times.begin()) - 1];
  }

  double survival(double t, const std::vector<double>& z) const {
    return std::exp(-cumhaz0(t) * std::exp(log_risk(z)));
  }

  double survival_left(double t, const std::vector<double>& z) const {
    return std::exp(-cumhaz0_left(t) * std::exp(log_risk(z)));
  }
};

namespace detail {

struct CoxWork {
  // Rows sorted by ascending time; events aggregated per distinct time.
  std::vector<double> time;
  std::vector<int> status;
  std::vector<std::vector<double>> z;  // centered
  int n = 0, p = 0;
};

// Breslow partial log-likelihood, score, and information in one backward
// sweep over the sorted rows.
inline double cox_derivatives(const CoxWork& w, const std::vector<double>& beta,
                              std::vector<double>* score, SymMatrix* info) {
  const int n = w.n, p = w.p;
  if (score) score->assign(p, 0.0);
  if (info) *info = SymMatrix(p);
  double ll = 0.0;
  double s0 = 0.0;
  std::vector<double> s1(p, 0.0);
  SymMatrix s2(p);
  int i = n - 1;
  while (i >= 0) {
    const double t = w.time[i];
    int j = i;
    while (j >= 0 && w.time[j] == t) {
      double eta = 0.0;
      for (int k = 0; k < p; ++k) eta += beta[k] * w.z[j][k];
      const double r = std::exp(eta);
      s0 += r;
      for (int k = 0; k < p; ++k) s1[k] += r * w.z[j][k];
      if (info) {
        for (int k = 0; k < p; ++k)
          for (int l = k; l < p; ++l) s2.add(k, l, r * w.z[j][k] * w.z[j][l]);
      }
      --j;
    }
    for (int e = j + 1; e <= i; ++e) {
      if (w.status[e] != 1) continue;
      double eta = 0.0;
      for (int k = 0; k < p; ++k) eta += beta[k] * w.z[e][k];
      ll += eta - std::log(s0);
      if (score) {
        for (int k = 0; k < p; ++k) (*score)[k] += w.z[e][k] - s1[k] / s0;
      }
      if (info) {
        for (int k = 0; k < p; ++k) {
          for (int l = k; l < p; ++l) {
            info->add(k, l, s2(k, l) / s0 - (s1[k] / s0) * (s1[l] / s0));
          }
        }
      }
    }
    i = j;
  }
  return ll;
}

}  // namespace detail

// Maximum partial likelihood with Breslow ties, damped Newton iterations, and
// a Breslow baseline cumulative hazard at the solution. The marginal model
// (no covariates) reduces to the Nelson-Aalen estimator.
inline CoxFit fit_cox(const std::vector<double>& time, const std::vector<int>& status,
                      const std::vector<std::vector<double>>& covariates,
                      const CoxOptions& opt = {}) {
  const int n = static_cast<int>(time.size());
  if (n == 0 || status.size() != time.size() || covariates.size() != time.size()) {
    throw FitError("fit_cox: inconsistent input lengths");
  }
  const int p = static_cast<int>(covariates.front().size());
  int n_events = 0;
  for (int s : status) n_events += (s == 1);
  if (n_events == 0) throw FitError("fit_cox: no events in the data");

  CoxFit fit;
  fit.center.assign(p, 0.0);
  for (const auto& z : covariates)
    for (int j = 0; j < p; ++j) fit.center[j] += z[j];
  for (int j = 0; j < p; ++j) fit.center[j] /= n;

  detail::CoxWork w;
  w.n = n;
  w.p = p;
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return time[a] < time[b]; });
  w.time.resize(n);
  w.status.resize(n);
  w.z.resize(n);
  for (int i = 0; i < n; ++i) {
    w.time[i] = time[order[i]];
    w.status[i] = status[order[i]];
    w.z[i].resize(p);
    for (int j = 0; j < p; ++j) w.z[i][j] = covariates[order[i]][j] - fit.center[j];
  }

  fit.beta.assign(p, 0.0);
  std::vector<double> score(p);
  SymMatrix info(p);
  double ll = detail::cox_derivatives(w, fit.beta, &score, &info);
  fit.loglik = ll;
  if (p > 0) {
    bool converged = false;
    for (int iter = 1; iter <= opt.max_iter; ++iter) {
      fit.iterations = iter;
      double snorm = 0.0;
      for (double s : score) snorm = std::max(snorm, std::fabs(s));
      fit.score_norm = snorm;
      if (snorm < opt.score_tol) {
        converged = true;
        break;
      }
      std::vector<double> step;
      try {
        step = chol_solve(cholesky(info), score);
      } catch (const FactorizationError&) {
        throw FitError("fit_cox: singular information matrix; covariates may be collinear");
      }
      std::vector<double> cand(p);
      double new_ll = -std::numeric_limits<double>::infinity();
      double damp = 1.0;
      for (int h = 0; h < 30; ++h) {
        for (int j = 0; j < p; ++j) cand[j] = fit.beta[j] + damp * step[j];
        new_ll = detail::cox_derivatives(w, cand, nullptr, nullptr);
        if (new_ll >= ll || std::fabs(new_ll - ll) < 1e-14 * (1.0 + std::fabs(ll))) break;
        damp *= 0.5;
      }
      double norm2 = 0.0;
      for (double b : cand) norm2 += b * b;
      if (std::sqrt(norm2) > opt.beta_cap) {
        throw FitError("fit_cox: coefficients diverging (|beta| > " +
                       std::to_string(opt.beta_cap) + "); data may be separated");
      }
      const double rel_change = std::fabs(new_ll - ll) / (1.0 + std::fabs(new_ll));
      fit.beta = cand;
      ll = new_ll;
      fit.loglik = ll;
      ll = detail::cox_derivatives(w, fit.beta, &score, &info);
      if (rel_change < opt.loglik_tol) {
        double snorm = 0.0;
        for (double s : score) snorm = std::max(snorm, std::fabs(s));
        fit.score_norm = snorm;
        converged = true;
        break;
      }
    }
    if (!converged) {
      double snorm = 0.0;
      for (double s : score) snorm = std::max(snorm, std::fabs(s));
      if (snorm >= opt.score_tol) {
        throw FitError("fit_cox: no convergence in " + std::to_string(opt.max_iter) +
                       " iterations (score norm " + std::to_string(snorm) + ")");
      }
      fit.score_norm = snorm;
    }
  }

  // Breslow baseline: dLambda0(t) = dN(t) / sum_{at risk} exp(eta).
  double s0 = 0.0;
  std::vector<std::pair<double, double>> jumps;  // (time, increment), descending
  int i = n - 1;
  while (i >= 0) {
    const double t = w.time[i];
    int j = i;
    int d = 0;
    while (j >= 0 && w.time[j] == t) {
      double eta = 0.0;
      for (int k = 0; k < p; ++k) eta += fit.beta[k] * w.z[j][k];
      s0 += std::exp(eta);
      d += (w.status[j] == 1);
      --j;
    }
    if (d > 0) jumps.push_back({t, d / s0});
    i = j;
  }
  std::reverse(jumps.begin(), jumps.end());
  fit.base_times.reserve(jumps.size());
  fit.base_cum.reserve(jumps.size());
  double cum = 0.0;
  for (const auto& [t, dl] : jumps) {
    cum += dl;
    fit.base_times.push_back(t);
    fit.base_cum.push_back(cum);
  }
  return fit;
}

// S(t | z) on a set of times; extrapolation beyond the last event carries the
// last value.
inline std::vector<double> predict_survival(const CoxFit& fit, const std::vector<double>& z,
                                            const std::vector<double>& times) {
  std::vector<double> out(times.size());
  const double r = std::exp(fit.log_risk(z));
  for (std::size_t k = 0; k < times.size(); ++k) out[k] = std::exp(-fit.cumhaz0(times[k]) * r);
  return out;
}

}  // namespace survrr
