#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "survrr/dataset.hpp"
#include "survrr/errors.hpp"
#include "survrr/isotonic.hpp"
#include "survrr/linalg.hpp"
#include "survrr/sampling.hpp"
#include "survrr/special.hpp"
#include "survrr/survcurve.hpp"

namespace survrr {

// Empirical covariance of influence values at two grid times:
// n^{-1} sum_i phi(s, O_i) phi(t, O_i).
inline double if_covariance(const InfluenceMatrix& inf, double s, double t) {
  auto index_of = [&](double x) {
    const auto it = std::lower_bound(inf.grid.points.begin(), inf.grid.points.end(), x);
    if (it == inf.grid.points.end() || *it != x) {
      throw InferenceError("if_covariance: time " + std::to_string(x) + " not on the grid");
    }
    return static_cast<int>(it - inf.grid.points.begin());
  };
  const int si = index_of(s), ti = index_of(t);
  double acc = 0.0;
  for (int i = 0; i < inf.n; ++i) acc += inf.at(i, si) * inf.at(i, ti);
  return acc / inf.n;
}

// Grid-batch variant over a subset of grid indices.
inline SymMatrix if_covariance_matrix(const InfluenceMatrix& inf, const std::vector<int>& ix) {
  const int g = static_cast<int>(ix.size());
  SymMatrix c(g);
  for (int a = 0; a < g; ++a) {
    for (int b = a; b < g; ++b) {
      double acc = 0.0;
      for (int i = 0; i < inf.n; ++i) acc += inf.at(i, ix[a]) * inf.at(i, ix[b]);
      c.set(a, b, acc / inf.n);
    }
  }
  return c;
}

inline std::vector<int> full_grid_indices(const InfluenceMatrix& inf) {
  std::vector<int> ix(inf.grid.size());
  for (int i = 0; i < inf.grid.size(); ++i) ix[i] = i;
  return ix;
}

// Estimator of the covariance between the influence process and the
// rerandomization imbalance direction: per-arm centered-covariate averages of
// the influence values, differenced across arms. For KM/IPCW matrices the
// off-arm rows are identically zero, so this reduces to the arm-restricted
// average; for EIF matrices the difference is what the orthogonality theory
// zeroes out. Stratified designs center within strata and weight by stratum
// share. Simple designs get zero vectors (no correction applies).
inline std::vector<std::vector<double>> rerand_covariance_vector(
    const InfluenceMatrix& inf, const std::vector<std::vector<double>>& zrr,
    const std::vector<int>& arms, int arm, const DesignMeta& meta,
    const std::vector<int>& strata = {}) {
  const int g = inf.grid.size();
  const int n = inf.n;
  const int p = zrr.empty() ? 0 : static_cast<int>(zrr.front().size());
  std::vector<std::vector<double>> out(g, std::vector<double>(p, 0.0));
  if (meta.design == DesignType::kSimple || p == 0) return out;
  if (static_cast<int>(zrr.size()) != n || static_cast<int>(arms.size()) != n) {
    throw InferenceError("rerand_covariance_vector: input sizes disagree");
  }

  if (meta.design == DesignType::kRerand) {
    std::vector<double> zbar(p, 0.0);
    for (const auto& z : zrr)
      for (int j = 0; j < p; ++j) zbar[j] += z[j];
    for (int j = 0; j < p; ++j) zbar[j] /= n;
    int n1 = 0;
    for (int a : arms) n1 += a;
    const int n0 = n - n1;
    if (n1 == 0 || n0 == 0) throw InferenceError("rerand_covariance_vector: an arm is empty");
    for (int i = 0; i < n; ++i) {
      const double sign = arms[i] == arm ? 1.0 / (arms[i] == 1 ? n1 : n0)
                                         : -1.0 / (arms[i] == 1 ? n1 : n0);
      for (int t = 0; t < g; ++t) {
        const double phi = inf.at(i, t);
        if (phi == 0.0) continue;
        for (int j = 0; j < p; ++j) out[t][j] += sign * phi * (zrr[i][j] - zbar[j]);
      }
    }
    return out;
  }

  // stratified: within-stratum centering, stratum-share weights
  if (static_cast<int>(strata.size()) != n) {
    throw InferenceError("rerand_covariance_vector: stratified design requires strata");
  }
  std::map<int, std::vector<double>> zbar_d;
  std::map<int, int> n_d;
  std::map<int, std::array<int, 2>> n_ad;
  for (int i = 0; i < n; ++i) {
    auto& zb = zbar_d[strata[i]];
    if (zb.empty()) zb.assign(p, 0.0);
    for (int j = 0; j < p; ++j) zb[j] += zrr[i][j];
    ++n_d[strata[i]];
    ++n_ad[strata[i]][arms[i]];
  }
  for (auto& [d, zb] : zbar_d) {
    for (int j = 0; j < p; ++j) zb[j] /= n_d[d];
    if (n_ad[d][0] == 0 || n_ad[d][1] == 0) {
      throw InferenceError("rerand_covariance_vector: stratum " + std::to_string(d) +
                           " is missing an arm");
    }
  }
  for (int i = 0; i < n; ++i) {
    const int d = strata[i];
    const double share = static_cast<double>(n_d[d]) / n;
    const double within = 1.0 / n_ad[d][arms[i]];
    const double sign = arms[i] == arm ? share * within : -share * within;
    const auto& zb = zbar_d[d];
    for (int t = 0; t < g; ++t) {
      const double phi = inf.at(i, t);
      if (phi == 0.0) continue;
      for (int j = 0; j < p; ++j) out[t][j] += sign * phi * (zrr[i][j] - zb[j]);
    }
  }
  return out;
}

// Limit covariance of the scaled imbalance statistic: (pi1 pi0)^{-1} Cov(Z)
// for rerandomization, the stratum-share-weighted within-stratum analogue for
// stratified rerandomization.
inline SymMatrix sigma_b_matrix(const std::vector<std::vector<double>>& zrr,
                                const DesignMeta& meta, const std::vector<int>& strata = {}) {
  const int n = static_cast<int>(zrr.size());
  const int p = zrr.empty() ? 0 : static_cast<int>(zrr.front().size());
  SymMatrix s(p);
  if (meta.design == DesignType::kRerand) {
    std::vector<double> zbar(p, 0.0);
    for (const auto& z : zrr)
      for (int j = 0; j < p; ++j) zbar[j] += z[j];
    for (int j = 0; j < p; ++j) zbar[j] /= n;
    const double scale = 1.0 / (meta.pi1 * (1.0 - meta.pi1) * n);
    for (const auto& z : zrr) {
      for (int j = 0; j < p; ++j) {
        for (int k = j; k < p; ++k) {
          s.add(j, k, scale * (z[j] - zbar[j]) * (z[k] - zbar[k]));
        }
      }
    }
    return s;
  }
  if (meta.design != DesignType::kStratifiedRerand) {
    throw InferenceError("sigma_b_matrix: no imbalance covariance under simple randomization");
  }
  if (static_cast<int>(strata.size()) != n) {
    throw InferenceError("sigma_b_matrix: stratified design requires strata");
  }
  std::map<int, std::vector<double>> zbar_d;
  std::map<int, int> n_d;
  for (int i = 0; i < n; ++i) {
    auto& zb = zbar_d[strata[i]];
    if (zb.empty()) zb.assign(p, 0.0);
    for (int j = 0; j < p; ++j) zb[j] += zrr[i][j];
    ++n_d[strata[i]];
  }
  for (auto& [d, zb] : zbar_d)
    for (int j = 0; j < p; ++j) zb[j] /= n_d[d];
  for (int i = 0; i < n; ++i) {
    const int d = strata[i];
    const double pi1 = meta.pi1_for_stratum(d);
    const double scale = 1.0 / (pi1 * (1.0 - pi1) * n);  // share * within-stratum mean
    const auto& zb = zbar_d[d];
    for (int j = 0; j < p; ++j) {
      for (int k = j; k < p; ++k) {
        s.add(j, k, scale * (zrr[i][j] - zb[j]) * (zrr[i][k] - zb[k]));
      }
    }
  }
  return s;
}

// Pointwise variances, rerandomization covariance vectors, kappa, variance
// reduction factor, and corrected variances for one influence matrix under
// one design.
struct CovarianceReport {
  TimeGrid grid;
  std::vector<double> sigma2_uncorrected;
  std::vector<std::vector<double>> sigma_b_vec;
  SymMatrix sigma_b;
  double kappa_c = 1.0;
  std::vector<double> rho_hat;
  std::vector<double> sigma2_corrected;
  DesignMeta design;
};

// Corrected variance sigma^2 - (1 - kappa) q with q the Mahalanobis quadratic
// form of the covariance vector, clipped so the correction never exceeds the
// uncorrected variance.
inline void corrected_variance(const std::vector<double>& sigma2,
                               const std::vector<std::vector<double>>& sigma_b_vec,
                               const SymMatrix& sigma_b, double c, int p_rr,
                               std::vector<double>* rho_hat, std::vector<double>* sigma2_corr) {
  const double kap = kappa(c, p_rr);
  CholeskyFactor fac;
  try {
    fac = cholesky(sigma_b);
  } catch (const FactorizationError&) {
    throw InferenceError("corrected_variance: singular imbalance covariance");
  }
  const std::size_t g = sigma2.size();
  rho_hat->assign(g, 0.0);
  sigma2_corr->assign(g, 0.0);
  for (std::size_t t = 0; t < g; ++t) {
    const double q = chol_quadform(fac, sigma_b_vec[t]);
    const double v = sigma2[t];
    (*rho_hat)[t] = v > 0.0 ? std::clamp(q / v, 0.0, 1.0) : 0.0;
    (*sigma2_corr)[t] = v - (1.0 - kap) * std::min(q, v);
  }
}

// Assemble the full report for an influence matrix under the dataset's design.
inline CovarianceReport covariance_report(const InfluenceMatrix& inf, const Dataset& data,
                                          const DesignMeta& meta) {
  CovarianceReport rep;
  rep.grid = inf.grid;
  rep.design = meta;
  const auto ix = full_grid_indices(inf);
  rep.sigma2_uncorrected.resize(inf.grid.size());
  for (int t = 0; t < inf.grid.size(); ++t) {
    double acc = 0.0;
    for (int i = 0; i < inf.n; ++i) acc += inf.at(i, t) * inf.at(i, t);
    rep.sigma2_uncorrected[t] = acc / inf.n;
  }
  if (meta.design == DesignType::kSimple) {
    rep.kappa_c = 1.0;
    rep.rho_hat.assign(inf.grid.size(), 0.0);
    rep.sigma2_corrected = rep.sigma2_uncorrected;
    rep.sigma_b_vec.assign(inf.grid.size(), {});
    return rep;
  }

  std::vector<std::vector<double>> zrr(data.n());
  const auto& cols = meta.rerand_cols.empty() ? data.rerand_cols : meta.rerand_cols;
  for (int i = 0; i < data.n(); ++i) {
    zrr[i].reserve(cols.size());
    for (int c : cols) zrr[i].push_back(data.observations[i].covariates[c]);
  }
  std::vector<int> strata;
  if (meta.design == DesignType::kStratifiedRerand) {
    strata.resize(data.n());
    for (int i = 0; i < data.n(); ++i) {
      if (!data.observations[i].stratum) {
        throw InferenceError("covariance_report: stratified design requires strata");
      }
      strata[i] = *data.observations[i].stratum;
    }
  }
  if (!meta.threshold_c) throw InferenceError("covariance_report: design lacks a threshold c");
  rep.sigma_b_vec = rerand_covariance_vector(inf, zrr, data.arms(), inf.arm, meta, strata);
  rep.sigma_b = sigma_b_matrix(zrr, meta, strata);
  rep.kappa_c = kappa(*meta.threshold_c, static_cast<int>(cols.size()));
  corrected_variance(rep.sigma2_uncorrected, rep.sigma_b_vec, rep.sigma_b, *meta.threshold_c,
                     static_cast<int>(cols.size()), &rep.rho_hat, &rep.sigma2_corrected);
  return rep;
}

enum class CiScale { kPlain, kLogit };

struct Band {
  TimeGrid grid;
  std::vector<double> lower;
  std::vector<double> upper;
  enum class Kind { kPointwise, kUniform } kind = Kind::kPointwise;
  double alpha = 0.05;
  double c_hat = 0.0;  // uniform bands: the sup-process quantile
};

// Wald pointwise intervals, plain or on the logistic probability scale with
// the boundary rules for estimates at 0 or 1.
inline Band pointwise_ci(const SurvivalCurve& curve, const std::vector<double>& sigma2, int n,
                         double alpha, CiScale scale) {
  const int g = curve.grid.size();
  if (static_cast<int>(sigma2.size()) != g) throw InferenceError("pointwise_ci: length mismatch");
  const double z = normal_quantile(1.0 - alpha / 2.0);
  Band band;
  band.grid = curve.grid;
  band.alpha = alpha;
  band.kind = Band::Kind::kPointwise;
  band.lower.assign(g, 0.0);
  band.upper.assign(g, 0.0);
  std::vector<bool> at_zero(g, false), at_one(g, false);
  for (int t = 0; t < g; ++t) {
    const double s = curve.values[t];
    const double se = std::sqrt(std::max(sigma2[t], 0.0) / n);
    if (scale == CiScale::kPlain) {
      band.lower[t] = std::clamp(s - z * se, 0.0, 1.0);
      band.upper[t] = std::clamp(s + z * se, 0.0, 1.0);
      continue;
    }
    if (s <= 0.0) {
      at_zero[t] = true;
    } else if (s >= 1.0) {
      at_one[t] = true;
    } else {
      const double tilde = se / (s * (1.0 - s));
      band.lower[t] = expit(logit(s) - z * tilde);
      band.upper[t] = expit(logit(s) + z * tilde);
    }
  }
  if (scale == CiScale::kLogit) {
    double min_pos_upper = 1.0, min_pos_lower = 1.0;
    bool any_u = false, any_l = false;
    for (int t = 0; t < g; ++t) {
      if (at_zero[t] || at_one[t]) continue;
      if (band.upper[t] > 0.0) {
        min_pos_upper = any_u ? std::min(min_pos_upper, band.upper[t]) : band.upper[t];
        any_u = true;
      }
      if (band.lower[t] > 0.0) {
        min_pos_lower = any_l ? std::min(min_pos_lower, band.lower[t]) : band.lower[t];
        any_l = true;
      }
    }
    for (int t = 0; t < g; ++t) {
      if (at_zero[t]) {
        band.lower[t] = 0.0;
        band.upper[t] = any_u ? min_pos_upper : 0.0;
      } else if (at_one[t]) {
        band.upper[t] = 1.0;
        band.lower[t] = any_l ? min_pos_lower : 1.0;
      }
    }
  }
  return band;
}

// Fixed-width uniform confidence band S(t) +- c_hat / sqrt(n) with the
// sup-process quantile simulated from the given covariance on the band grid,
// clipped to [0,1] and made monotone by isotonic projection.
inline Band uniform_band(const SurvivalCurve& curve, const SymMatrix& cov_grid, int n,
                         double alpha, int n_paths, const RngStream& rng) {
  const int g = curve.grid.size();
  if (cov_grid.dim() != g) throw InferenceError("uniform_band: covariance/grid size mismatch");
  Band band;
  band.grid = curve.grid;
  band.alpha = alpha;
  band.kind = Band::Kind::kUniform;
  band.c_hat = gp_sup_quantile(cov_grid, n_paths, alpha, rng);
  const double half = band.c_hat / std::sqrt(static_cast<double>(n));
  band.lower.resize(g);
  band.upper.resize(g);
  for (int t = 0; t < g; ++t) {
    band.lower[t] = std::clamp(curve.values[t] - half, 0.0, 1.0);
    band.upper[t] = std::clamp(curve.values[t] + half, 0.0, 1.0);
  }
  band.lower = pava_isotonic(band.lower, Monotone::kNonincreasing);
  band.upper = pava_isotonic(band.upper, Monotone::kNonincreasing);
  return band;
}

// Corrected covariance matrix on a grid subset for band construction:
// Sigma(s,t) - (1 - kappa) vec(s)' SigmaB^{-1} vec(t), with the diagonal
// clipped the same way as the pointwise corrected variance.
inline SymMatrix corrected_covariance_matrix(const InfluenceMatrix& inf,
                                             const std::vector<int>& ix,
                                             const CovarianceReport& rep) {
  SymMatrix cov = if_covariance_matrix(inf, ix);
  if (rep.design.design == DesignType::kSimple) return cov;
  CholeskyFactor fac;
  try {
    fac = cholesky(rep.sigma_b);
  } catch (const FactorizationError&) {
    throw InferenceError("corrected_covariance_matrix: singular imbalance covariance");
  }
  const int g = static_cast<int>(ix.size());
  std::vector<std::vector<double>> w(g);
  for (int t = 0; t < g; ++t) w[t] = chol_solve(fac, rep.sigma_b_vec[ix[t]]);
  const double shrink = 1.0 - rep.kappa_c;
  for (int a = 0; a < g; ++a) {
    for (int b = a; b < g; ++b) {
      double q = 0.0;
      for (std::size_t j = 0; j < w[b].size(); ++j) q += rep.sigma_b_vec[ix[a]][j] * w[b][j];
      if (a == b) q = std::min(q, cov(a, a));
      cov.set(a, b, cov(a, b) - shrink * q);
    }
  }
  return cov;
}

}  // namespace survrr
