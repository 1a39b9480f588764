#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "survrr/errors.hpp"
#include "survrr/linalg.hpp"
#include "survrr/rng.hpp"

namespace survrr {

// Realized treatment assignment; for rerandomized designs, the accepted
// Mahalanobis distance and the number of balance-criterion evaluations.
struct Assignment {
  std::vector<int> arms;
  int n_tries = 1;
  std::optional<double> accepted_distance = {};
};

// Arm-mean imbalance on the rerandomization covariates with its randomization
// variance estimator and the Mahalanobis distance.
struct ImbalanceReport {
  std::vector<double> imbalance;  // I_n
  SymMatrix var_hat;
  double distance = 0.0;
};

// I.i.d. Bernoulli(pi1) arms, redrawing (bounded) until both arms are
// nonempty: the imbalance statistic is undefined with an empty arm.
inline Assignment assign_simple(int n, double pi1, RngStream& rng) {
  if (n < 2) throw DesignError("assign_simple: n must be >= 2");
  if (!(pi1 > 0.0 && pi1 < 1.0)) throw DesignError("assign_simple: pi1 must be in (0,1)");
  Assignment a;
  a.arms.resize(n);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    int n1 = 0;
    for (int i = 0; i < n; ++i) {
      a.arms[i] = rng.bernoulli(pi1) ? 1 : 0;
      n1 += a.arms[i];
    }
    if (n1 > 0 && n1 < n) return a;
  }
  throw DesignError("assign_simple: could not draw a two-arm assignment in 1000 attempts");
}

inline Assignment assign_stratified(const std::vector<int>& strata,
                                    const std::map<int, double>& pi1_by_stratum, double pi1_default,
                                    RngStream& rng) {
  const int n = static_cast<int>(strata.size());
  if (n < 2) throw DesignError("assign_stratified: n must be >= 2");
  std::map<int, int> stratum_n;
  for (int d : strata) ++stratum_n[d];
  Assignment a;
  a.arms.resize(n);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::map<int, std::pair<int, int>> counts;  // stratum -> (n0, n1)
    for (int i = 0; i < n; ++i) {
      const auto it = pi1_by_stratum.find(strata[i]);
      const double p = it == pi1_by_stratum.end() ? pi1_default : it->second;
      a.arms[i] = rng.bernoulli(p) ? 1 : 0;
      auto& c = counts[strata[i]];
      (a.arms[i] == 1 ? c.second : c.first) += 1;
    }
    bool ok = true;
    for (const auto& [d, c] : counts) {
      if (c.first == 0 || c.second == 0) {
        ok = false;
        break;
      }
    }
    if (ok) return a;
  }
  throw DesignError("assign_stratified: some stratum kept losing an arm over 1000 attempts");
}

// Imbalance statistic I_n = mean(Z | arm 1) - mean(Z | arm 0), its variance
// estimator (n1 n0)^{-1} sum (Z - Zbar)(Z - Zbar)', and the Mahalanobis form.
inline ImbalanceReport imbalance(const std::vector<std::vector<double>>& zrr,
                                 const std::vector<int>& arms) {
  const int n = static_cast<int>(zrr.size());
  if (n == 0 || arms.size() != zrr.size()) throw DesignError("imbalance: bad inputs");
  const int p = static_cast<int>(zrr.front().size());
  int n1 = 0;
  for (int a : arms) n1 += a;
  const int n0 = n - n1;
  if (n1 == 0 || n0 == 0) throw DesignError("imbalance: both arms must be nonempty");

  std::vector<double> mean1(p, 0.0), mean0(p, 0.0), mean(p, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) {
      mean[j] += zrr[i][j];
      (arms[i] == 1 ? mean1[j] : mean0[j]) += zrr[i][j];
    }
  }
  for (int j = 0; j < p; ++j) {
    mean1[j] /= n1;
    mean0[j] /= n0;
    mean[j] /= n;
  }

  ImbalanceReport rep;
  rep.imbalance.resize(p);
  for (int j = 0; j < p; ++j) rep.imbalance[j] = mean1[j] - mean0[j];
  rep.var_hat = SymMatrix(p);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) {
      const double zj = zrr[i][j] - mean[j];
      for (int k = j; k < p; ++k) {
        rep.var_hat.add(j, k, zj * (zrr[i][k] - mean[k]));
      }
    }
  }
  const double scale = 1.0 / (static_cast<double>(n1) * n0);
  SymMatrix scaled(p);
  for (int j = 0; j < p; ++j)
    for (int k = j; k <= p - 1; ++k) scaled.set(j, k, rep.var_hat(j, k) * scale);
  rep.var_hat = scaled;
  try {
    rep.distance = chol_quadform(cholesky(rep.var_hat), rep.imbalance);
  } catch (const FactorizationError&) {
    throw DesignError("imbalance: singular covariance; rerandomization covariates may be collinear");
  }
  return rep;
}

// Stratum-weighted imbalance and variance estimator for stratified
// rerandomization: per-stratum arm-mean differences weighted by stratum
// share, with within-stratum centering and (n_d/n)^2 / (n_{1d} n_{0d})
// scaling so that n Var-hat(I_n) is consistent for Var(sqrt(n) I_n).
inline ImbalanceReport stratified_imbalance(const std::vector<std::vector<double>>& zrr,
                                            const std::vector<int>& strata,
                                            const std::vector<int>& arms) {
  const int n = static_cast<int>(zrr.size());
  if (n == 0 || arms.size() != zrr.size() || strata.size() != zrr.size()) {
    throw DesignError("stratified_imbalance: bad inputs");
  }
  const int p = static_cast<int>(zrr.front().size());

  struct StratumAcc {
    int n = 0, n1 = 0;
    std::vector<double> sum1, sum0, sum;
  };
  std::map<int, StratumAcc> acc;
  for (int i = 0; i < n; ++i) {
    StratumAcc& s = acc[strata[i]];
    if (s.sum.empty()) {
      s.sum1.assign(p, 0.0);
      s.sum0.assign(p, 0.0);
      s.sum.assign(p, 0.0);
    }
    ++s.n;
    s.n1 += arms[i];
    for (int j = 0; j < p; ++j) {
      s.sum[j] += zrr[i][j];
      (arms[i] == 1 ? s.sum1[j] : s.sum0[j]) += zrr[i][j];
    }
  }
  ImbalanceReport rep;
  rep.imbalance.assign(p, 0.0);
  rep.var_hat = SymMatrix(p);
  for (auto& [d, s] : acc) {
    const int n0 = s.n - s.n1;
    if (s.n1 == 0 || n0 == 0) {
      throw DesignError("stratified_imbalance: stratum " + std::to_string(d) +
                        " is missing an arm");
    }
    const double share = static_cast<double>(s.n) / n;
    for (int j = 0; j < p; ++j) {
      rep.imbalance[j] += share * (s.sum1[j] / s.n1 - s.sum0[j] / n0);
    }
    const double scale = share * share / (static_cast<double>(s.n1) * n0);
    std::vector<double> mean(p);
    for (int j = 0; j < p; ++j) mean[j] = s.sum[j] / s.n;
    for (int i = 0; i < n; ++i) {
      if (strata[i] != d) continue;
      for (int j = 0; j < p; ++j) {
        const double zj = zrr[i][j] - mean[j];
        for (int k = j; k < p; ++k) {
          rep.var_hat.add(j, k, scale * zj * (zrr[i][k] - mean[k]));
        }
      }
    }
  }
  try {
    rep.distance = chol_quadform(cholesky(rep.var_hat), rep.imbalance);
  } catch (const FactorizationError&) {
    throw DesignError(
        "stratified_imbalance: singular covariance; rerandomization covariates may be collinear");
  }
  return rep;
}

// Repeated simple randomization until the Mahalanobis balance criterion
// distance < c accepts.
inline Assignment rerandomize(const std::vector<std::vector<double>>& zrr, double pi1, double c,
                              RngStream& rng, int max_tries = 100000) {
  if (!(c > 0.0)) throw DesignError("rerandomize: threshold c must be positive");
  const int n = static_cast<int>(zrr.size());
  for (int tries = 1; tries <= max_tries; ++tries) {
    Assignment a = assign_simple(n, pi1, rng);
    const ImbalanceReport rep = imbalance(zrr, a.arms);
    if (rep.distance < c) {
      a.n_tries = tries;
      a.accepted_distance = rep.distance;
      return a;
    }
  }
  throw DesignError("rerandomize: no acceptable assignment in " + std::to_string(max_tries) +
                    " tries (empirical acceptance rate < " + std::to_string(1.0 / max_tries) +
                    "); threshold c may be too small");
}

inline Assignment stratified_rerandomize(const std::vector<std::vector<double>>& zrr,
                                         const std::vector<int>& strata,
                                         const std::map<int, double>& pi1_by_stratum,
                                         double pi1_default, double c, RngStream& rng,
                                         int max_tries = 100000) {
  if (!(c > 0.0)) throw DesignError("stratified_rerandomize: threshold c must be positive");
  for (int tries = 1; tries <= max_tries; ++tries) {
    Assignment a = assign_stratified(strata, pi1_by_stratum, pi1_default, rng);
    const ImbalanceReport rep = stratified_imbalance(zrr, strata, a.arms);
    if (rep.distance < c) {
      a.n_tries = tries;
      a.accepted_distance = rep.distance;
      return a;
    }
  }
  throw DesignError("stratified_rerandomize: no acceptable assignment in " +
                    std::to_string(max_tries) + " tries; threshold c may be too small");
}

}  // namespace survrr
