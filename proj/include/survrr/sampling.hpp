#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "survrr/errors.hpp"
#include "survrr/linalg.hpp"
#include "survrr/rng.hpp"

namespace survrr {

// Simulated realizations of a process on a common time grid.
struct PathEnsemble {
  std::vector<double> grid;
  int n_paths = 0;
  std::vector<double> values;  // n_paths x grid, row-major

  double at(int path, int t) const {
    return values[static_cast<std::size_t>(path) * grid.size() + t];
  }
};

namespace detail {

// Cholesky with one-shot ridge repair for numerically semi-definite
// covariance grids. An all-zero matrix yields a zero factor.
inline CholeskyFactor psd_cholesky(const SymMatrix& cov, bool* repaired = nullptr) {
  if (repaired) *repaired = false;
  const double md = cov.max_diag();
  if (md <= 0.0) {
    CholeskyFactor f;
    f.n = cov.dim();
    f.l.assign(static_cast<std::size_t>(f.n) * f.n, 0.0);
    return f;
  }
  try {
    return cholesky(cov);
  } catch (const FactorizationError&) {
    SymMatrix fixed = cov;
    fixed.add_ridge(1e-10 * md);
    if (repaired) *repaired = true;
    return cholesky(fixed);  // second failure propagates
  }
}

// Type-7 empirical quantile (linear interpolation of order statistics).
inline double quantile_type7(std::vector<double> x, double p) {
  std::sort(x.begin(), x.end());
  const double h = (static_cast<double>(x.size()) - 1.0) * p;
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (h - lo) * (x[hi] - x[lo]);
}

}  // namespace detail

// Draw from N(mean, cov). A zero covariance matrix is treated as degenerate
// and returns the mean.
inline std::vector<double> mvn_sample(RngStream& rng, const std::vector<double>& mean,
                                      const SymMatrix& cov) {
  const int n = cov.dim();
  if (static_cast<int>(mean.size()) != n) {
    throw DomainError("mvn_sample: mean and covariance dimensions differ");
  }
  if (cov.max_diag() <= 0.0) return mean;
  const CholeskyFactor f = cholesky(cov);
  std::vector<double> z(n), x(n);
  for (int i = 0; i < n; ++i) z[i] = rng.normal();
  f.multiply(z.data(), x.data());
  for (int i = 0; i < n; ++i) x[i] += mean[i];
  return x;
}

// Standard p-variate normal conditioned on L'L < c, by rejection. The
// acceptance probability is P(chi^2_p <= c) > 0, so the loop terminates
// with probability one.
inline std::vector<double> constrained_sphere_normal(RngStream& rng, int p, double c) {
  if (p < 1) throw DomainError("constrained_sphere_normal: p must be >= 1");
  if (c <= 0.0) throw DomainError("constrained_sphere_normal: c must be positive");
  std::vector<double> l(p);
  for (;;) {
    double ss = 0.0;
    for (int i = 0; i < p; ++i) {
      l[i] = rng.normal();
      ss += l[i] * l[i];
    }
    if (ss < c) return l;
  }
}

// Mean-zero Gaussian paths with the given covariance on the grid. Each path
// uses its own derived substream, so the ensemble is independent of
// evaluation order.
inline PathEnsemble sample_gp_paths(const SymMatrix& cov_grid, const std::vector<double>& grid,
                                    int n_paths, const RngStream& rng) {
  if (cov_grid.dim() != static_cast<int>(grid.size())) {
    throw DomainError("sample_gp_paths: grid and covariance dimensions differ");
  }
  const CholeskyFactor f = detail::psd_cholesky(cov_grid);
  const int g = cov_grid.dim();
  PathEnsemble e;
  e.grid = grid;
  e.n_paths = n_paths;
  e.values.resize(static_cast<std::size_t>(n_paths) * g);
  std::vector<double> z(g);
  for (int j = 0; j < n_paths; ++j) {
    RngStream r = rng.substream(j);
    for (int i = 0; i < g; ++i) z[i] = r.normal();
    f.multiply(z.data(), &e.values[static_cast<std::size_t>(j) * g]);
  }
  return e;
}

// Empirical (1 - alpha)-quantile of sup_t |G(t)| over simulated mean-zero
// Gaussian paths with the given covariance.
inline double gp_sup_quantile(const SymMatrix& cov_grid, int n_paths, double alpha,
                              const RngStream& rng) {
  if (n_paths < 100) {
    throw ConfigError("gp_sup_quantile: n_paths < 100 makes the quantile unreliable");
  }
  if (alpha <= 0.0 || alpha >= 1.0) throw DomainError("gp_sup_quantile: alpha must be in (0,1)");
  const CholeskyFactor f = detail::psd_cholesky(cov_grid);
  const int g = cov_grid.dim();
  std::vector<double> sups(n_paths);
  std::vector<double> z(g), x(g);
  for (int j = 0; j < n_paths; ++j) {
    RngStream r = rng.substream(j);
    for (int i = 0; i < g; ++i) z[i] = r.normal();
    f.multiply(z.data(), x.data());
    double s = 0.0;
    for (int i = 0; i < g; ++i) s = std::max(s, std::fabs(x[i]));
    sups[j] = s;
  }
  return detail::quantile_type7(std::move(sups), 1.0 - alpha);
}

}  // namespace survrr
