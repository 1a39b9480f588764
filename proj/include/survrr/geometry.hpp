#pragma once

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "survrr/datagen.hpp"
#include "survrr/designs.hpp"
#include "survrr/errors.hpp"
#include "survrr/inference.hpp"
#include "survrr/linalg.hpp"
#include "survrr/sampling.hpp"
#include "survrr/survcurve.hpp"

namespace survrr {

// Orthogonal decomposition of the limiting survival process: deterministic
// projection direction onto the rerandomization-covariate subspace plus an
// independent Gaussian residual, with path ensembles for both the constrained
// and unconstrained draws of the projection coefficient vector L.
struct GeometryPaths {
  TimeGrid grid;
  std::vector<double> v;                       // pointwise variance V(t)
  std::vector<double> rho;                     // variance reduction factor
  std::vector<std::vector<double>> u;          // unit direction per t (p_rr)
  std::vector<std::vector<double>> alpha;      // SigmaB^{-1/2} SigmaBvec(t)
  double c = 0.0;
  double kappa_c = 1.0;
  std::vector<std::vector<double>> l_unconstrained;  // n_paths x p_rr
  std::vector<std::vector<double>> l_constrained;
  PathEnsemble projection_unconstrained, projection_constrained;
  PathEnsemble residual_unconstrained, residual_constrained;
  PathEnsemble total_unconstrained, total_constrained;
};

namespace detail {

inline PathEnsemble projection_paths(const std::vector<std::vector<double>>& alpha,
                                     const std::vector<std::vector<double>>& ls,
                                     const std::vector<double>& grid) {
  PathEnsemble e;
  e.grid = grid;
  e.n_paths = static_cast<int>(ls.size());
  e.values.resize(ls.size() * grid.size());
  for (std::size_t j = 0; j < ls.size(); ++j) {
    for (std::size_t t = 0; t < grid.size(); ++t) {
      double s = 0.0;
      for (std::size_t k = 0; k < ls[j].size(); ++k) s += alpha[t][k] * ls[j][k];
      e.values[j * grid.size() + t] = s;
    }
  }
  return e;
}

inline PathEnsemble add_paths(const PathEnsemble& a, const PathEnsemble& b) {
  PathEnsemble e = a;
  for (std::size_t i = 0; i < e.values.size(); ++i) e.values[i] += b.values[i];
  return e;
}

}  // namespace detail

// Empirical covariance operators of the arm-a Kaplan-Meier influence process
// from a super-population sample under simple randomization, decomposed into
// the rerandomization projection and its orthogonal residual, with simulated
// trajectories of every component.
inline GeometryPaths geometry_decomposition(const GeneratedSample& pop, int arm,
                                            const TimeGrid& grid, double c, int n_paths,
                                            RngStream& rng) {
  const int n = pop.n();
  if (n < 10000) throw DomainError("geometry_decomposition: super-population too small");
  const int p = 2;

  RngStream rng_assign = rng.substream(0);
  RngStream rng_l = rng.substream(1);
  RngStream rng_resid_u = rng.substream(2);
  RngStream rng_resid_c = rng.substream(3);

  const Assignment assignment = assign_simple(n, 0.5, rng_assign);
  const Dataset data = observed_dataset(pop, assignment.arms, grid.points.back() + 1.0);

  const SurvivalCurve curve = km_estimate(data, arm, grid);
  const InfluenceMatrix inf = km_influence(data, arm, grid, curve, 0.5);

  DesignMeta meta;
  meta.design = DesignType::kRerand;
  meta.pi1 = 0.5;
  meta.threshold_c = c;
  meta.rerand_cols = {0, 1};
  const CovarianceReport rep = covariance_report(inf, data, meta);

  GeometryPaths geo;
  geo.grid = grid;
  geo.c = c;
  geo.kappa_c = kappa(c, p);
  geo.v = rep.sigma2_uncorrected;
  geo.rho = rep.rho_hat;

  const SymMatrix root_inv = sym_inv_sqrt(rep.sigma_b);
  const int g = grid.size();
  geo.alpha.assign(g, std::vector<double>(p, 0.0));
  geo.u.assign(g, std::vector<double>(p, 0.0));
  double max_norm = 0.0;
  for (int t = 0; t < g; ++t) {
    for (int j = 0; j < p; ++j) {
      double s = 0.0;
      for (int k = 0; k < p; ++k) s += root_inv(j, k) * rep.sigma_b_vec[t][k];
      geo.alpha[t][j] = s;
    }
    double norm = 0.0;
    for (int j = 0; j < p; ++j) norm += geo.alpha[t][j] * geo.alpha[t][j];
    norm = std::sqrt(norm);
    max_norm = std::max(max_norm, norm);
    if (norm > 0.0) {
      for (int j = 0; j < p; ++j) geo.u[t][j] = geo.alpha[t][j] / norm;
    }
  }
  if (max_norm == 0.0) {
    throw InferenceError("geometry_decomposition: projection is zero everywhere; nothing to clamp");
  }

  geo.l_unconstrained.resize(n_paths);
  geo.l_constrained.resize(n_paths);
  for (int j = 0; j < n_paths; ++j) {
    geo.l_unconstrained[j].resize(p);
    for (int k = 0; k < p; ++k) geo.l_unconstrained[j][k] = rng_l.normal();
    geo.l_constrained[j] = constrained_sphere_normal(rng_l, p, c);
  }

  geo.projection_unconstrained = detail::projection_paths(geo.alpha, geo.l_unconstrained, grid.points);
  geo.projection_constrained = detail::projection_paths(geo.alpha, geo.l_constrained, grid.points);

  // residual covariance Sigma(s,t) - alpha(s)'alpha(t)
  SymMatrix resid = if_covariance_matrix(inf, full_grid_indices(inf));
  for (int a = 0; a < g; ++a) {
    for (int b = a; b < g; ++b) {
      double q = 0.0;
      for (int k = 0; k < p; ++k) q += geo.alpha[a][k] * geo.alpha[b][k];
      resid.set(a, b, resid(a, b) - q);
    }
  }
  geo.residual_unconstrained = sample_gp_paths(resid, grid.points, n_paths, rng_resid_u);
  geo.residual_constrained = sample_gp_paths(resid, grid.points, n_paths, rng_resid_c);
  geo.total_unconstrained = detail::add_paths(geo.projection_unconstrained, geo.residual_unconstrained);
  geo.total_constrained = detail::add_paths(geo.projection_constrained, geo.residual_constrained);
  return geo;
}

// Long-format export of the three illustration panels. Trajectories share one
// set of unconstrained L draws partitioned by the acceptance ball: panel A is
// the L scatter (t = first coordinate, value = second), panel B the projection
// paths, panel C the total paths.
inline void write_geometry_csv(const GeometryPaths& geo, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write file: " + path);
  out << "panel,path_id,t,value,constrained\n";
  char buf[64];
  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return std::string(buf);
  };
  const int n_paths = static_cast<int>(geo.l_unconstrained.size());
  auto inside = [&](const std::vector<double>& l) {
    double ss = 0.0;
    for (double x : l) ss += x * x;
    return ss < geo.c;
  };
  for (int j = 0; j < n_paths; ++j) {
    const auto& l = geo.l_unconstrained[j];
    out << "A," << j << ',' << fmt(l[0]) << ',' << fmt(l[1]) << ',' << (inside(l) ? 1 : 0)
        << '\n';
  }
  const int g = static_cast<int>(geo.grid.points.size());
  for (int j = 0; j < n_paths; ++j) {
    const int flag = inside(geo.l_unconstrained[j]) ? 1 : 0;
    for (int t = 0; t < g; ++t) {
      out << "B," << j << ',' << fmt(geo.grid.points[t]) << ','
          << fmt(geo.projection_unconstrained.at(j, t)) << ',' << flag << '\n';
    }
  }
  for (int j = 0; j < n_paths; ++j) {
    const int flag = inside(geo.l_unconstrained[j]) ? 1 : 0;
    for (int t = 0; t < g; ++t) {
      out << "C," << j << ',' << fmt(geo.grid.points[t]) << ','
          << fmt(geo.total_unconstrained.at(j, t)) << ',' << flag << '\n';
    }
  }
}

}  // namespace survrr
