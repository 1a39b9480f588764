#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "survrr/errors.hpp"

namespace survrr {

// Dense symmetric matrix with full row-major storage. Small dimensions only
// (covariance blocks and time-grid covariances); no general linear algebra.
class SymMatrix {
 public:
  SymMatrix() : n_(0) {}
  explicit SymMatrix(int n) : n_(n), a_(static_cast<std::size_t>(n) * n, 0.0) {}

  int dim() const { return n_; }

  double operator()(int i, int j) const { return a_[idx(i, j)]; }

  void set(int i, int j, double v) {
    a_[idx(i, j)] = v;
    a_[idx(j, i)] = v;
  }

  void add(int i, int j, double v) {
    a_[idx(i, j)] += v;
    if (i != j) a_[idx(j, i)] += v;
  }

  double max_diag() const {
    double m = 0.0;
    for (int i = 0; i < n_; ++i) m = std::max(m, a_[idx(i, i)]);
    return m;
  }

  void add_ridge(double eps) {
    for (int i = 0; i < n_; ++i) a_[idx(i, i)] += eps;
  }

 private:
  std::size_t idx(int i, int j) const {
    return static_cast<std::size_t>(i) * n_ + j;
  }
  int n_;
  std::vector<double> a_;
};

// Lower-triangular Cholesky factor, row-major full storage with zeros above
// the diagonal.
struct CholeskyFactor {
  int n = 0;
  std::vector<double> l;  // n x n, row-major

  double at(int i, int j) const { return l[static_cast<std::size_t>(i) * n + j]; }

  // x = L z for z of length n.
  void multiply(const double* z, double* x) const {
    for (int i = 0; i < n; ++i) {
      double s = 0.0;
      const double* row = &l[static_cast<std::size_t>(i) * n];
      for (int j = 0; j <= i; ++j) s += row[j] * z[j];
      x[i] = s;
    }
  }
};

// Cholesky factorization of a symmetric positive definite matrix. A pivot at
// or below 1e-12 times the largest diagonal entry fails the factorization.
inline CholeskyFactor cholesky(const SymMatrix& m) {
  const int n = m.dim();
  CholeskyFactor f;
  f.n = n;
  f.l.assign(static_cast<std::size_t>(n) * n, 0.0);
  const double tol = 1e-12 * m.max_diag();
  for (int j = 0; j < n; ++j) {
    double d = m(j, j);
    for (int k = 0; k < j; ++k) d -= f.at(j, k) * f.at(j, k);
    if (!(d > tol)) {
      throw FactorizationError("cholesky: matrix is not positive definite (pivot " +
                               std::to_string(d) + " at index " + std::to_string(j) + ")");
    }
    const double lj = std::sqrt(d);
    f.l[static_cast<std::size_t>(j) * n + j] = lj;
    for (int i = j + 1; i < n; ++i) {
      double s = m(i, j);
      for (int k = 0; k < j; ++k) s -= f.at(i, k) * f.at(j, k);
      f.l[static_cast<std::size_t>(i) * n + j] = s / lj;
    }
  }
  return f;
}

// Solve M x = b given the Cholesky factor of M.
inline std::vector<double> chol_solve(const CholeskyFactor& f, const std::vector<double>& b) {
  const int n = f.n;
  std::vector<double> y(b);
  for (int i = 0; i < n; ++i) {
    double s = y[i];
    for (int j = 0; j < i; ++j) s -= f.at(i, j) * y[j];
    y[i] = s / f.at(i, i);
  }
  for (int i = n - 1; i >= 0; --i) {
    double s = y[i];
    for (int j = i + 1; j < n; ++j) s -= f.at(j, i) * y[j];
    y[i] = s / f.at(i, i);
  }
  return y;
}

// Quadratic form b' M^{-1} b via a Cholesky solve.
inline double chol_quadform(const CholeskyFactor& f, const std::vector<double>& b) {
  const int n = f.n;
  std::vector<double> y(b);
  double q = 0.0;
  for (int i = 0; i < n; ++i) {
    double s = y[i];
    for (int j = 0; j < i; ++j) s -= f.at(i, j) * y[j];
    y[i] = s / f.at(i, i);
    q += y[i] * y[i];
  }
  return q;
}

// Eigendecomposition of a small symmetric matrix by cyclic Jacobi sweeps.
// Returns eigenvalues and a column-major eigenvector matrix V (M = V D V').
struct SymEigen {
  std::vector<double> values;
  std::vector<double> vectors;  // n x n, vectors[i + n*k] = component i of eigenvector k
};

inline SymEigen sym_eigen(const SymMatrix& m) {
  const int n = m.dim();
  std::vector<double> a(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a[i + static_cast<std::size_t>(n) * j] = m(i, j);
  std::vector<double> v(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) v[i + static_cast<std::size_t>(n) * i] = 1.0;
  auto at = [&](std::vector<double>& w, int i, int j) -> double& {
    return w[i + static_cast<std::size_t>(n) * j];
  };
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += a[p + static_cast<std::size_t>(n) * q] *
                                              a[p + static_cast<std::size_t>(n) * q];
    if (off < 1e-28) break;
    for (int p = 0; p < n; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = at(a, p, q);
        if (std::fabs(apq) < 1e-300) continue;
        const double theta = (at(a, q, q) - at(a, p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = at(a, k, p), akq = at(a, k, q);
          at(a, k, p) = c * akp - s * akq;
          at(a, k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = at(a, p, k), aqk = at(a, q, k);
          at(a, p, k) = c * apk - s * aqk;
          at(a, q, k) = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          const double vkp = at(v, k, p), vkq = at(v, k, q);
          at(v, k, p) = c * vkp - s * vkq;
          at(v, k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  SymEigen e;
  e.values.resize(n);
  for (int i = 0; i < n; ++i) e.values[i] = a[i + static_cast<std::size_t>(n) * i];
  e.vectors = std::move(v);
  return e;
}

// M^{-1/2} for a symmetric positive definite matrix.
inline SymMatrix sym_inv_sqrt(const SymMatrix& m) {
  const int n = m.dim();
  const SymEigen e = sym_eigen(m);
  const double tol = 1e-12 * m.max_diag();
  SymMatrix r(n);
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      double s = 0.0;
      for (int k = 0; k < n; ++k) {
        if (!(e.values[k] > tol)) {
          throw FactorizationError("sym_inv_sqrt: matrix is not positive definite");
        }
        s += e.vectors[i + static_cast<std::size_t>(n) * k] *
             e.vectors[j + static_cast<std::size_t>(n) * k] / std::sqrt(e.values[k]);
      }
      r.set(i, j, s);
    }
  }
  return r;
}

}  // namespace survrr
