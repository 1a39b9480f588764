#pragma once

#include <cmath>
#include <limits>

#include "survrr/errors.hpp"

namespace survrr {

namespace detail {

// Regularized lower incomplete gamma P(a, x): series for x < a + 1,
// Lentz continued fraction for the upper tail otherwise.
inline double gamma_p(double a, double x) {
  if (x < 0.0 || a <= 0.0) throw DomainError("gamma_p: a > 0 and x >= 0 required");
  if (x == 0.0) return 0.0;
  constexpr int kMaxIter = 1000;
  constexpr double kEps = 1e-16;
  const double lg = std::lgamma(a);
  if (x < a + 1.0) {
    double ap = a;
    double sum = 1.0 / a;
    double del = sum;
    for (int n = 0; n < kMaxIter; ++n) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::fabs(del) < std::fabs(sum) * kEps) break;
    }
    return sum * std::exp(-x + a * std::log(x) - lg);
  }
  // continued fraction for Q(a, x)
  constexpr double kTiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= kMaxIter; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < kEps) break;
  }
  const double q = std::exp(-x + a * std::log(x) - lg) * h;
  return 1.0 - q;
}

}  // namespace detail

// Chi-squared CDF with `df` degrees of freedom.
inline double chisq_cdf(double x, int df) {
  if (df < 1) throw DomainError("chisq_cdf: df must be >= 1");
  if (x < 0.0) throw DomainError("chisq_cdf: x must be nonnegative");
  if (!std::isfinite(x)) return 1.0;
  return detail::gamma_p(0.5 * df, 0.5 * x);
}

// Chi-squared quantile by bisection on the CDF.
inline double chisq_quantile(double p, int df) {
  if (df < 1) throw DomainError("chisq_quantile: df must be >= 1");
  if (p <= 0.0 || p >= 1.0) throw DomainError("chisq_quantile: p must be in (0,1)");
  double lo = 0.0, hi = 1.0;
  while (chisq_cdf(hi, df) < p) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (chisq_cdf(mid, df) < p) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo < 1e-13 * (1.0 + hi)) break;
  }
  return 0.5 * (lo + hi);
}

// Variance multiplier kappa(c) = P(chi^2_{p+2} <= c) / P(chi^2_p <= c),
// the per-direction second moment of a standard normal vector confined to
// the ball L'L < c. Strictly below 1 for finite c.
inline double kappa(double c, int p) {
  if (p < 1) throw DomainError("kappa: p must be >= 1");
  if (c <= 0.0) throw DomainError("kappa: c must be positive");
  const double denom = chisq_cdf(c, p);
  if (denom <= 0.0) throw DomainError("kappa: acceptance probability underflowed");
  return chisq_cdf(c, p + 2) / denom;
}

inline double normal_cdf(double x) {
  return 0.5 * std::erfc(-x / 1.4142135623730950488016887242097);
}

inline double normal_pdf(double x) {
  return std::exp(-0.5 * x * x) / 2.5066282746310005024157652848110;
}

// Standard normal quantile: Acklam's rational approximation refined with one
// Newton step against erfc, accurate to close to machine precision.
inline double normal_quantile(double p) {
  if (p <= 0.0 || p >= 1.0) throw DomainError("normal_quantile: p must be in (0,1)");
  static const double a[6] = {-3.969683028665376e+01, 2.209460984245205e+02,
                              -2.759285104469687e+02, 1.383577518672690e+02,
                              -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[5] = {-5.447609879822406e+01, 1.615858368580409e+02,
                              -1.556989798598866e+02, 6.680131188771972e+01,
                              -1.328068155288572e+01};
  static const double c[6] = {-7.784894002430293e-03, -3.223964580411365e-01,
                              -2.400758277161838e+00, -2.549732539343734e+00,
                              4.374664141464968e+00,  2.938163982698783e+00};
  static const double d[4] = {7.784695709041462e-03, 3.224671290700398e-01,
                              2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425;
  double x;
  if (p < plow) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - plow) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  const double err = normal_cdf(x) - p;
  x -= err / normal_pdf(x);
  return x;
}

inline double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double logit(double u) {
  if (u <= 0.0 || u >= 1.0) throw DomainError("logit: argument must be in (0,1)");
  return std::log(u) - std::log1p(-u);
}

}  // namespace survrr
