#pragma once

// Scalar special functions used by the beta log-density and the residual
// diagnostics. The checked entry points throw DomainError for z <= 0 or
// non-finite z. Accuracy is stated as |error| <= tol * max(1, |f(z)|) on
// [1e-6, 1e6]; arguments below 1e-6 are accepted without an accuracy claim.
//
// All functions are pure and thread-safe (no use of the global signgam that
// std::lgamma writes on glibc).

#include <cmath>

namespace eivbeta {

double log_gamma(double z);
double digamma(double z);
double trigamma(double z);

// Standard normal distribution function and its inverse (AS 241).
double normal_cdf(double x);
double normal_quantile(double p);

namespace detail {

// Unchecked kernels for hot loops; callers guarantee z > 0.
// Arguments are shifted up to z >= 10 by the recurrences, then the
// asymptotic series is summed.

inline double log_gamma_unchecked(double z) {
  double prod = 1.0;
  while (z < 10.0) {
    prod *= z;
    z += 1.0;
  }
  const double inv = 1.0 / z;
  const double inv2 = inv * inv;
  const double series =
      inv * (1.0 / 12.0 +
             inv2 * (-1.0 / 360.0 +
                     inv2 * (1.0 / 1260.0 +
                             inv2 * (-1.0 / 1680.0 +
                                     inv2 * (1.0 / 1188.0 +
                                             inv2 * (-691.0 / 360360.0 + inv2 * (1.0 / 156.0)))))));
  constexpr double half_log_two_pi = 0.91893853320467274178;
  return (z - 0.5) * std::log(z) - z + half_log_two_pi + series - std::log(prod);
}

inline double digamma_unchecked(double z) {
  const double z0 = z;
  int shifts = 0;
  while (z < 10.0) {
    z += 1.0;
    ++shifts;
  }
  const double inv = 1.0 / z;
  const double inv2 = inv * inv;
  double result =
      std::log(z) - 0.5 * inv -
      inv2 * (1.0 / 12.0 -
              inv2 * (1.0 / 120.0 -
                      inv2 * (1.0 / 252.0 -
                              inv2 * (1.0 / 240.0 -
                                      inv2 * (1.0 / 132.0 -
                                              inv2 * (691.0 / 32760.0 - inv2 * (1.0 / 12.0)))))));
  // smallest terms first; 1/z0 is subtracted last to keep the large pole term exact
  for (int i = shifts - 1; i >= 1; --i) result -= 1.0 / (z0 + i);
  if (shifts > 0) result -= 1.0 / z0;
  return result;
}

inline double trigamma_unchecked(double z) {
  const double z0 = z;
  int shifts = 0;
  while (z < 10.0) {
    z += 1.0;
    ++shifts;
  }
  const double inv = 1.0 / z;
  const double inv2 = inv * inv;
  double result =
      inv + 0.5 * inv2 +
      inv * inv2 *
          (1.0 / 6.0 -
           inv2 * (1.0 / 30.0 -
                   inv2 * (1.0 / 42.0 -
                           inv2 * (1.0 / 30.0 -
                                   inv2 * (5.0 / 66.0 -
                                           inv2 * (691.0 / 2730.0 - inv2 * (7.0 / 6.0)))))));
  for (int i = shifts - 1; i >= 1; --i) result += 1.0 / ((z0 + i) * (z0 + i));
  if (shifts > 0) result += 1.0 / (z0 * z0);
  return result;
}

}  // namespace detail
}  // namespace eivbeta
