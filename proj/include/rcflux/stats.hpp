#pragma once

#include <cmath>
#include <cstddef>
#include <span>

namespace rcflux {

/// Sample moments of a finite sequence, with Monte Carlo standard errors.
struct SampleMoments {
  std::size_t n = 0;
  double mean = 0.0;
  double variance = 0.0;     // unbiased (n - 1)
  double se_mean = 0.0;
  double se_variance = 0.0;  // from the fourth central moment
};

inline SampleMoments sample_moments(std::span<const double> xs) {
  SampleMoments m;
  m.n = xs.size();
  if (m.n == 0) return m;
  double sum = 0.0;
  for (double x : xs) sum += x;
  m.mean = sum / static_cast<double>(m.n);
  if (m.n < 2) return m;
  double m2 = 0.0, m4 = 0.0;
  for (double x : xs) {
    const double d = x - m.mean;
    m2 += d * d;
    m4 += d * d * d * d;
  }
  const double n = static_cast<double>(m.n);
  m.variance = m2 / (n - 1.0);
  m.se_mean = std::sqrt(m.variance / n);
  const double mu2 = m2 / n;
  const double mu4 = m4 / n;
  m.se_variance = std::sqrt(std::max(mu4 - mu2 * mu2, 0.0) / n);
  return m;
}

/// Unbiased sample covariance and its standard error.
struct SampleCovariance {
  double value = 0.0;
  double se = 0.0;
};

inline SampleCovariance sample_covariance(std::span<const double> xs, std::span<const double> ys) {
  SampleCovariance c;
  const std::size_t n = xs.size();
  if (n < 2 || ys.size() != n) return c;
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double s = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double p = (xs[i] - mx) * (ys[i] - my);
    s += p;
    s2 += p * p;
  }
  const double nn = static_cast<double>(n);
  c.value = s / (nn - 1.0);
  const double mp = s / nn;
  c.se = std::sqrt(std::max(s2 / nn - mp * mp, 0.0) / nn);
  return c;
}

}  // namespace rcflux
