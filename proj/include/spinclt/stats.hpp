#pragma once

// Small shared statistics helpers: moments of samples, normal/KS utilities,
// least-squares fits, bootstrap standard errors.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <vector>

#include "spinclt/rng.hpp"

namespace spinclt {

inline double mean(const std::vector<double>& xs) {
  if (xs.empty()) throw std::invalid_argument("mean: empty sample");
  double s = 0.0;
  for (double x : xs) s += x;
  return s / static_cast<double>(xs.size());
}

// Unbiased sample variance (divides by n-1).
inline double sample_variance(const std::vector<double>& xs) {
  const std::size_t n = xs.size();
  if (n < 2) throw std::invalid_argument("sample_variance: need n >= 2");
  const double m = mean(xs);
  double s = 0.0;
  for (double x : xs) s += (x - m) * (x - m);
  return s / static_cast<double>(n - 1);
}

// Unbiased sample covariance of paired samples.
inline double sample_covariance(const std::vector<double>& xs,
                                const std::vector<double>& ys) {
  if (xs.size() != ys.size() || xs.size() < 2)
    throw std::invalid_argument("sample_covariance: need paired n >= 2");
  const double mx = mean(xs), my = mean(ys);
  double s = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (xs[i] - mx) * (ys[i] - my);
  return s / static_cast<double>(xs.size() - 1);
}

// Standard error of a proportion estimate p_hat from R Bernoulli trials.
inline double binomial_se(double p_hat, std::size_t trials) {
  if (trials == 0) throw std::invalid_argument("binomial_se: zero trials");
  return std::sqrt(std::max(p_hat * (1.0 - p_hat), 0.0) /
                   static_cast<double>(trials));
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Sample skewness g1 and excess kurtosis g2.
inline double skewness(const std::vector<double>& xs) {
  const double m = mean(xs);
  double m2 = 0.0, m3 = 0.0;
  for (double x : xs) {
    const double d = x - m;
    m2 += d * d;
    m3 += d * d * d;
  }
  const double n = static_cast<double>(xs.size());
  m2 /= n;
  m3 /= n;
  if (m2 <= 0.0) return 0.0;
  return m3 / std::pow(m2, 1.5);
}

inline double excess_kurtosis(const std::vector<double>& xs) {
  const double m = mean(xs);
  double m2 = 0.0, m4 = 0.0;
  for (double x : xs) {
    const double d = x - m;
    m2 += d * d;
    m4 += d * d * d * d;
  }
  const double n = static_cast<double>(xs.size());
  m2 /= n;
  m4 /= n;
  if (m2 <= 0.0) return 0.0;
  return m4 / (m2 * m2) - 3.0;
}

// Kolmogorov-Smirnov distance between the sample and the standard normal.
inline double ks_statistic_standard_normal(std::vector<double> xs) {
  if (xs.empty()) throw std::invalid_argument("ks_statistic: empty sample");
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = normal_cdf(xs[i]);
    const double lo = static_cast<double>(i) / n;
    const double hi = static_cast<double>(i + 1) / n;
    d = std::max(d, std::max(f - lo, hi - f));
  }
  return d;
}

// Asymptotic Kolmogorov tail Q(lambda) = 2 sum_{j>=1} (-1)^{j-1} e^{-2 j^2 lambda^2}.
// Valid for fully specified null distributions only; reported as reference.
inline double kolmogorov_asymptotic_p(double d, std::size_t n) {
  const double sn = std::sqrt(static_cast<double>(n));
  const double lambda = (sn + 0.12 + 0.11 / sn) * d;
  double p = 0.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = 2.0 * ((j % 2 == 1) ? 1.0 : -1.0) *
                        std::exp(-2.0 * j * j * lambda * lambda);
    p += term;
    if (std::abs(term) < 1e-12) break;
  }
  return std::min(1.0, std::max(0.0, p));
}

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};

// Ordinary least squares y = a + b x with (optionally weighted) R^2.
inline LineFit linear_fit(const std::vector<double>& x,
                          const std::vector<double>& y,
                          const std::vector<double>& w = {}) {
  if (x.size() != y.size() || x.size() < 2)
    throw std::invalid_argument("linear_fit: need paired n >= 2");
  std::vector<double> weights = w.empty() ? std::vector<double>(x.size(), 1.0) : w;
  if (weights.size() != x.size())
    throw std::invalid_argument("linear_fit: weight length mismatch");
  double sw = 0, swx = 0, swy = 0, swxx = 0, swxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sw += weights[i];
    swx += weights[i] * x[i];
    swy += weights[i] * y[i];
    swxx += weights[i] * x[i] * x[i];
    swxy += weights[i] * x[i] * y[i];
  }
  const double det = sw * swxx - swx * swx;
  if (std::abs(det) < 1e-300) throw std::invalid_argument("linear_fit: degenerate x");
  LineFit fit;
  fit.slope = (sw * swxy - swx * swy) / det;
  fit.intercept = (swxx * swy - swx * swxy) / det;
  const double ybar = swy / sw;
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double pred = fit.intercept + fit.slope * x[i];
    ss_res += weights[i] * (y[i] - pred) * (y[i] - pred);
    ss_tot += weights[i] * (y[i] - ybar) * (y[i] - ybar);
  }
  fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  return fit;
}

// Least squares through the origin, y = b x, with uncentered R^2
// (the conventional coefficient for a no-intercept model).
inline LineFit origin_fit(const std::vector<double>& x,
                          const std::vector<double>& y) {
  if (x.size() != y.size() || x.empty())
    throw std::invalid_argument("origin_fit: need paired n >= 1");
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
    syy += y[i] * y[i];
  }
  if (sxx <= 0.0) throw std::invalid_argument("origin_fit: degenerate x");
  LineFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = 0.0;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - fit.slope * x[i];
    ss_res += r * r;
  }
  fit.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  return fit;
}

// Bootstrap standard error of statistic(sample) with B resamples.
inline double bootstrap_se(const std::vector<double>& sample,
                           const std::function<double(const std::vector<double>&)>& statistic,
                           std::size_t resamples, RandomStream& rng) {
  if (sample.empty()) throw std::invalid_argument("bootstrap_se: empty sample");
  std::vector<double> stats;
  stats.reserve(resamples);
  std::vector<double> draw(sample.size());
  for (std::size_t b = 0; b < resamples; ++b) {
    for (std::size_t i = 0; i < sample.size(); ++i)
      draw[i] = sample[rng.uniform_below(sample.size())];
    stats.push_back(statistic(draw));
  }
  return stats.size() >= 2 ? std::sqrt(sample_variance(stats)) : 0.0;
}

// Upper quantile of the chi-square distribution via the Wilson-Hilferty
// normal approximation (adequate for the large df used in goodness-of-fit).
inline double chi_square_quantile(double df, double prob) {
  // prob is the lower-tail probability (e.g. 0.999 for level 1e-3 tests).
  // Inverse normal via Acklam-style rational approximation on the tail.
  auto inv_normal = [](double p) {
    // Beasley-Springer-Moro approximation.
    static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                               -2.759285104469687e+02, 1.383577518672690e+02,
                               -3.066479806614716e+01, 2.506628277459239e+00};
    static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                               -1.556989798598866e+02, 6.680131188771972e+01,
                               -1.328068155288572e+01};
    static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                               -2.400758277161838e+00, -2.549732539343734e+00,
                               4.374664141464968e+00,  2.938163982698783e+00};
    static const double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                               2.445134137142996e+00, 3.754408661907416e+00};
    const double plow = 0.02425, phigh = 1 - plow;
    double q, r;
    if (p < plow) {
      q = std::sqrt(-2 * std::log(p));
      return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
             ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    }
    if (p > phigh) {
      q = std::sqrt(-2 * std::log(1 - p));
      return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
             ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1);
    }
    q = p - 0.5;
    r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1);
  };
  const double z = inv_normal(prob);
  const double t = 1.0 - 2.0 / (9.0 * df) + z * std::sqrt(2.0 / (9.0 * df));
  return df * t * t * t;
}

}  // namespace spinclt
