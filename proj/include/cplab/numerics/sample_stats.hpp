#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "cplab/errors.hpp"
#include "cplab/numerics/random.hpp"
#include "cplab/numerics/summation.hpp"

namespace cplab {

struct MeanEstimate {
  double mean = 0.0;
  double se = 0.0;  ///< standard error of the mean
  std::size_t count = 0;
};

inline MeanEstimate mean_and_se(std::span<const double> xs) {
  if (xs.empty()) throw DomainError("mean_and_se: empty sample");
  CompensatedSum s;
  for (double x : xs) s += x;
  const double mean = s.value() / static_cast<double>(xs.size());
  CompensatedSum ss;
  for (double x : xs) ss += (x - mean) * (x - mean);
  const double n = static_cast<double>(xs.size());
  const double var = xs.size() > 1 ? ss.value() / (n - 1.0) : 0.0;
  return {mean, std::sqrt(var / n), xs.size()};
}

/// Binomial proportion with standard error sqrt(p(1-p)/M).
inline MeanEstimate proportion(std::size_t hits, std::size_t trials) {
  if (trials == 0) throw DomainError("proportion: zero trials");
  const double p = static_cast<double>(hits) / static_cast<double>(trials);
  return {p, std::sqrt(p * (1.0 - p) / static_cast<double>(trials)), trials};
}

/// Empirical quantile with linear interpolation between order statistics.
/// `sorted` must be ascending.
inline double quantile_sorted(std::span<const double> sorted, double prob) {
  if (sorted.empty()) throw DomainError("quantile: empty sample");
  if (!(prob >= 0.0 && prob <= 1.0)) throw DomainError("quantile: prob outside [0, 1]");
  const double pos = prob * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double w = pos - static_cast<double>(lo);
  return sorted[lo] + w * (sorted[hi] - sorted[lo]);
}

inline double quantile(std::vector<double> xs, double prob) {
  std::sort(xs.begin(), xs.end());
  return quantile_sorted(xs, prob);
}

/// Bootstrap standard error of the `prob`-quantile.
inline double bootstrap_quantile_se(std::span<const double> xs, double prob, std::size_t resamples,
                                    RandomStream stream) {
  if (xs.size() < 2 || resamples < 2) return 0.0;
  std::vector<double> draw(xs.size());
  std::vector<double> estimates;
  estimates.reserve(resamples);
  const auto n = static_cast<std::uint64_t>(xs.size());
  for (std::size_t b = 0; b < resamples; ++b) {
    RandomStream rs = stream.derive(b);
    for (auto& d : draw) d = xs[static_cast<std::size_t>(rs() % n)];
    const double pos = prob * static_cast<double>(draw.size() - 1);
    const auto k = static_cast<std::size_t>(std::floor(pos));
    std::nth_element(draw.begin(), draw.begin() + static_cast<std::ptrdiff_t>(k), draw.end());
    double value = draw[k];
    if (k + 1 < draw.size()) {
      const double next = *std::min_element(draw.begin() + static_cast<std::ptrdiff_t>(k) + 1, draw.end());
      value += (pos - static_cast<double>(k)) * (next - value);
    }
    estimates.push_back(value);
  }
  return mean_and_se(estimates).se * std::sqrt(static_cast<double>(resamples));
}

/// One-sample Kolmogorov-Smirnov distance between ascending `sorted` and `cdf`.
template <class Cdf>
double ks_distance(std::span<const double> sorted, Cdf&& cdf) {
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double f = cdf(sorted[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

/// Two-sample Kolmogorov-Smirnov distance; inputs need not be sorted.
inline double ks_distance_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

/// Asymptotic Kolmogorov p-value with Stephens' small-sample correction.
inline double kolmogorov_pvalue(double d, double effective_n) {
  const double sn = std::sqrt(effective_n);
  const double lambda = (sn + 0.12 + 0.11 / sn) * d;
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = sign * std::exp(-2.0 * k * k * lambda * lambda);
    sum += term;
    if (std::abs(term) < 1e-16) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

inline double ks_two_sample_pvalue(const std::vector<double>& a, const std::vector<double>& b) {
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  return kolmogorov_pvalue(ks_distance_two_sample(a, b), na * nb / (na + nb));
}

/// Upper-tail chi-square probability.
inline double chi_square_pvalue(double statistic, double dof) {
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared(dof), statistic));
}

}  // namespace cplab
