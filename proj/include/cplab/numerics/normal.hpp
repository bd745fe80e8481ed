#pragma once

#include <cmath>
#include <numbers>

#include "cplab/errors.hpp"
#include "cplab/numerics/roots.hpp"

namespace cplab {

inline double normal_pdf(double x) noexcept {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

/// Standard normal distribution function, via erfc to keep full relative
/// accuracy in the lower tail.
inline double normal_cdf(double x) noexcept { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// Upper tail 1 - Φ(x).
inline double normal_sf(double x) noexcept { return 0.5 * std::erfc(x / std::numbers::sqrt2); }

/// Inverse of normal_cdf, solved by root-finding on normal_cdf itself.
inline double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("normal_quantile: p must lie in (0, 1)");
  if (p == 0.5) return 0.0;
  if (p > 0.5) return -normal_quantile(1.0 - p);
  // p < 0.5: root is negative; Φ(-39) underflows below every representable p.
  const double scale = p;
  return find_root([&](double x) { return (normal_cdf(x) - p) / scale; }, -39.0, 0.0, 1e-15);
}

}  // namespace cplab
