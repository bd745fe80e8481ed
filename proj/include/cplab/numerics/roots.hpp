#pragma once

#include <cmath>
#include <algorithm>
#include <cstdint>
#include <limits>
#include <string>

#include <boost/math/tools/toms748_solve.hpp>

#include "cplab/errors.hpp"

namespace cplab {

/// Root of a monotone function bracketed by [lo, hi].
///
/// Backed by TOMS 748 (bracketing secant/inverse-cubic with bisection
/// safeguard). Stops when the bracket is narrower than `tol` (or a few ulps) or |g| < tol.
template <class Fn>
double find_root(Fn&& g, double lo, double hi, double tol, std::uintmax_t max_iter = 200) {
  if (!(lo <= hi)) throw DomainError("find_root: lo > hi");
  const double g_lo = g(lo);
  const double g_hi = g(hi);
  if (g_lo == 0.0) return lo;
  if (g_hi == 0.0) return hi;
  if ((g_lo < 0.0) == (g_hi < 0.0)) {
    throw DomainError("find_root: no sign change on [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  }
  std::uintmax_t iters = max_iter;
  double best_x = std::abs(g_lo) < std::abs(g_hi) ? lo : hi;
  double best_g = std::min(std::abs(g_lo), std::abs(g_hi));
  auto tracked = [&](double x) {
    const double v = g(x);
    if (std::abs(v) < best_g) {
      best_g = std::abs(v);
      best_x = x;
    }
    return v;
  };
  auto converged = [&](double a, double b) {
    const double floor = 4.0 * std::numeric_limits<double>::epsilon() * std::max(std::abs(a), std::abs(b));
    return std::abs(b - a) <= std::max(tol, floor) || best_g < tol;
  };
  const auto [a, b] = boost::math::tools::toms748_solve(tracked, lo, hi, g_lo, g_hi, converged, iters);
  if (best_g < tol) return best_x;
  const double root = 0.5 * (a + b);
  if (!converged(a, b)) throw NumericError("find_root: iteration budget exhausted", root);
  return root;
}

}  // namespace cplab
