#pragma once

#include <cmath>
#include <functional>
#include <limits>

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "cplab/errors.hpp"

namespace cplab {

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
};

/// Caller-certified truncation of an infinite range: the integrand's absolute
/// mass beyond `cutoff` is at most `bound`.
struct TailCutoff {
  double cutoff = 0.0;
  double bound = 0.0;
};

/// Adaptive double-exponential quadrature on [a, b]. Integrable endpoint
/// singularities are allowed. Throws NumericError (with the estimate) when
/// the error estimate exceeds `tol`.
template <class Fn>
QuadratureResult integrate(Fn&& f, double a, double b, double tol) {
  if (!(a <= b)) throw DomainError("integrate: inverted bounds");
  if (a == b) return {};
  boost::math::quadrature::tanh_sinh<double> integrator(15);
  // Abscissae can round onto an endpoint; endpoints carry no mass and may be singular.
  auto interior = [&](double x) { return (x <= a || x >= b) ? 0.0 : static_cast<double>(f(x)); };
  // Boost's tolerance is relative to the L1 norm; retry once with it known.
  double rel_tol = std::max(4.0 * std::numeric_limits<double>::epsilon(), 0.01 * tol);
  double value = 0.0;
  double error = 0.0;
  for (int attempt = 0; attempt < 2; ++attempt) {
    double l1 = 0.0;
    std::size_t levels = 0;
    value = integrator.integrate(interior, a, b, rel_tol, &error, &l1, &levels);
    if (error <= tol && std::isfinite(value)) return {value, error};
    const double wanted = 0.01 * tol / std::max(l1, 1e-300);
    if (!(wanted < rel_tol) || wanted < 4.0 * std::numeric_limits<double>::epsilon()) break;
    rel_tol = wanted;
  }
  throw NumericError("integrate: tolerance not met", value);
}

/// ∫_a^∞ f, integrating to `tail.cutoff` and charging `tail.bound` to the error.
template <class Fn>
QuadratureResult integrate(Fn&& f, double a, TailCutoff tail, double tol) {
  if (!(tail.bound <= tol)) throw DomainError("integrate: tail bound exceeds tolerance");
  if (a >= tail.cutoff) {
    return {0.0, tail.bound};
  }
  QuadratureResult body = integrate(std::forward<Fn>(f), a, tail.cutoff, tol - tail.bound);
  body.error += tail.bound;
  return body;
}

/// 16-point Gauss-Legendre rule on [a, b].
template <class Fn>
double gauss_legendre16(Fn&& f, double a, double b) {
  return boost::math::quadrature::gauss<double, 16>::integrate(std::forward<Fn>(f), a, b);
}

}  // namespace cplab
