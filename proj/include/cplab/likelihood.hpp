#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cplab/errors.hpp"
#include "cplab/numerics/summation.hpp"
#include "cplab/process_model.hpp"

namespace cplab {

/// All event times of an observation set merged into one ascending sequence.
/// Every likelihood in θ depends on the data only through this and n.
struct PooledEvents {
  std::vector<double> times;
  std::size_t n = 0;
  double tau = 0.0;
};

inline PooledEvents pool(const ObservationSet& obs) {
  PooledEvents out;
  out.n = obs.n();
  out.tau = obs.tau();
  out.times.reserve(obs.total_events());
  for (const auto& tr : obs.trajectories()) {
    out.times.insert(out.times.end(), tr.events().begin(), tr.events().end());
  }
  std::sort(out.times.begin(), out.times.end());
  return out;
}

namespace detail {

inline void check_horizon(double obs_tau, double model_tau) {
  if (std::abs(obs_tau - model_tau) > 1e-12 * std::max(1.0, model_tau)) {
    throw DomainError("observation horizon does not match the model's tau");
  }
}

/// ln λ_{θ+}(t) − ln λ_{θ−}(t) for an event at t, i.e. ln((ψ(t)+r)/ψ(t)).
inline double jump_log_ratio(const ChangePointFamily& family, double t) {
  const double psi = family.psi(t);
  const double lifted = psi + family.jump();
  if (!(psi > 0.0) || !(lifted > 0.0)) throw ModelInvalid("non-positive intensity at an event time");
  return std::log1p(family.jump() / psi);
}

}  // namespace detail

/// ln L_n(θ) = Σ_j Σ_i ln λ_θ(t_{j,i}) − n ∫_0^τ (λ_θ(t) − 1) dt.
inline double log_likelihood(const PooledEvents& events, const IntensityModel& model) {
  detail::check_horizon(events.tau, model.tau());
  CompensatedSum sum;
  for (double t : events.times) {
    const double lambda = model.baseline()(t) + (t > model.theta() ? model.jump() : 0.0);
    if (!(lambda > 0.0)) throw ModelInvalid("non-positive intensity at an event time");
    sum += std::log(lambda);
  }
  const double tau = model.tau();
  const double mass = model.baseline().integral(0.0, tau) + model.jump() * std::max(0.0, tau - model.theta());
  sum -= static_cast<double>(events.n) * (mass - tau);
  return sum.value();
}

inline double log_likelihood(const ObservationSet& obs, const IntensityModel& model) {
  return log_likelihood(pool(obs), model);
}

/// ln L_n(θ₂) − ln L_n(θ₁), using only the events between θ₁ and θ₂.
///
/// For θ₂ > θ₁ this is Σ_{t ∈ (θ₁, θ₂]} ln(ψ(t)/(ψ(t)+r)) + n·r·(θ₂ − θ₁);
/// the window is half-open on the left, matching the strict indicator.
inline double log_lr(const PooledEvents& events, const ChangePointFamily& family, double theta1,
                     double theta2) {
  detail::check_horizon(events.tau, family.tau());
  const Interval& dom = family.theta_domain();
  if (!dom.contains(theta1) || !dom.contains(theta2)) {
    throw DomainError("log_lr: theta outside the closed theta domain");
  }
  if (theta1 == theta2) return 0.0;
  const double lo = std::min(theta1, theta2);
  const double hi = std::max(theta1, theta2);
  const auto first = std::upper_bound(events.times.begin(), events.times.end(), lo);
  const auto last = std::upper_bound(first, events.times.end(), hi);
  CompensatedSum sum;
  for (auto it = first; it != last; ++it) sum -= detail::jump_log_ratio(family, *it);
  sum += static_cast<double>(events.n) * family.jump() * (hi - lo);
  const double forward = sum.value();
  return theta2 > theta1 ? forward : -forward;
}

inline double log_lr(const ObservationSet& obs, const ChangePointFamily& family, double theta1,
                     double theta2) {
  return log_lr(pool(obs), family, theta1, theta2);
}

/// Normalization rates: φ_n, φ*_n and the exponent γ of the window form.
struct RatePair {
  double phi = 0.0;
  double phi_star = 0.0;
  int gamma = 1;
};

inline RatePair rates(std::size_t n, const JumpSchedule& schedule, double psi_at_theta) {
  if (n == 0) throw DomainError("rates: n must be positive");
  const double nn = static_cast<double>(n);
  if (schedule.jump_case() == JumpCase::NonzeroLimit) {
    const double phi = 1.0 / nn;
    return {phi, phi / std::abs(schedule.scale()), 1};
  }
  const double r = schedule.jump_at(n);
  const double phi = 1.0 / (nn * r * r);
  return {phi, phi * psi_at_theta, -1};
}

/// ln Z_{n,θ}(u) = ln L_n(θ + u φ_n) − ln L_n(θ) on a grid of u, where θ is the
/// model's change point and φ_n comes from `schedule`.
inline std::vector<double> normalized_llr_path(const PooledEvents& events, const IntensityModel& model,
                                               const JumpSchedule& schedule, std::span<const double> u_grid) {
  const double r_n = schedule.jump_at(events.n);
  if (std::abs(r_n - model.jump()) > 1e-12 * std::max(1.0, std::abs(r_n))) {
    throw DomainError("normalized_llr_path: model jump does not match the schedule at this n");
  }
  const RatePair rp = rates(events.n, schedule, model.baseline()(model.theta()));
  const Interval& dom = model.theta_domain();
  const double theta = model.theta();
  std::vector<double> out;
  out.reserve(u_grid.size());
  for (double u : u_grid) {
    const double target = theta + u * rp.phi;
    if (target < dom.lo) {
      throw DomainError("u = " + std::to_string(u) + " below U_n (theta + u*phi_n < alpha)");
    }
    if (target > dom.hi) {
      throw DomainError("u = " + std::to_string(u) + " above U_n (theta + u*phi_n > beta)");
    }
    out.push_back(log_lr(events, model.family(), theta, target));
  }
  return out;
}

inline std::vector<double> normalized_llr_path(const ObservationSet& obs, const IntensityModel& model,
                                               const JumpSchedule& schedule, std::span<const double> u_grid) {
  return normalized_llr_path(pool(obs), model, schedule, u_grid);
}

/// ln L_n(θ) over the closed domain as a càdlàg, piecewise-linear function.
///
/// Knots are α, the distinct pooled event times strictly inside (α, β), and
/// β. Between knots the curve is linear with slope n·r. `right[k]` is the
/// value at knots[k] (the curve is right-continuous) and `left[k]` its left
/// limit; they differ by the events sitting exactly at the knot.
struct LogLikelihoodCurve {
  std::vector<double> knots;
  std::vector<double> right;
  std::vector<double> left;
  double slope = 0.0;

  /// ln L_n(θ) for θ in [knots.front(), knots.back()].
  double value(double theta) const {
    auto it = std::upper_bound(knots.begin(), knots.end(), theta);
    if (it == knots.begin()) throw DomainError("LogLikelihoodCurve: theta below the domain");
    const auto k = static_cast<std::size_t>(it - knots.begin()) - 1;
    return right[k] + slope * (theta - knots[k]);
  }

  /// Left limit ln L_n(θ−).
  double left_limit(double theta) const {
    auto it = std::lower_bound(knots.begin(), knots.end(), theta);
    if (it != knots.end() && *it == theta) return left[static_cast<std::size_t>(it - knots.begin())];
    return value(theta);
  }
};

/// Pooled event times strictly inside (α, β), deduplicated, framed by α and β.
inline std::vector<double> candidate_set(std::span<const double> sorted_times, Interval domain) {
  std::vector<double> out{domain.lo};
  auto it = std::upper_bound(sorted_times.begin(), sorted_times.end(), domain.lo);
  for (; it != sorted_times.end() && *it < domain.hi; ++it) {
    if (*it > out.back()) out.push_back(*it);
  }
  out.push_back(domain.hi);
  return out;
}

inline std::vector<double> candidate_set(const ObservationSet& obs, Interval domain) {
  return candidate_set(pool(obs).times, domain);
}

inline LogLikelihoodCurve log_likelihood_curve(const PooledEvents& events, const ChangePointFamily& family) {
  detail::check_horizon(events.tau, family.tau());
  const Interval dom = family.theta_domain();
  const double nr = static_cast<double>(events.n) * family.jump();
  const double tau = family.tau();
  const auto& ts = events.times;

  // ln L(θ) = C + Σ_{t>θ} ln((ψ+r)/ψ)(t) + n r θ,
  // C = Σ ln ψ(t) − n(∫ψ − τ) − n r τ.
  CompensatedSum constant;
  if (family.baseline().is_constant()) {
    constant += static_cast<double>(ts.size()) * std::log(family.baseline().constant_value());
  } else {
    for (double t : ts) constant += std::log(family.psi(t));
  }
  constant -= static_cast<double>(events.n) * (family.baseline().integral(0.0, tau) - tau);
  constant -= nr * tau;

  LogLikelihoodCurve curve;
  curve.slope = nr;
  curve.knots = candidate_set(ts, dom);
  const std::size_t m = curve.knots.size();
  curve.right.resize(m);
  curve.left.resize(m);

  // Suffix sums of the per-event log ratios, walking the knots downward.
  const bool constant_ratio = family.baseline().is_constant();
  const double fixed_ratio = constant_ratio ? detail::jump_log_ratio(family, 0.0) : 0.0;
  auto ratio = [&](double t) { return constant_ratio ? fixed_ratio : detail::jump_log_ratio(family, t); };

  CompensatedSum above;  // Σ over events > current knot
  std::size_t idx = ts.size();
  for (std::size_t k = m; k-- > 0;) {
    const double c = curve.knots[k];
    while (idx > 0 && ts[idx - 1] > c) {
      above += ratio(ts[idx - 1]);
      --idx;
    }
    CompensatedSum at_or_above = above;
    std::size_t j = idx;
    while (j > 0 && ts[j - 1] == c) {
      at_or_above += ratio(ts[j - 1]);
      --j;
    }
    const double base = constant.value() + nr * c;
    curve.right[k] = base + above.value();
    curve.left[k] = base + at_or_above.value();
  }
  return curve;
}

}  // namespace cplab
