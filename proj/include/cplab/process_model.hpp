#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "cplab/errors.hpp"
#include "cplab/numerics/random.hpp"

namespace cplab {

/// Closed interval [lo, hi] with lo < hi.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double x) const noexcept { return lo <= x && x <= hi; }
  double length() const noexcept { return hi - lo; }
};

/// Continuous function given by a breakpoint table, linear between knots and
/// constant beyond the first/last knot.
class PiecewiseLinear {
 public:
  PiecewiseLinear(std::vector<double> knots, std::vector<double> values)
      : x_(std::move(knots)), y_(std::move(values)) {
    if (x_.empty() || x_.size() != y_.size()) {
      throw ModelInvalid("piecewise-linear table needs matching, non-empty knots and values");
    }
    for (std::size_t i = 1; i < x_.size(); ++i) {
      if (!(x_[i] > x_[i - 1])) throw ModelInvalid("piecewise-linear knots must be strictly increasing");
    }
    for (double v : y_) {
      if (!std::isfinite(v)) throw ModelInvalid("piecewise-linear values must be finite");
    }
  }

  double operator()(double t) const noexcept {
    if (t <= x_.front()) return y_.front();
    if (t >= x_.back()) return y_.back();
    const auto it = std::upper_bound(x_.begin(), x_.end(), t);
    const auto i = static_cast<std::size_t>(it - x_.begin());
    const double w = (t - x_[i - 1]) / (x_[i] - x_[i - 1]);
    return y_[i - 1] + w * (y_[i] - y_[i - 1]);
  }

  /// Exact integral over [a, b] (trapezoid per linear piece).
  double integral(double a, double b) const {
    if (a > b) throw DomainError("integral: inverted bounds");
    double total = 0.0;
    double left = a;
    auto it = std::upper_bound(x_.begin(), x_.end(), a);
    while (left < b) {
      const double right = (it == x_.end()) ? b : std::min(b, *it);
      total += 0.5 * ((*this)(left) + (*this)(right)) * (right - left);
      left = right;
      if (it != x_.end()) ++it;
    }
    return total;
  }

  /// Extremes over [a, b]; attained at the ends or at interior knots.
  std::pair<double, double> range_on(double a, double b) const {
    double lo = std::min((*this)(a), (*this)(b));
    double hi = std::max((*this)(a), (*this)(b));
    for (std::size_t i = 0; i < x_.size(); ++i) {
      if (x_[i] > a && x_[i] < b) {
        lo = std::min(lo, y_[i]);
        hi = std::max(hi, y_[i]);
      }
    }
    return {lo, hi};
  }

  std::span<const double> knots() const noexcept { return x_; }
  std::span<const double> values() const noexcept { return y_; }

 private:
  std::vector<double> x_;
  std::vector<double> y_;
};

/// Regular part ψ of the intensity: a constant or a breakpoint table.
class Baseline {
 public:
  static Baseline constant(double value) { return Baseline(value); }
  static Baseline table(PiecewiseLinear table) { return Baseline(std::move(table)); }

  bool is_constant() const noexcept { return std::holds_alternative<double>(rep_); }

  double constant_value() const { return std::get<double>(rep_); }
  const PiecewiseLinear* table_ptr() const noexcept { return std::get_if<PiecewiseLinear>(&rep_); }

  double operator()(double t) const noexcept {
    if (const double* c = std::get_if<double>(&rep_)) return *c;
    return std::get<PiecewiseLinear>(rep_)(t);
  }

  double integral(double a, double b) const {
    if (a > b) throw DomainError("integral: inverted bounds");
    if (const double* c = std::get_if<double>(&rep_)) return *c * (b - a);
    return std::get<PiecewiseLinear>(rep_).integral(a, b);
  }

  std::pair<double, double> range_on(double a, double b) const {
    if (const double* c = std::get_if<double>(&rep_)) return {*c, *c};
    return std::get<PiecewiseLinear>(rep_).range_on(a, b);
  }

 private:
  explicit Baseline(double c) : rep_(c) {
    if (!std::isfinite(c)) throw ModelInvalid("baseline must be finite");
  }
  explicit Baseline(PiecewiseLinear t) : rep_(std::move(t)) {}

  std::variant<double, PiecewiseLinear> rep_;
};

/// Intensity bounds (ℓ, L) of λ(t) = ψ(t) + r·1{t > θ} over [0, τ], taking
/// both indicator states at θ. Throws ModelInvalid when ℓ ≤ 0.
inline std::pair<double, double> intensity_bounds(const Baseline& baseline, double jump, double theta,
                                                  double tau) {
  auto [lo, hi] = baseline.range_on(0.0, std::min(theta, tau));
  if (theta < tau) {
    const auto [jlo, jhi] = baseline.range_on(theta, tau);
    lo = std::min(lo, jlo + jump);
    hi = std::max(hi, jhi + jump);
  }
  if (!(lo > 0.0)) {
    throw ModelInvalid("intensity is not strictly positive (min " + std::to_string(lo) + ")");
  }
  return {lo, hi};
}

/// The parametric family {λ_θ : θ ∈ Θ} with known regular part and jump size.
class ChangePointFamily {
 public:
  ChangePointFamily(Baseline baseline, double jump, double tau, Interval theta_domain)
      : baseline_(std::move(baseline)), jump_(jump), tau_(tau), domain_(theta_domain) {
    if (!(tau_ > 0.0) || !std::isfinite(tau_)) throw ModelInvalid("tau must be positive");
    if (!std::isfinite(jump_)) throw ModelInvalid("jump must be finite");
    if (!(domain_.lo >= 0.0 && domain_.lo < domain_.hi && domain_.hi <= tau_)) {
      throw ModelInvalid("theta domain must satisfy 0 <= alpha < beta <= tau");
    }
    if (const PiecewiseLinear* t = baseline_.table_ptr()) {
      if (t->knots().front() > 0.0 || t->knots().back() < tau_) {
        throw ModelInvalid("baseline table must cover [0, tau]");
      }
    }
    // Uniform positivity over every θ in the closure of Θ.
    const auto [lo, hi] = uniform_bounds();
    (void)lo;
    (void)hi;
  }

  const Baseline& baseline() const noexcept { return baseline_; }
  double jump() const noexcept { return jump_; }
  double tau() const noexcept { return tau_; }
  const Interval& theta_domain() const noexcept { return domain_; }

  double psi(double t) const noexcept { return baseline_(t); }

  /// (ℓ, L) valid for every θ in the closed domain.
  std::pair<double, double> uniform_bounds() const {
    auto [lo, hi] = baseline_.range_on(0.0, tau_);
    const auto [jlo, jhi] = baseline_.range_on(domain_.lo, tau_);
    if (domain_.lo < tau_) {
      lo = std::min(lo, jlo + jump_);
      hi = std::max(hi, jhi + jump_);
    }
    if (!(lo > 0.0)) {
      throw ModelInvalid("intensity is not strictly positive (min " + std::to_string(lo) + ")");
    }
    return {lo, hi};
  }

  ChangePointFamily with_domain(Interval domain) const {
    return ChangePointFamily(baseline_, jump_, tau_, domain);
  }

 private:
  Baseline baseline_;
  double jump_;
  double tau_;
  Interval domain_;
};

/// One member λ_θ(t) = ψ(t) + r·1{t > θ} of the family.
class IntensityModel {
 public:
  IntensityModel(ChangePointFamily family, double theta) : family_(std::move(family)), theta_(theta) {
    if (!family_.theta_domain().contains(theta_)) {
      throw DomainError("theta " + std::to_string(theta_) + " outside the closed theta domain");
    }
    bounds_ = intensity_bounds(family_.baseline(), family_.jump(), theta_, family_.tau());
  }

  IntensityModel(Baseline baseline, double jump, double theta, double tau, Interval theta_domain)
      : IntensityModel(ChangePointFamily(std::move(baseline), jump, tau, theta_domain), theta) {}

  const ChangePointFamily& family() const noexcept { return family_; }
  const Baseline& baseline() const noexcept { return family_.baseline(); }
  double jump() const noexcept { return family_.jump(); }
  double theta() const noexcept { return theta_; }
  double tau() const noexcept { return family_.tau(); }
  const Interval& theta_domain() const noexcept { return family_.theta_domain(); }

  /// (ℓ, L) for this θ.
  std::pair<double, double> bounds() const noexcept { return bounds_; }

  IntensityModel with_theta(double theta) const { return IntensityModel(family_, theta); }

 private:
  ChangePointFamily family_;
  double theta_;
  std::pair<double, double> bounds_;
};

/// λ(t); the indicator is strict, so λ(θ) = ψ(θ).
inline double intensity_at(const IntensityModel& model, double t) {
  if (!(t >= 0.0 && t <= model.tau())) throw DomainError("intensity_at: t outside [0, tau]");
  return model.baseline()(t) + (t > model.theta() ? model.jump() : 0.0);
}

/// Λ((a, b]) = ∫_a^b λ(t) dt.
inline double integrated_intensity(const IntensityModel& model, double a, double b) {
  if (!(0.0 <= a && a <= b && b <= model.tau())) {
    throw DomainError("integrated_intensity: need 0 <= a <= b <= tau");
  }
  const double jump_len = std::max(0.0, b - std::max(a, model.theta()));
  return model.baseline().integral(a, b) + model.jump() * jump_len;
}

inline std::pair<double, double> bounds(const IntensityModel& model) { return model.bounds(); }

enum class JumpCase { NonzeroLimit, Vanishing };

/// r_n = scale · n^{-exponent}. exponent = 0 gives a fixed jump; 0 < exponent
/// < 1/2 gives a vanishing jump with n·r_n² → ∞.
class JumpSchedule {
 public:
  JumpSchedule(double scale, double exponent) : scale_(scale), exponent_(exponent) {
    if (!(scale_ != 0.0) || !std::isfinite(scale_)) throw ModelInvalid("jump scale must be nonzero");
    if (!(exponent_ >= 0.0 && exponent_ < 0.5)) {
      throw ModelInvalid("jump exponent must lie in [0, 1/2) so that n r_n^2 diverges");
    }
  }

  double scale() const noexcept { return scale_; }
  double exponent() const noexcept { return exponent_; }
  JumpCase jump_case() const noexcept { return exponent_ == 0.0 ? JumpCase::NonzeroLimit : JumpCase::Vanishing; }

  double jump_at(std::size_t n) const {
    if (n == 0) throw DomainError("jump_at: n must be positive");
    return scale_ * std::pow(static_cast<double>(n), -exponent_);
  }

 private:
  double scale_;
  double exponent_;
};

/// Strictly increasing event times in [0, τ].
class Trajectory {
 public:
  Trajectory() = default;

  Trajectory(std::vector<double> events, double tau) : events_(std::move(events)) {
    for (std::size_t i = 0; i < events_.size(); ++i) {
      if (!(events_[i] >= 0.0 && events_[i] <= tau)) throw DomainError("event outside [0, tau]");
      if (i > 0 && !(events_[i] > events_[i - 1])) {
        throw DomainError("events must be strictly increasing");
      }
    }
  }

  std::span<const double> events() const noexcept { return events_; }
  std::size_t size() const noexcept { return events_.size(); }

 private:
  struct Unchecked {};
  Trajectory(Unchecked, std::vector<double> events) : events_(std::move(events)) {}

  friend class TrajectoryBuilder;

  std::vector<double> events_;
};

/// n independent trajectories on a common horizon.
class ObservationSet {
 public:
  ObservationSet(std::vector<Trajectory> trajectories, double tau)
      : trajectories_(std::move(trajectories)), tau_(tau) {
    if (trajectories_.empty()) throw DomainError("observation set needs n >= 1 trajectories");
    if (!(tau_ > 0.0)) throw DomainError("tau must be positive");
    for (const auto& tr : trajectories_) {
      if (!tr.events().empty() && tr.events().back() > tau_) throw DomainError("event beyond tau");
    }
  }

  std::size_t n() const noexcept { return trajectories_.size(); }
  double tau() const noexcept { return tau_; }
  const std::vector<Trajectory>& trajectories() const noexcept { return trajectories_; }
  const Trajectory& operator[](std::size_t j) const { return trajectories_.at(j); }

  std::size_t total_events() const noexcept {
    std::size_t total = 0;
    for (const auto& tr : trajectories_) total += tr.size();
    return total;
  }

 private:
  std::vector<Trajectory> trajectories_;
  double tau_;
};

struct SamplingStats {
  /// Events nudged up by one ulp because they collided with their predecessor.
  std::size_t perturbed_duplicates = 0;
};

/// Appends events in increasing order, repairing floating-point collisions.
class TrajectoryBuilder {
 public:
  explicit TrajectoryBuilder(double tau, SamplingStats* stats) : tau_(tau), stats_(stats) {}

  void push(double t) {
    if (!events_.empty() && !(t > events_.back())) {
      t = std::nextafter(events_.back(), std::numeric_limits<double>::infinity());
      if (stats_) ++stats_->perturbed_duplicates;
      if (t > tau_) return;
    }
    events_.push_back(t);
  }

  Trajectory finish() && { return Trajectory(Trajectory::Unchecked{}, std::move(events_)); }

 private:
  double tau_;
  SamplingStats* stats_;
  std::vector<double> events_;
};

/// Exact sampler for a constant baseline: homogeneous rate ψ on [0, θ] and
/// ψ + r on (θ, τ], each by exponential inter-arrival times.
inline Trajectory sample_trajectory_exact(const IntensityModel& model, RandomStream& rng,
                                          SamplingStats* stats = nullptr) {
  if (!model.baseline().is_constant()) {
    throw DomainError("exact two-segment sampler requires a constant baseline");
  }
  const double psi = model.baseline().constant_value();
  const double theta = model.theta();
  const double tau = model.tau();
  TrajectoryBuilder out(tau, stats);
  double t = 0.0;
  for (;;) {
    t += rng.exponential(psi);
    if (t > theta) break;
    out.push(t);
  }
  if (theta < tau) {
    const double rate = psi + model.jump();
    t = theta;
    for (;;) {
      t += rng.exponential(rate);
      if (t > tau) break;
      out.push(t);
    }
  }
  return std::move(out).finish();
}

/// Lewis-Shedler thinning against the constant envelope L.
inline Trajectory sample_trajectory_thinning(const IntensityModel& model, RandomStream& rng,
                                             SamplingStats* stats = nullptr) {
  const double envelope = model.bounds().second;
  const double tau = model.tau();
  TrajectoryBuilder out(tau, stats);
  double t = 0.0;
  for (;;) {
    t += rng.exponential(envelope);
    if (t > tau) break;
    const double accept = (model.baseline()(t) + (t > model.theta() ? model.jump() : 0.0)) / envelope;
    if (rng.uniform() <= accept) out.push(t);
  }
  return std::move(out).finish();
}

inline Trajectory sample_trajectory(const IntensityModel& model, RandomStream& rng,
                                    SamplingStats* stats = nullptr) {
  return model.baseline().is_constant() ? sample_trajectory_exact(model, rng, stats)
                                        : sample_trajectory_thinning(model, rng, stats);
}

/// n independent trajectories; trajectory j draws from `base.derive(j)`.
inline ObservationSet sample_observation_set(const IntensityModel& model, std::size_t n,
                                             const RandomStream& base, SamplingStats* stats = nullptr) {
  if (n == 0) throw DomainError("sample_observation_set: n must be positive");
  std::vector<Trajectory> trajectories;
  trajectories.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    RandomStream rng = base.derive(j);
    trajectories.push_back(sample_trajectory(model, rng, stats));
  }
  return ObservationSet(std::move(trajectories), model.tau());
}

}  // namespace cplab
