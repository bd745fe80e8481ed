#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <variant>
#include <vector>

#include "cplab/errors.hpp"
#include "cplab/likelihood.hpp"
#include "cplab/numerics/quadrature.hpp"
#include "cplab/numerics/summation.hpp"
#include "cplab/process_model.hpp"

namespace cplab {

enum class AttainedSide { LeftLimit, RightLimit, Interior };

struct MleResult {
  double theta_hat = 0.0;
  AttainedSide attained_side = AttainedSide::RightLimit;
  double max_loglik = 0.0;
  std::size_t candidate_count = 0;
};

/// Maximizer of max{L(θ+), L(θ−)} over the closed domain.
///
/// The log-likelihood is linear between candidates, so the supremum is one of
/// the one-sided limits at a candidate. α contributes its right value only and
/// β its value and left limit. Ties go to the smallest θ, and the right value
/// before the left limit. A flat likelihood (r = 0) reports Interior.
inline MleResult mle(const LogLikelihoodCurve& curve) {
  MleResult best;
  best.max_loglik = -std::numeric_limits<double>::infinity();
  best.candidate_count = curve.knots.size();
  for (std::size_t k = 0; k < curve.knots.size(); ++k) {
    const bool use_left = k > 0 && curve.left[k] > curve.right[k];
    const double v = use_left ? curve.left[k] : curve.right[k];
    if (v > best.max_loglik) {
      best = {curve.knots[k], use_left ? AttainedSide::LeftLimit : AttainedSide::RightLimit, v,
              curve.knots.size()};
    }
  }
  if (curve.slope == 0.0) best.attained_side = AttainedSide::Interior;
  return best;
}

inline MleResult mle(const PooledEvents& events, const ChangePointFamily& family) {
  if (!(family.theta_domain().length() > 0.0)) throw DomainError("mle: empty theta domain");
  return mle(log_likelihood_curve(events, family));
}

inline MleResult mle(const ObservationSet& obs, const ChangePointFamily& family) {
  return mle(pool(obs), family);
}

/// Prior density on Θ: uniform, or an unnormalized piecewise-linear table.
class Prior {
 public:
  static Prior uniform() { return Prior(); }
  static Prior table(PiecewiseLinear density) { return Prior(std::move(density)); }

  bool is_uniform() const noexcept { return !table_.has_value(); }

  /// Unnormalized density.
  double density(double theta) const noexcept { return table_ ? (*table_)(theta) : 1.0; }

  /// ∫ of the unnormalized density over `domain` (exact).
  double mass(Interval domain) const {
    return table_ ? table_->integral(domain.lo, domain.hi) : domain.length();
  }

  /// Normalized density on `domain`.
  double normalized_density(double theta, Interval domain) const { return density(theta) / mass(domain); }

  /// Table knots strictly inside `domain`.
  std::vector<double> knots_inside(Interval domain) const {
    std::vector<double> out;
    if (table_) {
      for (double x : table_->knots()) {
        if (x > domain.lo && x < domain.hi) out.push_back(x);
      }
    }
    return out;
  }

  /// Rejects densities that vanish or go negative inside the domain.
  void check_positive(Interval domain) const {
    if (!table_) return;
    if (!(mass(domain) > 0.0)) throw DomainError("prior has no mass on the theta domain");
    const auto [lo, hi] = table_->range_on(domain.lo, domain.hi);
    (void)hi;
    if (lo < 0.0) throw DomainError("prior density is negative on the theta domain");
    for (double x : knots_inside(domain)) {
      if (!(table_->operator()(x) > 0.0)) throw DomainError("prior density is not positive inside the domain");
    }
    const double mid = 0.5 * (domain.lo + domain.hi);
    if (!(table_->operator()(mid) > 0.0)) throw DomainError("prior density is not positive inside the domain");
  }

 private:
  Prior() = default;
  explicit Prior(PiecewiseLinear density) : table_(std::move(density)) {}

  std::optional<PiecewiseLinear> table_;
};

struct BayesResult {
  double theta_tilde = 0.0;
  /// ln ∫_Θ p(θ) L_n(θ) dθ with p normalized on Θ.
  double log_normalizer = 0.0;
};

namespace detail {

/// (1 − e^{−s}) / s for s ≥ 0, stable near zero.
inline double one_minus_exp_over(double s) noexcept {
  return s < 1e-8 ? 1.0 - 0.5 * s : -std::expm1(-s) / s;
}

/// Mean of the density ∝ e^{s x} on [0, 1].
inline double exp_linear_mean(double s) noexcept {
  if (std::abs(s) < 1e-4) return 0.5 + s / 12.0 - s * s * s / 720.0;
  return 1.0 / (-std::expm1(-s)) - 1.0 / s;
}

}  // namespace detail

/// Posterior mean for square loss and the log marginal likelihood.
///
/// ln L is linear on each segment between likelihood knots (and prior
/// knots), so with a uniform prior the segment integrals of e^{aθ+b} and
/// θe^{aθ+b} are closed form; other priors use 16-point Gauss-Legendre per
/// segment. Segment masses are scaled by the global maximum of ln L.
inline BayesResult bayes(const LogLikelihoodCurve& curve, const Prior& prior, Interval domain) {
  prior.check_positive(domain);
  std::vector<double> cuts = curve.knots;
  if (!prior.is_uniform()) {
    const auto extra = prior.knots_inside(domain);
    cuts.insert(cuts.end(), extra.begin(), extra.end());
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
  }
  const double a = curve.slope;

  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k + 1 < curve.knots.size(); ++k) {
    const double v0 = curve.right[k];
    const double v1 = v0 + a * (curve.knots[k + 1] - curve.knots[k]);
    peak = std::max({peak, v0, v1});
  }

  CompensatedSum mass;
  CompensatedSum moment;
  std::size_t seg = 0;  // curve segment containing the current cut segment
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double x0 = cuts[k];
    const double x1 = cuts[k + 1];
    const double width = x1 - x0;
    if (!(width > 0.0)) continue;
    while (seg + 1 < curve.knots.size() - 1 && curve.knots[seg + 1] <= x0) ++seg;
    const double v0 = curve.right[seg] + a * (x0 - curve.knots[seg]) - peak;
    if (prior.is_uniform()) {
      const double s = a * width;
      double w;
      if (s >= 0.0) {
        w = std::exp(v0 + s) * width * detail::one_minus_exp_over(s);
      } else {
        w = std::exp(v0) * width * detail::one_minus_exp_over(-s);
      }
      mass += w;
      moment += w * (x0 + width * detail::exp_linear_mean(s));
    } else {
      auto weight = [&](double th) { return prior.density(th) * std::exp(v0 + a * (th - x0)); };
      mass += gauss_legendre16(weight, x0, x1);
      moment += gauss_legendre16([&](double th) { return th * weight(th); }, x0, x1);
    }
  }
  const double total = mass.value();
  if (!(total > 0.0)) throw NumericError("bayes: posterior mass vanished", 0.5 * (domain.lo + domain.hi));
  BayesResult out;
  out.theta_tilde = std::clamp(moment.value() / total, domain.lo, domain.hi);
  const double prior_mass = prior.is_uniform() ? domain.length() : prior.mass(domain);
  out.log_normalizer = peak + std::log(total) - std::log(prior_mass);
  return out;
}

inline BayesResult bayes(const PooledEvents& events, const ChangePointFamily& family, const Prior& prior) {
  return bayes(log_likelihood_curve(events, family), prior, family.theta_domain());
}

inline BayesResult bayes(const ObservationSet& obs, const ChangePointFamily& family, const Prior& prior) {
  return bayes(pool(obs), family, prior);
}

}  // namespace cplab
