#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "cplab/errors.hpp"
#include "cplab/numerics/normal.hpp"
#include "cplab/numerics/random.hpp"

namespace cplab {

/// Discretization of the limiting likelihood-ratio processes.
///
/// Paths are exact in distribution on the grid: a skeleton of W at spacing
/// `skeleton_step` over [-radius, radius], then Brownian-bridge refinement
/// to spacing `step` (or `step / refine_factor` on |v| <= refine_radius) of
/// every skeleton segment whose endpoints come within `relevance_window` of
/// the skeleton maximum of ln Z. Segments further below keep their skeleton
/// endpoints only; their weight relative to the peak is below
/// e^{-relevance_window}. An infinite window refines everything.
///
/// Bridge noise is keyed by (side, segment), so the refined value at any
/// grid point does not depend on which other segments were refined, the
/// radius, or the shift of the target process.
struct LimitPathConfig {
  double step = 0.005;
  double radius = 128.0;
  bool refine_near_zero = true;
  double refine_radius = 2.0;
  int refine_factor = 10;
  double skeleton_step = 0.25;
  double relevance_window = 16.0;

  void validate() const {
    if (!(step > 0.0 && step <= 0.01)) throw DomainError("path step must lie in (0, 0.01]");
    if (!(radius > 0.0)) throw DomainError("path radius must be positive");
    if (!(skeleton_step >= step)) throw DomainError("skeleton step must be at least the path step");
    if (!(relevance_window > 0.0)) throw DomainError("relevance window must be positive");
    if (refine_near_zero && refine_factor < 1) throw DomainError("refine factor must be >= 1");
    check_multiple(skeleton_step, step, "skeleton step", "path step");
    check_multiple(radius, skeleton_step, "radius", "skeleton step");
    if (refine_near_zero) check_multiple(refine_radius, skeleton_step, "refine radius", "skeleton step");
  }

  /// Argmax and ratio statistics need the tail beyond the radius to be negligible.
  void require_statistic_radius() const {
    validate();
    if (radius < 64.0) throw DomainError("argmax/ratio statistics need radius >= 64");
  }

  int substeps(bool near_zero) const {
    const int base = static_cast<int>(std::lround(skeleton_step / step));
    return (refine_near_zero && near_zero) ? base * refine_factor : base;
  }

 private:
  static void check_multiple(double big, double small, const char* big_name, const char* small_name) {
    const double ratio = big / small;
    if (std::abs(ratio - std::round(ratio)) > 1e-9 * std::max(1.0, ratio)) {
      throw DomainError(std::string(big_name) + " must be an integer multiple of the " + small_name);
    }
  }
};

/// Which part of the process a statistic uses, and the alternative shift u:
/// ln Z*_u(v) = W(v) − |v − u|/2 + u/2 (u = 0 is the null process Z*).
struct PathWindow {
  double lower = -std::numeric_limits<double>::infinity();
  double shift = 0.0;
};

/// ln Z*_u on an ascending, possibly non-uniform grid containing v = 0.
struct WienerLrPath {
  std::vector<double> grid;
  std::vector<double> logz;
  double shift = 0.0;
  std::size_t origin = 0;
};

/// Reusable workspace for drawing WienerLrPath realizations.
class WienerPathSampler {
 public:
  explicit WienerPathSampler(LimitPathConfig config) : config_(config) {
    config_.validate();
    build_bridge(config_.substeps(false), coarse_);
    build_bridge(config_.substeps(true), fine_);
  }

  const LimitPathConfig& config() const noexcept { return config_; }

  /// Draws the path for `stream` (one stream per replicate).
  void simulate(const RandomStream& stream, PathWindow window, WienerLrPath& out) {
    if (!(window.shift >= 0.0)) throw DomainError("shift must be nonnegative");
    const double radius = config_.radius;
    const double lower = std::max(window.lower, -radius);
    const double h = config_.skeleton_step;
    const double shift = window.shift;
    auto drift = [shift](double v) { return -0.5 * std::abs(v - shift) + 0.5 * shift; };

    const auto pos_segments = static_cast<std::size_t>(std::lround(radius / h));
    std::size_t neg_segments = 0;
    if (lower < 0.0) {
      neg_segments = std::min(pos_segments, static_cast<std::size_t>(std::ceil(-lower / h - 1e-9)));
    }
    skeleton(stream.derive(kPositiveSide), pos_segments, pos_w_);
    skeleton(stream.derive(kNegativeSide), neg_segments, neg_w_);

    double peak = 0.0;  // ln Z*_u(0) = 0 for every shift
    for (std::size_t k = 0; k <= pos_segments; ++k) {
      const double v = static_cast<double>(k) * h;
      if (v >= lower) peak = std::max(peak, pos_w_[k] + drift(v));
    }
    for (std::size_t k = 1; k <= neg_segments; ++k) {
      peak = std::max(peak, neg_w_[k] + drift(-static_cast<double>(k) * h));
    }
    const double floor = peak - config_.relevance_window;

    out.shift = shift;
    out.grid.clear();
    out.logz.clear();
    if (neg_segments > 0) {
      side_points(stream.derive(kNegativeSide), neg_w_, neg_segments, -1.0, floor, drift, side_v_, side_l_);
      for (std::size_t i = side_v_.size(); i-- > 1;) {
        out.grid.push_back(side_v_[i]);
        out.logz.push_back(side_l_[i]);
      }
    }
    out.origin = out.grid.size();
    side_points(stream.derive(kPositiveSide), pos_w_, pos_segments, 1.0, floor, drift, side_v_, side_l_);
    out.grid.insert(out.grid.end(), side_v_.begin(), side_v_.end());
    out.logz.insert(out.logz.end(), side_l_.begin(), side_l_.end());
  }

  WienerLrPath simulate(const RandomStream& stream, PathWindow window = {}) {
    WienerLrPath out;
    simulate(stream, window, out);
    return out;
  }

 private:
  static constexpr std::uint64_t kPositiveSide = 1;
  static constexpr std::uint64_t kNegativeSide = 2;

  struct BridgeCoefficients {
    int substeps = 1;
    std::vector<double> pull;   // weight toward the segment's right endpoint
    std::vector<double> spread; // conditional standard deviation
  };

  void build_bridge(int m, BridgeCoefficients& bc) const {
    const double delta = config_.skeleton_step / m;
    bc.substeps = m;
    bc.pull.resize(static_cast<std::size_t>(std::max(m - 1, 0)));
    bc.spread.resize(bc.pull.size());
    for (int j = 1; j < m; ++j) {
      const double remaining = m - j + 1;
      bc.pull[static_cast<std::size_t>(j - 1)] = 1.0 / remaining;
      bc.spread[static_cast<std::size_t>(j - 1)] = std::sqrt(delta * (remaining - 1.0) / remaining);
    }
  }

  void skeleton(RandomStream rng, std::size_t segments, std::vector<double>& w) const {
    w.resize(segments + 1);
    w[0] = 0.0;
    const double sd = std::sqrt(config_.skeleton_step);
    for (std::size_t k = 1; k <= segments; ++k) w[k] = w[k - 1] + sd * rng.normal();
  }

  template <class Drift>
  void side_points(const RandomStream& side_stream, const std::vector<double>& w, std::size_t segments,
                   double sign, double floor, Drift&& drift, std::vector<double>& vs,
                   std::vector<double>& ls) const {
    const double h = config_.skeleton_step;
    vs.clear();
    ls.clear();
    vs.push_back(0.0);
    ls.push_back(drift(0.0));
    for (std::size_t k = 0; k < segments; ++k) {
      const double s0 = static_cast<double>(k) * h;
      const double s1 = static_cast<double>(k + 1) * h;
      const double l0 = w[k] + drift(sign * s0);
      const double l1 = w[k + 1] + drift(sign * s1);
      if (std::max(l0, l1) >= floor) {
        const bool near_zero = s1 <= config_.refine_radius + 1e-12;
        const BridgeCoefficients& bc = (config_.refine_near_zero && near_zero) ? fine_ : coarse_;
        RandomStream rng = side_stream.derive(k + 1);
        const double delta = h / bc.substeps;
        double x = w[k];
        for (std::size_t j = 0; j < bc.pull.size(); ++j) {
          x += (w[k + 1] - x) * bc.pull[j] + bc.spread[j] * rng.normal();
          const double s = s0 + static_cast<double>(j + 1) * delta;
          vs.push_back(sign * s);
          ls.push_back(x + drift(sign * s));
        }
      }
      vs.push_back(sign * s1);
      ls.push_back(l1);
    }
  }

  LimitPathConfig config_;
  BridgeCoefficients coarse_;
  BridgeCoefficients fine_;
  std::vector<double> pos_w_, neg_w_, side_v_, side_l_;
};

/// One draw of ln Z*_u(v) = W(v) − |v−u|/2 + u/2 with a two-sided Wiener process W.
inline WienerLrPath simulate_wiener_lr(const LimitPathConfig& config, const RandomStream& stream,
                                       PathWindow window = {}) {
  WienerPathSampler sampler(config);
  return sampler.simulate(stream, window);
}

struct PathMaximum {
  double location = 0.0;
  double value = 0.0;
};

/// Grid argmax of ln Z on v >= lower. Ties go to the smallest |v|, then to the negative side.
inline PathMaximum path_argmax(const WienerLrPath& path, double lower = -std::numeric_limits<double>::infinity()) {
  PathMaximum best{0.0, -std::numeric_limits<double>::infinity()};
  for (std::size_t i = 0; i < path.grid.size(); ++i) {
    const double v = path.grid[i];
    if (v < lower) continue;
    const double l = path.logz[i];
    if (l > best.value ||
        (l == best.value && (std::abs(v) < std::abs(best.location) ||
                             (std::abs(v) == std::abs(best.location) && v < best.location)))) {
      best = {v, l};
    }
  }
  return best;
}

struct PathIntegrals {
  double log_mass = 0.0;     ///< ln ∫ Z(v) dv over the window
  double mean = 0.0;         ///< ∫ v Z / ∫ Z over the window
  double edge_weight = 0.0;  ///< Z at the far end of the grid relative to ∫ Z
};

/// Trapezoid integrals of Z and v·Z on v >= lower.
inline PathIntegrals path_integrals(const WienerLrPath& path, double lower = -std::numeric_limits<double>::infinity()) {
  std::size_t first = 0;
  while (first < path.grid.size() && path.grid[first] < lower) ++first;
  if (first + 1 >= path.grid.size()) throw DomainError("path_integrals: window holds fewer than two grid points");
  double peak = -std::numeric_limits<double>::infinity();
  for (std::size_t i = first; i < path.grid.size(); ++i) peak = std::max(peak, path.logz[i]);
  double mass = 0.0;
  double moment = 0.0;
  double prev_v = path.grid[first];
  double prev_z = std::exp(path.logz[first] - peak);
  for (std::size_t i = first + 1; i < path.grid.size(); ++i) {
    const double v = path.grid[i];
    const double z = std::exp(path.logz[i] - peak);
    const double dv = v - prev_v;
    mass += 0.5 * (prev_z + z) * dv;
    moment += 0.5 * (prev_v * prev_z + v * z) * dv;
    prev_v = v;
    prev_z = z;
  }
  return {peak + std::log(mass), moment / mass, prev_z / mass};
}

/// Statistics of the restriction of Z*_u to v > 0.
struct PositiveSideStatistics {
  double xi_plus = 0.0;    ///< argmax over v > 0
  double zeta_plus = 0.0;  ///< ∫ v Z / ∫ Z over v > 0
  double sup_log = 0.0;    ///< sup over v > 0 of ln Z
  double log_mass = 0.0;   ///< ln ∫_0^∞ Z
};

inline PositiveSideStatistics positive_side_statistics(const WienerLrPath& path) {
  const PathMaximum m = path_argmax(path, 0.0);
  const PathIntegrals in = path_integrals(path, 0.0);
  return {m.location, in.mean, m.value, in.log_mass};
}

/// ξ* = argmax of Z* over the real line.
inline double sample_xi_star(const LimitPathConfig& config, const RandomStream& stream) {
  config.require_statistic_radius();
  return path_argmax(simulate_wiener_lr(config, stream)).location;
}

/// ζ* = ∫ v Z*(v) dv / ∫ Z*(v) dv.
inline double sample_zeta_star(const LimitPathConfig& config, const RandomStream& stream) {
  config.require_statistic_radius();
  return path_integrals(simulate_wiener_lr(config, stream)).mean;
}

/// ξ*_{u,+}: argmax over v > 0 of Z*_u (u = 0 gives ξ₊*).
inline double sample_xi_plus(double u_shift, const LimitPathConfig& config, const RandomStream& stream) {
  config.require_statistic_radius();
  return path_argmax(simulate_wiener_lr(config, stream, {0.0, u_shift}), 0.0).location;
}

/// ζ*_{u,+}: ratio of integrals of Z*_u over v > 0 (u = 0 gives ζ₊*).
inline double sample_zeta_plus(double u_shift, const LimitPathConfig& config, const RandomStream& stream) {
  config.require_statistic_radius();
  return path_integrals(simulate_wiener_lr(config, stream, {0.0, u_shift}), 0.0).mean;
}

/// ξ*_u: argmax of the null process Z* over v > −u.
inline double sample_xi_null_above(double u, const LimitPathConfig& config, const RandomStream& stream) {
  config.require_statistic_radius();
  return path_argmax(simulate_wiener_lr(config, stream, {-u, 0.0}), -u).location;
}

/// sup over v > 0 of ln Z*(v); Exp(1)-distributed in the continuum limit.
inline double sup_logz_positive(const LimitPathConfig& config, const RandomStream& stream) {
  config.validate();
  return path_argmax(simulate_wiener_lr(config, stream, {0.0, 0.0}), 0.0).value;
}

/// Density of ξ₊*: f(t) = (2πt)^{-1/2} e^{-t/8} − Φ(−√t/2)/2.
inline double xi_plus_density(double t) {
  if (!(t > 0.0)) throw DomainError("xi_plus_density: t must be positive");
  const double value = std::exp(-t / 8.0) / std::sqrt(2.0 * std::numbers::pi * t) - 0.5 * normal_cdf(-0.5 * std::sqrt(t));
  return std::max(value, 0.0);
}

/// Log-Poisson limit: ln Z*_ρ(v) = ρY⁺(v) − v for v >= 0 and
/// −ρY⁻((−v)−) − v for v < 0, with independent Poisson processes Y± of
/// intensities 1/(e^ρ − 1) and 1/(1 − e^{−ρ}) on [0, radius].
struct PoissonLrPath {
  double rho = 0.0;
  double psi_theta = 0.0;
  double jump = 0.0;
  double radius = 0.0;
  std::vector<double> plus_jumps;
  std::vector<double> minus_jumps;

  double log_z_star(double v) const {
    if (std::abs(v) > radius) throw DomainError("log_z_star: |v| beyond the simulated radius");
    if (v >= 0.0) {
      const auto count = std::upper_bound(plus_jumps.begin(), plus_jumps.end(), v) - plus_jumps.begin();
      return rho * static_cast<double>(count) - v;
    }
    const auto count = std::lower_bound(minus_jumps.begin(), minus_jumps.end(), -v) - minus_jumps.begin();
    return -rho * static_cast<double>(count) - v;
  }

  /// ln Z_θ(u) through Z_θ(u) = Z*_ρ(−r u), taking the left limit in v when r > 0
  /// so the result is càdlàg in u.
  double log_z_theta(double u) const {
    const double v = -jump * u;
    if (std::abs(v) > radius) throw DomainError("log_z_theta: |r u| beyond the simulated radius");
    if (jump < 0.0) return log_z_star(v);
    if (v <= 0.0) {
      const auto count = std::upper_bound(minus_jumps.begin(), minus_jumps.end(), -v) - minus_jumps.begin();
      return -rho * static_cast<double>(count) - v;
    }
    const auto count = std::lower_bound(plus_jumps.begin(), plus_jumps.end(), v) - plus_jumps.begin();
    return rho * static_cast<double>(count) - v;
  }
};

inline PoissonLrPath simulate_poisson_lr(double psi_theta, double jump, const LimitPathConfig& config,
                                         const RandomStream& stream) {
  if (jump == 0.0) throw DomainError("simulate_poisson_lr: the log-Poisson limit needs r != 0");
  if (!(psi_theta > 0.0 && psi_theta + jump > 0.0)) throw ModelInvalid("intensity must stay positive");
  if (!(config.radius > 0.0)) throw DomainError("path radius must be positive");
  PoissonLrPath path;
  path.rho = std::abs(std::log(psi_theta / (psi_theta + jump)));
  path.psi_theta = psi_theta;
  path.jump = jump;
  path.radius = config.radius;
  auto arrivals = [&](RandomStream rng, double rate, std::vector<double>& out) {
    double t = 0.0;
    for (;;) {
      t += rng.exponential(rate);
      if (t > config.radius) break;
      out.push_back(t);
    }
  };
  arrivals(stream.derive(1), 1.0 / std::expm1(path.rho), path.plus_jumps);
  arrivals(stream.derive(2), 1.0 / -std::expm1(-path.rho), path.minus_jumps);
  return path;
}

}  // namespace cplab
