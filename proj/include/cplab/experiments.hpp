#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "cplab/errors.hpp"
#include "cplab/estimators.hpp"
#include "cplab/hypothesis_tests.hpp"
#include "cplab/likelihood.hpp"
#include "cplab/limit_processes.hpp"
#include "cplab/numerics/parallel.hpp"
#include "cplab/numerics/random.hpp"
#include "cplab/numerics/sample_stats.hpp"
#include "cplab/process_model.hpp"

namespace cplab {

inline constexpr std::string_view kVersion = "0.1.0";

/// Everything an experiment needs. Testing uses Θ = [theta, theta_max] with
/// θ1 = theta; estimator risk uses Θ = [theta_min, theta_max] with true θ = theta.
struct ExperimentConfig {
  Baseline baseline = Baseline::constant(1.5);
  double jump_scale = 1.0;
  double jump_exponent = 0.25;
  double theta = 2.0;
  double tau = 4.0;
  double theta_min = 0.0;
  double theta_max = 4.0;
  std::vector<std::size_t> n_list{100, 400, 1600};
  std::vector<double> u_grid = default_u_grid();
  std::vector<double> epsilon_list{0.05};
  std::size_t replicates = 1000;
  std::uint64_t seed = 1;
  std::size_t mc_paths = 100'000;
  LimitPathConfig path;

  static std::vector<double> default_u_grid() {
    std::vector<double> g;
    for (int u = 0; u <= 20; ++u) g.push_back(u);
    return g;
  }

  JumpSchedule schedule() const { return JumpSchedule(jump_scale, jump_exponent); }

  ChangePointFamily family(std::size_t n, Interval domain) const {
    return ChangePointFamily(baseline, schedule().jump_at(n), tau, domain);
  }

  Interval risk_domain() const { return {theta_min, theta_max}; }
  Interval testing_domain() const { return {theta, theta_max}; }

  void validate() const {
    if (replicates < 100) throw ConfigError("replicates must be at least 100");
    if (n_list.empty()) throw ConfigError("n_list is empty");
    for (auto n : n_list) {
      if (n == 0) throw ConfigError("n_list entries must be positive");
    }
    for (double u : u_grid) {
      if (!(u >= 0.0)) throw ConfigError("u_grid must be nonnegative");
    }
    for (double e : epsilon_list) check_epsilon(e);
    if (!(theta_min <= theta && theta < theta_max)) throw ConfigError("need theta_min <= theta < theta_max");
    (void)schedule();
    (void)family(n_list.front(), risk_domain());
    path.validate();
  }
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = s.find(sep, start);
    auto piece = trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (!piece.empty()) out.push_back(std::move(piece));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace detail

inline double parse_double(std::string_view text, std::string_view what) {
  const std::string s = detail::trim(text);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
    throw ConfigError("bad number '" + s + "' for " + std::string(what));
  }
  return value;
}

inline std::uint64_t parse_uint(std::string_view text, std::string_view what) {
  const std::string s = detail::trim(text);
  std::uint64_t value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
    // Accept integral values written like 1e6.
    const double d = parse_double(s, what);
    if (!(d >= 0.0 && d == std::floor(d) && d < 1.8e19)) {
      throw ConfigError("bad count '" + s + "' for " + std::string(what));
    }
    return static_cast<std::uint64_t>(d);
  }
  return value;
}

inline std::vector<double> parse_double_list(std::string_view text, std::string_view what) {
  std::vector<double> out;
  for (const auto& item : detail::split(text, ',')) out.push_back(parse_double(item, what));
  return out;
}

/// "1.5" or a breakpoint list "t0:v0, t1:v1, ...".
inline Baseline parse_baseline(std::string_view text) {
  if (text.find(':') == std::string_view::npos) return Baseline::constant(parse_double(text, "baseline"));
  std::vector<double> knots, values;
  for (const auto& item : detail::split(text, ',')) {
    const auto parts = detail::split(item, ':');
    if (parts.size() != 2) throw ConfigError("baseline breakpoints must look like t:value");
    knots.push_back(parse_double(parts[0], "baseline knot"));
    values.push_back(parse_double(parts[1], "baseline value"));
  }
  try {
    return Baseline::table(PiecewiseLinear(std::move(knots), std::move(values)));
  } catch (const ModelInvalid& e) {
    throw ConfigError(std::string("baseline: ") + e.what());
  }
}

inline void apply_config_entry(ExperimentConfig& c, const std::string& key, const std::string& value) {
  auto num = [&] { return parse_double(value, key); };
  auto count = [&] { return static_cast<std::size_t>(parse_uint(value, key)); };
  if (key == "baseline") c.baseline = parse_baseline(value);
  else if (key == "jump_scale") c.jump_scale = num();
  else if (key == "jump_exponent") c.jump_exponent = num();
  else if (key == "theta") c.theta = num();
  else if (key == "tau") c.tau = num();
  else if (key == "theta_min") c.theta_min = num();
  else if (key == "theta_max") c.theta_max = num();
  else if (key == "n_list") {
    c.n_list.clear();
    for (const auto& item : detail::split(value, ',')) c.n_list.push_back(parse_uint(item, key));
  } else if (key == "u_grid") c.u_grid = parse_double_list(value, key);
  else if (key == "epsilon_list") c.epsilon_list = parse_double_list(value, key);
  else if (key == "replicates") c.replicates = count();
  else if (key == "seed") c.seed = parse_uint(value, key);
  else if (key == "mc_paths") c.mc_paths = count();
  else if (key == "path_step") c.path.step = num();
  else if (key == "path_radius") c.path.radius = num();
  else if (key == "path_skeleton_step") c.path.skeleton_step = num();
  else if (key == "path_relevance_window") c.path.relevance_window = num();
  else if (key == "path_refine_near_zero") {
    if (value == "true" || value == "1") c.path.refine_near_zero = true;
    else if (value == "false" || value == "0") c.path.refine_near_zero = false;
    else throw ConfigError("path_refine_near_zero must be true or false");
  } else if (key == "path_refine_radius") c.path.refine_radius = num();
  else if (key == "path_refine_factor") c.path.refine_factor = static_cast<int>(count());
  else throw ConfigError("unknown config key '" + key + "'");
}

/// Flat `key = value` text; `#` starts a comment.
inline ExperimentConfig parse_config(std::istream& in, ExperimentConfig base = {}) {
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    apply_config_entry(base, detail::trim(std::string_view(t).substr(0, eq)),
                       detail::trim(std::string_view(t).substr(eq + 1)));
  }
  return base;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(in);
}

/// Round-trippable text form; also the input of the config hash.
inline std::string canonical(const ExperimentConfig& c) {
  std::ostringstream os;
  auto g = [](double x) { return format_double(x, 17); };
  os << "baseline=";
  if (c.baseline.is_constant()) {
    os << g(c.baseline.constant_value());
  } else {
    const auto* t = c.baseline.table_ptr();
    for (std::size_t i = 0; i < t->knots().size(); ++i) {
      os << (i ? "," : "") << g(t->knots()[i]) << ':' << g(t->values()[i]);
    }
  }
  os << "\njump_scale=" << g(c.jump_scale) << "\njump_exponent=" << g(c.jump_exponent) << "\ntheta=" << g(c.theta)
     << "\ntau=" << g(c.tau) << "\ntheta_min=" << g(c.theta_min) << "\ntheta_max=" << g(c.theta_max) << "\nn_list=";
  for (std::size_t i = 0; i < c.n_list.size(); ++i) os << (i ? "," : "") << c.n_list[i];
  os << "\nu_grid=";
  for (std::size_t i = 0; i < c.u_grid.size(); ++i) os << (i ? "," : "") << g(c.u_grid[i]);
  os << "\nepsilon_list=";
  for (std::size_t i = 0; i < c.epsilon_list.size(); ++i) os << (i ? "," : "") << g(c.epsilon_list[i]);
  os << "\nreplicates=" << c.replicates << "\nseed=" << c.seed << "\nmc_paths=" << c.mc_paths
     << "\npath_step=" << g(c.path.step) << "\npath_radius=" << g(c.path.radius)
     << "\npath_skeleton_step=" << g(c.path.skeleton_step) << "\npath_relevance_window=" << g(c.path.relevance_window)
     << "\npath_refine_near_zero=" << (c.path.refine_near_zero ? "true" : "false")
     << "\npath_refine_radius=" << g(c.path.refine_radius) << "\npath_refine_factor=" << c.path.refine_factor << '\n';
  return os.str();
}

inline std::uint64_t fnv1a64(std::string_view data) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : data) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Comment line that heads every CSV written by the tools.
inline std::string csv_header_comment(std::string_view config_text, std::uint64_t seed) {
  char buf[128];
  std::snprintf(buf, sizeof buf, "# cplab %s config_hash=%016llx seed=%llu\n", std::string(kVersion).c_str(),
                static_cast<unsigned long long>(fnv1a64(config_text)), static_cast<unsigned long long>(seed));
  return buf;
}

// ---------------------------------------------------------------- power

struct PowerPoint {
  double u = 0.0;
  double power = 0.0;
  double se = 0.0;
  std::size_t replicates = 0;
  bool saturated = false;  ///< θ1 + uφ* reached τ, so the alternative carries no jump
};

struct PowerCurve {
  TestKind kind = TestKind::GLRT;
  std::optional<std::size_t> n;  ///< empty for the limiting experiment
  double epsilon = 0.05;
  std::vector<PowerPoint> points;
};

namespace detail {

inline std::vector<PowerCurve> assemble_curves(const std::vector<TestSpec>& specs, std::optional<std::size_t> n,
                                               const std::vector<double>& u_grid,
                                               const std::vector<std::vector<std::uint8_t>>& rejects,
                                               const std::vector<bool>& saturated) {
  std::vector<PowerCurve> curves;
  const std::size_t reps = rejects.size();
  for (std::size_t s = 0; s < specs.size(); ++s) {
    PowerCurve c{specs[s].kind, n, specs[s].epsilon, {}};
    for (std::size_t j = 0; j < u_grid.size(); ++j) {
      std::size_t hits = 0;
      for (const auto& r : rejects) hits += r[j * specs.size() + s];
      const MeanEstimate p = proportion(hits, reps);
      c.points.push_back({u_grid[j], p.mean, p.se, reps, saturated[j]});
    }
    curves.push_back(std::move(c));
  }
  return curves;
}

}  // namespace detail

/// Power of several tests at finite n under θ_u = θ1 + uφ*_n.
///
/// Replicate i uses stream.derive(i) for every u and every test (common random
/// numbers), so power differences across u and across tests are not blurred by
/// independent noise. Alternatives beyond τ are held at θ = τ and flagged.
inline std::vector<PowerCurve> power_curves(const std::vector<TestSpec>& specs, std::size_t n,
                                            const ExperimentConfig& config, const ThresholdTable& thresholds,
                                            const RandomStream& stream, unsigned threads = 1) {
  config.validate();
  std::vector<double> cut;
  for (const auto& s : specs) {
    s.validate();
    cut.push_back(threshold_for(s, thresholds));
  }
  const double theta1 = config.theta;
  const ChangePointFamily family = config.family(n, config.testing_domain());
  const ChangePointFamily sampling = family.with_domain({theta1, config.tau});
  const Prior prior = specs.empty() ? Prior::uniform() : specs.front().prior;
  const OneSidedProblem problem = make_one_sided_problem(family, theta1, n, config.schedule(), prior);
  std::vector<IntensityModel> models;
  std::vector<bool> saturated;
  for (double u : config.u_grid) {
    const double target = theta1 + u * problem.phi_star;
    saturated.push_back(target >= config.tau);
    models.emplace_back(sampling, std::min(target, config.tau));
  }
  auto rejects = parallel_map(config.replicates, threads, [&](std::size_t i) {
    std::vector<std::uint8_t> out(models.size() * specs.size());
    for (std::size_t j = 0; j < models.size(); ++j) {
      const PooledEvents events = pool(sample_observation_set(models[j], n, stream.derive(i)));
      const LogLikelihoodCurve curve = log_likelihood_curve(events, problem.family);
      TestStatistics st = compute_statistics(curve, problem);
      for (std::size_t s = 0; s < specs.size(); ++s) {
        if (specs[s].u1) st.np_log = np_log_statistic(curve, problem, *specs[s].u1);
        out[j * specs.size() + s] = decide(specs[s].kind, st, cut[s]) == Decision::AcceptH2;
      }
    }
    return out;
  });
  return detail::assemble_curves(specs, n, config.u_grid, rejects, saturated);
}

/// Limiting power: the statistics of Z*_u(v) = exp(W(v) − |v − u|/2 + u/2) on v > 0.
/// GLRT: sup ln Z*_u > ln h; WT: argmax > m; BT1: ζ > k; BT2: ∫Z*_u > g;
/// NPT: ln Z*_u(u1) > ln d, with ln Z*_u(u1) interpolated on the grid.
inline std::vector<PowerCurve> limit_power_curves(const std::vector<TestSpec>& specs, const ExperimentConfig& config,
                                                  const ThresholdTable& thresholds, const RandomStream& stream,
                                                  unsigned threads = 1) {
  config.validate();
  config.path.require_statistic_radius();
  std::vector<double> cut;
  for (const auto& s : specs) {
    s.validate();
    cut.push_back(threshold_for(s, thresholds));
  }
  for (double u : config.u_grid) {
    if (u > 0.5 * config.path.radius) throw DomainError("u_grid exceeds half the limit-path radius");
  }
  for (const auto& s : specs) {
    if (s.u1 && *s.u1 > config.path.radius) throw DomainError("u1 exceeds the limit-path radius");
  }
  const std::size_t nu = config.u_grid.size();
  auto rejects = parallel_map(config.replicates, threads, [&](std::size_t i) {
    WienerPathSampler sampler(config.path);
    WienerLrPath path;
    std::vector<std::uint8_t> out(nu * specs.size());
    for (std::size_t j = 0; j < nu; ++j) {
      sampler.simulate(stream.derive(i), {0.0, config.u_grid[j]}, path);
      const PathMaximum mx = path_argmax(path, 0.0);
      const PathIntegrals in = path_integrals(path, 0.0);
      for (std::size_t s = 0; s < specs.size(); ++s) {
        bool reject = false;
        switch (specs[s].kind) {
          case TestKind::GLRT: reject = mx.value > std::log(cut[s]); break;
          case TestKind::WT: reject = mx.location > cut[s]; break;
          case TestKind::BT1: reject = in.mean > cut[s]; break;
          case TestKind::BT2: reject = in.log_mass > std::log(cut[s]); break;
          case TestKind::NPT: {
            const double v = *specs[s].u1;
            auto it = std::lower_bound(path.grid.begin(), path.grid.end(), v);
            const auto k = static_cast<std::size_t>(it - path.grid.begin());
            double l = path.logz[k];
            if (path.grid[k] != v) {
              const double w = (v - path.grid[k - 1]) / (path.grid[k] - path.grid[k - 1]);
              l = path.logz[k - 1] + w * (path.logz[k] - path.logz[k - 1]);
            }
            reject = l > std::log(cut[s]);
            break;
          }
        }
        out[j * specs.size() + s] = reject;
      }
    }
    return out;
  });
  return detail::assemble_curves(specs, std::nullopt, config.u_grid, rejects, std::vector<bool>(nu, false));
}

inline PowerCurve power_curve(const TestSpec& spec, std::optional<std::size_t> n, const ExperimentConfig& config,
                              const ThresholdTable& thresholds, const RandomStream& stream, unsigned threads = 1) {
  auto curves = n ? power_curves({spec}, *n, config, thresholds, stream, threads)
                  : limit_power_curves({spec}, config, thresholds, stream, threads);
  return std::move(curves.front());
}

inline void write_power_csv(std::ostream& os, const std::vector<PowerCurve>& curves) {
  os << "test,n,u,power,se,reps\n";
  for (const auto& c : curves) {
    for (const auto& p : c.points) {
      os << to_string(c.kind) << ',' << (c.n ? std::to_string(*c.n) : std::string("limit")) << ','
         << format_double(p.u) << ',' << format_double(p.power) << ',' << format_double(p.se) << ','
         << p.replicates << '\n';
    }
  }
}

// ---------------------------------------------------------------- estimator risk

/// φ_n^{-1}(θ̂ − θ) and φ_n^{-1}(θ̃ − θ) over replicates, φ_n = rates(n).phi.
struct ScaledErrors {
  std::vector<double> mle;
  std::vector<double> bayes;
};

inline ScaledErrors scaled_errors(std::size_t n, const ExperimentConfig& config, const RandomStream& stream,
                                  unsigned threads = 1, const Prior& prior = Prior::uniform()) {
  config.validate();
  const ChangePointFamily family = config.family(n, config.risk_domain());
  const IntensityModel model(family, config.theta);
  const double phi = rates(n, config.schedule(), family.psi(config.theta)).phi;
  auto pairs = parallel_map(config.replicates, threads, [&](std::size_t i) {
    const PooledEvents events = pool(sample_observation_set(model, n, stream.derive(i)));
    const LogLikelihoodCurve curve = log_likelihood_curve(events, family);
    const double hat = mle(curve).theta_hat;
    const double tilde = bayes(curve, prior, family.theta_domain()).theta_tilde;
    return std::array<double, 2>{(hat - config.theta) / phi, (tilde - config.theta) / phi};
  });
  ScaledErrors out;
  for (const auto& p : pairs) {
    out.mle.push_back(p[0]);
    out.bayes.push_back(p[1]);
  }
  return out;
}

struct RiskRow {
  std::size_t n = 0;
  std::string estimator;
  int p = 1;
  double scaled_moment = 0.0;
  double se = 0.0;
};

inline MeanEstimate absolute_moment(const std::vector<double>& xs, int p) {
  std::vector<double> powered;
  powered.reserve(xs.size());
  for (double x : xs) powered.push_back(std::pow(std::abs(x), p));
  return mean_and_se(powered);
}

/// E|φ_n^{-1}(θ̂ − θ)|^p and E|φ_n^{-1}(θ̃ − θ)|^p, p = 1, 2, for each n in the config.
/// Sample size n draws from stream.derive(n).
inline std::vector<RiskRow> estimator_risk(const ExperimentConfig& config, const RandomStream& stream,
                                           unsigned threads = 1) {
  std::vector<RiskRow> rows;
  for (std::size_t n : config.n_list) {
    const ScaledErrors e = scaled_errors(n, config, stream.derive(n), threads);
    for (const auto& [name, xs] : {std::pair{"mle", &e.mle}, std::pair{"bayes", &e.bayes}}) {
      for (int p : {1, 2}) {
        const MeanEstimate m = absolute_moment(*xs, p);
        rows.push_back({n, name, p, m.mean, m.se});
      }
    }
  }
  return rows;
}

inline void write_risk_csv(std::ostream& os, const std::vector<RiskRow>& rows) {
  os << "n,estimator,p,scaled_moment,se\n";
  for (const auto& r : rows) {
    os << r.n << ',' << r.estimator << ',' << r.p << ',' << format_double(r.scaled_moment) << ','
       << format_double(r.se) << '\n';
  }
}

// ---------------------------------------------------------------- limit statistics

enum class LimitStatistic { Xi, Zeta, XiPlus, ZetaPlus };

inline std::string_view to_string(LimitStatistic s) noexcept {
  switch (s) {
    case LimitStatistic::Xi: return "xi";
    case LimitStatistic::Zeta: return "zeta";
    case LimitStatistic::XiPlus: return "xi_plus";
    case LimitStatistic::ZetaPlus: return "zeta_plus";
  }
  return "?";
}

inline LimitStatistic parse_limit_statistic(std::string_view name) {
  for (auto s : {LimitStatistic::Xi, LimitStatistic::Zeta, LimitStatistic::XiPlus, LimitStatistic::ZetaPlus}) {
    if (name == to_string(s)) return s;
  }
  throw ConfigError("unknown limit statistic '" + std::string(name) + "'");
}

/// Draws of ξ*, ζ*, ξ₊*, ζ₊*. Path i comes from stream.derive(i); two-sided and
/// one-sided statistics of the same path index share the positive half of W.
struct LimitSample {
  std::vector<double> xi, zeta, xi_plus, zeta_plus;
};

inline LimitSample sample_limit_statistics(std::size_t paths, const LimitPathConfig& config, const RandomStream& stream,
                                           unsigned threads = 1, bool two_sided = true, bool one_sided = true) {
  config.require_statistic_radius();
  auto draws = parallel_map(paths, threads, [&](std::size_t i) {
    WienerPathSampler sampler(config);
    std::array<double, 4> out{};
    if (two_sided) {
      const WienerLrPath p = sampler.simulate(stream.derive(i));
      out[0] = path_argmax(p).location;
      out[1] = path_integrals(p).mean;
    }
    if (one_sided) {
      const WienerLrPath p = sampler.simulate(stream.derive(i), {0.0, 0.0});
      out[2] = path_argmax(p, 0.0).location;
      out[3] = path_integrals(p, 0.0).mean;
    }
    return out;
  });
  LimitSample s;
  for (const auto& d : draws) {
    if (two_sided) {
      s.xi.push_back(d[0]);
      s.zeta.push_back(d[1]);
    }
    if (one_sided) {
      s.xi_plus.push_back(d[2]);
      s.zeta_plus.push_back(d[3]);
    }
  }
  return s;
}

struct HistogramBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
  double density = 0.0;
};

/// Equal-width histogram over [lo, hi); values outside are counted in the
/// normalization but not binned.
inline std::vector<HistogramBin> histogram(const std::vector<double>& xs, double lo, double hi, std::size_t bins) {
  if (!(hi > lo) || bins == 0) throw DomainError("histogram: bad range or bin count");
  std::vector<HistogramBin> out(bins);
  const double width = (hi - lo) / static_cast<double>(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    out[b].lo = lo + width * static_cast<double>(b);
    out[b].hi = lo + width * static_cast<double>(b + 1);
  }
  for (double x : xs) {
    if (x < lo || x >= hi) continue;
    auto b = static_cast<std::size_t>((x - lo) / width);
    out[std::min(b, bins - 1)].count++;
  }
  for (auto& bin : out) bin.density = static_cast<double>(bin.count) / (static_cast<double>(xs.size()) * width);
  return out;
}

}  // namespace cplab
