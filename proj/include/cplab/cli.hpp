#pragma once

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cplab/errors.hpp"
#include "cplab/estimators.hpp"
#include "cplab/experiments.hpp"
#include "cplab/hypothesis_tests.hpp"
#include "cplab/numerics/random.hpp"
#include "cplab/trajectory_io.hpp"

namespace cplab {

namespace detail {

/// Writes one named output either under --out or, without it, to stdout.
class OutputSink {
 public:
  OutputSink(std::optional<std::string> dir, std::ostream& fallback) : dir_(std::move(dir)), fallback_(fallback) {}

  void write(const std::string& name, const std::string& content) const {
    if (!dir_) {
      fallback_ << content;
      return;
    }
    std::filesystem::create_directories(*dir_);
    const auto path = std::filesystem::path(*dir_) / name;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot write '" + path.string() + "'");
    f << content;
  }

 private:
  std::optional<std::string> dir_;
  std::ostream& fallback_;
};

// Stream tags per subcommand, so outputs of different subcommands never share draws.
enum : std::uint64_t { kSimulate = 1, kThreshold = 2, kPower = 3, kLimits = 4, kRisk = 5 };

inline std::string join(const std::vector<double>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + format_double(xs[i], 17);
  return s;
}

}  // namespace detail

/// Entry point of the command-line tool. Returns 0 on success, 2 on usage,
/// configuration or domain errors, 3 on numeric failures.
inline int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Change-point detection for Poisson processes: simulation, estimation and tests"};
  app.require_subcommand(1);

  std::optional<std::uint64_t> seed;
  unsigned threads = 1;
  std::string config_file;
  std::optional<std::string> out_dir;
  app.add_option("--seed", seed, "Master seed (overrides the config)");
  app.add_option("--threads", threads, "Worker threads")->check(CLI::Range(1u, 1024u));
  app.add_option("--config", config_file, "Flat key = value config file");
  app.add_option("--out", out_dir, "Output directory (default: stdout)");

  auto* simulate = app.add_subcommand("simulate", "Sample an observation set as trajectory CSV");
  std::optional<std::size_t> sim_n;
  std::optional<double> sim_theta;
  simulate->add_option("--n", sim_n, "Number of trajectories (default: first of n_list)");
  simulate->add_option("--theta", sim_theta, "Change point (default: config theta)");

  auto* estimate = app.add_subcommand("estimate", "MLE and Bayes estimates for a trajectory CSV");
  std::string data_file;
  estimate->add_option("--data", data_file, "Trajectory CSV")->required();

  auto* threshold = app.add_subcommand("threshold", "Threshold table for GLRT, WT, BT1 and BT2");
  std::vector<double> thr_eps;
  std::optional<std::size_t> thr_paths;
  threshold->add_option("--eps", thr_eps, "Levels (default: epsilon_list)")->delimiter(',');
  threshold->add_option("--paths", thr_paths, "Limit paths for k and g (default: mc_paths)");

  auto* power = app.add_subcommand("power", "Power curves at finite n or in the limit");
  std::vector<std::string> pw_tests{"glrt", "wt", "bt1"};
  std::string pw_n = "100";
  std::vector<double> pw_eps;
  std::optional<double> pw_u1;
  std::optional<std::size_t> pw_paths, pw_reps;
  power->add_option("--test", pw_tests, "glrt, wt, bt1, bt2, npt")->delimiter(',');
  power->add_option("--n", pw_n, "Sample size or 'limit'");
  power->add_option("--eps", pw_eps, "Levels (default: epsilon_list)")->delimiter(',');
  power->add_option("--u1", pw_u1, "Alternative of the Neyman-Pearson test");
  power->add_option("--threshold-paths", pw_paths, "Limit paths for k and g (default: mc_paths)");
  power->add_option("--replicates", pw_reps, "Replicates per u (default: config)");

  auto* limits = app.add_subcommand("limits", "Sample the limiting estimator statistics");
  std::vector<std::string> lim_stats{"xi", "zeta", "xi_plus", "zeta_plus"};
  std::optional<std::size_t> lim_paths;
  std::size_t lim_bins = 60;
  limits->add_option("--statistic", lim_stats, "xi, zeta, xi_plus, zeta_plus")->delimiter(',');
  limits->add_option("--paths", lim_paths, "Paths (default: replicates)");
  limits->add_option("--bins", lim_bins, "Histogram bins")->check(CLI::Range(std::size_t{1}, std::size_t{100000}));

  auto* risk = app.add_subcommand("risk", "Scaled moments of the MLE and the Bayes estimator");
  std::optional<std::size_t> risk_reps;
  risk->add_option("--replicates", risk_reps, "Replicates per n (default: config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? 0 : 2;
  }

  try {
    ExperimentConfig config = config_file.empty() ? ExperimentConfig{} : load_config(config_file);
    if (seed) config.seed = *seed;
    const RandomStream master(config.seed);
    const detail::OutputSink sink(out_dir, out);
    const std::string base = canonical(config);

    if (simulate->parsed()) {
      const std::size_t n = sim_n.value_or(config.n_list.front());
      const double theta = sim_theta.value_or(config.theta);
      const ChangePointFamily family = config.family(n, config.risk_domain());
      const IntensityModel model(family, theta);
      const ObservationSet obs = sample_observation_set(model, n, master.derive(detail::kSimulate));
      const std::string hash_input = base + "cmd=simulate n=" + std::to_string(n) + " theta=" + format_double(theta, 17);
      std::ostringstream os;
      os << csv_header_comment(hash_input, config.seed);
      std::map<std::string, std::string> meta{{"theta", format_double(theta, 17)},
                                              {"jump", format_double(family.jump(), 17)}};
      if (config.baseline.is_constant()) meta["baseline"] = format_double(config.baseline.constant_value(), 17);
      write_trajectories_csv(os, obs, meta);
      sink.write("trajectories.csv", os.str());
    } else if (estimate->parsed()) {
      std::ifstream in(data_file);
      if (!in) throw ConfigError("cannot open data file '" + data_file + "'");
      const TrajectoryFile file = read_trajectories_csv(in);
      const ObservationSet& obs = file.observations;
      if (std::abs(obs.tau() - config.tau) > 1e-12 * config.tau) throw ConfigError("data tau differs from config tau");
      const auto jump_it = file.metadata.find("jump");
      const double jump = jump_it != file.metadata.end() ? parse_double(jump_it->second, "jump")
                                                         : config.schedule().jump_at(obs.n());
      const ChangePointFamily family(config.baseline, jump, config.tau, config.risk_domain());
      const PooledEvents events = pool(obs);
      const LogLikelihoodCurve curve = log_likelihood_curve(events, family);
      const MleResult m = mle(curve);
      const BayesResult b = bayes(curve, Prior::uniform(), family.theta_domain());
      static constexpr const char* kSides[] = {"left_limit", "right_limit", "interior"};
      nlohmann::ordered_json j;
      j["n"] = obs.n();
      j["tau"] = obs.tau();
      j["jump"] = jump;
      j["theta_domain"] = {family.theta_domain().lo, family.theta_domain().hi};
      j["total_events"] = events.times.size();
      j["mle"] = {{"theta_hat", m.theta_hat},
                  {"attained_side", kSides[static_cast<int>(m.attained_side)]},
                  {"max_loglik", m.max_loglik},
                  {"candidate_count", m.candidate_count}};
      j["bayes"] = {{"prior", "uniform"}, {"theta_tilde", b.theta_tilde}, {"log_normalizer", b.log_normalizer}};
      sink.write("estimate.json", j.dump(2) + "\n");
    } else if (threshold->parsed()) {
      ThresholdMc mc;
      mc.paths = thr_paths.value_or(config.mc_paths);
      mc.threads = threads;
      const std::vector<double> eps = thr_eps.empty() ? config.epsilon_list : thr_eps;
      for (double e : eps) check_epsilon(e);
      const ThresholdTable table = build_threshold_table(eps, mc, master.derive(detail::kThreshold));
      std::ostringstream os;
      os << csv_header_comment(base + "cmd=threshold eps=" + detail::join(eps) + " paths=" + std::to_string(mc.paths),
                               config.seed);
      table.write_csv(os);
      sink.write("thresholds.csv", os.str());
    } else if (power->parsed()) {
      if (pw_reps) config.replicates = *pw_reps;
      const std::vector<double> eps = pw_eps.empty() ? config.epsilon_list : pw_eps;
      std::optional<std::size_t> n;
      if (pw_n != "limit") n = static_cast<std::size_t>(parse_uint(pw_n, "--n"));
      std::vector<TestKind> kinds;
      for (const auto& t : pw_tests) kinds.push_back(parse_test_kind(t));
      const bool need_mc = std::any_of(kinds.begin(), kinds.end(),
                                       [](TestKind k) { return k == TestKind::BT1 || k == TestKind::BT2; });
      ThresholdMc mc;
      mc.paths = need_mc ? pw_paths.value_or(config.mc_paths) : 0;
      mc.threads = threads;
      mc.bootstrap_resamples = 0;
      ThresholdTable table;
      if (need_mc) {
        table = build_threshold_table(eps, mc, master.derive(detail::kPower, 0));
      } else {
        for (double e : eps) table.rows.push_back({e, glrt_threshold(e), wt_threshold(e), 0.0, 0.0, 0.0, 0.0});
      }
      std::vector<TestSpec> specs;
      for (double e : eps) {
        for (TestKind k : kinds) {
          TestSpec s;
          s.kind = k;
          s.epsilon = e;
          s.theta1 = config.theta;
          if (k == TestKind::NPT) s.u1 = pw_u1;
          specs.push_back(s);
        }
      }
      const RandomStream reps = master.derive(detail::kPower, 1);
      const auto curves = n ? power_curves(specs, *n, config, table, reps, threads)
                            : limit_power_curves(specs, config, table, reps, threads);
      std::string args = "cmd=power n=" + pw_n + " eps=" + detail::join(eps) + " paths=" + std::to_string(mc.paths) +
                         " tests=";
      for (const auto& t : pw_tests) args += t + ";";
      if (pw_u1) args += " u1=" + format_double(*pw_u1, 17);
      std::ostringstream os;
      os << csv_header_comment(base + args, config.seed);
      for (const auto& c : curves) {
        for (const auto& p : c.points) {
          if (p.saturated) {
            os << "# saturated_from_u=" << format_double(p.u) << '\n';
            break;
          }
        }
        break;
      }
      write_power_csv(os, curves);
      sink.write("power.csv", os.str());
    } else if (limits->parsed()) {
      const std::size_t paths = lim_paths.value_or(config.replicates);
      std::vector<LimitStatistic> stats;
      for (const auto& s : lim_stats) stats.push_back(parse_limit_statistic(s));
      const bool two = std::any_of(stats.begin(), stats.end(), [](auto s) {
        return s == LimitStatistic::Xi || s == LimitStatistic::Zeta;
      });
      const bool one = std::any_of(stats.begin(), stats.end(), [](auto s) {
        return s == LimitStatistic::XiPlus || s == LimitStatistic::ZetaPlus;
      });
      const LimitSample sample = sample_limit_statistics(paths, config.path, master.derive(detail::kLimits), threads, two, one);
      std::string args = "cmd=limits paths=" + std::to_string(paths) + " bins=" + std::to_string(lim_bins) + " stats=";
      for (const auto& s : lim_stats) args += s + ";";
      const std::string header = csv_header_comment(base + args, config.seed);
      std::ostringstream values, hist;
      values << header << "statistic,value\n";
      hist << header << "statistic,bin_lo,bin_hi,count,density\n";
      for (LimitStatistic s : stats) {
        const std::vector<double>* xs = nullptr;
        double lo = -30.0;
        switch (s) {
          case LimitStatistic::Xi: xs = &sample.xi; break;
          case LimitStatistic::Zeta: xs = &sample.zeta; break;
          case LimitStatistic::XiPlus: xs = &sample.xi_plus; lo = 0.0; break;
          case LimitStatistic::ZetaPlus: xs = &sample.zeta_plus; lo = 0.0; break;
        }
        for (double x : *xs) values << to_string(s) << ',' << format_double(x, 17) << '\n';
        for (const auto& b : histogram(*xs, lo, 30.0, lim_bins)) {
          hist << to_string(s) << ',' << format_double(b.lo) << ',' << format_double(b.hi) << ',' << b.count << ','
               << format_double(b.density) << '\n';
        }
      }
      if (out_dir) {
        sink.write("limits.csv", values.str());
        sink.write("limits_histogram.csv", hist.str());
      } else {
        out << values.str() << hist.str();
      }
    } else if (risk->parsed()) {
      if (risk_reps) config.replicates = *risk_reps;
      const auto rows = estimator_risk(config, master.derive(detail::kRisk), threads);
      std::ostringstream os;
      os << csv_header_comment(canonical(config) + "cmd=risk", config.seed);
      write_risk_csv(os, rows);
      sink.write("risk.csv", os.str());
    }
    return 0;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return 3;
  } catch (const std::invalid_argument& e) {  // ConfigError, ModelInvalid
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::domain_error& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 3;
  }
}

}  // namespace cplab
