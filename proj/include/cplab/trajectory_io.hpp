#pragma once

#include <cstddef>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "cplab/errors.hpp"
#include "cplab/experiments.hpp"
#include "cplab/process_model.hpp"

namespace cplab {

/// Observation-set CSV: `# key=value ...` comment lines (n and tau are
/// required, since trajectories without events leave no rows), then
/// `trajectory_index,event_time` rows.
struct TrajectoryFile {
  ObservationSet observations;
  std::map<std::string, std::string> metadata;
};

inline void write_trajectories_csv(std::ostream& os, const ObservationSet& obs,
                                   const std::map<std::string, std::string>& metadata) {
  os << "# n=" << obs.n() << " tau=" << format_double(obs.tau(), 17);
  for (const auto& [k, v] : metadata) {
    if (k != "n" && k != "tau") os << ' ' << k << '=' << v;
  }
  os << "\ntrajectory_index,event_time\n";
  for (std::size_t j = 0; j < obs.n(); ++j) {
    for (double t : obs[j].events()) os << j << ',' << format_double(t, 17) << '\n';
  }
}

inline TrajectoryFile read_trajectories_csv(std::istream& is) {
  std::map<std::string, std::string> meta;
  std::vector<std::vector<double>> events;
  std::string line;
  bool header_seen = false;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream tokens(line.substr(1));
      std::string tok;
      while (tokens >> tok) {
        const auto eq = tok.find('=');
        if (eq != std::string::npos) meta[tok.substr(0, eq)] = tok.substr(eq + 1);
      }
      continue;
    }
    if (!header_seen) {
      if (line != "trajectory_index,event_time") throw ConfigError("trajectory CSV: unexpected header '" + line + "'");
      header_seen = true;
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ConfigError("trajectory CSV line " + std::to_string(lineno) + ": missing comma");
    const auto idx = static_cast<std::size_t>(parse_uint(line.substr(0, comma), "trajectory_index"));
    const double t = parse_double(line.substr(comma + 1), "event_time");
    if (idx >= events.size()) events.resize(idx + 1);
    events[idx].push_back(t);
  }
  if (!meta.count("n") || !meta.count("tau")) throw ConfigError("trajectory CSV: header must carry n and tau");
  const auto n = static_cast<std::size_t>(parse_uint(meta["n"], "n"));
  const double tau = parse_double(meta["tau"], "tau");
  if (events.size() > n) throw ConfigError("trajectory CSV: trajectory index beyond n");
  events.resize(n);
  std::vector<Trajectory> trajectories;
  trajectories.reserve(n);
  try {
    for (auto& e : events) trajectories.emplace_back(std::move(e), tau);
    return {ObservationSet(std::move(trajectories), tau), std::move(meta)};
  } catch (const DomainError& e) {
    throw ConfigError(std::string("trajectory CSV: ") + e.what());
  }
}

}  // namespace cplab
