#pragma once

// Scenario files: a small INI dialect with [sections] and `key = value`
// lines. Comments start with '#' or ';'. Unknown sections and keys are
// rejected with the offending line number.

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "fes/model.hpp"
#include "fes/optimizer.hpp"
#include "fes/planner.hpp"
#include "fes/reference_sim.hpp"

namespace fes {

struct TrainConfig {
  // Explicit pulses take precedence; otherwise a regular train is built.
  std::vector<double> times;
  std::vector<double> amplitudes;
  double horizon = 0.0;
  std::size_t pulses = 0;  // regular: n
  double spacing = 30.0;   // regular: t_i = i * spacing, T = (n + 1) spacing
  double amplitude = 1.0;
  double i_min = 20.0;
  bool empty = false;      // no stimulation at all; `horizon` is the run length

  PulseTrain build() const;
  bool operator==(const TrainConfig&) const = default;
};

struct SimulationConfig {
  double step = 0.4;
  std::string method = "rk4";  // rk4 | adaptive
  bool fatigue = false;
  std::size_t record_every = 1;
  double abs_tol = 1e-12;
  double rel_tol = 1e-10;

  SimOptions options() const;
  bool operator==(const SimulationConfig&) const = default;
};

struct SolverConfig {
  SolverOptions options;
  double t_max = 1000.0;
  bool freeze_amplitudes = false;
  bool freeze_times = false;
  bool freeze_horizon = false;
  std::size_t starts = 1;  // > 1 runs a multistart over spread initial spacings

  bool operator==(const SolverConfig& o) const;
};

struct OutputConfig {
  std::string dir = ".";
  std::string prefix = "fesopt";
  bool operator==(const OutputConfig&) const = default;
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::string suite = "default";
  std::size_t cases = 20;           // randomized cases per validation check
  std::size_t bench_points = 10000;
  double speedup_threshold = 5.0;
  bool operator==(const RunConfig&) const = default;
};

struct ScenarioConfig {
  ModelParams model;
  TrainConfig train;
  SimulationConfig simulation;
  ObjectiveSpec objective;
  SolverConfig solver;
  ProgramSpec program;
  OutputConfig output;
  RunConfig run;
  std::set<std::string> sections;  // sections present in the source text

  bool has(const std::string& section) const { return sections.count(section) != 0; }
  /// Throws ConfigError naming the first missing section.
  void require(std::initializer_list<const char*> names) const;
};

bool operator==(const ModelParams& a, const ModelParams& b);
bool operator==(const ObjectiveSpec& a, const ObjectiveSpec& b);
bool operator==(const ProgramSpec& a, const ProgramSpec& b);
bool operator==(const ScenarioConfig& a, const ScenarioConfig& b);

/// `origin` prefixes diagnostics (usually the file name).
ScenarioConfig parse_scenario(const std::string& text, const std::string& origin = "<config>");
ScenarioConfig load_scenario(const std::string& path);

/// Canonical text: every section present in `sections`, every key, fixed order.
std::string serialize_scenario(const ScenarioConfig& cfg);

/// FNV-1a 64 of the canonical text, as 16 hex digits.
std::string config_hash(const ScenarioConfig& cfg);

}  // namespace fes
