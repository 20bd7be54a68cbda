#pragma once

// Self-check suites run by `fesopt validate`: randomized cross-checks of the
// closed forms against independent integrations, and the a-priori bounds
// against measured errors.

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "fes/force_approx.hpp"
#include "fes/model.hpp"
#include "fes/reference_sim.hpp"

namespace fes {

struct CheckResult {
  std::string name;
  bool passed = false;
  double measured = 0.0;
  double bound = 0.0;
  std::string detail;
};

struct SuiteOptions {
  std::uint64_t seed = 1;
  std::size_t cases = 20;
  bool parallel = true;
};

/// Names accepted by run_suite.
std::vector<std::string> suite_names();

/// Runs the named suite. Results keep the suite's fixed check order
/// regardless of scheduling. Throws InvalidArgument for an unknown suite.
std::vector<CheckResult> run_suite(const std::string& suite, const ModelParams& params, const SuiteOptions& opts);

/// The c_N ODE pair (E' = -E/tau_c with jumps, c' = E - c/tau_c) by RK4.
/// Returns the largest deviation from eval_cN over a uniform sample grid.
double cn_rk4_deviation(const PulseTrain& train, const ModelParams& params, double step = 0.05);

/// Fitted recovery rate of A (1/s) during a rest that follows stimulation,
/// and the drop of A over the stimulation phase (kN/s).
struct FatigueProbe {
  double drop = 0.0;
  double recovery_rate = 0.0;
};
FatigueProbe probe_fatigue(const ModelParams& params, double stim_s = 5.0, double rest_s = 60.0);

/// Wall-clock comparison of a precomputed F~ against re-simulation, both
/// producing force at the same uniform grid of `points` times. Each side is
/// timed `repeats` times and the fastest run is kept.
struct SpeedReport {
  std::size_t points = 0;
  double build_s = 0.0;
  double approx_s = 0.0;
  double oracle_s = 0.0;
  double max_abs_diff = 0.0;  // kN, F~ vs oracle over the grid
  double speedup() const { return oracle_s / std::max(approx_s, 1e-12); }
};
SpeedReport time_approximation(const PulseTrain& train, const ModelParams& params, Scheme scheme, std::size_t p,
                               double nu, std::size_t points = 10000, const SimOptions& sim = {},
                               std::size_t repeats = 5);

}  // namespace fes
