#pragma once

// Session planning: turn a force target into a reference concentration, an
// optimized template train and a tiling of trains and rests over [0, t_f].

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "fes/model.hpp"
#include "fes/optimizer.hpp"
#include "fes/reference_sim.hpp"

namespace fes {

enum class ProgramKind { Endurance, Punch, TrainEndurance };
const char* to_string(ProgramKind k);
ProgramKind program_from_string(const std::string& s);

struct ProgramSpec {
  ProgramKind kind = ProgramKind::Endurance;
  double f_ref = 0.1;          // kN; <= 0 derives F_max / k_ratio
  double k_ratio = 2.0;        // F_ref = F_max / k
  double train_ms = 300.0;     // T of one train
  std::size_t pulses = 7;      // n (pulses after t_0)
  double i_min = 20.0;         // ms
  double rest_ms = -1.0;       // negative: min(3 tau_fat, rest_cap_ms)
  double rest_cap_ms = 60000.0;
  double t_f_s = 60.0;         // whole session (s)
  double k_fatigue = 2.0;      // A_S = A_rest / k_fatigue
  double drift = 0.10;         // relative A change that triggers a re-solve
  std::size_t record_every = 10;

  void validate() const;
  double rest_duration(const ModelParams& params) const;
};

struct ProgramSegment {
  double start = 0.0;     // ms
  double duration = 0.0;  // ms
  std::optional<PulseTrain> train;
};

struct TrainSummary {
  double start = 0.0;
  double peak_force = 0.0;
  double mean_force = 0.0;
  double a_start = 0.0;
  double a_end = 0.0;
  bool resolved = false;  // the template was re-optimized before this train
};

struct StimulationProgram {
  std::vector<ProgramSegment> segments;
  double f_ref = 0.0;
  double c_n_ref = 0.0;
  double a_s = 0.0;
  std::vector<TrainSummary> trains;
  std::size_t solves = 0;
  bool threshold_breached = false;
  double first_crossing_ms = -1.0;
  Trajectory trajectory;  // thinned session trajectory

  double total_duration() const;
};

/// Template train for a target concentration under the current A.
OptOutcome solve_template(const ProgramSpec& spec, const ModelParams& params, double c_ref,
                          const SolverOptions& opts = {});

StimulationProgram plan_endurance(const ProgramSpec& spec, const ModelParams& params, const SolverOptions& opts = {});

struct FMaxConfig {
  std::size_t pulses = 7;
  double i_min = 20.0;
  double amplitude = 1.0;  // frozen amplitude of every pulse
  double t_max = 1000.0;
};

/// Largest terminal force of a train with frozen amplitudes: solves the
/// punch problem on F~ and reports the simulated F(T) at the optimum.
double derive_f_max(const ModelParams& params, const FMaxConfig& config, const SolverOptions& opts = {});

/// Force response with c_N held at a constant level (fatigue off), from F = 0.
Trajectory hold_concentration(const ModelParams& params, double c_n, double a_value, double duration_ms,
                              double step_ms = 0.05);

}  // namespace fes
