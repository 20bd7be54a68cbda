#pragma once

// Ground-truth force and fatigue trajectories. The concentration layer is
// always evaluated in closed form; only F (and A in fatigue runs) is
// integrated numerically, with steps split at every impulse time.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "fes/model.hpp"

namespace fes {

enum class Integrator { FixedRk4, Adaptive };

struct SimOptions {
  double step = 0.4;  // ms; tau_c / 50 for the nominal model
  Integrator method = Integrator::FixedRk4;
  double abs_tol = 1e-12;
  double rel_tol = 1e-10;
  bool refine_at_pulses = true;
  std::size_t record_every = 1;      // keep every k-th interior step
  std::vector<double> extra_samples;  // forced into the output grid

  void validate() const;
};

struct Trajectory {
  std::vector<double> grid;  // ms
  std::vector<double> c_n;
  std::vector<double> force;  // kN
  std::vector<double> a;      // kN/s

  std::size_t size() const { return grid.size(); }
  void push(double t, const HillState& s);
  /// Index of an exact grid time, if present.
  std::optional<std::size_t> index_of(double t) const;
  /// Value of force at an exact grid time; throws InvalidArgument otherwise.
  double force_at(double t) const;
};

/// One block of a stimulation session: a pulse train lasting its horizon,
/// or a rest period with no stimulation.
struct SessionSegment {
  double duration = 0.0;  // ms
  std::optional<PulseTrain> train;

  static SessionSegment rest(double duration_ms) { return {duration_ms, std::nullopt}; }
  static SessionSegment stimulate(PulseTrain train) {
    const double d = train.horizon;
    return {d, std::move(train)};
  }
};

/// Resumable integrator for (F, A). Segments are appended one at a time,
/// which lets callers inspect the state between trains.
class SessionSimulator {
 public:
  SessionSimulator(const ModelParams& params, SimOptions opts, bool fatigue);

  void run(const SessionSegment& segment);

  double now() const { return now_; }
  const HillState& state() const { return state_; }
  const Trajectory& trajectory() const { return traj_; }
  Trajectory take_trajectory() { return std::move(traj_); }
  const LobeSum& lobes() const { return lobes_; }

 private:
  void integrate_piece(double from, double to);
  void rk4_piece(double from, double to);
  void adaptive_piece(double from, double to);
  void derivs(double t, double f, double a, double& df, double& da) const;

  ModelParams params_;
  SimOptions opts_;
  bool fatigue_;
  LobeSum lobes_;
  HillState state_;
  double now_ = 0.0;
  Trajectory traj_;
};

/// Non-fatigue run, A = A_rest. Output channels: c_n, force (a is constant).
Trajectory simulate_force(const PulseTrain& train, const ModelParams& params, const SimOptions& opts = {});

/// Co-integrates F and A over consecutive trains and rest periods.
Trajectory simulate_force_fatigue(std::span<const SessionSegment> sequence, const ModelParams& params,
                                  const SimOptions& opts = {});

/// F(t) = A M(t) int_0^t M^{-1}(s) m1(s) ds by nested adaptive Gauss-Kronrod
/// quadrature (absolute error target 1e-10 kN).
double oracle_force_quadrature(const PulseTrain& train, const ModelParams& params, double t);
std::vector<double> oracle_force_quadrature(const PulseTrain& train, const ModelParams& params,
                                            std::span<const double> times);

/// The internal clock s(t) = int_0^t m2.
double reparam_clock(const PulseTrain& train, const ModelParams& params, double t);

/// Solves dF/ds = m3(s) - F in the clock s(t) = int m2 and compares
/// against the quadrature oracle at `samples` points uniformly spaced in
/// (0, s_max]. Returns the largest absolute discrepancy in kN.
double reparam_force_check(const PulseTrain& train, const ModelParams& params, double s_max,
                           std::size_t samples = 20);

}  // namespace fes
