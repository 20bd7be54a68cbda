#pragma once

// Finite-dimensional optimal control over sigma = (eta_0..eta_n, t_1..t_n, T):
// linear constraint system, objective adapters and a log-barrier
// interior-point solver driven by finite-difference gradients.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "fes/force_approx.hpp"
#include "fes/model.hpp"
#include "fes/reference_sim.hpp"

namespace fes {

struct DecisionVector {
  std::size_t n = 0;  // number of pulses after t_0
  double i_min = 0.0;
  double t_max = 1000.0;  // cap on T (ms)
  std::vector<double> sigma;
  std::vector<bool> frozen;

  std::size_t dim() const { return 2 * n + 2; }
  static std::size_t eta_index(std::size_t i) { return i; }
  std::size_t time_index(std::size_t i) const { return n + i; }  // i = 1..n
  std::size_t horizon_index() const { return 2 * n + 1; }

  double eta(std::size_t i) const { return sigma[eta_index(i)]; }
  double time(std::size_t i) const { return i == 0 ? 0.0 : sigma[time_index(i)]; }
  double horizon() const { return sigma[horizon_index()]; }

  void freeze_amplitudes(bool on = true);
  void freeze_times(bool on = true);
  void freeze_horizon(bool on = true);
  std::size_t free_count() const;

  /// Pulse train carried by sigma. Spacing is not enforced here (i_min of the
  /// returned train is 0); throws InfeasibleSigma when the ordering or the
  /// amplitude range is broken.
  PulseTrain to_train() const;
  static DecisionVector from_train(const PulseTrain& train, double t_max = 1000.0);
  /// t_i = i * spacing, T = (n + 1) * spacing, all amplitudes equal.
  static DecisionVector regular(std::size_t n, double spacing, double i_min, double amplitude = 1.0,
                                double t_max = 1000.0);
};

/// One linear constraint a^T sigma + b <= 0.
struct LinearConstraint {
  std::vector<std::pair<std::size_t, double>> coeffs;
  double offset = 0.0;

  double operator()(const std::vector<double>& sigma) const;
};

/// Xi_1..Xi_{3n+5}: spacing (n), t_n - T, -eta_0..-eta_n, -T, eta_0-1..eta_n-1, T - T_max.
std::vector<LinearConstraint> constraint_rows(std::size_t n, double i_min, double t_max);
std::vector<double> eval_constraints(const DecisionVector& sigma);

enum class ObjectiveKind { MaxForceTerminal, TrackForce, TrackForceFatigue, MaxCnTerminal, TrackCn };
enum class Backend { Approx, Exact, Oracle };

const char* to_string(ObjectiveKind k);
const char* to_string(Backend b);
ObjectiveKind objective_from_string(const std::string& s);
Backend backend_from_string(const std::string& s);

struct ObjectiveSpec {
  ObjectiveKind kind = ObjectiveKind::MaxForceTerminal;
  Backend backend = Backend::Approx;
  double f_ref = 0.1;   // kN
  double c_ref = 0.0;   // dimensionless
  double w1 = 1.0;      // fatigue weight
  double a_s = -1.0;    // kN/s; negative means A_rest / 2
  double scale = 1.0;   // positive factor applied to the cost
  // Approximation options.
  Scheme scheme = Scheme::AffineConstant;
  std::size_t p = 2;
  double nu = 1.0;
  // Oracle options.
  double sim_step = 0.4;  // ms
  // Fatigue session: the train is repeated `repeats` times with `rest_ms` in between.
  std::size_t repeats = 1;
  double rest_ms = 0.0;

  void validate() const;
};

/// Cost to be minimized. Throws InfeasibleSigma when sigma is out of order.
double objective_value(const ObjectiveSpec& spec, const DecisionVector& sigma, const ModelParams& params);

struct GradientOptions {
  double h_rel = 1e-5;
  bool parallel = false;
};

/// Central differences over the free coordinates (frozen ones get 0). Near
/// the edge of the domain the step is halved up to three times; after that a
/// one-sided second-order difference is used, and StepCollision is raised
/// only when neither side fits.
std::vector<double> fd_gradient(const ObjectiveSpec& spec, const DecisionVector& sigma, const ModelParams& params,
                                const GradientOptions& opts = {});

struct SolverOptions {
  double mu0 = 1.0;
  double mu_min = 1e-8;
  double mu_factor = 0.1;
  double kkt_tol = 1e-6;
  double feas_tol = 1e-8;
  double h_rel = 1e-5;
  double nudge = 1e-3;             // amplitudes start at most at 1 - nudge
  std::size_t max_inner = 300;     // per barrier stage
  std::size_t max_backtracks = 50;
  bool parallel_gradient = false;
  bool trace = true;
};

struct TraceEntry {
  std::size_t stage = 0;
  std::size_t iteration = 0;
  double mu = 0.0;
  double objective = 0.0;
  double merit = 0.0;
  double grad_norm = 0.0;
  double step = 0.0;
};

enum class SolveStatus { Converged, MaxIterations, LineSearchFailure };
const char* to_string(SolveStatus s);

struct OptOutcome {
  DecisionVector sigma_star;
  double objective = 0.0;
  double initial_objective = 0.0;
  std::vector<double> lambda;  // one per constraint row, 0 for rows excluded from the barrier
  double stationarity = 0.0;
  double complementarity = 0.0;
  double feasibility = 0.0;
  double kkt_residual = 0.0;
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  SolveStatus status = SolveStatus::Converged;
  std::vector<TraceEntry> trace;

  bool ok() const { return status == SolveStatus::Converged; }
};

/// Log-barrier interior point on the free coordinates of init. Rows whose
/// entries are all frozen are left out of the barrier. The initial point is
/// pushed strictly inside the amplitude box; any other infeasibility is an
/// InvalidArgument.
OptOutcome solve(const ObjectiveSpec& spec, const DecisionVector& init, const ModelParams& params,
                 const SolverOptions& opts = {});

/// Runs solve from each start and returns the lowest converged objective
/// (earliest start on ties; the best non-converged run when none converge).
OptOutcome multistart(const ObjectiveSpec& spec, const std::vector<DecisionVector>& starts, const ModelParams& params,
                      const SolverOptions& opts = {});

/// Starts spread over the admissible spacings: regular trains with spacing
/// i_min * (1.5, 2.5, 3.5, ...) and the given frozen pattern.
std::vector<DecisionVector> spread_starts(const DecisionVector& base, std::size_t count);

struct KktReport {
  double stationarity = 0.0;
  double complementarity = 0.0;
  double feasibility = 0.0;
  bool dual_feasible = true;
  bool passed = false;
};

KktReport kkt_check(const ObjectiveSpec& spec, const OptOutcome& outcome, const ModelParams& params, double tol = 1e-6,
                    const GradientOptions& opts = {});

}  // namespace fes
