#include "fes/planner.hpp"

#include <algorithm>
#include <cmath>

#include "fes/errors.hpp"

namespace fes {

const char* to_string(ProgramKind k) {
  switch (k) {
    case ProgramKind::Endurance: return "endurance";
    case ProgramKind::Punch: return "punch";
    case ProgramKind::TrainEndurance: return "train-endurance";
  }
  return "?";
}

ProgramKind program_from_string(const std::string& s) {
  for (auto k : {ProgramKind::Endurance, ProgramKind::Punch, ProgramKind::TrainEndurance}) {
    if (s == to_string(k)) return k;
  }
  throw InvalidArgument("unknown program kind '" + s + "'");
}

void ProgramSpec::validate() const {
  if (!(k_ratio > 1.0)) throw InvalidArgument("k must exceed 1");
  if (!(k_fatigue > 1.0)) throw InvalidArgument("k'' must exceed 1");
  if (!(train_ms > 0.0)) throw InvalidArgument("train length must be positive");
  if (!(t_f_s > 0.0)) throw InvalidArgument("session length must be positive");
  if (!(i_min >= 0.0)) throw InvalidArgument("i_min must be non-negative");
  if (!(train_ms / static_cast<double>(pulses + 1) > i_min)) {
    throw InvalidArgument("train too short for the requested pulses at this interpulse");
  }
  if (!(drift > 0.0)) throw InvalidArgument("drift threshold must be positive");
  if (!(rest_cap_ms > 0.0)) throw InvalidArgument("rest cap must be positive");
  if (record_every == 0) throw InvalidArgument("record_every must be >= 1");
}

double ProgramSpec::rest_duration(const ModelParams& params) const {
  // A relaxes with time constant tau_fat; three of them recover 95%.
  if (rest_ms >= 0.0) return rest_ms;
  return std::min(3.0 * params.tau_fat * 1000.0, rest_cap_ms);
}

double StimulationProgram::total_duration() const {
  double sum = 0.0;
  for (const auto& s : segments) sum += s.duration;
  return sum;
}

OptOutcome solve_template(const ProgramSpec& spec, const ModelParams& params, double c_ref,
                          const SolverOptions& opts) {
  const double spacing = spec.train_ms / static_cast<double>(spec.pulses + 1);
  auto init = DecisionVector::regular(spec.pulses, spacing, spec.i_min, 1.0, spec.train_ms * 1.5);
  init.freeze_horizon();
  ObjectiveSpec obj;
  switch (spec.kind) {
    case ProgramKind::Endurance:
      obj.kind = ObjectiveKind::TrackCn;
      obj.backend = Backend::Exact;
      obj.c_ref = c_ref;
      break;
    case ProgramKind::TrainEndurance:
      obj.kind = ObjectiveKind::TrackForce;
      obj.backend = Backend::Approx;
      obj.f_ref = spec.f_ref;
      break;
    case ProgramKind::Punch:
      obj.kind = ObjectiveKind::MaxForceTerminal;
      obj.backend = Backend::Approx;
      init.freeze_amplitudes();
      break;
  }
  return solve(obj, init, params, opts);
}

StimulationProgram plan_endurance(const ProgramSpec& spec, const ModelParams& params, const SolverOptions& opts) {
  spec.validate();
  params.validate();
  StimulationProgram prog;
  prog.a_s = params.a_rest / spec.k_fatigue;
  prog.f_ref = spec.f_ref;
  if (prog.f_ref <= 0.0) {
    FMaxConfig cfg;
    cfg.pulses = spec.pulses;
    cfg.i_min = spec.i_min;
    prog.f_ref = derive_f_max(params, cfg, opts) / spec.k_ratio;
  }
  ProgramSpec eff = spec;
  eff.f_ref = prog.f_ref;

  double a_solve = params.a_rest;
  prog.c_n_ref = steady_state_root(params, a_solve, prog.f_ref).c_n_ref;
  auto tmpl = solve_template(eff, params, prog.c_n_ref, opts);
  prog.solves = 1;
  PulseTrain train = tmpl.sigma_star.to_train();
  train.i_min = spec.i_min;

  SimOptions so;
  so.record_every = spec.record_every;
  SessionSimulator sim(params, so, true);
  const double t_f = spec.t_f_s * 1000.0;
  const double rest = spec.rest_duration(params);
  double clock = 0.0;
  bool resolved = false;

  auto check_threshold = [&](std::size_t from) {
    const auto& tr = sim.trajectory();
    for (std::size_t i = from; i < tr.size() && !prog.threshold_breached; ++i) {
      if (tr.a[i] < prog.a_s) {
        prog.threshold_breached = true;
        prog.first_crossing_ms = tr.grid[i];
      }
    }
  };

  while (clock < t_f) {
    const double remaining = t_f - clock;
    const std::size_t mark = sim.trajectory().size();
    if (remaining >= spec.train_ms) {
      const double a_now = sim.state().a;
      if (std::abs(a_now - a_solve) > spec.drift * a_solve) {
        try {
          const double c_ref = steady_state_root(params, a_now, prog.f_ref).c_n_ref;
          tmpl = solve_template(eff, params, c_ref, opts);
          train = tmpl.sigma_star.to_train();
          train.i_min = spec.i_min;
          a_solve = a_now;
          ++prog.solves;
          resolved = true;
        } catch (const UnreachableForce&) {
          // The target is out of reach at this fatigue level; keep the last template.
        }
      }
      TrainSummary sum;
      sum.start = clock;
      sum.a_start = a_now;
      sum.resolved = resolved;
      resolved = false;
      sim.run(SessionSegment::stimulate(train));
      const auto& tr = sim.trajectory();
      double acc = 0.0;
      for (std::size_t i = mark; i < tr.size(); ++i) {
        sum.peak_force = std::max(sum.peak_force, tr.force[i]);
        acc += tr.force[i];
      }
      sum.mean_force = tr.size() > mark ? acc / static_cast<double>(tr.size() - mark) : 0.0;
      sum.a_end = sim.state().a;
      prog.trains.push_back(sum);
      prog.segments.push_back({clock, spec.train_ms, train});
      clock += spec.train_ms;
      check_threshold(mark);
      if (clock >= t_f) break;
    }
    const double left = t_f - clock;
    const double pause = (left < spec.train_ms + rest) ? left : rest;
    if (pause > 0.0) {
      const std::size_t rest_mark = sim.trajectory().size();
      sim.run(SessionSegment::rest(pause));
      prog.segments.push_back({clock, pause, std::nullopt});
      check_threshold(rest_mark);
      clock = (pause == left) ? t_f : clock + pause;
    }
  }
  prog.trajectory = sim.take_trajectory();
  return prog;
}

double derive_f_max(const ModelParams& params, const FMaxConfig& config, const SolverOptions& opts) {
  if (!(config.amplitude >= 0.0 && config.amplitude <= 1.0)) throw InvalidArgument("amplitude must lie in [0, 1]");
  const double spacing = config.i_min > 0.0 ? 1.5 * config.i_min : params.tau_c;
  auto init = DecisionVector::regular(config.pulses, spacing, config.i_min, config.amplitude, config.t_max);
  init.freeze_amplitudes();
  ObjectiveSpec obj;
  obj.kind = ObjectiveKind::MaxForceTerminal;
  obj.backend = Backend::Approx;
  const auto out = solve(obj, init, params, opts);
  ObjectiveSpec check = obj;
  check.backend = Backend::Oracle;
  return -objective_value(check, out.sigma_star, params);
}

Trajectory hold_concentration(const ModelParams& params, double c_n, double a_value, double duration_ms,
                              double step_ms) {
  if (!(duration_ms > 0.0 && step_ms > 0.0)) throw InvalidArgument("duration and step must be positive");
  const double m1 = eval_m1(c_n, params);
  const double m2 = eval_m2(c_n, params);
  const double drive = m1 * per_ms(a_value);
  const auto steps = static_cast<std::size_t>(std::ceil(duration_ms / step_ms - 1e-9));
  const double h = duration_ms / static_cast<double>(steps);
  Trajectory out;
  double f = 0.0;
  out.push(0.0, {c_n, f, a_value});
  auto rhs = [&](double y) { return -m2 * y + drive; };
  for (std::size_t j = 0; j < steps; ++j) {
    const double k1 = rhs(f);
    const double k2 = rhs(f + 0.5 * h * k1);
    const double k3 = rhs(f + 0.5 * h * k2);
    const double k4 = rhs(f + h * k3);
    f += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    out.push(static_cast<double>(j + 1) * h, {c_n, f, a_value});
  }
  return out;
}

}  // namespace fes
