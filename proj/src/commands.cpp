#include "fes/commands.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "fes/errors.hpp"
#include "fes/force_approx.hpp"
#include "fes/optimizer.hpp"
#include "fes/planner.hpp"
#include "fes/reference_sim.hpp"
#include "fes/validation.hpp"

#ifndef FESOPT_VERSION
#define FESOPT_VERSION "0.0.0"
#endif

namespace fes {

using nlohmann::json;

const char* version() { return FESOPT_VERSION; }

namespace {

struct Writer {
  std::filesystem::path dir;
  std::string prefix;
  std::string hash;
  std::string command;
  CommandResult* result;

  std::filesystem::path path(const std::string& suffix) const { return dir / (prefix + "_" + suffix); }

  void csv(const std::string& suffix, const std::vector<std::string>& columns,
           const std::vector<const std::vector<double>*>& data) const {
    const auto p = path(suffix);
    std::ofstream f(p);
    if (!f) throw ConfigError("cannot write '" + p.string() + "'");
    f << fmt::format("# fesopt {} config_hash={}\n", version(), hash);
    for (std::size_t c = 0; c < columns.size(); ++c) f << (c ? "," : "") << columns[c];
    f << '\n';
    const std::size_t rows = data.empty() ? 0 : data.front()->size();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < data.size(); ++c) f << (c ? "," : "") << fmt::format("{:.9g}", (*data[c])[r]);
      f << '\n';
    }
    result->files.push_back(p.string());
  }

  void json_file(const std::string& suffix, json body) const {
    const auto p = path(suffix);
    std::ofstream f(p);
    if (!f) throw ConfigError("cannot write '" + p.string() + "'");
    body["meta"] = {{"artifact", "fesopt"}, {"version", version()}, {"config_hash", hash}, {"command", command}};
    f << body.dump(2) << '\n';
    result->files.push_back(p.string());
  }
};

Writer make_writer(const CommandContext& ctx, const std::string& command, CommandResult& result) {
  Writer w;
  w.dir = ctx.out_dir.value_or(ctx.config.output.dir);
  std::error_code ec;
  std::filesystem::create_directories(w.dir, ec);
  if (ec) throw ConfigError("cannot create output directory '" + w.dir.string() + "': " + ec.message());
  w.prefix = ctx.config.output.prefix;
  w.hash = config_hash(ctx.config);
  w.command = command;
  w.result = &result;
  return w;
}

void say(const CommandContext& ctx, const std::string& line) {
  if (ctx.log) *ctx.log << line << '\n';
}

json train_json(const PulseTrain& t) {
  return {{"times", t.times}, {"amplitudes", t.amplitudes}, {"horizon", t.horizon}, {"i_min", t.i_min}};
}

ModelParams checked_model(const ScenarioConfig& cfg, bool fatigue_sign = true) {
  try {
    cfg.model.validate(fatigue_sign);
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("[model] ") + e.what());
  }
  return cfg.model;
}

}  // namespace

CommandResult run_simulate(const CommandContext& ctx) {
  const auto& cfg = ctx.config;
  cfg.require({"train"});
  const auto params = checked_model(cfg);
  const auto train = cfg.train.build();
  auto opts = cfg.simulation.options();
  Trajectory traj;
  if (cfg.simulation.fatigue) {
    const std::vector<SessionSegment> plan{SessionSegment::stimulate(train)};
    traj = simulate_force_fatigue(plan, params, opts);
  } else {
    traj = simulate_force(train, params, opts);
  }
  CommandResult res;
  const auto w = make_writer(ctx, "simulate", res);
  w.csv("trajectory.csv", {"t_ms", "c_n", "force_kN", "a"}, {&traj.grid, &traj.c_n, &traj.force, &traj.a});
  const auto peak = std::max_element(traj.force.begin(), traj.force.end()) - traj.force.begin();
  const auto cpeak = std::max_element(traj.c_n.begin(), traj.c_n.end()) - traj.c_n.begin();
  json summary = {
      {"train", train_json(train)},
      {"samples", traj.size()},
      {"terminal",
       {{"t_ms", traj.grid.back()}, {"c_n", traj.c_n.back()}, {"force_kN", traj.force.back()}, {"a", traj.a.back()}}},
      {"peak_force_kN", traj.force[peak]},
      {"peak_force_t_ms", traj.grid[peak]},
      {"peak_c_n", traj.c_n[cpeak]},
      {"peak_c_n_t_ms", traj.grid[cpeak]},
  };
  w.json_file("summary.json", summary);
  say(ctx, fmt::format("simulate: {} samples, peak force {:.6g} kN at {:.6g} ms", traj.size(), traj.force[peak],
                       traj.grid[peak]));
  return res;
}

CommandResult run_approximate(const CommandContext& ctx) {
  const auto& cfg = ctx.config;
  cfg.require({"train"});
  const auto params = checked_model(cfg);
  const auto train = cfg.train.build();
  const auto& obj = cfg.objective;
  const auto m = build_m_approx(train, params, obj.scheme, obj.p, obj.nu);
  const ForceApprox approx(m, params.a_rest);
  const ForceEnvelope env(train, params, 1.05, 0.95, obj.scheme, obj.p);
  const auto traj = simulate_force(train, params, cfg.simulation.options());
  std::vector<double> fa(traj.size()), lo(traj.size()), hi(traj.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    fa[i] = approx(traj.grid[i]);
    const auto e = env(traj.grid[i]);
    lo[i] = e.low;
    hi[i] = e.high;
    worst = std::max(worst, std::abs(fa[i] - traj.force[i]));
  }
  const auto euler = euler_inputs(train, params, obj.p, obj.nu);
  json nodes = json::array();
  for (std::size_t k = 0; k < train.times.size(); ++k) {
    const double t = train.times[k];
    const auto q = static_cast<std::size_t>(std::find(euler.nodes.begin(), euler.nodes.end(), t) - euler.nodes.begin());
    json fe = nullptr;
    try {
      fe = eval_F_euler(euler, params, params.a_rest, q);
    } catch (const UnstableStep&) {
    }
    const auto rep = error_bound_F(train, params, m, k);
    nodes.push_back({{"t_ms", t},
                     {"force_oracle", oracle_force_quadrature(train, params, t)},
                     {"force_approx", approx(t)},
                     {"force_euler", fe},
                     {"bound_kN", rep.bound * per_ms(params.a_rest)},
                     {"hypotheses_ok", rep.hypotheses_ok()}});
  }
  CommandResult res;
  const auto w = make_writer(ctx, "approximate", res);
  w.csv("approx.csv", {"t_ms", "force_oracle", "force_approx", "force_low", "force_high"},
        {&traj.grid, &traj.force, &fa, &lo, &hi});
  w.json_file("approx.json", {{"train", train_json(train)},
                              {"scheme", to_string(obj.scheme)},
                              {"p", obj.p},
                              {"nu", obj.nu},
                              {"segments", m.segment_count()},
                              {"max_abs_error_kN", worst},
                              {"nodes", nodes}});
  say(ctx, fmt::format("approximate: {} segments, max |F - F~| = {:.3g} kN", m.segment_count(), worst));
  return res;
}

CommandResult run_optimize(const CommandContext& ctx) {
  const auto& cfg = ctx.config;
  cfg.require({"train", "objective"});
  const auto params = checked_model(cfg);
  try {
    cfg.objective.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("[objective] ") + e.what());
  }
  const auto train = cfg.train.build();
  if (static_cast<double>(train.n() + 1) * train.i_min >= cfg.solver.t_max) {
    throw ConfigError(fmt::format("[solver] no strictly feasible train: (n + 1) * i_min = {} >= t_max = {}",
                                  static_cast<double>(train.n() + 1) * train.i_min, cfg.solver.t_max));
  }
  auto init = DecisionVector::from_train(train, cfg.solver.t_max);
  init.freeze_amplitudes(cfg.solver.freeze_amplitudes);
  init.freeze_times(cfg.solver.freeze_times);
  init.freeze_horizon(cfg.solver.freeze_horizon);
  const auto& obj = cfg.objective;
  OptOutcome out;
  try {
    out = cfg.solver.starts > 1 ? multistart(obj, spread_starts(init, cfg.solver.starts), params, cfg.solver.options)
                                : solve(obj, init, params, cfg.solver.options);
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("[train] ") + e.what());
  }

  const auto star = out.sigma_star.to_train();
  SimOptions so = cfg.simulation.options();
  const auto traj = simulate_force(star, params, so);
  const ForceApprox approx(build_m_approx(star, params, obj.scheme, obj.p, obj.nu), params.a_rest);
  std::vector<double> fa(traj.size());
  for (std::size_t i = 0; i < traj.size(); ++i) fa[i] = approx(traj.grid[i]);

  json trace = json::array();
  for (const auto& t : out.trace) {
    trace.push_back({{"stage", t.stage},
                     {"iteration", t.iteration},
                     {"mu", t.mu},
                     {"objective", t.objective},
                     {"merit", t.merit},
                     {"grad_norm", t.grad_norm},
                     {"step", t.step}});
  }
  const auto xi = eval_constraints(out.sigma_star);
  json body = {{"objective_kind", to_string(obj.kind)},
               {"backend", to_string(obj.backend)},
               {"status", to_string(out.status)},
               {"sigma", out.sigma_star.sigma},
               {"train", train_json(star)},
               {"objective", out.objective},
               {"initial_objective", out.initial_objective},
               {"kkt", {{"residual", out.kkt_residual},
                        {"stationarity", out.stationarity},
                        {"complementarity", out.complementarity},
                        {"feasibility", out.feasibility}}},
               {"constraints", xi},
               {"lambda", out.lambda},
               {"iterations", out.iterations},
               {"evaluations", out.evaluations},
               {"trace", trace}};
  if (obj.kind == ObjectiveKind::TrackForce || obj.kind == ObjectiveKind::TrackCn ||
      obj.kind == ObjectiveKind::TrackForceFatigue) {
    body["tracking_cost"] = {{"before", out.initial_objective}, {"after", out.objective}};
  }
  CommandResult res;
  const auto w = make_writer(ctx, "optimize", res);
  w.json_file("sigma.json", body);
  w.csv("trajectories.csv", {"t_ms", "force_approx", "force_oracle"}, {&traj.grid, &fa, &traj.force});
  say(ctx, fmt::format("optimize: {} objective {:.9g} -> {:.9g}, KKT residual {:.3g}", to_string(out.status),
                       out.initial_objective, out.objective, out.kkt_residual));
  if (!out.ok()) {
    res.code = exit_code::solver;
    res.message = std::string("solver stopped: ") + to_string(out.status);
  }
  return res;
}

CommandResult run_plan(const CommandContext& ctx) {
  const auto& cfg = ctx.config;
  cfg.require({"program"});
  const auto params = checked_model(cfg);
  try {
    cfg.program.validate();
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("[program] ") + e.what());
  }
  const auto prog = plan_endurance(cfg.program, params, cfg.solver.options);
  json segs = json::array();
  for (const auto& s : prog.segments) {
    json j = {{"start_ms", s.start}, {"duration_ms", s.duration}, {"kind", s.train ? "train" : "rest"}};
    if (s.train) j["train"] = train_json(*s.train);
    segs.push_back(j);
  }
  json trains = json::array();
  for (const auto& t : prog.trains) {
    trains.push_back({{"start_ms", t.start},
                      {"peak_force_kN", t.peak_force},
                      {"mean_force_kN", t.mean_force},
                      {"a_start", t.a_start},
                      {"a_end", t.a_end},
                      {"resolved", t.resolved}});
  }
  CommandResult res;
  const auto w = make_writer(ctx, "plan", res);
  w.json_file("program.json", {{"kind", to_string(cfg.program.kind)},
                               {"f_ref_kN", prog.f_ref},
                               {"c_n_ref", prog.c_n_ref},
                               {"a_s", prog.a_s},
                               {"solves", prog.solves},
                               {"total_ms", prog.total_duration()},
                               {"threshold_breached", prog.threshold_breached},
                               {"first_crossing_ms", prog.threshold_breached ? json(prog.first_crossing_ms) : json()},
                               {"segments", segs},
                               {"trains", trains}});
  const auto& tr = prog.trajectory;
  w.csv("program.csv", {"t_ms", "c_n", "force_kN", "a"}, {&tr.grid, &tr.c_n, &tr.force, &tr.a});
  say(ctx, fmt::format("plan: c_ref {:.6g}, {} segments, {} solves{}", prog.c_n_ref, prog.segments.size(),
                       prog.solves, prog.threshold_breached ? ", fatigue threshold crossed" : ""));
  return res;
}

CommandResult run_validate(const CommandContext& ctx) {
  const auto& cfg = ctx.config;
  // The fatigue sign is deliberately not enforced: mis-signed models are a
  // legitimate subject for the fatigue checks.
  const auto params = checked_model(cfg, false);
  SuiteOptions so;
  so.seed = ctx.seed.value_or(cfg.run.seed);
  so.cases = cfg.run.cases;
  const std::string suite = ctx.suite.value_or(cfg.run.suite);
  std::vector<CheckResult> results;
  try {
    results = run_suite(suite, params, so);
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("[run] ") + e.what());
  }
  json checks = json::array();
  bool all = true;
  for (const auto& r : results) {
    all = all && r.passed;
    checks.push_back(
        {{"name", r.name}, {"passed", r.passed}, {"measured", r.measured}, {"bound", r.bound}, {"detail", r.detail}});
    say(ctx, fmt::format("{} {} (measured {:.3g}, bound {:.3g})", r.passed ? "PASS" : "FAIL", r.name, r.measured,
                         r.bound));
  }
  CommandResult res;
  const auto w = make_writer(ctx, "validate", res);
  w.json_file("validate.json", {{"suite", suite}, {"seed", so.seed}, {"passed", all}, {"checks", checks}});
  if (!all) {
    res.code = exit_code::validation;
    res.message = "validation failures";
  }
  return res;
}

CommandResult run_bench(const CommandContext& ctx) {
  const auto& cfg = ctx.config;
  const auto params = checked_model(cfg);
  const PulseTrain train = cfg.has("train") ? cfg.train.build() : PulseTrain::regular(5, 30.0, 20.0);
  const auto r = time_approximation(train, params, cfg.objective.scheme, cfg.objective.p, cfg.objective.nu,
                                    std::max<std::size_t>(2, cfg.run.bench_points), cfg.simulation.options());
  const bool ok = r.speedup() >= cfg.run.speedup_threshold;
  CommandResult res;
  const auto w = make_writer(ctx, "bench", res);
  w.json_file("bench.json", {{"train", train_json(train)},
                             {"points", r.points},
                             {"approx_build_s", r.build_s},
                             {"approx_eval_s", r.approx_s},
                             {"simulation_s", r.oracle_s},
                             {"max_abs_diff_kN", r.max_abs_diff},
                             {"speedup", r.speedup()},
                             {"threshold", cfg.run.speedup_threshold},
                             {"passed", ok}});
  say(ctx, fmt::format("bench: F~ {:.3g} s, simulation {:.3g} s, speedup {:.3g}x", r.approx_s, r.oracle_s,
                       r.speedup()));
  if (!ok) {
    res.code = exit_code::validation;
    res.message = "speedup below threshold";
  }
  return res;
}

CommandResult dispatch(const std::string& command, const CommandContext& ctx) {
  try {
    if (command == "simulate") return run_simulate(ctx);
    if (command == "approximate") return run_approximate(ctx);
    if (command == "optimize") return run_optimize(ctx);
    if (command == "plan") return run_plan(ctx);
    if (command == "validate") return run_validate(ctx);
    if (command == "bench") return run_bench(ctx);
    return {exit_code::config, {}, "unknown command '" + command + "'"};
  } catch (const ConfigError& e) {
    return {exit_code::config, {}, e.what()};
  } catch (const InvalidArgument& e) {
    return {exit_code::config, {}, e.what()};
  } catch (const Error& e) {
    return {exit_code::solver, {}, e.what()};
  }
}

}  // namespace fes
