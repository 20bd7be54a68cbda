#include "fes/validation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <future>
#include <limits>
#include <random>
#include <string_view>

#include <fmt/format.h>

#include "fes/concentration_approx.hpp"
#include "fes/errors.hpp"
#include "fes/force_approx.hpp"
#include "fes/optimizer.hpp"
#include "fes/random_trains.hpp"
#include "fes/reference_sim.hpp"

namespace fes {

double cn_rk4_deviation(const PulseTrain& train, const ModelParams& params, double step) {
  const auto r = compute_scaling(train, params);
  const double tau = params.tau_c;
  double e = 0.0;
  double c = 0.0;
  double worst = 0.0;
  auto advance = [&](double from, double to) {
    const auto steps = static_cast<std::size_t>(std::max(1.0, std::ceil((to - from) / step - 1e-9)));
    const double h = (to - from) / static_cast<double>(steps);
    for (std::size_t j = 0; j < steps; ++j) {
      // Linear system; RK4 on (E, c).
      auto f = [&](double ee, double cc, double& de, double& dc) {
        de = -ee / tau;
        dc = ee - cc / tau;
      };
      double k1e, k1c, k2e, k2c, k3e, k3c, k4e, k4c;
      f(e, c, k1e, k1c);
      f(e + 0.5 * h * k1e, c + 0.5 * h * k1c, k2e, k2c);
      f(e + 0.5 * h * k2e, c + 0.5 * h * k2c, k3e, k3c);
      f(e + h * k3e, c + h * k3c, k4e, k4c);
      e += h / 6.0 * (k1e + 2 * k2e + 2 * k3e + k4e);
      c += h / 6.0 * (k1c + 2 * k2c + 2 * k3c + k4c);
      const double t = from + static_cast<double>(j + 1) * h;
      worst = std::max(worst, std::abs(c - eval_cN(train, params, t)));
    }
  };
  for (std::size_t i = 0; i < train.times.size(); ++i) {
    e += r.values[i] * train.amplitudes[i] / tau;
    advance(train.times[i], train.interval_end(i));
  }
  return worst;
}

FatigueProbe probe_fatigue(const ModelParams& params, double stim_s, double rest_s) {
  const PulseTrain train = PulseTrain::regular(7, 30.0, 20.0);
  std::vector<SessionSegment> plan;
  const auto reps = static_cast<std::size_t>(std::ceil(stim_s * 1000.0 / train.horizon));
  for (std::size_t i = 0; i < reps; ++i) plan.push_back(SessionSegment::stimulate(train));
  plan.push_back(SessionSegment::rest(rest_s * 1000.0));
  SimOptions o;
  o.record_every = 25;
  const auto traj = simulate_force_fatigue(plan, params, o);
  const double stim_end = static_cast<double>(reps) * train.horizon;
  FatigueProbe out;
  double a_end = params.a_rest;
  // Least-squares slope of log(A_rest - A) over the rest, skipping the first
  // second while the force decays.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t m = 0;
  for (std::size_t i = 0; i < traj.size(); ++i) {
    if (traj.grid[i] <= stim_end) a_end = traj.a[i];
    const double since = (traj.grid[i] - stim_end) * 1e-3;
    if (since < 1.0) continue;
    const double gap = params.a_rest - traj.a[i];
    if (!(gap > 0.0)) continue;
    const double x = since;
    const double y = std::log(gap);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++m;
  }
  out.drop = params.a_rest - a_end;
  if (m >= 2) {
    const double slope = (static_cast<double>(m) * sxy - sx * sy) / (static_cast<double>(m) * sxx - sx * sx);
    out.recovery_rate = -slope;
  }
  return out;
}

namespace {

struct Check {
  const char* name;
  std::function<CheckResult(const ModelParams&, const SuiteOptions&)> run;
};

CheckResult check_cn(const ModelParams& params, const SuiteOptions& opts) {
  std::mt19937_64 rng(opts.seed);
  double worst = 0.0;
  for (std::size_t k = 0; k < opts.cases; ++k) worst = std::max(worst, cn_rk4_deviation(random_train(rng), params));
  return {"cn_closed_form_vs_rk4", worst < 1e-8, worst, 1e-8, fmt::format("{} random trains", opts.cases)};
}

CheckResult check_lobe(const ModelParams& params, const SuiteOptions&) {
  PulseTrain t;
  t.times = {0.0};
  t.amplitudes = {1.0};
  t.horizon = 10.0 * params.tau_c;
  const double peak = eval_cN(t, params, params.tau_c);
  const double err = std::abs(peak - std::exp(-1.0)) * std::exp(1.0);
  return {"lobe_peak", err < 1e-10, err, 1e-10, "relative error of the peak value 1/e at tau_c"};
}

CheckResult check_oracles(const ModelParams& params, const SuiteOptions& opts) {
  std::mt19937_64 rng(opts.seed + 1);
  RandomTrainOptions ro;
  ro.n_max = 5;
  double worst = 0.0;
  const std::size_t cases = std::max<std::size_t>(1, opts.cases / 4);
  for (std::size_t k = 0; k < cases; ++k) {
    const auto train = random_train(rng, ro);
    SimOptions so;
    so.step = 0.05;
    so.extra_samples = {train.horizon};
    const auto traj = simulate_force(train, params, so);
    for (std::size_t i = 0; i < train.times.size(); ++i) {
      const double t = train.interval_end(i);
      worst = std::max(worst, std::abs(traj.force_at(t) - oracle_force_quadrature(train, params, t)));
    }
  }
  return {"oracle_concordance", worst < 1e-6, worst, 1e-6, "simulation vs nested quadrature at interval ends"};
}

CheckResult check_truncation(const ModelParams& params, const SuiteOptions& opts) {
  std::mt19937_64 rng(opts.seed + 2);
  std::size_t violations = 0;
  double worst_ratio = 0.0;
  for (std::size_t k = 0; k < opts.cases; ++k) {
    const std::size_t p = 1 + k % 3;
    const auto train = random_persistent_train(rng, p, params);
    const auto trunc = truncated_cN(train, params, p);
    for (std::size_t j = 0; j < train.times.size(); ++j) {
      const double bound = error_bound_persistent(train, params, p, j);
      const double lo = train.times[j];
      const double hi = train.interval_end(j);
      double gap = 0.0;
      // Half-open interval: at t_{j+1} the next truncation window applies.
      for (int s = 0; s < 200; ++s) {
        const double t = lo + (hi - lo) * s / 200.0;
        gap = std::max(gap, eval_cN(train, params, t) - trunc(t));
      }
      if (gap > bound + 1e-12) ++violations;
      if (bound > 0.0) worst_ratio = std::max(worst_ratio, gap / bound);
    }
  }
  return {"truncation_bound", violations == 0, static_cast<double>(violations), 0.0,
          fmt::format("largest gap/bound ratio {:.3g}", worst_ratio)};
}

CheckResult check_force_bound(const ModelParams& params, const SuiteOptions& opts) {
  std::mt19937_64 rng(opts.seed + 3);
  std::uniform_real_distribution<double> spacing(20.0, 38.0);
  std::size_t violations = 0;
  std::size_t checked = 0;
  for (std::size_t k = 0; k < opts.cases; ++k) {
    const auto train = PulseTrain::regular(2 + k % 5, spacing(rng), 20.0);
    const auto m = build_m_approx(train, params, Scheme::ConstantAverage, 2);
    const ForceApprox f(m, params.a_rest);
    SimOptions so;
    so.step = 0.05;
    const auto traj = simulate_force(train, params, so);
    for (std::size_t j = 1; j < train.times.size(); ++j) {
      const auto rep = error_bound_F(train, params, m, j);
      if (!rep.hypotheses_ok()) continue;
      ++checked;
      const double err = std::abs(traj.force_at(train.times[j]) - f(train.times[j])) / per_ms(params.a_rest);
      if (err > rep.bound) ++violations;
    }
  }
  return {"force_error_bound", violations == 0 && checked > 0, static_cast<double>(violations), 0.0,
          fmt::format("{} nodes with hypotheses satisfied", checked)};
}

CheckResult check_envelope(const ModelParams& params, const SuiteOptions&) {
  const auto train = PulseTrain::regular(5, 30.0, 20.0);
  const ForceApprox high(build_m_approx(train, params, Scheme::AffineConstant, 2, 0.95), params.a_rest);
  const auto traj = simulate_force(train, params);
  double worst = 0.0;
  for (std::size_t i = 0; i < traj.size(); ++i) worst = std::max(worst, traj.force[i] - high(traj.grid[i]));
  return {"upper_envelope", worst <= 1e-9, worst, 1e-9, "F - F~(nu = 0.95) on a regular 5-pulse train"};
}

CheckResult check_steady_state(const ModelParams& params, const SuiteOptions&) {
  const double f_ref = 0.1;
  const auto ss = steady_state_root(params, params.a_rest, f_ref);
  const double recon =
      per_ms(params.a_rest) * eval_m1(ss.c_n_ref, params) / eval_m2(ss.c_n_ref, params);
  const double err = std::abs(recon - f_ref);
  return {"steady_state_reconstruction", err < 1e-9, err, 1e-9, "A m1/m2 at c_ref vs F_ref"};
}

CheckResult check_fatigue(const ModelParams& params, const SuiteOptions&) {
  const auto probe = probe_fatigue(params);
  const double target = 1.0 / params.tau_fat;
  const double rel = std::abs(probe.recovery_rate - target) / target;
  const bool ok = probe.drop > 0.0 && rel < 0.02;
  return {"fatigue_recovery", ok, rel, 0.02,
          fmt::format("A drop {:.4g} kN/s under stimulation, recovery rate {:.5g} 1/s", probe.drop,
                      probe.recovery_rate)};
}

CheckResult check_speed(const ModelParams& params, const SuiteOptions&) {
  const auto r = time_approximation(PulseTrain::regular(5, 30.0, 20.0), params, Scheme::AffineConstant, 2, 0.95);
  return {"approx_speed", r.approx_s <= r.oracle_s, r.speedup(), 1.0,
          fmt::format("F~ {:.3g} s, simulation {:.3g} s over {} points", r.approx_s, r.oracle_s, r.points)};
}

const std::vector<std::pair<std::string, std::vector<Check>>>& suites() {
  static const std::vector<std::pair<std::string, std::vector<Check>>> table = {
      {"default",
       {{"cn_closed_form_vs_rk4", check_cn},
        {"lobe_peak", check_lobe},
        {"oracle_concordance", check_oracles},
        {"truncation_bound", check_truncation},
        {"force_error_bound", check_force_bound},
        {"upper_envelope", check_envelope},
        {"steady_state_reconstruction", check_steady_state},
        {"fatigue_recovery", check_fatigue},
        {"approx_speed", check_speed}}},
      {"fatigue", {{"fatigue_recovery", check_fatigue}}},
      {"bounds",
       {{"truncation_bound", check_truncation},
        {"force_error_bound", check_force_bound},
        {"upper_envelope", check_envelope}}},
  };
  return table;
}

}  // namespace

std::vector<std::string> suite_names() {
  std::vector<std::string> out;
  for (const auto& [name, checks] : suites()) out.push_back(name);
  return out;
}

std::vector<CheckResult> run_suite(const std::string& suite, const ModelParams& params, const SuiteOptions& opts) {
  const std::vector<Check>* checks = nullptr;
  for (const auto& [name, list] : suites()) {
    if (name == suite) checks = &list;
  }
  if (!checks) throw InvalidArgument("unknown suite '" + suite + "'");
  auto guarded = [&](const Check& c) {
    try {
      return c.run(params, opts);
    } catch (const std::exception& e) {
      return CheckResult{c.name, false, 0.0, 0.0, std::string("raised: ") + e.what()};
    }
  };
  std::vector<CheckResult> out;
  if (!opts.parallel) {
    for (const auto& c : *checks) out.push_back(guarded(c));
    return out;
  }
  // Timing checks run alone after the others so they do not compete for cores.
  const auto timed = [](const Check& c) { return std::string_view(c.name) == "approx_speed"; };
  std::vector<std::future<CheckResult>> jobs(checks->size());
  for (std::size_t i = 0; i < checks->size(); ++i) {
    const auto& c = (*checks)[i];
    if (!timed(c)) jobs[i] = std::async(std::launch::async, [&guarded, c] { return guarded(c); });
  }
  for (auto& j : jobs) {
    if (j.valid()) j.wait();
  }
  for (std::size_t i = 0; i < checks->size(); ++i) {
    out.push_back(jobs[i].valid() ? jobs[i].get() : guarded((*checks)[i]));
  }
  return out;
}

SpeedReport time_approximation(const PulseTrain& train, const ModelParams& params, Scheme scheme, std::size_t p,
                               double nu, std::size_t points, const SimOptions& sim, std::size_t repeats) {
  if (points < 2) throw InvalidArgument("time_approximation needs at least two points");
  using clock = std::chrono::steady_clock;
  const double t_end = train.horizon;
  std::vector<double> grid(points);
  for (std::size_t i = 0; i < points; ++i) grid[i] = t_end * static_cast<double>(i) / static_cast<double>(points - 1);

  SpeedReport r;
  r.points = points;
  r.build_s = r.approx_s = r.oracle_s = std::numeric_limits<double>::infinity();
  std::vector<double> approx(points);
  Trajectory traj;
  SimOptions so = sim;
  so.step = t_end / static_cast<double>(points - 1);
  so.record_every = 1;
  for (std::size_t rep = 0; rep < std::max<std::size_t>(1, repeats); ++rep) {
    const auto t0 = clock::now();
    const ForceApprox f(build_m_approx(train, params, scheme, p, nu), params.a_rest);
    const auto t1 = clock::now();
    for (std::size_t i = 0; i < points; ++i) approx[i] = f(grid[i]);
    const auto t2 = clock::now();
    traj = simulate_force(train, params, so);
    const auto t3 = clock::now();
    r.build_s = std::min(r.build_s, std::chrono::duration<double>(t1 - t0).count());
    r.approx_s = std::min(r.approx_s, std::chrono::duration<double>(t2 - t1).count());
    r.oracle_s = std::min(r.oracle_s, std::chrono::duration<double>(t3 - t2).count());
  }
  for (std::size_t i = 0; i < points; ++i) {
    const auto k = traj.index_of(grid[i]);
    if (k) r.max_abs_diff = std::max(r.max_abs_diff, std::abs(approx[i] - traj.force[*k]));
  }
  return r;
}

}  // namespace fes
