#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "../common/oracles.hpp"
#include "fes/errors.hpp"
#include "fes/planner.hpp"

using namespace fes;

TEST_CASE("program kinds and spec validation") {
  for (auto k : {ProgramKind::Endurance, ProgramKind::Punch, ProgramKind::TrainEndurance})
    CHECK(program_from_string(to_string(k)) == k);
  ProgramSpec s;
  CHECK_NOTHROW(s.validate());
  s.k_ratio = 1.0;
  CHECK_THROWS_AS(s.validate(), InvalidArgument);
  s = {};
  s.k_fatigue = 0.5;
  CHECK_THROWS_AS(s.validate(), InvalidArgument);
  s = {};
  s.train_ms = 100.0;  // 8 pulses at 20 ms do not fit
  CHECK_THROWS_AS(s.validate(), InvalidArgument);
  const ModelParams p;
  s = {};
  CHECK(s.rest_duration(p) == 60000.0);
  s.rest_ms = 1500.0;
  CHECK(s.rest_duration(p) == 1500.0);
}

TEST_CASE("holding the reference concentration settles the force on F_ref") {
  const ModelParams p;
  const double f_ref = 0.1;
  const auto ss = steady_state_root(p, p.a_rest, f_ref);
  const double m2 = oracle::m2(ss.c_n_ref, p);
  const auto tr = hold_concentration(p, ss.c_n_ref, p.a_rest, 8.0 / m2);
  CHECK(std::abs(tr.force.back() - f_ref) < 1e-3 * f_ref);
  // Linear ODE from rest: log(F_ref - F) is a line with slope -m2.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t n = 0;
  for (std::size_t i = 1; i < tr.size(); ++i) {
    const double x = tr.grid[i], y = std::log(f_ref - tr.force[i]);
    sx += x, sy += y, sxx += x * x, sxy += x * y, ++n;
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  CHECK(std::abs(-slope / m2 - 1.0) < 0.02);
  CHECK_THROWS_AS(hold_concentration(p, 0.1, p.a_rest, 0.0), InvalidArgument);
}

TEST_CASE("endurance program") {
  const ModelParams p;
  ProgramSpec spec;
  spec.t_f_s = 12.0;
  spec.rest_ms = 2000.0;
  spec.record_every = 5;
  const auto prog = plan_endurance(spec, p);

  SUBCASE("reference and tiling") {
    CHECK(prog.f_ref == 0.1);
    CHECK(prog.c_n_ref == doctest::Approx(steady_state_root(p, p.a_rest, 0.1).c_n_ref));
    CHECK(prog.a_s == doctest::Approx(p.a_rest / 2));
    CHECK(prog.total_duration() == doctest::Approx(12000.0).epsilon(1e-12));
    double clock = 0.0;
    for (const auto& seg : prog.segments) {
      CHECK(seg.start == doctest::Approx(clock).epsilon(1e-12));
      CHECK(seg.duration > 0.0);
      if (seg.train) CHECK(seg.train->horizon == seg.duration);
      clock += seg.duration;
    }
    CHECK(prog.trains.size() >= 5);
    CHECK_FALSE(prog.threshold_breached);
  }

  SUBCASE("fatigue drifts down during trains and recovers over each rest") {
    const auto& tr = prog.trajectory;
    for (const auto& t : prog.trains) CHECK(t.a_end < t.a_start);
    for (const auto& seg : prog.segments) {
      if (seg.train) continue;
      const double lo = seg.start, hi = seg.start + seg.duration;
      std::size_t first = tr.size(), last = 0;
      for (std::size_t i = 0; i < tr.size(); ++i) {
        if (tr.grid[i] >= lo && tr.grid[i] <= hi) first = std::min(first, i), last = i;
      }
      REQUIRE(first < last);
      // The residual force keeps pulling A down at the start of a rest, and
      // a 2 s rest is short against tau_fat, so A need not end above its
      // starting value. It must turn around, though: once the force has
      // decayed (a few tau_1 + tau_2), A only rises.
      const double lowest = *std::min_element(tr.a.begin() + first, tr.a.begin() + last + 1);
      if (seg.duration >= 1500.0) CHECK(tr.a[last] > lowest);
      for (std::size_t i = first + 1; i <= last; ++i) {
        if (tr.grid[i - 1] >= lo + 1000.0) CHECK(tr.a[i] >= tr.a[i - 1]);
      }
    }
  }

  SUBCASE("the optimized template tracks the reference concentration") {
    const auto& seg = prog.segments.front();
    REQUIRE(seg.train);
    const auto& tr = *seg.train;
    for (std::size_t i = 1; i < tr.times.size(); ++i) CHECK(tr.times[i] - tr.times[i - 1] >= spec.i_min - 1e-6);
    double mean = 0.0;
    for (double t = 0.5; t < tr.horizon; t += 1.0) mean += eval_cN(tr, p, t);
    mean /= tr.horizon;
    CHECK(mean == doctest::Approx(prog.c_n_ref).epsilon(0.1));
  }
}

TEST_CASE("the nu-envelope around the planned train") {
  // The ordering low <= high always holds. Pointwise containment of the
  // simulated force is only approached as the partition is refined: the
  // lower curve of the affine-constant scheme overshoots on falling
  // segments. We check the upper side exactly and that the lower-side
  // excess shrinks with refinement.
  const ModelParams p;
  ProgramSpec spec;
  const auto tmpl = solve_template(spec, p, steady_state_root(p, p.a_rest, 0.1).c_n_ref);
  auto tr = tmpl.sigma_star.to_train();
  const auto traj = simulate_force(tr, p);
  double prev_excess = 1.0;
  for (std::size_t depth : {2, 4, 8, 16}) {
    const ForceEnvelope env(tr, p, 1.05, 0.95, Scheme::AffineConstant, depth);
    double excess = 0.0;
    for (std::size_t i = 0; i < traj.size(); ++i) {
      const auto e = env(traj.grid[i]);
      CHECK(e.low <= e.high);
      CHECK(traj.force[i] <= e.high + 1e-9);
      excess = std::max(excess, e.low - traj.force[i]);
    }
    CAPTURE(depth);
    CHECK(excess < prev_excess);
    prev_excess = excess;
  }
  CHECK(prev_excess < 1e-3);
}

TEST_CASE("maximal force") {
  const ModelParams p;
  FMaxConfig seven;
  FMaxConfig five;
  five.pulses = 5;
  FMaxConfig single;
  single.pulses = 0;
  const double f7 = derive_f_max(p, seven), f5 = derive_f_max(p, five), f0 = derive_f_max(p, single);
  CHECK(f7 >= f5);
  CHECK(f5 > f0);
  // The single-pulse peak by dense sampling of an independent integration.
  const auto one = PulseTrain::regular(0, 300.0, 20.0);
  double peak = 0.0;
  for (double t = 10.0; t < 300.0; t += 1.0) peak = std::max(peak, oracle::force_rk4(one, p, t, 0.05));
  CHECK(f7 > peak);
  CHECK(f0 == doctest::Approx(peak).epsilon(1e-3));
  FMaxConfig off;
  off.amplitude = 0.0;
  CHECK(derive_f_max(p, off) == 0.0);
}

TEST_CASE("unreachable targets surface as errors") {
  const ModelParams p;
  ProgramSpec spec;
  spec.f_ref = 1.0;  // above A (tau_1 + tau_2)
  CHECK_THROWS_AS(plan_endurance(spec, p), UnreachableForce);
}
