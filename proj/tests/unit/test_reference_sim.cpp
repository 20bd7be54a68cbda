#include <doctest.h>

#include <cmath>

#include "../common/oracles.hpp"
#include "fes/errors.hpp"
#include "fes/reference_sim.hpp"

using namespace fes;

TEST_CASE("trajectory grid and initial state") {
  const ModelParams p;
  const auto tr = PulseTrain::regular(3, 27.0, 20.0);
  const auto traj = simulate_force(tr, p);
  REQUIRE(traj.size() > 2);
  CHECK(traj.grid.front() == 0.0);
  CHECK(traj.grid.back() == tr.horizon);
  CHECK(traj.c_n.size() == traj.size());
  CHECK(traj.force.size() == traj.size());
  CHECK(traj.a.size() == traj.size());
  CHECK(traj.force.front() == 0.0);
  CHECK(traj.a.front() == p.a_rest);
  for (std::size_t i = 1; i < traj.size(); ++i) CHECK(traj.grid[i] > traj.grid[i - 1]);
  // Every impulse time is a grid point exactly once.
  for (double t : tr.times) {
    CHECK(traj.index_of(t).has_value());
    CHECK(std::count(traj.grid.begin(), traj.grid.end(), t) == 1);
  }
  CHECK_THROWS_AS(traj.force_at(1.234567), InvalidArgument);
}

TEST_CASE("positivity and fatigue sign on random trains") {
  const ModelParams p;
  oracle::Gen g(21);
  for (int k = 0; k < 30; ++k) {
    const auto tr = g.train(8);
    CAPTURE(g.describe(tr));
    const std::vector<SessionSegment> plan{SessionSegment::stimulate(tr), SessionSegment::rest(500.0)};
    const auto traj = simulate_force_fatigue(plan, p);
    for (std::size_t i = 0; i < traj.size(); ++i) {
      CHECK(traj.force[i] >= 0.0);
      CHECK(traj.c_n[i] >= 0.0);
      CHECK(traj.a[i] <= p.a_rest);
    }
  }
}

TEST_CASE("single pulse agrees with the quadrature oracle and an independent RK4") {
  const ModelParams p;
  const auto tr = PulseTrain::regular(0, 150.0, 20.0);
  SimOptions so;
  for (int j = 1; j <= 20; ++j) so.extra_samples.push_back(7.5 * j);
  const auto traj = simulate_force(tr, p, so);
  for (int j = 1; j <= 20; ++j) {
    const double t = 7.5 * j;
    const auto i = traj.index_of(t);
    REQUIRE(i.has_value());
    CHECK(std::abs(traj.force[*i] - oracle_force_quadrature(tr, p, t)) < 1e-7);
  }
  CHECK(std::abs(traj.force.back() - oracle::force_rk4(tr, p, tr.horizon, 0.01)) < 1e-8);
  // Force rises while m1 grows, up to the c_N peak.
  for (std::size_t i = 1; i < traj.size() && traj.grid[i] <= p.tau_c; ++i) CHECK(traj.force[i] > traj.force[i - 1]);
}

TEST_CASE("three oracles agree on random trains") {
  const ModelParams p;
  oracle::Gen g(33);
  for (int k = 0; k < 12; ++k) {
    const auto tr = g.train(4);
    CAPTURE(g.describe(tr));
    const auto traj = simulate_force(tr, p);
    for (double t : {tr.horizon * 0.3, tr.horizon * 0.71, tr.horizon}) {
      SimOptions so;
      so.extra_samples = {t};
      const auto tj = simulate_force(tr, p, so);
      CHECK(std::abs(tj.force_at(t) - oracle_force_quadrature(tr, p, t)) < 1e-6);
    }
    CHECK(std::abs(traj.force.back() - oracle::force_rk4(tr, p, tr.horizon, 0.02)) < 1e-7);
    CHECK(reparam_force_check(tr, p, reparam_clock(tr, p, tr.horizon), 8) < 1e-6);
  }
}

TEST_CASE("reparameterized clock on a single pulse") {
  const ModelParams p;
  const auto tr = PulseTrain::regular(0, 100.0, 20.0);
  CHECK(reparam_force_check(tr, p, reparam_clock(tr, p, 100.0)) < 1e-6);
  // s(t) = int m2 is increasing with slope at most 1/tau_1.
  CHECK(reparam_clock(tr, p, 50.0) < reparam_clock(tr, p, 60.0));
  CHECK(reparam_clock(tr, p, 50.0) <= 50.0 / p.tau_1);
  CHECK_THROWS_AS(reparam_force_check(tr, p, -1.0), InvalidArgument);
}

TEST_CASE("fixed-step RK4 converges at fourth order") {
  const ModelParams p;
  PulseTrain tr;
  tr.times = {0.0, 23.0, 51.0};
  tr.amplitudes = {1.0, 0.7, 0.9};
  tr.horizon = 80.0;
  tr.i_min = 20.0;
  const double ref = oracle_force_quadrature(tr, p, tr.horizon);
  auto at = [&](double h) {
    SimOptions so;
    so.step = h;
    return simulate_force(tr, p, so).force.back();
  };
  const double e1 = std::abs(at(1.0) - ref);
  const double e2 = std::abs(at(0.5) - ref);
  CAPTURE(e1);
  CAPTURE(e2);
  CHECK(std::log2(e1 / e2) >= 3.5);
}

TEST_CASE("adaptive integrator matches fixed step") {
  const ModelParams p;
  const auto tr = PulseTrain::regular(5, 33.0, 20.0);
  SimOptions so;
  so.method = Integrator::Adaptive;
  const auto a = simulate_force(tr, p, so);
  CHECK(std::abs(a.force.back() - simulate_force(tr, p).force.back()) < 1e-8);
}

TEST_CASE("record_every thins interior points only") {
  const ModelParams p;
  const auto tr = PulseTrain::regular(2, 40.0, 20.0);
  SimOptions so;
  so.record_every = 10;
  const auto thin = simulate_force(tr, p, so);
  const auto full = simulate_force(tr, p);
  CHECK(thin.size() < full.size() / 5);
  CHECK(thin.force.back() == full.force.back());
  for (double t : tr.times) CHECK(thin.index_of(t).has_value());
}

TEST_CASE("empty stimulation yields zero force") {
  const ModelParams p;
  const auto tr = PulseTrain::regular(3, 30.0, 20.0, 0.0);
  const auto traj = simulate_force(tr, p);
  for (double f : traj.force) CHECK(f == 0.0);
}

TEST_CASE("fatigue: A drops under stimulation and recovers at rate 1/tau_fat") {
  const ModelParams p;
  auto train = PulseTrain::regular(99, 30.0, 20.0);
  SimOptions so;
  so.record_every = 25;
  SessionSimulator sim(p, so, true);
  sim.run(SessionSegment::stimulate(train));
  const double a_stim = sim.state().a;
  CHECK(a_stim < p.a_rest);
  sim.run(SessionSegment::rest(60000.0));
  const auto& tr = sim.trajectory();
  CHECK(tr.a.back() > a_stim);
  CHECK(tr.a.back() < p.a_rest);
  // Least-squares slope of log(A_rest - A) once F has died out.
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  std::size_t n = 0;
  const double t0 = train.horizon + 2000.0;
  for (std::size_t i = 0; i < tr.size(); ++i) {
    if (tr.grid[i] < t0) continue;
    const double x = tr.grid[i] * 1e-3, y = std::log(p.a_rest - tr.a[i]);
    sx += x, sy += y, sxx += x * x, sxy += x * y, ++n;
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  CHECK(std::abs(-slope * p.tau_fat - 1.0) < 0.02);
  // After the force has decayed, A is non-decreasing through the rest.
  for (std::size_t i = 1; i < tr.size(); ++i) {
    if (tr.grid[i - 1] >= t0) CHECK(tr.a[i] >= tr.a[i - 1]);
  }
}

TEST_CASE("invalid options and segments") {
  SimOptions so;
  so.step = 0.0;
  CHECK_THROWS_AS(so.validate(), InvalidArgument);
  so = {};
  so.record_every = 0;
  CHECK_THROWS_AS(so.validate(), InvalidArgument);
  const ModelParams p;
  SessionSimulator sim(p, {}, true);
  CHECK_THROWS_AS(sim.run(SessionSegment::rest(0.0)), InvalidArgument);
  const auto tr = PulseTrain::regular(1, 30.0, 20.0);
  CHECK_THROWS_AS(oracle_force_quadrature(tr, p, tr.horizon + 1.0), InvalidArgument);
}
