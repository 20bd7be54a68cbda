#include <doctest.h>

#include <cmath>

#include "../common/oracles.hpp"
#include "fes/errors.hpp"
#include "fes/model.hpp"

using namespace fes;

TEST_CASE("nominal parameters validate and broken ones do not") {
  const ModelParams p;
  CHECK_NOTHROW(p.validate());
  auto bad = p;
  bad.tau_c = 0.0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = p;
  bad.r_bar = 0.99;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = p;
  bad.k_m = -1.0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = p;
  bad.alpha_a = 0.4;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  CHECK_NOTHROW(bad.validate(false));
}

TEST_CASE("train validation") {
  auto tr = PulseTrain::regular(3, 30.0, 20.0);
  CHECK_NOTHROW(tr.validate());
  auto bad = tr;
  bad.times[2] = bad.times[1] + 10.0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = tr;
  bad.horizon = bad.times.back();
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = tr;
  bad.amplitudes[0] = 1.5;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
  bad = tr;
  bad.times[0] = 1.0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}

TEST_CASE("scaling factors") {
  const ModelParams p;
  SUBCASE("single pulse") {
    const auto r = compute_scaling(PulseTrain::regular(0, 30.0, 20.0), p);
    REQUIRE(r.values.size() == 1);
    CHECK(r.values[0] == 1.0);
  }
  SUBCASE("gap of one tau_c") {
    const auto r = compute_scaling(PulseTrain::regular(1, 20.0, 20.0), p);
    CHECK(r.values[1] == doctest::Approx(1.0 + 0.143 / std::exp(1.0)).epsilon(1e-14));
    CHECK(r.values[1] == doctest::Approx(1.052607).epsilon(1e-6));
  }
  SUBCASE("bounds and monotonicity in the gap") {
    oracle::Gen g(11);
    for (int k = 0; k < 200; ++k) {
      const auto tr = g.train();
      const auto r = compute_scaling(tr, p);
      CHECK(r.values[0] == 1.0);
      for (std::size_t i = 1; i < r.values.size(); ++i) {
        CHECK(r.values[i] > 1.0);
        CHECK(r.values[i] <= p.r_bar);
      }
    }
    double prev = 2.0;
    for (double gap = 5.0; gap < 200.0; gap += 5.0) {
      const double r = compute_scaling(PulseTrain::regular(1, gap, 0.0), p).values[1];
      CHECK(r < prev);
      prev = r;
    }
  }
}

TEST_CASE("lobe law for a single pulse") {
  const ModelParams p;
  const auto tr = PulseTrain::regular(0, 200.0, 20.0);
  CHECK(eval_cN(tr, p, p.tau_c) == doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
  CHECK(eval_cN(tr, p, 0.0) == 0.0);
  // Increasing up to tau_c, decreasing after.
  for (double t = 0.5; t < p.tau_c; t += 0.5) CHECK(eval_cN(tr, p, t) < eval_cN(tr, p, t + 0.5));
  for (double t = p.tau_c; t < 190.0; t += 0.5) CHECK(eval_cN(tr, p, t) > eval_cN(tr, p, t + 0.5));
  // Inflection at 2 tau_c: the second difference changes sign there.
  const double h = 0.01;
  auto d2 = [&](double t) { return eval_cN(tr, p, t + h) - 2 * eval_cN(tr, p, t) + eval_cN(tr, p, t - h); };
  CHECK(d2(2 * p.tau_c - 0.1) < 0.0);
  CHECK(d2(2 * p.tau_c + 0.1) > 0.0);
  // Mass within 5 tau_c: 1 - 6 e^-5 of the total tau_c.
  const double inside = oracle::simpson([&](double t) { return eval_cN(tr, p, t); }, 0.0, 5 * p.tau_c);
  CHECK(inside / p.tau_c == doctest::Approx(1.0 - 6.0 * std::exp(-5.0)).epsilon(1e-9));
  CHECK(inside / p.tau_c >= 0.95);
}

TEST_CASE("concentration equals the term-by-term sum and the ODE solution") {
  const ModelParams p;
  oracle::Gen g(7);
  for (int k = 0; k < 50; ++k) {
    const auto tr = g.train();
    CAPTURE(g.describe(tr));
    const auto ode = oracle::cn_ode(tr, p, tr.horizon, 0.02);
    double worst = 0.0;
    for (const auto& s : ode) worst = std::max(worst, std::abs(s.c - eval_cN(tr, p, s.t)));
    CHECK(worst < 1e-8);
    for (double t = 0.0; t <= tr.horizon; t += tr.horizon / 37.0)
      CHECK(eval_cN(tr, p, t) == doctest::Approx(oracle::cn(tr, p, t)).epsilon(1e-13));
  }
}

TEST_CASE("FES signal is right-continuous and decays") {
  const ModelParams p;
  const auto tr = PulseTrain::regular(1, 40.0, 20.0);
  CHECK(eval_E(tr, p, 0.0) == doctest::Approx(1.0 / p.tau_c));
  CHECK(eval_E(tr, p, -1e-9) == 0.0);
  CHECK(eval_E(tr, p, 39.999) < eval_E(tr, p, 40.0));
  CHECK(eval_E(tr, p, 10.0) == doctest::Approx(std::exp(-0.5) / p.tau_c));
}

TEST_CASE("Hill rates") {
  const ModelParams p;
  CHECK(eval_m1(0.0, p) == 0.0);
  CHECK(eval_m2(0.0, p) == doctest::Approx(1.0 / p.tau_1));
  double prev1 = -1.0, prev2 = 1.0;
  for (double c = 0.0; c < 3.0; c += 0.01) {
    const double a = eval_m1(c, p), b = eval_m2(c, p);
    CHECK(a >= 0.0);
    CHECK(a < 1.0);
    CHECK(a > prev1);
    CHECK(b < prev2);
    CHECK(b > 1.0 / (p.tau_1 + p.tau_2));
    CHECK(b <= 1.0 / p.tau_1);
    prev1 = a;
    prev2 = b;
    CHECK(a == doctest::Approx(oracle::m1(c, p)));
    CHECK(b == doctest::Approx(oracle::m2(c, p)));
  }
  // nu > 1 lowers both rates, nu < 1 raises them.
  for (double c : {0.01, 0.1, 1.0}) {
    CHECK(eval_m1(c, p, 1.05) < eval_m1(c, p));
    CHECK(eval_m1(c, p, 0.95) > eval_m1(c, p));
    CHECK(eval_m2(c, p, 0.95) == doctest::Approx(0.95 * eval_m2(c, p)));
  }
}

TEST_CASE("argmax of c_N on an interval") {
  const ModelParams p;
  SUBCASE("first interval peaks at tau_c") {
    const auto tr = PulseTrain::regular(2, 60.0, 20.0);
    CHECK(argmax_cN_interval(tr, p, 0) == doctest::Approx(p.tau_c));
  }
  SUBCASE("grid search oracle") {
    oracle::Gen g(5);
    for (int k = 0; k < 40; ++k) {
      const auto tr = g.train(4);
      CAPTURE(g.describe(tr));
      for (std::size_t j = 0; j < tr.times.size(); ++j) {
        const double lo = tr.times[j], hi = tr.interval_end(j);
        const double h = 1e-3;
        double best_t = lo, best = -1.0;
        for (double t = lo; t <= hi; t += h) {
          const double v = eval_cN(tr, p, t);
          if (v > best) best = v, best_t = t;
        }
        CHECK(std::abs(argmax_cN_interval(tr, p, j) - best_t) <= 2 * h);
      }
    }
  }
  SUBCASE("all-zero amplitudes") {
    auto tr = PulseTrain::regular(2, 30.0, 20.0, 0.0);
    CHECK_THROWS_AS(argmax_cN_interval(tr, p, 1), InvalidArgument);
  }
}

TEST_CASE("steady-state root") {
  const ModelParams p;
  SUBCASE("reconstruction") {
    for (double f : {0.01, 0.05, 0.1, 0.2, 0.3}) {
      const auto s = steady_state_root(p, p.a_rest, f);
      CHECK(s.m1_plus > 0.0);
      CHECK(s.c_n_ref > 0.0);
      const double recon = per_ms(p.a_rest) * oracle::m1(s.c_n_ref, p) / oracle::m2(s.c_n_ref, p);
      CHECK(std::abs(recon - f) < 1e-9);
    }
  }
  SUBCASE("nominal reference") {
    CHECK(steady_state_root(p, p.a_rest, 0.1).c_n_ref == doctest::Approx(0.05575).epsilon(1e-3));
  }
  SUBCASE("unreachable and invalid targets") {
    const double sat = per_ms(p.a_rest) * (p.tau_1 + p.tau_2);
    CHECK_THROWS_AS(steady_state_root(p, p.a_rest, sat * 1.01), UnreachableForce);
    CHECK_THROWS_AS(steady_state_root(p, p.a_rest, 0.0), InvalidArgument);
    CHECK_THROWS_AS(steady_state_root(p, 0.0, 0.1), InvalidArgument);
  }
}

TEST_CASE("lobe sum matches the train evaluation and supports appends") {
  const ModelParams p;
  const auto tr = PulseTrain::regular(4, 25.0, 20.0);
  const auto ls = LobeSum::from_train(tr, p);
  for (double t = 0.0; t < tr.horizon; t += 1.7) CHECK(ls(t) == doctest::Approx(eval_cN(tr, p, t)).epsilon(1e-14));
  // Derivative against a central difference.
  for (double t = 3.0; t < tr.horizon; t += 7.3) {
    if (std::fmod(t, 25.0) < 0.01 || std::fmod(t, 25.0) > 24.99) continue;
    const double fd = (ls(t + 1e-5) - ls(t - 1e-5)) / 2e-5;
    CHECK(ls.derivative(t) == doctest::Approx(fd).epsilon(1e-6));
  }
  LobeSum grow({0.0}, {1.0}, p.tau_c);
  const double later[] = {50.0};
  const double w[] = {0.5};
  grow.append(later, w);
  CHECK(grow(70.0) == doctest::Approx(std::exp(-3.5) * 3.5 + 0.5 * std::exp(-1.0)));
  const double early[] = {10.0};
  CHECK_THROWS_AS(grow.append(early, w), InvalidArgument);
}
