#pragma once

// Independent reference computations for the tests. Nothing here calls into
// the library's model code: the concentration, the rates and the force are
// re-derived from the ODEs and integrated with plain RK4 or adaptive Simpson.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "fes/model.hpp"

namespace oracle {

inline std::vector<double> scaling(const fes::PulseTrain& tr, const fes::ModelParams& p) {
  std::vector<double> r(tr.times.size(), 1.0);
  for (std::size_t i = 1; i < r.size(); ++i)
    r[i] = 1.0 + (p.r_bar - 1.0) * std::exp(-(tr.times[i] - tr.times[i - 1]) / p.tau_c);
  return r;
}

/// Direct lobe sum, written out term by term.
inline double cn(const fes::PulseTrain& tr, const fes::ModelParams& p, double t) {
  const auto r = scaling(tr, p);
  double s = 0.0;
  for (std::size_t i = 0; i < tr.times.size(); ++i) {
    if (t < tr.times[i]) break;
    const double x = (t - tr.times[i]) / p.tau_c;
    s += r[i] * tr.amplitudes[i] * x * std::exp(-x);
  }
  return s;
}

inline double m1(double c, const fes::ModelParams& p, double nu = 1.0) { return c / (nu * p.k_m + c); }
inline double m2(double c, const fes::ModelParams& p, double nu = 1.0) {
  return nu / (p.tau_1 + p.tau_2 * c / (p.k_m + c));
}

/// RK4 on the linear pair E' = -E/tau_c (jump R_i eta_i / tau_c at t_i),
/// c' = E - c/tau_c. Returns c on the uniform grid k*h, k = 0..N, with pulse
/// times inserted as extra step boundaries.
struct CnSample {
  double t;
  double c;
};
inline std::vector<CnSample> cn_ode(const fes::PulseTrain& tr, const fes::ModelParams& p, double t_end, double h) {
  const auto r = scaling(tr, p);
  std::vector<double> stops(tr.times.begin(), tr.times.end());
  stops.push_back(t_end);
  double e = 0.0, c = 0.0, t = 0.0;
  std::vector<CnSample> out;
  std::size_t next_pulse = 0;
  auto f = [&](double ee, double cc, double& de, double& dc) {
    de = -ee / p.tau_c;
    dc = ee - cc / p.tau_c;
  };
  for (double stop : stops) {
    while (next_pulse < tr.times.size() && tr.times[next_pulse] <= t) {
      e += r[next_pulse] * tr.amplitudes[next_pulse] / p.tau_c;
      ++next_pulse;
    }
    while (t < stop - 1e-12) {
      const double dt = std::min(h, stop - t);
      double k1e, k1c, k2e, k2c, k3e, k3c, k4e, k4c;
      f(e, c, k1e, k1c);
      f(e + 0.5 * dt * k1e, c + 0.5 * dt * k1c, k2e, k2c);
      f(e + 0.5 * dt * k2e, c + 0.5 * dt * k2c, k3e, k3c);
      f(e + dt * k3e, c + dt * k3c, k4e, k4c);
      e += dt / 6.0 * (k1e + 2 * k2e + 2 * k3e + k4e);
      c += dt / 6.0 * (k1c + 2 * k2c + 2 * k3c + k4c);
      t += dt;
      out.push_back({t, c});
    }
    t = stop;
  }
  return out;
}

/// RK4 on F' = A m1(c(t)) - m2(c(t)) F with c from the direct lobe sum.
/// a in kN/s. Steps are split at pulse times.
inline double force_rk4(const fes::PulseTrain& tr, const fes::ModelParams& p, double t_end, double h = 0.02,
                        double a = -1.0, double nu = 1.0) {
  const double a_ms = (a < 0.0 ? p.a_rest : a) * 1e-3;
  auto rhs = [&](double t, double f) {
    const double c = cn(tr, p, t);
    return a_ms * m1(c, p, nu) - m2(c, p, nu) * f;
  };
  std::vector<double> stops;
  for (double ti : tr.times)
    if (ti < t_end) stops.push_back(ti);
  stops.push_back(t_end);
  double f = 0.0, t = 0.0;
  for (double stop : stops) {
    while (t < stop - 1e-12) {
      const double dt = std::min(h, stop - t);
      const double k1 = rhs(t, f);
      const double k2 = rhs(t + 0.5 * dt, f + 0.5 * dt * k1);
      const double k3 = rhs(t + 0.5 * dt, f + 0.5 * dt * k2);
      const double k4 = rhs(t + dt, f + dt * k3);
      f += dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
      t += dt;
    }
    t = stop;
  }
  return f;
}

namespace detail {
inline double simpson_rec(const std::function<double(double)>& g, double a, double b, double fa, double fm, double fb,
                          double whole, double eps, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = g(lm), frm = g(rm);
  const double left = (m - a) / 6.0 * (fa + 4 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * eps) return left + right + (left + right - whole) / 15.0;
  return simpson_rec(g, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1) +
         simpson_rec(g, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1);
}
}  // namespace detail

/// Adaptive Simpson with Richardson correction.
inline double simpson(const std::function<double(double)>& g, double a, double b, double eps = 1e-13) {
  if (b <= a) return 0.0;
  const double fa = g(a), fb = g(b), fm = g(0.5 * (a + b));
  return detail::simpson_rec(g, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4 * fm + fb), eps, 40);
}

/// Integral split at the given breakpoints (kinks of the integrand).
inline double simpson_split(const std::function<double(double)>& g, double a, double b,
                            const std::vector<double>& cuts, double eps = 1e-13) {
  std::vector<double> pts{a};
  for (double c : cuts)
    if (c > a && c < b) pts.push_back(c);
  pts.push_back(b);
  double s = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) s += simpson(g, pts[i], pts[i + 1], eps);
  return s;
}

/// Hand-rolled generator for property tests. Each case carries its seed so
/// a failure can be replayed.
struct Gen {
  std::uint64_t seed;
  std::mt19937_64 rng;
  explicit Gen(std::uint64_t s) : seed(s), rng(s) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }
  std::size_t index(std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); }

  fes::PulseTrain train(std::size_t n_max = 10, double i_min = 20.0, double gap_max = 80.0, bool unit = false) {
    fes::PulseTrain tr;
    tr.i_min = i_min;
    const std::size_t n = index(0, n_max);
    double t = 0.0;
    for (std::size_t i = 0; i <= n; ++i) {
      if (i > 0) t += uniform(i_min, gap_max);
      tr.times.push_back(t);
      tr.amplitudes.push_back(unit ? 1.0 : uniform(0.05, 1.0));
    }
    tr.horizon = t + uniform(5.0, 100.0);
    return tr;
  }

  std::string describe(const fes::PulseTrain& tr) const {
    std::ostringstream os;
    os << "seed=" << seed << " times=[";
    for (double t : tr.times) os << t << ' ';
    os << "] T=" << tr.horizon;
    return os.str();
  }
};

}  // namespace oracle
