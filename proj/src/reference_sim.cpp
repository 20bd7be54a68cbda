#include "fes/reference_sim.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "fes/errors.hpp"
#include "quadrature.hpp"

namespace fes {

void SimOptions::validate() const {
  if (!(step > 0.0)) throw InvalidArgument("simulation step must be positive");
  if (!(abs_tol > 0.0) || !(rel_tol > 0.0)) throw InvalidArgument("tolerances must be positive");
  if (record_every == 0) throw InvalidArgument("record_every must be >= 1");
}

void Trajectory::push(double t, const HillState& s) {
  grid.push_back(t);
  c_n.push_back(s.c_n);
  force.push_back(s.force);
  a.push_back(s.a);
}

std::optional<std::size_t> Trajectory::index_of(double t) const {
  auto it = std::lower_bound(grid.begin(), grid.end(), t);
  if (it == grid.end() || *it != t) return std::nullopt;
  return static_cast<std::size_t>(it - grid.begin());
}

double Trajectory::force_at(double t) const {
  const auto i = index_of(t);
  if (!i) throw InvalidArgument("time " + std::to_string(t) + " is not on the trajectory grid");
  return force[*i];
}

SessionSimulator::SessionSimulator(const ModelParams& params, SimOptions opts, bool fatigue)
    : params_(params), opts_(std::move(opts)), fatigue_(fatigue), lobes_({}, {}, params.tau_c),
      state_(HillState::at_rest(params)) {
  opts_.validate();
  std::sort(opts_.extra_samples.begin(), opts_.extra_samples.end());
}

void SessionSimulator::derivs(double t, double f, double a, double& df, double& da) const {
  const double c = lobes_(t);
  const double m1 = eval_m1(c, params_);
  const double m2 = eval_m2(c, params_);
  df = -m2 * f + m1 * per_ms(a);
  da = fatigue_ ? 1e-3 * (-(a - params_.a_rest) / params_.tau_fat + params_.alpha_a * f) : 0.0;
}

void SessionSimulator::run(const SessionSegment& segment) {
  if (!(segment.duration > 0.0)) throw InvalidArgument("segment duration must be positive");
  const double start = now_;
  const double end = start + segment.duration;

  std::vector<double> cuts;
  if (segment.train) {
    const PulseTrain& train = *segment.train;
    train.validate();
    if (train.horizon != segment.duration) throw InvalidArgument("train horizon must equal segment duration");
    const auto r = compute_scaling(train, params_);
    std::vector<double> onsets(train.times.size());
    std::vector<double> weights(train.times.size());
    for (std::size_t i = 0; i < train.times.size(); ++i) {
      onsets[i] = start + train.times[i];
      weights[i] = r.values[i] * train.amplitudes[i];
    }
    lobes_.append(onsets, weights);
    if (opts_.refine_at_pulses) cuts.insert(cuts.end(), onsets.begin(), onsets.end());
  }
  for (double s : opts_.extra_samples) {
    if (s > start && s < end) cuts.push_back(s);
  }
  cuts.push_back(end);
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  if (traj_.size() == 0) {
    state_.c_n = lobes_(start);
    traj_.push(start, state_);
  }
  double from = start;
  for (double to : cuts) {
    if (to <= from) continue;
    integrate_piece(from, to);
    from = to;
  }
  now_ = end;
}

void SessionSimulator::integrate_piece(double from, double to) {
  if (opts_.method == Integrator::FixedRk4) {
    rk4_piece(from, to);
  } else {
    adaptive_piece(from, to);
  }
}

void SessionSimulator::rk4_piece(double from, double to) {
  const double len = to - from;
  const auto steps = static_cast<std::size_t>(std::max(1.0, std::ceil(len / opts_.step - 1e-9)));
  const double h = len / static_cast<double>(steps);
  double f = state_.force;
  double a = state_.a;
  for (std::size_t j = 0; j < steps; ++j) {
    const double t = from + static_cast<double>(j) * h;
    double k1f, k1a, k2f, k2a, k3f, k3a, k4f, k4a;
    derivs(t, f, a, k1f, k1a);
    derivs(t + 0.5 * h, f + 0.5 * h * k1f, a + 0.5 * h * k1a, k2f, k2a);
    derivs(t + 0.5 * h, f + 0.5 * h * k2f, a + 0.5 * h * k2a, k3f, k3a);
    derivs(t + h, f + h * k3f, a + h * k3a, k4f, k4a);
    f += h / 6.0 * (k1f + 2.0 * k2f + 2.0 * k3f + k4f);
    a += h / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a);
    const bool last = j + 1 == steps;
    const double t_next = last ? to : from + static_cast<double>(j + 1) * h;
    if (last || (j + 1) % opts_.record_every == 0) {
      state_ = {lobes_(t_next), f, a};
      traj_.push(t_next, state_);
    }
  }
  state_ = {lobes_(to), f, a};
}

// Dormand-Prince 5(4) with a standard PI-free step controller.
void SessionSimulator::adaptive_piece(double from, double to) {
  static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
  static constexpr double a21 = 1.0 / 5;
  static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
  static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
  static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                          a54 = -212.0 / 729;
  static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                          a65 = -5103.0 / 18656;
  static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                          b6 = 11.0 / 84;
  static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                          e6 = 22.0 / 525, e7 = -1.0 / 40;

  const double h_floor = 1e-12 * std::max(1.0, std::abs(to));
  double t = from;
  double h = std::min(opts_.step, to - from);
  std::array<double, 2> y{state_.force, state_.a};
  std::size_t accepted = 0;

  auto eval = [&](double tt, const std::array<double, 2>& yy) {
    std::array<double, 2> d{};
    derivs(tt, yy[0], yy[1], d[0], d[1]);
    return d;
  };

  std::array<double, 2> k1 = eval(t, y);
  while (t < to) {
    bool last = false;
    if (t + h >= to) {
      h = to - t;
      last = true;
    }
    std::array<double, 2> k2, k3, k4, k5, k6, k7, yt, y5;
    for (int i = 0; i < 2; ++i) yt[i] = y[i] + h * a21 * k1[i];
    k2 = eval(t + c2 * h, yt);
    for (int i = 0; i < 2; ++i) yt[i] = y[i] + h * (a31 * k1[i] + a32 * k2[i]);
    k3 = eval(t + c3 * h, yt);
    for (int i = 0; i < 2; ++i) yt[i] = y[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
    k4 = eval(t + c4 * h, yt);
    for (int i = 0; i < 2; ++i) yt[i] = y[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
    k5 = eval(t + c5 * h, yt);
    for (int i = 0; i < 2; ++i)
      yt[i] = y[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] + a65 * k5[i]);
    k6 = eval(t + h, yt);
    for (int i = 0; i < 2; ++i)
      y5[i] = y[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
    k7 = eval(t + h, y5);

    double err = 0.0;
    for (int i = 0; i < 2; ++i) {
      const double e = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] + e7 * k7[i]);
      const double scale = opts_.abs_tol + opts_.rel_tol * std::max(std::abs(y[i]), std::abs(y5[i]));
      err = std::max(err, std::abs(e) / scale);
    }

    if (err <= 1.0) {
      t = last ? to : t + h;
      y = y5;
      k1 = k7;
      ++accepted;
      if (last || accepted % opts_.record_every == 0) {
        state_ = {lobes_(t), y[0], y[1]};
        traj_.push(t, state_);
      }
      if (last) break;
    }
    const double factor = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
    h = std::min(h * factor, opts_.step * 50.0);
    if (h < h_floor) {
      throw StepTooLarge("adaptive step underflow at t = " + std::to_string(t) + " ms");
    }
  }
  state_ = {lobes_(to), y[0], y[1]};
}

Trajectory simulate_force(const PulseTrain& train, const ModelParams& params, const SimOptions& opts) {
  SessionSimulator sim(params, opts, false);
  sim.run(SessionSegment::stimulate(train));
  return sim.take_trajectory();
}

Trajectory simulate_force_fatigue(std::span<const SessionSegment> sequence, const ModelParams& params,
                                  const SimOptions& opts) {
  SessionSimulator sim(params, opts, true);
  for (const auto& segment : sequence) sim.run(segment);
  return sim.take_trajectory();
}

namespace {

// Nested-quadrature evaluation of the exact force integral. Node values of
// the clock W(t) = int_0^t m2 are cached at the impulse times.
class QuadratureOracle {
 public:
  QuadratureOracle(const PulseTrain& train, const ModelParams& params)
      : params_(params), lobes_(LobeSum::from_train(train, params)), a_(per_ms(params.a_rest)) {
    train.validate();
    nodes_ = train.times;
    nodes_.push_back(train.horizon);
    clock_nodes_.assign(nodes_.size(), 0.0);
    for (std::size_t i = 0; i + 1 < nodes_.size(); ++i) {
      clock_nodes_[i + 1] = clock_nodes_[i] + detail::integrate([this](double s) { return m2(s); },
                                                                nodes_[i], nodes_[i + 1], kClockTarget);
    }
  }

  double m1(double t) const { return eval_m1(lobes_(t), params_); }
  double m2(double t) const { return eval_m2(lobes_(t), params_); }
  double m3(double t) const {
    const double c = lobes_(t);
    return a_ * eval_m1(c, params_) / eval_m2(c, params_);
  }

  std::size_t piece_of(double t) const {
    auto it = std::upper_bound(nodes_.begin(), nodes_.end(), t);
    const auto k = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, (it - nodes_.begin()) - 1));
    return std::min(k, nodes_.size() - 2);
  }

  double clock(double t) const {
    const std::size_t k = piece_of(t);
    return clock_nodes_[k] +
           detail::integrate([this](double s) { return m2(s); }, nodes_[k], t, kClockTarget);
  }

  double force(double t) const {
    if (t <= 0.0) return 0.0;
    const double w_t = clock(t);
    double sum = 0.0;
    for (std::size_t i = 0; i + 1 < nodes_.size() && nodes_[i] < t; ++i) {
      const double lo = nodes_[i];
      const double hi = std::min(nodes_[i + 1], t);
      const double w_lo = clock_nodes_[i];
      sum += detail::integrate(
          [&](double s) {
            const double w_s =
                w_lo + detail::integrate([this](double u) { return m2(u); }, lo, s, kClockTarget);
            return std::exp(w_s - w_t) * m1(s);
          },
          lo, hi, kForceTarget / a_);
    }
    return a_ * sum;
  }

  /// t such that clock(t) = u, by safeguarded Newton.
  double invert_clock(double u) const {
    auto it = std::upper_bound(clock_nodes_.begin(), clock_nodes_.end(), u);
    auto k = static_cast<std::size_t>(std::max<std::ptrdiff_t>(0, (it - clock_nodes_.begin()) - 1));
    k = std::min(k, nodes_.size() - 2);
    double lo = nodes_[k];
    double hi = nodes_[k + 1];
    const double frac = (u - clock_nodes_[k]) / (clock_nodes_[k + 1] - clock_nodes_[k]);
    double t = lo + std::clamp(frac, 0.0, 1.0) * (hi - lo);
    for (int iter = 0; iter < 100; ++iter) {
      const double g = clock_nodes_[k] +
                       detail::integrate([this](double s) { return m2(s); }, nodes_[k], t, kClockTarget) - u;
      if (g > 0.0) hi = t; else lo = t;
      double next = t - g / m2(t);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (std::abs(next - t) <= 1e-13 * std::max(1.0, std::abs(t))) return next;
      t = next;
    }
    throw QuadratureNoConvergence("clock inversion did not converge");
  }

  const std::vector<double>& clock_nodes() const { return clock_nodes_; }

 private:
  static constexpr double kClockTarget = 1e-12;
  static constexpr double kForceTarget = 1e-11;

  ModelParams params_;
  LobeSum lobes_;
  double a_;
  std::vector<double> nodes_;
  std::vector<double> clock_nodes_;
};

}  // namespace

double oracle_force_quadrature(const PulseTrain& train, const ModelParams& params, double t) {
  if (t < 0.0 || t > train.horizon) throw InvalidArgument("oracle time outside [0, T]");
  return QuadratureOracle(train, params).force(t);
}

std::vector<double> oracle_force_quadrature(const PulseTrain& train, const ModelParams& params,
                                            std::span<const double> times) {
  QuadratureOracle oracle(train, params);
  std::vector<double> out;
  out.reserve(times.size());
  for (double t : times) {
    if (t < 0.0 || t > train.horizon) throw InvalidArgument("oracle time outside [0, T]");
    out.push_back(oracle.force(t));
  }
  return out;
}

double reparam_clock(const PulseTrain& train, const ModelParams& params, double t) {
  if (t < 0.0 || t > train.horizon) throw InvalidArgument("clock time outside [0, T]");
  return QuadratureOracle(train, params).clock(t);
}

double reparam_force_check(const PulseTrain& train, const ModelParams& params, double s_max,
                           std::size_t samples) {
  QuadratureOracle oracle(train, params);
  const auto& s_nodes = oracle.clock_nodes();
  if (!(s_max > 0.0) || s_max > s_nodes.back() * (1.0 + 1e-14))
    throw InvalidArgument("s_max must lie in (0, s(T)]");
  if (samples == 0) throw InvalidArgument("need at least one sample");

  double worst = 0.0;
  for (std::size_t j = 1; j <= samples; ++j) {
    const double s = std::min(s_max * static_cast<double>(j) / static_cast<double>(samples), s_nodes.back());
    // F(s) = int_0^s e^{u - s} m3(u) du, split where the clock crosses impulse times.
    double f_reparam = 0.0;
    for (std::size_t i = 0; i + 1 < s_nodes.size() && s_nodes[i] < s; ++i) {
      const double lo = s_nodes[i];
      const double hi = std::min(s_nodes[i + 1], s);
      f_reparam += detail::integrate(
          [&](double u) { return std::exp(u - s) * oracle.m3(oracle.invert_clock(u)); }, lo, hi, 1e-11);
    }
    const double f_oracle = oracle.force(oracle.invert_clock(s));
    worst = std::max(worst, std::abs(f_reparam - f_oracle));
  }
  return worst;
}

}  // namespace fes
