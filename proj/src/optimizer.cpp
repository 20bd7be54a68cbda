#include "fes/optimizer.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <future>
#include <limits>
#include <thread>

#include "fes/concentration_approx.hpp"
#include "fes/errors.hpp"
#include "quadrature.hpp"

namespace fes {

// ---------------------------------------------------------------- sigma

void DecisionVector::freeze_amplitudes(bool on) {
  frozen.resize(dim(), false);
  for (std::size_t i = 0; i <= n; ++i) frozen[eta_index(i)] = on;
}

void DecisionVector::freeze_times(bool on) {
  frozen.resize(dim(), false);
  for (std::size_t i = 1; i <= n; ++i) frozen[time_index(i)] = on;
}

void DecisionVector::freeze_horizon(bool on) {
  frozen.resize(dim(), false);
  frozen[horizon_index()] = on;
}

std::size_t DecisionVector::free_count() const {
  std::size_t c = 0;
  for (std::size_t i = 0; i < dim(); ++i) c += (i < frozen.size() && frozen[i]) ? 0 : 1;
  return c;
}

PulseTrain DecisionVector::to_train() const {
  if (sigma.size() != dim()) throw InvalidArgument("sigma has the wrong dimension");
  PulseTrain train;
  train.times.resize(n + 1);
  train.amplitudes.resize(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    train.times[i] = time(i);
    train.amplitudes[i] = eta(i);
    if (!(eta(i) >= 0.0 && eta(i) <= 1.0)) throw InfeasibleSigma("amplitude outside [0, 1]");
    if (i > 0 && !(train.times[i] > train.times[i - 1])) throw InfeasibleSigma("impulse times out of order");
  }
  train.horizon = horizon();
  if (!(train.horizon > train.times.back())) throw InfeasibleSigma("horizon does not follow the last impulse");
  train.i_min = 0.0;
  return train;
}

DecisionVector DecisionVector::from_train(const PulseTrain& train, double t_max) {
  train.validate();
  DecisionVector d;
  d.n = train.n();
  d.i_min = train.i_min;
  d.t_max = t_max;
  d.sigma.assign(d.dim(), 0.0);
  d.frozen.assign(d.dim(), false);
  for (std::size_t i = 0; i <= d.n; ++i) d.sigma[eta_index(i)] = train.amplitudes[i];
  for (std::size_t i = 1; i <= d.n; ++i) d.sigma[d.time_index(i)] = train.times[i];
  d.sigma[d.horizon_index()] = train.horizon;
  return d;
}

DecisionVector DecisionVector::regular(std::size_t n, double spacing, double i_min, double amplitude, double t_max) {
  return from_train(PulseTrain::regular(n, spacing, i_min, amplitude), t_max);
}

// ---------------------------------------------------------------- constraints

double LinearConstraint::operator()(const std::vector<double>& sigma) const {
  double v = offset;
  for (const auto& [i, a] : coeffs) v += a * sigma[i];
  return v;
}

std::vector<LinearConstraint> constraint_rows(std::size_t n, double i_min, double t_max) {
  std::vector<LinearConstraint> rows;
  rows.reserve(3 * n + 5);
  const std::size_t horizon = 2 * n + 1;
  auto time = [n](std::size_t i) { return n + i; };
  for (std::size_t i = 1; i <= n; ++i) {
    LinearConstraint r;
    if (i > 1) r.coeffs.push_back({time(i - 1), 1.0});
    r.coeffs.push_back({time(i), -1.0});
    r.offset = i_min;
    rows.push_back(std::move(r));
  }
  {
    LinearConstraint r;
    if (n > 0) r.coeffs.push_back({time(n), 1.0});
    r.coeffs.push_back({horizon, -1.0});
    rows.push_back(std::move(r));
  }
  for (std::size_t i = 0; i <= n; ++i) rows.push_back({{{i, -1.0}}, 0.0});
  rows.push_back({{{horizon, -1.0}}, 0.0});
  for (std::size_t i = 0; i <= n; ++i) rows.push_back({{{i, 1.0}}, -1.0});
  rows.push_back({{{horizon, 1.0}}, -t_max});
  return rows;
}

std::vector<double> eval_constraints(const DecisionVector& sigma) {
  if (sigma.sigma.size() != sigma.dim()) throw InvalidArgument("sigma has the wrong dimension");
  const auto rows = constraint_rows(sigma.n, sigma.i_min, sigma.t_max);
  std::vector<double> xi(rows.size());
  for (std::size_t j = 0; j < rows.size(); ++j) xi[j] = rows[j](sigma.sigma);
  return xi;
}

// ---------------------------------------------------------------- objectives

const char* to_string(ObjectiveKind k) {
  switch (k) {
    case ObjectiveKind::MaxForceTerminal: return "max-force-terminal";
    case ObjectiveKind::TrackForce: return "track-force";
    case ObjectiveKind::TrackForceFatigue: return "track-force-fatigue";
    case ObjectiveKind::MaxCnTerminal: return "max-cn-terminal";
    case ObjectiveKind::TrackCn: return "track-cn";
  }
  return "?";
}

const char* to_string(Backend b) {
  switch (b) {
    case Backend::Approx: return "approx";
    case Backend::Exact: return "exact";
    case Backend::Oracle: return "oracle";
  }
  return "?";
}

ObjectiveKind objective_from_string(const std::string& s) {
  for (auto k : {ObjectiveKind::MaxForceTerminal, ObjectiveKind::TrackForce, ObjectiveKind::TrackForceFatigue,
                 ObjectiveKind::MaxCnTerminal, ObjectiveKind::TrackCn}) {
    if (s == to_string(k)) return k;
  }
  throw InvalidArgument("unknown objective '" + s + "'");
}

Backend backend_from_string(const std::string& s) {
  for (auto b : {Backend::Approx, Backend::Exact, Backend::Oracle}) {
    if (s == to_string(b)) return b;
  }
  throw InvalidArgument("unknown backend '" + s + "'");
}

void ObjectiveSpec::validate() const {
  if (!(scale > 0.0)) throw InvalidArgument("objective scale must be positive");
  if (w1 < 0.0) throw InvalidArgument("w1 must be non-negative");
  if (kind == ObjectiveKind::TrackForce || kind == ObjectiveKind::TrackForceFatigue) {
    if (!(f_ref > 0.0)) throw InvalidArgument("f_ref must be positive");
  }
  if (kind == ObjectiveKind::TrackCn && c_ref < 0.0) throw InvalidArgument("c_ref must be non-negative");
  if (kind == ObjectiveKind::TrackForceFatigue) {
    if (backend != Backend::Oracle) throw InvalidArgument("the fatigue objective needs the oracle backend");
    if (repeats == 0) throw InvalidArgument("repeats must be >= 1");
    if (rest_ms < 0.0) throw InvalidArgument("rest must be non-negative");
  }
  if (p == 0) throw InvalidArgument("partition depth must be >= 1");
  if (!(nu > 0.0)) throw InvalidArgument("nu must be positive");
  if (!(sim_step > 0.0)) throw InvalidArgument("simulation step must be positive");
}

namespace {

// Nodes t_1..t_n, T at which the tracking sums are taken.
std::vector<double> right_nodes(const PulseTrain& train) {
  std::vector<double> nodes(train.times.begin() + 1, train.times.end());
  nodes.push_back(train.horizon);
  return nodes;
}

std::vector<double> force_at_nodes(const ObjectiveSpec& spec, const PulseTrain& train, const ModelParams& params,
                                   const std::vector<double>& nodes) {
  std::vector<double> out(nodes.size());
  if (spec.backend == Backend::Oracle) {
    SimOptions o;
    o.step = spec.sim_step;
    o.extra_samples = nodes;
    const auto traj = simulate_force(train, params, o);
    for (std::size_t i = 0; i < nodes.size(); ++i) out[i] = traj.force_at(nodes[i]);
  } else {
    const ForceApprox f(build_m_approx(train, params, spec.scheme, spec.p, spec.nu), params.a_rest);
    for (std::size_t i = 0; i < nodes.size(); ++i) out[i] = f(nodes[i]);
  }
  return out;
}

std::size_t nearest(const std::vector<double>& grid, double t) {
  auto it = std::lower_bound(grid.begin(), grid.end(), t);
  std::size_t i = static_cast<std::size_t>(it - grid.begin());
  if (i == grid.size() || (i > 0 && t - grid[i - 1] < grid[i] - t)) --i;
  if (std::abs(grid[i] - t) > 1e-9 * std::max(1.0, std::abs(t))) {
    throw InvalidArgument("time is not on the simulation grid");
  }
  return i;
}

double fatigue_cost(const ObjectiveSpec& spec, const PulseTrain& train, const ModelParams& params) {
  const double a_s = spec.a_s < 0.0 ? 0.5 * params.a_rest : spec.a_s;
  SimOptions o;
  o.step = spec.sim_step;
  SessionSimulator sim(params, o, true);
  double cost = 0.0;
  const auto nodes = right_nodes(train);
  for (std::size_t r = 0; r < spec.repeats; ++r) {
    const double start = sim.now();
    sim.run(SessionSegment::stimulate(train));
    const auto& traj = sim.trajectory();
    double prev = 0.0;
    for (double t : nodes) {
      const std::size_t i = nearest(traj.grid, start + t);
      const double df = traj.force[i] - spec.f_ref;
      const double da = traj.a[i] - a_s;
      cost += (df * df + spec.w1 * da * da) * (t - prev);
      prev = t;
    }
    if (spec.rest_ms > 0.0) {
      sim.run(SessionSegment::rest(spec.rest_ms));
      const auto& s = sim.state();
      const double df = s.force - spec.f_ref;
      const double da = s.a - a_s;
      cost += (df * df + spec.w1 * da * da) * spec.rest_ms;
    }
  }
  return cost;
}

double track_cn(const ObjectiveSpec& spec, const PulseTrain& train, const ModelParams& params) {
  double cost = 0.0;
  if (spec.backend == Backend::Oracle) {
    const auto c = LobeSum::from_train(train, params);
    for (std::size_t k = 0; k < train.times.size(); ++k) {
      const double lo = train.times[k];
      const double hi = train.interval_end(k);
      cost += detail::integrate(
          [&](double s) {
            const double d = c(s) - spec.c_ref;
            return d * d;
          },
          lo, hi, 1e-13);
    }
    return cost;
  }
  for (std::size_t k = 0; k < train.times.size(); ++k) {
    const double d = interval_average_cN(train, params, k) - spec.c_ref;
    cost += d * d * (train.interval_end(k) - train.times[k]);
  }
  return cost;
}

}  // namespace

double objective_value(const ObjectiveSpec& spec, const DecisionVector& sigma, const ModelParams& params) {
  const PulseTrain train = sigma.to_train();
  double cost = 0.0;
  switch (spec.kind) {
    case ObjectiveKind::MaxForceTerminal:
      cost = -force_at_nodes(spec, train, params, {train.horizon}).front();
      break;
    case ObjectiveKind::TrackForce: {
      const auto nodes = right_nodes(train);
      const auto f = force_at_nodes(spec, train, params, nodes);
      double prev = 0.0;
      for (std::size_t i = 0; i < nodes.size(); ++i) {
        const double d = f[i] - spec.f_ref;
        cost += d * d * (nodes[i] - prev);
        prev = nodes[i];
      }
      break;
    }
    case ObjectiveKind::TrackForceFatigue:
      if (spec.backend != Backend::Oracle) throw InvalidArgument("the fatigue objective needs the oracle backend");
      cost = fatigue_cost(spec, train, params);
      break;
    case ObjectiveKind::MaxCnTerminal:
      cost = -eval_cN(train, params, train.horizon);
      break;
    case ObjectiveKind::TrackCn:
      cost = track_cn(spec, train, params);
      break;
  }
  return spec.scale * cost;
}

// ---------------------------------------------------------------- gradient

namespace {

bool in_domain(const DecisionVector& d) {
  try {
    (void)d.to_train();
    return true;
  } catch (const InfeasibleSigma&) {
    return false;
  }
}

DecisionVector shifted(const DecisionVector& d, std::size_t i, double delta) {
  DecisionVector out = d;
  out.sigma[i] += delta;
  return out;
}

double partial_derivative(const ObjectiveSpec& spec, const DecisionVector& sigma, const ModelParams& params,
                          std::size_t i, double h_rel) {
  double h = h_rel * std::max(std::abs(sigma.sigma[i]), 1.0);
  for (int shrink = 0; shrink <= 3; ++shrink, h *= 0.5) {
    const auto up = shifted(sigma, i, h);
    const auto down = shifted(sigma, i, -h);
    if (in_domain(up) && in_domain(down)) {
      return (objective_value(spec, up, params) - objective_value(spec, down, params)) / (2.0 * h);
    }
  }
  h *= 2.0;  // undo the last halving
  const double f0 = objective_value(spec, sigma, params);
  for (double dir : {1.0, -1.0}) {
    const auto one = shifted(sigma, i, dir * h);
    const auto two = shifted(sigma, i, 2.0 * dir * h);
    if (in_domain(one) && in_domain(two)) {
      const double f1 = objective_value(spec, one, params);
      const double f2 = objective_value(spec, two, params);
      return dir * (-3.0 * f0 + 4.0 * f1 - f2) / (2.0 * h);
    }
  }
  throw StepCollision("no admissible finite-difference probe for coordinate " + std::to_string(i));
}

}  // namespace

std::vector<double> fd_gradient(const ObjectiveSpec& spec, const DecisionVector& sigma, const ModelParams& params,
                                const GradientOptions& opts) {
  if (!in_domain(sigma)) throw InfeasibleSigma("gradient requested outside the domain");
  std::vector<std::size_t> coords;
  for (std::size_t i = 0; i < sigma.dim(); ++i) {
    if (i >= sigma.frozen.size() || !sigma.frozen[i]) coords.push_back(i);
  }
  std::vector<double> grad(sigma.dim(), 0.0);
  if (!opts.parallel || coords.size() < 2) {
    for (std::size_t i : coords) grad[i] = partial_derivative(spec, sigma, params, i, opts.h_rel);
    return grad;
  }
  const std::size_t workers =
      std::min<std::size_t>(coords.size(), std::max(1u, std::thread::hardware_concurrency()));
  std::vector<std::future<void>> jobs;
  for (std::size_t w = 0; w < workers; ++w) {
    jobs.push_back(std::async(std::launch::async, [&, w] {
      for (std::size_t j = w; j < coords.size(); j += workers) {
        grad[coords[j]] = partial_derivative(spec, sigma, params, coords[j], opts.h_rel);
      }
    }));
  }
  for (auto& j : jobs) j.get();
  return grad;
}

// ---------------------------------------------------------------- solver

const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::MaxIterations: return "max-iterations";
    case SolveStatus::LineSearchFailure: return "line-search-failure";
  }
  return "?";
}

namespace {

// Constraint rows restricted to the free coordinates.
struct Barrier {
  std::vector<std::size_t> free;                // sigma index of each free coordinate
  std::vector<LinearConstraint> rows;           // all rows, sigma coordinates
  std::vector<std::size_t> live;                // rows touching a free coordinate
  std::vector<Eigen::VectorXd> grads;           // d Xi / d x for the live rows

  Barrier(const DecisionVector& d) {
    for (std::size_t i = 0; i < d.dim(); ++i) {
      if (i >= d.frozen.size() || !d.frozen[i]) free.push_back(i);
    }
    rows = constraint_rows(d.n, d.i_min, d.t_max);
    std::vector<int> pos(d.dim(), -1);
    for (std::size_t k = 0; k < free.size(); ++k) pos[free[k]] = static_cast<int>(k);
    for (std::size_t j = 0; j < rows.size(); ++j) {
      Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(free.size()));
      bool touches = false;
      for (const auto& [i, a] : rows[j].coeffs) {
        if (pos[i] >= 0) {
          g[pos[i]] = a;
          touches = true;
        }
      }
      if (touches) {
        live.push_back(j);
        grads.push_back(std::move(g));
      }
    }
  }

  Eigen::VectorXd pack(const std::vector<double>& sigma) const {
    Eigen::VectorXd x(static_cast<Eigen::Index>(free.size()));
    for (std::size_t k = 0; k < free.size(); ++k) x[static_cast<Eigen::Index>(k)] = sigma[free[k]];
    return x;
  }

  void unpack(const Eigen::VectorXd& x, std::vector<double>& sigma) const {
    for (std::size_t k = 0; k < free.size(); ++k) sigma[free[k]] = x[static_cast<Eigen::Index>(k)];
  }

  Eigen::VectorXd restrict(const std::vector<double>& full) const {
    Eigen::VectorXd g(static_cast<Eigen::Index>(free.size()));
    for (std::size_t k = 0; k < free.size(); ++k) g[static_cast<Eigen::Index>(k)] = full[free[k]];
    return g;
  }
};

struct Evaluator {
  const ObjectiveSpec& spec;
  const ModelParams& params;
  GradientOptions gopts;
  std::size_t count = 0;

  double value(const DecisionVector& d) {
    ++count;
    try {
      return objective_value(spec, d, params);
    } catch (const InfeasibleSigma&) {
      return std::numeric_limits<double>::infinity();
    }
  }
  std::vector<double> gradient(const DecisionVector& d) {
    count += 2 * d.free_count();
    return fd_gradient(spec, d, params, gopts);
  }
};

}  // namespace

OptOutcome solve(const ObjectiveSpec& spec, const DecisionVector& init, const ModelParams& params,
                 const SolverOptions& opts) {
  spec.validate();
  params.validate(false);
  if (init.sigma.size() != init.dim()) throw InvalidArgument("sigma has the wrong dimension");
  if (!(opts.mu0 > 0.0 && opts.mu_min > 0.0 && opts.mu_factor > 0.0 && opts.mu_factor < 1.0)) {
    throw InvalidArgument("invalid barrier schedule");
  }

  DecisionVector cur = init;
  cur.frozen.resize(cur.dim(), false);
  for (std::size_t i = 0; i <= cur.n; ++i) {
    if (!cur.frozen[i]) cur.sigma[i] = std::clamp(cur.sigma[i], opts.nudge, 1.0 - opts.nudge);
  }
  const Barrier bar(cur);
  {
    const auto xi = eval_constraints(cur);
    std::vector<bool> is_live(xi.size(), false);
    for (std::size_t j : bar.live) is_live[j] = true;
    for (std::size_t j = 0; j < xi.size(); ++j) {
      if (is_live[j] && !(xi[j] < 0.0)) {
        throw InvalidArgument("initial point is not strictly feasible (constraint " + std::to_string(j + 1) + ")");
      }
      if (!is_live[j] && xi[j] > opts.feas_tol) {
        throw InvalidArgument("frozen coordinates violate constraint " + std::to_string(j + 1));
      }
    }
  }

  Evaluator ev{spec, params, {opts.h_rel, opts.parallel_gradient}};
  OptOutcome out;
  out.initial_objective = ev.value(cur);
  if (!std::isfinite(out.initial_objective)) throw InvalidArgument("objective undefined at the initial point");

  const auto nfree = static_cast<Eigen::Index>(bar.free.size());
  Eigen::VectorXd x = bar.pack(cur.sigma);
  auto slacks = [&](const Eigen::VectorXd& at) {
    DecisionVector d = cur;
    bar.unpack(at, d.sigma);
    std::vector<double> s(bar.live.size());
    for (std::size_t r = 0; r < bar.live.size(); ++r) s[r] = -bar.rows[bar.live[r]](d.sigma);
    return s;
  };
  auto merit = [&](double theta, const std::vector<double>& s, double mu) {
    double m = theta;
    for (double v : s) {
      if (!(v > 0.0)) return std::numeric_limits<double>::infinity();
      m -= mu * std::log(v);
    }
    return m;
  };

  Eigen::MatrixXd bfgs = Eigen::MatrixXd::Identity(nfree, nfree);
  bool scaled = false;
  double theta = out.initial_objective;
  Eigen::VectorXd g = bar.restrict(ev.gradient(cur));
  double mu = opts.mu0;
  double last_mu = mu;
  std::size_t stage = 0;
  bool failed = false;
  bool reset = false;

  while (nfree > 0 && mu >= opts.mu_min * (1.0 - 1e-12)) {
    last_mu = mu;
    const double tol = std::max(10.0 * mu, 0.1 * opts.kkt_tol);
    std::size_t it = 0;
    bool stage_done = false;
    for (; it < opts.max_inner; ++it) {
      auto s = slacks(x);
      Eigen::VectorXd gb = g;
      Eigen::MatrixXd h = bfgs;
      for (std::size_t r = 0; r < s.size(); ++r) {
        gb += (mu / s[r]) * bar.grads[r];
        h += (mu / (s[r] * s[r])) * bar.grads[r] * bar.grads[r].transpose();
      }
      const double gnorm = gb.lpNorm<Eigen::Infinity>();
      const double phi = merit(theta, s, mu);
      if (opts.trace) out.trace.push_back({stage, it, mu, theta, phi, gnorm, 0.0});
      if (gnorm <= tol) {
        stage_done = true;
        break;
      }
      Eigen::LDLT<Eigen::MatrixXd> ldlt(h);
      Eigen::VectorXd d = ldlt.solve(-gb);
      if (ldlt.info() != Eigen::Success || !d.allFinite() || gb.dot(d) >= 0.0 || !ldlt.isPositive()) {
        d = -gb / std::max(1.0, h.diagonal().maxCoeff());
      }
      double alpha = 1.0;
      for (std::size_t r = 0; r < s.size(); ++r) {
        const double rate = bar.grads[r].dot(d);  // d Xi along d
        if (rate > 0.0) alpha = std::min(alpha, 0.995 * s[r] / rate);
      }
      const double slope = gb.dot(d);
      bool accepted = false;
      DecisionVector trial = cur;
      double theta_new = theta;
      Eigen::VectorXd x_new = x;
      for (std::size_t bt = 0; bt < opts.max_backtracks; ++bt, alpha *= 0.5) {
        x_new = x + alpha * d;
        bar.unpack(x_new, trial.sigma);
        theta_new = ev.value(trial);
        const double phi_new = merit(theta_new, slacks(x_new), mu);
        if (phi_new <= phi + 1e-4 * alpha * slope) {
          accepted = true;
          break;
        }
      }
      if (!accepted || (alpha * d).lpNorm<Eigen::Infinity>() <= 1e-15 * (1.0 + x.lpNorm<Eigen::Infinity>())) {
        // Finite-difference noise floor: accept the stage if already near-stationary.
        if (gnorm <= std::max(tol, opts.kkt_tol)) {
          stage_done = true;
          break;
        }
        // A stale quasi-Newton model is the usual culprit; restart it once.
        if (!reset) {
          reset = true;
          bfgs = Eigen::MatrixXd::Identity(nfree, nfree);
          scaled = false;
          continue;
        }
        failed = true;
        break;
      }
      reset = false;
      const Eigen::VectorXd g_new = bar.restrict(ev.gradient(trial));
      const Eigen::VectorXd step = x_new - x;
      const Eigen::VectorXd y = g_new - g;
      if (!scaled) {
        const double sy = step.dot(y);
        if (sy > 0.0) bfgs *= y.squaredNorm() / sy;
        scaled = true;
      }
      const Eigen::VectorXd bs = bfgs * step;
      const double sbs = step.dot(bs);
      const double sy = step.dot(y);
      if (sbs > 0.0) {
        const double th = sy >= 0.2 * sbs ? 1.0 : 0.8 * sbs / (sbs - sy);
        const Eigen::VectorXd rvec = th * y + (1.0 - th) * bs;
        const double sr = step.dot(rvec);
        if (sr > 0.0) bfgs += rvec * rvec.transpose() / sr - bs * bs.transpose() / sbs;
      }
      if (opts.trace) out.trace.back().step = step.lpNorm<Eigen::Infinity>();
      x = x_new;
      cur = trial;
      theta = theta_new;
      g = g_new;
    }
    out.iterations += it;
    if (failed) break;
    if (!stage_done) {
      out.status = SolveStatus::MaxIterations;
      break;
    }
    mu *= opts.mu_factor;
    ++stage;
  }
  if (failed) out.status = SolveStatus::LineSearchFailure;

  bar.unpack(x, cur.sigma);
  out.sigma_star = cur;
  out.objective = theta;
  const auto xi = eval_constraints(cur);
  out.lambda.assign(xi.size(), 0.0);
  for (std::size_t j : bar.live) out.lambda[j] = last_mu / (-xi[j]);
  Eigen::VectorXd stat = g;
  for (std::size_t r = 0; r < bar.live.size(); ++r) stat += out.lambda[bar.live[r]] * bar.grads[r];
  out.stationarity = nfree > 0 ? stat.lpNorm<Eigen::Infinity>() : 0.0;
  out.complementarity = 0.0;
  out.feasibility = 0.0;
  for (std::size_t j = 0; j < xi.size(); ++j) {
    out.complementarity = std::max(out.complementarity, std::abs(out.lambda[j] * xi[j]));
    out.feasibility = std::max(out.feasibility, xi[j]);
  }
  out.kkt_residual = std::max({out.stationarity, out.complementarity, out.feasibility});
  out.evaluations = ev.count;
  if (out.status == SolveStatus::Converged && out.kkt_residual > opts.kkt_tol) {
    out.status = SolveStatus::MaxIterations;
  }
  return out;
}

OptOutcome multistart(const ObjectiveSpec& spec, const std::vector<DecisionVector>& starts, const ModelParams& params,
                      const SolverOptions& opts) {
  if (starts.empty()) throw InvalidArgument("multistart needs at least one start");
  std::vector<std::future<OptOutcome>> runs;
  for (const auto& s : starts) {
    runs.push_back(std::async(std::launch::async, [&, s] { return solve(spec, s, params, opts); }));
  }
  std::vector<OptOutcome> results;
  for (auto& r : runs) results.push_back(r.get());
  std::size_t best = 0;
  auto better = [&](const OptOutcome& a, const OptOutcome& b) {
    if (a.ok() != b.ok()) return a.ok();
    return a.objective < b.objective;
  };
  for (std::size_t i = 1; i < results.size(); ++i) {
    if (better(results[i], results[best])) best = i;
  }
  return std::move(results[best]);
}

std::vector<DecisionVector> spread_starts(const DecisionVector& base, std::size_t count) {
  std::vector<DecisionVector> out;
  const bool times_free = base.n > 0 && !(base.frozen.size() > base.time_index(1) && base.frozen[base.time_index(1)]);
  const bool horizon_free = !(base.frozen.size() > base.horizon_index() && base.frozen[base.horizon_index()]);
  const double unit = base.i_min > 0.0 ? base.i_min : base.horizon() / static_cast<double>(base.n + 1);
  for (std::size_t j = 0; j < count; ++j) {
    DecisionVector d = base;
    double spacing = unit * (1.5 + static_cast<double>(j));
    if (!horizon_free) spacing = std::min(spacing, base.horizon() / (static_cast<double>(base.n) + 0.5));
    if (horizon_free) spacing = std::min(spacing, 0.99 * base.t_max / static_cast<double>(base.n + 1));
    if (times_free) {
      for (std::size_t i = 1; i <= d.n; ++i) d.sigma[d.time_index(i)] = static_cast<double>(i) * spacing;
    }
    if (horizon_free) d.sigma[d.horizon_index()] = d.time(d.n) + spacing;
    out.push_back(std::move(d));
  }
  return out;
}

KktReport kkt_check(const ObjectiveSpec& spec, const OptOutcome& outcome, const ModelParams& params, double tol,
                    const GradientOptions& opts) {
  const auto& d = outcome.sigma_star;
  const auto grad = fd_gradient(spec, d, params, opts);
  const auto rows = constraint_rows(d.n, d.i_min, d.t_max);
  std::vector<double> stat = grad;
  KktReport rep;
  for (std::size_t j = 0; j < rows.size(); ++j) {
    const double lam = j < outcome.lambda.size() ? outcome.lambda[j] : 0.0;
    if (lam < 0.0) rep.dual_feasible = false;
    for (const auto& [i, a] : rows[j].coeffs) stat[i] += lam * a;
    const double xi = rows[j](d.sigma);
    rep.complementarity = std::max(rep.complementarity, std::abs(lam * xi));
    rep.feasibility = std::max(rep.feasibility, xi);
  }
  for (std::size_t i = 0; i < d.dim(); ++i) {
    if (i < d.frozen.size() && d.frozen[i]) continue;
    rep.stationarity = std::max(rep.stationarity, std::abs(stat[i]));
  }
  rep.passed = rep.dual_feasible && rep.stationarity <= tol && rep.complementarity <= tol && rep.feasibility <= tol;
  return rep;
}

}  // namespace fes
