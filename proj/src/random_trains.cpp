#include "fes/random_trains.hpp"

#include <algorithm>

#include "fes/concentration_approx.hpp"
#include "fes/errors.hpp"

namespace fes {

PulseTrain random_train(std::mt19937_64& rng, const RandomTrainOptions& opts) {
  if (!(opts.gap_max >= opts.i_min && opts.i_min >= 0.0 && opts.tail_max > 0.0)) {
    throw InvalidArgument("inconsistent random train options");
  }
  std::uniform_int_distribution<std::size_t> count(0, opts.n_max);
  std::uniform_real_distribution<double> gap(opts.i_min, opts.gap_max);
  std::uniform_real_distribution<double> tail(0.0, opts.tail_max);
  std::uniform_real_distribution<double> eta(0.0, 1.0);
  PulseTrain t;
  t.i_min = opts.i_min;
  const std::size_t n = count(rng);
  t.times.push_back(0.0);
  for (std::size_t i = 0; i < n; ++i) t.times.push_back(t.times.back() + std::max(gap(rng), opts.i_min));
  for (std::size_t i = 0; i <= n; ++i) t.amplitudes.push_back(opts.unit_amplitudes ? 1.0 : eta(rng));
  double last = tail(rng);
  if (last <= 0.0) last = opts.tail_max;
  t.horizon = t.times.back() + last;
  return t;
}

PulseTrain random_persistent_train(std::mt19937_64& rng, std::size_t p, const ModelParams& params, std::size_t n_max,
                                   double i_min) {
  if (p == 0) throw InvalidArgument("persistence order must be >= 1");
  const double window = kLobeWindow * params.tau_c;
  if (!(i_min < window)) throw InvalidArgument("i_min must be below the lobe window");
  std::uniform_int_distribution<std::size_t> run_len(1, p);
  std::uniform_real_distribution<double> inner(i_min, window);
  std::uniform_real_distribution<double> outer(window * 1.001, window + 60.0);
  std::uniform_real_distribution<double> eta(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> total(1, n_max + 1);
  const std::size_t pulses = total(rng);
  PulseTrain t;
  t.i_min = i_min;
  t.times.push_back(0.0);
  std::size_t in_run = 1;
  std::size_t target = run_len(rng);
  while (t.times.size() < pulses) {
    if (in_run < target) {
      t.times.push_back(t.times.back() + inner(rng));
      ++in_run;
    } else {
      t.times.push_back(t.times.back() + outer(rng));
      in_run = 1;
      target = run_len(rng);
    }
  }
  for (std::size_t i = 0; i < t.times.size(); ++i) t.amplitudes.push_back(eta(rng));
  t.horizon = t.times.back() + outer(rng);
  return t;
}

}  // namespace fes
