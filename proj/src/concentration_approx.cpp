#include "fes/concentration_approx.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fes/errors.hpp"

namespace fes {

std::size_t persistence_order(const PulseTrain& train, const ModelParams& params) {
  const double window = kLobeWindow * params.tau_c;
  std::size_t best = 1;
  std::size_t run = 1;
  for (std::size_t i = 1; i < train.times.size(); ++i) {
    run = (train.times[i] - train.times[i - 1] <= window) ? run + 1 : 1;
    best = std::max(best, run);
  }
  return best;
}

PersistenceProfile persistence_profile(const PulseTrain& train, const ModelParams& params, std::size_t p) {
  if (p == 0) throw InvalidArgument("persistence order must be >= 1");
  PersistenceProfile profile;
  profile.p = p;
  profile.window = kLobeWindow * params.tau_c;
  if (train.i_min > 0.0) {
    const double crowd = std::ceil(profile.window / train.i_min);
    profile.kappa = crowd >= static_cast<double>(p) ? p : static_cast<std::size_t>(crowd);
  } else {
    profile.kappa = p;
  }
  return profile;
}

TruncatedConcentration::TruncatedConcentration(const PulseTrain& train, const ModelParams& params,
                                               std::size_t p)
    : times_(train.times), tau_c_(params.tau_c), p_(p) {
  if (p == 0) throw InvalidArgument("truncation depth must be >= 1");
  const auto r = compute_scaling(train, params);
  weights_.resize(times_.size());
  for (std::size_t i = 0; i < times_.size(); ++i) weights_[i] = r.values[i] * train.amplitudes[i];
}

double TruncatedConcentration::operator()(double t) const {
  auto it = std::upper_bound(times_.begin(), times_.end(), t);
  if (it == times_.begin()) return 0.0;
  const auto k = static_cast<std::size_t>(it - times_.begin()) - 1;
  const std::size_t first = k + 1 >= p_ ? k + 1 - p_ : 0;
  double sum = 0.0;
  for (std::size_t i = first; i <= k; ++i) sum += lobe(weights_[i], times_[i], tau_c_, t);
  return sum;
}

TruncatedConcentration truncated_cN(const PulseTrain& train, const ModelParams& params, std::size_t p) {
  return TruncatedConcentration(train, params, p);
}

double error_bound_persistent(const PulseTrain& train, const ModelParams& params, std::size_t p, std::size_t k) {
  if (p == 0) throw InvalidArgument("persistence order must be >= 1");
  if (k < p) return 0.0;
  const auto profile = persistence_profile(train, params, p);
  const double kappa = static_cast<double>(profile.kappa);
  const double far = static_cast<double>(k) - static_cast<double>(p) - kappa + 1.0;
  return params.r_bar / std::exp(1.0) * kappa + 5.0 * std::exp(-5.0) * params.r_bar * far;
}

double chi(double t, double t_i, double tau_c) {
  const double x = t - t_i;
  return std::exp(-x / tau_c) * (tau_c + x);
}

double interval_average_cN(const PulseTrain& train, const ModelParams& params, std::size_t k) {
  if (k >= train.times.size()) throw InvalidArgument("interval index out of range");
  const auto r = compute_scaling(train, params);
  const double lo = train.times[k];
  const double hi = train.interval_end(k);
  double sum = 0.0;
  for (std::size_t i = 0; i <= k; ++i) {
    const double w = r.values[i] * train.amplitudes[i];
    if (w == 0.0) continue;
    sum += w * (chi(lo, train.times[i], params.tau_c) - chi(hi, train.times[i], params.tau_c));
  }
  return sum / (hi - lo);
}

double tail_average_cN(const PulseTrain& train, const ModelParams& params, std::size_t q) {
  if (q >= train.times.size()) throw InvalidArgument("tail index out of range");
  const auto r = compute_scaling(train, params);
  const double lo = train.times[q];
  const double hi = train.horizon;
  double sum = 0.0;
  for (std::size_t i = 0; i < train.times.size(); ++i) {
    const double w = r.values[i] * train.amplitudes[i];
    if (w == 0.0) continue;
    // Lobes born after t_q only start contributing at their own impulse,
    // where chi_i(t_i) = tau_c.
    const double from = i <= q ? chi(lo, train.times[i], params.tau_c) : params.tau_c;
    sum += w * (from - chi(hi, train.times[i], params.tau_c));
  }
  return sum / (hi - lo);
}

}  // namespace fes
