#include "fes/model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fes/errors.hpp"

namespace fes {
namespace {

// exp(-x) is exactly zero in double precision beyond this point.
constexpr double kUnderflowLobes = 746.0;

void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidArgument(what);
}

}  // namespace

void ModelParams::validate(bool check_fatigue_sign) const {
  require(tau_c > 0.0, "tau_c must be positive");
  require(tau_1 > 0.0, "tau_1 must be positive");
  require(tau_2 > 0.0, "tau_2 must be positive");
  require(tau_fat > 0.0, "tau_fat must be positive");
  require(k_m > 0.0, "k_m must be positive");
  require(a_rest > 0.0, "a_rest must be positive");
  require(r_bar >= 1.0, "r_bar must be >= 1");
  if (check_fatigue_sign) require(alpha_a <= 0.0, "alpha_a must be <= 0");
}

std::size_t PulseTrain::interval_of(double t) const {
  auto it = std::upper_bound(times.begin(), times.end(), t);
  if (it == times.begin()) return 0;
  return static_cast<std::size_t>(it - times.begin()) - 1;
}

void PulseTrain::validate() const {
  require(!times.empty(), "pulse train needs at least one pulse");
  require(times.size() == amplitudes.size(), "times and amplitudes differ in length");
  require(times.front() == 0.0, "t_0 must be 0");
  require(i_min >= 0.0, "i_min must be non-negative");
  for (std::size_t i = 1; i < times.size(); ++i) {
    require(times[i] > times[i - 1], "impulse times must be strictly increasing");
    // Relative slack so that trains built as t_{i-1} + i_min survive rounding.
    require(times[i] - times[i - 1] >= i_min * (1.0 - 1e-12),
            "interpulse below i_min at index " + std::to_string(i));
  }
  require(times.back() < horizon, "last impulse must precede the horizon");
  for (double eta : amplitudes) require(eta >= 0.0 && eta <= 1.0, "amplitudes must lie in [0, 1]");
}

PulseTrain PulseTrain::regular(std::size_t n, double spacing, double i_min, double amplitude) {
  PulseTrain train;
  train.times.resize(n + 1);
  for (std::size_t i = 0; i <= n; ++i) train.times[i] = static_cast<double>(i) * spacing;
  train.amplitudes.assign(n + 1, amplitude);
  train.horizon = static_cast<double>(n + 1) * spacing;
  train.i_min = i_min;
  return train;
}

ScalingFactors compute_scaling(const PulseTrain& train, const ModelParams& params) {
  ScalingFactors r;
  r.values.resize(train.times.size());
  if (r.values.empty()) return r;
  r.values[0] = 1.0;
  for (std::size_t i = 1; i < train.times.size(); ++i) {
    const double gap = train.times[i] - train.times[i - 1];
    r.values[i] = 1.0 + (params.r_bar - 1.0) * std::exp(-gap / params.tau_c);
  }
  return r;
}

double eval_E(const PulseTrain& train, const ModelParams& params, double t) {
  const auto r = compute_scaling(train, params);
  double sum = 0.0;
  for (std::size_t i = 0; i < train.times.size(); ++i) {
    const double dt = t - train.times[i];
    if (dt < 0.0) break;
    sum += r.values[i] * train.amplitudes[i] * std::exp(-dt / params.tau_c);
  }
  return sum / params.tau_c;
}

double lobe(double weight, double t_k, double tau_c, double t) {
  const double x = (t - t_k) / tau_c;
  if (x <= 0.0) return 0.0;
  return weight * x * std::exp(-x);
}

double eval_cN(const PulseTrain& train, const ModelParams& params, double t) {
  return LobeSum::from_train(train, params)(t);
}

double eval_m1(double c_n, const ModelParams& params, double nu) {
  return c_n / (nu * params.k_m + c_n);
}

double eval_m2(double c_n, const ModelParams& params, double nu) {
  return nu / (params.tau_1 + params.tau_2 * eval_m1(c_n, params));
}

double argmax_cN_interval(const PulseTrain& train, const ModelParams& params, std::size_t k) {
  if (k >= train.times.size()) throw InvalidArgument("interval index out of range");
  const auto r = compute_scaling(train, params);
  const double t_k = train.times[k];
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i <= k; ++i) {
    const double w = r.values[i] * train.amplitudes[i] * std::exp((train.times[i] - t_k) / params.tau_c);
    num += w * train.times[i];
    den += w;
  }
  if (!(den > 0.0)) throw InvalidArgument("argmax undefined: amplitudes up to k are all zero");
  const double t_star = params.tau_c + num / den;
  return std::clamp(t_star, t_k, train.interval_end(k));
}

SteadyState steady_state_root(const ModelParams& params, double a_current, double f_ref) {
  if (!(f_ref > 0.0)) throw InvalidArgument("f_ref must be positive");
  if (!(a_current > 0.0)) throw InvalidArgument("a_current must be positive");
  const double a = per_ms(a_current);
  const double quad = a * params.tau_2;
  const double lin = a * params.tau_1;
  // Cancellation-free form of (-lin + sqrt(lin^2 + 4 quad f)) / (2 quad).
  const double m1_plus = 2.0 * f_ref / (lin + std::sqrt(lin * lin + 4.0 * quad * f_ref));
  if (m1_plus >= 1.0) {
    throw UnreachableForce("F_ref = " + std::to_string(f_ref) +
                           " kN exceeds the saturated steady force " +
                           std::to_string(a * (params.tau_1 + params.tau_2)) + " kN");
  }
  return {m1_plus, params.k_m * m1_plus / (1.0 - m1_plus)};
}

LobeSum::LobeSum(std::vector<double> onsets, std::vector<double> weights, double tau_c)
    : onsets_(std::move(onsets)), weights_(std::move(weights)), tau_c_(tau_c) {
  if (onsets_.size() != weights_.size()) throw InvalidArgument("onsets and weights differ in length");
  if (!std::is_sorted(onsets_.begin(), onsets_.end())) throw InvalidArgument("lobe onsets must be sorted");
}

LobeSum LobeSum::from_train(const PulseTrain& train, const ModelParams& params, double offset) {
  const auto r = compute_scaling(train, params);
  std::vector<double> onsets(train.times.size());
  std::vector<double> weights(train.times.size());
  for (std::size_t i = 0; i < train.times.size(); ++i) {
    onsets[i] = train.times[i] + offset;
    weights[i] = r.values[i] * train.amplitudes[i];
  }
  return LobeSum(std::move(onsets), std::move(weights), params.tau_c);
}

void LobeSum::append(std::span<const double> onsets, std::span<const double> weights) {
  if (onsets.size() != weights.size()) throw InvalidArgument("onsets and weights differ in length");
  if (!onsets.empty() && !onsets_.empty() && onsets.front() < onsets_.back())
    throw InvalidArgument("appended lobes must not precede existing ones");
  onsets_.insert(onsets_.end(), onsets.begin(), onsets.end());
  weights_.insert(weights_.end(), weights.begin(), weights.end());
}

double LobeSum::operator()(double t) const {
  const auto end = std::upper_bound(onsets_.begin(), onsets_.end(), t);
  auto begin = std::lower_bound(onsets_.begin(), end, t - kUnderflowLobes * tau_c_);
  double sum = 0.0;
  for (auto it = begin; it != end; ++it) {
    const auto i = static_cast<std::size_t>(it - onsets_.begin());
    const double x = (t - *it) / tau_c_;
    sum += weights_[i] * x * std::exp(-x);
  }
  return sum;
}

double LobeSum::derivative(double t) const {
  const auto end = std::upper_bound(onsets_.begin(), onsets_.end(), t);
  auto begin = std::lower_bound(onsets_.begin(), end, t - kUnderflowLobes * tau_c_);
  double sum = 0.0;
  for (auto it = begin; it != end; ++it) {
    const auto i = static_cast<std::size_t>(it - onsets_.begin());
    const double x = (t - *it) / tau_c_;
    sum += weights_[i] * (1.0 - x) * std::exp(-x);
  }
  return sum / tau_c_;
}

}  // namespace fes
