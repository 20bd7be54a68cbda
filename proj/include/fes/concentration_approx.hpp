#pragma once

// Cheap surrogates for c_N: truncation to the most recent lobes (with its
// a-priori error bound) and exact interval/tail averages.

#include <cstddef>
#include <vector>

#include "fes/model.hpp"

namespace fes {

/// Lobes are considered influential for 5 tau_c after their impulse.
inline constexpr double kLobeWindow = 5.0;

struct PersistenceProfile {
  std::size_t p = 1;
  double window = 0.0;    // 5 tau_c (ms)
  std::size_t kappa = 1;  // min(p, ceil(5 tau_c / I_min))
};

/// Length of the longest run of consecutive pulses whose gaps are all
/// <= 5 tau_c (a train with every gap longer than that is 1-persistent).
std::size_t persistence_order(const PulseTrain& train, const ModelParams& params);

PersistenceProfile persistence_profile(const PulseTrain& train, const ModelParams& params, std::size_t p);

/// Keeps lobes max(0, k-p+1)..k on [t_k, t_{k+1}]; a lower approximation of c_N.
class TruncatedConcentration {
 public:
  TruncatedConcentration(const PulseTrain& train, const ModelParams& params, std::size_t p);
  double operator()(double t) const;
  std::size_t depth() const { return p_; }

 private:
  std::vector<double> times_;
  std::vector<double> weights_;
  double tau_c_;
  std::size_t p_;
};

TruncatedConcentration truncated_cN(const PulseTrain& train, const ModelParams& params, std::size_t p);

/// sup over [t_k, t_{k+1}] of c_N - truncated c_N is at most
/// (R_bar/e) kappa + 5 e^-5 R_bar (k - p - kappa + 1); zero when k < p.
double error_bound_persistent(const PulseTrain& train, const ModelParams& params, std::size_t p, std::size_t k);

/// chi_i(t) = exp(-(t - t_i)/tau_c) (tau_c + t - t_i); minus its derivative is a lobe.
double chi(double t, double t_i, double tau_c);

/// Mean of c_N over [t_k, t_{k+1}] (t_{n+1} = T), in closed form.
double interval_average_cN(const PulseTrain& train, const ModelParams& params, std::size_t k);

/// Mean of c_N over [t_q, T], in closed form.
double tail_average_cN(const PulseTrain& train, const ModelParams& params, std::size_t q);

}  // namespace fes
