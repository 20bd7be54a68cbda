#pragma once

// Ding-type isometric force-fatigue model: pulse trains, the FES signal,
// the closed-form Ca2+ concentration and the Michaelis-Menten-Hill rates.
//
// Time is in milliseconds throughout. Force is in kN. The force scaling A
// keeps its customary kN/s unit (ModelParams::a_rest, HillState::a); use
// per_ms() before putting it into the force equation.

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace fes {

struct ModelParams {
  double tau_c = 20.0;     // ms
  double r_bar = 1.143;    // dimensionless
  double a_rest = 3.009;   // kN/s
  double k_m = 0.103;      // dimensionless; no published value, see README
  double tau_1 = 50.95;    // ms
  double tau_2 = 124.4;    // ms
  double alpha_a = -0.4;   // 1/s^2
  double tau_fat = 127.0;  // s

  /// Throws InvalidArgument on a broken invariant. The fatigue sign check
  /// can be skipped so that deliberately mis-signed models can be examined.
  void validate(bool check_fatigue_sign = true) const;

  static ModelParams nominal() { return {}; }
};

/// Converts a force-scaling value from kN/s to kN/ms.
constexpr double per_ms(double a_kn_per_s) { return a_kn_per_s * 1e-3; }

struct PulseTrain {
  std::vector<double> times;       // t_0 = 0 < t_1 < ... < t_n (ms)
  std::vector<double> amplitudes;  // eta_i in [0, 1]
  double horizon = 0.0;            // T (ms), t_n < T
  double i_min = 0.0;              // minimal interpulse (ms)

  std::size_t n() const { return times.size() - 1; }
  std::size_t pulse_count() const { return times.size(); }

  /// End of interval k, i.e. t_{k+1} with t_{n+1} = T.
  double interval_end(std::size_t k) const {
    return k + 1 < times.size() ? times[k + 1] : horizon;
  }

  /// Index k of the interval [t_k, t_{k+1}) holding t (clamped to [0, n]).
  std::size_t interval_of(double t) const;

  void validate() const;

  /// t_i = i * spacing, T = (n + 1) * spacing.
  static PulseTrain regular(std::size_t n, double spacing, double i_min, double amplitude = 1.0);
};

struct ScalingFactors {
  std::vector<double> values;  // R_0 .. R_n
};

struct HillState {
  double c_n = 0.0;
  double force = 0.0;  // kN
  double a = 0.0;      // kN/s

  static HillState at_rest(const ModelParams& params) { return {0.0, 0.0, params.a_rest}; }
};

ScalingFactors compute_scaling(const PulseTrain& train, const ModelParams& params);

/// FES signal E(t) in 1/ms, right-continuous (H(0) = 1).
double eval_E(const PulseTrain& train, const ModelParams& params, double t);

/// Normalized concentration c_N(t); exact superposition of lobes.
double eval_cN(const PulseTrain& train, const ModelParams& params, double t);

/// Single lobe R_k eta_k ((t - t_k)/tau_c) exp(-(t - t_k)/tau_c) H(t - t_k).
double lobe(double weight, double t_k, double tau_c, double t);

/// m1 = c / (nu K_m + c). nu = 1 is the plain Hill saturation.
double eval_m1(double c_n, const ModelParams& params, double nu = 1.0);

/// m2 = nu / (tau_1 + tau_2 m1(c)) in 1/ms, with m1 taken at nu = 1.
double eval_m2(double c_n, const ModelParams& params, double nu = 1.0);

/// Location of the maximum of c_N on [t_k, t_{k+1}], clamped to that interval.
/// Throws InvalidArgument when eta_0..eta_k are all zero.
double argmax_cN_interval(const PulseTrain& train, const ModelParams& params, std::size_t k);

struct SteadyState {
  double m1_plus;
  double c_n_ref;
};

/// Positive root of A tau_2 m1^2 + A tau_1 m1 - F_ref = 0 and the matching
/// concentration. a_current in kN/s, f_ref in kN. Throws UnreachableForce
/// when the root is >= 1.
SteadyState steady_state_root(const ModelParams& params, double a_current, double f_ref);

/// Closed-form concentration for an arbitrary set of lobes. Lobes are sorted
/// by onset time; evaluation skips lobes whose exponential has underflowed,
/// which is exact in double precision.
class LobeSum {
 public:
  LobeSum() = default;
  LobeSum(std::vector<double> onsets, std::vector<double> weights, double tau_c);

  static LobeSum from_train(const PulseTrain& train, const ModelParams& params, double offset = 0.0);

  /// Appends lobes with onsets >= every existing onset.
  void append(std::span<const double> onsets, std::span<const double> weights);

  double operator()(double t) const;
  double derivative(double t) const;

  std::span<const double> onsets() const { return onsets_; }
  std::span<const double> weights() const { return weights_; }
  double tau_c() const { return tau_c_; }

 private:
  std::vector<double> onsets_;
  std::vector<double> weights_;
  double tau_c_ = 1.0;
};

}  // namespace fes
