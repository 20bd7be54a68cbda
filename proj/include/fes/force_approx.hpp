#pragma once

// Piecewise approximation of the Hill rates on a refined partition and the
// resulting closed-form force F~, together with the explicit Euler baseline,
// the a-priori error bound and the nu-envelope.

#include <cstddef>
#include <vector>

#include "fes/exppoly.hpp"
#include "fes/model.hpp"

namespace fes {

enum class Scheme {
  Triangular,       // affine interpolation of both m1 and m2
  AffineConstant,   // m1 frozen at the right node while rising, affine while falling; m2 endpoint mean
  ConstantAverage,  // affine m1, m2 replaced by its exact mean on each segment
};

const char* to_string(Scheme s);
Scheme scheme_from_string(const char* name);

struct MApprox {
  std::vector<double> partition;   // refined nodes, partition.front() = t_0, back() = T
  std::vector<std::size_t> owner;  // pulse interval of each segment
  std::vector<bool> rising;        // segment lies before the interval's c_N maximum
  ExpPoly m1_tilde;                // rate 0 pieces
  ExpPoly m2_tilde;                // rate 0 pieces
  Scheme scheme = Scheme::AffineConstant;
  std::size_t p = 2;
  double nu = 1.0;

  std::size_t segment_count() const { return owner.size(); }
  /// Index of the first segment of pulse interval i and the number of segments it has.
  std::pair<std::size_t, std::size_t> segments_of(std::size_t i) const;
  /// Mean of m2_tilde on each segment: the constant decay rate used by F~.
  std::vector<double> m2_rates() const;
};

/// Refined nodes for depth p: p = 1 keeps the pulse times; otherwise each
/// interval is split at the c_N maximum with floor(p/2) uniform pieces before
/// it and the rest after. Splits that collapse onto an endpoint are dropped.
struct Partition {
  std::vector<double> nodes;
  std::vector<std::size_t> owner;
  std::vector<bool> rising;
};
Partition refine_partition(const PulseTrain& train, const ModelParams& params, std::size_t p);

MApprox build_m_approx(const PulseTrain& train, const ModelParams& params, Scheme scheme = Scheme::AffineConstant,
                       std::size_t p = 2, double nu = 1.0);

/// Antiderivative of m2_tilde on segment j of pulse interval i, zero at the segment start.
ExpPoly psi_primitive(const MApprox& m, std::size_t i, std::size_t j);

/// Closed-form F~ with the per-segment integrals and node values precomputed.
/// Evaluation is a segment lookup plus one partial-segment formula.
class ForceApprox {
 public:
  /// a_value in kN/s.
  ForceApprox(const MApprox& m, double a_value);

  double operator()(double t) const;

  /// The segment-sum formula evaluated from scratch, treating t as a point of
  /// segment g (which must contain t, boundaries included).
  double direct(double t, std::size_t g) const;
  double direct(double t) const;

  const std::vector<double>& nodes() const { return nodes_; }
  double start() const { return nodes_.front(); }
  double end() const { return nodes_.back(); }

 private:
  struct Segment {
    double rate = 0.0;              // constant m2 on the segment (1/ms)
    std::vector<double> m1;         // m1_tilde in the local variable
    std::vector<double> tail;       // polynomial part of F~/A in the local variable
    double head = 0.0;              // coefficient of exp(-rate u)
    double integral = 0.0;          // int_seg exp(rate (s - a)) m1(s) ds
  };

  double partial(const Segment& s, double u) const;  // int_0^u exp(rate v) m1(v) dv

  double a_ms_;
  std::vector<double> nodes_;
  std::vector<Segment> segs_;
};

double eval_F_tilde(const MApprox& m, const ModelParams& params, double a_value, double t);

/// Exact rate values at the nodes of a refined partition.
struct EulerInputs {
  std::vector<double> nodes;
  std::vector<double> m1;
  std::vector<double> m2;
};
EulerInputs euler_inputs(const PulseTrain& train, const ModelParams& params, std::size_t p, double nu = 1.0);

/// F at node q from the explicit Euler product-sum
/// sum_{g<q} h_g d_g prod_{g<g'<q} c_g', c = 1 - h m2, d = m1.
/// Throws UnstableStep when some |c_g| > 1.
double eval_F_euler(const EulerInputs& in, const ModelParams& params, double a_value, std::size_t q);

struct ErrorBoundReport {
  double bound = 0.0;    // kN-free: bound on |F - F~| / A (A in kN/ms)
  double m1_term = 0.0;  // int_0^{t_k} |m1 - m1~|
  double m2_term = 0.0;  // t_k int_0^{t_k} |m2 - m2~|
  bool m1_in_unit_range = true;
  bool m2_is_average = true;
  bool shape_ok = true;  // m1 concave / m2 convex where the scheme assumes it
  std::vector<std::size_t> shape_violations;  // pulse intervals that fail the check

  bool hypotheses_ok() const { return m1_in_unit_range && m2_is_average && shape_ok; }
};

/// Bound on |F(t_k) - F~(t_k)| / A. Never throws on violated hypotheses;
/// they are reported in the flags.
ErrorBoundReport error_bound_F(const PulseTrain& train, const ModelParams& params, const MApprox& m, std::size_t k);

struct Envelope {
  double low = 0.0;
  double high = 0.0;
};

/// F~ for nu_low (>= 1, lower force) and nu_high (<= 1, higher force).
class ForceEnvelope {
 public:
  ForceEnvelope(const PulseTrain& train, const ModelParams& params, double nu_low, double nu_high,
                Scheme scheme = Scheme::AffineConstant, std::size_t p = 2);
  Envelope operator()(double t) const { return {low_(t), high_(t)}; }

 private:
  ForceApprox low_;
  ForceApprox high_;
};

Envelope upper_lower_envelope(const PulseTrain& train, const ModelParams& params, double nu_low, double nu_high,
                              double t, Scheme scheme = Scheme::AffineConstant, std::size_t p = 2);

}  // namespace fes
