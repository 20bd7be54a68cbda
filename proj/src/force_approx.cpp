#include "fes/force_approx.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "fes/errors.hpp"
#include "quadrature.hpp"

namespace fes {
namespace {

// phi_j(x) = sum_m x^m / (m + j)!, so that
// int_0^u exp(-c (u - v)) v^k dv = k! u^{k+1} phi_{k+1}(-c u).
std::vector<double> phi_table(double x, std::size_t jmax) {
  std::vector<double> phi(jmax + 1);
  if (std::abs(x) < 1.0) {
    for (std::size_t j = 0; j <= jmax; ++j) {
      double term = 1.0;
      for (std::size_t i = 2; i <= j; ++i) term /= static_cast<double>(i);
      double sum = term;
      for (int m = 1; m < 40; ++m) {
        term *= x / static_cast<double>(m + static_cast<int>(j));
        sum += term;
        if (std::abs(term) < 1e-18 * std::abs(sum)) break;
      }
      phi[j] = sum;
    }
    return phi;
  }
  phi[0] = std::exp(x);
  double inv_fact = 1.0;
  for (std::size_t j = 0; j < jmax; ++j) {
    phi[j + 1] = (phi[j] - inv_fact) / x;
    inv_fact /= static_cast<double>(j + 1);
  }
  return phi;
}

// int_0^u exp(-c (u - v)) P(v) dv
double convolve(std::span<const double> poly, double c, double u) {
  if (poly.empty() || u == 0.0) return 0.0;
  const auto phi = phi_table(-c * u, poly.size());
  double sum = 0.0;
  double fact = 1.0;
  double upow = u;
  for (std::size_t k = 0; k < poly.size(); ++k) {
    if (k > 0) fact *= static_cast<double>(k);
    sum += poly[k] * fact * upow * phi[k + 1];
    upow *= u;
  }
  return sum;
}

std::vector<double> affine(double y0, double y1, double h) { return {y0, (y1 - y0) / h}; }

// Polynomial (rate 0) part of a piece.
std::vector<double> rate_free(const std::vector<ExpTerm>& terms) {
  for (const auto& term : terms) {
    if (std::abs(term.rate) < ExpPoly::kRateEpsilon) return term.poly;
  }
  return {};
}

void uniform_split(double a, double b, std::size_t count, bool rise, Partition& out, std::size_t owner) {
  for (std::size_t j = 0; j < count; ++j) {
    const double x = a + (b - a) * static_cast<double>(j) / static_cast<double>(count);
    out.nodes.push_back(j == 0 ? a : x);
    out.owner.push_back(owner);
    out.rising.push_back(rise);
  }
}

}  // namespace

const char* to_string(Scheme s) {
  switch (s) {
    case Scheme::Triangular: return "triangular";
    case Scheme::AffineConstant: return "affine-constant";
    case Scheme::ConstantAverage: return "constant-average";
  }
  return "?";
}

Scheme scheme_from_string(const char* name) {
  if (std::strcmp(name, "triangular") == 0) return Scheme::Triangular;
  if (std::strcmp(name, "affine-constant") == 0) return Scheme::AffineConstant;
  if (std::strcmp(name, "constant-average") == 0) return Scheme::ConstantAverage;
  throw InvalidArgument(std::string("unknown scheme '") + name + "'");
}

std::pair<std::size_t, std::size_t> MApprox::segments_of(std::size_t i) const {
  const auto lo = std::lower_bound(owner.begin(), owner.end(), i);
  const auto hi = std::upper_bound(owner.begin(), owner.end(), i);
  if (lo == hi) throw InvalidArgument("pulse interval " + std::to_string(i) + " has no segments");
  return {static_cast<std::size_t>(lo - owner.begin()), static_cast<std::size_t>(hi - lo)};
}

std::vector<double> MApprox::m2_rates() const {
  std::vector<double> rates(segment_count());
  for (std::size_t g = 0; g < rates.size(); ++g) {
    const double a = partition[g];
    const double b = partition[g + 1];
    rates[g] = m2_tilde.integrate(a, b) / (b - a);
  }
  return rates;
}

Partition refine_partition(const PulseTrain& train, const ModelParams& params, std::size_t p) {
  if (p == 0) throw InvalidArgument("partition depth must be >= 1");
  train.validate();
  Partition out;
  const std::size_t before = p / 2;
  for (std::size_t k = 0; k < train.times.size(); ++k) {
    const double a = train.times[k];
    const double b = train.interval_end(k);
    const double len = b - a;
    double peak = a;
    bool live = true;
    try {
      peak = argmax_cN_interval(train, params, k);
    } catch (const InvalidArgument&) {
      live = false;
    }
    if (!live) {
      uniform_split(a, b, 1, false, out, k);
      continue;
    }
    const bool at_start = peak - a <= 1e-12 * len;
    const bool at_end = b - peak <= 1e-12 * len;
    if (p == 1) {
      uniform_split(a, b, 1, at_end, out, k);
    } else if (at_start) {
      uniform_split(a, b, p - before, false, out, k);
    } else if (at_end) {
      uniform_split(a, b, before, true, out, k);
    } else {
      uniform_split(a, peak, before, true, out, k);
      uniform_split(peak, b, p - before, false, out, k);
    }
  }
  out.nodes.push_back(train.horizon);
  return out;
}

MApprox build_m_approx(const PulseTrain& train, const ModelParams& params, Scheme scheme, std::size_t p, double nu) {
  if (!(nu > 0.0)) throw InvalidArgument("nu must be positive");
  auto part = refine_partition(train, params, p);
  const auto c = LobeSum::from_train(train, params);

  MApprox m;
  m.scheme = scheme;
  m.p = p;
  m.nu = nu;
  const std::size_t segs = part.owner.size();
  std::vector<double> c_nodes(part.nodes.size());
  for (std::size_t q = 0; q < c_nodes.size(); ++q) c_nodes[q] = c(part.nodes[q]);

  std::vector<std::vector<ExpTerm>> m1_pieces(segs);
  std::vector<std::vector<ExpTerm>> m2_pieces(segs);
  for (std::size_t g = 0; g < segs; ++g) {
    const double a = part.nodes[g];
    const double b = part.nodes[g + 1];
    const double h = b - a;
    const double m1a = eval_m1(c_nodes[g], params, nu);
    const double m1b = eval_m1(c_nodes[g + 1], params, nu);
    const double m2a = eval_m2(c_nodes[g], params, nu);
    const double m2b = eval_m2(c_nodes[g + 1], params, nu);
    std::vector<double> p1;
    std::vector<double> p2;
    switch (scheme) {
      case Scheme::Triangular:
        p1 = affine(m1a, m1b, h);
        p2 = affine(m2a, m2b, h);
        break;
      case Scheme::AffineConstant:
        p1 = part.rising[g] ? std::vector<double>{m1b} : affine(m1a, m1b, h);
        p2 = {0.5 * (m2a + m2b)};
        break;
      case Scheme::ConstantAverage: {
        p1 = affine(m1a, m1b, h);
        const double mean =
            detail::integrate([&](double s) { return eval_m2(c(s), params, nu); }, a, b, 1e-14 * h) / h;
        p2 = {mean};
        break;
      }
    }
    m1_pieces[g] = {ExpTerm{std::move(p1), 0.0}};
    m2_pieces[g] = {ExpTerm{std::move(p2), 0.0}};
  }
  m.m1_tilde = ExpPoly(part.nodes, std::move(m1_pieces));
  m.m2_tilde = ExpPoly(part.nodes, std::move(m2_pieces));
  m.partition = std::move(part.nodes);
  m.owner = std::move(part.owner);
  m.rising = std::move(part.rising);
  return m;
}

ExpPoly psi_primitive(const MApprox& m, std::size_t i, std::size_t j) {
  const auto [first, count] = m.segments_of(i);
  if (j >= count) throw InvalidArgument("segment index out of range");
  const std::size_t g = first + j;
  return m.m2_tilde.restrict(m.partition[g], m.partition[g + 1]).antiderivative();
}

ForceApprox::ForceApprox(const MApprox& m, double a_value) : a_ms_(per_ms(a_value)), nodes_(m.partition) {
  const auto rates = m.m2_rates();
  segs_.resize(m.segment_count());
  double g_node = 0.0;  // F~/A at the left node of the current segment
  for (std::size_t g = 0; g < segs_.size(); ++g) {
    auto& s = segs_[g];
    s.rate = rates[g];
    s.m1 = rate_free(m.m1_tilde.piece(g));
    s.head = g_node;
    const double h = nodes_[g + 1] - nodes_[g];
    const double conv = convolve(s.m1, s.rate, h);
    s.integral = std::exp(s.rate * h) * conv;
    g_node = std::exp(-s.rate * h) * g_node + conv;
  }
}

double ForceApprox::partial(const Segment& s, double u) const { return convolve(s.m1, s.rate, u); }

double ForceApprox::operator()(double t) const {
  if (t <= nodes_.front()) return 0.0;
  const double tc = std::min(t, nodes_.back());
  auto it = std::upper_bound(nodes_.begin(), nodes_.end(), tc);
  std::size_t g = static_cast<std::size_t>(it - nodes_.begin()) - 1;
  if (g >= segs_.size()) g = segs_.size() - 1;
  const auto& s = segs_[g];
  const double u = tc - nodes_[g];
  if (s.m1.size() <= 2 && s.rate > 1e-8) {
    // Affine m1: the convolution has an expm1 closed form, one exp per call.
    const double x = s.rate * u;
    const double em = std::expm1(-x);
    const double a0 = s.m1.empty() ? 0.0 : s.m1[0];
    const double a1 = s.m1.size() == 2 ? s.m1[1] : 0.0;
    return a_ms_ * ((1.0 + em) * s.head - a0 * em / s.rate + a1 * (x + em) / (s.rate * s.rate));
  }
  return a_ms_ * (std::exp(-s.rate * u) * s.head + partial(s, u));
}

double ForceApprox::direct(double t, std::size_t g) const {
  if (g >= segs_.size()) throw InvalidArgument("segment index out of range");
  const double a = nodes_[g];
  const double b = nodes_[g + 1];
  if (t < a - 1e-12 * std::max(1.0, std::abs(a)) || t > b + 1e-12 * std::max(1.0, std::abs(b))) {
    throw InvalidArgument("time lies outside the requested segment");
  }
  // Accumulated Psi increments: phi_at[g'] = int_0^{node g'} m2~.
  double psi_left = 0.0;
  std::vector<double> psi(g + 1);
  for (std::size_t q = 0; q < g; ++q) {
    psi[q] = psi_left;
    psi_left += segs_[q].rate * (nodes_[q + 1] - nodes_[q]);
  }
  psi[g] = psi_left;
  const auto& s = segs_[g];
  const double u = t - a;
  const double psi_t = psi_left + s.rate * u;
  double sum = 0.0;
  for (std::size_t q = 0; q < g; ++q) {
    // Segment integral of exp(Psi_q(s)) m1~(s) from its ExpPoly antiderivative.
    const double h = nodes_[q + 1] - nodes_[q];
    const auto piece = ExpPoly::exponential(0.0, h, segs_[q].m1, segs_[q].rate);
    sum += std::exp(-(psi_t - psi[q])) * piece.integrate(0.0, h);
  }
  if (u > 0.0) {
    const auto piece = ExpPoly::exponential(0.0, u, s.m1, s.rate);
    sum += std::exp(-s.rate * u) * piece.integrate(0.0, u);
  }
  return a_ms_ * sum;
}

double ForceApprox::direct(double t) const {
  if (t <= nodes_.front()) return 0.0;
  const double tc = std::min(t, nodes_.back());
  auto it = std::upper_bound(nodes_.begin(), nodes_.end(), tc);
  std::size_t g = static_cast<std::size_t>(it - nodes_.begin()) - 1;
  if (g >= segs_.size()) g = segs_.size() - 1;
  return direct(tc, g);
}

double eval_F_tilde(const MApprox& m, const ModelParams& params, double a_value, double t) {
  (void)params;
  return ForceApprox(m, a_value)(t);
}

EulerInputs euler_inputs(const PulseTrain& train, const ModelParams& params, std::size_t p, double nu) {
  const auto part = refine_partition(train, params, p);
  const auto c = LobeSum::from_train(train, params);
  EulerInputs in;
  in.nodes = part.nodes;
  in.m1.reserve(in.nodes.size());
  in.m2.reserve(in.nodes.size());
  for (double t : in.nodes) {
    const double cn = c(t);
    in.m1.push_back(eval_m1(cn, params, nu));
    in.m2.push_back(eval_m2(cn, params, nu));
  }
  return in;
}

double eval_F_euler(const EulerInputs& in, const ModelParams& params, double a_value, std::size_t q) {
  (void)params;
  if (q >= in.nodes.size()) throw InvalidArgument("node index out of range");
  std::vector<double> cg(q);
  for (std::size_t g = 0; g < q; ++g) {
    const double h = in.nodes[g + 1] - in.nodes[g];
    cg[g] = 1.0 - h * in.m2[g];
    if (std::abs(cg[g]) > 1.0) {
      throw UnstableStep("Euler factor leaves the unit disc on segment " + std::to_string(g));
    }
  }
  double sum = 0.0;
  for (std::size_t g = 0; g < q; ++g) {
    double prod = 1.0;
    for (std::size_t r = g + 1; r < q; ++r) prod *= cg[r];
    sum += (in.nodes[g + 1] - in.nodes[g]) * in.m1[g] * prod;
  }
  return per_ms(a_value) * sum;
}

ErrorBoundReport error_bound_F(const PulseTrain& train, const ModelParams& params, const MApprox& m, std::size_t k) {
  if (k >= train.times.size()) throw InvalidArgument("node index out of range");
  ErrorBoundReport rep;
  const auto c = LobeSum::from_train(train, params);
  const auto rates = m.m2_rates();
  const double tk = train.times[k];

  rep.m2_is_average = m.scheme == Scheme::ConstantAverage && m.nu == 1.0;
  for (std::size_t g = 0; g < m.segment_count(); ++g) {
    const double a = m.partition[g];
    const double b = m.partition[g + 1];
    for (double x : {a, 0.5 * (a + b), b}) {
      const double v = m.m1_tilde(std::min(x, m.m1_tilde.end()));
      if (v < -1e-15 || v > 1.0 + 1e-15) rep.m1_in_unit_range = false;
    }
    if (b > tk + 1e-12) continue;
    const double rate = rates[g];
    const auto gap1 = [&](double s) { return std::abs(eval_m1(c(s), params) - m.m1_tilde(s)); };
    const auto gap2 = [&](double s) { return std::abs(eval_m2(c(s), params) - rate); };
    rep.m1_term += detail::integrate(gap1, a, b, 1e-11);
    rep.m2_term += detail::integrate(gap2, a, b, 1e-13);
  }
  rep.m2_term *= tk;
  rep.bound = rep.m1_term + rep.m2_term;

  // Concavity of m1 and convexity of m2 on each pulse interval before t_k,
  // checked through second differences on a uniform grid.
  constexpr int kSamples = 128;
  for (std::size_t j = 0; j < k; ++j) {
    const double a = train.times[j];
    const double b = train.interval_end(j);
    const double h = (b - a) / kSamples;
    bool ok = true;
    for (int i = 1; i < kSamples && ok; ++i) {
      const double x = a + h * i;
      const double c0 = c(x - h), c1 = c(x), c2 = c(x + h);
      const double d1 = eval_m1(c0, params) - 2.0 * eval_m1(c1, params) + eval_m1(c2, params);
      const double d2 = eval_m2(c0, params) - 2.0 * eval_m2(c1, params) + eval_m2(c2, params);
      if (d1 > 1e-13 || d2 < -1e-15) ok = false;
    }
    if (!ok) rep.shape_violations.push_back(j);
  }
  rep.shape_ok = rep.shape_violations.empty();
  return rep;
}

ForceEnvelope::ForceEnvelope(const PulseTrain& train, const ModelParams& params, double nu_low, double nu_high,
                             Scheme scheme, std::size_t p)
    : low_(build_m_approx(train, params, scheme, p, nu_low), params.a_rest),
      high_(build_m_approx(train, params, scheme, p, nu_high), params.a_rest) {
  if (!(nu_low >= 1.0 && nu_high <= 1.0 && nu_high > 0.0)) {
    throw InvalidArgument("envelope needs nu_low >= 1 >= nu_high > 0");
  }
}

Envelope upper_lower_envelope(const PulseTrain& train, const ModelParams& params, double nu_low, double nu_high,
                              double t, Scheme scheme, std::size_t p) {
  return ForceEnvelope(train, params, nu_low, nu_high, scheme, p)(t);
}

}  // namespace fes
