#include "fes/exppoly.hpp"

#include <algorithm>
#include <cmath>

#include "fes/errors.hpp"

namespace fes {
namespace poly {

double eval(std::span<const double> c, double u) {
  double acc = 0.0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) acc = acc * u + *it;
  return acc;
}

std::vector<double> derivative(std::span<const double> c) {
  if (c.size() <= 1) return {};
  std::vector<double> d(c.size() - 1);
  for (std::size_t k = 1; k < c.size(); ++k) d[k - 1] = static_cast<double>(k) * c[k];
  return d;
}

std::vector<double> antiderivative(std::span<const double> c) {
  std::vector<double> out(c.size() + 1, 0.0);
  for (std::size_t k = 0; k < c.size(); ++k) out[k + 1] = c[k] / static_cast<double>(k + 1);
  return out;
}

std::vector<double> multiply(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) return {};
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

std::vector<double> shift(std::span<const double> c, double d) {
  // Repeated synthetic division (Taylor shift), O(n^2).
  std::vector<double> out(c.begin(), c.end());
  const std::size_t n = out.size();
  for (std::size_t i = 0; i + 1 < n; ++i)
    for (std::size_t j = n - 1; j > i; --j) out[j - 1] += d * out[j];
  return out;
}

}  // namespace poly

double ExpTerm::operator()(double u) const {
  const double p = poly::eval(poly, u);
  return rate == 0.0 ? p : p * std::exp(rate * u);
}

ExpPoly::ExpPoly(std::vector<double> breakpoints, std::vector<std::vector<ExpTerm>> pieces)
    : bp_(std::move(breakpoints)), pieces_(std::move(pieces)) {
  if (bp_.size() < 2 || pieces_.size() + 1 != bp_.size())
    throw InvalidArgument("ExpPoly needs one more breakpoint than pieces");
  for (std::size_t i = 1; i < bp_.size(); ++i)
    if (!(bp_[i] > bp_[i - 1])) throw InvalidArgument("ExpPoly breakpoints must be strictly increasing");
  for (auto& p : pieces_) p = normalize(std::move(p));
}

ExpPoly ExpPoly::zero(double a, double b) { return ExpPoly({a, b}, {{}}); }

ExpPoly ExpPoly::polynomial(double a, double b, std::vector<double> local_coeffs) {
  return ExpPoly({a, b}, {{ExpTerm{std::move(local_coeffs), 0.0}}});
}

ExpPoly ExpPoly::exponential(double a, double b, std::vector<double> local_coeffs, double rate) {
  return ExpPoly({a, b}, {{ExpTerm{std::move(local_coeffs), rate}}});
}

std::vector<ExpTerm> ExpPoly::normalize(std::vector<ExpTerm> terms) {
  std::vector<ExpTerm> out;
  for (auto& term : terms) {
    if (std::abs(term.rate) < kRateEpsilon) term.rate = 0.0;
    while (!term.poly.empty() && term.poly.back() == 0.0) term.poly.pop_back();
    if (term.poly.empty()) continue;
    auto same = std::find_if(out.begin(), out.end(), [&](const ExpTerm& t) { return t.rate == term.rate; });
    if (same == out.end()) {
      out.push_back(std::move(term));
      continue;
    }
    if (same->poly.size() < term.poly.size()) same->poly.resize(term.poly.size(), 0.0);
    for (std::size_t k = 0; k < term.poly.size(); ++k) same->poly[k] += term.poly[k];
  }
  std::sort(out.begin(), out.end(), [](const ExpTerm& a, const ExpTerm& b) { return a.rate < b.rate; });
  return out;
}

std::vector<ExpTerm> ExpPoly::shift_origin(const std::vector<ExpTerm>& terms, double d) {
  std::vector<ExpTerm> out;
  out.reserve(terms.size());
  for (const auto& term : terms) {
    ExpTerm shifted{poly::shift(term.poly, d), term.rate};
    if (term.rate != 0.0) {
      const double scale = std::exp(term.rate * d);
      for (double& c : shifted.poly) c *= scale;
    }
    out.push_back(std::move(shifted));
  }
  return out;
}

std::size_t ExpPoly::locate(double t) const {
  auto it = std::upper_bound(bp_.begin(), bp_.end(), t);
  const auto idx = static_cast<std::ptrdiff_t>(it - bp_.begin()) - 1;
  return static_cast<std::size_t>(std::clamp<std::ptrdiff_t>(idx, 0, static_cast<std::ptrdiff_t>(pieces_.size()) - 1));
}

double ExpPoly::operator()(double t) const {
  const std::size_t i = locate(t);
  const double u = t - bp_[i];
  double sum = 0.0;
  for (const auto& term : pieces_[i]) sum += term(u);
  return sum;
}

int ExpPoly::degree() const {
  int deg = -1;
  for (const auto& p : pieces_)
    for (const auto& term : p) deg = std::max(deg, static_cast<int>(term.poly.size()) - 1);
  return deg;
}

ExpPoly ExpPoly::derivative() const {
  std::vector<std::vector<ExpTerm>> pieces;
  pieces.reserve(pieces_.size());
  for (const auto& p : pieces_) {
    std::vector<ExpTerm> d;
    for (const auto& term : p) {
      // (P' + lambda P) e^{lambda u}
      std::vector<double> c = poly::derivative(term.poly);
      c.resize(term.poly.size(), 0.0);
      for (std::size_t k = 0; k < term.poly.size(); ++k) c[k] += term.rate * term.poly[k];
      d.push_back({std::move(c), term.rate});
    }
    pieces.push_back(std::move(d));
  }
  return ExpPoly(bp_, std::move(pieces));
}

ExpPoly ExpPoly::antiderivative() const {
  std::vector<std::vector<ExpTerm>> pieces;
  pieces.reserve(pieces_.size());
  double offset = 0.0;
  for (std::size_t i = 0; i < pieces_.size(); ++i) {
    std::vector<ExpTerm> out;
    double constant = offset;
    const double len = bp_[i + 1] - bp_[i];
    for (const auto& term : pieces_[i]) {
      if (term.rate == 0.0) {
        out.push_back({poly::antiderivative(term.poly), 0.0});
        continue;
      }
      if (std::abs(term.rate) * len < kSlowRate) {
        // The closed form below divides by powers of the rate and cancels
        // badly when the exponential barely moves over the piece. Expand
        // e^{lu} in its Taylor series instead; it converges fast here.
        std::vector<double> series{1.0};
        double coef = 1.0;
        for (int m = 1; m < 40; ++m) {
          coef *= term.rate / m;
          if (std::abs(coef) * std::pow(len, m) < 1e-18) break;
          series.push_back(coef);
        }
        out.push_back({poly::antiderivative(poly::multiply(term.poly, series)), 0.0});
        continue;
      }
      // int P e^{lu} du = e^{lu} sum_k (-1)^k P^(k) / l^{k+1}
      std::vector<double> q(term.poly.size(), 0.0);
      std::vector<double> deriv = term.poly;
      double sign_over = 1.0 / term.rate;
      for (std::size_t k = 0; k < term.poly.size(); ++k) {
        for (std::size_t j = 0; j < deriv.size(); ++j) q[j] += sign_over * deriv[j];
        deriv = poly::derivative(deriv);
        sign_over *= -1.0 / term.rate;
      }
      constant -= q.empty() ? 0.0 : q[0];
      out.push_back({std::move(q), term.rate});
    }
    out.push_back({{constant}, 0.0});
    out = normalize(std::move(out));
    offset = 0.0;
    for (const auto& term : out) offset += term(len);
    pieces.push_back(std::move(out));
  }
  return ExpPoly(bp_, std::move(pieces));
}

double ExpPoly::integrate(double a, double b) const {
  const ExpPoly prim = antiderivative();
  return prim(b) - prim(a);
}

ExpPoly ExpPoly::refine(std::span<const double> extra) const {
  std::vector<double> bp = bp_;
  for (double x : extra)
    if (x > bp_.front() && x < bp_.back()) bp.push_back(x);
  std::sort(bp.begin(), bp.end());
  bp.erase(std::unique(bp.begin(), bp.end()), bp.end());
  std::vector<std::vector<ExpTerm>> pieces;
  pieces.reserve(bp.size() - 1);
  for (std::size_t i = 0; i + 1 < bp.size(); ++i) {
    const std::size_t src = locate(bp[i]);
    const double d = bp[i] - bp_[src];
    pieces.push_back(d == 0.0 ? pieces_[src] : shift_origin(pieces_[src], d));
  }
  return ExpPoly(std::move(bp), std::move(pieces));
}

ExpPoly ExpPoly::restrict(double a, double b) const {
  if (!(a >= start() && b <= end() && a < b)) throw InvalidArgument("restrict range outside the domain");
  const double cuts[2] = {a, b};
  const ExpPoly fine = refine(cuts);
  std::vector<double> bp;
  std::vector<std::vector<ExpTerm>> pieces;
  for (std::size_t i = 0; i + 1 < fine.bp_.size(); ++i) {
    if (fine.bp_[i] >= a && fine.bp_[i + 1] <= b) {
      if (bp.empty()) bp.push_back(fine.bp_[i]);
      bp.push_back(fine.bp_[i + 1]);
      pieces.push_back(fine.pieces_[i]);
    }
  }
  return ExpPoly(std::move(bp), std::move(pieces));
}

ExpPoly& ExpPoly::operator*=(double s) {
  for (auto& p : pieces_)
    for (auto& term : p)
      for (double& c : term.poly) c *= s;
  for (auto& p : pieces_) p = normalize(std::move(p));
  return *this;
}

namespace {

void require_same_domain(const ExpPoly& a, const ExpPoly& b) {
  if (a.start() != b.start() || a.end() != b.end()) throw InvalidArgument("ExpPoly domains differ");
}

}  // namespace

ExpPoly operator+(const ExpPoly& lhs, const ExpPoly& rhs) {
  require_same_domain(lhs, rhs);
  const ExpPoly a = lhs.refine(rhs.bp_);
  const ExpPoly b = rhs.refine(lhs.bp_);
  std::vector<std::vector<ExpTerm>> pieces(a.pieces_.size());
  for (std::size_t i = 0; i < pieces.size(); ++i) {
    pieces[i] = a.pieces_[i];
    pieces[i].insert(pieces[i].end(), b.pieces_[i].begin(), b.pieces_[i].end());
  }
  return ExpPoly(a.bp_, std::move(pieces));
}

ExpPoly operator-(const ExpPoly& lhs, const ExpPoly& rhs) { return lhs + (-1.0) * rhs; }

ExpPoly operator*(const ExpPoly& lhs, const ExpPoly& rhs) {
  require_same_domain(lhs, rhs);
  const ExpPoly a = lhs.refine(rhs.bp_);
  const ExpPoly b = rhs.refine(lhs.bp_);
  std::vector<std::vector<ExpTerm>> pieces(a.pieces_.size());
  for (std::size_t i = 0; i < pieces.size(); ++i)
    for (const auto& x : a.pieces_[i])
      for (const auto& y : b.pieces_[i]) pieces[i].push_back({poly::multiply(x.poly, y.poly), x.rate + y.rate});
  return ExpPoly(a.bp_, std::move(pieces));
}

}  // namespace fes
