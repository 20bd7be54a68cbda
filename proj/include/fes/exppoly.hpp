#pragma once

// Piecewise polynomial-exponential functions sum_n P_n(t) exp(lambda_n t).
//
// Each piece stores its terms in the local variable u = t - origin, where
// origin is the piece's left breakpoint. Keeping the origin local avoids the
// overflow and cancellation that exp(lambda t) would cause for large t.
// The class is closed under +, *, d/dt and antiderivative.

#include <cstddef>
#include <span>
#include <vector>

namespace fes {

struct ExpTerm {
  std::vector<double> poly;  // ascending coefficients in u
  double rate = 0.0;

  double operator()(double u) const;
};

class ExpPoly {
 public:
  ExpPoly() = default;
  ExpPoly(std::vector<double> breakpoints, std::vector<std::vector<ExpTerm>> pieces);

  static ExpPoly zero(double a, double b);
  static ExpPoly polynomial(double a, double b, std::vector<double> local_coeffs);
  static ExpPoly exponential(double a, double b, std::vector<double> local_coeffs, double rate);

  /// Evaluates at t. Breakpoints belong to the piece on their right, except
  /// the final breakpoint.
  double operator()(double t) const;

  ExpPoly derivative() const;
  /// Continuous antiderivative, zero at start().
  ExpPoly antiderivative() const;
  double integrate(double a, double b) const;

  /// Same function over [a, b] (which must lie inside the domain).
  ExpPoly restrict(double a, double b) const;
  /// Same function with additional breakpoints inserted.
  ExpPoly refine(std::span<const double> extra) const;

  ExpPoly& operator*=(double s);
  friend ExpPoly operator+(const ExpPoly& lhs, const ExpPoly& rhs);
  friend ExpPoly operator-(const ExpPoly& lhs, const ExpPoly& rhs);
  friend ExpPoly operator*(const ExpPoly& lhs, const ExpPoly& rhs);
  friend ExpPoly operator*(double s, ExpPoly p) { return p *= s; }

  std::span<const double> breakpoints() const { return bp_; }
  std::size_t piece_count() const { return pieces_.size(); }
  const std::vector<ExpTerm>& piece(std::size_t i) const { return pieces_.at(i); }
  double start() const { return bp_.front(); }
  double end() const { return bp_.back(); }
  /// Largest polynomial degree over all terms (-1 for the zero function).
  int degree() const;
  std::size_t locate(double t) const;

  /// Rates closer to zero than this are treated as exact polynomials.
  static constexpr double kRateEpsilon = 1e-14;
  /// Below this value of |rate| * piece length, antiderivatives expand the
  /// exponential into a polynomial rather than dividing by the rate.
  static constexpr double kSlowRate = 0.5;

 private:
  static std::vector<ExpTerm> normalize(std::vector<ExpTerm> terms);
  static std::vector<ExpTerm> shift_origin(const std::vector<ExpTerm>& terms, double d);

  std::vector<double> bp_;
  std::vector<std::vector<ExpTerm>> pieces_;
};

namespace poly {

double eval(std::span<const double> c, double u);
std::vector<double> derivative(std::span<const double> c);
std::vector<double> antiderivative(std::span<const double> c);  // zero constant term
std::vector<double> multiply(std::span<const double> a, std::span<const double> b);
/// Coefficients of q(v) = p(v + d).
std::vector<double> shift(std::span<const double> c, double d);

}  // namespace poly

}  // namespace fes
