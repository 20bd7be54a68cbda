#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <algorithm>
#include <cmath>
#include <queue>
#include <sstream>
#include <vector>

#include "fes/errors.hpp"

namespace fes::detail {

/// Globally adaptive 31-point Gauss-Kronrod on [a, b]: the panel with the
/// largest error estimate is bisected until the summed estimate drops below
/// max(abs_target, 1e-14 * L1). Throws after max_panels panels.
///
/// Boost's own recursive driver is not used: its combined error estimate is
/// erratic on very short intervals.
template <class F>
double integrate(F&& f, double a, double b, double abs_target = 1e-12, unsigned max_panels = 4000) {
  if (b == a) return 0.0;
  using GK = boost::math::quadrature::gauss_kronrod<double, 31>;
  struct Panel {
    double lo, hi, value, error, l1;
    bool operator<(const Panel& o) const { return error < o.error; }
  };
  auto panel = [&](double lo, double hi) {
    double error = 0.0;
    double l1 = 0.0;
    const double value = GK::integrate(f, lo, hi, 0, 0.0, &error, &l1);
    return Panel{lo, hi, value, error, l1};
  };
  std::priority_queue<Panel> heap;
  heap.push(panel(a, b));
  double value = heap.top().value;
  double error = heap.top().error;
  double l1 = heap.top().l1;
  unsigned count = 1;
  while (error > std::max(abs_target, 1e-14 * l1)) {
    if (count >= max_panels || !std::isfinite(value)) {
      std::ostringstream msg;
      msg << "quadrature on [" << a << ", " << b << "] stalled at error " << error << " (value " << value << ")";
      throw QuadratureNoConvergence(msg.str());
    }
    const Panel worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.lo + worst.hi);
    if (mid <= worst.lo || mid >= worst.hi) {
      // Cannot bisect further; accept the panel as is.
      error -= worst.error;
      heap.push(Panel{worst.lo, worst.hi, worst.value, 0.0, worst.l1});
      continue;
    }
    const Panel left = panel(worst.lo, mid);
    const Panel right = panel(mid, worst.hi);
    value += left.value + right.value - worst.value;
    error += left.error + right.error - worst.error;
    l1 += left.l1 + right.l1 - worst.l1;
    heap.push(left);
    heap.push(right);
    ++count;
  }
  // Re-sum to shed the drift from incremental updates.
  double total = 0.0;
  while (!heap.empty()) {
    total += heap.top().value;
    heap.pop();
  }
  return total;
}

}  // namespace fes::detail
