#pragma once

#include <cmath>
#include <functional>
#include <sstream>
#include <stdexcept>

namespace kacrice {

class NoSignChange;

/// Plain bisection for a sign change of f on [lo, hi]; returns the midpoint
/// of the final bracket. Deterministic: the evaluation sequence depends only
/// on the signs of f. Throws E when f(lo) and f(hi) share a sign.
template <class E>
double bisect_sign_change(const std::function<double(double)>& f, double lo, double hi,
                          double tol) {
  double flo = f(lo);
  double fhi = f(hi);
  if (std::signbit(flo) == std::signbit(fhi) || std::isnan(flo) || std::isnan(fhi)) {
    std::ostringstream msg;
    msg << "no sign change on [" << lo << ", " << hi << "]: f = " << flo << ", " << fhi;
    throw E(msg.str());
  }
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if (std::isnan(fm)) throw E("bisection: predicate returned NaN");
    if (std::signbit(fm) == std::signbit(flo)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
      fhi = fm;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace kacrice
