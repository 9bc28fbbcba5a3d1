#pragma once

// Signal-aligned outlier below the Hessian bulk.
//
// With g_min the edge Stieltjes value of mu_alpha[nu] and f = d1^2 l:
//   x_min = -1/g_min + alpha E[f/(alpha + g_min f)]
//   x2    = alpha/(1-q^2) E[(y* - q y)^2 f/(alpha + g_min f)]
// An outlier x* < x_min exists iff d = x_min - x2 > 0; it solves
//   x* = alpha/(1-q^2) E[(y* - q y)^2 f/(alpha + g(x*) f)]
// with g(x) the real Stieltjes branch below the bulk.

#include <functional>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "kacrice/mp_spectrum.hpp"

namespace kacrice {

class NoSignChange : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NoSolutionBelowEdge : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct BBPResult {
  double alpha = 0, q = 0;
  std::string tag;  // energy class, free text ("typ", "low", "high", ...)
  double g_min = 0;
  double x_min = 0;
  double x2 = 0;
  double d_alpha = 0;
  double t_nu = 0;
  std::optional<double> x_star;

  double w_min() const { return x_min - t_nu; }
  double w2() const { return x2 - t_nu; }
  std::optional<double> w_star() const {
    if (!x_star) return std::nullopt;
    return *x_star - t_nu;
  }
};

/// Requires nu.vF (the label-side weights); throws std::invalid_argument if
/// they are missing.
BBPResult edge_functionals(const WeightLaw& nu, double alpha, double q);

/// Outlier position (unshifted) or nullopt when d_alpha < 0.
std::optional<double> outlier_location(const WeightLaw& nu, double alpha, double q,
                                       BBPResult* filled = nullptr);

/// Bisection on alpha for the sign change of d(alpha) over [lo, hi].
/// `d_of_alpha` re-solves whatever produces the law at each alpha.
double bbp_threshold(const std::function<double(double)>& d_of_alpha, double lo, double hi,
                     double tol = 1e-2);

void write_bbp_csv_header(std::ostream& os);
void write_bbp_csv_row(std::ostream& os, const BBPResult& r);

}  // namespace kacrice
