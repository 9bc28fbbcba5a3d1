#pragma once

// Generalized Marchenko-Pastur law mu_alpha[nu] of Z D Z^T / n with weights
// D_ii = F(u_i), u_i ~ nu, for a discrete weight law.
//
// Stieltjes transform g(z) solves  g = -[z - alpha E[F/(alpha + g F)]]^{-1},
// with inverse  g^{-1}(s) = -1/s + alpha E[F/(alpha + s F)].

#include <complex>
#include <iosfwd>
#include <stdexcept>
#include <vector>

#include "kacrice/quadrature.hpp"

namespace kacrice {

class NoConvergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EdgeNotFound : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SpectrumResult {
  std::vector<double> w;        // grid (shifted coordinates for hessian_density)
  std::vector<double> density;  // >= 0
  double x_min = 0;             // left edge in the grid's coordinates
  double g_min = 0;             // Stieltjes transform at the edge
  double t_nu = 0;              // shift applied (0 for density_grid)
  double eps = 0;
  double mass = 0;              // trapezoidal mass of the grid
  std::size_t flagged = 0;      // grid points where the root solver failed
};

struct EdgeResult {
  double x_min = 0;
  double g_min = 0;
  bool saturated = false;  // g_min sits at the admissibility bound alpha/|F_min|
};

/// Residual G(g) = g + 1/(z - alpha E[F/(alpha+gF)]).
std::complex<double> mp_residual(const WeightLaw& nu, double alpha, std::complex<double> z,
                                 std::complex<double> g);

/// Root of the MP equation with Im g > 0 for Im z > 0. An initial guess (for
/// warm starts along a grid) is used when it has positive imaginary part.
std::complex<double> stieltjes_at(std::complex<double> z, const WeightLaw& nu, double alpha,
                                  std::complex<double> init = {0.0, 0.0});

/// g^{-1}(s) for real s with alpha + s F > 0 on the support.
double inverse_stieltjes(const WeightLaw& nu, double alpha, double s);

/// alpha E[(sF/(alpha+sF))^2]; the edge is where this reaches 1.
double edge_function(const WeightLaw& nu, double alpha, double s);

EdgeResult left_edge(const WeightLaw& nu, double alpha);

/// density(x) = Im g(x + i eps)/pi on n_points equispaced points of [lo, hi].
SpectrumResult density_grid(const WeightLaw& nu, double alpha, double lo, double hi,
                            int n_points, double eps = 1e-6);

/// Same as density_grid in the shifted coordinate w = x - t(nu).
SpectrumResult hessian_density(const WeightLaw& nu, double alpha, double lo, double hi,
                               int n_points, double eps = 1e-6);

/// Cumulative distribution of a density grid (trapezoidal, normalized to 1).
std::vector<double> grid_cdf(const SpectrumResult& s);

void write_density_csv(std::ostream& os, const SpectrumResult& s);

}  // namespace kacrice
