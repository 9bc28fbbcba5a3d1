#pragma once

// Nested sup-inf solver for the annealed complexity of local minima (tilde0
// mode) and of saddles with a sub-extensive number of negative directions
// (fin mode, lam_star pinned to 0).
//
//   Sigma = (-1 + (1-2 alpha) log alpha)/2 + log(1-q^2)/2
//         + sup_{A,g>0} inf_Lambda  J(A, g; Lambda)
//   J = -log(A)/2 + alpha (lam_A A + lam_e e) - log g - lam_t/g + lam_h
//       + alpha log int_{B_g} mu_q(du) exp(Phi(u)).
//
// The inner problem is convex in Lambda. Its Hessian is alpha times the
// covariance of dPhi/dLambda under the tilted law, which the quadrature
// provides at no extra cost, so the inner solve is a projected Newton method.
// The outer problem is a 2-D quasi-Newton ascent in (log A, log g) driven by
// the envelope gradients (L_A, L_g).

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "kacrice/quadrature.hpp"

namespace kacrice {

// kTC (all critical points) is solved by variational_critical; the sup-inf
// entry points below reject it.
enum class Mode { kTilde0, kFin, kTC };

const char* mode_name(Mode m);
Mode parse_mode(const std::string& s);

class InnerDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotConverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EmptyBand : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Multipliers {
  double lam_A = 0, lam_c = 0, lam_e = 0, lam_t = 0, lam_h = 0, lam_star = 0;
};

struct OuterPoint {
  double A = 0, g = 0;
};

/// Gradients of the inner functional (G_*) and of the outer one (L_*).
struct Residuals {
  double G_A = 0, G_c = 0, G_e = 0, G_t = 0, G_h = 0, G_star = 0;
  double L_A = 0, L_g = 0;
};

struct SolverOptions {
  double inner_tol = 1e-10;   // scaled projected-gradient norm
  int inner_max_iter = 100;
  double outer_tol = 1e-8;    // |L_A|, |L_g|
  int outer_max_iter = 150;
  double max_log_step = 1.0;  // cap on an outer step in (log A, log g)
};

struct InnerResult {
  Multipliers lam;
  double value = 0;  // inf over Lambda of J without the -log(A)/2 - log g terms
  MomentBundle moments;
  Residuals res;
  int iterations = 0;
  bool converged = false;
};

struct ComplexitySolution {
  double sigma = 0;
  OuterPoint outer;  // outer.g is Re g in kTC mode
  double g_i = 0;    // Im g (kTC only)
  double eps = 0;    // regularization of Im z (kTC only)
  Multipliers lam;
  Mode mode = Mode::kTilde0;
  double q = 0;
  std::optional<double> e;  // pinned energy, nullopt for free e
  double alpha = 0;
  std::string loss_name;
  double loss_a = 0;
  Residuals res;
  double energy = 0;  // E_nu[l]
  double t_nu = 0;    // E_nu[y dl]
  bool restricted = false;  // B_g != R^2
  bool converged = false;
  int outer_iterations = 0;
  int inner_iterations = 0;
  // Inverse-Hessian estimate of the outer ascent in (log A, log g); reused on
  // warm starts.
  double outer_hess[3] = {0, 0, 0};
};

/// Closed-form part (-1 + (1-2 alpha) log alpha)/2 + log(1-q^2)/2.
double complexity_prefactor(double alpha, double q);

InnerResult inner_minimize(GaussianMesh& mesh, OuterPoint outer, std::optional<double> e,
                           double alpha, Mode mode, const Multipliers* warm = nullptr,
                           const SolverOptions& opts = {});

/// Default outer initialization: A = E_mu[A], g = 0.9 g_edge(mu_q).
OuterPoint default_outer_init(GaussianMesh& mesh, double alpha);

ComplexitySolution complexity(GaussianMesh& mesh, std::optional<double> e, double alpha,
                              Mode mode, const ComplexitySolution* warm = nullptr,
                              const SolverOptions& opts = {});

/// Same, started from an explicit outer point (multipliers from scratch).
ComplexitySolution complexity_from(GaussianMesh& mesh, std::optional<double> e,
                                   double alpha, Mode mode, OuterPoint init,
                                   const SolverOptions& opts = {});

struct MultiStartReport {
  std::vector<ComplexitySolution> maxima;  // distinct converged maxima, best first
  std::vector<std::string> failures;       // starts that did not converge
  bool ambiguous() const { return maxima.size() > 1; }
};

/// Outer ascent from several starts: the default point and the default
/// scaled by each (A, g) factor pair. Maxima are distinct when their outer
/// points differ by more than `distinct` in (log A, log g).
MultiStartReport complexity_multistart(GaussianMesh& mesh, std::optional<double> e,
                                       double alpha, Mode mode,
                                       const std::vector<OuterPoint>& scales,
                                       double distinct = 1e-3, const SolverOptions& opts = {});

struct EnergyBand {
  double e_min = 0, e_star = 0, e_max = 0;
  double sigma_at_star = 0;
  bool empty = true;
  ComplexitySolution at_star, at_min, at_max;
};

/// Positive-complexity energy interval. e_star comes from the free-e solve
/// (dSigma/de = alpha lam_e vanishes there); the edges are located by a
/// safeguarded Newton iteration on Sigma(e) using that derivative.
EnergyBand energy_band(GaussianMesh& mesh, double alpha, Mode mode,
                       const ComplexitySolution* warm = nullptr, double e_tol = 1e-5,
                       const SolverOptions& opts = {});

/// One edge of the band (dir = +1 upper, -1 lower) from a converged free-e
/// solution; the pinned-e solution at the edge is stored in *at.
double band_edge(GaussianMesh& mesh, const ComplexitySolution& at_star, double dir,
                 ComplexitySolution* at, double e_tol = 1e-5, const SolverOptions& opts = {});

/// Tilt parameters of the label law nu at a solution.
TiltExponent label_law(const ComplexitySolution& sol);

}  // namespace kacrice
