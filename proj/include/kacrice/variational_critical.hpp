#pragma once

// Complexity of all critical points by fixed-point iteration on a complex
// Stieltjes variable g = g_r + i g_i:
//
//   Sigma_TC = (-1 + (1-2 alpha) log alpha)/2 + log(1-q^2)/2
//            + extr [ -log(A)/2 - log|g| + eps g_i + alpha (lam_A A + lam_e e)
//                     + alpha log int_{R^2} mu_q(du) exp(Phi_TC(u)) ]
//   Phi_TC = -lam_c c_q - lam_A A - lam_e l + log|alpha + F g| - (g_r/alpha) t.
//
// One sweep:
//   (i)   g <- -[E[t] + i eps - alpha E[F/(alpha + g F)]]^{-1}
//   (ii)  A <- E[A]
//   (iii) (lam_c, lam_e) such that E[c_q] = 0, E[l] = e exactly
//   (iv)  lam_A <- 1/(2 alpha A)
// with (g, A) relaxed by a damping factor. The extremum is not a sup-inf, so
// several fixed points can coexist; detect_branches runs several starts.

#include <complex>
#include <optional>
#include <stdexcept>
#include <vector>

#include "kacrice/variational_minima.hpp"

namespace kacrice {

class NoFixedPoint : public std::runtime_error {
 public:
  NoFixedPoint(const std::string& what, std::vector<double> trajectory)
      : std::runtime_error(what), trajectory_(std::move(trajectory)) {}
  /// Successive-change norm per iteration.
  const std::vector<double>& trajectory() const { return trajectory_; }

 private:
  std::vector<double> trajectory_;
};

class ImCollapse : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CriticalOuter {
  double A = 0;
  std::complex<double> g;
  double lam_A = 0, lam_c = 0, lam_e = 0;
};

struct TcOptions {
  double damping = 0.5;
  double min_damping = 1.0 / 64;
  double eps = 1e-6;
  double tol = 1e-9;        // successive-change norm
  int max_iter = 20000;
  double lam_tol = 1e-12;   // constraint residual of step (iii), scaled
  int restarts = 3;         // on ImCollapse, retry with halved damping
};

/// Default start from the free-e local-minima solution at the same (q, alpha):
/// its A and lam_c, g = g0 (1 + 0.1 i), lam_A = 1/(2 alpha A).
CriticalOuter default_critical_init(GaussianMesh& mesh, double alpha);

/// Initial point taken from a previous solution (continuation).
CriticalOuter critical_init_from(const ComplexitySolution& sol);

ComplexitySolution complexity_tc(GaussianMesh& mesh, std::optional<double> e, double alpha,
                                 std::optional<CriticalOuter> init = std::nullopt,
                                 const TcOptions& opts = {});

/// Tilt of nu_tot at a solution.
TcTilt tc_label_law(const ComplexitySolution& sol);

/// Fixed-point residuals of the four updates at a solution (undamped).
struct TcResiduals {
  double g = 0, A = 0, c = 0, e = 0, lam_A = 0;
  double max() const;
};
TcResiduals tc_residuals(GaussianMesh& mesh, const ComplexitySolution& sol);

struct BranchReport {
  std::vector<ComplexitySolution> branches;  // distinct fixed points
  std::vector<std::string> failures;         // starts that did not converge
  bool coexistence() const { return branches.size() > 1; }
};

/// Runs every start and keeps distinct fixed points (sigma or energy apart
/// by more than 1e-4).
BranchReport detect_branches(GaussianMesh& mesh, std::optional<double> e, double alpha,
                             const std::vector<CriticalOuter>& inits,
                             const TcOptions& opts = {});

/// alpha-continuation: each point starts from the previous fixed point.
/// Stops at the first failure; returns the solutions reached.
std::vector<ComplexitySolution> tc_continuation(GaussianMesh& mesh, std::optional<double> e,
                                                const std::vector<double>& alphas,
                                                std::optional<CriticalOuter> init = std::nullopt,
                                                const TcOptions& opts = {});

}  // namespace kacrice
