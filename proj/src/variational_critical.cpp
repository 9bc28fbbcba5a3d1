#include "kacrice/variational_critical.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <Eigen/Dense>
#include <limits>

#include "kacrice/mp_spectrum.hpp"

namespace kacrice {
namespace {

using cd = std::complex<double>;

TcTilt make_tc_tilt(const CriticalOuter& x, double alpha) {
  TcTilt t;
  t.lam_c = x.lam_c;
  t.lam_A = x.lam_A;
  t.lam_e = x.lam_e;
  t.g_r = x.g.real();
  t.g_i = x.g.imag();
  t.alpha = alpha;
  return t;
}

double sd(double var) { return std::sqrt(std::max(var, 1e-300)); }

// Step (iii): minimize the convex log Z(lam_c, lam_e) + lam_e e by Newton
// (Hessian = covariance of (c, l) under nu_tot). lam_e stays 0 for free e.
TcMomentBundle solve_lambdas(GaussianMesh& mesh, CriticalOuter& x, std::optional<double> e,
                             double alpha, const TcOptions& opts) {
  const int n = e ? 2 : 1;
  const double ev = e.value_or(0.0);
  if (!e) x.lam_e = 0.0;
  TcMomentBundle mb = mesh.tc_moments(make_tc_tilt(x, alpha));
  auto phi = [&](const TcMomentBundle& m, const CriticalOuter& xx) {
    return m.log_z + (e ? xx.lam_e * ev : 0.0);
  };
  auto scaled_res = [&](const TcMomentBundle& m) {
    double r = std::abs(m.c) / sd(m.cov[1][1]);
    if (e) r = std::max(r, std::abs(ev - m.ell) / sd(m.cov[2][2]));
    return r;
  };
  for (int it = 0; it < 100; ++it) {
    const double res = scaled_res(mb);
    if (res < opts.lam_tol) return mb;
    Eigen::Vector2d grad(-mb.c, ev - mb.ell);
    Eigen::Matrix2d H;
    H << mb.cov[1][1], mb.cov[1][2], mb.cov[1][2], mb.cov[2][2];
    Eigen::Vector2d d = Eigen::Vector2d::Zero();
    if (n == 1) {
      d[0] = -grad[0] / std::max(H(0, 0), 1e-300);
    } else {
      Eigen::LDLT<Eigen::Matrix2d> ldlt(H);
      d = -ldlt.solve(grad);
      if (!d.allFinite() || grad.dot(d) >= 0) d = -grad.cwiseQuotient(H.diagonal());
    }
    const double f0 = phi(mb, x);
    double tau = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls, tau *= 0.5) {
      CriticalOuter xn = x;
      xn.lam_c += tau * d[0];
      if (e) xn.lam_e += tau * d[1];
      TcMomentBundle mn;
      try {
        mn = mesh.tc_moments(make_tc_tilt(xn, alpha));
      } catch (const NonIntegrable&) {
        continue;
      }
      const double f1 = phi(mn, xn);
      const double noise = 1e-14 * (1.0 + std::abs(f0));
      if (f1 <= f0 + 1e-4 * tau * grad.dot(d) + noise ||
          (f1 <= f0 + noise && scaled_res(mn) < res)) {
        x = xn;
        mb = mn;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  // A Newton stall at quadrature noise level is accepted; anything larger
  // means the constraints cannot be met.
  if (scaled_res(mb) > 1e3 * opts.lam_tol) {
    std::ostringstream msg;
    msg << "complexity_tc: constraint solve stalled (scaled residual " << scaled_res(mb) << ")";
    throw InnerDiverged(msg.str());
  }
  return mb;
}

double tc_sigma(const CriticalOuter& x, const TcMomentBundle& mb, std::optional<double> e,
                double alpha, double q, double eps) {
  return complexity_prefactor(alpha, q) - 0.5 * std::log(x.A) - std::log(std::abs(x.g)) +
         eps * x.g.imag() + alpha * (x.lam_A * x.A + (e ? x.lam_e * *e : 0.0)) +
         alpha * mb.log_z;
}

ComplexitySolution run_tc(GaussianMesh& mesh, std::optional<double> e, double alpha,
                          CriticalOuter x, double damping, const TcOptions& opts) {
  if (!(x.A > 0)) throw std::invalid_argument("complexity_tc: A must be positive");
  if (!(x.g.imag() > 0)) throw ImCollapse("complexity_tc: initial Im g must be positive");
  x.lam_A = 1.0 / (2.0 * alpha * x.A);
  TcMomentBundle mb = solve_lambdas(mesh, x, e, alpha, opts);
  std::vector<double> traj;
  double gamma = damping;
  cd prev_step(0.0, 0.0);
  int flips = 0;
  int it = 0;
  bool converged = false;
  for (; it < opts.max_iter; ++it) {
    const cd g_new = -1.0 / (cd(mb.t, opts.eps) - alpha * mb.r);
    const double A_new = mb.A;
    // undamped residual of the (g, A) updates
    const double res = std::max(std::abs(g_new - x.g) / std::max(1.0, std::abs(x.g)),
                                std::abs(A_new - x.A) / std::max(1.0, x.A));
    traj.push_back(res);
    if (res < opts.tol) {
      converged = true;
      break;
    }
    // relax harder when the g update keeps reversing direction
    const cd step = g_new - x.g;
    flips = (step * std::conj(prev_step)).real() < 0 ? flips + 1 : 0;
    prev_step = step;
    if (flips >= 4 && gamma > opts.min_damping) {
      gamma *= 0.5;
      flips = 0;
    }
    x.g = (1.0 - gamma) * x.g + gamma * g_new;
    x.A = (1.0 - gamma) * x.A + gamma * A_new;
    if (!(x.g.imag() > 0) || !std::isfinite(x.g.real()) || !(x.A > 0)) {
      std::ostringstream msg;
      msg << "complexity_tc: Im g collapsed at iteration " << it << " (g = " << x.g << ")";
      throw ImCollapse(msg.str());
    }
    x.lam_A = 1.0 / (2.0 * alpha * x.A);
    try {
      mb = solve_lambdas(mesh, x, e, alpha, opts);
    } catch (const NonIntegrable& ex) {
      throw ImCollapse(std::string("complexity_tc: tilt left the integrable region: ") +
                       ex.what());
    }
  }
  if (!converged) {
    std::ostringstream msg;
    msg << "complexity_tc: no fixed point after " << it << " iterations (last change "
        << (traj.empty() ? 0.0 : traj.back()) << ")";
    throw NoFixedPoint(msg.str(), std::move(traj));
  }
  ComplexitySolution s;
  s.sigma = tc_sigma(x, mb, e, alpha, mesh.q(), opts.eps);
  s.outer = {x.A, x.g.real()};
  s.g_i = x.g.imag();
  s.eps = opts.eps;
  s.lam.lam_A = x.lam_A;
  s.lam.lam_c = x.lam_c;
  s.lam.lam_e = x.lam_e;
  s.mode = Mode::kTC;
  s.q = mesh.q();
  s.e = e;
  s.alpha = alpha;
  s.loss_name = mesh.loss().name();
  if (auto* pr = dynamic_cast<const PhaseRetrievalLoss*>(&mesh.loss())) s.loss_a = pr->a();
  s.energy = mb.ell;
  s.t_nu = mb.t;
  s.restricted = false;
  s.converged = true;
  s.outer_iterations = it;
  s.res.G_c = -mb.c;
  s.res.G_e = e ? *e - mb.ell : 0.0;
  s.res.G_A = x.A - mb.A;
  return s;
}

}  // namespace

CriticalOuter default_critical_init(GaussianMesh& mesh, double alpha) {
  // The local-minima solution is a fixed point candidate with Im g -> 0; a
  // finite imaginary part lets the iteration pick its own branch.
  const ComplexitySolution m = complexity(mesh, std::nullopt, alpha, Mode::kTilde0);
  CriticalOuter x;
  x.A = m.outer.A;
  x.g = cd(m.outer.g, 0.1 * m.outer.g);
  x.lam_A = 1.0 / (2.0 * alpha * x.A);
  x.lam_c = m.lam.lam_c;
  return x;
}

CriticalOuter critical_init_from(const ComplexitySolution& sol) {
  if (sol.mode != Mode::kTC) throw std::invalid_argument("critical_init_from: not a kTC solution");
  CriticalOuter x;
  x.A = sol.outer.A;
  x.g = cd(sol.outer.g, sol.g_i);
  x.lam_A = sol.lam.lam_A;
  x.lam_c = sol.lam.lam_c;
  x.lam_e = sol.lam.lam_e;
  return x;
}

ComplexitySolution complexity_tc(GaussianMesh& mesh, std::optional<double> e, double alpha,
                                 std::optional<CriticalOuter> init, const TcOptions& opts) {
  if (!(alpha > 1)) throw std::invalid_argument("complexity_tc: alpha must exceed 1");
  if (!(opts.eps > 0)) throw std::invalid_argument("complexity_tc: eps must be positive");
  const CriticalOuter x0 = init ? *init : default_critical_init(mesh, alpha);
  double gamma = opts.damping;
  for (int attempt = 0;; ++attempt) {
    try {
      return run_tc(mesh, e, alpha, x0, gamma, opts);
    } catch (const ImCollapse&) {
      if (attempt >= opts.restarts) throw;
      gamma *= 0.5;
    }
  }
}

TcTilt tc_label_law(const ComplexitySolution& sol) {
  if (!sol.converged) throw NotConverged("tc_label_law: solution did not converge");
  return make_tc_tilt(critical_init_from(sol), sol.alpha);
}

double TcResiduals::max() const { return std::max({g, A, c, e, lam_A}); }

TcResiduals tc_residuals(GaussianMesh& mesh, const ComplexitySolution& sol) {
  const CriticalOuter x = critical_init_from(sol);
  const TcMomentBundle mb = mesh.tc_moments(make_tc_tilt(x, sol.alpha));
  TcResiduals r;
  const cd g_new = -1.0 / (cd(mb.t, sol.eps) - sol.alpha * mb.r);
  r.g = std::abs(g_new - x.g) / std::max(1.0, std::abs(x.g));
  r.A = std::abs(mb.A - x.A) / std::max(1.0, x.A);
  r.c = std::abs(mb.c) / sd(mb.cov[1][1]);
  r.e = sol.e ? std::abs(mb.ell - *sol.e) / std::max(1.0, std::abs(*sol.e)) : 0.0;
  r.lam_A = std::abs(2.0 * sol.alpha * x.A * x.lam_A - 1.0);
  return r;
}

BranchReport detect_branches(GaussianMesh& mesh, std::optional<double> e, double alpha,
                             const std::vector<CriticalOuter>& inits, const TcOptions& opts) {
  BranchReport rep;
  for (const CriticalOuter& x : inits) {
    try {
      ComplexitySolution s = complexity_tc(mesh, e, alpha, x, opts);
      const bool seen = std::any_of(rep.branches.begin(), rep.branches.end(), [&](const auto& b) {
        return std::abs(b.sigma - s.sigma) <= 1e-4 && std::abs(b.energy - s.energy) <= 1e-4;
      });
      if (!seen) rep.branches.push_back(std::move(s));
    } catch (const std::exception& ex) {
      rep.failures.emplace_back(ex.what());
    }
  }
  return rep;
}

std::vector<ComplexitySolution> tc_continuation(GaussianMesh& mesh, std::optional<double> e,
                                                const std::vector<double>& alphas,
                                                std::optional<CriticalOuter> init,
                                                const TcOptions& opts) {
  std::vector<ComplexitySolution> out;
  for (double a : alphas) {
    std::optional<CriticalOuter> start = out.empty() ? init : critical_init_from(out.back());
    try {
      out.push_back(complexity_tc(mesh, e, a, start, opts));
    } catch (const std::exception&) {
      break;
    }
  }
  return out;
}

}  // namespace kacrice
