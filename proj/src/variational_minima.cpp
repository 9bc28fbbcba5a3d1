#include "kacrice/variational_minima.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

#include "kacrice/mp_spectrum.hpp"

namespace kacrice {
namespace {

constexpr int kN = 6;  // lam_A, lam_c, lam_e, lam_t, lam_h, lam_star
using Vec = Eigen::Matrix<double, kN, 1>;
using Mat = Eigen::Matrix<double, kN, kN>;
constexpr double kInf = std::numeric_limits<double>::infinity();

Vec to_vec(const Multipliers& m) {
  Vec x;
  x << m.lam_A, m.lam_c, m.lam_e, m.lam_t, m.lam_h, m.lam_star;
  return x;
}

Multipliers to_mult(const Vec& x) {
  return {x[0], x[1], x[2], x[3], x[4], x[5]};
}

TiltExponent make_tilt(const Vec& x, double g, double alpha) {
  TiltExponent t;
  t.lam_A = x[0];
  t.lam_c = x[1];
  t.lam_e = x[2];
  t.lam_t = x[3];
  t.lam_h = x[4];
  t.lam_star = x[5];
  t.g = g;
  t.alpha = alpha;
  t.restrict_domain = true;
  return t;
}

bool is_restricted(const GaussianMesh& mesh, double g, double alpha) {
  return g * -mesh.loss().second_deriv_infimum() > alpha;
}

struct InnerEval {
  double J = kInf;
  Vec grad = Vec::Zero();
  Mat hess = Mat::Zero();
  MomentBundle mb;
  bool ok = false;
};

InnerEval eval_inner(GaussianMesh& mesh, const Vec& x, double A, double g, double e,
                     double alpha) {
  InnerEval out;
  try {
    out.mb = mesh.moments(make_tilt(x, g, alpha));
  } catch (const NonIntegrable&) {
    return out;
  } catch (const ToleranceNotMet&) {
    return out;
  }
  const MomentBundle& mb = out.mb;
  if (!std::isfinite(mb.log_z)) return out;
  out.J = alpha * (x[0] * A + x[2] * e) - x[3] / g + x[4] + alpha * mb.log_z;
  out.grad << alpha * (A - mb.A), -alpha * mb.c, alpha * (e - mb.ell),
      -1.0 / g - mb.t + alpha * mb.r, 1.0 - alpha * mb.s, mb.K;
  // dPhi/dLambda = D f with f = (A, c, l, -t/alpha + r, s, K)
  const double D[kN] = {-1, -1, -1, 1, -1, 1.0 / alpha};
  for (int i = 0; i < kN; ++i) {
    for (int j = 0; j < kN; ++j) out.hess(i, j) = alpha * D[i] * D[j] * mb.cov[i][j];
  }
  out.ok = std::isfinite(out.J) && out.grad.allFinite() && out.hess.allFinite();
  return out;
}

}  // namespace

const char* mode_name(Mode m) {
  switch (m) {
    case Mode::kTilde0: return "tilde0";
    case Mode::kFin: return "fin";
    case Mode::kTC: return "tc";
  }
  return "?";
}

Mode parse_mode(const std::string& s) {
  if (s == "tilde0" || s == "minima") return Mode::kTilde0;
  if (s == "fin") return Mode::kFin;
  if (s == "tc" || s == "critical") return Mode::kTC;
  throw std::invalid_argument("unknown mode '" + s + "'");
}

double complexity_prefactor(double alpha, double q) {
  return 0.5 * (-1.0 + (1.0 - 2.0 * alpha) * std::log(alpha)) + 0.5 * std::log1p(-q * q);
}

InnerResult inner_minimize(GaussianMesh& mesh, OuterPoint outer, std::optional<double> e,
                           double alpha, Mode mode, const Multipliers* warm,
                           const SolverOptions& opts) {
  if (mode == Mode::kTC) throw std::invalid_argument("inner_minimize: kTC has no inner problem");
  if (!(outer.A > 0) || !(outer.g > 0)) {
    throw std::invalid_argument("inner_minimize: A and g must be positive");
  }
  const double A = outer.A, g = outer.g;
  const double ev = e.value_or(0.0);
  const bool restricted = is_restricted(mesh, g, alpha);

  bool fixed[kN] = {false, false, !e.has_value(), false, false, mode == Mode::kFin};
  double lb[kN] = {0.0, -kInf, -kInf, restricted ? 0.0 : -kInf, 0.0, 0.0};
  const double scale[kN] = {alpha * A, 1.0, alpha * std::max(1.0, std::abs(ev)), 1.0, 1.0, 1.0};

  Vec x = warm ? to_vec(*warm) : Vec::Zero();
  if (!warm) x[0] = 1.0 / (2.0 * alpha * A);
  for (int i = 0; i < kN; ++i) {
    if (fixed[i]) x[i] = 0.0;
    x[i] = std::max(x[i], lb[i]);
  }
  if (restricted && x[3] == 0.0 && x[4] == 0.0) x[3] = 1e-3;

  InnerEval cur = eval_inner(mesh, x, A, g, ev, alpha);
  if (!cur.ok) {
    // fall back to the plain start; the warm start may be non-integrable here
    x = Vec::Zero();
    x[0] = 1.0 / (2.0 * alpha * A);
    if (restricted) x[3] = 1e-3;
    cur = eval_inner(mesh, x, A, g, ev, alpha);
    if (!cur.ok) throw InnerDiverged("inner_minimize: tilted integral not finite at start");
  }

  auto proj_grad_norm = [&](const InnerEval& ie, const Vec& xx) {
    double m = 0.0;
    for (int i = 0; i < kN; ++i) {
      if (fixed[i]) continue;
      double gi = ie.grad[i];
      if (xx[i] <= lb[i] && gi > 0) gi = 0.0;
      m = std::max(m, std::abs(gi) / scale[i]);
    }
    return m;
  };

  InnerResult res;
  int it = 0;
  for (; it < opts.inner_max_iter; ++it) {
    const double pg = proj_grad_norm(cur, x);
    if (pg < opts.inner_tol) {
      res.converged = true;
      break;
    }
    // free set: not fixed and not held at a bound by the gradient
    std::array<int, kN> fi{};
    int nf = 0;
    for (int i = 0; i < kN; ++i) {
      if (fixed[i]) continue;
      if (x[i] <= lb[i] && cur.grad[i] > 0) continue;
      fi[nf++] = i;
    }
    Vec d = Vec::Zero();
    if (nf > 0) {
      Eigen::MatrixXd H(nf, nf);
      Eigen::VectorXd gr(nf);
      for (int a = 0; a < nf; ++a) {
        gr[a] = cur.grad[fi[a]];
        for (int b = 0; b < nf; ++b) H(a, b) = cur.hess(fi[a], fi[b]);
      }
      // symmetric diagonal scaling keeps the factorization well conditioned
      Eigen::VectorXd sd(nf);
      for (int a = 0; a < nf; ++a) sd[a] = 1.0 / std::sqrt(std::max(H(a, a), 1e-300));
      Eigen::MatrixXd Hs = sd.asDiagonal() * H * sd.asDiagonal();
      Eigen::VectorXd step;
      double mu = 0.0;
      for (int tries = 0; tries < 20; ++tries) {
        Eigen::LDLT<Eigen::MatrixXd> ldlt(Hs + mu * Eigen::MatrixXd::Identity(nf, nf));
        if (ldlt.info() == Eigen::Success && ldlt.isPositive() &&
            (ldlt.vectorD().array() > 1e-14).all()) {
          step = -(sd.asDiagonal() * ldlt.solve(sd.asDiagonal() * gr));
          if (step.allFinite()) break;
        }
        mu = mu == 0.0 ? 1e-10 : mu * 10.0;
        step.resize(0);
      }
      if (step.size() == 0) break;
      for (int a = 0; a < nf; ++a) d[fi[a]] = step[a];
    }
    // projected backtracking line search
    double tau = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 40; ++ls, tau *= 0.5) {
      Vec xn = x + tau * d;
      for (int i = 0; i < kN; ++i) xn[i] = fixed[i] ? 0.0 : std::max(xn[i], lb[i]);
      InnerEval trial = eval_inner(mesh, xn, A, g, ev, alpha);
      if (!trial.ok) continue;
      const double slope = cur.grad.dot(xn - x);
      const double noise = 1e-13 * (1.0 + std::abs(cur.J));
      if (trial.J <= cur.J + 1e-4 * slope + noise ||
          (trial.J <= cur.J + noise && proj_grad_norm(trial, xn) < proj_grad_norm(cur, x))) {
        x = xn;
        cur = std::move(trial);
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    if (x.cwiseAbs().maxCoeff() > 1e12) {
      throw InnerDiverged("inner_minimize: multipliers diverge (objective unbounded below)");
    }
  }
  if (!res.converged && proj_grad_norm(cur, x) < opts.inner_tol) res.converged = true;

  res.lam = to_mult(x);
  res.value = cur.J;
  res.moments = cur.mb;
  res.iterations = it;
  res.res.G_A = cur.grad[0];
  res.res.G_c = cur.grad[1];
  res.res.G_e = e ? cur.grad[2] : 0.0;
  res.res.G_t = cur.grad[3];
  res.res.G_h = cur.grad[4];
  res.res.G_star = cur.grad[5];
  const MomentBundle& mb = cur.mb;
  res.res.L_A = -1.0 / (2.0 * A) + alpha * x[0];
  res.res.L_g = -1.0 / g + x[3] / (g * g) - mb.t + alpha * mb.r - alpha * x[3] * mb.r2 -
                2.0 * alpha * alpha * g * x[4] * mb.r3;
  return res;
}

OuterPoint default_outer_init(GaussianMesh& mesh, double alpha) {
  const double q = mesh.q();
  const LossModel& loss = mesh.loss();
  const double EA = mesh.expect(std::nullopt, [&](double y, double ys) {
    return loss.derived({y, ys}, q).A;
  });
  const WeightLaw base = mesh.base_weight_law();
  const EdgeResult edge = left_edge(base, alpha);
  return {EA, 0.9 * edge.g_min};
}

namespace {

struct OuterEval {
  double sigma = -kInf;
  Eigen::Vector2d grad = Eigen::Vector2d::Zero();  // in (log A, log g)
  InnerResult inner;
  bool ok = false;
};

OuterEval eval_outer(GaussianMesh& mesh, const Eigen::Vector2d& x, std::optional<double> e,
                     double alpha, Mode mode, const Multipliers* warm,
                     const SolverOptions& opts) {
  OuterEval out;
  const OuterPoint op{std::exp(x[0]), std::exp(x[1])};
  try {
    out.inner = inner_minimize(mesh, op, e, alpha, mode, warm, opts);
  } catch (const InnerDiverged&) {
    return out;
  } catch (const NonIntegrable&) {
    return out;
  }
  out.sigma = complexity_prefactor(alpha, mesh.q()) - 0.5 * x[0] - x[1] + out.inner.value;
  out.grad << op.A * out.inner.res.L_A, op.g * out.inner.res.L_g;
  out.ok = std::isfinite(out.sigma) && out.grad.allFinite();
  return out;
}

ComplexitySolution assemble(GaussianMesh& mesh, const Eigen::Vector2d& x, const OuterEval& ev,
                            std::optional<double> e, double alpha, Mode mode) {
  ComplexitySolution s;
  s.sigma = ev.sigma;
  s.outer = {std::exp(x[0]), std::exp(x[1])};
  s.lam = ev.inner.lam;
  s.mode = mode;
  s.q = mesh.q();
  s.e = e;
  s.alpha = alpha;
  s.loss_name = mesh.loss().name();
  if (auto* pr = dynamic_cast<const PhaseRetrievalLoss*>(&mesh.loss())) s.loss_a = pr->a();
  s.res = ev.inner.res;
  s.energy = ev.inner.moments.ell;
  s.t_nu = ev.inner.moments.t;
  s.restricted = is_restricted(mesh, s.outer.g, alpha);
  return s;
}

Eigen::Matrix2d fd_neg_hessian(GaussianMesh& mesh, const Eigen::Vector2d& x,
                               const OuterEval& base, std::optional<double> e, double alpha,
                               Mode mode, const SolverOptions& opts, bool* ok) {
  Eigen::Matrix2d Hn;
  const double h = 1e-4;
  *ok = true;
  for (int j = 0; j < 2; ++j) {
    Eigen::Vector2d xp = x;
    xp[j] += h;
    OuterEval ep = eval_outer(mesh, xp, e, alpha, mode, &base.inner.lam, opts);
    if (!ep.ok) {
      xp[j] = x[j] - h;
      ep = eval_outer(mesh, xp, e, alpha, mode, &base.inner.lam, opts);
      if (!ep.ok) {
        *ok = false;
        return Eigen::Matrix2d::Identity();
      }
      Hn.col(j) = (base.grad - ep.grad) / h;
    } else {
      Hn.col(j) = (base.grad - ep.grad) / h;
    }
  }
  Hn = 0.5 * (Hn + Hn.transpose()).eval();
  return Hn;
}

Eigen::Matrix2d safe_inverse(const Eigen::Matrix2d& negH) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(negH);
  Eigen::Vector2d ev = es.eigenvalues();
  const double floor = std::max(1e-3, 1e-6 * ev.cwiseAbs().maxCoeff());
  for (int i = 0; i < 2; ++i) ev[i] = std::max(std::abs(ev[i]), floor);
  return es.eigenvectors() * ev.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
}

ComplexitySolution run_outer(GaussianMesh& mesh, Eigen::Vector2d x, const Multipliers* warm,
                             const double* warm_hess, std::optional<double> e, double alpha,
                             Mode mode, const SolverOptions& opts) {
  OuterEval cur = eval_outer(mesh, x, e, alpha, mode, warm, opts);
  if (!cur.ok) {
    std::ostringstream msg;
    msg << "complexity: inner problem infeasible at the initial point (A=" << std::exp(x[0])
        << ", g=" << std::exp(x[1]) << ")";
    throw InnerDiverged(msg.str());
  }
  Eigen::Matrix2d Hinv;
  bool have_h = false;
  if (warm_hess && (warm_hess[0] > 0 && warm_hess[2] > 0)) {
    Hinv << warm_hess[0], warm_hess[1], warm_hess[1], warm_hess[2];
    have_h = true;
  }
  auto reset_hessian = [&]() {
    bool ok = false;
    const Eigen::Matrix2d negH = fd_neg_hessian(mesh, x, cur, e, alpha, mode, opts, &ok);
    Hinv = ok ? safe_inverse(negH) : Eigen::Matrix2d::Identity() * 0.1;
  };
  if (!have_h) reset_hessian();

  int inner_total = cur.inner.iterations;
  int it = 0;
  bool converged = false;
  int resets = 0;
  for (; it < opts.outer_max_iter; ++it) {
    if (std::abs(cur.inner.res.L_A) < opts.outer_tol &&
        std::abs(cur.inner.res.L_g) < opts.outer_tol && cur.inner.converged) {
      converged = true;
      break;
    }
    Eigen::Vector2d d = Hinv * cur.grad;
    if (cur.grad.dot(d) <= 0) {
      Hinv = Eigen::Matrix2d::Identity() * 0.1;
      d = Hinv * cur.grad;
    }
    const double dn = d.cwiseAbs().maxCoeff();
    if (dn > opts.max_log_step) d *= opts.max_log_step / dn;
    double tau = 1.0;
    bool accepted = false;
    OuterEval trial;
    Eigen::Vector2d xn;
    for (int ls = 0; ls < 30; ++ls, tau *= 0.5) {
      xn = x + tau * d;
      trial = eval_outer(mesh, xn, e, alpha, mode, &cur.inner.lam, opts);
      if (!trial.ok) continue;
      inner_total += trial.inner.iterations;
      const double noise = 1e-12 * (1.0 + std::abs(cur.sigma));
      if (trial.sigma >= cur.sigma + 1e-4 * tau * cur.grad.dot(d) - noise ||
          (trial.sigma >= cur.sigma - noise && trial.grad.norm() < cur.grad.norm())) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      if (resets++ < 3) {
        reset_hessian();
        continue;
      }
      break;
    }
    const Eigen::Vector2d s = xn - x;
    const Eigen::Vector2d y = -(trial.grad - cur.grad);
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      const Eigen::Matrix2d I = Eigen::Matrix2d::Identity();
      Hinv = (I - rho * s * y.transpose()) * Hinv * (I - rho * y * s.transpose()) +
             rho * s * s.transpose();
    }
    x = xn;
    cur = std::move(trial);
  }
  ComplexitySolution sol = assemble(mesh, x, cur, e, alpha, mode);
  sol.converged = converged;
  sol.outer_iterations = it;
  sol.inner_iterations = inner_total;
  sol.outer_hess[0] = Hinv(0, 0);
  sol.outer_hess[1] = Hinv(0, 1);
  sol.outer_hess[2] = Hinv(1, 1);
  return sol;
}

}  // namespace

ComplexitySolution complexity_from(GaussianMesh& mesh, std::optional<double> e, double alpha,
                                   Mode mode, OuterPoint init, const SolverOptions& opts) {
  if (!(alpha > 1)) throw std::invalid_argument("complexity: alpha must exceed 1");
  if (mode == Mode::kTC) throw std::invalid_argument("complexity: use complexity_tc for kTC");
  if (!(init.A > 0) || !(init.g > 0)) throw std::invalid_argument("complexity: bad init");
  return run_outer(mesh, Eigen::Vector2d(std::log(init.A), std::log(init.g)), nullptr, nullptr,
                   e, alpha, mode, opts);
}

ComplexitySolution complexity(GaussianMesh& mesh, std::optional<double> e, double alpha,
                              Mode mode, const ComplexitySolution* warm,
                              const SolverOptions& opts) {
  if (!(alpha > 1)) throw std::invalid_argument("complexity: alpha must exceed 1");
  if (mode == Mode::kTC) throw std::invalid_argument("complexity: use complexity_tc for kTC");
  if (!warm) return complexity_from(mesh, e, alpha, mode, default_outer_init(mesh, alpha), opts);
  Multipliers lam = warm->lam;
  if (!e) lam.lam_e = 0.0;
  if (mode == Mode::kFin) lam.lam_star = 0.0;
  const bool same_problem = warm->alpha == alpha && warm->mode == mode;
  return run_outer(mesh, Eigen::Vector2d(std::log(warm->outer.A), std::log(warm->outer.g)), &lam,
                   same_problem ? warm->outer_hess : nullptr, e, alpha, mode, opts);
}

MultiStartReport complexity_multistart(GaussianMesh& mesh, std::optional<double> e,
                                       double alpha, Mode mode,
                                       const std::vector<OuterPoint>& scales, double distinct,
                                       const SolverOptions& opts) {
  const OuterPoint base = default_outer_init(mesh, alpha);
  std::vector<OuterPoint> starts{base};
  for (const OuterPoint& s : scales) starts.push_back({base.A * s.A, base.g * s.g});
  MultiStartReport rep;
  for (const OuterPoint& p : starts) {
    try {
      ComplexitySolution sol = complexity_from(mesh, e, alpha, mode, p, opts);
      if (!sol.converged) {
        rep.failures.push_back("start A=" + std::to_string(p.A) + " g=" + std::to_string(p.g) +
                               ": not converged");
        continue;
      }
      const bool seen = std::any_of(rep.maxima.begin(), rep.maxima.end(), [&](const auto& m) {
        return std::abs(std::log(m.outer.A / sol.outer.A)) <= distinct &&
               std::abs(std::log(m.outer.g / sol.outer.g)) <= distinct;
      });
      if (!seen) rep.maxima.push_back(std::move(sol));
    } catch (const std::exception& ex) {
      rep.failures.push_back("start A=" + std::to_string(p.A) + " g=" + std::to_string(p.g) +
                             ": " + ex.what());
    }
  }
  std::sort(rep.maxima.begin(), rep.maxima.end(),
            [](const auto& x, const auto& y) { return x.sigma > y.sigma; });
  return rep;
}

double band_edge(GaussianMesh& mesh, const ComplexitySolution& at_star, double dir,
                 ComplexitySolution* at, double e_tol, const SolverOptions& opts) {
  if (at_star.e) throw std::invalid_argument("band_edge: needs a free-e solution");
  if (!(at_star.sigma > 0)) throw EmptyBand("band_edge: Sigma(e_star) <= 0");
  const double alpha = at_star.alpha;
  const Mode mode = at_star.mode;
  const double e_star = at_star.energy;
  const double sigma_star = at_star.sigma;
  // Sigma(e) is maximal at e_star with dSigma/de = alpha lam_e. A probe next
  // to e_star gives the curvature, hence a quadratic guess for the edge;
  // then safeguarded Newton on Sigma(e) inside a bracket.
  const double escale = std::max(1e-3, std::abs(e_star));
  auto solve_at = [&](double e, const ComplexitySolution& from, ComplexitySolution* s) {
    try {
      *s = complexity(mesh, e, alpha, mode, &from, opts);
      return std::isfinite(s->sigma) && s->converged;
    } catch (const std::exception&) {
      return false;
    }
  };
  double good = e_star;
  double bad = std::numeric_limits<double>::quiet_NaN();
  ComplexitySolution last = at_star;
  const double d0 = 1e-3 * escale;
  double e = e_star + dir * d0;
  ComplexitySolution s;
  double next = e_star + dir * 0.1 * escale;
  if (solve_at(e, last, &s)) {
    const double kappa = alpha * s.lam.lam_e / (dir * d0);
    if (s.sigma > 0) {
      good = e;
      last = s;
      if (kappa < 0) next = e_star + dir * std::sqrt(2.0 * sigma_star / -kappa);
    } else {
      bad = e;
      next = 0.5 * (good + bad);
    }
  }
  e = next;
  for (int it = 0; it < 80; ++it) {
    if (dir < 0 && e <= 0) e = 0.5 * good;
    const bool ok = solve_at(e, last, &s);
    if (!ok) {
      bad = e;  // infeasible: treat as beyond the edge
    } else if (s.sigma > 0) {
      good = e;
      last = s;
    } else {
      bad = e;
    }
    const bool bracketed = !std::isnan(bad);
    if (bracketed && std::abs(bad - good) < e_tol) break;
    if (!ok) {
      e = 0.5 * (good + bad);
      continue;
    }
    if (std::abs(s.sigma) < 1e-12) {
      *at = s;
      return e;
    }
    const double slope = alpha * s.lam.lam_e;
    double trial = std::abs(slope) > 0 ? e - s.sigma / slope : e;
    if (bracketed) {
      const double lo = std::min(good, bad), hi = std::max(good, bad);
      // Newton inside the bracket, never closer than 1% of it to an end
      const double pad = 0.01 * (hi - lo);
      if (!(trial > lo + pad && trial < hi - pad)) trial = 0.5 * (good + bad);
    } else if (!(dir * (trial - e) > 0) || !std::isfinite(trial)) {
      trial = e + dir * 0.5 * std::abs(e - e_star);
    }
    e = trial;
  }
  if (std::isnan(bad)) throw EmptyBand("band_edge: could not bracket the band edge");
  const double edge_e = 0.5 * (good + bad);
  if (!solve_at(edge_e, last, at)) *at = last;
  return edge_e;
}

EnergyBand energy_band(GaussianMesh& mesh, double alpha, Mode mode,
                       const ComplexitySolution* warm, double e_tol,
                       const SolverOptions& opts) {
  EnergyBand band;
  band.at_star = complexity(mesh, std::nullopt, alpha, mode, warm, opts);
  band.e_star = band.at_star.energy;
  band.sigma_at_star = band.at_star.sigma;
  if (!(band.at_star.sigma > 0)) {
    band.empty = true;
    band.e_min = band.e_max = band.e_star;
    return band;
  }
  band.e_max = band_edge(mesh, band.at_star, +1.0, &band.at_max, e_tol, opts);
  band.e_min = band_edge(mesh, band.at_star, -1.0, &band.at_min, e_tol, opts);
  band.empty = false;
  return band;
}

TiltExponent label_law(const ComplexitySolution& sol) {
  if (!sol.converged) throw NotConverged("label_law: solution did not converge");
  Vec x = to_vec(sol.lam);
  return make_tilt(x, sol.outer.g, sol.alpha);
}

}  // namespace kacrice
