#include "kacrice/mp_spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <sstream>

#include "kacrice/simd/kernels.hpp"

namespace kacrice {
namespace {

using cd = std::complex<double>;

simd::ResolventSums sums(const WeightLaw& nu, double alpha, cd g) {
  return simd::active().resolvent_sums(nu.F.data(), nu.w.data(), nullptr, nu.size(), alpha, g);
}

struct NewtonOut {
  cd g;
  double res;
  bool ok;
};

NewtonOut newton(const WeightLaw& nu, double alpha, cd z, cd g, int max_iter) {
  auto eval = [&](cd gg, cd* deriv) {
    const simd::ResolventSums s = sums(nu, alpha, gg);
    const cd D = z - alpha * s.m1;
    if (deriv) *deriv = 1.0 - alpha * s.m2 / (D * D);
    return gg + 1.0 / D;
  };
  cd dG;
  cd G = eval(g, &dG);
  double res = std::abs(G);
  for (int it = 0; it < max_iter; ++it) {
    if (res < 1e-14 * std::max(1.0, std::abs(g))) return {g, res, g.imag() > 0};
    cd step = G / dG;
    if (!std::isfinite(step.real()) || !std::isfinite(step.imag())) break;
    bool moved = false;
    for (int half = 0; half < 40; ++half) {
      const cd gn = g - step;
      if (gn.imag() > 0) {
        cd dn;
        const cd Gn = eval(gn, &dn);
        const double rn = std::abs(Gn);
        if (std::isfinite(rn) && rn < res) {
          g = gn;
          G = Gn;
          dG = dn;
          res = rn;
          moved = true;
          break;
        }
      }
      step *= 0.5;
    }
    if (!moved) break;
  }
  return {g, res, g.imag() > 0 && res < 1e-11 * std::max(1.0, std::abs(g))};
}

}  // namespace

cd mp_residual(const WeightLaw& nu, double alpha, cd z, cd g) {
  const simd::ResolventSums s = sums(nu, alpha, g);
  return g + 1.0 / (z - alpha * s.m1);
}

cd stieltjes_at(cd z, const WeightLaw& nu, double alpha, cd init) {
  if (!(z.imag() > 0)) throw std::invalid_argument("stieltjes_at: Im z must be positive");
  if (nu.size() == 0) throw std::invalid_argument("stieltjes_at: empty weight law");
  if (init.imag() > 0) {
    const NewtonOut r = newton(nu, alpha, z, init, 60);
    if (r.ok) return r.g;
  }
  // Continuation in Im z from far above the real axis, where -1/z is an
  // excellent guess, down to the target.
  double eta = std::max({1.0, 4.0 * z.imag(), 0.25 * std::abs(z)});
  cd g = -1.0 / cd(z.real(), eta);
  NewtonOut r{g, 0, false};
  for (int k = 0; k < 200; ++k) {
    const cd zk(z.real(), eta);
    r = newton(nu, alpha, zk, g, 80);
    if (!r.ok) {
      // damped fixed point as a last resort at this level
      cd h = g;
      for (int it = 0; it < 5000; ++it) {
        const simd::ResolventSums s = sums(nu, alpha, h);
        h = 0.5 * h + 0.5 * (-1.0 / (zk - alpha * s.m1));
      }
      r = newton(nu, alpha, zk, h, 80);
      if (!r.ok) break;
    }
    g = r.g;
    if (eta == z.imag()) return g;
    eta = std::max(z.imag(), 0.3 * eta);
  }
  std::ostringstream msg;
  msg << "stieltjes_at: no root at z = " << z << " (last residual " << r.res << ")";
  throw NoConvergence(msg.str());
}

double inverse_stieltjes(const WeightLaw& nu, double alpha, double s) {
  const simd::ResolventSums r = sums(nu, alpha, cd(s, 0.0));
  return -1.0 / s + alpha * r.m1.real();
}

double edge_function(const WeightLaw& nu, double alpha, double s) {
  const simd::ResolventSums r = sums(nu, alpha, cd(s, 0.0));
  return alpha * s * s * r.m2.real();
}

EdgeResult left_edge(const WeightLaw& nu, double alpha) {
  if (nu.size() == 0) throw std::invalid_argument("left_edge: empty weight law");
  const double s_adm = nu.F_min < 0 ? alpha / -nu.F_min : std::numeric_limits<double>::infinity();
  auto h = [&](double s) { return edge_function(nu, alpha, s); };
  double lo = 0.0, hi;
  EdgeResult out;
  if (std::isfinite(s_adm)) {
    hi = s_adm;
    const double h_hi = h(s_adm * (1 - 1e-15));
    if (!(h_hi > 1.0) && std::isfinite(h_hi)) {
      out.g_min = s_adm;
      out.saturated = true;
      out.x_min = inverse_stieltjes(nu, alpha, s_adm * (1 - 1e-15));
      return out;
    }
  } else {
    hi = 1.0;
    while (!(h(hi) > 1.0)) {
      lo = hi;
      hi *= 2.0;
      if (hi > 1e15) {
        std::ostringstream msg;
        msg << "left_edge: alpha E[(sF/(alpha+sF))^2] stays below 1 on (0, " << hi
            << "], last value " << h(hi);
        throw EdgeNotFound(msg.str());
      }
    }
  }
  // h is increasing on the admissible interval; plain bisection is robust to
  // the blow-up at the admissibility bound.
  for (int it = 0; it < 200 && hi - lo > 1e-16 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double v = h(mid);
    if (v > 1.0 || !std::isfinite(v)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  out.g_min = 0.5 * (lo + hi);
  if (!(out.g_min > 0)) throw EdgeNotFound("left_edge: degenerate weight law");
  out.x_min = inverse_stieltjes(nu, alpha, out.g_min);
  return out;
}

SpectrumResult density_grid(const WeightLaw& nu, double alpha, double lo, double hi,
                            int n_points, double eps) {
  if (n_points < 2 || !(hi > lo)) throw std::invalid_argument("density_grid: bad grid");
  if (!(eps > 0)) throw std::invalid_argument("density_grid: eps must be positive");
  SpectrumResult out;
  out.eps = eps;
  out.w.resize(n_points);
  out.density.resize(n_points);
  cd g(0.0, 0.0);
  for (int i = 0; i < n_points; ++i) {
    const double x = lo + (hi - lo) * i / (n_points - 1);
    out.w[i] = x;
    try {
      g = stieltjes_at(cd(x, eps), nu, alpha, g);
      out.density[i] = std::max(0.0, g.imag() / M_PI);
    } catch (const NoConvergence&) {
      out.density[i] = 0.0;
      g = {0.0, 0.0};
      ++out.flagged;
    }
  }
  if (out.flagged * 100 > static_cast<std::size_t>(n_points)) {
    throw NoConvergence("density_grid: more than 1% of grid points failed");
  }
  for (int i = 1; i < n_points; ++i) {
    out.mass += 0.5 * (out.density[i] + out.density[i - 1]) * (out.w[i] - out.w[i - 1]);
  }
  try {
    const EdgeResult e = left_edge(nu, alpha);
    out.x_min = e.x_min;
    out.g_min = e.g_min;
  } catch (const EdgeNotFound&) {
    out.x_min = out.g_min = std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

SpectrumResult hessian_density(const WeightLaw& nu, double alpha, double lo, double hi,
                               int n_points, double eps) {
  SpectrumResult out = density_grid(nu, alpha, lo + nu.t_nu, hi + nu.t_nu, n_points, eps);
  for (double& w : out.w) w -= nu.t_nu;
  out.x_min -= nu.t_nu;
  out.t_nu = nu.t_nu;
  return out;
}

std::vector<double> grid_cdf(const SpectrumResult& s) {
  std::vector<double> cdf(s.w.size(), 0.0);
  for (std::size_t i = 1; i < s.w.size(); ++i) {
    cdf[i] = cdf[i - 1] + 0.5 * (s.density[i] + s.density[i - 1]) * (s.w[i] - s.w[i - 1]);
  }
  const double total = cdf.empty() ? 0.0 : cdf.back();
  if (total > 0) {
    for (double& c : cdf) c /= total;
  }
  return cdf;
}

void write_density_csv(std::ostream& os, const SpectrumResult& s) {
  const auto old = os.precision(17);
  os << "w,rho\n";
  for (std::size_t i = 0; i < s.w.size(); ++i) os << s.w[i] << ',' << s.density[i] << '\n';
  os.precision(old);
}

}  // namespace kacrice
