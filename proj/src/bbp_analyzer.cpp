#include "kacrice/bbp_analyzer.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include "kacrice/bisect.hpp"
#include "kacrice/simd/kernels.hpp"

namespace kacrice {
namespace {

// E[(y*-qy)^2 f/(1-q^2) / (alpha + s f)] * alpha
double signal_term(const WeightLaw& nu, double alpha, double s) {
  const simd::ResolventSums r = simd::active().resolvent_sums(
      nu.F.data(), nu.w.data(), nu.vF.data(), nu.size(), alpha, {s, 0.0});
  return alpha * r.m3.real();
}

void require_labels(const WeightLaw& nu) {
  if (nu.vF.size() != nu.F.size()) {
    throw std::invalid_argument("BBP analysis needs the label-side weights of the law");
  }
}

}  // namespace

BBPResult edge_functionals(const WeightLaw& nu, double alpha, double q) {
  require_labels(nu);
  const EdgeResult edge = left_edge(nu, alpha);
  BBPResult r;
  r.alpha = alpha;
  r.q = q;
  r.g_min = edge.g_min;
  r.x_min = edge.x_min;
  r.x2 = signal_term(nu, alpha, edge.g_min);
  r.d_alpha = r.x_min - r.x2;
  r.t_nu = nu.t_nu;
  return r;
}

std::optional<double> outlier_location(const WeightLaw& nu, double alpha, double q,
                                       BBPResult* filled) {
  BBPResult r = edge_functionals(nu, alpha, q);
  if (filled) *filled = r;
  if (r.d_alpha < 0) return std::nullopt;
  // D(s) = g^{-1}(s) - x2(s) on (0, g_min): D(0+) = -inf, D(g_min) = d_alpha.
  // g^{-1} is increasing there, so the smallest root gives the lowest outlier.
  auto D = [&](double s) { return inverse_stieltjes(nu, alpha, s) - signal_term(nu, alpha, s); };
  constexpr int kScan = 400;
  double lo = 0.0, hi = r.g_min;
  double prev_s = r.g_min * 1e-12;
  double prev = D(prev_s);
  bool found = false;
  for (int k = 1; k <= kScan; ++k) {
    const double s = r.g_min * k / kScan;
    const double v = (k == kScan) ? r.d_alpha : D(s);
    if (prev < 0 && v >= 0) {
      lo = prev_s;
      hi = s;
      found = true;
      break;
    }
    prev = v;
    prev_s = s;
  }
  if (!found) {
    if (r.d_alpha == 0) {
      r.x_star = r.x_min;
      if (filled) *filled = r;
      return r.x_min;
    }
    throw NoSolutionBelowEdge("outlier_location: outlier equation not bracketed below the edge");
  }
  double flo = D(lo);
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = D(mid);
    if ((fm < 0) == (flo < 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  const double s = 0.5 * (lo + hi);
  const double x = inverse_stieltjes(nu, alpha, s);
  r.x_star = x;
  if (filled) *filled = r;
  return x;
}

double bbp_threshold(const std::function<double(double)>& d_of_alpha, double lo, double hi,
                     double tol) {
  return bisect_sign_change<NoSignChange>(d_of_alpha, lo, hi, tol);
}

void write_bbp_csv_header(std::ostream& os) {
  os << "alpha,q,e_tag,g_min,x_min,x2,d_alpha,x_star,w_star\n";
}

void write_bbp_csv_row(std::ostream& os, const BBPResult& r) {
  const auto old = os.precision(17);
  os << r.alpha << ',' << r.q << ',' << r.tag << ',' << r.g_min << ',' << r.x_min << ','
     << r.x2 << ',' << r.d_alpha << ',';
  if (r.x_star) {
    os << *r.x_star << ',' << *r.w_star();
  } else {
    os << "nan,nan";
  }
  os << '\n';
  os.precision(old);
}

}  // namespace kacrice
