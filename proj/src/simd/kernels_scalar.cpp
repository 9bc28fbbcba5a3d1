// Scalar reference kernels. The AVX2 versions must agree with these up to
// floating-point reassociation.

#include <cmath>
#include <limits>

#include "kacrice/simd/kernels.hpp"

namespace kacrice::simd {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double tilt_logw_scalar(const MeshPoints& m, std::size_t cb, std::size_t ce,
                        const TiltParams& p, double* logw) {
  double best = kNegInf;
  const double tcoef = (p.g + p.lam_t) / p.alpha;
  const double kcoef = p.lam_star / p.alpha;
  for (std::size_t i = cb * kCellStride; i < ce * kCellStride; ++i) {
    const double F = m.F[i];
    const double den = p.alpha + p.g * F;
    if (m.wK[i] == 0.0 || (p.restrict_domain && !(den > 0.0))) {
      logw[i] = kNegInf;
      continue;
    }
    const double r = F / den;
    const double gr = p.g * r;
    const double v = m.logmu[i] - p.lam_c * m.c[i] - p.lam_A * m.A[i] -
                     p.lam_e * m.ell[i] + std::log(std::abs(den)) -
                     tcoef * m.t[i] + p.lam_t * r - p.lam_h * gr * gr +
                     kcoef * m.K[i];
    logw[i] = v;
    if (v > best) best = v;
  }
  return best;
}

void tilt_accumulate_scalar(const MeshPoints& m, std::size_t cb, std::size_t ce,
                            const double* logw, double shift,
                            const TiltParams& p, double* cell_out,
                            TiltGlobal* global) {
  const double inv_alpha = 1.0 / p.alpha;
  for (std::size_t cell = cb; cell < ce; ++cell) {
    double k[kNumTiltMoments] = {};
    double g[kNumTiltMoments] = {};
    for (std::size_t j = 0; j < kCellStride; ++j) {
      const std::size_t i = cell * kCellStride + j;
      if (logw[i] == kNegInf) continue;
      const double e = std::exp(logw[i] - shift);
      const double F = m.F[i];
      double den = p.alpha + p.g * F;
      const double inv = 1.0 / den;
      const double r = F * inv;
      const double gr = p.g * r;
      const double s = gr * gr;
      const double r2 = r * r;
      const double r3 = r2 * inv;
      const double f[kNumTiltMoments] = {1.0,    m.A[i], m.c[i], m.ell[i], m.t[i],
                                         m.K[i], r,      s,      r2,       r3};
      const double pk = m.wK[i] * e;
      const double pg = m.wG[i] * e;
      for (int q = 0; q < kNumTiltMoments; ++q) {
        k[q] += pk * f[q];
        g[q] += pg * f[q];
      }
      const double u[6] = {m.A[i], m.c[i], m.ell[i], -m.t[i] * inv_alpha + r, s,
                           m.K[i]};
      int idx = 0;
      for (int a = 0; a < 6; ++a) {
        const double pa = pk * u[a];
        for (int b = a; b < 6; ++b) global->second[idx++] += pa * u[b];
      }
      for (int q = 1; q < kNumTiltMoments; ++q) global->abs[q - 1] += pk * std::abs(f[q]);
    }
    double* out = cell_out + (cell - cb) * 2 * kNumTiltMoments;
    for (int q = 0; q < kNumTiltMoments; ++q) {
      out[q] = k[q];
      out[kNumTiltMoments + q] = g[q];
    }
  }
}

double tc_logw_scalar(const MeshPoints& m, std::size_t cb, std::size_t ce,
                      const TcParams& p, double* logw) {
  double best = kNegInf;
  const double tcoef = p.g_r / p.alpha;
  for (std::size_t i = cb * kCellStride; i < ce * kCellStride; ++i) {
    const double F = m.F[i];
    const double re = p.alpha + p.g_r * F;
    const double im = p.g_i * F;
    const double n2 = re * re + im * im;
    if (m.wK[i] == 0.0 || !(n2 >= std::numeric_limits<double>::min())) {
      logw[i] = kNegInf;
      continue;
    }
    const double v = m.logmu[i] - p.lam_c * m.c[i] - p.lam_A * m.A[i] -
                     p.lam_e * m.ell[i] + 0.5 * std::log(n2) -
                     tcoef * m.t[i];
    logw[i] = v;
    if (v > best) best = v;
  }
  return best;
}

void tc_accumulate_scalar(const MeshPoints& m, std::size_t cb, std::size_t ce,
                          const double* logw, double shift, const TcParams& p,
                          double* cell_out, TcGlobal* global) {
  for (std::size_t cell = cb; cell < ce; ++cell) {
    double k[kNumTcMoments] = {};
    double g[kNumTcMoments] = {};
    for (std::size_t j = 0; j < kCellStride; ++j) {
      const std::size_t i = cell * kCellStride + j;
      if (logw[i] == kNegInf) continue;
      const double e = std::exp(logw[i] - shift);
      const double F = m.F[i];
      const double re = p.alpha + p.g_r * F;
      const double im = p.g_i * F;
      const double inv_n2 = 1.0 / (re * re + im * im);
      const double rr = F * re * inv_n2;
      const double ri = -F * im * inv_n2;
      const double f[kNumTcMoments] = {1.0, m.A[i], m.c[i], m.ell[i], m.t[i], rr, ri};
      const double pk = m.wK[i] * e;
      const double pg = m.wG[i] * e;
      for (int q = 0; q < kNumTcMoments; ++q) {
        k[q] += pk * f[q];
        g[q] += pg * f[q];
      }
      const double A = m.A[i], c = m.c[i], l = m.ell[i];
      global->second[0] += pk * A * A;
      global->second[1] += pk * A * c;
      global->second[2] += pk * A * l;
      global->second[3] += pk * c * c;
      global->second[4] += pk * c * l;
      global->second[5] += pk * l * l;
      global->abs[0] += pk * std::abs(A);
      global->abs[1] += pk * std::abs(c);
      global->abs[2] += pk * std::abs(l);
      global->abs[3] += pk * std::abs(m.t[i]);
      global->abs[4] += pk * std::sqrt(rr * rr + ri * ri);
    }
    double* out = cell_out + (cell - cb) * 2 * kNumTcMoments;
    for (int q = 0; q < kNumTcMoments; ++q) {
      out[q] = k[q];
      out[kNumTcMoments + q] = g[q];
    }
  }
}

ResolventSums resolvent_sums_scalar(const double* F, const double* w,
                                    const double* v, std::size_t n,
                                    double alpha, std::complex<double> g) {
  double m1r = 0, m1i = 0, m2r = 0, m2i = 0, m3r = 0, m3i = 0, m4r = 0, m4i = 0;
  const double gr = g.real(), gi = g.imag();
  for (std::size_t i = 0; i < n; ++i) {
    const double f = F[i];
    const double re = alpha + gr * f;
    const double im = gi * f;
    const double inv_n2 = 1.0 / (re * re + im * im);
    // 1/(alpha+gF) = (re - i im)/|.|^2
    const double ir = re * inv_n2, ii = -im * inv_n2;
    const double ar = f * ir, ai = f * ii;  // F/(alpha+gF)
    const double br = ar * ar - ai * ai, bi = 2.0 * ar * ai;
    m1r += w[i] * ar;
    m1i += w[i] * ai;
    m2r += w[i] * br;
    m2i += w[i] * bi;
    if (v != nullptr) {
      const double wv = w[i] * v[i];
      m3r += wv * ir;
      m3i += wv * ii;
      // v F/(alpha+gF)^2 = v * (1/(.)) * (F/(.))
      m4r += wv * (ir * ar - ii * ai);
      m4i += wv * (ir * ai + ii * ar);
    }
  }
  return {{m1r, m1i}, {m2r, m2i}, {m3r, m3i}, {m4r, m4i}};
}

void matvec_scalar(const double* X, std::size_t n, std::size_t d, const double* x,
                   double* y) {
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = X + i * d;
    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j) acc += row[j] * x[j];
    y[i] = acc;
  }
}

void matvec_t_scalar(const double* X, std::size_t n, std::size_t d,
                     const double* v, double* out) {
  for (std::size_t j = 0; j < d; ++j) out[j] = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = X + i * d;
    const double vi = v[i];
    for (std::size_t j = 0; j < d; ++j) out[j] += vi * row[j];
  }
}

}  // namespace

namespace detail {
const Kernels kScalarKernels = {
    tilt_logw_scalar,     tilt_accumulate_scalar, tc_logw_scalar,
    tc_accumulate_scalar, resolvent_sums_scalar,  matvec_scalar,
    matvec_t_scalar,
};
}  // namespace detail

}  // namespace kacrice::simd
