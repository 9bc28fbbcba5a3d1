// AVX2+FMA kernels; built with -mavx2 -mfma and only called after a CPU check.

#include <immintrin.h>

#include <cmath>
#include <limits>

#include "kacrice/simd/kernels.hpp"
#include "vmath_avx2.hpp"

namespace kacrice::simd {
namespace {

using namespace avx2;

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double tilt_logw_avx2(const MeshPoints& m, std::size_t cb, std::size_t ce,
                      const TiltParams& p, double* logw) {
  const __m256d alpha = _mm256_set1_pd(p.alpha);
  const __m256d g = _mm256_set1_pd(p.g);
  const __m256d lc = _mm256_set1_pd(p.lam_c);
  const __m256d la = _mm256_set1_pd(p.lam_A);
  const __m256d le = _mm256_set1_pd(p.lam_e);
  const __m256d lt = _mm256_set1_pd(p.lam_t);
  const __m256d lh = _mm256_set1_pd(p.lam_h);
  const __m256d tcoef = _mm256_set1_pd((p.g + p.lam_t) / p.alpha);
  const __m256d kcoef = _mm256_set1_pd(p.lam_star / p.alpha);
  const __m256d zero = _mm256_setzero_pd();
  const __m256d ninf = _mm256_set1_pd(kNegInf);
  const __m256d one = _mm256_set1_pd(1.0);
  __m256d best = ninf;
  for (std::size_t i = cb * kCellStride; i < ce * kCellStride; i += 4) {
    const __m256d F = _mm256_loadu_pd(m.F + i);
    __m256d den = _mm256_fmadd_pd(g, F, alpha);
    __m256d valid = _mm256_cmp_pd(_mm256_loadu_pd(m.wK + i), zero, _CMP_NEQ_OQ);
    if (p.restrict_domain) {
      valid = _mm256_and_pd(valid, _mm256_cmp_pd(den, zero, _CMP_GT_OQ));
    }
    den = _mm256_blendv_pd(one, den, valid);
    const __m256d r = _mm256_div_pd(F, den);
    const __m256d gr = _mm256_mul_pd(g, r);
    __m256d v = _mm256_loadu_pd(m.logmu + i);
    v = _mm256_fnmadd_pd(lc, _mm256_loadu_pd(m.c + i), v);
    v = _mm256_fnmadd_pd(la, _mm256_loadu_pd(m.A + i), v);
    v = _mm256_fnmadd_pd(le, _mm256_loadu_pd(m.ell + i), v);
    v = _mm256_add_pd(v, log_pd(abs_pd(den)));
    v = _mm256_fnmadd_pd(tcoef, _mm256_loadu_pd(m.t + i), v);
    v = _mm256_fmadd_pd(lt, r, v);
    v = _mm256_fnmadd_pd(lh, _mm256_mul_pd(gr, gr), v);
    v = _mm256_fmadd_pd(kcoef, _mm256_loadu_pd(m.K + i), v);
    v = _mm256_blendv_pd(ninf, v, valid);
    _mm256_storeu_pd(logw + i, v);
    best = _mm256_max_pd(best, v);
  }
  return hmax(best);
}

void tilt_accumulate_avx2(const MeshPoints& m, std::size_t cb, std::size_t ce,
                          const double* logw, double shift, const TiltParams& p,
                          double* cell_out, TiltGlobal* global) {
  const __m256d alpha = _mm256_set1_pd(p.alpha);
  const __m256d g = _mm256_set1_pd(p.g);
  const __m256d vshift = _mm256_set1_pd(shift);
  const __m256d inv_alpha = _mm256_set1_pd(1.0 / p.alpha);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d ninf = _mm256_set1_pd(kNegInf);
  __m256d sec[21];
  __m256d ab[kNumTiltMoments - 1];
  for (auto& s : sec) s = _mm256_setzero_pd();
  for (auto& s : ab) s = _mm256_setzero_pd();
  for (std::size_t cell = cb; cell < ce; ++cell) {
    __m256d k[kNumTiltMoments], gs[kNumTiltMoments];
    for (int q = 0; q < kNumTiltMoments; ++q) {
      k[q] = _mm256_setzero_pd();
      gs[q] = _mm256_setzero_pd();
    }
    for (std::size_t j = 0; j < kCellStride; j += 4) {
      const std::size_t i = cell * kCellStride + j;
      const __m256d lw = _mm256_loadu_pd(logw + i);
      const __m256d valid = _mm256_cmp_pd(lw, ninf, _CMP_NEQ_OQ);
      const __m256d e = exp_pd(_mm256_sub_pd(lw, vshift));
      const __m256d F = _mm256_loadu_pd(m.F + i);
      const __m256d den = _mm256_blendv_pd(one, _mm256_fmadd_pd(g, F, alpha), valid);
      const __m256d inv = _mm256_div_pd(one, den);
      const __m256d r = _mm256_mul_pd(F, inv);
      const __m256d gr = _mm256_mul_pd(g, r);
      const __m256d s = _mm256_mul_pd(gr, gr);
      const __m256d r2 = _mm256_mul_pd(r, r);
      const __m256d r3 = _mm256_mul_pd(r2, inv);
      const __m256d A = _mm256_loadu_pd(m.A + i);
      const __m256d c = _mm256_loadu_pd(m.c + i);
      const __m256d l = _mm256_loadu_pd(m.ell + i);
      const __m256d t = _mm256_loadu_pd(m.t + i);
      const __m256d K = _mm256_loadu_pd(m.K + i);
      const __m256d f[kNumTiltMoments] = {one, A, c, l, t, K, r, s, r2, r3};
      // e is exactly 0 on invalid lanes; mask anyway so 0*inf cannot leak.
      const __m256d pk = _mm256_and_pd(valid, _mm256_mul_pd(_mm256_loadu_pd(m.wK + i), e));
      const __m256d pg = _mm256_and_pd(valid, _mm256_mul_pd(_mm256_loadu_pd(m.wG + i), e));
      for (int q = 0; q < kNumTiltMoments; ++q) {
        k[q] = _mm256_fmadd_pd(pk, f[q], k[q]);
        gs[q] = _mm256_fmadd_pd(pg, f[q], gs[q]);
      }
      const __m256d u[6] = {A, c, l, _mm256_fmsub_pd(r, one, _mm256_mul_pd(t, inv_alpha)),
                            s, K};
      int idx = 0;
      for (int a = 0; a < 6; ++a) {
        const __m256d pa = _mm256_mul_pd(pk, u[a]);
        for (int b = a; b < 6; ++b) {
          sec[idx] = _mm256_fmadd_pd(pa, u[b], sec[idx]);
          ++idx;
        }
      }
      for (int q = 1; q < kNumTiltMoments; ++q) {
        ab[q - 1] = _mm256_fmadd_pd(pk, abs_pd(f[q]), ab[q - 1]);
      }
    }
    double* out = cell_out + (cell - cb) * 2 * kNumTiltMoments;
    for (int q = 0; q < kNumTiltMoments; ++q) {
      out[q] = hsum(k[q]);
      out[kNumTiltMoments + q] = hsum(gs[q]);
    }
  }
  for (int i = 0; i < 21; ++i) global->second[i] += hsum(sec[i]);
  for (int i = 0; i < kNumTiltMoments - 1; ++i) global->abs[i] += hsum(ab[i]);
}

double tc_logw_avx2(const MeshPoints& m, std::size_t cb, std::size_t ce,
                    const TcParams& p, double* logw) {
  const __m256d alpha = _mm256_set1_pd(p.alpha);
  const __m256d gr = _mm256_set1_pd(p.g_r);
  const __m256d gi = _mm256_set1_pd(p.g_i);
  const __m256d lc = _mm256_set1_pd(p.lam_c);
  const __m256d la = _mm256_set1_pd(p.lam_A);
  const __m256d le = _mm256_set1_pd(p.lam_e);
  const __m256d tcoef = _mm256_set1_pd(p.g_r / p.alpha);
  const __m256d half = _mm256_set1_pd(0.5);
  const __m256d zero = _mm256_setzero_pd();
  const __m256d ninf = _mm256_set1_pd(kNegInf);
  const __m256d tiny = _mm256_set1_pd(std::numeric_limits<double>::min());
  __m256d best = ninf;
  for (std::size_t i = cb * kCellStride; i < ce * kCellStride; i += 4) {
    const __m256d F = _mm256_loadu_pd(m.F + i);
    const __m256d re = _mm256_fmadd_pd(gr, F, alpha);
    const __m256d im = _mm256_mul_pd(gi, F);
    const __m256d n2 = _mm256_fmadd_pd(re, re, _mm256_mul_pd(im, im));
    const __m256d valid = _mm256_and_pd(
        _mm256_cmp_pd(_mm256_loadu_pd(m.wK + i), zero, _CMP_NEQ_OQ),
        _mm256_cmp_pd(n2, tiny, _CMP_GE_OQ));
    __m256d v = _mm256_loadu_pd(m.logmu + i);
    v = _mm256_fnmadd_pd(lc, _mm256_loadu_pd(m.c + i), v);
    v = _mm256_fnmadd_pd(la, _mm256_loadu_pd(m.A + i), v);
    v = _mm256_fnmadd_pd(le, _mm256_loadu_pd(m.ell + i), v);
    v = _mm256_fmadd_pd(half, log_pd(_mm256_max_pd(n2, tiny)), v);
    v = _mm256_fnmadd_pd(tcoef, _mm256_loadu_pd(m.t + i), v);
    v = _mm256_blendv_pd(ninf, v, valid);
    _mm256_storeu_pd(logw + i, v);
    best = _mm256_max_pd(best, v);
  }
  return hmax(best);
}

void tc_accumulate_avx2(const MeshPoints& m, std::size_t cb, std::size_t ce,
                        const double* logw, double shift, const TcParams& p,
                        double* cell_out, TcGlobal* global) {
  const __m256d alpha = _mm256_set1_pd(p.alpha);
  const __m256d gr = _mm256_set1_pd(p.g_r);
  const __m256d gi = _mm256_set1_pd(p.g_i);
  const __m256d vshift = _mm256_set1_pd(shift);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d ninf = _mm256_set1_pd(kNegInf);
  __m256d sec[6];
  __m256d ab[5];
  for (auto& s : sec) s = _mm256_setzero_pd();
  for (auto& s : ab) s = _mm256_setzero_pd();
  for (std::size_t cell = cb; cell < ce; ++cell) {
    __m256d k[kNumTcMoments], gs[kNumTcMoments];
    for (int q = 0; q < kNumTcMoments; ++q) {
      k[q] = _mm256_setzero_pd();
      gs[q] = _mm256_setzero_pd();
    }
    for (std::size_t j = 0; j < kCellStride; j += 4) {
      const std::size_t i = cell * kCellStride + j;
      const __m256d lw = _mm256_loadu_pd(logw + i);
      const __m256d valid = _mm256_cmp_pd(lw, ninf, _CMP_NEQ_OQ);
      const __m256d e = exp_pd(_mm256_sub_pd(lw, vshift));
      const __m256d F = _mm256_loadu_pd(m.F + i);
      const __m256d re = _mm256_fmadd_pd(gr, F, alpha);
      const __m256d im = _mm256_mul_pd(gi, F);
      __m256d n2 = _mm256_fmadd_pd(re, re, _mm256_mul_pd(im, im));
      n2 = _mm256_blendv_pd(one, n2, valid);
      const __m256d inv_n2 = _mm256_div_pd(one, n2);
      const __m256d rr = _mm256_mul_pd(_mm256_mul_pd(F, re), inv_n2);
      const __m256d ri = _mm256_sub_pd(_mm256_setzero_pd(),
                                       _mm256_mul_pd(_mm256_mul_pd(F, im), inv_n2));
      const __m256d A = _mm256_loadu_pd(m.A + i);
      const __m256d c = _mm256_loadu_pd(m.c + i);
      const __m256d l = _mm256_loadu_pd(m.ell + i);
      const __m256d t = _mm256_loadu_pd(m.t + i);
      const __m256d f[kNumTcMoments] = {one, A, c, l, t, rr, ri};
      const __m256d pk = _mm256_and_pd(valid, _mm256_mul_pd(_mm256_loadu_pd(m.wK + i), e));
      const __m256d pg = _mm256_and_pd(valid, _mm256_mul_pd(_mm256_loadu_pd(m.wG + i), e));
      for (int q = 0; q < kNumTcMoments; ++q) {
        k[q] = _mm256_fmadd_pd(pk, f[q], k[q]);
        gs[q] = _mm256_fmadd_pd(pg, f[q], gs[q]);
      }
      const __m256d pA = _mm256_mul_pd(pk, A);
      const __m256d pc = _mm256_mul_pd(pk, c);
      sec[0] = _mm256_fmadd_pd(pA, A, sec[0]);
      sec[1] = _mm256_fmadd_pd(pA, c, sec[1]);
      sec[2] = _mm256_fmadd_pd(pA, l, sec[2]);
      sec[3] = _mm256_fmadd_pd(pc, c, sec[3]);
      sec[4] = _mm256_fmadd_pd(pc, l, sec[4]);
      sec[5] = _mm256_fmadd_pd(_mm256_mul_pd(pk, l), l, sec[5]);
      ab[0] = _mm256_fmadd_pd(pk, abs_pd(A), ab[0]);
      ab[1] = _mm256_fmadd_pd(pk, abs_pd(c), ab[1]);
      ab[2] = _mm256_fmadd_pd(pk, abs_pd(l), ab[2]);
      ab[3] = _mm256_fmadd_pd(pk, abs_pd(t), ab[3]);
      ab[4] = _mm256_fmadd_pd(
          pk, _mm256_sqrt_pd(_mm256_fmadd_pd(rr, rr, _mm256_mul_pd(ri, ri))), ab[4]);
    }
    double* out = cell_out + (cell - cb) * 2 * kNumTcMoments;
    for (int q = 0; q < kNumTcMoments; ++q) {
      out[q] = hsum(k[q]);
      out[kNumTcMoments + q] = hsum(gs[q]);
    }
  }
  for (int i = 0; i < 6; ++i) global->second[i] += hsum(sec[i]);
  for (int i = 0; i < 5; ++i) global->abs[i] += hsum(ab[i]);
}

ResolventSums resolvent_sums_avx2(const double* F, const double* w,
                                  const double* v, std::size_t n, double alpha,
                                  std::complex<double> g) {
  const __m256d valpha = _mm256_set1_pd(alpha);
  const __m256d gr = _mm256_set1_pd(g.real());
  const __m256d gi = _mm256_set1_pd(g.imag());
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d two = _mm256_set1_pd(2.0);
  __m256d m1r = _mm256_setzero_pd(), m1i = m1r, m2r = m1r, m2i = m1r;
  __m256d m3r = m1r, m3i = m1r, m4r = m1r, m4i = m1r;
  const std::size_t n4 = n - n % 4;
  for (std::size_t i = 0; i < n4; i += 4) {
    const __m256d f = _mm256_loadu_pd(F + i);
    const __m256d wi = _mm256_loadu_pd(w + i);
    const __m256d re = _mm256_fmadd_pd(gr, f, valpha);
    const __m256d im = _mm256_mul_pd(gi, f);
    const __m256d inv_n2 = _mm256_div_pd(one, _mm256_fmadd_pd(re, re, _mm256_mul_pd(im, im)));
    const __m256d ir = _mm256_mul_pd(re, inv_n2);
    const __m256d ii = _mm256_sub_pd(_mm256_setzero_pd(), _mm256_mul_pd(im, inv_n2));
    const __m256d ar = _mm256_mul_pd(f, ir);
    const __m256d ai = _mm256_mul_pd(f, ii);
    const __m256d br = _mm256_fmsub_pd(ar, ar, _mm256_mul_pd(ai, ai));
    const __m256d bi = _mm256_mul_pd(two, _mm256_mul_pd(ar, ai));
    m1r = _mm256_fmadd_pd(wi, ar, m1r);
    m1i = _mm256_fmadd_pd(wi, ai, m1i);
    m2r = _mm256_fmadd_pd(wi, br, m2r);
    m2i = _mm256_fmadd_pd(wi, bi, m2i);
    if (v != nullptr) {
      const __m256d wv = _mm256_mul_pd(wi, _mm256_loadu_pd(v + i));
      m3r = _mm256_fmadd_pd(wv, ir, m3r);
      m3i = _mm256_fmadd_pd(wv, ii, m3i);
      m4r = _mm256_fmadd_pd(wv, _mm256_fmsub_pd(ir, ar, _mm256_mul_pd(ii, ai)), m4r);
      m4i = _mm256_fmadd_pd(wv, _mm256_fmadd_pd(ir, ai, _mm256_mul_pd(ii, ar)), m4i);
    }
  }
  ResolventSums out{{hsum(m1r), hsum(m1i)}, {hsum(m2r), hsum(m2i)},
                    {hsum(m3r), hsum(m3i)}, {hsum(m4r), hsum(m4i)}};
  if (n4 < n) {
    const ResolventSums tail = detail::kScalarKernels.resolvent_sums(
        F + n4, w + n4, v == nullptr ? nullptr : v + n4, n - n4, alpha, g);
    out.m1 += tail.m1;
    out.m2 += tail.m2;
    out.m3 += tail.m3;
    out.m4 += tail.m4;
  }
  return out;
}

void matvec_avx2(const double* X, std::size_t n, std::size_t d, const double* x,
                 double* y) {
  const std::size_t d4 = d - d % 4;
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = X + i * d;
    __m256d acc0 = _mm256_setzero_pd(), acc1 = _mm256_setzero_pd();
    std::size_t j = 0;
    for (; j + 8 <= d4; j += 8) {
      acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(row + j), _mm256_loadu_pd(x + j), acc0);
      acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(row + j + 4), _mm256_loadu_pd(x + j + 4), acc1);
    }
    for (; j < d4; j += 4) {
      acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(row + j), _mm256_loadu_pd(x + j), acc0);
    }
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; j < d; ++j) acc += row[j] * x[j];
    y[i] = acc;
  }
}

void matvec_t_avx2(const double* X, std::size_t n, std::size_t d, const double* v,
                   double* out) {
  const std::size_t d4 = d - d % 4;
  for (std::size_t j = 0; j < d; ++j) out[j] = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = X + i * d;
    const __m256d vi = _mm256_set1_pd(v[i]);
    std::size_t j = 0;
    for (; j < d4; j += 4) {
      _mm256_storeu_pd(out + j,
                       _mm256_fmadd_pd(vi, _mm256_loadu_pd(row + j), _mm256_loadu_pd(out + j)));
    }
    for (; j < d; ++j) out[j] += v[i] * row[j];
  }
}

}  // namespace

namespace detail {
const Kernels kAvx2Kernels = {
    tilt_logw_avx2,     tilt_accumulate_avx2, tc_logw_avx2,
    tc_accumulate_avx2, resolvent_sums_avx2,  matvec_avx2,
    matvec_t_avx2,
};
}  // namespace detail

}  // namespace kacrice::simd
