#pragma once

// Vectorized exp/log for four doubles (Cephes rational approximations,
// ~1 ulp). Only included from translation units built with -mavx2 -mfma.

#include <immintrin.h>

namespace kacrice::simd::avx2 {

inline __m256d pow2n(__m256d n) {
  // n integral in [-1022, 1023]
  const __m128i n32 = _mm256_cvtpd_epi32(n);
  __m256i n64 = _mm256_cvtepi32_epi64(n32);
  n64 = _mm256_add_epi64(n64, _mm256_set1_epi64x(1023));
  return _mm256_castsi256_pd(_mm256_slli_epi64(n64, 52));
}

/// exp(x); returns 0 for x < -708 (including -inf) and clamps above 709.
inline __m256d exp_pd(__m256d x) {
  const __m256d lo_mask = _mm256_cmp_pd(x, _mm256_set1_pd(-708.0), _CMP_LT_OQ);
  x = _mm256_max_pd(x, _mm256_set1_pd(-708.0));
  x = _mm256_min_pd(x, _mm256_set1_pd(709.0));

  const __m256d log2e = _mm256_set1_pd(1.4426950408889634073599);
  const __m256d c1 = _mm256_set1_pd(6.93145751953125E-1);
  const __m256d c2 = _mm256_set1_pd(1.42860682030941723212E-6);

  __m256d n = _mm256_round_pd(_mm256_mul_pd(x, log2e),
                              _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  x = _mm256_fnmadd_pd(n, c1, x);
  x = _mm256_fnmadd_pd(n, c2, x);

  const __m256d xx = _mm256_mul_pd(x, x);
  __m256d px = _mm256_set1_pd(1.26177193074810590878E-4);
  px = _mm256_fmadd_pd(px, xx, _mm256_set1_pd(3.02994407707441961300E-2));
  px = _mm256_fmadd_pd(px, xx, _mm256_set1_pd(9.99999999999999999910E-1));
  px = _mm256_mul_pd(px, x);
  __m256d qx = _mm256_set1_pd(3.00198505138664455042E-6);
  qx = _mm256_fmadd_pd(qx, xx, _mm256_set1_pd(2.52448340349684104192E-3));
  qx = _mm256_fmadd_pd(qx, xx, _mm256_set1_pd(2.27265548208155028766E-1));
  qx = _mm256_fmadd_pd(qx, xx, _mm256_set1_pd(2.00000000000000000009E0));
  __m256d r = _mm256_div_pd(px, _mm256_sub_pd(qx, px));
  r = _mm256_fmadd_pd(_mm256_set1_pd(2.0), r, _mm256_set1_pd(1.0));
  r = _mm256_mul_pd(r, pow2n(n));
  return _mm256_andnot_pd(lo_mask, r);
}

/// log(x) for positive normal x. Non-positive lanes give garbage; callers
/// mask them.
inline __m256d log_pd(__m256d x) {
  const __m256i bits = _mm256_castpd_si256(x);
  // exponent such that x = m 2^e with m in [0.5, 1)
  __m256i ebits = _mm256_srli_epi64(bits, 52);
  ebits = _mm256_and_si256(ebits, _mm256_set1_epi64x(0x7ff));
  const __m256d magic = _mm256_set1_pd(4503599627370496.0);  // 2^52
  __m256d e = _mm256_sub_pd(
      _mm256_castsi256_pd(_mm256_or_si256(ebits, _mm256_castpd_si256(magic))), magic);
  e = _mm256_sub_pd(e, _mm256_set1_pd(1022.0));
  __m256i mbits = _mm256_and_si256(bits, _mm256_set1_epi64x(0x000FFFFFFFFFFFFFLL));
  mbits = _mm256_or_si256(mbits, _mm256_set1_epi64x(0x3FE0000000000000LL));
  __m256d m = _mm256_castsi256_pd(mbits);

  const __m256d sqrth = _mm256_set1_pd(0.70710678118654752440);
  const __m256d small = _mm256_cmp_pd(m, sqrth, _CMP_LT_OQ);
  const __m256d one = _mm256_set1_pd(1.0);
  e = _mm256_sub_pd(e, _mm256_and_pd(small, one));
  // m < sqrth: x = 2m - 1, else x = m - 1
  __m256d xm = _mm256_add_pd(m, _mm256_and_pd(small, m));
  xm = _mm256_sub_pd(xm, one);

  const __m256d z = _mm256_mul_pd(xm, xm);
  __m256d pp = _mm256_set1_pd(1.01875663804580931796E-4);
  pp = _mm256_fmadd_pd(pp, xm, _mm256_set1_pd(4.97494994976747001425E-1));
  pp = _mm256_fmadd_pd(pp, xm, _mm256_set1_pd(4.70579119878881725854E0));
  pp = _mm256_fmadd_pd(pp, xm, _mm256_set1_pd(1.44989225341610930846E1));
  pp = _mm256_fmadd_pd(pp, xm, _mm256_set1_pd(1.79368678507819816313E1));
  pp = _mm256_fmadd_pd(pp, xm, _mm256_set1_pd(7.70838733755885391666E0));
  __m256d qq = _mm256_add_pd(xm, _mm256_set1_pd(1.12873587189167450590E1));
  qq = _mm256_fmadd_pd(qq, xm, _mm256_set1_pd(4.52279145837532221105E1));
  qq = _mm256_fmadd_pd(qq, xm, _mm256_set1_pd(8.29875266912776603211E1));
  qq = _mm256_fmadd_pd(qq, xm, _mm256_set1_pd(7.11544750618563894466E1));
  qq = _mm256_fmadd_pd(qq, xm, _mm256_set1_pd(2.31251620126765340583E1));

  __m256d y = _mm256_mul_pd(xm, _mm256_mul_pd(z, _mm256_div_pd(pp, qq)));
  y = _mm256_fmadd_pd(e, _mm256_set1_pd(-2.121944400546905827679e-4), y);
  y = _mm256_fnmadd_pd(_mm256_set1_pd(0.5), z, y);
  __m256d res = _mm256_add_pd(xm, y);
  res = _mm256_fmadd_pd(e, _mm256_set1_pd(0.693359375), res);
  return res;
}

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

inline double hmax(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_max_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_max_sd(s, _mm_unpackhi_pd(s, s)));
}

inline __m256d abs_pd(__m256d v) {
  return _mm256_andnot_pd(_mm256_set1_pd(-0.0), v);
}

}  // namespace kacrice::simd::avx2
