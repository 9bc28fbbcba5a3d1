// Scalar reference kernels vs the AVX2 variants on synthetic data.

#include <algorithm>
#include <cmath>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "doctest.h"
#include "kacrice/simd/kernels.hpp"

using namespace kacrice::simd;

namespace {

struct Synthetic {
  std::size_t cells;
  std::vector<double> wK, wG, logmu, c, A, ell, t, K, F;
  explicit Synthetic(std::size_t n, unsigned seed) : cells(n) {
    const std::size_t np = n * kCellStride;
    for (auto* v : {&wK, &wG, &logmu, &c, &A, &ell, &t, &K, &F}) v->assign(np, 0.0);
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> u(-1, 1);
    for (std::size_t cell = 0; cell < n; ++cell) {
      for (std::size_t j = 0; j < kCellPoints; ++j) {
        const std::size_t i = cell * kCellStride + j;
        const double y = 3 * u(gen), ys = 3 * u(gen);
        wK[i] = 0.01 * (1.5 + u(gen));
        wG[i] = (j % 2 == 0) ? 0.02 * (1.5 + u(gen)) : 0.0;
        logmu[i] = -0.5 * (y * y + ys * ys);
        F[i] = -4 + 20 * (1 + u(gen));
        A[i] = 5 * (1 + u(gen));
        c[i] = 2 * u(gen);
        ell[i] = 3 * (1 + u(gen));
        t[i] = 4 * u(gen);
        K[i] = 6 * u(gen);
      }
    }
  }
  MeshPoints view() const {
    return {wK.data(), wG.data(), logmu.data(), c.data(), A.data(), ell.data(), t.data(),
            K.data(), F.data()};
  }
};

void close(double a, double b, double rel = 1e-12) {
  if (std::isinf(a) || std::isinf(b)) {
    CHECK(a == b);
    return;
  }
  CHECK(std::abs(a - b) <= rel * std::max({1.0, std::abs(a), std::abs(b)}));
}

}  // namespace

TEST_CASE("ISA selection") {
  CHECK(isa_supported(Isa::kScalar));
  const Isa before = active_isa();
  set_active_isa(Isa::kScalar);
  CHECK(active_isa() == Isa::kScalar);
  CHECK(&active() == &kernels(Isa::kScalar));
  set_active_isa(before);
  CHECK(std::string(isa_name(Isa::kAvx2)) == "avx2");
}

#if defined(KACRICE_HAVE_AVX2)
TEST_CASE("AVX2 kernels agree with the scalar reference") {
  if (!isa_supported(Isa::kAvx2)) {
    MESSAGE("CPU without AVX2; skipped");
    return;
  }
  const Kernels& S = kernels(Isa::kScalar);
  const Kernels& V = kernels(Isa::kAvx2);
  const Synthetic m(7, 11);
  const std::size_t np = m.cells * kCellStride;

  for (bool restrict_domain : {false, true}) {
    TiltParams p;
    p.lam_c = 0.3, p.lam_A = 0.05, p.lam_e = 0.2, p.lam_t = 0.1, p.lam_h = 0.4;
    p.lam_star = 0.02, p.g = restrict_domain ? 1.6 : 0.3, p.alpha = 4.0;
    p.restrict_domain = restrict_domain;
    std::vector<double> ls(np), lv(np);
    // sub-range of cells exercises the offsets
    const double ms = S.tilt_logw(m.view(), 1, 6, p, ls.data());
    const double mv = V.tilt_logw(m.view(), 1, 6, p, lv.data());
    close(ms, mv);
    for (std::size_t i = kCellStride; i < 6 * kCellStride; ++i) close(ls[i], lv[i]);
    std::vector<double> cs(5 * 2 * kNumTiltMoments), cv(cs.size());
    TiltGlobal gs, gv;
    S.tilt_accumulate(m.view(), 1, 6, ls.data(), ms, p, cs.data(), &gs);
    V.tilt_accumulate(m.view(), 1, 6, ls.data(), ms, p, cv.data(), &gv);
    for (std::size_t i = 0; i < cs.size(); ++i) close(cs[i], cv[i]);
    for (int i = 0; i < 21; ++i) close(gs.second[i], gv.second[i]);
    for (int i = 0; i < kNumTiltMoments - 1; ++i) close(gs.abs[i], gv.abs[i]);
  }

  TcParams tp;
  tp.lam_c = 0.2, tp.lam_A = 0.03, tp.lam_e = -0.1, tp.g_r = -0.2, tp.g_i = 0.3, tp.alpha = 3.0;
  std::vector<double> ls(np), lv(np);
  const double ms = S.tc_logw(m.view(), 0, m.cells, tp, ls.data());
  const double mv = V.tc_logw(m.view(), 0, m.cells, tp, lv.data());
  close(ms, mv);
  for (std::size_t i = 0; i < np; ++i) close(ls[i], lv[i]);
  std::vector<double> cs(m.cells * 2 * kNumTcMoments), cv(cs.size());
  TcGlobal gs, gv;
  S.tc_accumulate(m.view(), 0, m.cells, ls.data(), ms, tp, cs.data(), &gs);
  V.tc_accumulate(m.view(), 0, m.cells, ls.data(), ms, tp, cv.data(), &gv);
  for (std::size_t i = 0; i < cs.size(); ++i) close(cs[i], cv[i]);
  for (int i = 0; i < 6; ++i) close(gs.second[i], gv.second[i]);
  for (int i = 0; i < 5; ++i) close(gs.abs[i], gv.abs[i]);

  // resolvent sums, odd length to hit the tail loop
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(0, 1);
  const std::size_t n = 1001;
  std::vector<double> F(n), w(n), v(n);
  for (std::size_t i = 0; i < n; ++i) {
    F[i] = -3 + 20 * u(gen);
    w[i] = u(gen) / n;
    v[i] = 2 * u(gen);
  }
  for (std::complex<double> g : {std::complex<double>(0.1, 0.0), std::complex<double>(-0.3, 0.2)}) {
    for (const double* vp : std::vector<const double*>{v.data(), nullptr}) {
      const ResolventSums a = S.resolvent_sums(F.data(), w.data(), vp, n, 5.0, g);
      const ResolventSums b = V.resolvent_sums(F.data(), w.data(), vp, n, 5.0, g);
      for (auto [x, y] : {std::pair{a.m1, b.m1}, {a.m2, b.m2}, {a.m3, b.m3}, {a.m4, b.m4}}) {
        close(x.real(), y.real());
        close(x.imag(), y.imag());
      }
    }
  }

  // matvec kernels, d not a multiple of the vector width
  const std::size_t rows = 37, d = 29;
  std::vector<double> X(rows * d), x(d), y(rows), ys(rows), z(d), zs(d);
  for (auto& e : X) e = u(gen) - 0.5;
  for (auto& e : x) e = u(gen) - 0.5;
  for (auto& e : y) e = u(gen) - 0.5;
  S.matvec(X.data(), rows, d, x.data(), ys.data());
  std::vector<double> yv(rows);
  V.matvec(X.data(), rows, d, x.data(), yv.data());
  for (std::size_t i = 0; i < rows; ++i) close(ys[i], yv[i]);
  S.matvec_t(X.data(), rows, d, y.data(), z.data());
  V.matvec_t(X.data(), rows, d, y.data(), zs.data());
  for (std::size_t j = 0; j < d; ++j) close(z[j], zs[j]);
}
#endif
