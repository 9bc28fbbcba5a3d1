#pragma once

// Data-parallel inner loops. Each kernel has a scalar reference version and
// an AVX2+FMA version; the active one is chosen at runtime from the CPU
// features, overridable through KACRICE_SIMD={scalar,avx2}.

#include <complex>
#include <cstddef>

namespace kacrice::simd {

enum class Isa { kScalar, kAvx2 };

const char* isa_name(Isa isa);
bool isa_supported(Isa isa);
Isa active_isa();
/// Testing hook; throws std::runtime_error if the CPU lacks the ISA.
void set_active_isa(Isa isa);

// Quadrature cells hold a 15x15 tensor Gauss-Kronrod rule padded to a
// multiple of the vector width. Padding points carry zero weights.
inline constexpr std::size_t kCellPoints = 225;
inline constexpr std::size_t kCellStride = 228;

/// Structure-of-arrays view over cached per-node data of a mesh.
struct MeshPoints {
  const double* wK = nullptr;     // Kronrod weight (cell area included)
  const double* wG = nullptr;     // embedded Gauss weight, 0 off the Gauss nodes
  const double* logmu = nullptr;  // log density of the base Gaussian
  const double* c = nullptr;
  const double* A = nullptr;
  const double* ell = nullptr;
  const double* t = nullptr;
  const double* K = nullptr;
  const double* F = nullptr;
};

struct TiltParams {
  double lam_c = 0, lam_A = 0, lam_e = 0, lam_t = 0, lam_h = 0, lam_star = 0;
  double g = 0, alpha = 0;
  bool restrict_domain = false;  // zero the integrand where alpha + g F <= 0
};

// First-moment slots accumulated per cell, with r = F/(alpha+gF) and
// s = (gF/(alpha+gF))^2.
enum TiltMoment : int {
  kZ = 0, kA, kC, kEll, kT, kK, kR, kS, kR2, kR3, kNumTiltMoments
};

/// Whole-mesh sums (Kronrod weights) beyond the per-cell first moments.
/// second[] holds the upper triangle, row-major, of the products of
/// f = (A, c, ell, -t/alpha + r, s, K); abs[i] = sum |moment i+1|.
struct TiltGlobal {
  double second[21] = {};
  double abs[kNumTiltMoments - 1] = {};
};

struct TcParams {
  double lam_c = 0, lam_A = 0, lam_e = 0;
  double g_r = 0, g_i = 0, alpha = 0;
};

enum TcMoment : int { kTcZ = 0, kTcA, kTcC, kTcEll, kTcT, kTcRr, kTcRi, kNumTcMoments };

/// second[] = (AA, Ac, Aell, cc, cell, ellell); abs[] = |A|,|c|,|ell|,|t|,|r|.
struct TcGlobal {
  double second[6] = {};
  double abs[5] = {};
};

/// Sums over weighted atoms (F_i, w_i, v_i) at complex g:
///   m1 = sum w F/(alpha+gF),   m2 = sum w F^2/(alpha+gF)^2,
///   m3 = sum w v/(alpha+gF),   m4 = sum w v F/(alpha+gF)^2.
struct ResolventSums {
  std::complex<double> m1, m2, m3, m4;
};

struct Kernels {
  /// Writes log(mu) + Phi at every node of cells [cb, ce) into logw (indexed
  /// like the mesh arrays); returns the max over finite entries or -inf.
  double (*tilt_logw)(const MeshPoints&, std::size_t cb, std::size_t ce,
                      const TiltParams&, double* logw);
  /// Per-cell Kronrod (slots 0..9) and Gauss (10..19) sums of
  /// exp(logw - shift) times each moment; global sums are accumulated.
  void (*tilt_accumulate)(const MeshPoints&, std::size_t cb, std::size_t ce,
                          const double* logw, double shift, const TiltParams&,
                          double* cell_out, TiltGlobal* global);
  double (*tc_logw)(const MeshPoints&, std::size_t cb, std::size_t ce,
                    const TcParams&, double* logw);
  /// Per-cell Kronrod (0..6) and Gauss (7..13) sums.
  void (*tc_accumulate)(const MeshPoints&, std::size_t cb, std::size_t ce,
                        const double* logw, double shift, const TcParams&,
                        double* cell_out, TcGlobal* global);
  /// v may be null, in which case m3 = m4 = 0.
  ResolventSums (*resolvent_sums)(const double* F, const double* w,
                                  const double* v, std::size_t n, double alpha,
                                  std::complex<double> g);
  /// y[i] = sum_j X[i*d + j] x[j] for a row-major n x d matrix.
  void (*matvec)(const double* X, std::size_t n, std::size_t d,
                 const double* x, double* y);
  /// out[j] = sum_i v[i] X[i*d + j].
  void (*matvec_t)(const double* X, std::size_t n, std::size_t d,
                   const double* v, double* out);
};

const Kernels& kernels(Isa isa);
inline const Kernels& active() { return kernels(active_isa()); }

namespace detail {
extern const Kernels kScalarKernels;
#if defined(KACRICE_HAVE_AVX2)
extern const Kernels kAvx2Kernels;
#endif
}  // namespace detail

}  // namespace kacrice::simd
