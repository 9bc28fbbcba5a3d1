#pragma once

// Adaptive 2-D quadrature for expectations under the correlated Gaussian
// mu_q and under exponential tilts of it.
//
// The plane is truncated to a square [-R, R]^2 split into square cells, each
// carrying a 15x15 tensor Gauss-Kronrod rule with the embedded 7x7 Gauss rule
// as error estimate. Everything that does not depend on the tilt (node
// positions, weights, log-density and the loss-derived functions) is cached
// per node, so one tilt evaluation is a single streaming pass. The mesh only
// ever grows: cells refined for one tilt stay refined for the next, which is
// what makes repeated solves along a continuation cheap.

#include <complex>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "kacrice/loss_model.hpp"
#include "kacrice/simd/kernels.hpp"

namespace kacrice {

class NonIntegrable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ToleranceNotMet : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct QuadratureOptions {
  double radius = 8.0;
  int cells_per_side = 16;
  // Target for sum over cells of |Kronrod - Gauss|, relative to the scale of
  // each moment (Z itself, or the integral of |f| for the others).
  double rel_tol = 1e-10;
  double abs_tol = 1e-14;
  std::size_t max_cells = 16000;
  // Fraction of the mass allowed in the outermost ring of cells.
  double tail_tol = 1e-13;
};

/// Tilt exponent of the minima / fin-saddle formulas:
///   Phi = -lc c - lA A - le l + log(alpha + gF) - (g + lt) t / alpha
///         + lt F/(alpha+gF) - lh (gF/(alpha+gF))^2 + (ls/alpha) K,
/// restricted to B_g = {alpha + gF > 0}.
using TiltExponent = simd::TiltParams;

/// Tilt of the all-critical-points formula (complex g, whole plane).
using TcTilt = simd::TcParams;

/// Expectations under the normalized tilted law.
struct MomentBundle {
  double log_z = 0;
  double A = 0, c = 0, ell = 0, t = 0, K = 0;
  double r = 0;   // F/(alpha+gF)
  double s = 0;   // (gF/(alpha+gF))^2
  double r2 = 0;  // F^2/(alpha+gF)^2
  double r3 = 0;  // F^2/(alpha+gF)^3
  /// Covariance of f = (A, c, ell, -t/alpha + r, s, K).
  double cov[6][6] = {};
  double rel_err = 0;
};

struct TcMomentBundle {
  double log_z = 0;
  double A = 0, c = 0, ell = 0, t = 0;
  std::complex<double> r;  // F/(alpha+gF)
  double cov[3][3] = {};   // of (A, c, ell)
  double rel_err = 0;
};

/// Discrete law: atoms (F_i, w_i) with sum w = 1, plus the label-side
/// quantities needed by the spectral code.
struct WeightLaw {
  std::vector<double> F;
  std::vector<double> w;
  /// (y* - q y)^2 F / (1 - q^2); empty if not available.
  std::vector<double> vF;
  double t_nu = 0;  // E[y dl]
  double F_min = 0;

  static WeightLaw constant(double f);
  static WeightLaw from_samples(std::vector<double> F, std::vector<double> vF = {},
                                double t_nu = 0);
  std::size_t size() const { return F.size(); }
};

class GaussianMesh {
 public:
  GaussianMesh(std::shared_ptr<const LossModel> loss, double q,
               QuadratureOptions opts = {});

  double q() const { return q_; }
  const LossModel& loss() const { return *loss_; }
  std::shared_ptr<const LossModel> loss_ptr() const { return loss_; }
  const QuadratureOptions& options() const { return opts_; }
  std::size_t num_cells() const { return cells_.size(); }
  double radius() const { return radius_; }

  /// E[f] under mu_q (tilt == nullopt) or the normalized tilted law.
  double expect(const std::optional<TiltExponent>& tilt,
                const std::function<double(double y, double y_star)>& f);
  /// log of the unnormalized integral of exp(Phi) over B_g.
  double log_partition(const TiltExponent& tilt);
  MomentBundle moments(const TiltExponent& tilt);
  TcMomentBundle tc_moments(const TcTilt& tilt);

  /// Atoms of the tilted law on the current mesh (Kronrod nodes).
  WeightLaw weight_law(const TiltExponent& tilt);
  WeightLaw tc_weight_law(const TcTilt& tilt);
  WeightLaw base_weight_law();

  /// Visit every node with its normalized weight under the tilt.
  void for_each_node(const TiltExponent& tilt,
                     const std::function<void(double y, double y_star, double w)>& fn);
  void for_each_node(const TcTilt& tilt,
                     const std::function<void(double y, double y_star, double w)>& fn);

 private:
  struct Cell {
    double cx, cy, h;
  };

  void build(double radius, int per_side);
  void fill_cell(std::size_t idx);
  void add_cell(const Cell& c);
  void split(const std::vector<std::size_t>& which);
  simd::MeshPoints view() const;
  bool refine_by(const std::vector<double>& cell_err, double total_err, double tol);
  double boundary_fraction(const std::vector<double>& cell_z, double total) const;
  void check_growth(const std::function<double(const simd::MeshPoints&, std::size_t,
                                               double*)>& logw_fn);

  template <class Params, class Accum>
  void run_adaptive(const Params& p, Accum&& accum);

  std::shared_ptr<const LossModel> loss_;
  double q_;
  QuadratureOptions opts_;
  double radius_ = 0;
  int per_side_ = 0;
  std::vector<Cell> cells_;
  // Per-node SoA caches, kCellStride entries per cell.
  std::vector<double> y_, ys_, wK_, wG_, logmu_, c_, A_, ell_, t_, K_, F_, v_;
  std::vector<double> logw_;
};

}  // namespace kacrice
