#include "kacrice/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace kacrice {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.8378770664093454836;

// 15-point Kronrod abscissae on [-1, 1] (non-negative half, descending) and
// weights; the 7-point Gauss rule sits on the odd entries.
constexpr double kXgk[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr double kWgk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {0.129484966168869693270611432679082,
                           0.279705391489276667901467771423780,
                           0.381830050505118944950369775488975,
                           0.417959183673469387755102040816327};

struct Rule1D {
  double x[15], wk[15], wg[15];
};

Rule1D make_rule() {
  Rule1D r{};
  for (int i = 0; i < 15; ++i) {
    const int k = i < 7 ? i : 14 - i;
    r.x[i] = i < 7 ? -kXgk[k] : kXgk[k];
    r.wk[i] = kWgk[k];
    r.wg[i] = (k % 2 == 1) ? kWg[k / 2] : 0.0;
  }
  return r;
}

const Rule1D& rule() {
  static const Rule1D r = make_rule();
  return r;
}

double safe_scale(double v, double floor) { return std::max(std::abs(v), floor); }

}  // namespace

WeightLaw WeightLaw::constant(double f) {
  WeightLaw w;
  w.F = {f};
  w.w = {1.0};
  w.F_min = f;
  return w;
}

WeightLaw WeightLaw::from_samples(std::vector<double> F, std::vector<double> vF,
                                  double t_nu) {
  if (F.empty()) throw std::invalid_argument("WeightLaw: empty sample");
  if (!vF.empty() && vF.size() != F.size()) {
    throw std::invalid_argument("WeightLaw: vF size mismatch");
  }
  WeightLaw w;
  w.w.assign(F.size(), 1.0 / static_cast<double>(F.size()));
  w.F_min = *std::min_element(F.begin(), F.end());
  w.F = std::move(F);
  w.vF = std::move(vF);
  w.t_nu = t_nu;
  return w;
}

GaussianMesh::GaussianMesh(std::shared_ptr<const LossModel> loss, double q,
                           QuadratureOptions opts)
    : loss_(std::move(loss)), q_(q), opts_(opts) {
  if (!loss_) throw std::invalid_argument("GaussianMesh: null loss");
  if (!(std::abs(q) < 1.0)) throw std::invalid_argument("GaussianMesh: |q| must be < 1");
  if (opts_.cells_per_side < 1 || !(opts_.radius > 0)) {
    throw std::invalid_argument("GaussianMesh: bad options");
  }
  build(opts_.radius, opts_.cells_per_side);
}

void GaussianMesh::build(double radius, int per_side) {
  radius_ = radius;
  per_side_ = per_side;
  cells_.clear();
  for (auto* v : {&y_, &ys_, &wK_, &wG_, &logmu_, &c_, &A_, &ell_, &t_, &K_, &F_, &v_}) {
    v->clear();
  }
  const double h = radius / per_side;
  for (int i = 0; i < per_side; ++i) {
    for (int j = 0; j < per_side; ++j) {
      add_cell({-radius + (2 * i + 1) * h, -radius + (2 * j + 1) * h, h});
    }
  }
}

void GaussianMesh::add_cell(const Cell& c) {
  cells_.push_back(c);
  const std::size_t n = cells_.size() * simd::kCellStride;
  for (auto* v : {&y_, &ys_, &wK_, &wG_, &logmu_, &c_, &A_, &ell_, &t_, &K_, &F_, &v_}) {
    v->resize(n, 0.0);
  }
  fill_cell(cells_.size() - 1);
}

void GaussianMesh::fill_cell(std::size_t idx) {
  const Cell& cell = cells_[idx];
  const Rule1D& r = rule();
  const double one_m_q2 = 1.0 - q_ * q_;
  const double log_norm = -kLog2Pi - 0.5 * std::log(one_m_q2);
  const double area = cell.h * cell.h;
  std::size_t k = idx * simd::kCellStride;
  for (int i = 0; i < 15; ++i) {
    for (int j = 0; j < 15; ++j, ++k) {
      const double y = cell.cx + cell.h * r.x[i];
      const double ys = cell.cy + cell.h * r.x[j];
      const DerivedFunctions d = loss_->derived({y, ys}, q_);
      y_[k] = y;
      ys_[k] = ys;
      wK_[k] = r.wk[i] * r.wk[j] * area;
      wG_[k] = r.wg[i] * r.wg[j] * area;
      logmu_[k] = log_norm - (y * y - 2 * q_ * y * ys + ys * ys) / (2 * one_m_q2);
      c_[k] = d.c_q;
      A_[k] = d.A;
      ell_[k] = loss_->value({y, ys});
      t_[k] = d.t;
      K_[k] = d.K_q;
      F_[k] = d.F;
      const double res = ys - q_ * y;
      v_[k] = res * res / one_m_q2;
    }
  }
  for (; k < (idx + 1) * simd::kCellStride; ++k) {
    y_[k] = ys_[k] = wK_[k] = wG_[k] = c_[k] = A_[k] = ell_[k] = t_[k] = K_[k] = F_[k] =
        v_[k] = 0.0;
    logmu_[k] = 0.0;
  }
}

void GaussianMesh::split(const std::vector<std::size_t>& which) {
  for (std::size_t idx : which) {
    const Cell p = cells_[idx];
    const double h = 0.5 * p.h;
    cells_[idx] = {p.cx - h, p.cy - h, h};
    fill_cell(idx);
    add_cell({p.cx + h, p.cy - h, h});
    add_cell({p.cx - h, p.cy + h, h});
    add_cell({p.cx + h, p.cy + h, h});
  }
}

simd::MeshPoints GaussianMesh::view() const {
  simd::MeshPoints m;
  m.wK = wK_.data();
  m.wG = wG_.data();
  m.logmu = logmu_.data();
  m.c = c_.data();
  m.A = A_.data();
  m.ell = ell_.data();
  m.t = t_.data();
  m.K = K_.data();
  m.F = F_.data();
  return m;
}

bool GaussianMesh::refine_by(const std::vector<double>& cell_err, double total_err,
                             double tol) {
  std::vector<std::size_t> order(cell_err.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return cell_err[a] > cell_err[b]; });
  std::vector<std::size_t> pick;
  double remaining = total_err;
  for (std::size_t idx : order) {
    if (remaining <= 0.25 * tol) break;
    pick.push_back(idx);
    remaining -= cell_err[idx];
  }
  if (pick.empty()) pick.push_back(order.front());
  if (cells_.size() + 3 * pick.size() > opts_.max_cells) return false;
  std::sort(pick.begin(), pick.end());
  split(pick);
  return true;
}

double GaussianMesh::boundary_fraction(const std::vector<double>& cell_z,
                                       double total) const {
  if (!(total > 0)) return 0.0;
  double edge = 0.0;
  const double lim = radius_ * (1.0 - 1e-12);
  for (std::size_t i = 0; i < cells_.size(); ++i) {
    const Cell& c = cells_[i];
    if (std::abs(c.cx) + c.h >= lim || std::abs(c.cy) + c.h >= lim) edge += cell_z[i];
  }
  return edge / total;
}

// Rejects tilts whose log-integrand grows outward: compares the maximum on
// the square of half-width 1.5R against the one on the square of half-width R.
void GaussianMesh::check_growth(
    const std::function<double(const simd::MeshPoints&, std::size_t, double*)>& logw_fn) {
  constexpr int kPerSide = 32;
  const std::size_t stride = simd::kCellStride;
  std::vector<double> buf[11];
  for (auto& b : buf) b.assign(2 * stride, 0.0);
  const double one_m_q2 = 1.0 - q_ * q_;
  const double log_norm = -kLog2Pi - 0.5 * std::log(one_m_q2);
  for (int ring = 0; ring < 2; ++ring) {
    const double R = radius_ * (ring == 0 ? 1.0 : 1.5);
    std::size_t k = ring * stride;
    for (int side = 0; side < 4; ++side) {
      for (int i = 0; i < kPerSide; ++i, ++k) {
        const double s = -R + 2.0 * R * i / kPerSide;
        double y, ys;
        switch (side) {
          case 0: y = s; ys = -R; break;
          case 1: y = R; ys = s; break;
          case 2: y = -s; ys = R; break;
          default: y = -R; ys = -s; break;
        }
        const DerivedFunctions d = loss_->derived({y, ys}, q_);
        buf[0][k] = 1.0;
        buf[1][k] = 0.0;
        buf[2][k] = log_norm - (y * y - 2 * q_ * y * ys + ys * ys) / (2 * one_m_q2);
        buf[3][k] = d.c_q;
        buf[4][k] = d.A;
        buf[5][k] = loss_->value({y, ys});
        buf[6][k] = d.t;
        buf[7][k] = d.K_q;
        buf[8][k] = d.F;
      }
    }
  }
  simd::MeshPoints m{buf[0].data(), buf[1].data(), buf[2].data(), buf[3].data(),
                     buf[4].data(), buf[5].data(), buf[6].data(), buf[7].data(),
                     buf[8].data()};
  std::vector<double> lw(2 * stride);
  logw_fn(m, 2, lw.data());
  double inner = kNegInf, outer = kNegInf;
  for (std::size_t i = 0; i < 4 * kPerSide; ++i) {
    inner = std::max(inner, lw[i]);
    outer = std::max(outer, lw[stride + i]);
  }
  if (outer > kNegInf && outer >= inner) {
    throw NonIntegrable("tilted integrand does not decay away from the origin");
  }
}

template <class Params, class Accum>
void GaussianMesh::run_adaptive(const Params& p, Accum&& accum) {
  bool doubled = false;
  for (;;) {
    const bool ok = accum(p);
    if (ok) return;
    // accum returns false only for a truncation failure
    if (doubled) {
      throw NonIntegrable("tilted mass reaches the truncation boundary at R = " +
                          std::to_string(radius_));
    }
    build(2.0 * radius_, 2 * per_side_);
    doubled = true;
  }
}

MomentBundle GaussianMesh::moments(const TiltExponent& tilt) {
  if (!(tilt.alpha > 0)) throw std::invalid_argument("moments: alpha must be positive");
  const simd::Kernels& kern = simd::active();
  check_growth([&](const simd::MeshPoints& m, std::size_t nc, double* lw) {
    return kern.tilt_logw(m, 0, nc, tilt, lw);
  });
  // s, r2, r3 can be non-integrable near the boundary of B_g when neither
  // lam_t nor lam_h is active; they then do not drive refinement.
  const bool restricted = tilt.g * -loss_->second_deriv_infimum() > tilt.alpha;
  const bool strong = !restricted || tilt.lam_t > 0 || tilt.lam_h > 0;
  const int nslots = strong ? simd::kNumTiltMoments : simd::kS;

  MomentBundle out;
  run_adaptive(tilt, [&](const TiltExponent& p) {
    std::vector<double> cell_out, cell_err, cell_z;
    for (;;) {
      const std::size_t n = cells_.size();
      logw_.resize(n * simd::kCellStride);
      const double mx = kern.tilt_logw(view(), 0, n, p, logw_.data());
      if (!(mx > kNegInf)) throw NonIntegrable("tilted integrand vanishes on the mesh");
      cell_out.assign(n * 2 * simd::kNumTiltMoments, 0.0);
      simd::TiltGlobal glob;
      kern.tilt_accumulate(view(), 0, n, logw_.data(), mx, p, cell_out.data(), &glob);
      double tot[simd::kNumTiltMoments] = {};
      for (std::size_t c = 0; c < n; ++c) {
        for (int q = 0; q < simd::kNumTiltMoments; ++q) {
          tot[q] += cell_out[c * 2 * simd::kNumTiltMoments + q];
        }
      }
      double scale[simd::kNumTiltMoments];
      scale[0] = safe_scale(tot[0], 1e-300);
      for (int q = 1; q < simd::kNumTiltMoments; ++q) {
        scale[q] = safe_scale(glob.abs[q - 1], opts_.abs_tol * scale[0]);
      }
      cell_err.assign(n, 0.0);
      cell_z.assign(n, 0.0);
      double total_err = 0.0;
      for (std::size_t c = 0; c < n; ++c) {
        const double* co = &cell_out[c * 2 * simd::kNumTiltMoments];
        double e = 0.0;
        for (int q = 0; q < nslots; ++q) {
          e = std::max(e, std::abs(co[q] - co[simd::kNumTiltMoments + q]) / scale[q]);
        }
        cell_err[c] = e;
        cell_z[c] = co[0];
        total_err += e;
      }
      if (total_err <= opts_.rel_tol) {
        if (boundary_fraction(cell_z, tot[0]) > opts_.tail_tol) return false;
        const double Z = tot[0];
        out.log_z = std::log(Z) + mx;
        out.A = tot[simd::kA] / Z;
        out.c = tot[simd::kC] / Z;
        out.ell = tot[simd::kEll] / Z;
        out.t = tot[simd::kT] / Z;
        out.K = tot[simd::kK] / Z;
        out.r = tot[simd::kR] / Z;
        out.s = tot[simd::kS] / Z;
        out.r2 = tot[simd::kR2] / Z;
        out.r3 = tot[simd::kR3] / Z;
        const double mean[6] = {out.A, out.c, out.ell, -out.t / p.alpha + out.r, out.s,
                                out.K};
        int idx = 0;
        for (int a = 0; a < 6; ++a) {
          for (int b = a; b < 6; ++b, ++idx) {
            const double v = glob.second[idx] / Z - mean[a] * mean[b];
            out.cov[a][b] = out.cov[b][a] = v;
          }
        }
        out.rel_err = total_err;
        return true;
      }
      if (!refine_by(cell_err, total_err, opts_.rel_tol)) {
        throw ToleranceNotMet("quadrature: cell budget exhausted (" +
                              std::to_string(cells_.size()) + " cells, error " +
                              std::to_string(total_err) + ")");
      }
    }
  });
  return out;
}

double GaussianMesh::log_partition(const TiltExponent& tilt) { return moments(tilt).log_z; }

TcMomentBundle GaussianMesh::tc_moments(const TcTilt& tilt) {
  if (!(tilt.alpha > 0)) throw std::invalid_argument("tc_moments: alpha must be positive");
  const simd::Kernels& kern = simd::active();
  check_growth([&](const simd::MeshPoints& m, std::size_t nc, double* lw) {
    return kern.tc_logw(m, 0, nc, tilt, lw);
  });
  constexpr int kN = simd::kNumTcMoments;
  TcMomentBundle out;
  run_adaptive(tilt, [&](const TcTilt& p) {
    std::vector<double> cell_out, cell_err, cell_z;
    for (;;) {
      const std::size_t n = cells_.size();
      logw_.resize(n * simd::kCellStride);
      const double mx = kern.tc_logw(view(), 0, n, p, logw_.data());
      if (!(mx > kNegInf)) throw NonIntegrable("tilted integrand vanishes on the mesh");
      cell_out.assign(n * 2 * kN, 0.0);
      simd::TcGlobal glob;
      kern.tc_accumulate(view(), 0, n, logw_.data(), mx, p, cell_out.data(), &glob);
      double tot[kN] = {};
      for (std::size_t c = 0; c < n; ++c) {
        for (int q = 0; q < kN; ++q) tot[q] += cell_out[c * 2 * kN + q];
      }
      double scale[kN];
      scale[0] = safe_scale(tot[0], 1e-300);
      for (int q = 1; q < 5; ++q) scale[q] = safe_scale(glob.abs[q - 1], opts_.abs_tol * scale[0]);
      scale[5] = scale[6] = safe_scale(glob.abs[4], opts_.abs_tol * scale[0]);
      cell_err.assign(n, 0.0);
      cell_z.assign(n, 0.0);
      double total_err = 0.0;
      for (std::size_t c = 0; c < n; ++c) {
        const double* co = &cell_out[c * 2 * kN];
        double e = 0.0;
        for (int q = 0; q < kN; ++q) e = std::max(e, std::abs(co[q] - co[kN + q]) / scale[q]);
        cell_err[c] = e;
        cell_z[c] = co[0];
        total_err += e;
      }
      if (total_err <= opts_.rel_tol) {
        if (boundary_fraction(cell_z, tot[0]) > opts_.tail_tol) return false;
        const double Z = tot[0];
        out.log_z = std::log(Z) + mx;
        out.A = tot[simd::kTcA] / Z;
        out.c = tot[simd::kTcC] / Z;
        out.ell = tot[simd::kTcEll] / Z;
        out.t = tot[simd::kTcT] / Z;
        out.r = {tot[simd::kTcRr] / Z, tot[simd::kTcRi] / Z};
        const double mean[3] = {out.A, out.c, out.ell};
        int idx = 0;
        for (int a = 0; a < 3; ++a) {
          for (int b = a; b < 3; ++b, ++idx) {
            const double v = glob.second[idx] / Z - mean[a] * mean[b];
            out.cov[a][b] = out.cov[b][a] = v;
          }
        }
        out.rel_err = total_err;
        return true;
      }
      if (!refine_by(cell_err, total_err, opts_.rel_tol)) {
        throw ToleranceNotMet("quadrature: cell budget exhausted (" +
                              std::to_string(cells_.size()) + " cells)");
      }
    }
  });
  return out;
}

double GaussianMesh::expect(const std::optional<TiltExponent>& tilt,
                            const std::function<double(double, double)>& f) {
  const simd::Kernels& kern = simd::active();
  if (tilt) {
    check_growth([&](const simd::MeshPoints& m, std::size_t nc, double* lw) {
      return kern.tilt_logw(m, 0, nc, *tilt, lw);
    });
  }
  double result = 0.0;
  const int dummy = 0;
  run_adaptive(dummy, [&](int) {
    std::vector<double> fv, cell_err, cell_z;
    for (;;) {
      const std::size_t n = cells_.size();
      const std::size_t np = n * simd::kCellStride;
      logw_.resize(np);
      double mx;
      if (tilt) {
        mx = kern.tilt_logw(view(), 0, n, *tilt, logw_.data());
      } else {
        mx = kNegInf;
        for (std::size_t i = 0; i < np; ++i) {
          logw_[i] = wK_[i] != 0.0 ? logmu_[i] : kNegInf;
          mx = std::max(mx, logw_[i]);
        }
      }
      if (!(mx > kNegInf)) throw NonIntegrable("integrand vanishes on the mesh");
      fv.resize(np);
      for (std::size_t i = 0; i < np; ++i) fv[i] = logw_[i] > kNegInf ? f(y_[i], ys_[i]) : 0.0;
      double zk = 0, zf = 0, zabs = 0;
      cell_err.assign(n, 0.0);
      cell_z.assign(n, 0.0);
      std::vector<double> ck(2 * n), cg(2 * n);
      for (std::size_t c = 0; c < n; ++c) {
        double k0 = 0, g0 = 0, k1 = 0, g1 = 0;
        for (std::size_t j = 0; j < simd::kCellStride; ++j) {
          const std::size_t i = c * simd::kCellStride + j;
          if (!(logw_[i] > kNegInf)) continue;
          const double e = std::exp(logw_[i] - mx);
          k0 += wK_[i] * e;
          g0 += wG_[i] * e;
          k1 += wK_[i] * e * fv[i];
          g1 += wG_[i] * e * fv[i];
          zabs += wK_[i] * e * std::abs(fv[i]);
        }
        ck[2 * c] = k0;
        ck[2 * c + 1] = k1;
        cg[2 * c] = g0;
        cg[2 * c + 1] = g1;
        zk += k0;
        zf += k1;
        cell_z[c] = k0;
      }
      const double sz = safe_scale(zk, 1e-300);
      const double sf = safe_scale(zabs, opts_.abs_tol * sz);
      double total_err = 0.0;
      for (std::size_t c = 0; c < n; ++c) {
        cell_err[c] = std::max(std::abs(ck[2 * c] - cg[2 * c]) / sz,
                               std::abs(ck[2 * c + 1] - cg[2 * c + 1]) / sf);
        total_err += cell_err[c];
      }
      if (total_err <= opts_.rel_tol) {
        if (boundary_fraction(cell_z, zk) > opts_.tail_tol) return false;
        result = zf / zk;
        return true;
      }
      if (!refine_by(cell_err, total_err, opts_.rel_tol)) {
        throw ToleranceNotMet("quadrature: cell budget exhausted");
      }
    }
  });
  return result;
}

namespace {

WeightLaw collect(std::size_t np, const std::vector<double>& logw, double mx,
                  const std::vector<double>& wK, const std::vector<double>& F,
                  const std::vector<double>& v) {
  WeightLaw out;
  double z = 0.0;
  for (std::size_t i = 0; i < np; ++i) {
    if (!(logw[i] > kNegInf)) continue;
    const double w = wK[i] * std::exp(logw[i] - mx);
    if (!(w > 0)) continue;
    out.F.push_back(F[i]);
    out.w.push_back(w);
    out.vF.push_back(v[i] * F[i]);
    z += w;
  }
  if (out.F.empty()) throw NonIntegrable("weight law: no atoms with positive mass");
  for (double& w : out.w) w /= z;
  out.F_min = *std::min_element(out.F.begin(), out.F.end());
  return out;
}

}  // namespace

WeightLaw GaussianMesh::weight_law(const TiltExponent& tilt) {
  const MomentBundle mb = moments(tilt);  // refines the mesh for this tilt
  const std::size_t n = cells_.size();
  logw_.resize(n * simd::kCellStride);
  const double mx = simd::active().tilt_logw(view(), 0, n, tilt, logw_.data());
  WeightLaw out = collect(n * simd::kCellStride, logw_, mx, wK_, F_, v_);
  out.t_nu = mb.t;
  return out;
}

WeightLaw GaussianMesh::tc_weight_law(const TcTilt& tilt) {
  const TcMomentBundle mb = tc_moments(tilt);
  const std::size_t n = cells_.size();
  logw_.resize(n * simd::kCellStride);
  const double mx = simd::active().tc_logw(view(), 0, n, tilt, logw_.data());
  WeightLaw out = collect(n * simd::kCellStride, logw_, mx, wK_, F_, v_);
  out.t_nu = mb.t;
  return out;
}

WeightLaw GaussianMesh::base_weight_law() {
  const double t = expect(std::nullopt, [this](double y, double ys) {
    return loss_->derived({y, ys}, q_).t;
  });
  const std::size_t np = cells_.size() * simd::kCellStride;
  logw_.resize(np);
  double mx = kNegInf;
  for (std::size_t i = 0; i < np; ++i) {
    logw_[i] = wK_[i] != 0.0 ? logmu_[i] : kNegInf;
    mx = std::max(mx, logw_[i]);
  }
  WeightLaw out = collect(np, logw_, mx, wK_, F_, v_);
  out.t_nu = t;
  return out;
}

void GaussianMesh::for_each_node(const TiltExponent& tilt,
                                 const std::function<void(double, double, double)>& fn) {
  const MomentBundle mb = moments(tilt);
  const std::size_t n = cells_.size();
  logw_.resize(n * simd::kCellStride);
  simd::active().tilt_logw(view(), 0, n, tilt, logw_.data());
  for (std::size_t i = 0; i < n * simd::kCellStride; ++i) {
    if (!(logw_[i] > kNegInf)) continue;
    fn(y_[i], ys_[i], wK_[i] * std::exp(logw_[i] - mb.log_z));
  }
}

void GaussianMesh::for_each_node(const TcTilt& tilt,
                                 const std::function<void(double, double, double)>& fn) {
  const TcMomentBundle mb = tc_moments(tilt);
  const std::size_t n = cells_.size();
  logw_.resize(n * simd::kCellStride);
  simd::active().tc_logw(view(), 0, n, tilt, logw_.data());
  for (std::size_t i = 0; i < n * simd::kCellStride; ++i) {
    if (!(logw_[i] > kNegInf)) continue;
    fn(y_[i], ys_[i], wK_[i] * std::exp(logw_[i] - mb.log_z));
  }
}

}  // namespace kacrice
