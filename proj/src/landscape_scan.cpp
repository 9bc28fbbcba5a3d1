#include "kacrice/landscape_scan.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <memory>
#include <mutex>
#include <ostream>
#include <thread>

#include "kacrice/bisect.hpp"

namespace kacrice {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void add_flag(std::string& flags, const std::string& f) {
  if (!flags.empty()) flags += ';';
  flags += f;
}

std::shared_ptr<PhaseRetrievalLoss> make_pr(double a) {
  return std::make_shared<PhaseRetrievalLoss>(a);
}

// Free-e solve with warm start and a cold-start fallback.
ComplexitySolution solve_free(GaussianMesh& mesh, double alpha, Mode mode,
                              const ComplexitySolution* warm, const SolverOptions& opts) {
  if (warm) {
    try {
      ComplexitySolution s = complexity(mesh, std::nullopt, alpha, mode, warm, opts);
      if (s.converged) return s;
    } catch (const std::exception&) {
    }
  }
  return complexity(mesh, std::nullopt, alpha, mode, nullptr, opts);
}

ComplexitySolution solve_tc(GaussianMesh& mesh, double alpha, const ComplexitySolution* warm,
                            const TcOptions& opts) {
  if (warm) {
    try {
      return complexity_tc(mesh, std::nullopt, alpha, critical_init_from(*warm), opts);
    } catch (const std::exception&) {
    }
  }
  return complexity_tc(mesh, std::nullopt, alpha, std::nullopt, opts);
}

double margin_at_edge(GaussianMesh& mesh, const ComplexitySolution& star, double dir,
                      const ScanOptions& opts) {
  ComplexitySolution at;
  band_edge(mesh, star, dir, &at, opts.band_tol, opts.solver);
  return bbp_margin(mesh, at);
}

std::function<double(double)> bbp_predicate_from(GaussianMesh& mesh, EnergyClass cls,
                                                 const ScanOptions& opts,
                                                 std::shared_ptr<ComplexitySolution> last) {
  return [&mesh, cls, opts, last](double alpha) {
    ComplexitySolution s = solve_free(mesh, alpha, Mode::kTilde0, last->converged ? last.get() : nullptr,
                                      opts.solver);
    *last = s;
    if (cls == EnergyClass::kTypical) return bbp_margin(mesh, s);
    if (!(s.sigma > 0)) return kNaN;  // no band beyond trivialization
    return margin_at_edge(mesh, s, cls == EnergyClass::kHigh ? +1.0 : -1.0, opts);
  };
}

std::function<double(double)> sigma_predicate_from(GaussianMesh& mesh, Mode mode,
                                                   const ScanOptions& opts,
                                                   std::shared_ptr<ComplexitySolution> last) {
  return [&mesh, mode, opts, last](double alpha) {
    ComplexitySolution s;
    if (mode == Mode::kTC) {
      s = solve_tc(mesh, alpha, last->converged ? last.get() : nullptr, opts.tc);
    } else {
      s = solve_free(mesh, alpha, mode, last->converged ? last.get() : nullptr, opts.solver);
    }
    *last = s;
    return s.sigma;
  };
}

// Refines the first sign change of vals along the grid; NaN if none.
double refine(const std::vector<double>& grid, const std::vector<double>& vals,
              const std::vector<ComplexitySolution>& warm,
              const std::function<std::function<double(double)>(
                  std::shared_ptr<ComplexitySolution>)>& make_pred,
              double tol, std::string& flags, const char* name) {
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    if (std::isnan(vals[i]) || std::isnan(vals[i + 1])) continue;
    if (std::signbit(vals[i]) == std::signbit(vals[i + 1])) continue;
    try {
      auto last = std::make_shared<ComplexitySolution>(warm[i]);
      return threshold_bisect(make_pred(last), grid[i], grid[i + 1], tol);
    } catch (const std::exception& ex) {
      add_flag(flags, std::string(name) + "_bisect_failed");
      // fall back to linear interpolation on the grid
      const double t = vals[i] / (vals[i] - vals[i + 1]);
      return grid[i] + t * (grid[i + 1] - grid[i]);
    }
  }
  return kNaN;
}

struct RowResult {
  std::vector<PhaseDiagramCell> cells;
  ThresholdRow thresholds;
};

RowResult scan_row(double a, double q, const std::vector<double>& alphas,
                   const ScanOptions& opts) {
  RowResult out;
  GaussianMesh mesh(make_pr(a), q, opts.quad);
  const std::size_t n = alphas.size();
  std::vector<ComplexitySolution> minima(n), fin(n), tc(n);
  std::vector<double> s0(n, kNaN), sf(n, kNaN), stc(n, kNaN);
  std::vector<double> dt(n, kNaN), dl(n, kNaN), dh(n, kNaN);
  const ComplexitySolution* wm = nullptr;
  const ComplexitySolution* wt = nullptr;
  for (std::size_t i = 0; i < n; ++i) {
    PhaseDiagramCell c;
    c.a = a;
    c.q = q;
    c.alpha = alphas[i];
    c.sigma_tilde0 = c.sigma_fin = c.sigma_tc = kNaN;
    c.e_star = c.e_min = c.e_max = kNaN;
    c.d_alpha_typ = c.d_alpha_low = c.d_alpha_high = kNaN;
    try {
      minima[i] = solve_free(mesh, c.alpha, Mode::kTilde0, wm, opts.solver);
      wm = &minima[i];
      c.sigma_tilde0 = s0[i] = minima[i].sigma;
      c.e_star = minima[i].energy;
      if (!minima[i].converged) add_flag(c.flags, "tilde0_not_converged");
      c.d_alpha_typ = dt[i] = bbp_margin(mesh, minima[i]);
    } catch (const std::exception& ex) {
      add_flag(c.flags, "tilde0_failed");
    }
    try {
      fin[i] = solve_free(mesh, c.alpha, Mode::kFin, wm, opts.solver);
      c.sigma_fin = sf[i] = fin[i].sigma;
      if (!fin[i].converged) add_flag(c.flags, "fin_not_converged");
    } catch (const std::exception&) {
      add_flag(c.flags, "fin_failed");
    }
    if (opts.with_tc) {
      try {
        tc[i] = solve_tc(mesh, c.alpha, wt, opts.tc);
        wt = &tc[i];
        c.sigma_tc = stc[i] = tc[i].sigma;
      } catch (const std::exception&) {
        add_flag(c.flags, "tc_failed");
      }
    }
    if (opts.with_bands && minima[i].converged && minima[i].sigma > 0) {
      try {
        ComplexitySolution at;
        c.e_max = band_edge(mesh, minima[i], +1.0, &at, opts.band_tol, opts.solver);
        c.d_alpha_high = dh[i] = bbp_margin(mesh, at);
        c.e_min = band_edge(mesh, minima[i], -1.0, &at, opts.band_tol, opts.solver);
        c.d_alpha_low = dl[i] = bbp_margin(mesh, at);
      } catch (const std::exception&) {
        add_flag(c.flags, "band_failed");
      }
    }
    // bound chain Sigma_tilde0 <= Sigma_fin <= Sigma_TC
    if (c.sigma_tilde0 > c.sigma_fin + 1e-6) add_flag(c.flags, "chain_tilde0_fin");
    if (opts.with_tc && c.sigma_fin > c.sigma_tc + 1e-4) add_flag(c.flags, "chain_fin_tc");
    if (c.flags.empty()) c.flags = "ok";
    out.cells.push_back(c);
  }

  ThresholdRow& t = out.thresholds;
  t.a = a;
  t.q = q;
  t.alpha_triv_min = t.alpha_triv_fin = t.alpha_triv_tc = kNaN;
  t.alpha_bbp_typ = t.alpha_bbp_low = t.alpha_bbp_high = kNaN;
  if (opts.with_thresholds) {
    std::string flags;
    auto sig = [&](Mode m) {
      return [&mesh, m, &opts](std::shared_ptr<ComplexitySolution> last) {
        return sigma_predicate_from(mesh, m, opts, last);
      };
    };
    auto bbp = [&](EnergyClass cls) {
      return [&mesh, cls, &opts](std::shared_ptr<ComplexitySolution> last) {
        return bbp_predicate_from(mesh, cls, opts, last);
      };
    };
    t.alpha_triv_min = refine(alphas, s0, minima, sig(Mode::kTilde0), opts.threshold_tol, flags,
                              "triv_min");
    t.alpha_triv_fin = refine(alphas, sf, minima, sig(Mode::kFin), opts.threshold_tol, flags,
                              "triv_fin");
    if (opts.with_tc) {
      t.alpha_triv_tc = refine(alphas, stc, tc, sig(Mode::kTC), opts.threshold_tol, flags,
                               "triv_tc");
    }
    t.alpha_bbp_typ = refine(alphas, dt, minima, bbp(EnergyClass::kTypical), opts.threshold_tol,
                             flags, "bbp_typ");
    if (opts.with_bands) {
      t.alpha_bbp_low = refine(alphas, dl, minima, bbp(EnergyClass::kLow), opts.threshold_tol,
                               flags, "bbp_low");
      t.alpha_bbp_high = refine(alphas, dh, minima, bbp(EnergyClass::kHigh), opts.threshold_tol,
                                flags, "bbp_high");
    }
    if (!flags.empty()) {
      for (auto& c : out.cells) {
        if (c.flags == "ok") c.flags.clear();
        add_flag(c.flags, flags);
      }
    }
  }
  return out;
}

template <class T, class Fn>
std::vector<T> run_pool(std::size_t n, int workers, Fn fn) {
  std::vector<T> out(n);
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (std::size_t i = next++; i < n; i = next++) out[i] = fn(i);
  };
  const int w = std::max(1, std::min<int>(workers, static_cast<int>(n)));
  std::vector<std::thread> pool;
  for (int k = 1; k < w; ++k) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();
  return out;
}

void put(std::ostream& os, double v) {
  if (std::isnan(v)) {
    os << "nan";
  } else {
    os << v;
  }
}

}  // namespace

double threshold_bisect(const std::function<double(double)>& predicate, double lo, double hi,
                        double tol) {
  if (!(hi > lo) || !(tol > 0)) throw std::invalid_argument("threshold_bisect: bad bracket");
  return bisect_sign_change<NoSignChange>(predicate, lo, hi, tol);
}

int default_workers() {
  if (const char* env = std::getenv("KACRICE_WORKERS")) {
    const int w = std::atoi(env);
    if (w >= 1) return w;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

double bbp_margin(GaussianMesh& mesh, const ComplexitySolution& sol) {
  const WeightLaw nu = mesh.weight_law(label_law(sol));
  return edge_functionals(nu, sol.alpha, mesh.q()).d_alpha;
}

const char* energy_class_name(EnergyClass c) {
  switch (c) {
    case EnergyClass::kTypical: return "typ";
    case EnergyClass::kLow: return "low";
    case EnergyClass::kHigh: return "high";
  }
  return "?";
}

std::function<double(double)> bbp_predicate(GaussianMesh& mesh, EnergyClass cls,
                                            const ScanOptions& opts) {
  return bbp_predicate_from(mesh, cls, opts, std::make_shared<ComplexitySolution>());
}

std::function<double(double)> sigma_predicate(GaussianMesh& mesh, Mode mode,
                                              const ScanOptions& opts) {
  return sigma_predicate_from(mesh, mode, opts, std::make_shared<ComplexitySolution>());
}

PhaseDiagram phase_diagram(double a, const std::vector<double>& alpha_grid,
                           const std::vector<double>& q_grid, const ScanOptions& opts) {
  if (!(a > 0)) throw std::invalid_argument("phase_diagram: a must be positive");
  if (!std::is_sorted(alpha_grid.begin(), alpha_grid.end()) ||
      !std::is_sorted(q_grid.begin(), q_grid.end())) {
    throw std::invalid_argument("phase_diagram: grids must be sorted");
  }
  for (double q : q_grid) {
    if (!(q >= 0 && q <= 0.95)) throw std::invalid_argument("phase_diagram: q must be in [0, 0.95]");
  }
  const int workers = opts.workers > 0 ? opts.workers : default_workers();
  std::vector<RowResult> rows = run_pool<RowResult>(
      q_grid.size(), workers, [&](std::size_t i) { return scan_row(a, q_grid[i], alpha_grid, opts); });
  PhaseDiagram pd;
  for (auto& r : rows) {
    pd.cells.insert(pd.cells.end(), r.cells.begin(), r.cells.end());
    pd.thresholds.push_back(r.thresholds);
  }
  return pd;
}

void write_cells_csv(std::ostream& os, const std::vector<PhaseDiagramCell>& cells) {
  const auto old = os.precision(17);
  os << "a,alpha,q,sigma_tilde0,sigma_fin,sigma_tc,e_star,e_min,e_max,d_alpha_typ,d_alpha_low,"
        "d_alpha_high,flags\n";
  for (const auto& c : cells) {
    for (double v : {c.a, c.alpha, c.q, c.sigma_tilde0, c.sigma_fin, c.sigma_tc, c.e_star, c.e_min,
                     c.e_max, c.d_alpha_typ, c.d_alpha_low, c.d_alpha_high}) {
      put(os, v);
      os << ',';
    }
    os << c.flags << '\n';
  }
  os.precision(old);
}

void write_thresholds_csv(std::ostream& os, const std::vector<ThresholdRow>& rows) {
  const auto old = os.precision(17);
  os << "a,q,alpha_triv_min,alpha_triv_fin,alpha_triv_tc,alpha_bbp_typ,alpha_bbp_low,"
        "alpha_bbp_high\n";
  for (const auto& r : rows) {
    const double v[] = {r.a, r.q, r.alpha_triv_min, r.alpha_triv_fin, r.alpha_triv_tc,
                        r.alpha_bbp_typ, r.alpha_bbp_low, r.alpha_bbp_high};
    for (std::size_t i = 0; i < 8; ++i) {
      if (i) os << ',';
      put(os, v[i]);
    }
    os << '\n';
  }
  os.precision(old);
}

OverlapBand high_overlap_band(double a, double alpha, std::optional<double> e_fixed,
                              const std::vector<double>& q_grid, const ScanOptions& opts) {
  if (e_fixed && !(*e_fixed > 0)) throw std::invalid_argument("high_overlap_band: e must be > 0");
  const int workers = opts.workers > 0 ? opts.workers : default_workers();
  OverlapBand band;
  band.points = run_pool<OverlapPoint>(q_grid.size(), workers, [&](std::size_t i) {
    OverlapPoint p;
    p.q = q_grid[i];
    try {
      GaussianMesh mesh(make_pr(a), p.q, opts.quad);
      ComplexitySolution s;
      if (e_fixed) {
        // pinned energy: start from the free-e point of the same q
        const ComplexitySolution free = complexity(mesh, std::nullopt, alpha, Mode::kTilde0,
                                                   nullptr, opts.solver);
        s = complexity(mesh, e_fixed, alpha, Mode::kTilde0, &free, opts.solver);
      } else {
        s = complexity(mesh, std::nullopt, alpha, Mode::kTilde0, nullptr, opts.solver);
      }
      p.sigma = s.sigma;
      p.ok = s.converged;
      if (!p.ok) p.error = "not converged";
    } catch (const std::exception& ex) {
      p.sigma = kNaN;
      p.error = ex.what();
    }
    return p;
  });
  for (const auto& p : band.points) {
    if (p.ok && p.sigma > 0) {
      band.q_lo = std::min(band.q_lo, p.q);
      band.q_hi = std::max(band.q_hi, p.q);
    }
  }
  return band;
}

}  // namespace kacrice
