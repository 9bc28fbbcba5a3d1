#pragma once

// Sweeps over (alpha, q, e): trivialization thresholds, BBP threshold curves
// and the phase-diagram table. Each q-row is one continuation in alpha owned
// by a single worker; rows are distributed over a thread pool.

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "kacrice/bbp_analyzer.hpp"
#include "kacrice/variational_critical.hpp"
#include "kacrice/variational_minima.hpp"

namespace kacrice {

/// Bisection for the sign change of `predicate` on [lo, hi]. Throws
/// NoSignChange when the endpoints share a sign.
double threshold_bisect(const std::function<double(double)>& predicate, double lo, double hi,
                        double tol = 1e-2);

/// Worker count: KACRICE_WORKERS if set (>= 1), else the hardware count.
int default_workers();

struct ScanOptions {
  bool with_tc = true;          // Sigma_TC column and threshold
  bool with_bands = true;       // energy bands and d_alpha at the band edges
  bool with_thresholds = true;  // refine sign changes along alpha by bisection
  double threshold_tol = 1e-2;
  double band_tol = 1e-5;
  int workers = 0;              // 0: default_workers()
  QuadratureOptions quad;
  SolverOptions solver;
  TcOptions tc;
};

struct PhaseDiagramCell {
  double a = 0, alpha = 0, q = 0;
  double sigma_tilde0 = 0, sigma_fin = 0, sigma_tc = 0;
  double e_star = 0, e_min = 0, e_max = 0;
  double d_alpha_typ = 0, d_alpha_low = 0, d_alpha_high = 0;
  std::string flags;  // ';'-separated; "ok" when nothing to report
};

struct ThresholdRow {
  double a = 0, q = 0;
  // NaN when no sign change was found on the alpha grid
  double alpha_triv_min = 0, alpha_triv_fin = 0, alpha_triv_tc = 0;
  double alpha_bbp_typ = 0, alpha_bbp_low = 0, alpha_bbp_high = 0;
};

struct PhaseDiagram {
  std::vector<PhaseDiagramCell> cells;  // sorted by (q, alpha)
  std::vector<ThresholdRow> thresholds;  // sorted by q
};

PhaseDiagram phase_diagram(double a, const std::vector<double>& alpha_grid,
                           const std::vector<double>& q_grid, const ScanOptions& opts = {});

void write_cells_csv(std::ostream& os, const std::vector<PhaseDiagramCell>& cells);
void write_thresholds_csv(std::ostream& os, const std::vector<ThresholdRow>& rows);

/// d_alpha of the label law at a solution (minima/fin modes).
double bbp_margin(GaussianMesh& mesh, const ComplexitySolution& sol);

/// Energy class for BBP thresholds.
enum class EnergyClass { kTypical, kLow, kHigh };
const char* energy_class_name(EnergyClass c);

/// d_alpha(alpha) for local minima of the given energy class at fixed q; the
/// returned callable re-solves (with warm starts) at every alpha.
std::function<double(double)> bbp_predicate(GaussianMesh& mesh, EnergyClass cls,
                                            const ScanOptions& opts = {});

/// max_e Sigma(q, e, alpha) as a function of alpha (minima or fin saddles).
std::function<double(double)> sigma_predicate(GaussianMesh& mesh, Mode mode,
                                              const ScanOptions& opts = {});

struct OverlapPoint {
  double q = 0, sigma = 0;
  bool ok = false;
  std::string error;
};

struct OverlapBand {
  std::vector<OverlapPoint> points;
  // positive-complexity q-interval (q_lo > q_hi when empty)
  double q_lo = 1, q_hi = 0;
};

/// Sigma_tilde0(q, e_fixed) over q (e_fixed = nullopt: free e).
OverlapBand high_overlap_band(double a, double alpha, std::optional<double> e_fixed,
                              const std::vector<double>& q_grid, const ScanOptions& opts = {});

}  // namespace kacrice
