#pragma once

// Structured records (JSON) for theory solutions and GD experiments, and the
// theory-vs-experiment comparison. Doubles are written in shortest
// round-trip form and non-finite values as null, so every record re-reads
// bit-for-bit.

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "kacrice/gd_simulator.hpp"
#include "kacrice/variational_minima.hpp"

namespace kacrice {

inline constexpr int kSchemaVersion = 1;

class RecordError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class KeyMismatch : public std::runtime_error {
 public:
  KeyMismatch(const std::string& what, std::vector<std::string> unpaired)
      : std::runtime_error(what), unpaired_(std::move(unpaired)) {}
  const std::vector<std::string>& unpaired() const { return unpaired_; }

 private:
  std::vector<std::string> unpaired_;
};

struct RecordKey {
  double a = 0, alpha = 0, q = 0;
  std::string str() const;
  bool operator==(const RecordKey& o) const;
};

/// Probabilities over fixed bin edges, plus underflow (front) and overflow
/// (back) bins: probs.size() == edges.size() + 1.
struct BinnedLaw {
  std::vector<double> edges;
  std::vector<double> probs;
};

/// Quantiles of y, y* and |y| - |y*| at fixed levels.
struct LabelQuantiles {
  std::vector<double> levels, y, y_star, gap;
};

std::vector<double> default_F_edges();
std::vector<double> default_quantile_levels();

BinnedLaw bin_law(const std::vector<double>& values, const std::vector<double>& weights,
                  const std::vector<double>& edges);
/// Weighted quantiles (weights may be empty for equal weights).
std::vector<double> weighted_quantiles(std::vector<double> values, std::vector<double> weights,
                                       const std::vector<double>& levels);
LabelQuantiles label_quantiles(const std::vector<double>& y, const std::vector<double>& y_star,
                               const std::vector<double>& weights,
                               const std::vector<double>& levels);

struct BandSummary {
  double e_min = 0, e_star = 0, e_max = 0, sigma_at_star = 0;
  bool empty = true;
};

struct TheoryRecord {
  RecordKey key;
  nlohmann::json config;  // resolved configuration of the producing run
  ComplexitySolution solution;
  std::optional<BandSummary> band;
  // Spectral data of the label law (minima / fin modes)
  double d_alpha = std::nan("");
  double w_min = std::nan("");   // shifted bulk edge
  double w_star = std::nan("");  // shifted outlier, NaN if none
  std::vector<double> rho_w, rho_density;
  BinnedLaw F;
  LabelQuantiles labels;
};

/// Two-piece grid: fine on [lo, knee] where the edge and bulk sit, coarse on
/// [knee, hi] for the heavy tail of F.
struct RhoGridOptions {
  double lo = -1.0, knee = 20.0, hi = 200.0;
  int core_points = 4201, tail_points = 361;
};

/// Builds the theory record of a converged minima/fin solution: outlier
/// analysis, shifted Hessian density, F law and label quantiles.
TheoryRecord make_theory_record(GaussianMesh& mesh, const ComplexitySolution& sol,
                                const std::optional<EnergyBand>& band,
                                const RhoGridOptions& rho = {});

struct ExperimentRecord {
  RecordKey key;
  nlohmann::json config;
  std::uint64_t master_seed = 0;
  int runs = 0, successes = 0;
  // trapped runs inside the latitude band
  std::vector<double> energies, overlaps;
  std::vector<double> eigenvalues;  // pooled
  std::vector<double> min_eigs, min_overlaps;
  BinnedLaw F;
  LabelQuantiles labels;
};

/// One record per (alpha, q0) of a batch.
std::vector<ExperimentRecord> make_experiment_records(const BatchResult& batch,
                                                      const GDConfig& base);

nlohmann::json to_json(const ComplexitySolution& s);
ComplexitySolution solution_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TheoryRecord& r);
TheoryRecord theory_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentRecord& r);
ExperimentRecord experiment_from_json(const nlohmann::json& j);

struct ComparisonRow {
  RecordKey key;
  double mean_energy = 0;
  bool energy_in_band = false;
  double margin_low = 0, margin_high = 0;  // mean - e_min, e_max - mean
  double spectral_ks = std::nan("");
  double F_tv = 0;
  double label_quantile_dist = 0;  // max |quantile difference|
  bool theory_outlier = false, experiment_outlier = false;
  double outlier_fraction = std::nan("");
  bool outlier_agree() const { return theory_outlier == experiment_outlier; }
};

struct CompareOptions {
  double outlier_margin = 0.05;   // below the predicted edge
  double outlier_overlap = 0.1;   // |v_min . w~| threshold
};

/// Either side may be a theory record (as {"kind": "theory"}) or an
/// experiment record; a theory record on the right is treated as an exact
/// observation (self-comparison gives zero distances).
std::vector<ComparisonRow> compare_records(const std::vector<nlohmann::json>& theory,
                                           const std::vector<nlohmann::json>& observed,
                                           const CompareOptions& opts = {});

nlohmann::json to_json(const ComparisonRow& r);
void write_comparison_csv(std::ostream& os, const std::vector<ComparisonRow>& rows);

/// Kolmogorov distance between a sample and a CDF given on a grid
/// (linear interpolation; grid CDF taken unnormalized).
double ks_sample_vs_grid(std::vector<double> sample, const std::vector<double>& w,
                         const std::vector<double>& density);

/// Records are written either singly or as an array; this always returns a list.
std::vector<nlohmann::json> record_list(const nlohmann::json& j);

}  // namespace kacrice
