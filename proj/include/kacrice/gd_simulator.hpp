#pragma once

// Finite-d counterpart: full-batch GD on
//   R(theta) = (1/n) sum_i l(x_i . theta, x_i . theta*),  x_i ~ N(0, I_d),
// with an overlap-pinned burn-in (theta projected back onto
// {|theta| = 1, theta . theta* = q0} after each of the first t_C steps)
// followed by T free steps.

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace kacrice {

class NaNEncountered : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DegenerateOrth : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Counter-based generator: output k of stream s is the SplitMix64 finalizer
/// applied to key(seed, s) + k * golden. Streams are independent by
/// construction and can be split without shared state. Normals use
/// Box-Muller on pairs of uniforms, so sequences are library-independent.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0);
  CounterRng split(std::uint64_t stream) const;
  std::uint64_t next_u64();
  double uniform();  // (0, 1)
  double normal();
  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0;
  bool has_spare_ = false;
};

struct GDConfig {
  int d = 512;
  double alpha = 6.5;  // n = round(alpha d)
  double a = 0.01;
  double eta = 2e-4;
  double q0 = 0.0;
  long t_C = 60000;
  long T = -1;  // < 0: 12000 log2(d)
  std::uint64_t seed = 0;
  double success_threshold = 0.99;
  double latitude_half_width = 0.05;
  bool normalize_signal = true;
  int trace_every = 100;

  int n() const;
  long free_steps() const;
  void validate() const;  // throws std::invalid_argument
};

struct Instance {
  int d = 0, n = 0;
  std::vector<double> X;  // row-major n x d
  std::vector<double> theta_star;
};

Instance generate_instance(int d, int n, std::uint64_t seed, bool normalize_signal = true);

struct GDRunResult {
  bool success = false;
  double final_overlap = 0;  // theta . theta* on the raw iterate
  double final_energy = 0;
  std::vector<double> overlap_trace, energy_trace;  // every trace_every steps
  std::vector<double> theta;                         // terminal iterate
  long wall_steps = 0;
  long energy_increases = 0;  // steps with R_{t+1} > R_t + 1e-9
  double max_projection_error = 0;  // burn-in constraint violation
};

/// Initial point: q0 theta* + orthogonal N(0, I/d) part drawn from the
/// config seed (stream 1). q0 = 1 starts at theta* and skips the burn-in.
GDRunResult run_gd(const GDConfig& cfg, const Instance& inst);

/// theta <- q0 theta* + sqrt(1-q0^2) theta_perp/|theta_perp|; returns the
/// constraint error after projection.
double project_overlap(std::vector<double>& theta, const std::vector<double>& theta_star,
                       double q0);

struct HessianResult {
  std::vector<double> eigenvalues;  // sorted, d-1 of them, shifted convention
  double t_shift = 0;               // (1/n) sum y dl
  double min_overlap = 0;           // |v_min . w~|
};

/// Hessian restricted to theta-perp (Householder basis), including the
/// spherical shift -(1/n) sum y dl. Labels are taken at theta/|theta| when
/// renormalize is set (the convention of the theory density), else at the
/// raw iterate (where a Euclidean critical point has a vanishing shift).
HessianResult hessian_at(const std::vector<double>& theta, const Instance& inst, double a,
                         bool renormalize = true);

/// Label pairs (x_i . theta/|theta|, x_i . theta*/|theta*|).
void labels_at(const std::vector<double>& theta, const Instance& inst, std::vector<double>& y,
               std::vector<double>& y_star);

struct Histogram2D {
  double lo = -4, hi = 4;
  int bins = 40;
  std::vector<double> counts;  // bins x bins, row = y, column = y*
};

struct Histogram1D {
  double lo = 0, hi = 0;
  int bins = 0;
  std::vector<double> counts;
};

struct EmpiricalLaws {
  Histogram2D labels;
  Histogram1D F;
  double energy = 0, overlap = 0;
};

EmpiricalLaws empirical_laws(const std::vector<double>& theta, const Instance& inst, double a,
                             int label_bins = 40, double label_range = 4.0, int f_bins = 60);

double empirical_energy(const std::vector<double>& theta, const Instance& inst, double a);

struct RunRecord {
  double alpha = 0, q0 = 0;
  int replicate = 0;
  std::uint64_t seed = 0;
  bool success = false;
  double final_overlap = 0, final_energy = 0;
  long energy_increases = 0, wall_steps = 0;
  std::vector<double> eigenvalues;  // when hessians are requested
  double t_shift = 0, min_overlap = 0;
  std::vector<double> label_y, label_y_star;  // when hessians are requested
  std::string error;
};

struct BatchRow {
  double alpha = 0, q0 = 0;
  int replicates = 0;
  double success_rate = 0, err = 0;
  double mean_qT_fail = 0;
  double mean_energy = 0, energy_err = 0;  // trapped minima in the latitude band
  int trapped_in_band = 0;
};

struct BatchOptions {
  int replicates = 100;
  std::uint64_t master_seed = 0;
  bool hessians = false;
  bool renormalize_hessian = true;
  int workers = 0;  // 0: default_workers()
};

struct BatchResult {
  std::vector<BatchRow> rows;
  std::vector<RunRecord> runs;
  std::uint64_t master_seed = 0;
};

/// Replicate r of grid point (i, j) uses seed CounterRng(master).split(i).
/// split(j).split(r).next_u64(), independent of the worker count.
BatchResult batch_experiment(const GDConfig& base, const std::vector<double>& alphas,
                             const std::vector<double>& q0s, const BatchOptions& opts);

void write_batch_csv(std::ostream& os, const BatchResult& b);
void write_runs_csv(std::ostream& os, const BatchResult& b);

}  // namespace kacrice
