#include "kacrice/gd_simulator.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>
#include <atomic>

#include "kacrice/landscape_scan.hpp"
#include "kacrice/loss_model.hpp"
#include "kacrice/simd/kernels.hpp"

namespace kacrice {
namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

// Phase-retrieval loss and its first derivative, inlined for the GD loop.
inline double pr_loss(double y, double ys, double inv) {
  const double r = y * y - ys * ys;
  return r * r * inv;
}
inline double pr_d1(double y, double ys, double inv) { return 4.0 * y * (y * y - ys * ys) * inv; }

}  // namespace

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t stream)
    : key_(mix64(mix64(seed) ^ (stream * kGolden + 0x632be59bd9b4e019ULL))) {}

CounterRng CounterRng::split(std::uint64_t stream) const { return CounterRng(key_, stream); }

std::uint64_t CounterRng::next_u64() { return mix64(key_ + (++counter_) * kGolden); }

double CounterRng::uniform() {
  // 53 random bits, shifted off zero
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double CounterRng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = uniform();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  spare_ = r * std::sin(2.0 * M_PI * u2);
  has_spare_ = true;
  return r * std::cos(2.0 * M_PI * u2);
}

int GDConfig::n() const { return static_cast<int>(std::lround(alpha * d)); }

long GDConfig::free_steps() const {
  return T >= 0 ? T : static_cast<long>(std::llround(12000.0 * std::log2(static_cast<double>(d))));
}

void GDConfig::validate() const {
  auto fail = [](const std::string& m) { throw std::invalid_argument("GDConfig: " + m); };
  if (d < 2) fail("d must be >= 2");
  if (!(alpha > 1)) fail("alpha must exceed 1");
  if (!(a > 0)) fail("a must be positive");
  if (!(eta > 0)) fail("eta must be positive");
  if (!(q0 >= 0 && q0 <= 1)) fail("q0 must be in [0, 1]");
  if (t_C < 0) fail("t_C must be >= 0");
  if (!(success_threshold > 0 && success_threshold <= 1)) fail("success_threshold in (0, 1]");
  if (!(latitude_half_width > 0)) fail("latitude_half_width must be positive");
  if (trace_every < 1) fail("trace_every must be >= 1");
}

Instance generate_instance(int d, int n, std::uint64_t seed, bool normalize_signal) {
  if (d < 2 || n < 1) throw std::invalid_argument("generate_instance: bad sizes");
  Instance inst;
  inst.d = d;
  inst.n = n;
  CounterRng data = CounterRng(seed).split(0);
  inst.X.resize(static_cast<std::size_t>(n) * d);
  for (double& v : inst.X) v = data.normal();
  CounterRng sig = CounterRng(seed).split(2);
  inst.theta_star.resize(d);
  const double sd = 1.0 / std::sqrt(static_cast<double>(d));
  for (double& v : inst.theta_star) v = sd * sig.normal();
  if (normalize_signal) {
    const double nr = norm(inst.theta_star);
    for (double& v : inst.theta_star) v /= nr;
  }
  return inst;
}

double project_overlap(std::vector<double>& theta, const std::vector<double>& ts, double q0) {
  // the pinned direction is theta*/|theta*|
  const double ns = norm(ts);
  const double ov = dot(theta, ts) / ns;
  std::vector<double> perp(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) perp[i] = theta[i] - ov * ts[i] / ns;
  const double np = norm(perp);
  if (np < 1e-12) throw DegenerateOrth("project_overlap: |theta_perp| < 1e-12");
  const double s = std::sqrt(std::max(0.0, 1.0 - q0 * q0)) / np;
  for (std::size_t i = 0; i < theta.size(); ++i) theta[i] = q0 * ts[i] / ns + s * perp[i];
  return std::max(std::abs(norm(theta) - 1.0), std::abs(dot(theta, ts) / ns - q0));
}

double empirical_energy(const std::vector<double>& theta, const Instance& inst, double a) {
  const simd::Kernels& k = simd::active();
  std::vector<double> y(inst.n), ys(inst.n);
  k.matvec(inst.X.data(), inst.n, inst.d, theta.data(), y.data());
  k.matvec(inst.X.data(), inst.n, inst.d, inst.theta_star.data(), ys.data());
  double e = 0.0;
  for (int i = 0; i < inst.n; ++i) e += pr_loss(y[i], ys[i], 1.0 / (a + ys[i] * ys[i]));
  return e / inst.n;
}

GDRunResult run_gd(const GDConfig& cfg, const Instance& inst) {
  cfg.validate();
  if (inst.d != cfg.d || inst.n != cfg.n()) {
    throw std::invalid_argument("run_gd: instance does not match the configuration");
  }
  const int d = inst.d, n = inst.n;
  const simd::Kernels& k = simd::active();
  const std::vector<double>& ts = inst.theta_star;
  const double ns = norm(ts);

  std::vector<double> theta(d);
  const bool at_signal = cfg.q0 >= 1.0;
  if (at_signal) {
    for (int j = 0; j < d; ++j) theta[j] = ts[j] / ns;
  } else {
    CounterRng init = CounterRng(cfg.seed).split(1);
    const double sd = 1.0 / std::sqrt(static_cast<double>(d));
    for (double& v : theta) v = sd * init.normal();
    const double ov = dot(theta, ts) / ns;
    for (int j = 0; j < d; ++j) theta[j] += (cfg.q0 - ov) * ts[j] / ns;
  }

  std::vector<double> ys(n), inv(n), y(n), w(n), grad(d);
  k.matvec(inst.X.data(), n, d, ts.data(), ys.data());
  for (int i = 0; i < n; ++i) inv[i] = 1.0 / (cfg.a + ys[i] * ys[i]);

  GDRunResult res;
  const long burn = at_signal ? 0 : cfg.t_C;
  if (burn > 0) res.max_projection_error = project_overlap(theta, ts, cfg.q0);
  const long total = burn + cfg.free_steps();
  double prev_e = std::numeric_limits<double>::infinity();
  long step = 0;
  for (; step <= total; ++step) {
    k.matvec(inst.X.data(), n, d, theta.data(), y.data());
    double e = 0.0;
    for (int i = 0; i < n; ++i) {
      e += pr_loss(y[i], ys[i], inv[i]);
      w[i] = pr_d1(y[i], ys[i], inv[i]) / n;
    }
    e /= n;
    if (!std::isfinite(e)) {
      std::ostringstream msg;
      msg << "run_gd: non-finite energy at step " << step;
      throw NaNEncountered(msg.str());
    }
    // the projection can raise R during burn-in; count free steps only
    if (step > burn && e > prev_e + 1e-9) ++res.energy_increases;
    prev_e = e;
    if (step % cfg.trace_every == 0 || step == total) {
      res.overlap_trace.push_back(dot(theta, ts) / ns);
      res.energy_trace.push_back(e);
    }
    if (step == total) {
      res.final_energy = e;
      break;
    }
    k.matvec_t(inst.X.data(), n, d, w.data(), grad.data());
    for (int j = 0; j < d; ++j) theta[j] -= cfg.eta * grad[j];
    if (step < burn) {
      res.max_projection_error =
          std::max(res.max_projection_error, project_overlap(theta, ts, cfg.q0));
    }
  }
  res.wall_steps = step;
  res.final_overlap = dot(theta, ts) / ns;
  res.success = std::abs(res.final_overlap) > cfg.success_threshold;
  res.theta = std::move(theta);
  return res;
}

HessianResult hessian_at(const std::vector<double>& theta_in, const Instance& inst, double a,
                         bool renormalize) {
  const int d = inst.d, n = inst.n;
  if (static_cast<int>(theta_in.size()) != d) throw std::invalid_argument("hessian_at: size");
  const double nt = norm(theta_in);
  if (!(nt > 0)) throw std::invalid_argument("hessian_at: theta = 0");
  Eigen::VectorXd th = Eigen::Map<const Eigen::VectorXd>(theta_in.data(), d) / nt;
  Eigen::VectorXd ts = Eigen::Map<const Eigen::VectorXd>(inst.theta_star.data(), d);
  ts /= ts.norm();
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const RowMat> X(inst.X.data(), n, d);
  const Eigen::VectorXd y = renormalize ? (X * th).eval() : (X * th * nt).eval();
  const Eigen::VectorXd ys = X * ts;
  PhaseRetrievalLoss loss(a);
  Eigen::VectorXd F(n);
  double t = 0.0;
  for (int i = 0; i < n; ++i) {
    F[i] = loss.second_deriv({y[i], ys[i]});
    t += y[i] * loss.first_deriv({y[i], ys[i]});
  }
  t /= n;
  // Householder reflection Q with Q th = -s e_0; columns 1..d-1 of X Q span
  // the projections onto theta-perp.
  Eigen::VectorXd u = th;
  const double s = th[0] >= 0 ? 1.0 : -1.0;
  u[0] += s;
  const double uu = u.squaredNorm();
  auto reflect_rows = [&](const Eigen::MatrixXd& M) {  // M Q
    return (M - (2.0 / uu) * (M * u) * u.transpose()).eval();
  };
  const Eigen::MatrixXd XQ = reflect_rows(X);
  const Eigen::MatrixXd Z = XQ.rightCols(d - 1);
  Eigen::MatrixXd H = (Z.transpose() * F.asDiagonal() * Z) / n;
  H.diagonal().array() -= t;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
  if (es.info() != Eigen::Success) throw std::runtime_error("hessian_at: eigensolver failed");
  HessianResult out;
  out.t_shift = t;
  out.eigenvalues.assign(es.eigenvalues().data(), es.eigenvalues().data() + (d - 1));
  // w~ = P ts/|P ts| in the same basis
  Eigen::VectorXd pts = ts - th.dot(ts) * th;
  const double np = pts.norm();
  if (np > 1e-14) {
    const Eigen::VectorXd qw = pts - (2.0 / uu) * u.dot(pts) * u;
    const Eigen::VectorXd wt = qw.tail(d - 1) / np;
    out.min_overlap = std::abs(es.eigenvectors().col(0).dot(wt));
  }
  return out;
}

void labels_at(const std::vector<double>& theta, const Instance& inst, std::vector<double>& y,
               std::vector<double>& y_star) {
  if (static_cast<int>(theta.size()) != inst.d) throw std::invalid_argument("labels_at: size");
  const simd::Kernels& k = simd::active();
  std::vector<double> th(theta), ts(inst.theta_star);
  const double nt = norm(th), ns = norm(ts);
  for (double& v : th) v /= nt;
  for (double& v : ts) v /= ns;
  y.assign(inst.n, 0.0);
  y_star.assign(inst.n, 0.0);
  k.matvec(inst.X.data(), inst.n, inst.d, th.data(), y.data());
  k.matvec(inst.X.data(), inst.n, inst.d, ts.data(), y_star.data());
}

EmpiricalLaws empirical_laws(const std::vector<double>& theta, const Instance& inst, double a,
                             int label_bins, double label_range, int f_bins) {
  if (label_bins < 1 || f_bins < 1 || !(label_range > 0)) {
    throw std::invalid_argument("empirical_laws: bad binning");
  }
  const int n = inst.n, d = inst.d;
  const simd::Kernels& k = simd::active();
  std::vector<double> th(theta);
  const double nt = norm(th);
  for (double& v : th) v /= nt;
  std::vector<double> ts(inst.theta_star);
  const double ns = norm(ts);
  for (double& v : ts) v /= ns;
  std::vector<double> y(n), ys(n);
  k.matvec(inst.X.data(), n, d, th.data(), y.data());
  k.matvec(inst.X.data(), n, d, ts.data(), ys.data());
  PhaseRetrievalLoss loss(a);
  EmpiricalLaws out;
  out.labels.lo = -label_range;
  out.labels.hi = label_range;
  out.labels.bins = label_bins;
  out.labels.counts.assign(static_cast<std::size_t>(label_bins) * label_bins, 0.0);
  std::vector<double> F(n);
  double e = 0.0;
  for (int i = 0; i < n; ++i) {
    F[i] = loss.second_deriv({y[i], ys[i]});
    e += loss.value({y[i], ys[i]});
    auto bin = [&](double v) {
      return static_cast<int>(std::floor((v + label_range) / (2 * label_range) * label_bins));
    };
    const int bi = bin(y[i]), bj = bin(ys[i]);
    if (bi >= 0 && bi < label_bins && bj >= 0 && bj < label_bins) {
      out.labels.counts[static_cast<std::size_t>(bi) * label_bins + bj] += 1.0;
    }
  }
  out.energy = e / n;
  out.overlap = dot(th, ts);
  const auto [mn, mx] = std::minmax_element(F.begin(), F.end());
  out.F.lo = *mn;
  out.F.hi = *mx > *mn ? *mx : *mn + 1.0;
  out.F.bins = f_bins;
  out.F.counts.assign(f_bins, 0.0);
  for (double f : F) {
    int b = static_cast<int>((f - out.F.lo) / (out.F.hi - out.F.lo) * f_bins);
    out.F.counts[std::clamp(b, 0, f_bins - 1)] += 1.0;
  }
  return out;
}

BatchResult batch_experiment(const GDConfig& base, const std::vector<double>& alphas,
                             const std::vector<double>& q0s, const BatchOptions& opts) {
  if (opts.replicates < 0) throw std::invalid_argument("batch_experiment: replicates < 0");
  BatchResult out;
  out.master_seed = opts.master_seed;
  if (opts.replicates == 0 || alphas.empty() || q0s.empty()) return out;
  struct Job {
    std::size_t ia, iq;
    int r;
  };
  std::vector<Job> jobs;
  for (std::size_t ia = 0; ia < alphas.size(); ++ia) {
    for (std::size_t iq = 0; iq < q0s.size(); ++iq) {
      for (int r = 0; r < opts.replicates; ++r) jobs.push_back({ia, iq, r});
    }
  }
  const CounterRng master(opts.master_seed);
  std::vector<RunRecord> runs(jobs.size());
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      const Job& job = jobs[j];
      RunRecord rec;
      rec.alpha = alphas[job.ia];
      rec.q0 = q0s[job.iq];
      rec.replicate = job.r;
      rec.seed = master.split(job.ia).split(job.iq).split(job.r).next_u64();
      try {
        GDConfig cfg = base;
        cfg.alpha = rec.alpha;
        cfg.q0 = rec.q0;
        cfg.seed = rec.seed;
        const Instance inst = generate_instance(cfg.d, cfg.n(), cfg.seed, cfg.normalize_signal);
        const GDRunResult r = run_gd(cfg, inst);
        rec.success = r.success;
        rec.final_overlap = r.final_overlap;
        rec.final_energy = r.final_energy;
        rec.energy_increases = r.energy_increases;
        rec.wall_steps = r.wall_steps;
        if (opts.hessians && !r.success) {
          const HessianResult h = hessian_at(r.theta, inst, cfg.a, opts.renormalize_hessian);
          rec.eigenvalues = h.eigenvalues;
          rec.t_shift = h.t_shift;
          rec.min_overlap = h.min_overlap;
          labels_at(r.theta, inst, rec.label_y, rec.label_y_star);
        }
      } catch (const std::exception& ex) {
        rec.error = ex.what();
      }
      runs[j] = std::move(rec);
    }
  };
  const int workers = std::max(1, std::min<int>(opts.workers > 0 ? opts.workers : default_workers(),
                                                static_cast<int>(jobs.size())));
  std::vector<std::thread> pool;
  for (int t = 1; t < workers; ++t) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();

  for (std::size_t ia = 0; ia < alphas.size(); ++ia) {
    for (std::size_t iq = 0; iq < q0s.size(); ++iq) {
      BatchRow row;
      row.alpha = alphas[ia];
      row.q0 = q0s[iq];
      int ok = 0, succ = 0, fail = 0, band = 0;
      double q_fail = 0, e_sum = 0, e_sq = 0;
      for (std::size_t j = 0; j < jobs.size(); ++j) {
        if (jobs[j].ia != ia || jobs[j].iq != iq) continue;
        const RunRecord& r = runs[j];
        if (!r.error.empty()) continue;
        ++ok;
        if (r.success) {
          ++succ;
          continue;
        }
        ++fail;
        q_fail += r.final_overlap;
        if (std::abs(r.final_overlap - row.q0) <= base.latitude_half_width) {
          ++band;
          e_sum += r.final_energy;
          e_sq += r.final_energy * r.final_energy;
        }
      }
      row.replicates = ok;
      row.success_rate = ok ? static_cast<double>(succ) / ok : std::nan("");
      row.err = ok ? std::sqrt(row.success_rate * (1 - row.success_rate) / ok) : std::nan("");
      row.mean_qT_fail = fail ? q_fail / fail : std::nan("");
      row.trapped_in_band = band;
      row.mean_energy = band ? e_sum / band : std::nan("");
      row.energy_err =
          band > 1 ? std::sqrt(std::max(0.0, e_sq / band - row.mean_energy * row.mean_energy) /
                               (band - 1))
                   : std::nan("");
      out.rows.push_back(row);
    }
  }
  out.runs = std::move(runs);
  return out;
}

void write_batch_csv(std::ostream& os, const BatchResult& b) {
  const auto old = os.precision(17);
  os << "# master_seed=" << b.master_seed << '\n';
  os << "alpha,q0,replicates,success_rate,err,mean_qT_fail,mean_energy,energy_err\n";
  for (const auto& r : b.rows) {
    os << r.alpha << ',' << r.q0 << ',' << r.replicates << ',' << r.success_rate << ',' << r.err
       << ',' << r.mean_qT_fail << ',' << r.mean_energy << ',' << r.energy_err << '\n';
  }
  os.precision(old);
}

void write_runs_csv(std::ostream& os, const BatchResult& b) {
  const auto old = os.precision(17);
  os << "# master_seed=" << b.master_seed << '\n';
  os << "alpha,q0,replicate,seed,success,final_overlap,final_energy,energy_increases,"
        "wall_steps,t_shift,min_overlap,lambda_min,error\n";
  for (const auto& r : b.runs) {
    os << r.alpha << ',' << r.q0 << ',' << r.replicate << ',' << r.seed << ',' << r.success << ','
       << r.final_overlap << ',' << r.final_energy << ',' << r.energy_increases << ','
       << r.wall_steps << ',' << r.t_shift << ',' << r.min_overlap << ',';
    if (r.eigenvalues.empty()) {
      os << "nan";
    } else {
      os << r.eigenvalues.front();
    }
    std::string err = r.error;
    std::replace(err.begin(), err.end(), ',', ';');
    os << ',' << err << '\n';
  }
  os.precision(old);
}

}  // namespace kacrice
