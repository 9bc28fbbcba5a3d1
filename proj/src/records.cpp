#include "kacrice/records.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "kacrice/bbp_analyzer.hpp"
#include "kacrice/loss_model.hpp"
#include "kacrice/mp_spectrum.hpp"

namespace kacrice {

using nlohmann::json;

namespace {

json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json nums(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

const json& field(const json& j, const char* k) {
  if (!j.is_object()) throw RecordError("record: expected an object");
  auto it = j.find(k);
  if (it == j.end()) throw RecordError(std::string("record: missing field '") + k + "'");
  return *it;
}

double get_num(const json& j, const char* k) {
  const json& v = field(j, k);
  if (v.is_null()) return std::nan("");
  if (!v.is_number()) throw RecordError(std::string("record: field '") + k + "' not a number");
  return v.get<double>();
}

template <class T>
T get_as(const json& j, const char* k) {
  try {
    return field(j, k).get<T>();
  } catch (const json::exception& ex) {
    throw RecordError(std::string("record: field '") + k + "': " + ex.what());
  }
}

std::vector<double> get_nums(const json& j, const char* k) {
  const json& v = field(j, k);
  if (!v.is_array()) throw RecordError(std::string("record: field '") + k + "' not an array");
  std::vector<double> out;
  out.reserve(v.size());
  for (const json& x : v) {
    if (x.is_null()) {
      out.push_back(std::nan(""));
    } else if (x.is_number()) {
      out.push_back(x.get<double>());
    } else {
      throw RecordError(std::string("record: field '") + k + "' has a non-number entry");
    }
  }
  return out;
}

void check_header(const json& j, const char* kind) {
  const int v = get_as<int>(j, "schema_version");
  if (v != kSchemaVersion) {
    throw RecordError("record: unsupported schema_version " + std::to_string(v));
  }
  if (get_as<std::string>(j, "kind") != kind) {
    throw RecordError(std::string("record: expected kind '") + kind + "'");
  }
}

json key_json(const RecordKey& k) { return {{"a", num(k.a)}, {"alpha", num(k.alpha)}, {"q", num(k.q)}}; }

RecordKey key_from(const json& j) {
  const json& k = field(j, "key");
  return {get_num(k, "a"), get_num(k, "alpha"), get_num(k, "q")};
}

json binned_json(const BinnedLaw& b) { return {{"edges", nums(b.edges)}, {"probs", nums(b.probs)}}; }

BinnedLaw binned_from(const json& j) {
  BinnedLaw b{get_nums(j, "edges"), get_nums(j, "probs")};
  if (b.probs.size() != b.edges.size() + 1) throw RecordError("record: binned law sizes");
  return b;
}

json quant_json(const LabelQuantiles& q) {
  return {{"levels", nums(q.levels)}, {"y", nums(q.y)}, {"y_star", nums(q.y_star)},
          {"gap", nums(q.gap)}};
}

LabelQuantiles quant_from(const json& j) {
  LabelQuantiles q{get_nums(j, "levels"), get_nums(j, "y"), get_nums(j, "y_star"),
                   get_nums(j, "gap")};
  const std::size_t n = q.levels.size();
  if (q.y.size() != n || q.y_star.size() != n || q.gap.size() != n) {
    throw RecordError("record: quantile sizes");
  }
  return q;
}

// Unnormalized cumulative trapezoid of a density grid.
std::vector<double> cumulative(const std::vector<double>& w, const std::vector<double>& dens) {
  std::vector<double> c(w.size(), 0.0);
  for (std::size_t i = 1; i < w.size(); ++i) {
    c[i] = c[i - 1] + 0.5 * (dens[i] + dens[i - 1]) * (w[i] - w[i - 1]);
  }
  return c;
}

double interp_cdf(const std::vector<double>& w, const std::vector<double>& c, double x) {
  if (w.empty() || x <= w.front()) return 0.0;
  if (x >= w.back()) return c.back();
  const auto it = std::upper_bound(w.begin(), w.end(), x);
  const std::size_t i = static_cast<std::size_t>(it - w.begin());
  const double f = (x - w[i - 1]) / (w[i] - w[i - 1]);
  return c[i - 1] + f * (c[i] - c[i - 1]);
}

double ks_grid_vs_grid(const std::vector<double>& w1, const std::vector<double>& d1,
                       const std::vector<double>& w2, const std::vector<double>& d2) {
  const auto c1 = cumulative(w1, d1), c2 = cumulative(w2, d2);
  double ks = 0.0;
  for (double x : w1) ks = std::max(ks, std::abs(interp_cdf(w1, c1, x) - interp_cdf(w2, c2, x)));
  for (double x : w2) ks = std::max(ks, std::abs(interp_cdf(w1, c1, x) - interp_cdf(w2, c2, x)));
  return ks;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw RecordError("compare: mismatched vector sizes");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Everything compare needs from the observed side.
struct Observation {
  RecordKey key;
  double energy = 0;
  std::vector<double> sample;   // eigenvalues, or empty when a grid is given
  std::vector<double> rho_w, rho_density;
  BinnedLaw F;
  LabelQuantiles labels;
  std::optional<bool> outlier;  // exact answer (theory side)
  std::vector<double> min_eigs, min_overlaps;
};

Observation observe(const json& j) {
  Observation o;
  const std::string kind = get_as<std::string>(j, "kind");
  if (kind == "theory") {
    const TheoryRecord t = theory_from_json(j);
    o.key = t.key;
    o.energy = t.band ? t.band->e_star : t.solution.energy;
    o.rho_w = t.rho_w;
    o.rho_density = t.rho_density;
    o.F = t.F;
    o.labels = t.labels;
    o.outlier = t.d_alpha > 0;
  } else if (kind == "experiment") {
    const ExperimentRecord e = experiment_from_json(j);
    o.key = e.key;
    o.energy = e.energies.empty()
                   ? std::nan("")
                   : std::accumulate(e.energies.begin(), e.energies.end(), 0.0) /
                         static_cast<double>(e.energies.size());
    o.sample = e.eigenvalues;
    o.F = e.F;
    o.labels = e.labels;
    o.min_eigs = e.min_eigs;
    o.min_overlaps = e.min_overlaps;
  } else {
    throw RecordError("record: unknown kind '" + kind + "'");
  }
  return o;
}

}  // namespace

std::string RecordKey::str() const {
  std::ostringstream os;
  os.precision(17);
  os << "a=" << a << ",alpha=" << alpha << ",q=" << q;
  return os.str();
}

bool RecordKey::operator==(const RecordKey& o) const {
  auto close = [](double x, double y) { return std::abs(x - y) <= 1e-9 * std::max(1.0, std::abs(x)); };
  return close(a, o.a) && close(alpha, o.alpha) && close(q, o.q);
}

std::vector<double> default_F_edges() {
  std::vector<double> e;
  for (int i = -4; i <= 40; ++i) e.push_back(i);
  return e;
}

std::vector<double> default_quantile_levels() {
  std::vector<double> l;
  for (int i = 1; i <= 19; ++i) l.push_back(0.05 * i);
  return l;
}

BinnedLaw bin_law(const std::vector<double>& values, const std::vector<double>& weights,
                  const std::vector<double>& edges) {
  if (!weights.empty() && weights.size() != values.size()) {
    throw std::invalid_argument("bin_law: weights size");
  }
  if (!std::is_sorted(edges.begin(), edges.end())) throw std::invalid_argument("bin_law: edges");
  BinnedLaw b{edges, std::vector<double>(edges.size() + 1, 0.0)};
  double total = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    const auto it = std::upper_bound(edges.begin(), edges.end(), values[i]);
    b.probs[static_cast<std::size_t>(it - edges.begin())] += w;
    total += w;
  }
  if (total > 0) {
    for (double& p : b.probs) p /= total;
  }
  return b;
}

std::vector<double> weighted_quantiles(std::vector<double> values, std::vector<double> weights,
                                       const std::vector<double>& levels) {
  const std::size_t n = values.size();
  if (weights.empty()) weights.assign(n, 1.0);
  if (weights.size() != n) throw std::invalid_argument("weighted_quantiles: weights size");
  std::vector<double> out(levels.size(), std::nan(""));
  if (n == 0) return out;
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  double cum = 0.0;
  std::size_t k = 0;
  for (std::size_t li = 0; li < levels.size(); ++li) {
    const double target = levels[li] * total;
    while (k + 1 < n && cum + weights[idx[k]] < target) cum += weights[idx[k++]];
    out[li] = values[idx[k]];
  }
  return out;
}

LabelQuantiles label_quantiles(const std::vector<double>& y, const std::vector<double>& y_star,
                               const std::vector<double>& weights,
                               const std::vector<double>& levels) {
  if (y.size() != y_star.size()) throw std::invalid_argument("label_quantiles: sizes");
  std::vector<double> gap(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) gap[i] = std::abs(y[i]) - std::abs(y_star[i]);
  return {levels, weighted_quantiles(y, weights, levels),
          weighted_quantiles(y_star, weights, levels), weighted_quantiles(gap, weights, levels)};
}

TheoryRecord make_theory_record(GaussianMesh& mesh, const ComplexitySolution& sol,
                                const std::optional<EnergyBand>& band, const RhoGridOptions& rho) {
  if (sol.mode == Mode::kTC) {
    throw std::invalid_argument("make_theory_record: minima or fin solutions only");
  }
  TheoryRecord r;
  r.key = {sol.loss_a, sol.alpha, sol.q};
  r.solution = sol;
  if (band) r.band = BandSummary{band->e_min, band->e_star, band->e_max, band->sigma_at_star, band->empty};
  const TiltExponent tilt = label_law(sol);
  const WeightLaw nu = mesh.weight_law(tilt);
  BBPResult bbp;
  const std::optional<double> xs = outlier_location(nu, sol.alpha, sol.q, &bbp);
  r.d_alpha = bbp.d_alpha;
  r.w_min = bbp.w_min();
  if (xs) r.w_star = *xs - nu.t_nu;
  if (!(rho.lo < rho.knee && rho.knee < rho.hi) || rho.core_points < 2 || rho.tail_points < 2) {
    throw std::invalid_argument("make_theory_record: bad density grid");
  }
  const SpectrumResult core = hessian_density(nu, sol.alpha, rho.lo, rho.knee, rho.core_points);
  const SpectrumResult tail = hessian_density(nu, sol.alpha, rho.knee, rho.hi, rho.tail_points);
  r.rho_w = core.w;
  r.rho_density = core.density;
  r.rho_w.insert(r.rho_w.end(), tail.w.begin() + 1, tail.w.end());
  r.rho_density.insert(r.rho_density.end(), tail.density.begin() + 1, tail.density.end());
  std::vector<double> ys, yss, ws, Fs;
  const LossModel& loss = mesh.loss();
  mesh.for_each_node(tilt, [&](double y, double y_star, double w) {
    if (w <= 0) return;
    ys.push_back(y);
    yss.push_back(y_star);
    ws.push_back(w);
    Fs.push_back(loss.second_deriv({y, y_star}));
  });
  r.F = bin_law(Fs, ws, default_F_edges());
  r.labels = label_quantiles(ys, yss, ws, default_quantile_levels());
  return r;
}

std::vector<ExperimentRecord> make_experiment_records(const BatchResult& batch,
                                                      const GDConfig& base) {
  std::vector<ExperimentRecord> out;
  const PhaseRetrievalLoss loss(base.a);
  for (const BatchRow& row : batch.rows) {
    ExperimentRecord e;
    e.key = {base.a, row.alpha, row.q0};
    e.master_seed = batch.master_seed;
    std::vector<double> ys, yss, Fs;
    for (const RunRecord& r : batch.runs) {
      if (r.alpha != row.alpha || r.q0 != row.q0 || !r.error.empty()) continue;
      ++e.runs;
      if (r.success) {
        ++e.successes;
        continue;
      }
      if (std::abs(r.final_overlap - row.q0) > base.latitude_half_width) continue;
      e.energies.push_back(r.final_energy);
      e.overlaps.push_back(r.final_overlap);
      if (!r.eigenvalues.empty()) {
        e.eigenvalues.insert(e.eigenvalues.end(), r.eigenvalues.begin(), r.eigenvalues.end());
        e.min_eigs.push_back(r.eigenvalues.front());
        e.min_overlaps.push_back(r.min_overlap);
      }
      for (std::size_t i = 0; i < r.label_y.size(); ++i) {
        ys.push_back(r.label_y[i]);
        yss.push_back(r.label_y_star[i]);
        Fs.push_back(loss.second_deriv({r.label_y[i], r.label_y_star[i]}));
      }
    }
    e.F = bin_law(Fs, {}, default_F_edges());
    e.labels = label_quantiles(ys, yss, {}, default_quantile_levels());
    out.push_back(std::move(e));
  }
  return out;
}

json to_json(const ComplexitySolution& s) {
  const auto& l = s.lam;
  const auto& r = s.res;
  return {
      {"sigma", num(s.sigma)},
      {"mode", mode_name(s.mode)},
      {"q", num(s.q)},
      {"alpha", num(s.alpha)},
      {"e", s.e ? num(*s.e) : json(nullptr)},
      {"loss", s.loss_name},
      {"loss_a", num(s.loss_a)},
      {"A", num(s.outer.A)},
      {"g", num(s.outer.g)},
      {"g_i", num(s.g_i)},
      {"eps", num(s.eps)},
      {"lam", {{"A", num(l.lam_A)}, {"c", num(l.lam_c)}, {"e", num(l.lam_e)},
               {"t", num(l.lam_t)}, {"h", num(l.lam_h)}, {"star", num(l.lam_star)}}},
      {"res", {{"G_A", num(r.G_A)}, {"G_c", num(r.G_c)}, {"G_e", num(r.G_e)},
               {"G_t", num(r.G_t)}, {"G_h", num(r.G_h)}, {"G_star", num(r.G_star)},
               {"L_A", num(r.L_A)}, {"L_g", num(r.L_g)}}},
      {"energy", num(s.energy)},
      {"t_nu", num(s.t_nu)},
      {"restricted", s.restricted},
      {"converged", s.converged},
      {"outer_iterations", s.outer_iterations},
      {"inner_iterations", s.inner_iterations},
      {"outer_hess", nums({s.outer_hess[0], s.outer_hess[1], s.outer_hess[2]})},
  };
}

ComplexitySolution solution_from_json(const json& j) {
  ComplexitySolution s;
  s.sigma = get_num(j, "sigma");
  try {
    s.mode = parse_mode(get_as<std::string>(j, "mode"));
  } catch (const std::invalid_argument& ex) {
    throw RecordError(std::string("record: ") + ex.what());
  }
  s.q = get_num(j, "q");
  s.alpha = get_num(j, "alpha");
  if (!field(j, "e").is_null()) s.e = get_num(j, "e");
  s.loss_name = get_as<std::string>(j, "loss");
  s.loss_a = get_num(j, "loss_a");
  s.outer.A = get_num(j, "A");
  s.outer.g = get_num(j, "g");
  s.g_i = get_num(j, "g_i");
  s.eps = get_num(j, "eps");
  const json& l = field(j, "lam");
  s.lam = {get_num(l, "A"), get_num(l, "c"), get_num(l, "e"),
           get_num(l, "t"), get_num(l, "h"), get_num(l, "star")};
  const json& r = field(j, "res");
  s.res = {get_num(r, "G_A"), get_num(r, "G_c"), get_num(r, "G_e"), get_num(r, "G_t"),
           get_num(r, "G_h"), get_num(r, "G_star"), get_num(r, "L_A"), get_num(r, "L_g")};
  s.energy = get_num(j, "energy");
  s.t_nu = get_num(j, "t_nu");
  s.restricted = get_as<bool>(j, "restricted");
  s.converged = get_as<bool>(j, "converged");
  s.outer_iterations = get_as<int>(j, "outer_iterations");
  s.inner_iterations = get_as<int>(j, "inner_iterations");
  const auto h = get_nums(j, "outer_hess");
  if (h.size() != 3) throw RecordError("record: outer_hess needs 3 entries");
  std::copy(h.begin(), h.end(), s.outer_hess);
  return s;
}

json to_json(const TheoryRecord& r) {
  json band = nullptr;
  if (r.band) {
    band = {{"e_min", num(r.band->e_min)}, {"e_star", num(r.band->e_star)},
            {"e_max", num(r.band->e_max)}, {"sigma_at_star", num(r.band->sigma_at_star)},
            {"empty", r.band->empty}};
  }
  return {
      {"schema_version", kSchemaVersion},
      {"kind", "theory"},
      {"key", key_json(r.key)},
      {"config", r.config},
      {"solution", to_json(r.solution)},
      {"band", band},
      {"d_alpha", num(r.d_alpha)},
      {"w_min", num(r.w_min)},
      {"w_star", num(r.w_star)},
      {"rho", {{"w", nums(r.rho_w)}, {"density", nums(r.rho_density)}}},
      {"F", binned_json(r.F)},
      {"labels", quant_json(r.labels)},
  };
}

TheoryRecord theory_from_json(const json& j) {
  check_header(j, "theory");
  TheoryRecord r;
  r.key = key_from(j);
  r.config = field(j, "config");
  r.solution = solution_from_json(field(j, "solution"));
  const json& b = field(j, "band");
  if (!b.is_null()) {
    r.band = BandSummary{get_num(b, "e_min"), get_num(b, "e_star"), get_num(b, "e_max"),
                         get_num(b, "sigma_at_star"), get_as<bool>(b, "empty")};
  }
  r.d_alpha = get_num(j, "d_alpha");
  r.w_min = get_num(j, "w_min");
  r.w_star = get_num(j, "w_star");
  const json& rho = field(j, "rho");
  r.rho_w = get_nums(rho, "w");
  r.rho_density = get_nums(rho, "density");
  if (r.rho_w.size() != r.rho_density.size()) throw RecordError("record: rho sizes");
  r.F = binned_from(field(j, "F"));
  r.labels = quant_from(field(j, "labels"));
  return r;
}

json to_json(const ExperimentRecord& r) {
  return {
      {"schema_version", kSchemaVersion},
      {"kind", "experiment"},
      {"key", key_json(r.key)},
      {"config", r.config},
      {"master_seed", r.master_seed},
      {"runs", r.runs},
      {"successes", r.successes},
      {"energies", nums(r.energies)},
      {"overlaps", nums(r.overlaps)},
      {"eigenvalues", nums(r.eigenvalues)},
      {"min_eigs", nums(r.min_eigs)},
      {"min_overlaps", nums(r.min_overlaps)},
      {"F", binned_json(r.F)},
      {"labels", quant_json(r.labels)},
  };
}

ExperimentRecord experiment_from_json(const json& j) {
  check_header(j, "experiment");
  ExperimentRecord r;
  r.key = key_from(j);
  r.config = field(j, "config");
  r.master_seed = get_as<std::uint64_t>(j, "master_seed");
  r.runs = get_as<int>(j, "runs");
  r.successes = get_as<int>(j, "successes");
  r.energies = get_nums(j, "energies");
  r.overlaps = get_nums(j, "overlaps");
  r.eigenvalues = get_nums(j, "eigenvalues");
  r.min_eigs = get_nums(j, "min_eigs");
  r.min_overlaps = get_nums(j, "min_overlaps");
  if (r.min_eigs.size() != r.min_overlaps.size()) throw RecordError("record: min_eigs sizes");
  r.F = binned_from(field(j, "F"));
  r.labels = quant_from(field(j, "labels"));
  return r;
}

double ks_sample_vs_grid(std::vector<double> sample, const std::vector<double>& w,
                         const std::vector<double>& density) {
  if (sample.empty()) return std::nan("");
  if (w.size() != density.size() || w.size() < 2) throw std::invalid_argument("ks: grid");
  std::sort(sample.begin(), sample.end());
  const auto c = cumulative(w, density);
  const double n = static_cast<double>(sample.size());
  double ks = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double F = interp_cdf(w, c, sample[i]);
    ks = std::max({ks, std::abs(F - i / n), std::abs(F - (i + 1) / n)});
  }
  return ks;
}

std::vector<ComparisonRow> compare_records(const std::vector<json>& theory,
                                           const std::vector<json>& observed,
                                           const CompareOptions& opts) {
  std::vector<TheoryRecord> th;
  for (const json& j : theory) th.push_back(theory_from_json(j));
  std::vector<Observation> ob;
  for (const json& j : observed) ob.push_back(observe(j));

  std::vector<std::string> unpaired;
  std::vector<int> match(th.size(), -1);
  std::vector<bool> used(ob.size(), false);
  for (std::size_t i = 0; i < th.size(); ++i) {
    for (std::size_t k = 0; k < ob.size(); ++k) {
      if (!used[k] && th[i].key == ob[k].key) {
        match[i] = static_cast<int>(k);
        used[k] = true;
        break;
      }
    }
    if (match[i] < 0) unpaired.push_back("theory:" + th[i].key.str());
  }
  for (std::size_t k = 0; k < ob.size(); ++k) {
    if (!used[k]) unpaired.push_back("observed:" + ob[k].key.str());
  }
  if (!unpaired.empty()) {
    std::string msg = "compare: unpaired keys";
    for (const auto& u : unpaired) msg += " " + u;
    throw KeyMismatch(msg, unpaired);
  }

  std::vector<ComparisonRow> rows;
  for (std::size_t i = 0; i < th.size(); ++i) {
    const TheoryRecord& t = th[i];
    const Observation& o = ob[static_cast<std::size_t>(match[i])];
    ComparisonRow row;
    row.key = t.key;
    row.mean_energy = o.energy;
    const double lo = t.band ? t.band->e_min : std::nan("");
    const double hi = t.band ? t.band->e_max : std::nan("");
    row.margin_low = o.energy - lo;
    row.margin_high = hi - o.energy;
    row.energy_in_band = row.margin_low >= 0 && row.margin_high >= 0;
    if (!o.rho_w.empty()) {
      row.spectral_ks = ks_grid_vs_grid(t.rho_w, t.rho_density, o.rho_w, o.rho_density);
    } else {
      row.spectral_ks = ks_sample_vs_grid(o.sample, t.rho_w, t.rho_density);
    }
    if (t.F.edges != o.F.edges) throw RecordError("compare: F histograms use different edges");
    row.F_tv = 0.0;
    for (std::size_t b = 0; b < t.F.probs.size(); ++b) row.F_tv += 0.5 * std::abs(t.F.probs[b] - o.F.probs[b]);
    if (t.labels.levels != o.labels.levels) throw RecordError("compare: quantile levels differ");
    row.label_quantile_dist = std::max({max_abs_diff(t.labels.y, o.labels.y),
                                        max_abs_diff(t.labels.y_star, o.labels.y_star),
                                        max_abs_diff(t.labels.gap, o.labels.gap)});
    row.theory_outlier = t.d_alpha > 0;
    if (o.outlier) {
      row.experiment_outlier = *o.outlier;
      row.outlier_fraction = *o.outlier ? 1.0 : 0.0;
    } else if (!o.min_eigs.empty()) {
      int hits = 0;
      for (std::size_t k = 0; k < o.min_eigs.size(); ++k) {
        if (o.min_eigs[k] < t.w_min - opts.outlier_margin && o.min_overlaps[k] > opts.outlier_overlap) ++hits;
      }
      row.outlier_fraction = static_cast<double>(hits) / static_cast<double>(o.min_eigs.size());
      row.experiment_outlier = row.outlier_fraction > 0.5;
    }
    rows.push_back(row);
  }
  return rows;
}

json to_json(const ComparisonRow& r) {
  return {{"key", key_json(r.key)},
          {"mean_energy", num(r.mean_energy)},
          {"energy_in_band", r.energy_in_band},
          {"margin_low", num(r.margin_low)},
          {"margin_high", num(r.margin_high)},
          {"spectral_ks", num(r.spectral_ks)},
          {"F_tv", num(r.F_tv)},
          {"label_quantile_dist", num(r.label_quantile_dist)},
          {"theory_outlier", r.theory_outlier},
          {"experiment_outlier", r.experiment_outlier},
          {"outlier_fraction", num(r.outlier_fraction)},
          {"outlier_agree", r.outlier_agree()}};
}

void write_comparison_csv(std::ostream& os, const std::vector<ComparisonRow>& rows) {
  const auto old = os.precision(17);
  os << "a,alpha,q,mean_energy,energy_in_band,margin_low,margin_high,spectral_ks,F_tv,"
        "label_quantile_dist,theory_outlier,experiment_outlier,outlier_fraction,outlier_agree\n";
  auto put = [&](double v) {
    if (std::isfinite(v)) {
      os << v;
    } else {
      os << "nan";
    }
  };
  for (const auto& r : rows) {
    put(r.key.a);
    os << ',';
    put(r.key.alpha);
    os << ',';
    put(r.key.q);
    os << ',';
    put(r.mean_energy);
    os << ',' << r.energy_in_band << ',';
    put(r.margin_low);
    os << ',';
    put(r.margin_high);
    os << ',';
    put(r.spectral_ks);
    os << ',';
    put(r.F_tv);
    os << ',';
    put(r.label_quantile_dist);
    os << ',' << r.theory_outlier << ',' << r.experiment_outlier << ',';
    put(r.outlier_fraction);
    os << ',' << r.outlier_agree() << '\n';
  }
  os.precision(old);
}

std::vector<json> record_list(const json& j) {
  if (j.is_array()) return std::vector<json>(j.begin(), j.end());
  if (j.is_object()) return {j};
  throw RecordError("record: expected an object or an array of objects");
}

}  // namespace kacrice
