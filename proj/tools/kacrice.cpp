// kacrice: command-line front end.
//
//   kacrice complexity    [--config f.json] [--a ..] [--q ..] [--alpha ..] [--mode ..] ...
//   kacrice phase-diagram [--config f.json] ...
//   kacrice simulate      [--config f.json] [--seed ..] ...
//   kacrice compare       --theory t.json --experiment e.json ...
//
// Every parameter can come from a JSON config (flat object, unknown keys
// rejected) and be overridden by --key value (underscores become dashes;
// booleans are --key / --no-key). Exit codes: 0 ok, 2 not converged,
// 3 infeasible, 4 configuration error, 1 anything else. Outputs are written
// only once the computation has finished.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "kacrice/bbp_analyzer.hpp"
#include "kacrice/gd_simulator.hpp"
#include "kacrice/landscape_scan.hpp"
#include "kacrice/loss_model.hpp"
#include "kacrice/mp_spectrum.hpp"
#include "kacrice/quadrature.hpp"
#include "kacrice/records.hpp"
#include "kacrice/variational_critical.hpp"
#include "kacrice/variational_minima.hpp"

using nlohmann::json;
using namespace kacrice;

namespace {

enum Exit { kOk = 0, kOther = 1, kNotConverged = 2, kInfeasible = 3, kConfig = 4 };

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Kind { kNumber, kInt, kBool, kString, kNumArray, kOptNumber };

struct Param {
  std::string name;
  Kind kind;
  json def;
  std::string help;
};

using Schema = std::vector<Param>;

std::string flag_name(const std::string& key) {
  std::string s = key;
  for (char& c : s) {
    if (c == '_') c = '-';
  }
  return s;
}

double parse_number(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    throw ConfigError("'" + key + "': not a number: " + text);
  }
  if (used != text.size()) throw ConfigError("'" + key + "': not a number: " + text);
  return v;
}

// "1,2,3" or "lo:hi:step"
json parse_array(const std::string& key, const std::string& text) {
  json out = json::array();
  if (text.empty()) return out;
  if (text.find(':') != std::string::npos) {
    std::vector<double> p;
    std::stringstream ss(text);
    std::string tok;
    while (std::getline(ss, tok, ':')) p.push_back(parse_number(key, tok));
    if (p.size() != 3 || !(p[2] > 0) || p[1] < p[0]) {
      throw ConfigError("'" + key + "': range must be lo:hi:step with step > 0");
    }
    const long n = std::lround(std::floor((p[1] - p[0]) / p[2] + 1e-9));
    for (long i = 0; i <= n; ++i) out.push_back(p[0] + i * p[2]);
    return out;
  }
  std::stringstream ss(text);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(parse_number(key, tok));
  return out;
}

void check_type(const Param& p, const json& v) {
  bool ok = false;
  switch (p.kind) {
    case Kind::kNumber: ok = v.is_number(); break;
    case Kind::kInt: ok = v.is_number_integer(); break;
    case Kind::kBool: ok = v.is_boolean(); break;
    case Kind::kString: ok = v.is_string(); break;
    case Kind::kOptNumber: ok = v.is_null() || v.is_number(); break;
    case Kind::kNumArray:
      ok = v.is_array();
      if (ok) {
        for (const json& x : v) ok = ok && x.is_number();
      }
      break;
  }
  if (!ok) throw ConfigError("'" + p.name + "': wrong type");
}

// Registers one option per key; the callbacks fill `overrides`.
void register_options(CLI::App* sub, const Schema& schema, std::string* config_path,
                      json* overrides) {
  sub->add_option("--config", *config_path, "JSON configuration file");
  for (const Param& p : schema) {
    const std::string f = "--" + flag_name(p.name);
    const std::string key = p.name;
    const Kind kind = p.kind;
    if (kind == Kind::kBool) {
      sub->add_flag_callback(f, [overrides, key] { (*overrides)[key] = true; }, p.help);
      sub->add_flag_callback("--no-" + flag_name(p.name),
                             [overrides, key] { (*overrides)[key] = false; });
      continue;
    }
    sub->add_option_function<std::string>(
        f,
        [overrides, key, kind](const std::string& text) {
          switch (kind) {
            case Kind::kNumber:
            case Kind::kOptNumber:
              (*overrides)[key] = parse_number(key, text);
              break;
            case Kind::kInt: {
              const double v = parse_number(key, text);
              if (v != std::floor(v)) throw ConfigError("'" + key + "': not an integer");
              (*overrides)[key] = static_cast<std::int64_t>(v);
              break;
            }
            case Kind::kString:
              (*overrides)[key] = text;
              break;
            case Kind::kNumArray:
              (*overrides)[key] = parse_array(key, text);
              break;
            case Kind::kBool:
              break;
          }
        },
        p.help);
  }
}

json resolve(const Schema& schema, const std::string& config_path, const json& overrides) {
  json cfg = json::object();
  for (const Param& p : schema) cfg[p.name] = p.def;
  auto find = [&](const std::string& k) -> const Param& {
    for (const Param& p : schema) {
      if (p.name == k) return p;
    }
    throw ConfigError("unknown configuration key '" + k + "'");
  };
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) throw ConfigError("cannot open config " + config_path);
    json file;
    try {
      file = json::parse(in);
    } catch (const json::parse_error& ex) {
      throw ConfigError(std::string("malformed config: ") + ex.what());
    }
    if (!file.is_object()) throw ConfigError("config must be a JSON object");
    for (auto it = file.begin(); it != file.end(); ++it) {
      if (it.key() == "command") continue;
      const Param& p = find(it.key());
      check_type(p, it.value());
      cfg[it.key()] = it.value();
    }
  }
  for (auto it = overrides.begin(); it != overrides.end(); ++it) {
    check_type(find(it.key()), it.value());
    cfg[it.key()] = it.value();
  }
  return cfg;
}

std::vector<double> vec(const json& j) { return j.get<std::vector<double>>(); }

void require(bool cond, const std::string& msg) {
  if (!cond) throw ConfigError(msg);
}

// Deferred file outputs; "-" is stdout.
struct Outputs {
  std::vector<std::pair<std::string, std::string>> files;
  void add(const std::string& path, std::string content) {
    if (!path.empty()) files.emplace_back(path, std::move(content));
  }
  void flush() const {
    for (const auto& [path, content] : files) {
      if (path == "-") {
        std::cout << content;
        continue;
      }
      std::ofstream out(path, std::ios::binary);
      if (!out) throw std::runtime_error("cannot write " + path);
      out << content;
    }
  }
};

std::string csv_preamble(const char* command, const json& cfg) {
  return "# schema_version=" + std::to_string(kSchemaVersion) + " command=" + command +
         " config=" + cfg.dump() + "\n";
}

QuadratureOptions quad_options(const json& cfg) {
  QuadratureOptions q;
  q.rel_tol = cfg["quad_rel_tol"].get<double>();
  return q;
}

SolverOptions solver_options(const json& cfg) {
  SolverOptions s;
  s.inner_tol = cfg["inner_tol"].get<double>();
  s.outer_tol = cfg["outer_tol"].get<double>();
  return s;
}

TcOptions tc_options(const json& cfg) {
  TcOptions t;
  t.damping = cfg["tc_damping"].get<double>();
  t.eps = cfg["tc_eps"].get<double>();
  t.tol = cfg["tc_tol"].get<double>();
  t.max_iter = cfg["tc_max_iter"].get<int>();
  return t;
}

Schema solver_schema() {
  return {
      {"quad_rel_tol", Kind::kNumber, 1e-10, "quadrature relative tolerance"},
      {"inner_tol", Kind::kNumber, 1e-10, "inner (dual) tolerance"},
      {"outer_tol", Kind::kNumber, 1e-8, "outer stationarity tolerance"},
      {"tc_damping", Kind::kNumber, 0.5, "fixed-point damping (tc)"},
      {"tc_eps", Kind::kNumber, 1e-6, "imaginary regularization (tc)"},
      {"tc_tol", Kind::kNumber, 1e-9, "fixed-point tolerance (tc)"},
      {"tc_max_iter", Kind::kInt, 20000, "fixed-point iteration cap (tc)"},
  };
}

Schema with_solver(Schema s) {
  for (auto& p : solver_schema()) s.push_back(p);
  return s;
}

// ---------------------------------------------------------------- complexity

Schema complexity_schema() {
  return with_solver({
      {"a", Kind::kNumber, 0.01, "loss parameter a"},
      {"q", Kind::kNumber, 0.0, "overlap q"},
      {"alpha", Kind::kNumber, 6.5, "sample ratio alpha"},
      {"mode", Kind::kString, "tilde0", "tilde0 | fin | tc"},
      {"e", Kind::kOptNumber, nullptr, "pinned energy (omit for free e)"},
      {"band", Kind::kBool, false, "also compute the energy band"},
      {"multistart", Kind::kBool, false, "rerun the outer ascent from several starts"},
      {"spectrum", Kind::kBool, true, "attach outlier analysis and Hessian density"},
      {"rho_lo", Kind::kNumber, -1.0, "density grid lower end (shifted)"},
      {"rho_knee", Kind::kNumber, 20.0, "end of the fine part of the grid"},
      {"rho_hi", Kind::kNumber, 200.0, "density grid upper end"},
      {"rho_points", Kind::kInt, 4201, "points in the fine part"},
      {"out", Kind::kString, "-", "record output path (- for stdout)"},
      {"nu_grid", Kind::kString, "", "CSV of the label law atoms (y, y_star, weight)"},
      {"rho_grid", Kind::kString, "", "CSV of the shifted Hessian density"},
  });
}

int cmd_complexity(const json& cfg) {
  const double a = cfg["a"], q = cfg["q"], alpha = cfg["alpha"];
  require(a > 0, "a must be > 0");
  require(std::abs(q) < 1, "|q| must be < 1");
  require(alpha > 1, "alpha must be > 1");
  Mode mode;
  try {
    mode = parse_mode(cfg["mode"].get<std::string>());
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(ex.what());
  }
  std::optional<double> e;
  if (!cfg["e"].is_null()) {
    e = cfg["e"].get<double>();
    require(*e > 0, "e must be > 0");
  }
  require(!(cfg["band"].get<bool>() && e), "band needs free e");
  require(cfg["rho_lo"].get<double>() < cfg["rho_knee"].get<double>() &&
              cfg["rho_knee"].get<double>() < cfg["rho_hi"].get<double>(),
          "need rho_lo < rho_knee < rho_hi");
  require(cfg["rho_points"].get<int>() >= 2, "rho_points must be >= 2");

  GaussianMesh mesh(std::make_shared<PhaseRetrievalLoss>(a), q, quad_options(cfg));
  const SolverOptions sopts = solver_options(cfg);
  Outputs out;
  json record;
  bool converged = false;
  if (mode == Mode::kTC) {
    const ComplexitySolution sol = complexity_tc(mesh, e, alpha, std::nullopt, tc_options(cfg));
    converged = sol.converged;
    record = {{"schema_version", kSchemaVersion}, {"kind", "solution"},
              {"key", {{"a", a}, {"alpha", alpha}, {"q", q}}}, {"config", cfg},
              {"solution", to_json(sol)}};
    if (!cfg["nu_grid"].get<std::string>().empty()) {
      std::ostringstream os;
      os.precision(17);
      os << csv_preamble("complexity", cfg) << "y,y_star,weight\n";
      mesh.for_each_node(tc_label_law(sol), [&](double y, double ys, double w) {
        if (w > 0) os << y << ',' << ys << ',' << w << '\n';
      });
      out.add(cfg["nu_grid"], os.str());
    }
  } else {
    const ComplexitySolution sol = complexity(mesh, e, alpha, mode, nullptr, sopts);
    converged = sol.converged;
    std::optional<EnergyBand> band;
    if (cfg["band"].get<bool>()) band = energy_band(mesh, alpha, mode, &sol, 1e-5, sopts);
    if (cfg["spectrum"].get<bool>()) {
      RhoGridOptions rho;
      rho.lo = cfg["rho_lo"];
      rho.knee = cfg["rho_knee"];
      rho.hi = cfg["rho_hi"];
      rho.core_points = cfg["rho_points"];
      rho.tail_points = std::max(2, static_cast<int>(std::lround((rho.hi - rho.knee) / 0.5)) + 1);
      TheoryRecord tr = make_theory_record(mesh, band ? band->at_star : sol, band, rho);
      tr.config = cfg;
      record = to_json(tr);
      if (!cfg["rho_grid"].get<std::string>().empty()) {
        std::ostringstream os;
        os.precision(17);
        os << csv_preamble("complexity", cfg) << "w,density\n";
        for (std::size_t i = 0; i < tr.rho_w.size(); ++i) {
          os << tr.rho_w[i] << ',' << tr.rho_density[i] << '\n';
        }
        out.add(cfg["rho_grid"], os.str());
      }
    } else {
      json bj = nullptr;
      if (band) {
        bj = {{"e_min", band->e_min}, {"e_star", band->e_star}, {"e_max", band->e_max},
              {"sigma_at_star", band->sigma_at_star}, {"empty", band->empty}};
      }
      record = {{"schema_version", kSchemaVersion}, {"kind", "solution"},
                {"key", {{"a", a}, {"alpha", alpha}, {"q", q}}}, {"config", cfg},
                {"solution", to_json(sol)}, {"band", bj}};
    }
    if (!cfg["nu_grid"].get<std::string>().empty()) {
      std::ostringstream os;
      os.precision(17);
      os << csv_preamble("complexity", cfg) << "y,y_star,weight\n";
      mesh.for_each_node(label_law(sol), [&](double y, double ys, double w) {
        if (w > 0) os << y << ',' << ys << ',' << w << '\n';
      });
      out.add(cfg["nu_grid"], os.str());
    }
  }
  if (cfg["multistart"].get<bool>() && mode != Mode::kTC) {
    // starts: default (A, g) scaled by factors 1/4..4 in A and 1/2..1.1 in g
    std::vector<OuterPoint> scales;
    for (double fa : {0.25, 1.0, 4.0})
      for (double fg : {0.5, 0.8, 1.1})
        if (fa != 1.0 || fg != 1.0) scales.push_back({fa, fg});
    const MultiStartReport rep = complexity_multistart(mesh, e, alpha, mode, scales, 1e-3, sopts);
    json maxima = json::array();
    for (const auto& m : rep.maxima) {
      maxima.push_back({{"sigma", m.sigma}, {"A", m.outer.A}, {"g", m.outer.g},
                        {"energy", m.energy}});
    }
    record["multistart"] = {{"maxima", maxima}, {"failures", rep.failures},
                            {"ambiguous", rep.ambiguous()}};
    if (rep.ambiguous()) std::cerr << "warning: outer problem has several maxima\n";
  }
  out.files.insert(out.files.begin(), {cfg["out"].get<std::string>(), record.dump(1) + "\n"});
  out.flush();
  return converged ? kOk : kNotConverged;
}

// ------------------------------------------------------------- phase-diagram

Schema phase_schema() {
  return with_solver({
      {"a", Kind::kNumber, 0.01, "loss parameter a"},
      {"alpha_grid", Kind::kNumArray, parse_array("alpha_grid", "2:8:0.5"), "alpha grid"},
      {"q_grid", Kind::kNumArray, json::array({0.0, 0.2, 0.4, 0.6, 0.8}), "q grid (<= 0.95)"},
      {"with_tc", Kind::kBool, true, "all-critical-points column"},
      {"with_bands", Kind::kBool, true, "energy bands and BBP margins"},
      {"with_thresholds", Kind::kBool, true, "bisect threshold crossings"},
      {"threshold_tol", Kind::kNumber, 1e-2, "bisection tolerance in alpha"},
      {"band_tol", Kind::kNumber, 1e-5, "band edge tolerance"},
      {"workers", Kind::kInt, 0, "worker threads (0: default)"},
      {"cells", Kind::kString, "cells.csv", "cell table output"},
      {"thresholds", Kind::kString, "thresholds.csv", "threshold table output"},
  });
}

int cmd_phase_diagram(const json& cfg) {
  const double a = cfg["a"];
  require(a > 0, "a must be > 0");
  const auto alphas = vec(cfg["alpha_grid"]), qs = vec(cfg["q_grid"]);
  require(std::is_sorted(alphas.begin(), alphas.end()), "alpha_grid must be sorted");
  require(std::is_sorted(qs.begin(), qs.end()), "q_grid must be sorted");
  for (double x : alphas) require(x > 1, "alpha values must be > 1");
  for (double x : qs) require(x >= 0 && x <= 0.95, "q values must lie in [0, 0.95]");
  require(cfg["workers"].get<int>() >= 0, "workers must be >= 0");
  ScanOptions o;
  o.with_tc = cfg["with_tc"];
  o.with_bands = cfg["with_bands"];
  o.with_thresholds = cfg["with_thresholds"];
  o.threshold_tol = cfg["threshold_tol"];
  o.band_tol = cfg["band_tol"];
  o.workers = cfg["workers"];
  o.quad = quad_options(cfg);
  o.solver = solver_options(cfg);
  o.tc = tc_options(cfg);
  const PhaseDiagram pd = phase_diagram(a, alphas, qs, o);
  std::ostringstream c, t;
  c << csv_preamble("phase-diagram", cfg);
  write_cells_csv(c, pd.cells);
  t << csv_preamble("phase-diagram", cfg);
  write_thresholds_csv(t, pd.thresholds);
  Outputs out;
  out.add(cfg["cells"], c.str());
  out.add(cfg["thresholds"], t.str());
  out.flush();
  return kOk;
}

// ------------------------------------------------------------------ simulate

Schema simulate_schema() {
  const GDConfig d;
  return {
      {"d", Kind::kInt, d.d, "dimension"},
      {"alphas", Kind::kNumArray, json::array({d.alpha}), "alpha grid"},
      {"q0s", Kind::kNumArray, json::array({d.q0}), "burn-in overlap grid"},
      {"replicates", Kind::kInt, 100, "replicates per grid point"},
      {"seed", Kind::kInt, 0, "master seed"},
      {"a", Kind::kNumber, d.a, "loss parameter a"},
      {"eta", Kind::kNumber, d.eta, "learning rate"},
      {"t_C", Kind::kInt, d.t_C, "burn-in steps"},
      {"T", Kind::kInt, -1, "free steps (-1: 12000 log2 d)"},
      {"success_threshold", Kind::kNumber, d.success_threshold, "success overlap"},
      {"latitude_half_width", Kind::kNumber, d.latitude_half_width, "latitude filter"},
      {"normalize_signal", Kind::kBool, d.normalize_signal, "unit-norm signal"},
      {"hessians", Kind::kBool, false, "Hessian spectra of trapped runs"},
      {"workers", Kind::kInt, 0, "worker threads (0: default)"},
      {"batch", Kind::kString, "-", "batch CSV output"},
      {"runs", Kind::kString, "", "per-run CSV output"},
      {"records", Kind::kString, "", "experiment records (JSON) output"},
  };
}

int cmd_simulate(const json& cfg) {
  GDConfig base;
  base.d = cfg["d"];
  base.a = cfg["a"];
  base.eta = cfg["eta"];
  base.t_C = cfg["t_C"];
  base.T = cfg["T"];
  base.success_threshold = cfg["success_threshold"];
  base.latitude_half_width = cfg["latitude_half_width"];
  base.normalize_signal = cfg["normalize_signal"];
  base.seed = cfg["seed"].get<std::uint64_t>();
  const auto alphas = vec(cfg["alphas"]), q0s = vec(cfg["q0s"]);
  try {
    for (double al : alphas) {
      for (double q0 : q0s) {
        GDConfig c = base;
        c.alpha = al;
        c.q0 = q0;
        c.validate();
      }
    }
    if (alphas.empty() || q0s.empty()) base.validate();
  } catch (const std::invalid_argument& ex) {
    throw ConfigError(ex.what());
  }
  require(cfg["replicates"].get<int>() >= 0, "replicates must be >= 0");
  require(cfg["workers"].get<int>() >= 0, "workers must be >= 0");
  BatchOptions bo;
  bo.replicates = cfg["replicates"];
  bo.master_seed = base.seed;
  bo.hessians = cfg["hessians"];
  bo.workers = cfg["workers"];
  const BatchResult b = batch_experiment(base, alphas, q0s, bo);
  Outputs out;
  std::ostringstream bs;
  bs << csv_preamble("simulate", cfg);
  write_batch_csv(bs, b);
  out.add(cfg["batch"], bs.str());
  if (!cfg["runs"].get<std::string>().empty()) {
    std::ostringstream rs;
    rs << csv_preamble("simulate", cfg);
    write_runs_csv(rs, b);
    out.add(cfg["runs"], rs.str());
  }
  if (!cfg["records"].get<std::string>().empty()) {
    json arr = json::array();
    for (ExperimentRecord& r : make_experiment_records(b, base)) {
      r.config = cfg;
      arr.push_back(to_json(r));
    }
    out.add(cfg["records"], arr.dump(1) + "\n");
  }
  out.flush();
  return kOk;
}

// ------------------------------------------------------------------- compare

Schema compare_schema() {
  return {
      {"theory", Kind::kString, "", "theory record(s) (JSON)"},
      {"experiment", Kind::kString, "", "experiment or theory record(s) (JSON)"},
      {"out", Kind::kString, "-", "report output (JSON)"},
      {"csv", Kind::kString, "", "report output (CSV)"},
      {"outlier_margin", Kind::kNumber, 0.05, "outlier distance below the edge"},
      {"outlier_overlap", Kind::kNumber, 0.1, "outlier eigenvector overlap threshold"},
  };
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& ex) {
    throw RecordError(path + ": " + ex.what());
  }
}

int cmd_compare(const json& cfg) {
  require(!cfg["theory"].get<std::string>().empty(), "theory input required");
  require(!cfg["experiment"].get<std::string>().empty(), "experiment input required");
  CompareOptions co;
  co.outlier_margin = cfg["outlier_margin"];
  co.outlier_overlap = cfg["outlier_overlap"];
  const auto theory = record_list(read_json_file(cfg["theory"]));
  const auto observed = record_list(read_json_file(cfg["experiment"]));
  const auto rows = compare_records(theory, observed, co);
  json report = {{"schema_version", kSchemaVersion}, {"kind", "comparison"}, {"config", cfg},
                 {"rows", json::array()}};
  for (const auto& r : rows) report["rows"].push_back(to_json(r));
  Outputs out;
  out.add(cfg["out"], report.dump(1) + "\n");
  if (!cfg["csv"].get<std::string>().empty()) {
    std::ostringstream cs;
    cs << csv_preamble("compare", cfg);
    write_comparison_csv(cs, rows);
    out.add(cfg["csv"], cs.str());
  }
  out.flush();
  return kOk;
}

int exit_code_for(const std::exception& ex) {
  if (dynamic_cast<const ConfigError*>(&ex) || dynamic_cast<const RecordError*>(&ex) ||
      dynamic_cast<const KeyMismatch*>(&ex) || dynamic_cast<const std::invalid_argument*>(&ex)) {
    return kConfig;
  }
  if (dynamic_cast<const NotConverged*>(&ex) || dynamic_cast<const InnerDiverged*>(&ex) ||
      dynamic_cast<const NoFixedPoint*>(&ex) || dynamic_cast<const ImCollapse*>(&ex) ||
      dynamic_cast<const ToleranceNotMet*>(&ex) || dynamic_cast<const NoConvergence*>(&ex) ||
      dynamic_cast<const NaNEncountered*>(&ex)) {
    return kNotConverged;
  }
  if (dynamic_cast<const EmptyBand*>(&ex) || dynamic_cast<const NonIntegrable*>(&ex) ||
      dynamic_cast<const EdgeNotFound*>(&ex) || dynamic_cast<const NoSolutionBelowEdge*>(&ex) ||
      dynamic_cast<const NoSignChange*>(&ex)) {
    return kInfeasible;
  }
  return kOther;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Kac-Rice landscape toolkit for phase retrieval"};
  app.require_subcommand(1);
  struct Command {
    const char* name;
    const char* help;
    Schema schema;
    int (*run)(const json&);
    std::string config;
    json overrides = json::object();
    CLI::App* sub = nullptr;
  };
  std::vector<Command> cmds;
  cmds.push_back({"complexity", "annealed complexity at one point", complexity_schema(), cmd_complexity, {}});
  cmds.push_back({"phase-diagram", "sweep over (alpha, q)", phase_schema(), cmd_phase_diagram, {}});
  cmds.push_back({"simulate", "gradient-descent batch", simulate_schema(), cmd_simulate, {}});
  cmds.push_back({"compare", "theory vs experiment report", compare_schema(), cmd_compare, {}});
  for (Command& c : cmds) {
    c.sub = app.add_subcommand(c.name, c.help);
    register_options(c.sub, c.schema, &c.config, &c.overrides);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfig;
  }
  for (Command& c : cmds) {
    if (!c.sub->parsed()) continue;
    try {
      const json cfg = resolve(c.schema, c.config, c.overrides);
      return c.run(cfg);
    } catch (const std::exception& ex) {
      std::cerr << "error: " << ex.what() << '\n';
      return exit_code_for(ex);
    }
  }
  return kOther;
}
