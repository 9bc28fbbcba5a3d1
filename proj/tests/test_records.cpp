#include <cmath>
#include <memory>
#include <sstream>

#include "doctest.h"
#include "kacrice/records.hpp"

using namespace kacrice;
using nlohmann::json;

namespace {

ExperimentRecord synthetic_experiment(double alpha) {
  ExperimentRecord e;
  e.key = {0.01, alpha, 0.0};
  e.config = {{"d", 128}};
  e.master_seed = 5;
  e.runs = 4;
  e.successes = 1;
  e.energies = {0.1, 0.12, 0.3};
  e.overlaps = {0.01, -0.02, 0.04};
  e.eigenvalues = {0.1, 0.2, 0.35, 1.0 / 3.0, 2.5};
  e.min_eigs = {0.1, -0.2, 0.05};
  e.min_overlaps = {0.0, 0.5, 0.01};
  e.F = bin_law({-3.5, 0.5, 2.0, 100.0}, {}, default_F_edges());
  e.labels = label_quantiles({0.1, -1.0, 2.0}, {0.3, 0.2, -1.5}, {}, default_quantile_levels());
  return e;
}

}  // namespace

TEST_CASE("binning and quantiles") {
  const BinnedLaw b = bin_law({-10, 0.5, 0.5, 3.0}, {1, 1, 1, 1}, {0, 1, 2});
  REQUIRE(b.probs.size() == 4);
  CHECK(b.probs[0] == doctest::Approx(0.25));  // underflow
  CHECK(b.probs[1] == doctest::Approx(0.5));
  CHECK(b.probs[2] == doctest::Approx(0.0));
  CHECK(b.probs[3] == doctest::Approx(0.25));  // overflow

  std::vector<double> v;
  for (int i = 0; i <= 1000; ++i) v.push_back(i / 1000.0);
  const auto q = weighted_quantiles(v, {}, {0.1, 0.5, 0.9});
  CHECK(q[0] == doctest::Approx(0.1).epsilon(2e-3));
  CHECK(q[1] == doctest::Approx(0.5).epsilon(2e-3));
  CHECK(q[2] == doctest::Approx(0.9).epsilon(2e-3));
  // weights shift the median
  const auto m = weighted_quantiles({0.0, 1.0}, {0.9, 0.1}, {0.5});
  CHECK(m[0] == doctest::Approx(0.0));

  const auto lq = label_quantiles({1.0, -2.0}, {0.5, 0.5}, {}, {0.5});
  CHECK(lq.gap.size() == 1);
}

TEST_CASE("KS distance of a sample against a grid density") {
  const std::vector<double> w = {0.0, 0.5, 1.0};
  const std::vector<double> dens = {1.0, 1.0, 1.0};
  std::vector<double> sample;
  for (int i = 0; i < 100; ++i) sample.push_back((i + 0.5) / 100);
  CHECK(ks_sample_vs_grid(sample, w, dens) == doctest::Approx(0.005).epsilon(1e-9));
  CHECK(ks_sample_vs_grid({0.0}, w, dens) == doctest::Approx(1.0));
  CHECK(std::isnan(ks_sample_vs_grid({}, w, dens)));
}

TEST_CASE("experiment record round trip") {
  const ExperimentRecord e = synthetic_experiment(6.5);
  const json j = to_json(e);
  const std::string s = j.dump();
  const ExperimentRecord back = experiment_from_json(json::parse(s));
  CHECK(to_json(back).dump() == s);
  CHECK(back.eigenvalues[3] == 1.0 / 3.0);  // shortest round-trip form
  CHECK(record_list(j).size() == 1);
  CHECK(record_list(json::array({j, j})).size() == 2);
  json bad = j;
  bad["kind"] = "theory";
  CHECK_THROWS_AS(experiment_from_json(bad), RecordError);
}

TEST_CASE("theory record: round trip, self comparison and key pairing") {
  GaussianMesh mesh(std::make_shared<PhaseRetrievalLoss>(0.01), 0.0);
  const ComplexitySolution sol = complexity(mesh, std::nullopt, 6.5, Mode::kTilde0);
  REQUIRE(sol.converged);
  const TheoryRecord t = make_theory_record(mesh, sol, std::nullopt);
  CHECK(t.key == RecordKey{0.01, 6.5, 0.0});
  CHECK(t.F.probs.size() == default_F_edges().size() + 1);
  double mass = 0;
  for (double p : t.F.probs) mass += p;
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-9));

  const json j = to_json(t);
  const std::string s = j.dump();
  CHECK(to_json(theory_from_json(json::parse(s))).dump() == s);
  const ComplexitySolution back = solution_from_json(to_json(sol));
  CHECK(back.sigma == sol.sigma);
  CHECK(back.lam.lam_star == sol.lam.lam_star);
  CHECK(back.e == sol.e);

  const auto rows = compare_records({j}, {j});
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].spectral_ks == doctest::Approx(0.0).scale(1e-12));
  CHECK(rows[0].F_tv == 0.0);
  CHECK(rows[0].label_quantile_dist == 0.0);
  CHECK(rows[0].outlier_agree());

  // experiment records pair by key
  const auto ok = compare_records({j}, {to_json(synthetic_experiment(6.5))});
  REQUIRE(ok.size() == 1);
  CHECK(ok[0].mean_energy == doctest::Approx((0.1 + 0.12 + 0.3) / 3));
  CHECK(ok[0].spectral_ks >= 0.0);
  CHECK(ok[0].spectral_ks <= 1.0);
  try {
    compare_records({j}, {to_json(synthetic_experiment(7.0))});
    FAIL("expected KeyMismatch");
  } catch (const KeyMismatch& ex) {
    CHECK(ex.unpaired().size() == 2);
  }

  std::ostringstream csv;
  write_comparison_csv(csv, rows);
  CHECK(csv.str().rfind("a,alpha,q,mean_energy,energy_in_band,", 0) == 0);
}

TEST_CASE("all-critical-points solutions have no theory record") {
  GaussianMesh mesh(std::make_shared<PhaseRetrievalLoss>(0.01), 0.0);
  ComplexitySolution fake;
  fake.mode = Mode::kTC;
  CHECK_THROWS(make_theory_record(mesh, fake, std::nullopt));
}
