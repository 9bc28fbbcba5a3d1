#include <cmath>
#include <sstream>
#include <string>

#include "doctest.h"
#include "kacrice/landscape_scan.hpp"

using namespace kacrice;

namespace {

ScanOptions light(int workers) {
  ScanOptions o;
  o.with_tc = false;
  o.with_bands = false;
  o.with_thresholds = false;
  o.workers = workers;
  return o;
}

}  // namespace

TEST_CASE("threshold bisection") {
  CHECK(threshold_bisect([](double a) { return a - 5.0; }, 4.0, 7.0, 1e-8) ==
        doctest::Approx(5.0).epsilon(1e-8));
  CHECK_THROWS_AS(threshold_bisect([](double a) { return a * a + 1; }, 4.0, 7.0), NoSignChange);
  CHECK_THROWS_AS(threshold_bisect([](double a) { return a; }, 7.0, 4.0), std::invalid_argument);
}

TEST_CASE("CSV headers") {
  std::ostringstream c, t;
  write_cells_csv(c, {});
  write_thresholds_csv(t, {});
  CHECK(c.str() ==
        "a,alpha,q,sigma_tilde0,sigma_fin,sigma_tc,e_star,e_min,e_max,d_alpha_typ,d_alpha_low,"
        "d_alpha_high,flags\n");
  CHECK(t.str() ==
        "a,q,alpha_triv_min,alpha_triv_fin,alpha_triv_tc,alpha_bbp_typ,alpha_bbp_low,"
        "alpha_bbp_high\n");
}

TEST_CASE("grid validation") {
  CHECK_THROWS_AS(phase_diagram(0.01, {5.0}, {0.97}, light(1)), std::invalid_argument);
  CHECK_THROWS_AS(phase_diagram(0.01, {6.0, 5.0}, {0.0}, light(1)), std::invalid_argument);
  CHECK_THROWS_AS(phase_diagram(-1.0, {5.0}, {0.0}, light(1)), std::invalid_argument);
  const PhaseDiagram empty = phase_diagram(0.01, {}, {}, light(1));
  CHECK(empty.cells.empty());
}

TEST_CASE("phase diagram is independent of the worker count") {
  const PhaseDiagram one = phase_diagram(0.01, {5.0, 6.0}, {0.0, 0.3}, light(1));
  const PhaseDiagram two = phase_diagram(0.01, {5.0, 6.0}, {0.0, 0.3}, light(2));
  REQUIRE(one.cells.size() == 4);
  std::ostringstream a, b;
  write_cells_csv(a, one.cells);
  write_cells_csv(b, two.cells);
  CHECK(a.str() == b.str());
  // sorted by (q, alpha)
  CHECK(one.cells[0].q == 0.0);
  CHECK(one.cells[1].alpha == 6.0);
  for (const auto& c : one.cells) CHECK(c.sigma_fin >= c.sigma_tilde0 - 1e-8);
}

TEST_CASE("overlap band at q = 0 matches a direct solve") {
  const double alpha = 5.0;
  const OverlapBand band = high_overlap_band(0.01, alpha, std::nullopt, {0.0}, light(1));
  REQUIRE(band.points.size() == 1);
  REQUIRE(band.points[0].ok);
  GaussianMesh mesh(std::make_shared<PhaseRetrievalLoss>(0.01), 0.0);
  const ComplexitySolution s = complexity(mesh, std::nullopt, alpha, Mode::kTilde0);
  CHECK(band.points[0].sigma == s.sigma);
}
