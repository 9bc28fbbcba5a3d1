#include <cmath>

#include "doctest.h"
#include "kacrice/bbp_analyzer.hpp"

using namespace kacrice;

namespace {

WeightLaw unit_law(double vF) {
  WeightLaw nu = WeightLaw::constant(1.0);
  nu.vF = {vF};
  return nu;
}

}  // namespace

TEST_CASE("Wishart: label weights equal to F give no outlier") {
  // with vF == F, x2 = x_min + 1/g_min, so d = -1/g_min < 0
  for (double alpha : {2.0, 5.0}) {
    const BBPResult r = edge_functionals(unit_law(1.0), alpha, 0.0);
    CHECK(r.x_min == doctest::Approx(std::pow(1 - 1 / std::sqrt(alpha), 2)).epsilon(1e-8));
    CHECK(r.d_alpha == doctest::Approx(-1 / r.g_min).epsilon(1e-8));
    CHECK(r.d_alpha < 0);
    CHECK_FALSE(outlier_location(unit_law(1.0), alpha, 0.0).has_value());
  }
}

TEST_CASE("label weights are required") {
  CHECK_THROWS_AS(edge_functionals(WeightLaw::constant(1.0), 3.0, 0.0), std::invalid_argument);
}

TEST_CASE("small label weights give an outlier solving its equation") {
  const double alpha = 4.0, v = 0.05;
  const WeightLaw nu = unit_law(v);
  BBPResult r;
  const auto xs = outlier_location(nu, alpha, 0.0, &r);
  REQUIRE(xs.has_value());
  CHECK(r.d_alpha > 0);
  CHECK(*xs < r.x_min);
  const double g = stieltjes_at({*xs, 1e-12}, nu, alpha).real();
  CHECK(*xs == doctest::Approx(alpha * v / (alpha + g)).epsilon(1e-7));
  CHECK(r.w_star().has_value());
  CHECK(*r.w_star() == doctest::Approx(*xs - r.t_nu));
}

TEST_CASE("threshold bisection") {
  CHECK(bbp_threshold([](double a) { return a - 3.3; }, 2.0, 5.0, 1e-6) ==
        doctest::Approx(3.3).epsilon(1e-5));
  CHECK_THROWS_AS(bbp_threshold([](double a) { return a + 1.0; }, 2.0, 5.0), NoSignChange);
}
