#include <cmath>
#include <random>

#include "doctest.h"
#include "kacrice/loss_model.hpp"

using namespace kacrice;

namespace {

// central differences in y
double d1_fd(const LossModel& l, double y, double ys, double h = 1e-5) {
  return (l.value({y + h, ys}) - l.value({y - h, ys})) / (2 * h);
}
double d2_fd(const LossModel& l, double y, double ys, double h = 1e-5) {
  return (l.first_deriv({y + h, ys}) - l.first_deriv({y - h, ys})) / (2 * h);
}

}  // namespace

TEST_CASE("phase retrieval loss: value and derivatives against finite differences") {
  std::mt19937_64 gen(7);
  std::normal_distribution<double> n01;
  for (double a : {0.01, 0.1, 1.0}) {
    PhaseRetrievalLoss l(a);
    for (int k = 0; k < 200; ++k) {
      const double y = 2 * n01(gen), ys = 2 * n01(gen);
      const double r = y * y - ys * ys;
      CHECK(l.value({y, ys}) == doctest::Approx(r * r / (a + ys * ys)).epsilon(1e-14));
      const double s1 = std::max(1.0, std::abs(l.first_deriv({y, ys})));
      const double s2 = std::max(1.0, std::abs(l.second_deriv({y, ys})));
      CHECK(std::abs(l.first_deriv({y, ys}) - d1_fd(l, y, ys)) < 1e-6 * s1);
      CHECK(std::abs(l.second_deriv({y, ys}) - d2_fd(l, y, ys)) < 1e-6 * s2);
      CHECK(l.second_deriv({y, ys}) >= l.second_deriv_infimum());
    }
  }
}

TEST_CASE("global minimum: zero loss and gradient, F = 8 y*^2/(a + y*^2)") {
  PhaseRetrievalLoss l(0.01);
  for (double ys : {-2.0, -0.3, 0.0, 0.7, 3.0}) {
    CHECK(l.value({ys, ys}) == 0.0);
    CHECK(l.first_deriv({ys, ys}) == 0.0);
    CHECK(l.second_deriv({ys, ys}) == doctest::Approx(8 * ys * ys / (0.01 + ys * ys)));
  }
}

TEST_CASE("derived functions") {
  PhaseRetrievalLoss l(0.1);
  const double q = 0.4, y = 0.8, ys = -1.3;
  const DerivedFunctions d = l.derived({y, ys}, q);
  const double g = l.first_deriv({y, ys}), F = l.second_deriv({y, ys});
  CHECK(d.A == doctest::Approx(g * g));
  CHECK(d.c_q == doctest::Approx((ys - q * y) / std::sqrt(1 - q * q) * g));
  CHECK(d.F == doctest::Approx(F));
  CHECK(d.t == doctest::Approx(y * g));
  CHECK(d.K_q == doctest::Approx(F * (ys - q * y) * (ys - q * y) / (1 - q * q) - y * g));
  CHECK_THROWS_AS(l.derived({y, ys}, 1.0), std::invalid_argument);
}

TEST_CASE("infimum of the second derivative is approached") {
  PhaseRetrievalLoss l(0.01);
  // F(0, y*) = -4 y*^2/(a + y*^2) -> -4
  CHECK(l.second_deriv({0.0, 100.0}) == doctest::Approx(-4.0).epsilon(1e-5));
  CHECK(l.second_deriv_infimum() == -4.0);
}

TEST_CASE("factory") {
  auto l = make_loss("phase_retrieval", 0.5);
  CHECK(l->name() == "phase_retrieval");
  CHECK(l->clone()->value({1.0, 0.0}) == l->value({1.0, 0.0}));
  CHECK_THROWS_AS(make_loss("hinge", 0.5), std::invalid_argument);
  CHECK_THROWS_AS(PhaseRetrievalLoss(0.0), std::invalid_argument);
}
