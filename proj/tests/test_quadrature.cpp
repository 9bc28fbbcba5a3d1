#include <cmath>
#include <memory>
#include <numeric>
#include <random>

#include "doctest.h"
#include "kacrice/quadrature.hpp"

using namespace kacrice;

namespace {

std::shared_ptr<const LossModel> loss(double a = 0.01) {
  return std::make_shared<PhaseRetrievalLoss>(a);
}

}  // namespace

TEST_CASE("base Gaussian moments") {
  for (double q : {0.0, 0.3, 0.8}) {
    GaussianMesh mesh(loss(), q);
    CHECK(mesh.expect(std::nullopt, [](double, double) { return 1.0; }) ==
          doctest::Approx(1.0).epsilon(1e-12));
    CHECK(mesh.expect(std::nullopt, [](double y, double) { return y * y; }) ==
          doctest::Approx(1.0).epsilon(1e-10));
    CHECK(mesh.expect(std::nullopt, [](double y, double ys) { return y * ys; }) ==
          doctest::Approx(q).epsilon(1e-10));
    CHECK(mesh.expect(std::nullopt, [](double y, double) { return y * y * y * y; }) ==
          doctest::Approx(3.0).epsilon(1e-10));
  }
}

TEST_CASE("zero tilt: partition function is alpha and moments are base moments") {
  GaussianMesh mesh(loss(), 0.2);
  TiltExponent p;
  p.alpha = 4.0;
  CHECK(mesh.log_partition(p) == doctest::Approx(std::log(4.0)).epsilon(1e-10));
  const MomentBundle m = mesh.moments(p);
  const double e_ell = mesh.expect(std::nullopt, [&](double y, double ys) {
    return mesh.loss().value({y, ys});
  });
  CHECK(m.ell == doctest::Approx(e_ell).epsilon(1e-8));
  // at g = 0, r = F/alpha
  const double e_F = mesh.expect(std::nullopt, [&](double y, double ys) {
    return mesh.loss().second_deriv({y, ys});
  });
  CHECK(m.r == doctest::Approx(e_F / 4.0).epsilon(1e-8));
}

TEST_CASE("tilted moments equal direct expectations") {
  GaussianMesh mesh(loss(0.1), 0.4);
  TiltExponent p;
  p.alpha = 5.0, p.lam_c = 0.1, p.lam_A = 0.01, p.lam_e = 0.3, p.g = 0.2;
  p.restrict_domain = true;
  const MomentBundle m = mesh.moments(p);
  const double A = mesh.expect(p, [&](double y, double ys) {
    return mesh.loss().derived({y, ys}, 0.4).A;
  });
  CHECK(m.A == doctest::Approx(A).epsilon(1e-8));
  const WeightLaw law = mesh.weight_law(p);
  const double total = std::accumulate(law.w.begin(), law.w.end(), 0.0);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  double mean_r = 0;
  for (std::size_t i = 0; i < law.size(); ++i) mean_r += law.w[i] * law.F[i] / (5.0 + 0.2 * law.F[i]);
  CHECK(mean_r == doctest::Approx(m.r).epsilon(1e-8));
}

TEST_CASE("base expectation agrees with Monte Carlo") {
  const double q = 0.5;
  GaussianMesh mesh(loss(), q);
  const double exact = mesh.expect(std::nullopt, [&](double y, double ys) {
    return mesh.loss().value({y, ys});
  });
  std::mt19937_64 gen(5);
  std::normal_distribution<double> n01;
  const int n = 400000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double y = n01(gen), ys = q * y + std::sqrt(1 - q * q) * n01(gen);
    const double v = mesh.loss().value({y, ys});
    s += v, s2 += v * v;
  }
  const double mean = s / n, se = std::sqrt((s2 / n - mean * mean) / n);
  CHECK(std::abs(mean - exact) < 5 * se);
}

TEST_CASE("a tilt with positive growth is rejected") {
  GaussianMesh mesh(loss(), 0.0);
  TiltExponent p;
  p.alpha = 3.0, p.lam_e = -1.0;  // exp(+ell) grows like exp(y^4)
  CHECK_THROWS_AS(mesh.log_partition(p), NonIntegrable);
}

TEST_CASE("constant and sampled weight laws") {
  const WeightLaw c = WeightLaw::constant(2.0);
  CHECK(c.size() == 1);
  CHECK(c.F[0] == 2.0);
  CHECK(c.w[0] == 1.0);
  const WeightLaw s = WeightLaw::from_samples({1, 2, 3, 4});
  CHECK(s.w[2] == doctest::Approx(0.25));
  CHECK(s.F_min == 1.0);
}
