#include <cmath>
#include <memory>

#include "doctest.h"
#include "kacrice/variational_minima.hpp"

using namespace kacrice;

namespace {

GaussianMesh make_mesh(double q) {
  return GaussianMesh(std::make_shared<PhaseRetrievalLoss>(0.01), q);
}

}  // namespace

TEST_CASE("closed-form prefactor") {
  CHECK(complexity_prefactor(1.0, 0.0) == doctest::Approx(-0.5));
  const double a = 3.0, q = 0.4;
  CHECK(complexity_prefactor(a, q) ==
        doctest::Approx((-1 + (1 - 2 * a) * std::log(a)) / 2 + std::log(1 - q * q) / 2));
}

TEST_CASE("mode names round-trip") {
  for (Mode m : {Mode::kTilde0, Mode::kFin, Mode::kTC}) CHECK(parse_mode(mode_name(m)) == m);
  CHECK_THROWS_AS(parse_mode("bogus"), std::invalid_argument);
}

TEST_CASE("sup-inf entry points reject the all-critical-points mode") {
  GaussianMesh mesh = make_mesh(0.0);
  CHECK_THROWS(complexity(mesh, std::nullopt, 5.0, Mode::kTC));
}

TEST_CASE("free and pinned energy solutions are consistent") {
  GaussianMesh mesh = make_mesh(0.2);
  const ComplexitySolution free = complexity(mesh, std::nullopt, 5.0, Mode::kTilde0);
  REQUIRE(free.converged);
  CHECK(std::abs(free.lam.lam_e) < 1e-6);
  CHECK(free.lam.lam_A >= 0);
  CHECK(free.lam.lam_h >= 0);
  CHECK(free.lam.lam_star >= 0);
  // pinning e at the free optimum reproduces the same complexity
  const ComplexitySolution pinned =
      complexity(mesh, free.energy, 5.0, Mode::kTilde0, &free);
  REQUIRE(pinned.converged);
  CHECK(pinned.sigma == doctest::Approx(free.sigma).epsilon(1e-6));
  // nearby energies have lower complexity
  const ComplexitySolution off = complexity(mesh, free.energy * 1.2, 5.0, Mode::kTilde0, &free);
  CHECK(off.sigma < free.sigma);

  // dropping the minimality constraint can only enlarge the count
  const ComplexitySolution fin = complexity(mesh, std::nullopt, 5.0, Mode::kFin, &free);
  REQUIRE(fin.converged);
  CHECK(fin.lam.lam_star == 0.0);
  CHECK(fin.sigma >= free.sigma - 1e-8);
}

TEST_CASE("energy band brackets the optimum") {
  GaussianMesh mesh = make_mesh(0.0);
  const EnergyBand b = energy_band(mesh, 4.5, Mode::kTilde0);
  REQUIRE_FALSE(b.empty);
  CHECK(b.e_min < b.e_star);
  CHECK(b.e_star < b.e_max);
  CHECK(b.sigma_at_star > 0);
  CHECK(std::abs(b.at_min.sigma) < 1e-5);
  CHECK(std::abs(b.at_max.sigma) < 1e-5);
}

TEST_CASE("multi-start outer ascent finds a single maximum") {
  GaussianMesh mesh = make_mesh(0.2);
  const MultiStartReport rep =
      complexity_multistart(mesh, std::nullopt, 5.0, Mode::kTilde0, {{2.0, 1.0}, {0.5, 0.7}});
  REQUIRE_FALSE(rep.maxima.empty());
  CHECK_FALSE(rep.ambiguous());
  const ComplexitySolution direct = complexity(mesh, std::nullopt, 5.0, Mode::kTilde0);
  CHECK(rep.maxima.front().sigma == doctest::Approx(direct.sigma).epsilon(1e-6));
}
