#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "smolu/selfsim.hpp"

using namespace smolu;

TEST_SUITE("selfsim") {
  TEST_CASE("e^{-x} is a fixed point for the constant kernel") {
    const Profile p = Profile::exponential(Grid::standard());
    const Profile t = apply_map(make_constant(), p);
    for (double x : {1e-4, 0.3, 1.0, 7.0, 35.0}) CHECK(t.value(x) == doctest::Approx(std::exp(-x)).epsilon(1e-9));
    CHECK(residual(make_constant(), p) < 1e-8);
  }

  TEST_CASE("map of e^{-x} under power(0.1, 1/3) against a 1-D reduction") {
    // inner z-integral in closed form with incomplete gammas, outer by mpmath quad
    const Profile t = apply_map(make_power(0.1, 1.0 / 3.0), Profile::exponential(Grid::standard()));
    CHECK(t.value(0.001) == doctest::Approx(1.540212486567240254).epsilon(1e-7));
    CHECK(t.value(0.5) == doctest::Approx(0.675064102215891133).epsilon(1e-7));
    CHECK(t.value(1.0) == doctest::Approx(0.407658380720357200).epsilon(1e-7));
    CHECK(t.value(4.0) == doctest::Approx(0.020280525408676102).epsilon(1e-7));
    CHECK(t.value(20.0) == doctest::Approx(2.292609814805784310e-9).epsilon(1e-6));
  }

  TEST_CASE("constant kernel from a gamma seed converges to e^{-x}") {
    const Grid g = Grid::standard();
    const SolveResult r = solve(make_constant(), builtin_seed("gamma2", g));
    REQUIRE(r.converged);
    CHECK(l1_mass_distance(r.profile, Profile::exponential(g)) < 1e-3);
    CHECK(mass(r.profile) == doctest::Approx(1.0).epsilon(1e-10));
  }

  TEST_CASE("settings validation") {
    SolveSettings s;
    s.omega = 0.0;
    CHECK_THROWS_AS(s.check(), std::invalid_argument);
    s = SolveSettings{};
    s.refinement = 1;
    CHECK_THROWS_AS(s.check(), std::invalid_argument);
    CHECK_THROWS_AS(builtin_seed("nope", Grid::standard()), std::invalid_argument);
  }
}
