#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "smolu/quadrature.hpp"

using namespace smolu;

TEST_SUITE("quadrature") {
  TEST_CASE("Gauss-Legendre integrates polynomials on [0,1]") {
    const auto& g = gauss_legendre(6);
    double s = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) s += g.weights[k] * std::pow(g.nodes[k], 11);
    CHECK(s == doctest::Approx(1.0 / 12.0).epsilon(1e-14));
  }

  TEST_CASE("scaled Gauss-Laguerre") {
    const auto& g = gauss_laguerre_scaled(24);
    double s = 0.0;
    for (std::size_t k = 0; k < g.size(); ++k) s += g.weights[k] * std::exp(-g.nodes[k]) * std::pow(g.nodes[k], 3);
    CHECK(s == doctest::Approx(6.0).epsilon(1e-12));
  }

  TEST_CASE("upper incomplete gamma at negative order") {
    CHECK(upper_gamma(-0.5, 2.0) == doctest::Approx(0.0300987571001864663).epsilon(1e-10));
    CHECK(upper_gamma(-1.0, 2.0) == doctest::Approx(0.0187671309102452264).epsilon(1e-10));
    CHECK(upper_gamma(2.0, 1.0) == doctest::Approx(2.0 / std::exp(1.0)).epsilon(1e-13));
  }

  TEST_CASE("compensated sum keeps small terms") {
    CompensatedSum s;
    s.add(1e16);
    for (int i = 0; i < 1000; ++i) s.add(1.0);
    s.add(-1e16);
    CHECK(s.value() == 1000.0);
  }

  TEST_CASE("shifted power-exponential integral") {
    // int_0^inf (1 + t)^{-3} dt = 1/2
    CHECK(shifted_power_exp_integral(-3.0, 1.0, 0.0) == doctest::Approx(0.5).epsilon(1e-12));
    // int_0^inf (2 + t) e^{-t} dt = 3
    CHECK(shifted_power_exp_integral(1.0, 2.0, 1.0) == doctest::Approx(3.0).epsilon(1e-12));
  }
}
