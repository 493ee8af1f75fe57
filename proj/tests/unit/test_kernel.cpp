#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "smolu/kernel.hpp"

using namespace smolu;

TEST_SUITE("kernel") {
  TEST_CASE("constant kernel is 2 everywhere") {
    const auto k = make_constant();
    CHECK(k(1e-5, 3e4) == doctest::Approx(2.0));
    CHECK(k.epsilon() == 0.0);
  }

  TEST_CASE("power kernel values and certificate") {
    const auto k = make_power(0.1, 1.0 / 3.0);
    // 2 + 0.1 (8^{1/3} + 8^{-1/3})
    CHECK(k(8.0, 1.0) == doctest::Approx(2.25).epsilon(1e-14));
    CHECK(k(8.0, 1.0) == doctest::Approx(k(1.0, 8.0)).epsilon(1e-15));
    CHECK(k(80.0, 10.0) == doctest::Approx(k(8.0, 1.0)).epsilon(1e-14));
    const auto rep = validate(k, 2000);
    CHECK(rep.passed);
    CHECK(rep.symmetry < 1e-14);
    CHECK(rep.homogeneity < 1e-13);
  }

  TEST_CASE("brownian kernel") {
    const auto k = make_brownian();
    CHECK(k(1.0, 8.0) == doctest::Approx(4.5).epsilon(1e-14));
    CHECK(k(3.0, 3.0) == doctest::Approx(4.0).epsilon(1e-14));
  }

  TEST_CASE("parse specs") {
    CHECK(parse_kernel("constant")(2.0, 5.0) == doctest::Approx(2.0));
    const auto k = parse_kernel("power:0.1:1/3");
    CHECK(k.alpha() == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(k.epsilon() == doctest::Approx(0.1));
    CHECK_THROWS_AS(parse_kernel("power:0.1"), std::invalid_argument);
    CHECK_THROWS_AS(parse_kernel("power:x:0.3"), std::invalid_argument);
    CHECK_THROWS_AS(parse_kernel("power:0.1:1.5"), std::invalid_argument);
    CHECK_THROWS_AS(parse_kernel("quadratic"), std::invalid_argument);
  }
}
