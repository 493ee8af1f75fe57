#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "smolu/errors.hpp"
#include "smolu/profile.hpp"

using namespace smolu;

TEST_SUITE("profile") {
  TEST_CASE("standard grid") {
    const Grid g = Grid::standard();
    CHECK(g.size() == 526);
    CHECK(g.x_min() == doctest::Approx(1e-6));
    CHECK(g.x_max() == doctest::Approx(79.81).epsilon(1e-3));
    CHECK(*g.nodes_per_doubling() == 20);
  }

  TEST_CASE("moments of e^{-x}") {
    const Profile p = Profile::exponential(Grid::standard());
    CHECK(mass(p) == doctest::Approx(1.0).epsilon(1e-11));
    CHECK(integrate(p, PowerExp{0.0, 0.0}) == doctest::Approx(1.0).epsilon(1e-11));
    CHECK(moment(p, 1.0 / 3.0) == doctest::Approx(0.892979511569249211).epsilon(1e-10));
    CHECK(negative_moment(p, 1.0 / 3.0) == doctest::Approx(1.04968849164224172).epsilon(1e-10));
    CHECK(moment(p, 10.0) == doctest::Approx(3628800.0).epsilon(1e-9));
  }

  TEST_CASE("interpolation between nodes") {
    const Profile p = Profile::sample(Grid::standard(), [](double x) { return std::exp(-x) / (1.0 + x); });
    for (double x : {3.3e-6, 0.0123, 0.77, 5.5, 61.0})
      CHECK(p.value(x) == doctest::Approx(std::exp(-x) / (1.0 + x)).epsilon(1e-9));
  }

  TEST_CASE("rescale maps a e^{-a x} from e^{-x}") {
    const Profile p = rescale(Profile::exponential(Grid::standard()), 2.0);
    CHECK(p.value(1.5) == doctest::Approx(2.0 * std::exp(-3.0)).epsilon(1e-10));
    CHECK(p.tail_rate() == doctest::Approx(2.0));
    CHECK(mass(p) == doctest::Approx(0.5).epsilon(1e-10));
  }

  TEST_CASE("tail fit and L1 distance") {
    const Grid g = Grid::standard();
    const Profile p = Profile::sample(g, [](double x) { return 3.0 * std::exp(-1.5 * x); });
    const TailFit fit = fit_tail(p, 8.0, 79.0);
    CHECK(fit.rate == doctest::Approx(1.5).epsilon(1e-10));
    CHECK(fit.amplitude == doctest::Approx(3.0).epsilon(1e-8));
    CHECK(l1_mass_distance(p, p) < 1e-14);
    const Profile q = Profile::exponential(g);
    // int x |e^{-x} - 2 e^{-x}| = 1
    CHECK(l1_mass_distance(q, q.scaled(2.0)) == doctest::Approx(1.0).epsilon(1e-9));
  }

  TEST_CASE("dyadic mass bound of e^{-x}") {
    // sup over R = 2^j of (1/R) int_{R/2}^R x e^{-x} dx sits at R = 1
    const double v = dyadic_mass_bound(Profile::exponential(Grid::standard()));
    CHECK(v == doctest::Approx(1.5 * std::exp(-0.5) - 2.0 * std::exp(-1.0)).epsilon(1e-9));
  }

  TEST_CASE("CSV round trip") {
    const Profile p = Profile::sample(Grid::standard(), [](double x) { return x * std::exp(-x); });
    const auto path = (std::filesystem::temp_directory_path() / "smolu_roundtrip.csv").string();
    write_profile_csv(p, path);
    const Profile q = read_profile_csv(path);
    std::filesystem::remove(path);
    CHECK(q.values() == p.values());
    CHECK(q.tail_rate() == p.tail_rate());
    CHECK(q.tail_amplitude() == p.tail_amplitude());
  }

  TEST_CASE("errors") {
    const Profile z = Profile::sample(Grid::standard(), [](double) { return 0.0; });
    CHECK_THROWS_AS(normalize_mass(z), ZeroProfileError);
    const Profile p = Profile::exponential(Grid::standard());
    CHECK_THROWS_AS(integrate(p, PowerExp{0.0, -1.5}), DivergentTailError);
    CHECK_THROWS_AS(rescale(p, 0.0), std::invalid_argument);
  }
}
