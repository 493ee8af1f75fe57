#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <random>

#include "smolu/dynamics.hpp"

using namespace smolu;

TEST_SUITE("dynamics") {
  TEST_CASE("constant-kernel rate of e^{-xi}") {
    // phi = e^{-xi}: d/dt phi = (1+t)^{-3} (xi - 2) e^{-xi} at t = 0
    const Grid g = dynamics_grid();
    const State s = initial_state(g, [](double x) { return std::exp(-x); });
    const auto rate = collision_operator(make_constant(), s);
    for (std::size_t i = 0; i < g.size(); ++i)
      if (g[i] > 0.01 && g[i] < 20.0) CHECK(rate[i] == doctest::Approx((g[i] - 2.0) * std::exp(-g[i])).epsilon(1e-5));
  }

  TEST_CASE("mass is conserved for a random smooth state") {
    const Grid g = dynamics_grid();
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.5, 1.5);
    std::vector<double> factor(g.size());
    for (auto& v : factor) v = u(rng);
    std::size_t i = 0;
    const State s = initial_state(g, [&](double x) { return factor[i++] * std::exp(-x) / (1.0 + x); });
    const CollisionOperator op(make_power(0.1, 1.0 / 3.0), g);
    const auto rate = op(s);
    double flux = 0.0, scale = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) {
      flux += g.log_step() * g[j] * g[j] * rate[j];
      scale += g.log_step() * g[j] * g[j] * std::fabs(rate[j]);
    }
    CHECK(std::fabs(flux) < 1e-13 * scale);
    CHECK(std::fabs(op.last_correction()) < 1e-2);
  }

  TEST_CASE("exact constant-kernel trajectory at t = 1") {
    const State s0 = initial_state(dynamics_grid(), [](double x) { return std::exp(-x); });
    const EvolveResult r = evolve(make_constant(), s0, 1.0);
    const State& s = r.snapshots.back();
    CHECK(s.time == 1.0);
    for (std::size_t i = 0; i < s.grid.size(); ++i) {
      const double x = s.grid[i];
      if (x < 0.1 || x > 10.0) continue;
      CHECK(s.phi[i] == doctest::Approx(0.25 * std::exp(-x / 2.0)).epsilon(1e-3));
    }
    CHECK(r.max_mass_drift < 1e-12);
  }

  TEST_CASE("snapshots and scaling") {
    const State s0 = initial_state(dynamics_grid(), [](double x) { return std::exp(-x); });
    EvolveSettings st;
    st.snapshots = {0.5, 0.25, 5.0};
    const EvolveResult r = evolve(make_constant(), s0, 1.0, st);
    REQUIRE(r.snapshots.size() == 3);
    CHECK(r.snapshots[0].time == 0.25);
    CHECK(r.snapshots[1].time == 0.5);
    // t^2 phi(x t) with phi = (1+t)^{-2} e^{-xi/(1+t)} at t = 1: (1/4) e^{-x/2}
    const Profile sc = scaled_profile(r.snapshots[2]);
    CHECK(sc.value(1.0) == doctest::Approx(0.25 * std::exp(-0.5)).epsilon(1e-3));
    CHECK_THROWS_AS(scaled_profile(s0), std::invalid_argument);
  }

  TEST_CASE("input validation") {
    CHECK_THROWS_AS(initial_state(dynamics_grid(), [](double) { return -1.0; }), std::invalid_argument);
    EvolveSettings st;
    st.max_change = 2.0;
    const State s0 = initial_state(dynamics_grid(), [](double x) { return std::exp(-x); });
    CHECK_THROWS_AS(evolve(make_constant(), s0, 1.0, st), std::invalid_argument);
    CHECK_THROWS_AS(evolve(make_constant(), s0, -1.0), std::invalid_argument);
  }
}
