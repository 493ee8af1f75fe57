#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <random>

#include "smolu/errors.hpp"
#include "smolu/selfsim.hpp"
#include "smolu/transform.hpp"

using namespace smolu;

TEST_SUITE("transform") {
  TEST_CASE("Q of e^{-x} is q/(1+q)") {
    const Profile p = Profile::exponential(Grid::standard());
    const TransformCurve c = q_transform(p, make_constant(), QGrid::standard());
    const TransformCurve bar = qbar_curve(c.qgrid);
    for (std::size_t i = 0; i < c.qgrid.size(); ++i) {
      const double q = c.qgrid[i];
      CHECK(c.Q[i] == doctest::Approx(bar.Q[i]).epsilon(1e-8));
      CHECK(c.Mcal[i] == 0.0);
      CHECK(std::fabs(c.ode_residual[i]) / (1.0 + c.Q[i] * c.Q[i]) < 1e-8);
      if (q > -0.9) CHECK(std::fabs(c.Q[i] - q / (1.0 + q)) < 1e-9);
    }
    CHECK(weighted_norm(c, bar) < 1e-6);
    CHECK_THROWS_AS(q_value(p, -1.0), IntegrabilityError);
  }

  TEST_CASE("M for power kernels against closed forms") {
    const Profile p = Profile::exponential(Grid::standard());
    // alpha = 0: K = 2 + 2 eps, M = eps Q^2
    const MFunctional m0(make_power(0.1, 0.0), p);
    for (double q : {-0.9, -0.3, 0.5, 20.0}) CHECK(m0(q) == doctest::Approx(0.1 * std::pow(q / (1 + q), 2)).epsilon(1e-9));
    // alpha = 1/3: eps Gamma(4/3) Gamma(2/3) (1 - (1+q)^{-4/3}) (1 - (1+q)^{-2/3})
    const MFunctional m(make_power(0.1, 1.0 / 3.0), p);
    CHECK(m(-0.9) == doctest::Approx(9.04651348010485507).epsilon(1e-9));
    CHECK(m(2.0) == doctest::Approx(0.0482761841886281502).epsilon(1e-9));
    CHECK(m(0.0) == 0.0);
  }

  TEST_CASE("V moment") {
    const Profile p = Profile::exponential(Grid::standard());
    // Gamma(2/3) (1 - 2^{-2/3})
    CHECK(v_moment(p, 1.0 / 3.0, 1.0) == doctest::Approx(0.501077091464604078).epsilon(1e-10));
  }

  TEST_CASE("weighted norm against zero") {
    const QGrid g = QGrid::standard();
    TransformCurve zero = qbar_curve(g);
    for (auto* v : {&zero.Q, &zero.Qprime}) std::fill(v->begin(), v->end(), 0.0);
    CHECK(weighted_norm(qbar_curve(g), zero) == doctest::Approx(1.0).epsilon(1e-12));
  }

  TEST_CASE("singularity of e^{-x} and of its rescaling") {
    const Profile p = Profile::exponential(Grid::standard());
    const SingularityEstimate e = locate_singularity(p);
    CHECK(e.q_star >= -1.02);
    CHECK(e.q_star <= -0.98);
    CHECK(e.q_refined == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(e.rate_check <= 0.05);
    CHECK_FALSE(e.left_domain);
    const SingularityEstimate e2 = locate_singularity(Profile::exponential(Grid::standard(), 2.0, 2.0));
    CHECK(e2.q_star >= -2.04);
    CHECK(e2.q_star <= -1.96);
    const Profile u = rescale_to_unit_singularity(Profile::exponential(Grid::standard(), 2.0, 2.0));
    CHECK(u.tail_rate() == doctest::Approx(1.0).epsilon(1e-11));
  }

  TEST_CASE("U reconstruction vanishes for the constant kernel") {
    const Profile p = Profile::exponential(Grid::standard());
    const TransformCurve c = q_transform(p, make_constant(), QGrid::dense());
    const std::vector<double> u = u_reconstruct(c);
    for (double v : u) CHECK(std::fabs(v) < 1e-12);
    CHECK(u_reconstruction_error(c) < 1e-6);
    CHECK_THROWS_AS(u_reconstruct(q_transform(p, make_constant(), QGrid::standard())), InsufficientGridError);
  }

  TEST_CASE("H kernels") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> uq(-0.999, 5.0), ux(0.01, 20.0);
    for (int i = 0; i < 200; ++i) CHECK(h_kernel(uq(rng), ux(rng), ux(rng)) >= 0.0);
    CHECK(h_tilde_limit(15.0, 15.0) * 27000.0 == doctest::Approx(2.0).epsilon(1e-9));
    // small-argument limit (X+Y)^{-3} int_0^{X+Y} xi^2 e^{-xi} -> 1/3
    CHECK(h_tilde_limit(1e-5, 1e-5) == doctest::Approx(1.0 / 3.0).epsilon(1e-4));
    CHECK(h_tilde(-1.0 + 1e-6, 5.0, 3.0) == doctest::Approx(h_tilde_limit(5.0, 3.0)).epsilon(1e-5));
  }

  TEST_CASE("QGrid validation") {
    CHECK_THROWS_AS(QGrid::from_values({-1.0, 0.0}), std::invalid_argument);
    CHECK_THROWS_AS(QGrid::from_values({0.0, 0.0}), std::invalid_argument);
    CHECK(QGrid::standard().size() == 85);
    CHECK(QGrid::dense().size() == 817);
  }
}

TEST_SUITE("integration") {
  TEST_CASE("ODE invariant and U representation on a wide grid") {
    // x_max ~ 640 keeps the tail amplitude error out of the q -> -1 end
    const Grid g = Grid::geometric(1e-6, 20, 586);
    const auto k = make_power(0.1, 1.0 / 3.0);
    const SolveResult r = solve(k, builtin_seed("exp", g), SolveSettings{}, g);
    REQUIRE(r.converged);
    const Profile u = rescale_to_unit_singularity(r.profile);
    const TransformCurve c = q_transform(u, k, QGrid::standard());
    double worst = 0.0;
    for (std::size_t i = 0; i < c.qgrid.size(); ++i)
      worst = std::max(worst, std::fabs(c.ode_residual[i]) / (1.0 + c.Q[i] * c.Q[i]));
    CHECK(worst <= 1e-3);
    CHECK(u_reconstruction_error(q_transform(u, k, QGrid::dense())) <= 1e-3);
  }
}
