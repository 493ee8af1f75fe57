#include <doctest.h>

#include <stdexcept>

#include <cmath>

#include "smolu/errors.hpp"
#include "smolu/verify.hpp"

using namespace smolu;

namespace {

const CheckEntry& get(const VerificationReport& r, const std::string& id) {
  const CheckEntry* e = r.find(id);
  REQUIRE_MESSAGE(e != nullptr, id);
  return *e;
}

}  // namespace

TEST_SUITE("verify") {
  TEST_CASE("estimate ledger on e^{-x}") {
    EstimateSettings s;
    s.reconstruct_u = false;
    const VerificationReport r = run_estimates(Profile::exponential(Grid::standard()), make_constant(), s);
    CHECK(r.passed());
    CHECK(get(r, "f1").measured == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(*get(r, "f1").pass);
    // (1+q)|Q|/|q| = 1 for Q = q/(1+q), bound 2
    CHECK(get(r, "f3").measured == doctest::Approx(1.0).epsilon(1e-8));
    // int_R^2R e^x e^{-x} dx = R
    CHECK(get(r, "f4").measured == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(get(r, "f5").measured == doctest::Approx(0.5).epsilon(1e-9));
    CHECK_FALSE(get(r, "f2").pass.has_value());
    CHECK(get(r, "decay.rate").measured == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(get(r, "regularity.slope").measured == doctest::Approx(1.0).epsilon(1e-2));
    CHECK(get(r, "transform.delta").measured < 1e-6);
  }

  TEST_CASE("g estimates on e^{-x}") {
    const VerificationReport r = check_g_estimates(Profile::exponential(Grid::standard()), 0.0);
    CHECK(get(r, "g1.slope").measured == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(get(r, "g3.slope").measured == doctest::Approx(1.0).epsilon(1e-6));
    // 2 int_0^inf dY / (1 + Y^3) as 1+q_n -> 0
    CHECK(get(r, "g4[1+q_n=1e-03]").measured == doctest::Approx(2.41839915231229047).epsilon(2e-3));
    CHECK(r.passed());
    CHECK_THROWS_AS(check_g_estimates(Profile::exponential(Grid::standard(), 1.0, 0.5), 0.0), IntegrabilityError);
  }

  TEST_CASE("moment bound against Gamma function values") {
    const Profile p = Profile::exponential(Grid::standard());
    const VerificationReport r = check_moment_bound(p, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10}, 1.0);
    CHECK(r.passed());
    CHECK(get(r, "moment.gamma_01.000").measured == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(get(r, "moment.gamma_10.000").measured == doctest::Approx(std::pow(3628800.0, 0.1)).epsilon(1e-10));
    // max over gamma of log(Gamma(gamma+1)^{1/gamma} / gamma) is 0, at gamma = 1
    CHECK(std::fabs(get(r, "moment.min_A").measured) < 1e-10);
    CHECK_THROWS_AS(check_moment_bound(p, {0.5}, 1.0), std::invalid_argument);
  }

  TEST_CASE("report is deterministic and rejects duplicates") {
    EstimateSettings s;
    s.reconstruct_u = false;
    const Profile p = Profile::exponential(Grid::standard());
    CHECK(run_estimates(p, make_constant(), s).to_json() == run_estimates(p, make_constant(), s).to_json());
    VerificationReport r;
    r.add(CheckEntry{"a", "x", 1.0, std::nullopt, std::nullopt, ""});
    CHECK_THROWS_AS(r.add(CheckEntry{"a", "y", 2.0, std::nullopt, std::nullopt, ""}), std::invalid_argument);
    CHECK(r.to_json().find("\"reported-only\"") != std::string::npos);
  }

  TEST_CASE("contraction probe") {
    const Grid g = Grid::standard();
    const Profile p = Profile::exponential(g);
    CHECK_THROWS_AS(contraction_probe(make_constant(), p, p), ZeroDistanceError);
    const double r = contraction_probe(make_constant(), p, builtin_seed("perturbed", g));
    CHECK(r < 1.0);
    CHECK(r > 0.0);
  }

  TEST_CASE("scan at eps = 0") {
    const auto rows = qclose_scan({0.0});
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].converged);
    CHECK(rows[0].delta < 1e-6);
    CHECK(scan_csv(rows).rfind("eps,delta,sup_nu", 0) == 0);
  }
}
