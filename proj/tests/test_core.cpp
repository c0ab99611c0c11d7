#include <doctest.h>

#include "rits/core.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

using namespace rits;

TEST_SUITE("core") {
  TEST_CASE("arm ids are one-based") {
    CHECK(ArmId(1) == kPlacebo);
    CHECK(ArmId(3).index() == 2);
    CHECK(ArmId::from_index(3) == ArmId(4));
    CHECK(ArmId(4).valid_for(4));
    CHECK_FALSE(ArmId(0).valid_for(4));
    CHECK_FALSE(ArmId(5).valid_for(4));
  }

  TEST_CASE("covariates gain a leading intercept") {
    const std::vector<double> raw{0.5, 0.25};
    const auto x = Covariates::from_raw(raw);
    CHECK(x.dim() == 3);
    CHECK(x.raw_dim() == 2);
    CHECK(x.augmented()[0] == 1.0);
    CHECK(x.augmented()[1] == 0.5);
    CHECK(x.raw_vector() == raw);
    const std::vector<double> bad{1.0, std::nan("")};
    CHECK_THROWS_AS(Covariates::from_raw(bad), ValidationError);
  }

  TEST_CASE("rescale_endpoint maps the effective range onto [0, 1] without clamping") {
    CHECK(rescale_endpoint(5.0, 0.0, 10.0) == doctest::Approx(0.5));
    CHECK(rescale_endpoint(0.0, 0.0, 10.0) == 0.0);
    CHECK(rescale_endpoint(10.0, 0.0, 10.0) == 1.0);
    CHECK(rescale_endpoint(15.0, 0.0, 10.0) == doctest::Approx(1.5));
    CHECK(rescale_endpoint(-5.0, 0.0, 10.0) == doctest::Approx(-0.5));
    CHECK_THROWS_AS(rescale_endpoint(1.0, 2.0, 2.0), ConfigError);
    CHECK_THROWS_AS(rescale_endpoint(1.0, 3.0, 2.0), ConfigError);
  }

  TEST_CASE("rescale_endpoint commutes with affine maps of value and bounds") {
    for (double a : {0.5, 2.0, 7.0}) {
      for (double b : {-3.0, 0.0, 4.5}) {
        for (double v : {-1.0, 0.3, 2.2}) {
          CHECK(rescale_endpoint(a * v + b, a * -1.0 + b, a * 3.0 + b) ==
                doctest::Approx(rescale_endpoint(v, -1.0, 3.0)).epsilon(1e-12));
        }
      }
    }
  }

  TEST_CASE("propensity vectors") {
    const auto u = PropensityVector::uniform(4);
    CHECK(u.arms() == 4);
    CHECK(u.sum() == doctest::Approx(1.0));
    CHECK(u[ArmId(2)] == 0.25);
    const PropensityVector q({0.1, 0.5, 0.3, 0.1});
    CHECK(q.argmax() == ArmId(2));
    CHECK(PropensityVector({0.4, 0.4, 0.2}).argmax() == ArmId(1));
  }

  TEST_CASE("trial config validation names the offending fields") {
    TrialConfig c;
    CHECK_NOTHROW(c.validate());
    c.delta = 0.3;  // >= 1/K for K = 4
    try {
      c.validate();
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      REQUIRE(e.issues().size() == 1);
      CHECK(e.issues()[0].field == "delta");
    }
    c = TrialConfig{};
    c.alpha = 1.5;
    c.M = 0;
    c.K = 1;
    try {
      c.validate();
      FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
      std::vector<std::string> fields;
      for (const auto& f : e.issues()) fields.push_back(f.field);
      CHECK(std::count(fields.begin(), fields.end(), "alpha") == 1);
      CHECK(std::count(fields.begin(), fields.end(), "M") == 1);
      CHECK(std::count(fields.begin(), fields.end(), "K") == 1);
    }
  }

  TEST_CASE("outcome availability under delay") {
    TrialConfig c;
    c.delay = 10;
    CHECK(c.availability_index(1) == 11);
    CHECK(c.availability_index(40) == 50);
    c.delay = 0;
    CHECK(c.availability_index(7) == 8);
  }

  TEST_CASE("rho mode names") {
    CHECK(parse_rho_mode(to_string(RhoMode::kAsPrinted)) == RhoMode::kAsPrinted);
    CHECK(parse_rho_mode(to_string(RhoMode::kVariance)) == RhoMode::kVariance);
    CHECK_THROWS(parse_rho_mode("cubic"));
  }
}
