#include <doctest.h>

#include "rits/dgp.hpp"
#include "rits/simulate.hpp"

#include <cmath>

using namespace rits;

namespace {

SimulationPlan small_plan(int reps) {
  SimulationPlan plan;
  plan.n_sim = reps;
  plan.n_obs = 120;
  plan.config.M = 200;
  plan.checkpoints = {50, 80, 100, 120};
  plan.master_seed = 17;
  return plan;
}

}  // namespace

TEST_SUITE("dgp") {
  TEST_CASE("high SNR effect sizes from the mean functions") {
    const auto d = true_effect_sizes(DgpSpec::high_snr());
    REQUIRE(d.size() == 3);
    CHECK(std::abs(d[0] - 0.225) < 1e-12);
    CHECK(std::abs(d[1] - 0.700) < 1e-12);
    CHECK(std::abs(d[2] - 0.725) < 1e-12);
    CHECK(best_arm(DgpSpec::high_snr()) == ArmId(4));
  }

  TEST_CASE("low SNR halves the effects") {
    const auto d = true_effect_sizes(DgpSpec::low_snr());
    CHECK(std::abs(d[0] - 0.1125) < 1e-12);
    CHECK(std::abs(d[1] - 0.350) < 1e-12);
    CHECK(std::abs(d[2] - 0.3625) < 1e-12);
  }

  TEST_CASE("printed arm 3 effect is reported as discrepant") {
    for (const auto& spec : {DgpSpec::high_snr(), DgpSpec::low_snr()}) {
      const auto rows = effect_size_report(spec);
      REQUIRE(rows.size() == 3);
      CHECK_FALSE(rows[0].discrepant);
      CHECK(rows[1].discrepant);
      CHECK_FALSE(rows[2].discrepant);
    }
  }

  TEST_CASE("dgp means at z = 0 and z = 1") {
    const auto s = DgpSpec::high_snr();
    CHECK(dgp_mean(s, Endpoint::kEfficacy, 0.0, ArmId(1)) == doctest::Approx(1.995));
    CHECK(dgp_mean(s, Endpoint::kEfficacy, 1.0, ArmId(4)) == doctest::Approx(2.7));
    CHECK(dgp_mean(s, Endpoint::kSafety, 1.0, ArmId(4)) == doctest::Approx(1.4));
    CHECK_THROWS_AS(dgp_mean(s, Endpoint::kSafety, 1.0, ArmId(5)), ValidationError);
  }

  TEST_CASE("one noise draw per endpoint is shared across arms") {
    Rng rng(4);
    const auto spec = DgpSpec::high_snr();
    const auto p = draw_profile(spec, rng);
    const double eps = p.efficacy[0] - dgp_mean(spec, Endpoint::kEfficacy, p.z, ArmId(1));
    for (int a = 2; a <= 4; ++a) {
      CHECK(p.efficacy[static_cast<std::size_t>(a - 1)] - dgp_mean(spec, Endpoint::kEfficacy, p.z, ArmId(a)) ==
            doctest::Approx(eps));
    }
    CHECK(p.x.raw()[1] == p.z * p.z);
  }

  TEST_CASE("simulate_participant consumes the stream like draw_profile") {
    Rng a(8), b(8);
    const auto spec = DgpSpec::high_snr();
    const auto p = draw_profile(spec, a);
    const auto s = simulate_participant(spec, ArmId(3), b);
    CHECK(s.efficacy == p.efficacy[2]);
    CHECK(s.safety == p.safety[2]);
    CHECK(a() == b());
  }

  TEST_CASE("empirical arm means match theta") {
    Rng rng(12);
    const auto spec = DgpSpec::high_snr();
    double sum4 = 0.0, sum1 = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
      const auto p = draw_profile(spec, rng);
      sum4 += p.efficacy[3];
      sum1 += p.efficacy[0];
    }
    // shared noise cancels; what remains is the spread of the contrast in z
    CHECK(std::abs((sum4 - sum1) / n - 0.725) < 0.01);
  }
}

TEST_SUITE("simulate") {
  TEST_CASE("delay leaves the first n - delay outcomes usable") {
    TrialConfig c;
    CHECK(c.availability_index(40) <= 50);
    CHECK(c.availability_index(41) > 50);
    Rng population(3);
    c.M = 100;
    const auto trial = run_trial(DgpSpec::high_snr(), c, PolicyKind::ts(), {Evaluator::kAIPW}, 60, {60}, population);
    for (const auto& r : trial.result.records) CHECK(r.outcome_available_at == r.id + 10);
  }

  TEST_CASE("delay equal to n_obs keeps the posteriors at the prior") {
    TrialConfig c;
    c.delay = 200;
    c.M = 2000;
    Rng population(1);
    const auto trial = run_trial(DgpSpec::high_snr(), c, PolicyKind::rits(0.5), {Evaluator::kAIPW}, 200, {200},
                                 population);
    for (const auto& r : trial.result.records) {
      for (double q : r.propensities.values()) CHECK(q == doctest::Approx(0.25).epsilon(0.25));
    }
  }

  TEST_CASE("regrets accumulate against the mean functions") {
    TrialConfig c;
    c.M = 100;
    Rng population(2);
    const auto trial = run_trial(DgpSpec::high_snr(), c, PolicyKind::rand(), {Evaluator::kTTest}, 80, {80}, population);
    const auto& r = trial.regrets;
    REQUIRE(r.efficacy.size() == 80);
    for (std::size_t i = 1; i < 80; ++i) {
      CHECK(r.efficacy[i] >= r.efficacy[i - 1]);
      CHECK(r.safety[i] >= r.safety[i - 1]);
      CHECK(r.utility[i] >= r.utility[i - 1] - 1e-12);
    }
  }

  TEST_CASE("replications are deterministic and independent of parallelism") {
    auto plan = small_plan(6);
    const auto one = run_replications(plan);
    plan.parallelism = 3;
    const auto three = run_replications(plan);
    REQUIRE(one.cells.size() == three.cells.size());
    for (std::size_t i = 0; i < one.cells.size(); ++i) {
      CHECK(one.cells[i].rmse == three.cells[i].rmse);
      CHECK(one.cells[i].bias == three.cells[i].bias);
    }
    CHECK(one.positivity_violations == 0);
  }

  TEST_CASE("every policy sees the same participants in a replication") {
    const auto plan = small_plan(2);
    const auto seeds = replication_seeds(plan.master_seed, 1);
    TrialConfig c = plan.config;
    c.seed = seeds.trial;
    Rng p1(seeds.population), p2(seeds.population);
    const auto a = run_trial(plan.dgp, c, PolicyKind::rand(), {Evaluator::kAIPW}, plan.n_obs, {120}, p1);
    const auto b = run_trial(plan.dgp, c, PolicyKind::ts(), {Evaluator::kAIPW}, plan.n_obs, {120}, p2);
    for (std::size_t i = 0; i < a.result.records.size(); ++i) {
      CHECK(a.result.records[i].covariates.raw_vector() == b.result.records[i].covariates.raw_vector());
    }
  }

  TEST_CASE("checkpoints before the burn-in have estimates but no intervals") {
    const auto m = run_replications(small_plan(3));
    const auto& early = m.cell("Rand-AIPW", 2, 50);
    CHECK(std::isfinite(early.rmse));
    CHECK(std::isnan(early.mean_width));
    CHECK(std::isnan(early.miscoverage));
    const auto& late = m.cell("Rand-AIPW", 2, 120);
    CHECK(std::isfinite(late.mean_width));
    CHECK(late.miscoverage >= 0.0);
  }

  TEST_CASE("plan validation") {
    auto plan = small_plan(0);
    CHECK_THROWS_AS(plan.validate(), ConfigError);
    plan = small_plan(1);
    plan.checkpoints = {500};
    CHECK_THROWS_AS(plan.validate(), ConfigError);
  }

  TEST_CASE("paired sign test") {
    std::vector<double> a(30, 1.0), b(30, 0.0);
    const auto r = paired_sign_test(a, b);
    CHECK(r.positive == 30);
    CHECK(r.p_value == doctest::Approx(2.0 * std::pow(0.5, 30)));
    std::vector<double> c{1, 0, 1, 0}, d{0, 1, 0, 1};
    CHECK(paired_sign_test(c, d).p_value == doctest::Approx(1.0));
  }

  TEST_CASE("quantiles interpolate") {
    CHECK(median({3.0, 1.0, 2.0}) == 2.0);
    CHECK(quantile({0.0, 10.0}, 0.25) == doctest::Approx(2.5));
  }
}
