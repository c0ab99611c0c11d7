// Acceptance suite: one PASS/FAIL line per criterion. Exit status is nonzero
// when any criterion fails.
#include "rits/bayes.hpp"
#include "rits/dgp.hpp"
#include "rits/inference.hpp"
#include "rits/metrics.hpp"
#include "rits/policy.hpp"
#include "rits/replay.hpp"
#include "rits/service.hpp"
#include "rits/simulate.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>

using namespace rits;

namespace {

int failures = 0;

void report(bool pass, const std::string& name, const std::string& detail) {
  if (!pass) ++failures;
  std::cout << (pass ? "PASS " : "FAIL ") << name << ": " << detail << std::endl;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void conjugacy() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(20260101);
  std::uniform_int_distribution<int> n_dist(1, 50), d_dist(1, 6);
  std::uniform_real_distribution<double> s_dist(0.2, 3.0);
  std::normal_distribution<double> normal;
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    const int n = n_dist(rng), d = d_dist(rng);
    const double s2 = s_dist(rng);
    Matrix X(n, d);
    Vector y(n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < d; ++j) X(i, j) = normal(rng);
      y(i) = normal(rng) * 2.0;
    }
    auto post = init_prior(d);
    for (int i = 0; i < n; ++i) post = update(post, Vector(X.row(i).transpose()), y(i), s2);
    const Matrix precision = Matrix::Identity(d, d) + X.transpose() * X / s2;
    const Vector mean = precision.llt().solve(X.transpose() * y / s2);
    worst = std::max({worst, (post.precision - precision).cwiseAbs().maxCoeff(),
                      (post.mean - mean).cwiseAbs().maxCoeff()});
  }
  const double elapsed = seconds_since(t0);
  report(worst <= 1e-8 && elapsed < 5.0, "conjugacy",
         fmt("200 datasets, max elementwise error %.3g (tol 1e-8), %.3f s (budget 5 s)", worst, elapsed));
}

void aipw_brute_force() {
  Rng rng(7);
  std::uniform_real_distribution<double> u(-3.0, 3.0), q(0.1, 0.9);
  double worst = 0.0;
  for (int t = 0; t < 500; ++t) {
    const double xs[2] = {u(rng), u(rng)};
    double f[2][2];      // f[arm][x]
    double prop[2][2];   // prop[x][arm]
    for (int x = 0; x < 2; ++x) {
      for (int a = 0; a < 2; ++a) f[a][x] = u(rng);
      prop[x][0] = q(rng);
      prop[x][1] = 1.0 - prop[x][0];
    }
    NuisanceModel model = NuisanceModel::zero(2, 1);
    model.intercepts << u(rng), u(rng);
    model.slope << u(rng);
    for (int target = 0; target < 2; ++target) {
      double expectation = 0.0;
      for (int x = 0; x < 2; ++x) {
        for (int a = 0; a < 2; ++a) {
          ParticipantRecord r;
          r.id = 1;
          r.covariates = Covariates::from_raw(std::vector<double>{xs[x]});
          r.arm = ArmId(a + 1);
          r.propensities = PropensityVector({prop[x][0], prop[x][1]});
          r.efficacy = f[a][x];
          r.safety = 0.0;
          expectation += 0.5 * prop[x][a] * aipw_pseudo_outcome(r, ArmId(target + 1), model);
        }
      }
      const double theta = 0.5 * (f[target][0] + f[target][1]);
      worst = std::max(worst, std::abs(expectation - theta));
    }
  }
  report(worst <= 1e-12, "aipw-unbiasedness",
         fmt("500 enumerable instances, max |E g - theta| = %.3g (tol 1e-12)", worst));
}

void effect_sizes() {
  const auto spec = DgpSpec::high_snr();
  const auto delta = true_effect_sizes(spec);
  const auto rows = effect_size_report(spec);
  const bool exact = std::abs(delta[0] - 0.225) <= 1e-12 && std::abs(delta[2] - 0.725) <= 1e-12;
  const bool reported = rows.size() == 3 && rows[1].discrepant && rows[1].printed &&
                        !rows[0].discrepant && !rows[2].discrepant;
  report(exact && reported, "effect-sizes",
         fmt("Delta = (%.17g, %.17g, %.17g); arm 3 formula %.3f vs printed %.3f flagged=%s", delta[0], delta[1],
             delta[2], rows[1].from_formula, rows[1].printed.value_or(NAN), rows[1].discrepant ? "yes" : "no"));
}

/// Efficiency bound on the RMSE of a Rand-allocated effect estimate of arm a
/// at sample size n: sqrt((s^2/q_a + s^2/q_1 + Var tau(Z)) / n).
double rand_efficiency_rmse(const DgpSpec& spec, int arm, int n) {
  const double s2 = spec.noise_sd * spec.noise_sd * spec.scale * spec.scale;
  const double qa = 1.0 / spec.arms();
  const auto& hi = spec.efficacy[static_cast<std::size_t>(arm - 1)];
  const auto& lo = spec.efficacy.front();
  const double c1 = spec.scale * (hi.c1 - lo.c1), c2 = spec.scale * (hi.c2 - lo.c2);
  return std::sqrt((2.0 * s2 / qa + c1 * c1 + 2.0 * c2 * c2) / n);
}

void main_grid(int reps, int parallelism) {
  SimulationPlan plan;
  plan.n_sim = reps;
  plan.parallelism = parallelism;
  plan.checkpoints = default_checkpoints();
  const auto t0 = std::chrono::steady_clock::now();
  const Metrics m = run_replications(plan);
  const double elapsed = seconds_since(t0);
  std::cout << "INFO high-snr grid: " << reps << " replications x 3 policies in "
            << fmt("%.1f s at parallelism %d", elapsed, parallelism) << std::endl;
  const std::string scale = fmt("n_sim=%d", reps);

  const auto& a3 = m.cell("Rand-AIPW", 3, 200);
  const auto& i2 = m.cell("Rand-IPW", 2, 200);
  const bool bias_ok = std::abs(a3.bias) <= 0.01;
  const bool rmse_a = std::abs(a3.rmse - 0.05) <= 0.02;
  const bool rmse_i = std::abs(i2.rmse - 0.36) <= 0.06;
  report(bias_ok && rmse_a && rmse_i && elapsed <= 1800.0, "bias-rmse",
         fmt("%s; Rand-AIPW arm3@200 bias %.4f (|.|<=0.01) rmse %.4f (0.05+-0.02, efficiency bound %.3f); "
             "Rand-IPW arm2@200 rmse %.4f (0.36+-0.06); %.0f s",
             scale.c_str(), a3.bias, a3.rmse, rand_efficiency_rmse(plan.dgp, 3, 200), i2.rmse, elapsed));

  double worst = 0.0;
  std::string per_arm;
  for (int a = 2; a <= 4; ++a) {
    const double mc = m.cell("Rand-AIPW", a, 200).miscoverage;
    worst = std::max(worst, mc);
    per_arm += fmt(" arm%d=%.3f", a, mc);
  }
  report(worst <= 0.08, "coverage", fmt("%s; Rand-AIPW miscoverage over [80,200]:%s (<=0.08)", scale.c_str(),
                                        per_arm.c_str()));

  auto vals = [&](const char* p, RegretCriterion c) { return m.regret_values(p, c, 200); };
  struct Pair {
    const char* lo;
    const char* hi;
    RegretCriterion c;
  };
  const Pair pairs[] = {{"TS", "RiTS", RegretCriterion::kEfficacy},
                        {"RiTS", "Rand", RegretCriterion::kEfficacy},
                        {"RiTS", "Rand", RegretCriterion::kSafety},
                        {"Rand", "TS", RegretCriterion::kSafety}};
  bool ordered = true;
  std::string detail = scale + ";";
  for (const auto& p : pairs) {
    const auto a = vals(p.lo, p.c), b = vals(p.hi, p.c);
    const auto sign = paired_sign_test(a, b);
    const bool ok = median(a) < median(b) && sign.negative > sign.positive && sign.p_value < 0.01;
    ordered = ordered && ok;
    detail += fmt(" %s %s %.1f < %s %.1f (sign p=%.2g);", to_string(p.c).c_str(), p.lo, median(a), p.hi, median(b),
                  sign.p_value);
  }
  report(ordered, "regret-ordering", detail);

  report(m.positivity_violations == 0, "positivity-simulation",
         fmt("%s; %ld propensities outside [delta, 1-delta] after the run-in", scale.c_str(),
             m.positivity_violations));
}

void rits_equals_ts() {
  const auto spec = DgpSpec::high_snr();
  int matched = 0;
  for (int s = 0; s < 20; ++s) {
    TrialConfig config;
    config.seed = derive_seed(99, {static_cast<std::uint64_t>(s)});
    Rng pop_a(config.seed + 1), pop_b(config.seed + 1);
    const auto ts = run_trial(spec, config, PolicyKind::ts(), {}, 200, {}, pop_a);
    const auto rits = run_trial(spec, config, PolicyKind::rits(1.0), {}, 200, {}, pop_b);
    bool same = ts.result.records.size() == rits.result.records.size();
    for (std::size_t i = 0; same && i < ts.result.records.size(); ++i) {
      const auto& x = ts.result.records[i];
      const auto& y = rits.result.records[i];
      same = x.arm == y.arm && x.propensities == y.propensities && x.efficacy == y.efficacy &&
             x.safety == y.safety;
    }
    matched += same ? 1 : 0;
  }
  report(matched == 20, "rits-w1-equals-ts", fmt("%d/20 seeds with identical 200-step trajectories", matched));
}

void golden() {
  const double hw = cs_half_width(1.0, 100, 1.0, 0.05);
  const auto iv = cs_interval(0.0, 1.0, 100, 1.0, 0.05);
  const double rho = rho_m(80, 0.05, 1.0);
  const bool ok = std::abs(hw - 0.3273) <= 1e-4 && std::abs(iv.upper - 0.3273) <= 1e-4 &&
                  std::abs(iv.lower + 0.3273) <= 1e-4 && std::abs(rho - 0.15828) <= 1e-4;
  report(ok, "golden-values", fmt("half-width %.6f (0.3273+-1e-4), rho_m %.6f (0.15828+-1e-4)", hw, rho));
}

HistoricalDataset synthetic_dataset(std::uint64_t master, int r, int rows) {
  Rng population(replication_seeds(master, r).population);
  Rng historical = derive_rng(master, {static_cast<std::uint64_t>(r), tag(Stream::kHistoricalArm)});
  return materialize_dataset(DgpSpec::high_snr(), rows, population, historical);
}

void positivity_replay_and_service(int parallelism) {
  const auto ds = synthetic_dataset(3, 0, 800);
  ReplayPlan plan;
  plan.n_sim = 50;
  plan.parallelism = parallelism;
  const auto out = run_replay_summaries(ds, plan);
  long replay_violations = 0;
  for (const auto& rep : out.summaries)
    for (const auto& s : rep) replay_violations += s.positivity_violations;

  TrialService svc;
  long service_violations = 0;
  const auto spec = DgpSpec::high_snr();
  Rng rng(11);
  for (int t = 0; t < 5; ++t) {
    TrialConfig c;
    c.seed = static_cast<std::uint64_t>(t);
    c.delta = 0.05 + 0.03 * t;
    c.M = 300;
    const auto id = svc.create_trial(c, t % 2 ? PolicyKind::ts() : PolicyKind::rits(0.3));
    for (int i = 0; i < 150; ++i) {
      const auto p = draw_profile(spec, rng);
      const auto r = svc.enroll(id, p.x.raw_vector());
      svc.record_outcome(id, r.participant_id, p.efficacy[r.arm.index()], p.safety[r.arm.index()]);
    }
    service_violations += count_positivity_violations(svc.snapshot(id)->records, c);
  }
  report(replay_violations == 0 && service_violations == 0 && out.off_allocation_reads == 0, "positivity-replay-service",
         fmt("replay 50x654: %ld violations, %ld off-allocation reads; service 5x150: %ld violations",
             replay_violations, out.off_allocation_reads, service_violations));
}

void journal_determinism() {
  const auto spec = DgpSpec::high_snr();
  Rng rng(2024);
  int identical = 0;
  std::string first_diff;
  for (int t = 0; t < 50; ++t) {
    TrialConfig c;
    c.seed = rng();
    c.n0 = std::uniform_int_distribution<int>(4, 30)(rng);
    c.m = c.n0 + std::uniform_int_distribution<int>(0, 30)(rng);
    c.delta = std::uniform_real_distribution<double>(0.01, 0.2)(rng);
    c.M = 200;
    const int policy = std::uniform_int_distribution<int>(0, 2)(rng);
    const PolicyKind kind = policy == 0   ? PolicyKind::rand()
                            : policy == 1 ? PolicyKind::ts()
                                          : PolicyKind::rits(std::uniform_real_distribution<double>(0, 1)(rng));
    const int n = std::uniform_int_distribution<int>(1, c.m + 60)(rng);
    const int lag = std::uniform_int_distribution<int>(0, 8)(rng);
    const bool finish = rng() % 4 != 0;

    TrialService live;
    const auto id = live.create_trial(c, kind);
    std::vector<std::pair<int, std::pair<double, double>>> pending;
    for (int i = 0; i < n; ++i) {
      const auto p = draw_profile(spec, rng);
      const auto r = live.enroll(id, p.x.raw_vector());
      pending.push_back({r.participant_id, {p.efficacy[r.arm.index()], p.safety[r.arm.index()]}});
      if (static_cast<int>(pending.size()) > lag) {
        // out-of-order recording within the lag window
        const auto k = std::uniform_int_distribution<std::size_t>(0, pending.size() - 1)(rng);
        live.record_outcome(id, pending[k].first, pending[k].second.first, pending[k].second.second);
        pending.erase(pending.begin() + static_cast<long>(k));
      }
    }
    if (finish)
      for (const auto& [pid, y] : pending) live.record_outcome(id, pid, y.first, y.second);
    if (rng() % 5 == 0) live.stop(id, "operator");

    const std::string journal = live.journal(id);
    TrialService restored;
    std::istringstream in(journal);
    const auto rid = restored.load_journal(in);
    auto dumps = [](const TrialService& s, const std::string& tid) {
      return to_json(s.cs(tid, Variant::kAIPW), "t").dump() + to_json(s.cs(tid, Variant::kIPW), "t").dump() +
             to_json(s.status(tid), "t").dump();
    };
    std::istringstream again(journal);
    const TrialState folded = replay_journal(again);
    const std::string folded_dump = to_json(confidence_sequences(folded, Variant::kAIPW), "t").dump() +
                                    to_json(confidence_sequences(folded, Variant::kIPW), "t").dump() +
                                    to_json(trial_status(folded), "t").dump();
    const std::string expected = dumps(live, id);
    if (expected == dumps(restored, rid) && expected == folded_dump && restored.journal(rid) == journal)
      ++identical;
    else if (first_diff.empty())
      first_diff = fmt(" (first mismatch: journal %d)", t);
  }
  report(identical == 50, "journal-determinism",
         fmt("%d/50 randomized journals reproduce CS series and status byte-identically%s", identical,
             first_diff.c_str()));
}

void replay_simulate_equivalence(int parallelism) {
  SimulationPlan plan;
  plan.n_sim = 30;
  plan.parallelism = parallelism;
  plan.config.M = 300;
  const Metrics sim = run_replications(plan);

  const auto truth = true_effect_sizes(plan.dgp);
  std::vector<std::vector<ReplicationSummary>> summaries(static_cast<std::size_t>(plan.n_sim));
  std::vector<int> off_reads(summaries.size(), 0);
  parallel_for(plan.n_sim, parallelism, [&](int r) {
    const auto ds = synthetic_dataset(plan.master_seed, r, plan.n_obs);
    std::vector<int> identity(static_cast<std::size_t>(ds.size()));
    std::iota(identity.begin(), identity.end(), 0);
    TrialConfig config = plan.config;
    config.seed = replication_seeds(plan.master_seed, r).trial;
    for (const auto& policy : plan.policies) {
      const auto replay = replay_trial(ds, identity, config, policy, evaluators_for(policy), plan.checkpoints);
      // regrets against the generating mean functions, as the simulation scores them
      const auto regrets = cumulative_regrets(replay.result.records, plan.dgp, config.w);
      summaries[static_cast<std::size_t>(r)].push_back(
          summarize_trial(replay.result, policy, config, truth, plan.checkpoints, &regrets));
      off_reads[static_cast<std::size_t>(r)] += replay.audit.off_allocation_reads;
    }
  });
  const Metrics rep = aggregate_metrics(summaries, plan.config, truth, plan.checkpoints);

  double worst = 0.0;
  bool shape = sim.cells.size() == rep.cells.size() && sim.selection.size() == rep.selection.size() &&
               sim.regrets.size() == rep.regrets.size() && sim.allocation.size() == rep.allocation.size();
  auto gap = [&](double a, double b) {
    if (std::isnan(a) && std::isnan(b)) return;
    if (std::isnan(a) != std::isnan(b)) shape = false;
    else worst = std::max(worst, std::abs(a - b));
  };
  for (std::size_t i = 0; shape && i < sim.cells.size(); ++i) {
    const auto &a = sim.cells[i], &b = rep.cells[i];
    shape = shape && a.method == b.method && a.count == b.count;
    gap(a.bias, b.bias);
    gap(a.rmse, b.rmse);
    gap(a.mean_width, b.mean_width);
    gap(a.miscoverage, b.miscoverage);
  }
  for (std::size_t i = 0; shape && i < sim.selection.size(); ++i) {
    gap(sim.selection[i].sc, rep.selection[i].sc);
    gap(sim.selection[i].wa4, rep.selection[i].wa4);
  }
  for (std::size_t i = 0; shape && i < sim.regrets.size(); ++i) {
    gap(sim.regrets[i].mean, rep.regrets[i].mean);
    gap(sim.regrets[i].median, rep.regrets[i].median);
  }
  for (std::size_t i = 0; shape && i < sim.allocation.size(); ++i)
    gap(sim.allocation[i].mean_count, rep.allocation[i].mean_count);
  const int off = std::accumulate(off_reads.begin(), off_reads.end(), 0);
  report(shape && worst <= 1e-9 && off == 0, "replay-simulate-equivalence",
         fmt("%d matched replications x 3 policies, max metric gap %.3g (tol 1e-9), %zu cells, %d off-allocation reads",
             plan.n_sim, worst, sim.cells.size(), off));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app("acceptance criteria");
  int reps = 1000;
  int parallelism = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  app.add_option("--reps", reps, "replications for the statistical criteria")->check(CLI::PositiveNumber);
  app.add_option("-j,--parallelism", parallelism)->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  conjugacy();
  aipw_brute_force();
  effect_sizes();
  golden();
  rits_equals_ts();
  journal_determinism();
  replay_simulate_equivalence(parallelism);
  positivity_replay_and_service(parallelism);
  main_grid(reps, parallelism);

  std::cout << (failures == 0 ? "all criteria passed" : fmt("%d criteria failed", failures)) << std::endl;
  return failures == 0 ? 0 : 1;
}
