#include "rits/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>

namespace rits {

std::vector<int> default_checkpoints() { return {50, 60, 70, 80, 90, 100, 110, 120, 150, 200}; }

SimulatedSource::SimulatedSource(const DgpSpec& spec, int n_obs, Rng& population) {
  spec.validate();
  profiles_.reserve(static_cast<std::size_t>(n_obs));
  for (int i = 0; i < n_obs; ++i) profiles_.push_back(draw_profile(spec, population));
}

std::pair<double, double> SimulatedSource::outcome(int i, ArmId a) {
  const Profile& p = profiles_.at(static_cast<std::size_t>(i));
  return {p.efficacy.at(a.index()), p.safety.at(a.index())};
}

Regrets cumulative_regrets(std::span<const ParticipantRecord> records, const DgpSpec& spec, double w) {
  if (!(w >= 0.0 && w <= 1.0)) throw ConfigError("regret weight must lie in [0, 1]", {{"w", "[0, 1]"}});
  Regrets out;
  out.utility.reserve(records.size());
  out.efficacy.reserve(records.size());
  out.safety.reserve(records.size());
  double utility = 0.0, efficacy = 0.0, safety = 0.0;
  const int K = spec.arms();
  std::vector<double> mu(static_cast<std::size_t>(K)), nu(mu.size()), ups(mu.size());
  for (const auto& r : records) {
    if (r.covariates.raw_dim() < 1) throw ValidationError("regret needs the scalar covariate");
    const double z = r.covariates.raw()[0];
    for (int a = 1; a <= K; ++a) {
      const auto i = static_cast<std::size_t>(a - 1);
      mu[i] = dgp_mean(spec, Endpoint::kEfficacy, z, ArmId(a));
      nu[i] = dgp_mean(spec, Endpoint::kSafety, z, ArmId(a));
      ups[i] = w * mu[i] + (1.0 - w) * nu[i];
    }
    const auto chosen = r.arm.index();
    utility += *std::max_element(ups.begin(), ups.end()) - ups[chosen];
    efficacy += *std::max_element(mu.begin(), mu.end()) - mu[chosen];
    safety += *std::max_element(nu.begin(), nu.end()) - nu[chosen];
    out.utility.push_back(utility);
    out.efficacy.push_back(efficacy);
    out.safety.push_back(safety);
  }
  return out;
}

SimulatedTrial run_trial(const DgpSpec& spec, const TrialConfig& config, const PolicyKind& policy,
                         const std::vector<Evaluator>& evaluators, int n_obs,
                         const std::vector<int>& checkpoints, Rng& population) {
  if (spec.arms() != config.K) throw ConfigError("DGP arm count differs from K", {{"K", "match the DGP"}});
  if (config.d_raw != 2) throw ConfigError("simulated participants carry (z, z^2)", {{"d_raw", "must be 2"}});
  SimulatedSource source(spec, n_obs, population);
  SimulatedTrial out;
  out.result = run_allocation_and_evaluation(source, config, policy, evaluators, checkpoints);
  out.regrets = cumulative_regrets(out.result.records, spec, config.w);
  return out;
}

ReplicationSeeds replication_seeds(std::uint64_t master_seed, int replication) {
  const auto r = static_cast<std::uint64_t>(replication);
  return {derive_seed(master_seed, {r, tag(Stream::kPopulation)}),
          derive_seed(master_seed, {r, tag(Stream::kTrial)})};
}

void SimulationPlan::validate() const {
  dgp.validate();
  config.validate();
  if (n_sim < 1) throw ConfigError("need at least one replication", {{"n_sim", ">= 1"}});
  if (n_obs < config.m) throw ConfigError("n_obs must reach the burn-in m", {{"n_obs", ">= m"}});
  if (policies.empty()) throw ConfigError("no policies to simulate", {{"policies", "non-empty"}});
  if (parallelism < 1) throw ConfigError("parallelism must be positive", {{"parallelism", ">= 1"}});
  for (int c : checkpoints) {
    if (c < 4 || c > n_obs) throw ConfigError("checkpoints must lie in [4, n_obs]", {{"checkpoints", "range"}});
  }
}

void parallel_for(int count, int parallelism, const std::function<void(int)>& fn) {
  const int workers = std::max(1, std::min(parallelism, count));
  if (workers == 1) {
    for (int i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  for (int t = 0; t < workers; ++t) {
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next.store(count);
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);
}

std::vector<std::vector<ReplicationSummary>> run_replication_summaries(const SimulationPlan& plan) {
  plan.validate();
  const auto truth = true_effect_sizes(plan.dgp);
  std::vector<std::vector<ReplicationSummary>> summaries(static_cast<std::size_t>(plan.n_sim));

  parallel_for(plan.n_sim, plan.parallelism, [&](int rep) {
    const auto seeds = replication_seeds(plan.master_seed, rep);
    TrialConfig config = plan.config;
    config.seed = seeds.trial;
    auto& slot = summaries[static_cast<std::size_t>(rep)];
    for (const auto& policy : plan.policies) {
      Rng population(seeds.population);
      const auto trial = run_trial(plan.dgp, config, policy, evaluators_for(policy), plan.n_obs,
                                   plan.checkpoints, population);
      slot.push_back(summarize_trial(trial.result, policy, config, truth, plan.checkpoints, &trial.regrets));
    }
  });
  return summaries;
}

Metrics run_replications(const SimulationPlan& plan) {
  const auto summaries = run_replication_summaries(plan);
  return aggregate_metrics(summaries, plan.config, true_effect_sizes(plan.dgp), plan.checkpoints);
}

}  // namespace rits
