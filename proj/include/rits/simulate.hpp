#pragma once

#include "rits/dgp.hpp"
#include "rits/metrics.hpp"
#include "rits/trial.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace rits {

/// Checkpoints of the bias/RMSE report.
std::vector<int> default_checkpoints();

/// Pre-drawn simulated participants; outcome() serves the allocated arm.
class SimulatedSource final : public OutcomeSource {
 public:
  SimulatedSource(const DgpSpec& spec, int n_obs, Rng& population);

  int size() const override { return static_cast<int>(profiles_.size()); }
  Covariates covariates(int i) override { return profiles_.at(static_cast<std::size_t>(i)).x; }
  std::pair<double, double> outcome(int i, ArmId a) override;

  const std::vector<Profile>& profiles() const noexcept { return profiles_; }

 private:
  std::vector<Profile> profiles_;
};

struct SimulatedTrial {
  TrialResult result;
  Regrets regrets;
};

/// Cumulative regrets of an allocation sequence against the true mean
/// functions. The scalar covariate is the first raw regressor.
Regrets cumulative_regrets(std::span<const ParticipantRecord> records, const DgpSpec& spec, double w);

/// One simulated trial of n_obs participants drawn from `population`.
SimulatedTrial run_trial(const DgpSpec& spec, const TrialConfig& config, const PolicyKind& policy,
                         const std::vector<Evaluator>& evaluators, int n_obs,
                         const std::vector<int>& checkpoints, Rng& population);

struct ReplicationSeeds {
  std::uint64_t population = 0;  // participant stream, shared by every policy
  std::uint64_t trial = 0;       // allocation streams, shared by every policy
};

ReplicationSeeds replication_seeds(std::uint64_t master_seed, int replication);

/// Regret utilities use config.w; the RiTS weight is carried by its policy.
struct SimulationPlan {
  DgpSpec dgp = DgpSpec::high_snr();
  TrialConfig config;
  int n_obs = 200;
  std::vector<PolicyKind> policies = {PolicyKind::rand(), PolicyKind::ts(), PolicyKind::rits(0.5)};
  std::vector<int> checkpoints = default_checkpoints();
  int n_sim = 1000;
  std::uint64_t master_seed = 1;
  int parallelism = 1;

  void validate() const;
};

/// Replication summaries, indexed [replication][policy].
std::vector<std::vector<ReplicationSummary>> run_replication_summaries(const SimulationPlan& plan);

/// Independent replications aggregated into the metric suite. Identical for
/// any parallelism.
Metrics run_replications(const SimulationPlan& plan);

/// Runs fn(0..count-1) on a pool of `parallelism` threads. fn must only
/// touch its own slot of any shared output.
void parallel_for(int count, int parallelism, const std::function<void(int)>& fn);

}  // namespace rits
