#pragma once

#include "rits/core.hpp"
#include "rits/policy.hpp"
#include "rits/trial.hpp"

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace rits {

/// Cumulative regrets under the three criteria; entry n-1 covers
/// participants 1..n.
struct Regrets {
  std::vector<double> utility;
  std::vector<double> efficacy;
  std::vector<double> safety;
};

enum class RegretCriterion { kUtility = 0, kEfficacy = 1, kSafety = 2 };
std::string to_string(RegretCriterion c);

/// "Rand-AIPW", "TS-IPW", "Rand-T-test", ...
std::string method_label(const PolicyKind& policy, Evaluator evaluator);

/// What one replication of one policy contributes to the aggregate metrics.
struct MethodSummary {
  Evaluator method = Evaluator::kAIPW;
  std::vector<std::vector<double>> estimate;  // [arm - 2][checkpoint]
  std::vector<std::vector<double>> width;     // NaN when no interval
  std::vector<int> first_miss;                // first n >= m with truth outside, or 0 if none
  std::optional<int> stopped_at;
  std::vector<int> leader;                    // arm with highest estimate per checkpoint (0 if n/a)
};

struct ReplicationSummary {
  PolicyKind policy;
  std::vector<MethodSummary> methods;
  std::vector<int> allocation_counts;
  int positivity_violations = 0;
  std::optional<std::array<std::vector<double>, 3>> regrets;  // [criterion][checkpoint]
};

/// Reduces a trial to its checkpoint summary against the true effect sizes.
ReplicationSummary summarize_trial(const TrialResult& trial, const PolicyKind& policy,
                                   const TrialConfig& config, const std::vector<double>& truth,
                                   const std::vector<int>& checkpoints,
                                   const Regrets* regrets = nullptr);

struct CellMetrics {
  std::string method;
  int arm = 0;
  int checkpoint = 0;
  double truth = 0.0;
  double bias = 0.0;
  double rmse = 0.0;
  double variance = 0.0;     // population variance of the estimates
  double mean_width = 0.0;   // NaN when no intervals exist at the checkpoint
  double miscoverage = 0.0;  // fraction with a miss somewhere in [m, checkpoint]; NaN before m
  int count = 0;             // replications with an estimate
};

struct SelectionMetrics {
  std::string method;
  int checkpoint = 0;
  double sc = 0.0;   // stopping criterion met by this checkpoint
  double wa4 = 0.0;  // truly best arm has the highest estimate
};

struct RegretSummary {
  std::string policy;
  RegretCriterion criterion = RegretCriterion::kUtility;
  int checkpoint = 0;
  double mean = 0.0;
  double median = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
};

struct AllocationSummary {
  std::string policy;
  int arm = 0;
  double mean_count = 0.0;
};

struct RegretSamples {
  std::string policy;
  std::array<std::vector<std::vector<double>>, 3> values;  // [criterion][checkpoint][rep]
};

struct Metrics {
  int n_sim = 0;
  std::vector<int> checkpoints;
  ArmId best{2};
  std::vector<double> truth;
  std::vector<CellMetrics> cells;
  std::vector<SelectionMetrics> selection;
  std::vector<RegretSummary> regrets;
  std::vector<RegretSamples> regret_samples;
  std::vector<AllocationSummary> allocation;
  long positivity_violations = 0;

  const CellMetrics& cell(const std::string& method, int arm, int checkpoint) const;
  const SelectionMetrics& selection_at(const std::string& method, int checkpoint) const;
  /// Per-replication regrets of a policy at a checkpoint.
  const std::vector<double>& regret_values(const std::string& policy, RegretCriterion c,
                                           int checkpoint) const;
};

/// summaries[r] holds every policy's summary for replication r. The result
/// only depends on the order of replications.
Metrics aggregate_metrics(const std::vector<std::vector<ReplicationSummary>>& summaries,
                          const TrialConfig& config, const std::vector<double>& truth,
                          const std::vector<int>& checkpoints);

double quantile(std::vector<double> values, double p);
double median(std::vector<double> values);

struct SignTestResult {
  int positive = 0;  // pairs with a > b
  int negative = 0;  // pairs with a < b
  double p_value = 1.0;  // two-sided exact binomial
};

/// Paired sign test of a against b, ties dropped.
SignTestResult paired_sign_test(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace rits
