#pragma once

#include "rits/core.hpp"
#include "rits/inference.hpp"
#include "rits/policy.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace rits {

/// Supplies participants to a trial run. outcome() is called exactly once per
/// participant, for the allocated arm only.
class OutcomeSource {
 public:
  virtual ~OutcomeSource() = default;

  virtual int size() const = 0;
  /// Covariates of participant i (0-based enrollment position).
  virtual Covariates covariates(int i) = 0;
  /// (efficacy, safety) of participant i under arm a.
  virtual std::pair<double, double> outcome(int i, ArmId a) = 0;
};

enum class Evaluator { kTTest, kAIPW, kIPW };

std::string to_string(Evaluator e);

/// Evaluation methods run for a policy: the t-test baseline is only paired
/// with equal randomization.
std::vector<Evaluator> evaluators_for(const PolicyKind& policy);

/// Estimates and intervals for arms 2..K at n = first_n .. last_n. Bounds are
/// NaN where no interval exists (AIPW/IPW before the burn-in).
struct EvaluationTrace {
  Evaluator method = Evaluator::kAIPW;
  int first_n = 0;
  int last_n = 0;
  std::vector<std::vector<double>> estimate;  // [arm - 2][n - first_n]
  std::vector<std::vector<double>> lower;
  std::vector<std::vector<double>> upper;
  std::optional<int> stopped_at;     // first n >= m where some lower bound exceeds the threshold
  std::optional<ArmId> stop_winner;  // highest estimate at the stopping time

  bool covers(int n) const noexcept { return n >= first_n && n <= last_n; }
  double estimate_at(ArmId a, int n) const;
  double lower_at(ArmId a, int n) const;
  double upper_at(ArmId a, int n) const;
  bool has_interval(int n) const;
  /// Arm with the highest estimate at n.
  ArmId leader_at(int n) const;
};

struct TrialResult {
  std::vector<ParticipantRecord> records;
  std::vector<int> allocation_counts;  // per arm
  std::vector<EvaluationTrace> evaluations;
  int positivity_violations = 0;  // post-run-in propensities outside [delta, 1 - delta]

  const EvaluationTrace& evaluation(Evaluator e) const;
};

/// Enrolls every participant of the source: allocation with delayed
/// posterior updates, then the outcome for the allocated arm.
std::vector<ParticipantRecord> execute_allocations(OutcomeSource& source, const TrialConfig& config,
                                                   const PolicyKind& policy);

/// Evaluation trace over complete records from first_n to the end.
EvaluationTrace evaluate_trace(std::span<const ParticipantRecord> records, const TrialConfig& config,
                               Evaluator method, int first_n);

/// Count of post-run-in propensities outside [delta, 1 - delta].
int count_positivity_violations(std::span<const ParticipantRecord> records, const TrialConfig& config);

/// Allocation and evaluation end to end. Evaluation starts at the smaller of
/// the first checkpoint and the burn-in.
TrialResult run_allocation_and_evaluation(OutcomeSource& source, const TrialConfig& config,
                                          const PolicyKind& policy,
                                          const std::vector<Evaluator>& evaluators,
                                          const std::vector<int>& checkpoints);

}  // namespace rits
