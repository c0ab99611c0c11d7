#include "rits/trial.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rits {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

std::string to_string(Evaluator e) {
  switch (e) {
    case Evaluator::kTTest: return "T-test";
    case Evaluator::kAIPW: return "AIPW";
    case Evaluator::kIPW: return "IPW";
  }
  return "?";
}

std::vector<Evaluator> evaluators_for(const PolicyKind& policy) {
  if (policy.kind == PolicyKind::Kind::kRand) {
    return {Evaluator::kTTest, Evaluator::kAIPW, Evaluator::kIPW};
  }
  return {Evaluator::kAIPW, Evaluator::kIPW};
}

double EvaluationTrace::estimate_at(ArmId a, int n) const {
  return estimate.at(static_cast<std::size_t>(a.value() - 2)).at(static_cast<std::size_t>(n - first_n));
}

double EvaluationTrace::lower_at(ArmId a, int n) const {
  return lower.at(static_cast<std::size_t>(a.value() - 2)).at(static_cast<std::size_t>(n - first_n));
}

double EvaluationTrace::upper_at(ArmId a, int n) const {
  return upper.at(static_cast<std::size_t>(a.value() - 2)).at(static_cast<std::size_t>(n - first_n));
}

bool EvaluationTrace::has_interval(int n) const {
  return !lower.empty() && !std::isnan(lower.front().at(static_cast<std::size_t>(n - first_n)));
}

ArmId EvaluationTrace::leader_at(int n) const {
  const auto col = static_cast<std::size_t>(n - first_n);
  std::size_t best = 0;
  for (std::size_t k = 1; k < estimate.size(); ++k) {
    if (estimate[k].at(col) > estimate[best].at(col)) best = k;
  }
  return ArmId(static_cast<int>(best) + 2);
}

const EvaluationTrace& TrialResult::evaluation(Evaluator e) const {
  for (const auto& t : evaluations) {
    if (t.method == e) return t;
  }
  throw ValidationError("trial was not evaluated with " + to_string(e));
}

std::vector<ParticipantRecord> execute_allocations(OutcomeSource& source, const TrialConfig& config,
                                                   const PolicyKind& policy) {
  config.validate();
  const int total = source.size();
  std::vector<ParticipantRecord> records;
  records.reserve(static_cast<std::size_t>(total));
  auto bank = PosteriorBank::prior(config.K, config.d_raw + 1, config.sigma0_sq);
  std::size_t next_usable = 0;

  for (int i = 0; i < total; ++i) {
    const int n = i + 1;
    // Availability grows with enrollment order, so the usable set is a prefix.
    while (next_usable < records.size() && records[next_usable].usable_at(n)) {
      bank.absorb(records[next_usable]);
      ++next_usable;
    }
    ParticipantRecord r;
    r.id = n;
    r.covariates = source.covariates(i);
    Allocation alloc = allocate_with_bank(bank, n, config, policy, r.covariates);
    const auto [efficacy, safety] = source.outcome(i, alloc.arm);
    r.arm = alloc.arm;
    r.propensities = std::move(alloc.propensities);
    r.efficacy = efficacy;
    r.safety = safety;
    r.outcome_available_at = config.availability_index(n);
    records.push_back(std::move(r));
  }
  return records;
}

EvaluationTrace evaluate_trace(std::span<const ParticipantRecord> records, const TrialConfig& config,
                               Evaluator method, int first_n) {
  EvaluationTrace trace;
  trace.method = method;
  trace.first_n = std::max(4, first_n);
  trace.last_n = complete_prefix(records);
  const auto active = static_cast<std::size_t>(config.K - 1);
  const int width = std::max(0, trace.last_n - trace.first_n + 1);
  trace.estimate.assign(active, std::vector<double>(static_cast<std::size_t>(width), kNaN));
  trace.lower = trace.estimate;
  trace.upper = trace.estimate;
  if (width == 0) return trace;

  auto put = [&](std::size_t k, int n, double est, double lo, double hi) {
    const auto col = static_cast<std::size_t>(n - trace.first_n);
    trace.estimate[k][col] = est;
    trace.lower[k][col] = lo;
    trace.upper[k][col] = hi;
  };

  if (method == Evaluator::kTTest) {
    for (int n = trace.first_n; n <= trace.last_n; ++n) {
      const auto prefix = records.first(static_cast<std::size_t>(n));
      for (std::size_t k = 0; k < active; ++k) {
        try {
          const auto ci = two_sample_t_interval(prefix, ArmId(static_cast<int>(k) + 2), config.alpha);
          put(k, n, ci.estimate, ci.lower, ci.upper);
        } catch (const ValidationError&) {
          // fewer than two observations in an arm; leave NaN
        }
      }
    }
  } else {
    const Variant variant = method == Evaluator::kAIPW ? Variant::kAIPW : Variant::kIPW;
    for (int n = trace.first_n; n < std::min(config.m, trace.last_n + 1); ++n) {
      const auto est = crossfit_estimate(records.first(static_cast<std::size_t>(n)), config.K,
                                         config.lambda, variant);
      for (std::size_t k = 0; k < active; ++k) put(k, n, est[k].estimate, kNaN, kNaN);
    }
    const auto series = build_asympcs(records.first(static_cast<std::size_t>(trace.last_n)), config, variant);
    for (std::size_t k = 0; k < active; ++k) {
      for (const auto& p : series[k].points) {
        if (p.n >= trace.first_n) put(k, p.n, p.estimate, p.lower, p.upper);
      }
    }
  }

  for (int n = std::max(config.m, trace.first_n); n <= trace.last_n; ++n) {
    std::vector<CsPoint> current;
    const auto col = static_cast<std::size_t>(n - trace.first_n);
    for (std::size_t k = 0; k < active; ++k) {
      if (std::isnan(trace.lower[k][col])) continue;
      current.push_back({n, ArmId(static_cast<int>(k) + 2), trace.estimate[k][col],
                         trace.lower[k][col], trace.upper[k][col], 0.0, 0.0});
    }
    const auto decision = check_stopping(current, config.threshold);
    if (decision.stop) {
      trace.stopped_at = n;
      trace.stop_winner = decision.winner;
      break;
    }
  }
  return trace;
}

int count_positivity_violations(std::span<const ParticipantRecord> records, const TrialConfig& config) {
  int violations = 0;
  for (const auto& r : records) {
    if (r.id <= config.n0) continue;
    for (double q : r.propensities.values()) {
      if (q < config.delta || q > 1.0 - config.delta) ++violations;
    }
  }
  return violations;
}

TrialResult run_allocation_and_evaluation(OutcomeSource& source, const TrialConfig& config,
                                          const PolicyKind& policy,
                                          const std::vector<Evaluator>& evaluators,
                                          const std::vector<int>& checkpoints) {
  TrialResult result;
  result.records = execute_allocations(source, config, policy);
  result.allocation_counts.assign(static_cast<std::size_t>(config.K), 0);
  for (const auto& r : result.records) ++result.allocation_counts[r.arm.index()];
  result.positivity_violations = count_positivity_violations(result.records, config);

  int first_n = config.m;
  for (int c : checkpoints) first_n = std::min(first_n, c);
  for (Evaluator e : evaluators) {
    result.evaluations.push_back(evaluate_trace(result.records, config, e, first_n));
  }
  return result;
}

}  // namespace rits
