#include "rits/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rits {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

std::string to_string(RegretCriterion c) {
  switch (c) {
    case RegretCriterion::kUtility: return "utility";
    case RegretCriterion::kEfficacy: return "efficacy";
    case RegretCriterion::kSafety: return "safety";
  }
  return "?";
}

std::string method_label(const PolicyKind& policy, Evaluator evaluator) {
  return policy.name() + "-" + to_string(evaluator);
}

ReplicationSummary summarize_trial(const TrialResult& trial, const PolicyKind& policy,
                                   const TrialConfig& config, const std::vector<double>& truth,
                                   const std::vector<int>& checkpoints, const Regrets* regrets) {
  const auto active = static_cast<std::size_t>(config.K - 1);
  if (truth.size() != active) throw ValidationError("truth must hold one effect size per active arm");

  ReplicationSummary out;
  out.policy = policy;
  out.allocation_counts = trial.allocation_counts;
  out.positivity_violations = trial.positivity_violations;

  for (const auto& trace : trial.evaluations) {
    MethodSummary ms;
    ms.method = trace.method;
    ms.estimate.assign(active, std::vector<double>(checkpoints.size(), kNaN));
    ms.width = ms.estimate;
    ms.first_miss.assign(active, 0);
    ms.leader.assign(checkpoints.size(), 0);
    for (std::size_t c = 0; c < checkpoints.size(); ++c) {
      const int n = checkpoints[c];
      if (!trace.covers(n)) continue;
      bool all_finite = true;
      for (std::size_t k = 0; k < active; ++k) {
        const ArmId a(static_cast<int>(k) + 2);
        ms.estimate[k][c] = trace.estimate_at(a, n);
        all_finite = all_finite && std::isfinite(ms.estimate[k][c]);
        const double lo = trace.lower_at(a, n);
        const double hi = trace.upper_at(a, n);
        if (!std::isnan(lo)) ms.width[k][c] = hi - lo;
      }
      if (all_finite) ms.leader[c] = trace.leader_at(n).value();
    }
    for (std::size_t k = 0; k < active; ++k) {
      const ArmId a(static_cast<int>(k) + 2);
      for (int n = std::max(config.m, trace.first_n); n <= trace.last_n; ++n) {
        const double lo = trace.lower_at(a, n);
        if (std::isnan(lo)) continue;
        if (truth[k] < lo || truth[k] > trace.upper_at(a, n)) {
          ms.first_miss[k] = n;
          break;
        }
      }
    }
    ms.stopped_at = trace.stopped_at;
    out.methods.push_back(std::move(ms));
  }

  if (regrets != nullptr) {
    std::array<std::vector<double>, 3> at;
    const std::array<const std::vector<double>*, 3> series{&regrets->utility, &regrets->efficacy,
                                                           &regrets->safety};
    for (std::size_t crit = 0; crit < 3; ++crit) {
      for (int n : checkpoints) {
        const auto& s = *series[crit];
        at[crit].push_back(n >= 1 && static_cast<std::size_t>(n) <= s.size()
                               ? s[static_cast<std::size_t>(n - 1)]
                               : kNaN);
      }
    }
    out.regrets = std::move(at);
  }
  return out;
}

double quantile(std::vector<double> values, double p) {
  values.erase(std::remove_if(values.begin(), values.end(), [](double v) { return std::isnan(v); }),
               values.end());
  if (values.empty()) return kNaN;
  std::sort(values.begin(), values.end());
  const double pos = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

Metrics aggregate_metrics(const std::vector<std::vector<ReplicationSummary>>& summaries,
                          const TrialConfig& config, const std::vector<double>& truth,
                          const std::vector<int>& checkpoints) {
  Metrics out;
  out.n_sim = static_cast<int>(summaries.size());
  out.checkpoints = checkpoints;
  out.truth = truth;
  {
    std::size_t best = 0;
    for (std::size_t k = 1; k < truth.size(); ++k) {
      if (truth[k] > truth[best]) best = k;
    }
    out.best = ArmId(static_cast<int>(best) + 2);
  }
  if (summaries.empty()) return out;

  const auto active = static_cast<std::size_t>(config.K - 1);
  const std::size_t policies = summaries.front().size();
  const double reps = static_cast<double>(summaries.size());

  for (std::size_t p = 0; p < policies; ++p) {
    const PolicyKind& policy = summaries.front()[p].policy;
    const auto& methods = summaries.front()[p].methods;

    for (std::size_t mi = 0; mi < methods.size(); ++mi) {
      const std::string label = method_label(policy, methods[mi].method);
      for (std::size_t k = 0; k < active; ++k) {
        for (std::size_t c = 0; c < checkpoints.size(); ++c) {
          CellMetrics cell;
          cell.method = label;
          cell.arm = static_cast<int>(k) + 2;
          cell.checkpoint = checkpoints[c];
          cell.truth = truth[k];
          double err_sum = 0.0, sq_sum = 0.0, width_sum = 0.0;
          int width_count = 0, misses = 0, count = 0;
          for (const auto& rep : summaries) {
            const MethodSummary& ms = rep[p].methods[mi];
            const double est = ms.estimate[k][c];
            if (std::isfinite(est)) {
              const double err = est - truth[k];
              err_sum += err;
              sq_sum += err * err;
              ++count;
            }
            if (!std::isnan(ms.width[k][c])) {
              width_sum += ms.width[k][c];
              ++width_count;
            }
            if (ms.first_miss[k] > 0 && ms.first_miss[k] <= checkpoints[c]) ++misses;
          }
          cell.count = count;
          cell.bias = count > 0 ? err_sum / count : kNaN;
          cell.rmse = count > 0 ? std::sqrt(sq_sum / count) : kNaN;
          cell.variance = count > 0 ? std::max(0.0, sq_sum / count - cell.bias * cell.bias) : kNaN;
          cell.mean_width = width_count > 0 ? width_sum / width_count : kNaN;
          cell.miscoverage = checkpoints[c] >= config.m ? misses / reps : kNaN;
          out.cells.push_back(cell);
        }
      }
      for (std::size_t c = 0; c < checkpoints.size(); ++c) {
        SelectionMetrics sel;
        sel.method = label;
        sel.checkpoint = checkpoints[c];
        int stopped = 0, winners = 0;
        for (const auto& rep : summaries) {
          const MethodSummary& ms = rep[p].methods[mi];
          if (ms.stopped_at && *ms.stopped_at <= checkpoints[c]) ++stopped;
          if (ms.leader[c] == out.best.value()) ++winners;
        }
        sel.sc = stopped / reps;
        sel.wa4 = winners / reps;
        out.selection.push_back(sel);
      }
    }

    for (int a = 1; a <= config.K; ++a) {
      double total = 0.0;
      for (const auto& rep : summaries) total += rep[p].allocation_counts[static_cast<std::size_t>(a - 1)];
      out.allocation.push_back({policy.name(), a, total / reps});
    }
    for (const auto& rep : summaries) out.positivity_violations += rep[p].positivity_violations;

    if (summaries.front()[p].regrets) {
      RegretSamples samples;
      samples.policy = policy.name();
      for (std::size_t crit = 0; crit < 3; ++crit) {
        samples.values[crit].assign(checkpoints.size(), {});
        for (std::size_t c = 0; c < checkpoints.size(); ++c) {
          auto& v = samples.values[crit][c];
          for (const auto& rep : summaries) v.push_back((*rep[p].regrets)[crit][c]);
          RegretSummary s;
          s.policy = policy.name();
          s.criterion = static_cast<RegretCriterion>(crit);
          s.checkpoint = checkpoints[c];
          double sum = 0.0;
          for (double x : v) sum += x;
          s.mean = sum / reps;
          s.median = median(v);
          s.q25 = quantile(v, 0.25);
          s.q75 = quantile(v, 0.75);
          out.regrets.push_back(s);
        }
      }
      out.regret_samples.push_back(std::move(samples));
    }
  }
  return out;
}

const CellMetrics& Metrics::cell(const std::string& method, int arm, int checkpoint) const {
  for (const auto& c : cells) {
    if (c.method == method && c.arm == arm && c.checkpoint == checkpoint) return c;
  }
  throw ValidationError("no metrics cell for " + method + " arm " + std::to_string(arm) + " at " +
                        std::to_string(checkpoint));
}

const SelectionMetrics& Metrics::selection_at(const std::string& method, int checkpoint) const {
  for (const auto& s : selection) {
    if (s.method == method && s.checkpoint == checkpoint) return s;
  }
  throw ValidationError("no selection metrics for " + method + " at " + std::to_string(checkpoint));
}

const std::vector<double>& Metrics::regret_values(const std::string& policy, RegretCriterion c,
                                                  int checkpoint) const {
  for (const auto& s : regret_samples) {
    if (s.policy != policy) continue;
    for (std::size_t i = 0; i < checkpoints.size(); ++i) {
      if (checkpoints[i] == checkpoint) return s.values[static_cast<std::size_t>(c)][i];
    }
  }
  throw ValidationError("no regret samples for " + policy + " at " + std::to_string(checkpoint));
}

SignTestResult paired_sign_test(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ValidationError("sign test needs paired samples");
  SignTestResult out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] > b[i]) ++out.positive;
    else if (a[i] < b[i]) ++out.negative;
  }
  const int n = out.positive + out.negative;
  if (n == 0) return out;
  const int k = std::min(out.positive, out.negative);
  // P(X <= k) for X ~ Bin(n, 1/2), summed in log space.
  const double log_half_n = n * std::log(0.5);
  double tail = 0.0;
  for (int i = 0; i <= k; ++i) {
    const double log_choose = std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0);
    tail += std::exp(log_choose + log_half_n);
  }
  out.p_value = std::min(1.0, 2.0 * tail);
  return out;
}

}  // namespace rits
