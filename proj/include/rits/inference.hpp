#pragma once

#include "rits/core.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rits {

/// Scalar outcome fed to the evaluation pipeline. The default scores
/// efficacy; efficacy_weight = 0 scores safety and values in between score
/// the blended utility (an unvalidated extension hook).
struct OutcomeScore {
  double efficacy_weight = 1.0;

  double value(const ParticipantRecord& r) const;
};

enum class Variant { kAIPW, kIPW };

std::string to_string(Variant v);
Variant parse_variant(const std::string& text);

/// Enrollment-parity folds over 1..n. Indices are 1-based.
struct FoldSplit {
  std::vector<int> trn;   // odd indices
  std::vector<int> eval;  // even indices
};

FoldSplit split_folds(int n);

/// mu^(a)(x) = intercept_a + x^T slope, with one slope shared by all arms.
struct NuisanceModel {
  Vector intercepts;                   // K
  Vector slope;                        // d_raw
  std::vector<bool> imputed_intercept; // arm had no data; intercept is the global weighted mean

  static NuisanceModel zero(int arms, Eigen::Index d_raw);

  double predict(const Covariates& x, ArmId a) const;
};

using RecordRefs = std::span<const ParticipantRecord* const>;

/// Inverse-propensity weighted ridge fit on one fold. Weights are 1 / q_i(A_i)
/// from the recorded propensities; the penalty applies to the slope only.
NuisanceModel fit_weighted_ridge(RecordRefs fold, int arms, double lambda,
                                 OutcomeScore score = {});

/// mu(a, X_i) + 1{A_i = a} / q_i(a, X_i) * (Y_i - mu(A_i, X_i)).
double aipw_pseudo_outcome(const ParticipantRecord& record, ArmId a, const NuisanceModel& model,
                           OutcomeScore score = {});

/// The AIPW value with the regression set to zero.
double ipw_pseudo_outcome(const ParticipantRecord& record, ArmId a, OutcomeScore score = {});

struct ArmEstimate {
  ArmId arm{2};
  double estimate = 0.0;  // cross-fitted effect size versus placebo
  double sigma_sq = 0.0;  // averaged fold variances of the pseudo-contrasts
};

inline constexpr double kVarianceFloor = 1e-8;

/// Cross-fitted effect sizes for arms 2..K from the first n records
/// (records[i] is enrollment index i + 1). Requires n >= 4.
std::vector<ArmEstimate> crossfit_estimate(std::span<const ParticipantRecord> records, int arms,
                                           double lambda, Variant variant,
                                           OutcomeScore score = {});

/// Tuning parameter that makes the interval at the burn-in the narrowest:
///   sqrt((-2 log a + log(-2 log a) + 1) / (s * m * log(max(m, e))))
/// where s is sigma_hat (as printed) or sigma_hat^2 (kVariance).
double rho_m(double m, double alpha, double sigma_hat, RhoMode mode = RhoMode::kAsPrinted);

struct Interval {
  double lower = 0.0;
  double upper = 0.0;
};

/// Asymptotic confidence sequence interval at time n.
Interval cs_interval(double delta_hat, double sigma_sq_hat, int n, double rho, double alpha);

double cs_half_width(double sigma_sq_hat, int n, double rho, double alpha);

struct CsPoint {
  int n = 0;
  ArmId arm{2};
  double estimate = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double sigma_sq_hat = 0.0;
  double rho = 0.0;
};

struct CsSeries {
  ArmId arm{2};
  std::vector<CsPoint> points;
};

/// Number of leading records (in enrollment order) with both outcomes.
int complete_prefix(std::span<const ParticipantRecord> records);

/// Confidence sequences for arms 2..K over n = m .. complete_prefix(records).
/// rho is fixed per arm from the burn-in variance at n = m.
std::vector<CsSeries> build_asympcs(std::span<const ParticipantRecord> records,
                                    const TrialConfig& config, Variant variant,
                                    OutcomeScore score = {});

struct TInterval {
  double estimate = 0.0;
  double lower = 0.0;
  double upper = 0.0;
};

/// Welch interval for mean(Y | arm a) - mean(Y | arm 1) at level 1 - alpha.
TInterval two_sample_t_interval(std::span<const ParticipantRecord> records, ArmId a, double alpha,
                                OutcomeScore score = {});

/// Welch interval from summary statistics.
TInterval welch_interval(double mean_a, double var_a, double n_a, double mean_b, double var_b,
                         double n_b, double alpha);

struct StoppingDecision {
  bool stop = false;
  std::optional<ArmId> winner;  // highest estimate; reported even without a stop
};

/// Stops when some lower bound strictly exceeds the threshold.
StoppingDecision check_stopping(std::span<const CsPoint> current, double threshold);

}  // namespace rits
