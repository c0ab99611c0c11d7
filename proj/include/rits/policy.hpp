#pragma once

#include "rits/bayes.hpp"
#include "rits/core.hpp"
#include "rits/rng.hpp"

#include <span>
#include <string>
#include <vector>

namespace rits {

struct PolicyKind {
  enum class Kind { kRand, kTS, kRiTS };

  Kind kind = Kind::kRand;
  double w = 1.0;  // efficacy weight, RiTS only

  static PolicyKind rand() { return {Kind::kRand, 1.0}; }
  static PolicyKind ts() { return {Kind::kTS, 1.0}; }
  static PolicyKind rits(double w);
  /// Accepts rand|ts|rits (case-insensitive); w is used for rits only.
  static PolicyKind parse(const std::string& name, double w);

  std::string name() const;  // "Rand", "TS", "RiTS"

  friend bool operator==(const PolicyKind&, const PolicyKind&) = default;
};

/// Fraction of columns in which each row attains the column maximum.
/// scores is K x M; ties go to the lowest arm index.
PropensityVector argmax_frequencies(const Matrix& scores);

/// x^T b for every column b of draws (d x M).
Eigen::RowVectorXd linear_scores(const Covariates& x, const Matrix& draws);

/// TS propensities from pre-drawn coefficient samples, one d x M matrix per arm.
PropensityVector ts_propensities_from_draws(const Covariates& x,
                                            std::span<const Matrix> efficacy_draws);

/// RiTS propensities from pre-drawn samples; column m of every matrix
/// belongs to simulation index m.
PropensityVector rits_propensities_from_draws(const Covariates& x,
                                              std::span<const Matrix> efficacy_draws,
                                              std::span<const Matrix> safety_draws, double w);

/// Thompson propensities over the efficacy posteriors. Draws M samples per
/// arm, arms in order.
PropensityVector ts_propensities(std::span<const GaussianPosterior> efficacy, const Covariates& x,
                                 int M, Rng& rng);

/// w * x^T b + (1 - w) * x^T g.
double rits_utility(const Vector& x, const Vector& b, const Vector& g, double w);

/// Risk-inclusive propensities. Consumes the efficacy draws exactly as
/// ts_propensities does, then the safety draws, so w = 1 reproduces TS on the
/// same stream.
PropensityVector rits_propensities(const PosteriorBank& bank, const Covariates& x, double w,
                                   int M, Rng& rng);

/// Linear shrink toward uniform: delta + (1 - K delta) q.
PropensityVector clip_propensities(const PropensityVector& q, double delta);

/// Multinomial draw of one arm.
ArmId draw_arm(const PropensityVector& q, Rng& rng);

struct Allocation {
  ArmId arm{1};
  PropensityVector propensities;      // clipped; the vector used for the draw
  PropensityVector raw_propensities;  // before clipping
};

/// Posteriors built, in enrollment order, from the records whose outcomes are
/// usable when enrolling participant n.
PosteriorBank posterior_for_enrollment(std::span<const ParticipantRecord> history, int n,
                                       const TrialConfig& config);

/// Path component of the posterior-draw stream: the number of outcomes the
/// bank has absorbed.
std::uint64_t posterior_stream(const PosteriorBank& bank);

/// Propensities (raw and clipped) for participant n given a posterior bank.
/// Posterior draws come from the stream
/// (config.seed, posterior_stream(bank), kPosteriorDraws).
Allocation propensities_for_enrollment(const PosteriorBank& bank, int n, const TrialConfig& config,
                                       const PolicyKind& policy, const Covariates& x);

/// Full allocation for participant n: propensities, then the arm drawn from
/// the stream (config.seed, n, kArmDraw).
Allocation allocate_with_bank(const PosteriorBank& bank, int n, const TrialConfig& config,
                              const PolicyKind& policy, const Covariates& x);

/// Allocates participant n = history.size() + 1 from the history.
Allocation allocate(std::span<const ParticipantRecord> history, const TrialConfig& config,
                    const PolicyKind& policy, const Covariates& x);

}  // namespace rits
