#pragma once

#include <Eigen/Core>

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace rits {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration. Carries one diagnostic per offending field.
class ConfigError : public Error {
 public:
  struct FieldIssue {
    std::string field;
    std::string message;
  };

  explicit ConfigError(const std::string& what, std::vector<FieldIssue> issues = {})
      : Error(what), issues_(std::move(issues)) {}

  const std::vector<FieldIssue>& issues() const noexcept { return issues_; }

 private:
  std::vector<FieldIssue> issues_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Arms
// ---------------------------------------------------------------------------

/// One-based arm label. Arm 1 is placebo.
class ArmId {
 public:
  constexpr explicit ArmId(int one_based) : value_(one_based) {}

  static constexpr ArmId from_index(std::size_t zero_based) {
    return ArmId(static_cast<int>(zero_based) + 1);
  }

  constexpr int value() const noexcept { return value_; }
  constexpr std::size_t index() const noexcept { return static_cast<std::size_t>(value_ - 1); }
  constexpr bool valid_for(int arms) const noexcept { return value_ >= 1 && value_ <= arms; }

  friend constexpr auto operator<=>(ArmId, ArmId) = default;

 private:
  int value_;
};

inline constexpr ArmId kPlacebo{1};

// ---------------------------------------------------------------------------
// Covariates
// ---------------------------------------------------------------------------

/// Participant covariates with a leading constant regressor for the intercept.
class Covariates {
 public:
  Covariates() : augmented_(Vector::Ones(1)) {}

  static Covariates from_raw(std::span<const double> raw);

  const Vector& augmented() const noexcept { return augmented_; }
  Eigen::Index dim() const noexcept { return augmented_.size(); }
  Eigen::Index raw_dim() const noexcept { return augmented_.size() - 1; }
  auto raw() const { return augmented_.tail(augmented_.size() - 1); }
  std::vector<double> raw_vector() const;

 private:
  explicit Covariates(Vector augmented) : augmented_(std::move(augmented)) {}
  Vector augmented_;
};

Covariates augment_covariates(std::span<const double> raw);

/// Maps v to (v - lo) / (hi - lo). Values outside [lo, hi] are not clamped.
double rescale_endpoint(double v, double lo, double hi);

// ---------------------------------------------------------------------------
// Propensities and participant records
// ---------------------------------------------------------------------------

class PropensityVector {
 public:
  PropensityVector() = default;
  explicit PropensityVector(std::vector<double> probs) : probs_(std::move(probs)) {}

  static PropensityVector uniform(int arms);

  int arms() const noexcept { return static_cast<int>(probs_.size()); }
  double operator[](ArmId a) const { return probs_.at(a.index()); }
  double at(std::size_t zero_based) const { return probs_.at(zero_based); }
  const std::vector<double>& values() const noexcept { return probs_; }
  double sum() const noexcept;
  ArmId argmax() const;

  friend bool operator==(const PropensityVector&, const PropensityVector&) = default;

 private:
  std::vector<double> probs_;
};

struct ParticipantRecord {
  int id = 0;  // enrollment order, 1-based
  Covariates covariates;
  ArmId arm{1};
  PropensityVector propensities;  // exactly as used for the allocation draw
  std::optional<double> efficacy;
  std::optional<double> safety;
  int outcome_available_at = 0;  // first enrollment index allowed to use the outcomes

  bool has_outcomes() const noexcept { return efficacy.has_value() && safety.has_value(); }
  bool usable_at(int n) const noexcept { return has_outcomes() && outcome_available_at <= n; }
};

// ---------------------------------------------------------------------------
// Trial configuration
// ---------------------------------------------------------------------------

/// Exponent on the burn-in standard deviation in the rho rule.
enum class RhoMode {
  kAsPrinted,  // sigma_hat_m to the first power
  kVariance,   // sigma_hat_m squared
};

std::string to_string(RhoMode mode);
RhoMode parse_rho_mode(const std::string& text);

struct TrialConfig {
  int K = 4;                 // arm count (arm 1 is placebo)
  int d_raw = 2;             // raw covariate dimension
  double w = 0.5;            // efficacy weight in the risk-inclusive utility
  int n0 = 40;               // equal-randomization run-in
  double delta = 0.1;        // clipping level, 0 < delta < 1/K
  int m = 80;                // burn-in for confidence sequences
  double alpha = 0.05;       // miscoverage level
  double sigma0_sq = 1.0;    // likelihood variance in the posterior updates
  int M = 1000;              // posterior draws per propensity evaluation
  double lambda = 1.0;       // ridge penalty on the shared slope
  int delay = 10;            // outcome delay, in enrollments
  std::uint64_t seed = 0;
  double threshold = 0.1;    // minimum clinically significant effect size
  RhoMode rho_mode = RhoMode::kAsPrinted;

  std::vector<ConfigError::FieldIssue> issues() const;
  /// Throws ConfigError listing every offending field.
  void validate() const;
  /// Outcomes of participant i are usable for allocations from this index on.
  int availability_index(int participant) const noexcept {
    return participant + (delay < 1 ? 1 : delay);
  }
};

}  // namespace rits
