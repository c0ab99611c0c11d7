#pragma once

#include "rits/core.hpp"
#include "rits/rng.hpp"

#include <optional>
#include <string>
#include <vector>

namespace rits {

/// c0 + c1 z + c2 z^2.
struct Quadratic {
  double c0 = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;

  double operator()(double z) const noexcept { return c0 + z * (c1 + z * c2); }
  /// E over Z ~ N(0, 1): c0 + c2.
  double standard_normal_mean() const noexcept { return c0 + c2; }
};

enum class Endpoint { kEfficacy, kSafety };

/// Data-generating mechanism with Z ~ N(0, 1), regressors x = (z, z^2), and
/// independent N(0, noise_sd^2) noise on each endpoint. Means are scale times
/// the quadratics.
struct DgpSpec {
  std::string name = "custom";
  std::vector<Quadratic> efficacy;
  std::vector<Quadratic> safety;
  double noise_sd = 1.0;
  double scale = 1.0;
  /// Published effect sizes, when they exist, for side-by-side reporting.
  std::optional<std::vector<double>> printed_effects;

  int arms() const noexcept { return static_cast<int>(efficacy.size()); }
  void validate() const;

  static DgpSpec high_snr();
  static DgpSpec low_snr();
  /// high_snr | low_snr
  static DgpSpec named(const std::string& name);
};

double dgp_mean(const DgpSpec& spec, Endpoint endpoint, double z, ArmId a);

/// Regressors for a scalar covariate: (z, z^2).
std::vector<double> quadratic_basis(double z);

/// theta(a) - theta(1) for a = 2..K, in closed form.
std::vector<double> true_effect_sizes(const DgpSpec& spec);

/// Arm with the largest analytic effect size (ties to the lowest index).
ArmId best_arm(const DgpSpec& spec);

struct EffectSizeRow {
  ArmId arm{2};
  double from_formula = 0.0;
  std::optional<double> printed;
  bool discrepant = false;  // |formula - printed| > 1e-9
};

std::vector<EffectSizeRow> effect_size_report(const DgpSpec& spec);

/// Covariate draw plus the potential outcomes under every arm. A participant
/// carries one efficacy and one safety noise term shared across arms.
struct Profile {
  double z = 0.0;
  Covariates x;
  std::vector<double> efficacy;
  std::vector<double> safety;
};

/// Draws z, then the efficacy noise, then the safety noise.
Profile draw_profile(const DgpSpec& spec, Rng& rng);

struct SimulatedParticipant {
  Covariates x;
  double efficacy = 0.0;
  double safety = 0.0;
};

/// Observed outcomes of one participant assigned to arm a; consumes the
/// stream exactly like draw_profile.
SimulatedParticipant simulate_participant(const DgpSpec& spec, ArmId a, Rng& rng);

}  // namespace rits
