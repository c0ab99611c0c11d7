#include "rits/dgp.hpp"

#include <cmath>

namespace rits {

namespace {

// 2 - 0.01 (z + 1/2)^2 - 0.01 (z - 1/2)^2 and friends expand to
// base - 2 k z^2 - k / 2.
Quadratic symmetric_bowl(double base, double k) { return {base - 0.5 * k, 0.0, -2.0 * k}; }

}  // namespace

void DgpSpec::validate() const {
  if (efficacy.size() < 2) throw ConfigError("DGP needs at least 2 arms", {{"efficacy", ">= 2 arms"}});
  if (efficacy.size() != safety.size()) {
    throw ConfigError("DGP efficacy and safety arm counts differ", {{"safety", "one per arm"}});
  }
  if (!(noise_sd >= 0.0)) throw ConfigError("noise_sd must be non-negative", {{"noise_sd", ">= 0"}});
  if (printed_effects && printed_effects->size() + 1 != efficacy.size()) {
    throw ConfigError("printed effect sizes must cover arms 2..K", {{"printed_effects", "K - 1 values"}});
  }
}

DgpSpec DgpSpec::high_snr() {
  DgpSpec s;
  s.name = "high_snr";
  s.efficacy = {symmetric_bowl(2.0, 0.01), symmetric_bowl(2.7, 0.2), symmetric_bowl(2.7, 0.01),
                symmetric_bowl(3.2, 0.2)};
  s.safety = {{2.0, 0.0, 0.0}, {2.0, 0.0, -0.01}, {2.0, 0.0, -0.1}, {2.0, 0.0, -0.6}};
  s.noise_sd = 1.0;
  s.scale = 1.0;
  s.printed_effects = std::vector<double>{0.225, 0.475, 0.725};
  return s;
}

DgpSpec DgpSpec::low_snr() {
  DgpSpec s = high_snr();
  s.name = "low_snr";
  s.scale = 0.5;
  s.printed_effects = std::vector<double>{0.1125, 0.2375, 0.3625};
  return s;
}

DgpSpec DgpSpec::named(const std::string& name) {
  if (name == "high_snr" || name == "HighSNR" || name == "high") return high_snr();
  if (name == "low_snr" || name == "LowSNR" || name == "low") return low_snr();
  throw ConfigError("unknown DGP '" + name + "'", {{"dgp", "expected high_snr|low_snr"}});
}

double dgp_mean(const DgpSpec& spec, Endpoint endpoint, double z, ArmId a) {
  if (!a.valid_for(spec.arms())) {
    throw ValidationError("arm " + std::to_string(a.value()) + " is not part of the DGP");
  }
  const auto& f = endpoint == Endpoint::kEfficacy ? spec.efficacy : spec.safety;
  return spec.scale * f[a.index()](z);
}

std::vector<double> quadratic_basis(double z) { return {z, z * z}; }

std::vector<double> true_effect_sizes(const DgpSpec& spec) {
  const double placebo = spec.scale * spec.efficacy.front().standard_normal_mean();
  std::vector<double> out;
  for (std::size_t a = 1; a < spec.efficacy.size(); ++a) {
    out.push_back(spec.scale * spec.efficacy[a].standard_normal_mean() - placebo);
  }
  return out;
}

ArmId best_arm(const DgpSpec& spec) {
  const auto effects = true_effect_sizes(spec);
  std::size_t best = 0;
  for (std::size_t k = 1; k < effects.size(); ++k) {
    if (effects[k] > effects[best]) best = k;
  }
  return ArmId(static_cast<int>(best) + 2);
}

std::vector<EffectSizeRow> effect_size_report(const DgpSpec& spec) {
  const auto effects = true_effect_sizes(spec);
  std::vector<EffectSizeRow> rows;
  for (std::size_t k = 0; k < effects.size(); ++k) {
    EffectSizeRow row;
    row.arm = ArmId(static_cast<int>(k) + 2);
    row.from_formula = effects[k];
    if (spec.printed_effects) {
      row.printed = (*spec.printed_effects)[k];
      row.discrepant = std::abs(*row.printed - row.from_formula) > 1e-9;
    }
    rows.push_back(row);
  }
  return rows;
}

Profile draw_profile(const DgpSpec& spec, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Profile p;
  p.z = normal(rng);
  const double eps = spec.noise_sd * normal(rng);
  const double dlt = spec.noise_sd * normal(rng);
  const auto basis = quadratic_basis(p.z);
  p.x = Covariates::from_raw(basis);
  for (int a = 1; a <= spec.arms(); ++a) {
    p.efficacy.push_back(dgp_mean(spec, Endpoint::kEfficacy, p.z, ArmId(a)) + eps);
    p.safety.push_back(dgp_mean(spec, Endpoint::kSafety, p.z, ArmId(a)) + dlt);
  }
  return p;
}

SimulatedParticipant simulate_participant(const DgpSpec& spec, ArmId a, Rng& rng) {
  if (!a.valid_for(spec.arms())) {
    throw ValidationError("arm " + std::to_string(a.value()) + " is not part of the DGP");
  }
  Profile p = draw_profile(spec, rng);
  return {std::move(p.x), p.efficacy[a.index()], p.safety[a.index()]};
}

}  // namespace rits
