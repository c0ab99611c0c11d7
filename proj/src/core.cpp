#include "rits/core.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

namespace rits {

Covariates Covariates::from_raw(std::span<const double> raw) {
  Vector augmented(static_cast<Eigen::Index>(raw.size()) + 1);
  augmented[0] = 1.0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (!std::isfinite(raw[i])) {
      throw ValidationError("covariate " + std::to_string(i) + " is not finite");
    }
    augmented[static_cast<Eigen::Index>(i) + 1] = raw[i];
  }
  return Covariates(std::move(augmented));
}

std::vector<double> Covariates::raw_vector() const {
  return std::vector<double>(augmented_.data() + 1, augmented_.data() + augmented_.size());
}

Covariates augment_covariates(std::span<const double> raw) { return Covariates::from_raw(raw); }

double rescale_endpoint(double v, double lo, double hi) {
  if (!(hi > lo)) {
    throw ConfigError("rescale_endpoint: upper bound must exceed lower bound",
                      {{"hi", "must be greater than lo"}});
  }
  return (v - lo) / (hi - lo);
}

PropensityVector PropensityVector::uniform(int arms) {
  return PropensityVector(std::vector<double>(static_cast<std::size_t>(arms), 1.0 / arms));
}

double PropensityVector::sum() const noexcept {
  return std::accumulate(probs_.begin(), probs_.end(), 0.0);
}

ArmId PropensityVector::argmax() const {
  if (probs_.empty()) throw ValidationError("argmax of an empty propensity vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < probs_.size(); ++i) {
    if (probs_[i] > probs_[best]) best = i;
  }
  return ArmId::from_index(best);
}

std::string to_string(RhoMode mode) {
  return mode == RhoMode::kAsPrinted ? "as_printed" : "variance";
}

RhoMode parse_rho_mode(const std::string& text) {
  if (text == "as_printed" || text == "sd") return RhoMode::kAsPrinted;
  if (text == "variance" || text == "var") return RhoMode::kVariance;
  throw ConfigError("unknown rho mode '" + text + "'", {{"rho_mode", "expected as_printed|variance"}});
}

std::vector<ConfigError::FieldIssue> TrialConfig::issues() const {
  std::vector<ConfigError::FieldIssue> out;
  auto flag = [&](const char* field, const std::string& msg) { out.push_back({field, msg}); };
  if (K < 2) flag("K", "need at least 2 arms");
  if (d_raw < 0) flag("d_raw", "must be non-negative");
  if (!(w >= 0.0 && w <= 1.0)) flag("w", "must lie in [0, 1]");
  if (K >= 2 && !(delta > 0.0 && delta < 1.0 / K)) flag("delta", "must satisfy 0 < delta < 1/K");
  if (n0 < K) flag("n0", "must be at least K");
  if (m < n0) flag("m", "must be at least n0");
  if (m < 4) flag("m", "must be at least 4 for cross-fitting");
  if (!(alpha > 0.0 && alpha < 1.0)) flag("alpha", "must lie in (0, 1)");
  if (!(sigma0_sq > 0.0) || !std::isfinite(sigma0_sq)) flag("sigma0_sq", "must be positive");
  if (M < 1) flag("M", "must be at least 1");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) flag("lambda", "must be non-negative");
  if (delay < 0) flag("delay", "must be non-negative");
  if (!std::isfinite(threshold)) flag("threshold", "must be finite");
  return out;
}

void TrialConfig::validate() const {
  auto found = issues();
  if (found.empty()) return;
  std::ostringstream msg;
  msg << "invalid trial configuration:";
  for (const auto& issue : found) msg << ' ' << issue.field << " (" << issue.message << ")";
  throw ConfigError(msg.str(), std::move(found));
}

}  // namespace rits
