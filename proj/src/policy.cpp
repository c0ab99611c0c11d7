#include "rits/policy.hpp"

#include <algorithm>
#include <cctype>

namespace rits {

PolicyKind PolicyKind::rits(double w) {
  if (!(w >= 0.0 && w <= 1.0)) throw ConfigError("RiTS weight must lie in [0, 1]", {{"w", "[0, 1]"}});
  return {Kind::kRiTS, w};
}

PolicyKind PolicyKind::parse(const std::string& name, double w) {
  std::string lower = name;
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (lower == "rand" || lower == "er") return rand();
  if (lower == "ts") return ts();
  if (lower == "rits") return rits(w);
  throw ConfigError("unknown policy '" + name + "'", {{"policy", "expected rand|ts|rits"}});
}

std::string PolicyKind::name() const {
  switch (kind) {
    case Kind::kRand: return "Rand";
    case Kind::kTS: return "TS";
    case Kind::kRiTS: return "RiTS";
  }
  return "?";
}

PropensityVector argmax_frequencies(const Matrix& scores) {
  const Eigen::Index K = scores.rows();
  const Eigen::Index M = scores.cols();
  if (K < 1 || M < 1) throw ValidationError("argmax_frequencies needs a non-empty score matrix");
  std::vector<long> wins(static_cast<std::size_t>(K), 0);
  for (Eigen::Index m = 0; m < M; ++m) {
    Eigen::Index best = 0;
    for (Eigen::Index a = 1; a < K; ++a) {
      if (scores(a, m) > scores(best, m)) best = a;
    }
    ++wins[static_cast<std::size_t>(best)];
  }
  std::vector<double> probs(wins.size());
  for (std::size_t a = 0; a < wins.size(); ++a) {
    probs[a] = static_cast<double>(wins[a]) / static_cast<double>(M);
  }
  return PropensityVector(std::move(probs));
}

Eigen::RowVectorXd linear_scores(const Covariates& x, const Matrix& draws) {
  if (draws.rows() != x.dim()) {
    throw ValidationError("covariate dimension " + std::to_string(x.dim()) +
                          " does not match coefficient dimension " + std::to_string(draws.rows()));
  }
  return x.augmented().transpose() * draws;
}

namespace {

void check_draw_shapes(std::span<const Matrix> draws) {
  if (draws.empty()) throw ValidationError("no arms to score");
  for (const auto& d : draws) {
    if (d.cols() != draws.front().cols() || d.cols() < 1) {
      throw ValidationError("every arm needs the same positive number of draws");
    }
  }
}

}  // namespace

PropensityVector ts_propensities_from_draws(const Covariates& x,
                                            std::span<const Matrix> efficacy_draws) {
  check_draw_shapes(efficacy_draws);
  Matrix scores(static_cast<Eigen::Index>(efficacy_draws.size()), efficacy_draws.front().cols());
  for (std::size_t a = 0; a < efficacy_draws.size(); ++a) {
    scores.row(static_cast<Eigen::Index>(a)) = linear_scores(x, efficacy_draws[a]);
  }
  return argmax_frequencies(scores);
}

PropensityVector rits_propensities_from_draws(const Covariates& x,
                                              std::span<const Matrix> efficacy_draws,
                                              std::span<const Matrix> safety_draws, double w) {
  if (!(w >= 0.0 && w <= 1.0)) throw ConfigError("RiTS weight must lie in [0, 1]", {{"w", "[0, 1]"}});
  check_draw_shapes(efficacy_draws);
  check_draw_shapes(safety_draws);
  if (efficacy_draws.size() != safety_draws.size() ||
      efficacy_draws.front().cols() != safety_draws.front().cols()) {
    throw ValidationError("efficacy and safety draws must pair up per arm and index");
  }
  Matrix scores(static_cast<Eigen::Index>(efficacy_draws.size()), efficacy_draws.front().cols());
  for (std::size_t a = 0; a < efficacy_draws.size(); ++a) {
    const Eigen::RowVectorXd eff = linear_scores(x, efficacy_draws[a]);
    const Eigen::RowVectorXd saf = linear_scores(x, safety_draws[a]);
    scores.row(static_cast<Eigen::Index>(a)) = w * eff + (1.0 - w) * saf;
  }
  return argmax_frequencies(scores);
}

namespace {

std::vector<Matrix> draw_all(std::span<const GaussianPosterior> posts, int M, Rng& rng) {
  std::vector<Matrix> draws;
  draws.reserve(posts.size());
  for (const auto& p : posts) draws.push_back(PosteriorSampler(p).draw(M, rng));
  return draws;
}

}  // namespace

PropensityVector ts_propensities(std::span<const GaussianPosterior> efficacy, const Covariates& x,
                                 int M, Rng& rng) {
  const auto draws = draw_all(efficacy, M, rng);
  return ts_propensities_from_draws(x, draws);
}

double rits_utility(const Vector& x, const Vector& b, const Vector& g, double w) {
  if (!(w >= 0.0 && w <= 1.0)) throw ConfigError("RiTS weight must lie in [0, 1]", {{"w", "[0, 1]"}});
  if (x.size() != b.size() || x.size() != g.size()) {
    throw ValidationError("rits_utility: dimension mismatch");
  }
  return w * x.dot(b) + (1.0 - w) * x.dot(g);
}

PropensityVector rits_propensities(const PosteriorBank& bank, const Covariates& x, double w,
                                   int M, Rng& rng) {
  const auto eff = draw_all(bank.efficacy, M, rng);
  const auto saf = draw_all(bank.safety, M, rng);
  return rits_propensities_from_draws(x, eff, saf, w);
}

PropensityVector clip_propensities(const PropensityVector& q, double delta) {
  const int K = q.arms();
  if (K < 1) throw ValidationError("cannot clip an empty propensity vector");
  if (!(delta >= 0.0 && delta < 1.0 / K)) {
    throw ConfigError("clipping level must satisfy 0 < delta < 1/K", {{"delta", "< 1/K"}});
  }
  const double shrink = 1.0 - K * delta;
  std::vector<double> out(q.values().size());
  for (std::size_t a = 0; a < out.size(); ++a) out[a] = delta + shrink * q.values()[a];
  return PropensityVector(std::move(out));
}

ArmId draw_arm(const PropensityVector& q, Rng& rng) {
  if (q.arms() < 1) throw ValidationError("cannot draw from an empty propensity vector");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng) * q.sum();
  double cumulative = 0.0;
  for (int a = 0; a < q.arms() - 1; ++a) {
    cumulative += q.at(static_cast<std::size_t>(a));
    if (u < cumulative) return ArmId::from_index(static_cast<std::size_t>(a));
  }
  return ArmId(q.arms());
}

PosteriorBank posterior_for_enrollment(std::span<const ParticipantRecord> history, int n,
                                       const TrialConfig& config) {
  auto bank = PosteriorBank::prior(config.K, config.d_raw + 1, config.sigma0_sq);
  for (const auto& r : history) {
    if (r.usable_at(n)) bank.absorb(r);
  }
  return bank;
}

Allocation propensities_for_enrollment(const PosteriorBank& bank, int n, const TrialConfig& config,
                                       const PolicyKind& policy, const Covariates& x) {
  if (x.raw_dim() != config.d_raw) {
    throw ValidationError("expected " + std::to_string(config.d_raw) + " covariates, got " +
                          std::to_string(x.raw_dim()));
  }
  Allocation out;
  if (n <= config.n0 || policy.kind == PolicyKind::Kind::kRand) {
    out.raw_propensities = PropensityVector::uniform(config.K);
    out.propensities = out.raw_propensities;
    return out;
  }
  // Keyed by the information state, so that an unchanged posterior gives the
  // same propensities for the same covariates.
  auto draws = derive_rng(config.seed, {posterior_stream(bank), tag(Stream::kPosteriorDraws)});
  out.raw_propensities = policy.kind == PolicyKind::Kind::kTS
                             ? ts_propensities(bank.efficacy, x, config.M, draws)
                             : rits_propensities(bank, x, policy.w, config.M, draws);
  out.propensities = clip_propensities(out.raw_propensities, config.delta);
  return out;
}

std::uint64_t posterior_stream(const PosteriorBank& bank) {
  return static_cast<std::uint64_t>(bank.observations);
}

Allocation allocate_with_bank(const PosteriorBank& bank, int n, const TrialConfig& config,
                              const PolicyKind& policy, const Covariates& x) {
  Allocation out = propensities_for_enrollment(bank, n, config, policy, x);
  auto arm_rng = derive_rng(config.seed, {static_cast<std::uint64_t>(n), tag(Stream::kArmDraw)});
  out.arm = draw_arm(out.propensities, arm_rng);
  return out;
}

Allocation allocate(std::span<const ParticipantRecord> history, const TrialConfig& config,
                    const PolicyKind& policy, const Covariates& x) {
  const int n = static_cast<int>(history.size()) + 1;
  const bool adaptive = n > config.n0 && policy.kind != PolicyKind::Kind::kRand;
  const auto bank = adaptive ? posterior_for_enrollment(history, n, config)
                             : PosteriorBank::prior(config.K, config.d_raw + 1, config.sigma0_sq);
  return allocate_with_bank(bank, n, config, policy, x);
}

}  // namespace rits
