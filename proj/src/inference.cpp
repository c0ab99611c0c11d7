#include "rits/inference.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <Eigen/Cholesky>

#include <cmath>
#include <iostream>
#include <numbers>

namespace rits {

double OutcomeScore::value(const ParticipantRecord& r) const {
  if (efficacy_weight == 1.0) {
    if (!r.efficacy) throw ValidationError("participant " + std::to_string(r.id) + " has no efficacy");
    return *r.efficacy;
  }
  if (!r.has_outcomes()) {
    throw ValidationError("participant " + std::to_string(r.id) + " has incomplete outcomes");
  }
  return efficacy_weight * *r.efficacy + (1.0 - efficacy_weight) * *r.safety;
}

std::string to_string(Variant v) { return v == Variant::kAIPW ? "aipw" : "ipw"; }

Variant parse_variant(const std::string& text) {
  if (text == "aipw" || text == "AIPW") return Variant::kAIPW;
  if (text == "ipw" || text == "IPW") return Variant::kIPW;
  throw ValidationError("unknown variant '" + text + "' (expected aipw|ipw)");
}

FoldSplit split_folds(int n) {
  if (n < 2) throw ValidationError("fold split needs at least 2 observations");
  FoldSplit out;
  out.trn.reserve(static_cast<std::size_t>((n + 1) / 2));
  out.eval.reserve(static_cast<std::size_t>(n / 2));
  for (int i = 1; i <= n; ++i) (i % 2 == 1 ? out.trn : out.eval).push_back(i);
  return out;
}

NuisanceModel NuisanceModel::zero(int arms, Eigen::Index d_raw) {
  return {Vector::Zero(arms), Vector::Zero(d_raw), std::vector<bool>(static_cast<std::size_t>(arms), false)};
}

double NuisanceModel::predict(const Covariates& x, ArmId a) const {
  return intercepts[static_cast<Eigen::Index>(a.index())] + x.raw().dot(slope);
}

namespace {

double recorded_propensity(const ParticipantRecord& r, ArmId a) {
  if (r.propensities.arms() == 0) {
    throw ValidationError("participant " + std::to_string(r.id) + " has no recorded propensities");
  }
  const double q = r.propensities[a];
  if (!(q > 0.0)) {
    throw ValidationError("participant " + std::to_string(r.id) + " has non-positive propensity");
  }
  return q;
}

}  // namespace

NuisanceModel fit_weighted_ridge(RecordRefs fold, int arms, double lambda, OutcomeScore score) {
  if (fold.empty()) throw NumericalError("weighted ridge: empty fold");
  if (!(lambda >= 0.0)) throw ConfigError("ridge penalty must be non-negative", {{"lambda", ">= 0"}});
  const Eigen::Index d = fold.front()->covariates.raw_dim();
  const Eigen::Index p = arms + d;

  Matrix normal = Matrix::Zero(p, p);
  Vector rhs = Vector::Zero(p);
  Vector arm_weight = Vector::Zero(arms);
  double total_weight = 0.0;
  double weighted_sum = 0.0;

  for (const ParticipantRecord* r : fold) {
    if (!r->arm.valid_for(arms)) throw ValidationError("record arm out of range");
    if (r->covariates.raw_dim() != d) throw ValidationError("records disagree on covariate dimension");
    const double wt = 1.0 / recorded_propensity(*r, r->arm);
    const double y = score.value(*r);
    const auto a = static_cast<Eigen::Index>(r->arm.index());
    const auto x = r->covariates.raw();

    normal(a, a) += wt;
    normal.block(a, arms, 1, d) += wt * x.transpose();
    normal.block(arms, arms, d, d).noalias() += wt * x * x.transpose();
    rhs[a] += wt * y;
    rhs.segment(arms, d) += (wt * y) * x;
    arm_weight[a] += wt;
    total_weight += wt;
    weighted_sum += wt * y;
  }
  normal.block(arms, 0, d, arms) = normal.block(0, arms, arms, d).transpose();
  normal.block(arms, arms, d, d).diagonal().array() += lambda;

  // Arms without observations drop out of the system.
  std::vector<Eigen::Index> keep;
  NuisanceModel model = NuisanceModel::zero(arms, d);
  for (Eigen::Index a = 0; a < arms; ++a) {
    if (arm_weight[a] > 0.0) {
      keep.push_back(a);
    } else {
      model.imputed_intercept[static_cast<std::size_t>(a)] = true;
    }
  }
  for (Eigen::Index j = 0; j < d; ++j) keep.push_back(arms + j);

  const auto q = static_cast<Eigen::Index>(keep.size());
  Matrix reduced(q, q);
  Vector reduced_rhs(q);
  for (Eigen::Index i = 0; i < q; ++i) {
    reduced_rhs[i] = rhs[keep[static_cast<std::size_t>(i)]];
    for (Eigen::Index j = 0; j < q; ++j) {
      reduced(i, j) = normal(keep[static_cast<std::size_t>(i)], keep[static_cast<std::size_t>(j)]);
    }
  }

  Eigen::LDLT<Matrix> ldlt(reduced);
  const Vector diag = ldlt.vectorD().cwiseAbs();
  if (ldlt.info() != Eigen::Success || diag.minCoeff() <= 1e-12 * std::max(1.0, diag.maxCoeff())) {
    throw NumericalError("weighted ridge: normal equations are singular");
  }
  const Vector solution = ldlt.solve(reduced_rhs);

  for (Eigen::Index i = 0; i < q; ++i) {
    const Eigen::Index target = keep[static_cast<std::size_t>(i)];
    if (target < arms) {
      model.intercepts[target] = solution[i];
    } else {
      model.slope[target - arms] = solution[i];
    }
  }
  const double global_mean = weighted_sum / total_weight;
  for (Eigen::Index a = 0; a < arms; ++a) {
    if (model.imputed_intercept[static_cast<std::size_t>(a)]) model.intercepts[a] = global_mean;
  }
  return model;
}

double aipw_pseudo_outcome(const ParticipantRecord& record, ArmId a, const NuisanceModel& model,
                           OutcomeScore score) {
  const double fitted_a = model.predict(record.covariates, a);
  if (record.arm != a) {
    if (record.propensities.arms() == 0) {
      throw ValidationError("participant " + std::to_string(record.id) +
                            " has no recorded propensities");
    }
    return fitted_a;
  }
  const double q = recorded_propensity(record, a);
  const double residual = score.value(record) - model.predict(record.covariates, record.arm);
  return fitted_a + residual / q;
}

double ipw_pseudo_outcome(const ParticipantRecord& record, ArmId a, OutcomeScore score) {
  const auto arms = record.propensities.arms();
  return aipw_pseudo_outcome(record, a, NuisanceModel::zero(arms, record.covariates.raw_dim()),
                             score);
}

namespace {

struct FoldStats {
  std::vector<double> sum;
  std::vector<double> sum_sq_dev;
  std::vector<double> mean;
};

// Pseudo-contrasts of `scored` under `model`, one accumulator per active arm.
FoldStats score_fold(RecordRefs scored, const NuisanceModel& model, int arms, OutcomeScore score) {
  const auto active = static_cast<std::size_t>(arms - 1);
  std::vector<std::vector<double>> contrasts(active);
  for (auto& c : contrasts) c.reserve(scored.size());
  for (const ParticipantRecord* r : scored) {
    const double placebo = aipw_pseudo_outcome(*r, kPlacebo, model, score);
    for (std::size_t k = 0; k < active; ++k) {
      const ArmId a(static_cast<int>(k) + 2);
      contrasts[k].push_back(aipw_pseudo_outcome(*r, a, model, score) - placebo);
    }
  }
  FoldStats stats;
  stats.sum.assign(active, 0.0);
  stats.sum_sq_dev.assign(active, 0.0);
  stats.mean.assign(active, 0.0);
  const double size = static_cast<double>(scored.size());
  for (std::size_t k = 0; k < active; ++k) {
    for (double f : contrasts[k]) stats.sum[k] += f;
    stats.mean[k] = stats.sum[k] / size;
    for (double f : contrasts[k]) stats.sum_sq_dev[k] += (f - stats.mean[k]) * (f - stats.mean[k]);
  }
  return stats;
}

}  // namespace

std::vector<ArmEstimate> crossfit_estimate(std::span<const ParticipantRecord> records, int arms,
                                           double lambda, Variant variant, OutcomeScore score) {
  const int n = static_cast<int>(records.size());
  if (n < 4) throw ValidationError("cross-fitting needs at least 4 observations");
  if (arms < 2) throw ConfigError("cross-fitting needs at least 2 arms", {{"K", ">= 2"}});

  std::vector<const ParticipantRecord*> trn;
  std::vector<const ParticipantRecord*> eval;
  trn.reserve(static_cast<std::size_t>(n + 1) / 2);
  eval.reserve(static_cast<std::size_t>(n) / 2);
  for (int i = 0; i < n; ++i) (i % 2 == 0 ? trn : eval).push_back(&records[static_cast<std::size_t>(i)]);
  if (trn.size() < 2 || eval.size() < 2) throw ValidationError("each fold needs at least 2 observations");

  const Eigen::Index d = records.front().covariates.raw_dim();
  const NuisanceModel trained_on_trn = variant == Variant::kAIPW
                                           ? fit_weighted_ridge(trn, arms, lambda, score)
                                           : NuisanceModel::zero(arms, d);
  const NuisanceModel trained_on_eval = variant == Variant::kAIPW
                                            ? fit_weighted_ridge(eval, arms, lambda, score)
                                            : NuisanceModel::zero(arms, d);

  const FoldStats on_eval = score_fold(eval, trained_on_trn, arms, score);
  const FoldStats on_trn = score_fold(trn, trained_on_eval, arms, score);

  std::vector<ArmEstimate> out;
  out.reserve(static_cast<std::size_t>(arms - 1));
  const double n_eval = static_cast<double>(eval.size());
  const double n_trn = static_cast<double>(trn.size());
  for (std::size_t k = 0; k + 1 < static_cast<std::size_t>(arms); ++k) {
    ArmEstimate e;
    e.arm = ArmId(static_cast<int>(k) + 2);
    e.estimate = (on_eval.sum[k] + on_trn.sum[k]) / n;
    const double var_eval = on_eval.sum_sq_dev[k] / (n_eval - 1.0);
    const double var_trn = on_trn.sum_sq_dev[k] / (n_trn - 1.0);
    e.sigma_sq = std::max(kVarianceFloor, 0.5 * (var_eval + var_trn));
    out.push_back(e);
  }
  return out;
}

double rho_m(double m, double alpha, double sigma_hat, RhoMode mode) {
  if (!(m >= 2.0)) throw ValidationError("rho_m needs burn-in m >= 2");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)", {{"alpha", "(0, 1)"}});
  if (!(sigma_hat > 0.0)) {
    std::clog << "warning: rho_m received non-positive sigma_hat " << sigma_hat
              << "; clamping to " << kVarianceFloor << '\n';
    sigma_hat = kVarianceFloor;
  }
  const double log_alpha = -2.0 * std::log(alpha);
  const double numerator = log_alpha + std::log(log_alpha) + 1.0;
  const double scale = mode == RhoMode::kAsPrinted ? sigma_hat : sigma_hat * sigma_hat;
  const double denominator = scale * m * std::log(std::max(m, std::numbers::e));
  return std::sqrt(numerator / denominator);
}

double cs_half_width(double sigma_sq_hat, int n, double rho, double alpha) {
  const double nn = static_cast<double>(n);
  const double rho_sq = rho * rho;
  const double inflated = nn * rho_sq * sigma_sq_hat + 1.0;
  return std::sqrt(2.0 * inflated * std::log(std::sqrt(inflated) / alpha) / (nn * nn * rho_sq));
}

Interval cs_interval(double delta_hat, double sigma_sq_hat, int n, double rho, double alpha) {
  if (n < 1) throw ValidationError("cs_interval needs n >= 1");
  if (!(rho > 0.0)) throw ValidationError("cs_interval needs rho > 0");
  if (!(sigma_sq_hat >= 0.0)) throw ValidationError("cs_interval needs a non-negative variance");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)", {{"alpha", "(0, 1)"}});
  const double half = cs_half_width(sigma_sq_hat, n, rho, alpha);
  return {delta_hat - half, delta_hat + half};
}

int complete_prefix(std::span<const ParticipantRecord> records) {
  int n = 0;
  for (const auto& r : records) {
    if (!r.has_outcomes()) break;
    ++n;
  }
  return n;
}

std::vector<CsSeries> build_asympcs(std::span<const ParticipantRecord> records,
                                    const TrialConfig& config, Variant variant,
                                    OutcomeScore score) {
  std::vector<CsSeries> series;
  for (int a = 2; a <= config.K; ++a) series.push_back({ArmId(a), {}});
  const int available = complete_prefix(records);
  if (available < config.m) return series;

  std::vector<double> rho(series.size(), 0.0);
  for (int n = config.m; n <= available; ++n) {
    const auto estimates = crossfit_estimate(records.first(static_cast<std::size_t>(n)), config.K,
                                             config.lambda, variant, score);
    for (std::size_t k = 0; k < estimates.size(); ++k) {
      const auto& e = estimates[k];
      if (n == config.m) rho[k] = rho_m(config.m, config.alpha, std::sqrt(e.sigma_sq), config.rho_mode);
      const Interval ci = cs_interval(e.estimate, e.sigma_sq, n, rho[k], config.alpha);
      series[k].points.push_back({n, e.arm, e.estimate, ci.lower, ci.upper, e.sigma_sq, rho[k]});
    }
  }
  return series;
}

TInterval welch_interval(double mean_a, double var_a, double n_a, double mean_b, double var_b,
                         double n_b, double alpha) {
  const double estimate = mean_a - mean_b;
  const double va = var_a / n_a;
  const double vb = var_b / n_b;
  const double se_sq = va + vb;
  if (!(se_sq > 0.0)) return {estimate, estimate, estimate};
  const double df = se_sq * se_sq / (va * va / (n_a - 1.0) + vb * vb / (n_b - 1.0));
  const boost::math::students_t dist(df);
  const double t = boost::math::quantile(boost::math::complement(dist, alpha / 2.0));
  const double half = t * std::sqrt(se_sq);
  return {estimate, estimate - half, estimate + half};
}

TInterval two_sample_t_interval(std::span<const ParticipantRecord> records, ArmId a, double alpha,
                                OutcomeScore score) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha must lie in (0, 1)", {{"alpha", "(0, 1)"}});
  auto moments = [&](ArmId arm) {
    double count = 0.0, sum = 0.0;
    for (const auto& r : records) {
      if (r.arm == arm && r.efficacy) {
        count += 1.0;
        sum += score.value(r);
      }
    }
    const double mean = count > 0.0 ? sum / count : 0.0;
    double ss = 0.0;
    for (const auto& r : records) {
      if (r.arm == arm && r.efficacy) ss += (score.value(r) - mean) * (score.value(r) - mean);
    }
    return std::array<double, 3>{count, mean, count > 1.0 ? ss / (count - 1.0) : 0.0};
  };
  const auto treated = moments(a);
  const auto placebo = moments(kPlacebo);
  if (treated[0] < 2.0 || placebo[0] < 2.0) {
    throw ValidationError("t interval needs at least 2 observations in arm " +
                          std::to_string(a.value()) + " and in placebo");
  }
  return welch_interval(treated[1], treated[2], treated[0], placebo[1], placebo[2], placebo[0], alpha);
}

StoppingDecision check_stopping(std::span<const CsPoint> current, double threshold) {
  StoppingDecision out;
  const CsPoint* best = nullptr;
  for (const auto& p : current) {
    if (p.lower > threshold) out.stop = true;
    if (best == nullptr || p.estimate > best->estimate ||
        (p.estimate == best->estimate && p.arm < best->arm)) {
      best = &p;
    }
  }
  if (best != nullptr) out.winner = best->arm;
  return out;
}

}  // namespace rits
