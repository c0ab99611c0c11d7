#include "rits/bayes.hpp"

#include <cmath>

namespace rits {

GaussianPosterior init_prior(Eigen::Index d) {
  if (d < 1) throw ConfigError("prior dimension must be at least 1", {{"d", "must be >= 1"}});
  return {Vector::Zero(d), Matrix::Identity(d, d)};
}

GaussianPosterior init_prior(Vector mean, Matrix precision) {
  if (mean.size() < 1 || precision.rows() != mean.size() || precision.cols() != mean.size()) {
    throw ConfigError("prior mean and precision dimensions disagree");
  }
  if (!precision.isApprox(precision.transpose(), 1e-10)) {
    throw ConfigError("prior precision must be symmetric");
  }
  if (precision.llt().info() != Eigen::Success) {
    throw ConfigError("prior precision must be positive definite");
  }
  return {std::move(mean), std::move(precision)};
}

GaussianPosterior update(const GaussianPosterior& post, const Vector& x, double y,
                         double sigma0_sq) {
  if (x.size() != post.dim()) {
    throw ValidationError("posterior update: regressor has dimension " +
                          std::to_string(x.size()) + ", posterior has " +
                          std::to_string(post.dim()));
  }
  if (!(sigma0_sq > 0.0)) throw ConfigError("sigma0_sq must be positive", {{"sigma0_sq", "> 0"}});

  const double inv = 1.0 / sigma0_sq;
  GaussianPosterior next;
  next.precision = post.precision;
  next.precision.noalias() += inv * x * x.transpose();
  Vector rhs = post.precision * post.mean;
  rhs.noalias() += (inv * y) * x;

  Eigen::LLT<Matrix> llt(next.precision);
  if (llt.info() != Eigen::Success) throw NumericalError("posterior precision lost definiteness");
  next.mean = llt.solve(rhs);
  return next;
}

GaussianPosterior update(const GaussianPosterior& post, const Covariates& x, double y,
                         double sigma0_sq) {
  return update(post, x.augmented(), y, sigma0_sq);
}

PosteriorSampler::PosteriorSampler(const GaussianPosterior& post)
    : mean_(post.mean), llt_(post.precision) {
  if (llt_.info() != Eigen::Success) throw NumericalError("Cholesky of posterior precision failed");
}

Matrix PosteriorSampler::draw(int M, Rng& rng) const {
  if (M < 1) throw ConfigError("number of posterior draws must be at least 1", {{"M", ">= 1"}});
  const Eigen::Index d = mean_.size();
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix z(d, M);
  for (Eigen::Index j = 0; j < M; ++j) {
    for (Eigen::Index i = 0; i < d; ++i) z(i, j) = normal(rng);
  }
  // precision = L L^T; solving L^T v = z gives Cov(v) = precision^{-1}.
  llt_.matrixU().solveInPlace(z);
  z.colwise() += mean_;
  return z;
}

Matrix sample(const GaussianPosterior& post, int M, Rng& rng) {
  return PosteriorSampler(post).draw(M, rng);
}

PosteriorBank PosteriorBank::prior(int arms, Eigen::Index d, double sigma0_sq) {
  if (arms < 1) throw ConfigError("posterior bank needs at least one arm", {{"K", ">= 1"}});
  if (!(sigma0_sq > 0.0)) throw ConfigError("sigma0_sq must be positive", {{"sigma0_sq", "> 0"}});
  PosteriorBank bank;
  bank.efficacy.assign(static_cast<std::size_t>(arms), init_prior(d));
  bank.safety.assign(static_cast<std::size_t>(arms), init_prior(d));
  bank.sigma0_sq = sigma0_sq;
  return bank;
}

void PosteriorBank::absorb(const ParticipantRecord& record) {
  if (!record.has_outcomes()) {
    throw ValidationError("participant " + std::to_string(record.id) + " has no outcomes to absorb");
  }
  if (!record.arm.valid_for(arms())) {
    throw ValidationError("participant " + std::to_string(record.id) + " has arm out of range");
  }
  const auto a = record.arm.index();
  efficacy[a] = update(efficacy[a], record.covariates, *record.efficacy, sigma0_sq);
  safety[a] = update(safety[a], record.covariates, *record.safety, sigma0_sq);
  ++observations;
}

PosteriorBank update_batch(PosteriorBank bank, std::span<const ParticipantRecord> records) {
  for (const auto& r : records) bank.absorb(r);
  return bank;
}

}  // namespace rits
